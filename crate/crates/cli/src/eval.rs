use ibm_toolkit::ibm_core::{
    alpha_k, beta_k, conditioned_drift, first_passage_density_mckean, h_eval, h_reflected, i_k_quadrature, last_zero_rate,
    lebedev_f, lemma_hbta_rhs, nth_passage_asymptotic, nth_passage_joint_density, phi_cap_lastpassage, phi_cap_supremum,
    q_density, q_hit_probability, s_infinity_atom, s_infinity_law, survival_asymptotic, survival_constant,
    transition_density, PenaltyWeight, PhaseState,
};
use ibm_toolkit::specfun::{bessel_k_imag, gamma, hyp_u, sech_pow_cos_transform, QuadratureSpec};
use ibm_toolkit::Result as LibResult;

use crate::config::RunConfig;
use crate::table::{Cell, Table};
use crate::CliError;

type EvalFn = fn(&[f64], Option<&PenaltyWeight>, &QuadratureSpec) -> LibResult<Vec<f64>>;

pub struct Target {
    pub name: &'static str,
    pub args: &'static [&'static str],
    /// Arguments that must be integers.
    pub ints: &'static [&'static str],
    pub phi: bool,
    pub outputs: &'static [&'static str],
    pub about: &'static str,
    f: EvalFn,
}

fn st(x: f64, y: f64) -> PhaseState {
    PhaseState::new(x, y)
}

fn one(r: LibResult<f64>) -> LibResult<Vec<f64>> {
    r.map(|v| vec![v])
}

fn phi(p: Option<&PenaltyWeight>) -> &PenaltyWeight {
    p.expect("phi presence checked before evaluation")
}

macro_rules! target {
    ($name:expr, [$($a:expr),*], [$($i:expr),*], $phi:expr, [$($o:expr),*], $about:expr, $f:expr) => {
        Target { name: $name, args: &[$($a),*], ints: &[$($i),*], phi: $phi, outputs: &[$($o),*], about: $about, f: $f }
    };
}

pub const TARGETS: &[Target] = &[
    target!("h", ["x", "y"], [], false, ["h"], "harmonic function of the killed process", |a, _, _| one(h_eval(st(a[0], a[1])))),
    target!("h_reflected", ["x", "y"], [], false, ["h_reflected"], "h(-x, -y)", |a, _, _| one(h_reflected(st(a[0], a[1])))),
    target!("drift", ["x", "y"], [], false, ["drift"], "conditioned drift d/dy ln h", |a, _, _| {
        one(conditioned_drift(st(a[0], a[1])))
    }),
    target!("p_t", ["t", "x", "y", "u", "v"], [], false, ["p_t"], "free transition density", |a, _, _| {
        one(transition_density(a[0], st(a[1], a[2]), st(a[3], a[4])))
    }),
    target!("q_t", ["t", "x", "y", "u", "v"], [], false, ["q_t"], "p_t minus its mirrored image", |a, _, _| {
        one(q_density(a[0], st(a[1], a[2]), st(a[3], a[4])))
    }),
    target!("survival", ["t", "x", "y"], [], false, ["survival"], "large-t equivalent of P(T_0 > t)", |a, _, _| {
        one(survival_asymptotic(a[0], st(a[1], a[2])))
    }),
    target!("survival_asymptotic", ["t", "x", "y"], [], false, ["survival"], "same as survival", |a, _, _| {
        one(survival_asymptotic(a[0], st(a[1], a[2])))
    }),
    target!("survival_constant", [], [], false, ["c"], "constant C of the survival equivalent", |_, _, _| {
        Ok(vec![survival_constant()])
    }),
    target!("last_zero_rate", ["s", "x", "y"], [], false, ["rate"], "density in s of zeros of X", |a, _, _| {
        one(last_zero_rate(a[0], st(a[1], a[2])))
    }),
    target!("nth_passage_density", ["n", "b", "t", "z"], ["n"], false, ["density"], "joint density of the n-th zero time and speed from (0, b)", |a, _, q| {
        one(nth_passage_joint_density(a[0] as u32, a[1], a[2], a[3], q))
    }),
    target!("nth_passage_asymptotic", ["t", "n", "b"], ["n"], false, ["survival"], "large-t equivalent of P(n-th zero > t)", |a, _, _| {
        one(nth_passage_asymptotic(a[0], a[1] as u32, a[2]))
    }),
    target!("first_passage_density", ["t", "b", "w"], [], false, ["density"], "first zero time and speed density from (0, b)", |a, _, _| {
        one(first_passage_density_mckean(a[0], a[1], a[2]))
    }),
    target!("q_hit", ["x", "y", "a"], [], false, ["probability"], "probability that the conditioned process hits level a", |a, _, _| {
        one(q_hit_probability(st(a[0], a[1]), a[2]))
    }),
    target!("lemma_hbta", ["x", "y", "a"], [], false, ["value"], "E[h(a, B at the hitting time of a)]", |a, _, _| {
        one(lemma_hbta_rhs(st(a[0], a[1]), a[2]))
    }),
    target!("phi_cap_lastpassage", ["x", "y"], [], true, ["phi_cap"], "normalizer under last-zero penalization", |a, p, q| {
        one(phi_cap_lastpassage(st(a[0], a[1]), phi(p), q))
    }),
    target!("phi_cap_supremum", ["x", "y"], [], true, ["phi_cap"], "normalizer under supremum penalization", |a, p, q| {
        one(phi_cap_supremum(st(a[0], a[1]), phi(p), q))
    }),
    target!("phi_caps", ["x", "y"], [], true, ["lastpassage", "supremum"], "both normalizers", |a, p, q| {
        Ok(vec![phi_cap_lastpassage(st(a[0], a[1]), phi(p), q)?, phi_cap_supremum(st(a[0], a[1]), phi(p), q)?])
    }),
    target!("s_infinity_law", ["x", "y", "c"], [], true, ["tail"], "P(S_inf > c) under the penalized measure", |a, p, q| {
        one(s_infinity_law(st(a[0], a[1]), phi(p), a[2], q))
    }),
    target!("s_infinity_atom", ["x", "y"], [], true, ["atom"], "P(S_inf = x) under the penalized measure", |a, p, q| {
        one(s_infinity_atom(st(a[0], a[1]), phi(p), q))
    }),
    target!("lebedev_f", ["a"], [], false, ["f"], "order integral of the Macdonald function", |a, _, q| one(lebedev_f(a[0], q))),
    target!("i_k", ["k", "a"], ["k"], false, ["i_k"], "k-th order integral of the Macdonald kernel", |a, _, q| {
        one(i_k_quadrature(a[0] as u32, a[1], q))
    }),
    target!("alpha_k", ["k"], ["k"], false, ["alpha"], "linear coefficient of I_k at small a", |a, _, q| one(alpha_k(a[0] as u32, q))),
    target!("beta_k", ["k"], ["k"], false, ["beta"], "large-t coefficient of the n-th passage tail", |a, _, _| Ok(vec![beta_k(a[0] as u32)])),
    target!("sech_transform", ["k", "u"], ["k"], false, ["value"], "cosine transform of sech^k(pi g / 3)", |a, _, _| {
        one(sech_pow_cos_transform(a[0] as u32, a[1]))
    }),
    target!("bessel_k_imag", ["g", "a"], [], false, ["k"], "K_{ig}(a)", |a, _, q| one(bessel_k_imag(a[0], a[1], q))),
    target!("hyp_u", ["a", "b", "z"], [], false, ["u"], "Tricomi U(a, b, z)", |a, _, q| one(hyp_u(a[0], a[1], a[2], q))),
    target!("gamma", ["z"], [], false, ["gamma"], "Euler gamma", |a, _, _| one(gamma(a[0]))),
];

pub fn find(name: &str) -> Option<&'static Target> {
    TARGETS.iter().find(|t| t.name == name)
}

pub fn usage_list() -> String {
    let mut s = String::from("targets:\n");
    for t in TARGETS {
        let mut args: Vec<String> = t.args.iter().map(|a| format!("--{a}")).collect();
        if t.phi {
            args.push("--phi".into());
        }
        s.push_str(&format!("  {:<24} {:<28} {}\n", t.name, args.join(" "), t.about));
    }
    s
}

pub const EVAL_KEYS: &[&str] =
    &["target", "phi", "x", "y", "t", "u", "v", "s", "n", "b", "z", "w", "a", "c", "k", "g"];

/// Loads `--phi`: a breakpoint string or the path of a JSON weight file.
pub fn load_phi(spec: &str) -> LibResult<PenaltyWeight> {
    if spec.ends_with(".json") {
        let text = std::fs::read_to_string(spec)
            .map_err(|e| ibm_toolkit::Error::Config(format!("cannot read weight file {spec}: {e}")))?;
        return serde_json::from_str(&text).map_err(|e| ibm_toolkit::Error::Config(format!("weight file {spec}: {e}")));
    }
    PenaltyWeight::parse(spec)
}

pub fn run(cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.check_keys(EVAL_KEYS)?;
    let name = cfg.str_param("target")?.ok_or_else(|| CliError::Usage(format!("eval needs a target\n{}", usage_list())))?;
    let target =
        find(&name).ok_or_else(|| CliError::Usage(format!("unknown target '{name}'\n{}", usage_list())))?;
    let arity = || {
        let mut need: Vec<String> = target.args.iter().map(|a| format!("--{a}")).collect();
        if target.phi {
            need.push("--phi".into());
        }
        CliError::Usage(format!("bad arity for '{name}': expects {}", if need.is_empty() { "no arguments".into() } else { need.join(" ") }))
    };
    for k in cfg.params.keys() {
        let k = k.as_str();
        if k != "target" && !(k == "phi" && target.phi) && !target.args.contains(&k) {
            return Err(arity());
        }
    }
    let phi = match (target.phi, cfg.str_param("phi")?) {
        (true, Some(s)) => Some(load_phi(&s).map_err(CliError::from_lib)?),
        (true, None) => return Err(arity()),
        (false, _) => None,
    };
    let mut axes = Vec::new();
    for a in target.args {
        let v = cfg.numbers(a)?.ok_or_else(arity)?;
        if target.ints.contains(a) && v.iter().any(|x| !(x.fract() == 0.0 && *x >= 0.0 && *x < 1e9)) {
            return Err(CliError::Usage(format!("--{a} must be a nonnegative integer")));
        }
        axes.push(v);
    }
    let mut cols: Vec<&str> = target.args.to_vec();
    cols.extend_from_slice(target.outputs);
    let mut table = Table::new(&cols);
    let spec = QuadratureSpec::default();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut point = vec![0.0; axes.len()];
    for idx in 0..total {
        // row-major over the argument lists, last argument fastest
        let mut r = idx;
        for (j, ax) in axes.iter().enumerate().rev() {
            point[j] = ax[r % ax.len()];
            r /= ax.len();
        }
        let vals = (target.f)(&point, phi.as_ref(), &spec).map_err(CliError::from_lib)?;
        let mut row: Vec<Cell> = point.iter().map(|&v| Cell::Num(v)).collect();
        row.extend(vals.into_iter().map(Cell::Num));
        table.push(row);
    }
    Ok(table)
}

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Continuous, nonnegative, piecewise-linear weight with compact support.
///
/// Constant to the left of the first breakpoint; the last breakpoint sits at `support_end`
/// with value 0 and the weight vanishes beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightRepr", into = "WeightRepr")]
pub struct PenaltyWeight {
    breakpoints: Vec<(f64, f64)>,
    support_end: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightRepr {
    breakpoints: Vec<(f64, f64)>,
    support_end: f64,
}

impl TryFrom<WeightRepr> for PenaltyWeight {
    type Error = Error;
    fn try_from(r: WeightRepr) -> Result<Self> {
        PenaltyWeight::new(r.breakpoints, r.support_end)
    }
}

impl From<PenaltyWeight> for WeightRepr {
    fn from(w: PenaltyWeight) -> Self {
        WeightRepr {
            breakpoints: w.breakpoints,
            support_end: w.support_end,
        }
    }
}

impl PenaltyWeight {
    pub fn new(breakpoints: Vec<(f64, f64)>, support_end: f64) -> Result<Self> {
        if breakpoints.len() < 2 {
            return domain("penalty weight needs at least two breakpoints");
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return domain("breakpoints must be strictly increasing");
            }
        }
        if breakpoints.iter().any(|&(z, v)| !z.is_finite() || !v.is_finite() || v < 0.0) {
            return domain("breakpoint values must be finite and nonnegative");
        }
        if !breakpoints.iter().any(|&(_, v)| v > 0.0) {
            return domain("penalty weight must have a strictly positive value");
        }
        let &(zl, vl) = breakpoints.last().unwrap();
        if zl != support_end || vl != 0.0 {
            return domain("last breakpoint must be (support_end, 0)");
        }
        Ok(PenaltyWeight {
            breakpoints,
            support_end,
        })
    }

    /// Tent from 0 at `lo` up to `peak` at `mid` and back to 0 at `hi`.
    pub fn triangular(lo: f64, mid: f64, hi: f64, peak: f64) -> Result<Self> {
        PenaltyWeight::new(vec![(lo, 0.0), (mid, peak), (hi, 0.0)], hi)
    }

    /// Parses `"z0:v0,z1:v1,..."`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bp = Vec::new();
        for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (z, v) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("breakpoint '{item}' is not z:v")))?;
            let z: f64 = z.trim().parse().map_err(|_| Error::Config(format!("bad z in '{item}'")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("bad value in '{item}'")))?;
            bp.push((z, v));
        }
        let end = bp.last().map(|p| p.0).unwrap_or(0.0);
        PenaltyWeight::new(bp, end)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn value(&self, z: f64) -> f64 {
        let bp = &self.breakpoints;
        if z <= bp[0].0 {
            return bp[0].1;
        }
        if z >= self.support_end {
            return 0.0;
        }
        let i = bp.partition_point(|p| p.0 <= z) - 1;
        let (z0, v0) = bp[i];
        let (z1, v1) = bp[i + 1];
        v0 + (v1 - v0) * (z - z0) / (z1 - z0)
    }

    /// Linear pieces as (z_start, z_end, slope); slope is 0 outside the breakpoint span.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .map(|w| (w[0].0, w[1].0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
    }

    pub fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.iter().map(|p| p.0)
    }
}

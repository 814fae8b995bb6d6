//! Closed-form quantities for integrated Brownian motion (X, B), X_t = x + ∫_0^t B_u du.
//!
//! The central object is the function h, harmonic for the generator ½∂²_y + y∂_x of the
//! process killed when X hits 0, with h(0, y) = √(y⁺) and h(x, y) = x^{1/6} h(1, y/x^{1/3}).

mod asymptotics;
mod density;
mod harmonic;
mod lastpassage;
mod passage;
mod supremum;
mod weight;

pub use asymptotics::{
    alpha_k, beta_k, beta_k_small_a, c_k_minus_1, i_k_quadrature, i_k_remainder, i_k_sech_route, lebedev_f, lebedev_f_closed, lebedev_f_stated,
    nth_passage_asymptotic, survival_asymptotic, survival_constant, AsymptoticCoeffs,
};
pub use density::{abs_moment_gaussian, last_zero_rate, q_density, transition_density};
pub use harmonic::{conditioned_drift, h_eval, h_grad, h_reflected, HFast};
pub use lastpassage::{azema_ratio, azema_remainder, martingale_lastpassage, phi_cap_lastpassage, triplet_density_g0, LastZero};
pub use passage::{
    first_passage_density_mckean, lemma_hbta_rhs, nth_passage_joint_density, nth_passage_kernel, nth_passage_kernel_direct, q_hit_probability,
    qa_selfstart_density,
};
pub use supremum::{
    martingale_supremum, phi_cap_supremum, phi_cap_supremum_direct, s_infinity_atom, s_infinity_law,
    s_infinity_tail_mass,
};
pub use weight::PenaltyWeight;

use serde::{Deserialize, Serialize};

/// Position and velocity of the pair (X, B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
}

impl PhaseState {
    pub const fn new(x: f64, y: f64) -> Self {
        PhaseState { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// The mirrored state (−x, −y); the law of (−X, −B) from (x, y) is that of (X, B) from (−x, −y).
    pub fn mirrored(&self) -> Self {
        PhaseState { x: -self.x, y: -self.y }
    }
}

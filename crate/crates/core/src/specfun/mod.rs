//! Special functions and quadrature.

mod bessel;
mod gamma;
mod hyperu;
mod quad;
mod sech;

pub use bessel::{bessel_k_imag, bessel_k_imag_direct};
pub use gamma::{erf, erfc, gamma, ln_gamma};
pub use hyperu::hyp_u;
pub use quad::{
    gauss_legendre, integrate, integrate_from, integrate_panels, integrate_semi_infinite,
    QuadratureSpec,
};
pub use sech::sech_pow_cos_transform;

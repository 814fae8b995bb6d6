use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of refinements before meeting its tolerance.
    #[error("quadrature did not converge: last estimate {last}, previous {previous}, error estimate {error_estimate}")]
    NonConvergence {
        last: f64,
        previous: f64,
        error_estimate: f64,
    },

    #[error("conditioned integrator step collapsed below {dt_min} at t={t}, x={x}, y={y}")]
    StepCollapse { t: f64, x: f64, y: f64, dt_min: f64 },

    /// A conditioned path crossed zero; this should never happen and aborts the run.
    #[error("diagnostics: {0}")]
    Diagnostics(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

/// Carries the first error raised inside a quadrature integrand, which must be `Fn`.
#[derive(Default)]
pub(crate) struct FirstError(std::cell::RefCell<Option<Error>>);

impl FirstError {
    pub(crate) fn capture(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    pub(crate) fn finish<T>(self, r: Result<T>) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => r,
        }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate initialization: {0}")]
    DegenerateInit(String),

    #[error("auxiliary energy E1 = {e1} is not positive; raise the shift c0")]
    NonpositiveAuxEnergy { e1: f64 },

    #[error(
        "semi-implicit scheme is unstable for tau = {tau}, mu = {mu}, alpha = {alpha} \
         (left-hand symbol reaches {min_symbol:e}; need tau * mu < 3 * alpha)"
    )]
    SchemeInstability {
        tau: f64,
        mu: f64,
        alpha: f64,
        min_symbol: f64,
    },

    #[error("level-set evolution diverged at iteration {iter}: {reason}")]
    Divergence { iter: usize, reason: String },

    #[error("invalid fixture: {0}")]
    InvalidFixture(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a finite positive number, got {value}"),
        })
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a finite non-negative number, got {value}"),
        })
    }
}

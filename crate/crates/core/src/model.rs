//! Declarative model description shared by the energy and solver modules.

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::levelset::DiracSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `mu * sum (alpha/2) |lap phi|^2 + 1/4 (|grad phi|^2 - 1)^2`
    Mbe { mu: f64, alpha: f64 },
    /// Single-well distance regularizer `mu * sum 1/2 (|grad phi| - 1)^2`.
    Dr1 { mu: f64 },
    /// Double-well distance regularizer.
    Dr2 { mu: f64 },
}

impl Regularizer {
    pub fn mu(&self) -> f64 {
        match *self {
            Regularizer::Mbe { mu, .. } | Regularizer::Dr1 { mu } | Regularizer::Dr2 { mu } => mu,
        }
    }

    /// Coefficient `c` of the linear part `L = c * biharmonic`; zero for the
    /// first-order regularizers.
    pub fn linear_coefficient(&self) -> f64 {
        match *self {
            Regularizer::Mbe { mu, alpha } => mu * alpha,
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Mbe { .. } => "mbe",
            Regularizer::Dr1 { .. } => "dr1",
            Regularizer::Dr2 { .. } => "dr2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fidelity {
    /// Geodesic active contour: weighted length plus balloon term.
    Gac {
        lambda: f64,
        gamma: f64,
        sigma_edge: f64,
    },
    /// Region-scalable fitting with an arc-length term of weight `nu`.
    Rsf {
        lambda1: f64,
        lambda2: f64,
        sigma: f64,
        nu: f64,
    },
}

impl Fidelity {
    pub fn name(&self) -> &'static str {
        match self {
            Fidelity::Gac { .. } => "gac",
            Fidelity::Rsf { .. } => "rsf",
        }
    }
}

/// How the curvature-type terms `delta(phi) div(w grad phi / |grad phi|)` are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurvatureForm {
    /// `delta(phi)` times the central divergence of the weighted unit normal.
    #[default]
    Literal,
    /// Exact discrete variational derivative of `sum w delta(phi) |grad phi|`:
    /// `div(w delta(phi) n) - w delta'(phi) |grad phi|`. Agrees with the literal
    /// form in the continuum limit.
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Sav,
    Fdm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub fidelity: Fidelity,
    pub regularizer: Regularizer,
    pub dirac: DiracSpec,
    pub curvature: CurvatureForm,
    pub scheme: Scheme,
    pub tau: f64,
    pub iter_max: usize,
    /// Stop once `max |phi^{n+1} - phi^n| / tau` falls below this value.
    pub tol: Option<f64>,
    /// Shift added to the lower-order energy so that it stays positive.
    pub c0: f64,
}

pub const DEFAULT_C0: f64 = 1.0;
pub const DEFAULT_GAMMA: f64 = 1.0;

impl ModelSpec {
    pub fn new(fidelity: Fidelity, regularizer: Regularizer, scheme: Scheme, tau: f64, iter_max: usize) -> Self {
        Self {
            fidelity,
            regularizer,
            dirac: DiracSpec::default(),
            curvature: CurvatureForm::default(),
            scheme,
            tau,
            iter_max,
            tol: None,
            c0: DEFAULT_C0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.regularizer {
            Regularizer::Mbe { mu, alpha } => {
                check_nonnegative("mu", mu)?;
                check_positive("alpha", alpha)?;
            }
            Regularizer::Dr1 { mu } | Regularizer::Dr2 { mu } => check_nonnegative("mu", mu)?,
        }
        match self.fidelity {
            Fidelity::Gac {
                lambda,
                gamma,
                sigma_edge,
            } => {
                check_positive("lambda", lambda)?;
                if !gamma.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "gamma",
                        reason: format!("must be finite, got {gamma}"),
                    });
                }
                check_positive("sigma_edge", sigma_edge)?;
            }
            Fidelity::Rsf {
                lambda1,
                lambda2,
                sigma,
                nu,
            } => {
                check_positive("lambda1", lambda1)?;
                check_positive("lambda2", lambda2)?;
                check_positive("sigma", sigma)?;
                check_nonnegative("nu", nu)?;
            }
        }
        check_positive("epsilon", self.dirac.epsilon)?;
        check_positive("tau", self.tau)?;
        check_nonnegative("c0", self.c0)?;
        if let Some(tol) = self.tol {
            check_positive("tol", tol)?;
        }
        Ok(())
    }
}

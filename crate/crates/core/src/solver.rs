//! Time stepping: the first-order SAV scheme and the stabilized
//! semi-implicit scheme, plus the driver that runs a model to completion.

use std::fmt::Write as _;

use crate::energy::{Evaluation, SegmentationEnergy};
use crate::error::{Error, Result};
use crate::field::{biharmonic_raw, divergence_raw, gradient_raw, laplacian_raw, ScalarField2D};
use crate::levelset::{region_masks, Polyline};
use crate::model::{ModelSpec, Regularizer, Scheme};
use crate::spectral::{build_symbols, SpectralSymbols};

/// Runs abort once `max |phi|` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetState {
    pub phi: ScalarField2D,
    /// Scalar auxiliary variable; tracks `sqrt(E1)` for SAV.
    pub r: f64,
    pub iter: usize,
}

/// One SAV step from a precomputed evaluation of `E1` and `U` at `state.phi`.
///
/// Solves `(A + tau/2 b b^T) phi' = phi - tau r b + tau/2 (b, phi) b` with
/// `b = U / sqrt(E1)` by two applications of `A^{-1}` and a rank-one update.
pub fn sav_step(state: &LevelSetState, eval: &Evaluation, symbols: &SpectralSymbols) -> Result<LevelSetState> {
    if !(eval.e1 > 0.0) {
        return Err(Error::NonpositiveAuxEnergy { e1: eval.e1 });
    }
    let tau = symbols.tau;
    let phi = &state.phi;
    let b = eval.u.scaled(1.0 / eval.e1.sqrt());
    let mut c = phi.clone();
    c.axpy(-tau * state.r + 0.5 * tau * b.dot(phi), &b);
    let ainv_c = symbols.apply_inverse(&c)?;
    let ainv_b = symbols.apply_inverse(&b)?;
    let d = b.dot(&ainv_c) / (1.0 + 0.5 * tau * b.dot(&ainv_b));
    let mut next = ainv_c;
    next.axpy(-0.5 * tau * d, &ainv_b);
    let r = state.r + 0.5 * b.dot(&(&next - phi));
    let out = LevelSetState {
        phi: next,
        r,
        iter: state.iter + 1,
    };
    check_divergence(&out)?;
    Ok(out)
}

/// One step of the stabilized semi-implicit scheme. The MBE part treats
/// `3/4 alpha biharmonic + laplacian` implicitly; distance regularizers are
/// stepped explicitly. `r` is carried over unchanged.
pub fn fdm_step(
    state: &LevelSetState,
    energy: &SegmentationEnergy,
    regularizer: &Regularizer,
    symbols: &SpectralSymbols,
) -> Result<LevelSetState> {
    let phi = &state.phi;
    let mut rhs = match *regularizer {
        Regularizer::Mbe { mu, alpha } => {
            let mut g = gradient_raw(phi);
            let (u, v) = (g.u.as_mut_slice(), g.v.as_mut_slice());
            for k in 0..u.len() {
                let s2 = u[k] * u[k] + v[k] * v[k];
                u[k] *= s2;
                v[k] *= s2;
            }
            let mut f = divergence_raw(&g);
            f.axpy(-0.25 * alpha, &biharmonic_raw(phi));
            f.scaled(mu)
        }
        _ => energy.regularizer_force(phi),
    };
    rhs.axpy(1.0, &energy.fidelity_force(phi));
    let mut explicit = phi.clone();
    explicit.axpy(symbols.tau, &rhs);
    let next = symbols.apply_inverse(&explicit)?;
    let out = LevelSetState {
        phi: next,
        r: state.r,
        iter: state.iter + 1,
    };
    check_divergence(&out)?;
    Ok(out)
}

fn check_divergence(state: &LevelSetState) -> Result<()> {
    if !state.phi.is_finite() {
        return Err(Error::Divergence {
            iter: state.iter,
            reason: "non-finite level set".into(),
        });
    }
    let m = state.phi.max_abs();
    if m > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            iter: state.iter,
            reason: format!("max |phi| = {m:e} exceeds {DIVERGENCE_LIMIT:e}"),
        });
    }
    if !state.r.is_finite() {
        return Err(Error::Divergence {
            iter: state.iter,
            reason: "non-finite auxiliary variable".into(),
        });
    }
    Ok(())
}

/// `1/2 (phi, c biharmonic(phi)) + r^2`, with `c` the linear coefficient.
pub fn modified_energy(phi: &ScalarField2D, r: f64, linear_coefficient: f64) -> f64 {
    linear_energy(phi, linear_coefficient) + r * r
}

/// `1/2 (phi, c biharmonic(phi))`, computed as `c/2 |lap phi|^2`.
pub fn linear_energy(phi: &ScalarField2D, linear_coefficient: f64) -> f64 {
    if linear_coefficient == 0.0 {
        return 0.0;
    }
    let lap = laplacian_raw(phi);
    0.5 * linear_coefficient * lap.dot(&lap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub e_mod: f64,
    pub e1: f64,
    pub r: f64,
    pub grad_max: f64,
    pub grad_mean: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "iter,E_mod,E1,r,grad_max,grad_mean";

/// Relative per-step roundoff allowance for the monotonicity verdict.
pub const MONOTONE_SLACK: f64 = 1e-10;

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(80 * (self.rows.len() + 1));
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iter, r.e_mod, r.e1, r.r, r.grad_max, r.grad_mean
            )
            .unwrap();
        }
        s
    }

    /// True if `E_mod` never increases by more than `slack` between rows.
    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].e_mod <= w[0].e_mod + slack)
    }

    /// Largest increase `E_mod[n+1] - E_mod[n]` measured in units of
    /// `1 + |E_mod[n]|`; non-positive for a decaying trace.
    pub fn max_relative_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| (w[1].e_mod - w[0].e_mod) / (1.0 + w[0].e_mod.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Default monotonicity verdict: every step increases by at most
    /// `MONOTONE_SLACK * (1 + |E_mod|)`.
    pub fn is_monotone(&self) -> bool {
        self.rows.len() < 2 || self.max_relative_increase() <= MONOTONE_SLACK
    }
}

fn gradient_stats(phi: &ScalarField2D) -> (f64, f64) {
    let g = gradient_raw(phi);
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    for (a, b) in g.u.as_slice().iter().zip(g.v.as_slice()) {
        let m = a.hypot(*b);
        max = max.max(m);
        sum += m;
    }
    (max, sum / phi.len() as f64)
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub phi: ScalarField2D,
    /// Interior mask `H(phi)`.
    pub mask: ScalarField2D,
    pub trace: EnergyTrace,
    pub iterations: usize,
    /// Whether the stopping tolerance was met before `iter_max`.
    pub converged: bool,
    pub r: f64,
}

impl SegmentationResult {
    pub fn contours(&self) -> Vec<Polyline> {
        crate::levelset::extract_zero_contour(&self.phi)
    }
}

/// A model bound to an image, ready to step.
#[derive(Debug, Clone)]
pub struct Solver {
    model: ModelSpec,
    energy: SegmentationEnergy,
    symbols: SpectralSymbols,
}

impl Solver {
    pub fn new(model: &ModelSpec, image: &ScalarField2D) -> Result<Self> {
        let energy = SegmentationEnergy::new(model, image)?;
        let (mu, alpha) = match model.regularizer {
            Regularizer::Mbe { mu, alpha } => (mu, alpha),
            // no linear part: A = I
            _ => (0.0, 0.0),
        };
        let symbols = build_symbols(image.width(), image.height(), model.tau, mu, alpha, model.scheme)?;
        Ok(Self {
            model: model.clone(),
            energy,
            symbols,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn energy(&self) -> &SegmentationEnergy {
        &self.energy
    }

    pub fn symbols(&self) -> &SpectralSymbols {
        &self.symbols
    }

    pub fn evaluate(&self, phi: &ScalarField2D) -> Evaluation {
        self.energy.evaluate(phi)
    }

    /// State at iteration 0 with `r = sqrt(E1(phi0))`, and its evaluation.
    pub fn initial_state(&self, phi0: &ScalarField2D) -> Result<(LevelSetState, Evaluation)> {
        if phi0.dims() != self.symbols.dims() {
            return Err(Error::InvalidGrid(format!(
                "initial level set is {:?} but image is {:?}",
                phi0.dims(),
                self.symbols.dims()
            )));
        }
        if !phi0.is_finite() {
            return Err(Error::DegenerateInit("initial level set is not finite".into()));
        }
        let eval = self.evaluate(phi0);
        if !(eval.e1 > 0.0) {
            return Err(Error::NonpositiveAuxEnergy { e1: eval.e1 });
        }
        let state = LevelSetState {
            phi: phi0.clone(),
            r: eval.e1.sqrt(),
            iter: 0,
        };
        Ok((state, eval))
    }

    /// Advances one step given the evaluation at `state.phi`.
    pub fn step(&self, state: &LevelSetState, eval: &Evaluation) -> Result<LevelSetState> {
        match self.model.scheme {
            Scheme::Sav => sav_step(state, eval, &self.symbols),
            Scheme::Fdm => fdm_step(state, &self.energy, &self.model.regularizer, &self.symbols),
        }
    }

    fn trace_row(&self, state: &LevelSetState, eval: &Evaluation) -> TraceRow {
        let c = self.model.regularizer.linear_coefficient();
        let (grad_max, grad_mean) = gradient_stats(&state.phi);
        let (e_mod, r) = match self.model.scheme {
            Scheme::Sav => (modified_energy(&state.phi, state.r, c), state.r),
            Scheme::Fdm => (linear_energy(&state.phi, c) + eval.e1, eval.e1.max(0.0).sqrt()),
        };
        TraceRow {
            iter: state.iter,
            e_mod,
            e1: eval.e1,
            r,
            grad_max,
            grad_mean,
        }
    }

    pub fn run(&self, phi0: &ScalarField2D) -> Result<SegmentationResult> {
        let mut trace = EnergyTrace::default();
        self.run_with_trace(phi0, &mut trace)
    }

    /// As [`Solver::run`], recording rows into `trace` as they are produced so
    /// that a failed run still leaves its history behind.
    pub fn run_with_trace(&self, phi0: &ScalarField2D, trace: &mut EnergyTrace) -> Result<SegmentationResult> {
        trace.rows.clear();
        let (mut state, mut eval) = self.initial_state(phi0)?;
        trace.rows.push(self.trace_row(&state, &eval));
        let mut converged = false;
        while state.iter < self.model.iter_max {
            let next = self.step(&state, &eval)?;
            let change = if self.model.tol.is_some() {
                (&next.phi - &state.phi).max_abs() / self.model.tau
            } else {
                f64::INFINITY
            };
            state = next;
            eval = self.evaluate(&state.phi);
            trace.rows.push(self.trace_row(&state, &eval));
            if let Some(tol) = self.model.tol {
                if change < tol {
                    converged = true;
                    break;
                }
            }
        }
        let (mask, _) = region_masks(&state.phi);
        Ok(SegmentationResult {
            mask,
            trace: trace.clone(),
            iterations: state.iter,
            converged,
            r: state.r,
            phi: state.phi,
        })
    }
}

/// Runs `model` on `image` from the initial level set `init`.
pub fn run(model: &ModelSpec, image: &ScalarField2D, init: &ScalarField2D) -> Result<SegmentationResult> {
    Solver::new(model, image)?.run(init)
}

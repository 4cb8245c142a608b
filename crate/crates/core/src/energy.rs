//! Energy functionals and their force fields.
//!
//! Every `*_force` returns the right-hand side of the corresponding gradient
//! flow, i.e. the *negative* variational derivative of the matching energy.
//! Energies are plain sums over the grid (unit cell area), accumulated in a
//! fixed order.
//!
//! For the SAV split the total energy is written as `1/2 (phi, L phi) + E1`,
//! with `L = mu alpha biharmonic` for the MBE regularizer and `L = 0` for the
//! distance regularizers. [`SegmentationEnergy`] evaluates `E1` and
//! `U = dE1/dphi` for a given model and image.

use std::f64::consts::PI;

use crate::error::{check_positive, Error, Result};
use crate::field::{
    biharmonic_raw, divergence_raw, gradient_raw, laplacian_raw, GaussianKernel, ScalarField2D,
    VectorField2D, GRAD_FLOOR,
};
use crate::levelset::{heaviside_sharp, DiracSpec};
use crate::model::{CurvatureForm, Fidelity, ModelSpec, Regularizer};

/// Smallest denominator `K * M_i` accepted when forming the local fits.
pub const FIT_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// MBE regularizer

/// `sum (alpha/2) (lap phi)^2 + 1/4 (|grad phi|^2 - 1)^2`.
pub fn mbe_energy(phi: &ScalarField2D, alpha: f64) -> f64 {
    let lap = laplacian_raw(phi);
    let bending = 0.5 * alpha * lap.dot(&lap);
    bending + slope_energy(phi)
}

/// The non-equilibrium (slope selection) part `sum 1/4 (|grad phi|^2 - 1)^2`.
pub fn slope_energy(phi: &ScalarField2D) -> f64 {
    let g = gradient_raw(phi);
    g.u.as_slice()
        .iter()
        .zip(g.v.as_slice())
        .fold(0.0, |acc, (&a, &b)| {
            let s = a * a + b * b - 1.0;
            acc + 0.25 * s * s
        })
}

/// `div((|grad phi|^2 - 1) grad phi)`.
pub fn slope_force(phi: &ScalarField2D) -> ScalarField2D {
    let mut g = gradient_raw(phi);
    scale_by_coefficient(&mut g, |s2| s2 - 1.0);
    divergence_raw(&g)
}

/// `-alpha biharmonic(phi) + div((|grad phi|^2 - 1) grad phi)`.
pub fn mbe_force(phi: &ScalarField2D, alpha: f64) -> ScalarField2D {
    let mut f = slope_force(phi);
    f.axpy(-alpha, &biharmonic_raw(phi));
    f
}

/// Multiplies both components of `g` by `coef(|g|^2)`.
fn scale_by_coefficient(g: &mut VectorField2D, coef: impl Fn(f64) -> f64) {
    let VectorField2D { u, v } = g;
    for (a, b) in u.as_mut_slice().iter_mut().zip(v.as_mut_slice()) {
        let c = coef(*a * *a + *b * *b);
        *a *= c;
        *b *= c;
    }
}

// ---------------------------------------------------------------------------
// Distance regularizers

pub fn r1(s: f64) -> f64 {
    0.5 * (s - 1.0) * (s - 1.0)
}

/// `1 - 1/s` with `s` floored at [`GRAD_FLOOR`]; blows up for small slopes.
pub fn d1(s: f64) -> f64 {
    1.0 - 1.0 / s.max(GRAD_FLOOR)
}

pub fn r2(s: f64) -> f64 {
    if s <= 1.0 {
        (1.0 - (2.0 * PI * s).cos()) / (4.0 * PI * PI)
    } else {
        0.5 * (s - 1.0) * (s - 1.0)
    }
}

pub fn d2(s: f64) -> f64 {
    if s <= 1.0 {
        let x = 2.0 * PI * s;
        if x.abs() < 1e-6 {
            1.0 - x * x / 6.0
        } else {
            x.sin() / x
        }
    } else {
        1.0 - 1.0 / s
    }
}

fn gradient_energy(phi: &ScalarField2D, r: impl Fn(f64) -> f64) -> f64 {
    let g = gradient_raw(phi);
    g.u.as_slice()
        .iter()
        .zip(g.v.as_slice())
        .fold(0.0, |acc, (&a, &b)| acc + r(a.hypot(b)))
}

fn diffusion_force(phi: &ScalarField2D, d: impl Fn(f64) -> f64) -> ScalarField2D {
    let mut g = gradient_raw(phi);
    scale_by_coefficient(&mut g, |s2| d(s2.sqrt()));
    divergence_raw(&g)
}

pub fn dr1_energy(phi: &ScalarField2D) -> f64 {
    gradient_energy(phi, r1)
}

/// `div(d1(|grad phi|) grad phi)`.
pub fn dr1_force(phi: &ScalarField2D) -> ScalarField2D {
    diffusion_force(phi, d1)
}

pub fn dr2_energy(phi: &ScalarField2D) -> f64 {
    gradient_energy(phi, r2)
}

/// `div(d2(|grad phi|) grad phi)`.
pub fn dr2_force(phi: &ScalarField2D) -> ScalarField2D {
    diffusion_force(phi, d2)
}

// ---------------------------------------------------------------------------
// Curvature and arc length

/// `sum w delta(phi) |grad phi|`, with `w = 1` when no weight is given.
pub fn weighted_arc_length(phi: &ScalarField2D, weight: Option<&ScalarField2D>, dirac: &DiracSpec) -> f64 {
    let g = gradient_raw(phi);
    let mut acc = 0.0;
    for k in 0..phi.len() {
        let w = weight.map_or(1.0, |w| w.as_slice()[k]);
        let mag = g.u.as_slice()[k].hypot(g.v.as_slice()[k]);
        acc += w * dirac.value(phi.as_slice()[k]) * mag;
    }
    acc
}

/// Arc length of the zero level set, `sum delta(phi) |grad phi|`.
pub fn arc_length(phi: &ScalarField2D, dirac: &DiracSpec) -> f64 {
    weighted_arc_length(phi, None, dirac)
}

/// Curvature-type force `delta(phi) div(w grad phi / |grad phi|)` in the chosen form.
pub fn curvature_force(
    phi: &ScalarField2D,
    weight: Option<&ScalarField2D>,
    dirac: &DiracSpec,
    form: CurvatureForm,
) -> ScalarField2D {
    let g = gradient_raw(phi);
    let n = phi.len();
    let (mut nx, mut ny) = (g.u.clone(), g.v.clone());
    let mut mag = vec![0.0; n];
    for k in 0..n {
        let (a, b) = (g.u.as_slice()[k], g.v.as_slice()[k]);
        let m = a.hypot(b);
        mag[k] = m;
        let w = weight.map_or(1.0, |w| w.as_slice()[k]);
        let scale = match form {
            CurvatureForm::Literal => w / m.max(GRAD_FLOOR),
            CurvatureForm::Variational => w * dirac.value(phi.as_slice()[k]) / m.max(GRAD_FLOOR),
        };
        nx.as_mut_slice()[k] = a * scale;
        ny.as_mut_slice()[k] = b * scale;
    }
    let mut out = divergence_raw(&VectorField2D { u: nx, v: ny });
    let p = phi.as_slice();
    match form {
        CurvatureForm::Literal => {
            for (o, &x) in out.as_mut_slice().iter_mut().zip(p) {
                *o *= dirac.value(x);
            }
        }
        CurvatureForm::Variational => {
            for (k, o) in out.as_mut_slice().iter_mut().enumerate() {
                let w = weight.map_or(1.0, |w| w.as_slice()[k]);
                *o -= w * dirac.derivative(p[k]) * mag[k];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// GAC fidelity

/// Edge indicator `1 / (1 + |grad (G_sigma * I)|^2)`.
pub fn edge_indicator(image: &ScalarField2D, sigma_edge: f64) -> Result<ScalarField2D> {
    let kernel = GaussianKernel::new(sigma_edge)?;
    Ok(edge_indicator_with(image, &kernel))
}

fn edge_indicator_with(image: &ScalarField2D, kernel: &GaussianKernel) -> ScalarField2D {
    let smooth = kernel.apply(image);
    let g = gradient_raw(&smooth);
    g.u.zip_map(&g.v, |a, b| 1.0 / (1.0 + a * a + b * b))
}

/// `lambda delta(phi) div(g n) + gamma g delta(phi)`.
pub fn gac_force_with(
    phi: &ScalarField2D,
    g: &ScalarField2D,
    lambda: f64,
    gamma: f64,
    dirac: &DiracSpec,
    form: CurvatureForm,
) -> ScalarField2D {
    let mut f = curvature_force(phi, Some(g), dirac, form);
    for ((o, &x), &w) in f.as_mut_slice().iter_mut().zip(phi.as_slice()).zip(g.as_slice()) {
        *o = lambda * *o + gamma * w * dirac.value(x);
    }
    f
}

pub fn gac_force(phi: &ScalarField2D, g: &ScalarField2D, lambda: f64, gamma: f64, dirac: &DiracSpec) -> ScalarField2D {
    gac_force_with(phi, g, lambda, gamma, dirac, CurvatureForm::Literal)
}

/// `lambda sum g delta(phi) |grad phi| + gamma sum g H(-phi)` with the sharp
/// Heaviside (reporting energy).
pub fn gac_energy(phi: &ScalarField2D, g: &ScalarField2D, lambda: f64, gamma: f64, dirac: &DiracSpec) -> f64 {
    let area = phi
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .fold(0.0, |acc, (&p, &w)| acc + w * heaviside_sharp(-p));
    lambda * weighted_arc_length(phi, Some(g), dirac) + gamma * area
}

/// As [`gac_energy`] with `H(-phi)` replaced by `1 - H_eps(phi)`, the
/// antiderivative matching `dirac`. This is the energy whose gradient the
/// balloon force is.
pub fn gac_energy_smooth(phi: &ScalarField2D, g: &ScalarField2D, lambda: f64, gamma: f64, dirac: &DiracSpec) -> f64 {
    let area = phi
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .fold(0.0, |acc, (&p, &w)| acc + w * (1.0 - dirac.smooth_heaviside(p)));
    lambda * weighted_arc_length(phi, Some(g), dirac) + gamma * area
}

// ---------------------------------------------------------------------------
// RSF fidelity

/// Local intensity fits and their residual fields.
#[derive(Debug, Clone, PartialEq)]
pub struct RsfFit {
    pub f1: ScalarField2D,
    pub f2: ScalarField2D,
    pub e1: ScalarField2D,
    pub e2: ScalarField2D,
}

/// Local fits `f_i = K*(M_i I) / K*M_i` and residuals
/// `e_i = I^2 - 2 I (K*f_i) + K*(f_i^2)`.
pub fn rsf_fit(phi: &ScalarField2D, image: &ScalarField2D, sigma: f64) -> Result<RsfFit> {
    check_positive("sigma", sigma)?;
    if phi.dims() != image.dims() {
        return Err(Error::InvalidGrid(format!(
            "level set is {:?} but image is {:?}",
            phi.dims(),
            image.dims()
        )));
    }
    Ok(rsf_fit_with(phi, image, &GaussianKernel::new(sigma)?, image.mean()))
}

pub(crate) fn rsf_fit_with(
    phi: &ScalarField2D,
    image: &ScalarField2D,
    kernel: &GaussianKernel,
    image_mean: f64,
) -> RsfFit {
    let inside = phi.map(heaviside_sharp);
    let outside = inside.map(|h| 1.0 - h);
    let fit = |mask: &ScalarField2D| -> ScalarField2D {
        let num = kernel.apply(&(mask * image));
        let den = kernel.apply(mask);
        num.zip_map(&den, |a, b| if b > FIT_FLOOR { a / b } else { image_mean })
    };
    let f1 = fit(&inside);
    let f2 = fit(&outside);
    let residual = |f: &ScalarField2D| -> ScalarField2D {
        let kf = kernel.apply(f);
        let kf2 = kernel.apply(&f.map(|x| x * x));
        let mut e = ScalarField2D::zeros(image.width(), image.height());
        for (k, out) in e.as_mut_slice().iter_mut().enumerate() {
            let i = image.as_slice()[k];
            *out = i * i - 2.0 * i * kf.as_slice()[k] + kf2.as_slice()[k];
        }
        e
    };
    let e1 = residual(&f1);
    let e2 = residual(&f2);
    RsfFit { f1, f2, e1, e2 }
}

/// `-delta(phi) (lambda1 e1 - lambda2 e2) + nu delta(phi) div(grad phi / |grad phi|)`.
pub fn rsf_force_with(
    phi: &ScalarField2D,
    fit: &RsfFit,
    lambda1: f64,
    lambda2: f64,
    nu: f64,
    dirac: &DiracSpec,
    form: CurvatureForm,
) -> ScalarField2D {
    let mut f = if nu != 0.0 {
        curvature_force(phi, None, dirac, form).scaled(nu)
    } else {
        ScalarField2D::zeros(phi.width(), phi.height())
    };
    let (p, e1, e2) = (phi.as_slice(), fit.e1.as_slice(), fit.e2.as_slice());
    for (k, o) in f.as_mut_slice().iter_mut().enumerate() {
        *o -= dirac.value(p[k]) * (lambda1 * e1[k] - lambda2 * e2[k]);
    }
    f
}

pub fn rsf_force(phi: &ScalarField2D, fit: &RsfFit, lambda1: f64, lambda2: f64, nu: f64, dirac: &DiracSpec) -> ScalarField2D {
    rsf_force_with(phi, fit, lambda1, lambda2, nu, dirac, CurvatureForm::Literal)
}

/// `lambda1 sum e1 M1 + lambda2 sum e2 M2 + nu * arc length`, sharp masks.
pub fn rsf_energy(phi: &ScalarField2D, fit: &RsfFit, lambda1: f64, lambda2: f64, nu: f64, dirac: &DiracSpec) -> f64 {
    region_energy(phi, fit, lambda1, lambda2, heaviside_sharp) + nu * arc_length(phi, dirac)
}

/// As [`rsf_energy`] with the masks built from the smooth Heaviside matching
/// `dirac`; its gradient at fixed fit is minus [`rsf_force`].
pub fn rsf_energy_smooth(phi: &ScalarField2D, fit: &RsfFit, lambda1: f64, lambda2: f64, nu: f64, dirac: &DiracSpec) -> f64 {
    region_energy(phi, fit, lambda1, lambda2, |p| dirac.smooth_heaviside(p)) + nu * arc_length(phi, dirac)
}

fn region_energy(phi: &ScalarField2D, fit: &RsfFit, lambda1: f64, lambda2: f64, h: impl Fn(f64) -> f64) -> f64 {
    let (p, e1, e2) = (phi.as_slice(), fit.e1.as_slice(), fit.e2.as_slice());
    let mut acc = 0.0;
    for k in 0..p.len() {
        let m1 = h(p[k]);
        acc += lambda1 * e1[k] * m1 + lambda2 * e2[k] * (1.0 - m1);
    }
    acc
}

// ---------------------------------------------------------------------------
// SAV assembly

/// `E1` and `U = dE1/dphi` at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub e1: f64,
    pub u: ScalarField2D,
}

/// Precomputed image-dependent data for evaluating a model's energy.
#[derive(Debug, Clone)]
pub struct SegmentationEnergy {
    regularizer: Regularizer,
    fidelity: Fidelity,
    dirac: DiracSpec,
    curvature: CurvatureForm,
    c0: f64,
    image: ScalarField2D,
    image_mean: f64,
    edge: Option<ScalarField2D>,
    kernel: Option<GaussianKernel>,
}

impl SegmentationEnergy {
    pub fn new(model: &ModelSpec, image: &ScalarField2D) -> Result<Self> {
        model.validate()?;
        if image.width() < 2 || image.height() < 2 {
            return Err(Error::InvalidGrid(format!(
                "image must be at least 2x2, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if !image.is_finite() {
            return Err(Error::InvalidGrid("image contains non-finite values".into()));
        }
        let (edge, kernel) = match model.fidelity {
            Fidelity::Gac { sigma_edge, .. } => {
                (Some(edge_indicator(image, sigma_edge)?), None)
            }
            Fidelity::Rsf { sigma, .. } => (None, Some(GaussianKernel::new(sigma)?)),
        };
        Ok(Self {
            regularizer: model.regularizer,
            fidelity: model.fidelity,
            dirac: model.dirac,
            curvature: model.curvature,
            c0: model.c0,
            image: image.clone(),
            image_mean: image.mean(),
            edge,
            kernel,
        })
    }

    pub fn image(&self) -> &ScalarField2D {
        &self.image
    }

    pub fn edge_indicator(&self) -> Option<&ScalarField2D> {
        self.edge.as_ref()
    }

    pub fn fit(&self, phi: &ScalarField2D) -> Option<RsfFit> {
        self.kernel
            .as_ref()
            .map(|k| rsf_fit_with(phi, &self.image, k, self.image_mean))
    }

    /// Regularizer energy without the linear part (which lives in `L`).
    fn lower_order_regularizer(&self, phi: &ScalarField2D) -> f64 {
        match self.regularizer {
            Regularizer::Mbe { mu, .. } => mu * slope_energy(phi),
            Regularizer::Dr1 { mu } => mu * dr1_energy(phi),
            Regularizer::Dr2 { mu } => mu * dr2_energy(phi),
        }
    }

    /// Negative gradient of [`Self::lower_order_regularizer`].
    fn lower_order_regularizer_force(&self, phi: &ScalarField2D) -> ScalarField2D {
        match self.regularizer {
            Regularizer::Mbe { mu, .. } => slope_force(phi).scaled(mu),
            Regularizer::Dr1 { mu } => dr1_force(phi).scaled(mu),
            Regularizer::Dr2 { mu } => dr2_force(phi).scaled(mu),
        }
    }

    /// Full regularizer force including the linear part.
    pub fn regularizer_force(&self, phi: &ScalarField2D) -> ScalarField2D {
        match self.regularizer {
            Regularizer::Mbe { mu, alpha } => mbe_force(phi, alpha).scaled(mu),
            _ => self.lower_order_regularizer_force(phi),
        }
    }

    fn fidelity_terms(&self, phi: &ScalarField2D) -> (f64, ScalarField2D) {
        match self.fidelity {
            Fidelity::Gac { lambda, gamma, .. } => {
                let g = self.edge.as_ref().expect("edge indicator present for GAC");
                (
                    gac_energy_smooth(phi, g, lambda, gamma, &self.dirac),
                    gac_force_with(phi, g, lambda, gamma, &self.dirac, self.curvature),
                )
            }
            Fidelity::Rsf {
                lambda1,
                lambda2,
                nu,
                ..
            } => {
                let fit = self.fit(phi).expect("kernel present for RSF");
                (
                    rsf_energy_smooth(phi, &fit, lambda1, lambda2, nu, &self.dirac),
                    rsf_force_with(phi, &fit, lambda1, lambda2, nu, &self.dirac, self.curvature),
                )
            }
        }
    }

    /// Segmentation plus arc-length force `T_seg(phi)`.
    pub fn fidelity_force(&self, phi: &ScalarField2D) -> ScalarField2D {
        self.fidelity_terms(phi).1
    }

    /// Fidelity energy as reported (sharp Heaviside in the region terms).
    pub fn fidelity_energy(&self, phi: &ScalarField2D) -> f64 {
        match self.fidelity {
            Fidelity::Gac { lambda, gamma, .. } => {
                gac_energy(phi, self.edge.as_ref().unwrap(), lambda, gamma, &self.dirac)
            }
            Fidelity::Rsf {
                lambda1,
                lambda2,
                nu,
                ..
            } => {
                let fit = self.fit(phi).unwrap();
                rsf_energy(phi, &fit, lambda1, lambda2, nu, &self.dirac)
            }
        }
    }

    /// `E1` and `U` in one pass (the RSF fit is computed once).
    pub fn evaluate(&self, phi: &ScalarField2D) -> Evaluation {
        let (fid_energy, fid_force) = self.fidelity_terms(phi);
        let e1 = self.lower_order_regularizer(phi) + fid_energy + self.c0;
        let mut u = self.lower_order_regularizer_force(phi);
        u.axpy(1.0, &fid_force);
        for x in u.as_mut_slice() {
            *x = -*x;
        }
        Evaluation { e1, u }
    }

    pub fn e1(&self, phi: &ScalarField2D) -> f64 {
        let (fid_energy, _) = self.fidelity_terms(phi);
        self.lower_order_regularizer(phi) + fid_energy + self.c0
    }
}

/// `E1(phi)` for `model` on `image`.
pub fn assemble_e1(phi: &ScalarField2D, model: &ModelSpec, image: &ScalarField2D) -> Result<f64> {
    let e = SegmentationEnergy::new(model, image)?;
    let e1 = e.e1(phi);
    if !(e1 > 0.0) {
        return Err(Error::NonpositiveAuxEnergy { e1 });
    }
    Ok(e1)
}

/// `U(phi) = dE1/dphi` for `model` on `image`.
pub fn assemble_u(phi: &ScalarField2D, model: &ModelSpec, image: &ScalarField2D) -> Result<ScalarField2D> {
    Ok(SegmentationEnergy::new(model, image)?.evaluate(phi).u)
}

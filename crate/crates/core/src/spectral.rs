//! Periodic FFT and the diagonal operators of the two time-stepping schemes.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::field::ScalarField2D;
use crate::model::Scheme;

/// 2D complex FFT over a row-major `width x height` grid.
#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        row.process(data);
        let mut column = vec![Complex64::default(); h];
        let mut scratch = vec![Complex64::default(); col.get_inplace_scratch_len()];
        for i in 0..w {
            for j in 0..h {
                column[j] = data[j * w + i];
            }
            col.process_with_scratch(&mut column, &mut scratch);
            for j in 0..h {
                data[j * w + i] = column[j];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform, normalized so that `inverse(forward(x)) == x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.row_inv, &self.col_inv);
        let s = 1.0 / (self.width * self.height) as f64;
        for z in data {
            *z *= s;
        }
    }

    /// Real field -> multiply by a real diagonal symbol -> real field.
    pub fn apply_symbol(&self, f: &ScalarField2D, symbol: &[f64]) -> ScalarField2D {
        assert_eq!(f.dims(), (self.width, self.height));
        let mut buf: Vec<Complex64> = f.as_slice().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut buf);
        for (z, &s) in buf.iter_mut().zip(symbol) {
            *z *= s;
        }
        self.inverse(&mut buf);
        let out: Vec<f64> = buf.iter().map(|z| z.re).collect();
        ScalarField2D::from_vec(self.width, self.height, out).expect("dims preserved")
    }
}

/// Eigenvalues of the compact 5-point Laplacian on a periodic grid,
/// `2 cos(2 pi k1 / M) - 2 + 2 cos(2 pi k2 / N) - 2`, in FFT order.
pub fn laplacian_symbol(width: usize, height: usize) -> Vec<f64> {
    let cx: Vec<f64> = (0..width)
        .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / width as f64).cos() - 2.0)
        .collect();
    let cy: Vec<f64> = (0..height)
        .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / height as f64).cos() - 2.0)
        .collect();
    let mut out = Vec::with_capacity(width * height);
    for y in &cy {
        for x in &cx {
            out.push(x + y);
        }
    }
    out
}

/// Diagonal solve for one scheme at a fixed step size.
///
/// For SAV the operator is `A = I + tau mu alpha biharmonic`; for the
/// semi-implicit scheme it is `I + tau mu (3/4 alpha biharmonic + laplacian)`.
#[derive(Debug, Clone)]
pub struct SpectralSymbols {
    pub scheme: Scheme,
    pub tau: f64,
    pub mu: f64,
    pub alpha: f64,
    /// Laplacian eigenvalues.
    pub lambda: Vec<f64>,
    /// Eigenvalues of the operator being inverted.
    pub operator: Vec<f64>,
    /// Reciprocals of `operator`.
    pub inverse: Vec<f64>,
    fft: Fft2,
}

pub fn build_symbols(width: usize, height: usize, tau: f64, mu: f64, alpha: f64, scheme: Scheme) -> Result<SpectralSymbols> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidGrid(format!("grid must be at least 2x2, got {width}x{height}")));
    }
    check_positive("tau", tau)?;
    check_nonnegative("mu", mu)?;
    check_nonnegative("alpha", alpha)?;
    let lambda = laplacian_symbol(width, height);
    let operator: Vec<f64> = match scheme {
        Scheme::Sav => lambda.iter().map(|&l| 1.0 + tau * mu * alpha * l * l).collect(),
        Scheme::Fdm => lambda
            .iter()
            .map(|&l| 1.0 + tau * mu * (0.75 * alpha * l * l + l))
            .collect(),
    };
    if scheme == Scheme::Fdm && mu > 0.0 && tau * mu >= 3.0 * alpha {
        let min_symbol = operator.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::SchemeInstability {
            tau,
            mu,
            alpha,
            min_symbol,
        });
    }
    let inverse = operator.iter().map(|&a| 1.0 / a).collect();
    Ok(SpectralSymbols {
        scheme,
        tau,
        mu,
        alpha,
        lambda,
        operator,
        inverse,
        fft: Fft2::new(width, height),
    })
}

impl SpectralSymbols {
    pub fn dims(&self) -> (usize, usize) {
        (self.fft.width, self.fft.height)
    }

    fn check(&self, f: &ScalarField2D) -> Result<()> {
        if f.dims() != self.dims() {
            return Err(Error::InvalidGrid(format!(
                "field is {:?} but symbols were built for {:?}",
                f.dims(),
                self.dims()
            )));
        }
        Ok(())
    }

    pub fn apply_inverse(&self, f: &ScalarField2D) -> Result<ScalarField2D> {
        self.check(f)?;
        Ok(self.fft.apply_symbol(f, &self.inverse))
    }

    pub fn apply_operator(&self, f: &ScalarField2D) -> Result<ScalarField2D> {
        self.check(f)?;
        Ok(self.fft.apply_symbol(f, &self.operator))
    }

    /// Applies an arbitrary function of the Laplacian symbol.
    pub fn apply_function(&self, f: &ScalarField2D, g: impl Fn(f64) -> f64) -> Result<ScalarField2D> {
        self.check(f)?;
        let s: Vec<f64> = self.lambda.iter().map(|&l| g(l)).collect();
        Ok(self.fft.apply_symbol(f, &s))
    }
}

/// `A^{-1} f` for the operator encoded in `symbols`.
pub fn apply_a_inverse(f: &ScalarField2D, symbols: &SpectralSymbols) -> Result<ScalarField2D> {
    symbols.apply_inverse(f)
}

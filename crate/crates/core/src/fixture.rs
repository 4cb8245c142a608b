//! Synthetic test images with known ground truth, and overlap metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::{GaussianKernel, ScalarField2D};
use crate::levelset::Shape;

pub const FOREGROUND: f64 = 170.0;
pub const BACKGROUND: f64 = 85.0;
/// Blur applied to the base image of [`FixtureKind::BlurredBoundary`].
pub const BOUNDARY_BLUR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixtureKind {
    /// A rectangle and a disk, well separated.
    TwoShapes,
    /// Centered annulus.
    Ring { inner: f64, outer: f64 },
    /// Five-pointed star with sharp convex and concave corners.
    StarCorners,
    /// Disk whose edge is smeared by a Gaussian blur.
    BlurredBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bias {
    None,
    /// Ramp along x, `gain * (x / (M - 1) - 1/2)`.
    Linear { gain: f64 },
    /// Centered bump `amplitude * exp(-r^2 / (2 sigma_b^2))`.
    RadialGaussian { sigma_b: f64, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub width: usize,
    pub height: usize,
    pub bias: Bias,
    pub noise_std: f64,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind, width: usize, height: usize) -> Self {
        Self {
            kind,
            width,
            height,
            bias: Bias::None,
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, noise_std: f64, seed: u64) -> Self {
        self.noise_std = noise_std;
        self.seed = seed;
        self
    }

    pub fn with_bias(mut self, bias: Bias) -> Self {
        self.bias = bias;
        self
    }

    fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// The ground-truth shape of this fixture.
    pub fn shape(&self) -> Result<Shape> {
        let (w, h) = (self.width as f64, self.height as f64);
        let s = w.min(h);
        let (cx, cy) = self.center();
        let shape = match self.kind {
            FixtureKind::TwoShapes => Shape::Union(vec![
                Shape::Rectangle {
                    x0: (0.12 * w).round(),
                    y0: (0.25 * h).round(),
                    x1: (0.40 * w).round(),
                    y1: (0.72 * h).round(),
                },
                Shape::Disk {
                    cx: 0.70 * w,
                    cy: 0.50 * h,
                    radius: 0.17 * s,
                },
            ]),
            FixtureKind::Ring { inner, outer } => {
                if !(inner > 0.0 && outer > inner) {
                    return Err(Error::InvalidFixture(format!(
                        "ring radii must satisfy 0 < inner < outer, got {inner}, {outer}"
                    )));
                }
                if outer > cx.min(cy) {
                    return Err(Error::InvalidFixture(format!(
                        "outer radius {outer} does not fit a {}x{} grid",
                        self.width, self.height
                    )));
                }
                Shape::Ring { cx, cy, inner, outer }
            }
            FixtureKind::StarCorners => {
                let (ro, ri) = (0.40 * s, 0.17 * s);
                let pts = (0..10)
                    .map(|k| {
                        let a = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
                        let r = if k % 2 == 0 { ro } else { ri };
                        (cx + r * a.cos(), cy + r * a.sin())
                    })
                    .collect();
                Shape::Polygon(pts)
            }
            FixtureKind::BlurredBoundary => Shape::Disk {
                cx,
                cy,
                radius: 0.30 * s,
            },
        };
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::InvalidFixture(format!(
                "fixtures need at least 8x8 pixels, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidFixture(format!(
                "noise_std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        match self.bias {
            Bias::None => {}
            Bias::Linear { gain } if gain.is_finite() => {}
            Bias::RadialGaussian { sigma_b, amplitude } if sigma_b > 0.0 && amplitude.is_finite() => {}
            b => return Err(Error::InvalidFixture(format!("invalid bias {b:?}"))),
        }
        let shape = self.shape()?;
        shape
            .validate(self.width, self.height)
            .map_err(|e| Error::InvalidFixture(e.to_string()))
    }
}

fn bias_field(spec: &FixtureSpec) -> Option<ScalarField2D> {
    let (cx, cy) = spec.center();
    match spec.bias {
        Bias::None => None,
        Bias::Linear { gain } => Some(ScalarField2D::from_fn(spec.width, spec.height, |i, _| {
            gain * (i as f64 / (spec.width as f64 - 1.0) - 0.5)
        })),
        Bias::RadialGaussian { sigma_b, amplitude } => {
            Some(ScalarField2D::from_fn(spec.width, spec.height, |i, j| {
                let r2 = (i as f64 - cx).powi(2) + (j as f64 - cy).powi(2);
                amplitude * (-r2 / (2.0 * sigma_b * sigma_b)).exp()
            }))
        }
    }
}

/// Image and ground-truth mask for `spec`, without noise.
pub fn generate_clean(spec: &FixtureSpec) -> Result<(ScalarField2D, ScalarField2D)> {
    spec.validate()?;
    let truth = spec.shape()?.rasterize(spec.width, spec.height);
    let mut image = truth.map(|t| if t > 0.5 { FOREGROUND } else { BACKGROUND });
    if spec.kind == FixtureKind::BlurredBoundary {
        image = GaussianKernel::new(BOUNDARY_BLUR)?.apply(&image);
    }
    if let Some(b) = bias_field(spec) {
        image.axpy(1.0, &b);
    }
    Ok((image, truth))
}

/// Image and ground-truth mask for `spec`. Noise is drawn in row-major order
/// from ChaCha8 seeded with `spec.seed`; values are not clamped.
pub fn generate(spec: &FixtureSpec) -> Result<(ScalarField2D, ScalarField2D)> {
    let (mut image, truth) = generate_clean(spec)?;
    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidFixture(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for x in image.as_mut_slice() {
            *x += normal.sample(&mut rng);
        }
    }
    Ok((image, truth))
}

fn check_masks(a: &ScalarField2D, b: &ScalarField2D) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::InvalidMask(format!("mask sizes differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    for m in [a, b] {
        if let Some(&x) = m.as_slice().iter().find(|&&x| x != 0.0 && x != 1.0) {
            return Err(Error::InvalidMask(format!("mask value {x} is not 0 or 1")));
        }
    }
    Ok(())
}

fn overlap(a: &ScalarField2D, b: &ScalarField2D) -> (usize, usize, usize) {
    let mut inter = 0;
    let (mut na, mut nb) = (0, 0);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let (x, y) = (x == 1.0, y == 1.0);
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    (inter, na, nb)
}

/// `2 |A n B| / (|A| + |B|)`; 1 when both masks are empty.
pub fn dice(a: &ScalarField2D, b: &ScalarField2D) -> Result<f64> {
    check_masks(a, b)?;
    let (inter, na, nb) = overlap(a, b);
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// `|A n B| / |A u B|`; 1 when both masks are empty.
pub fn iou(a: &ScalarField2D, b: &ScalarField2D) -> Result<f64> {
    check_masks(a, b)?;
    let (inter, na, nb) = overlap(a, b);
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{init_level_set, region_masks, InitMode, InitSpec};
    use proptest::prelude::*;

    fn all_kinds() -> [FixtureKind; 4] {
        [
            FixtureKind::TwoShapes,
            FixtureKind::Ring {
                inner: 12.0,
                outer: 24.0,
            },
            FixtureKind::StarCorners,
            FixtureKind::BlurredBoundary,
        ]
    }

    #[test]
    fn clean_images_take_two_values() {
        for kind in all_kinds() {
            if kind == FixtureKind::BlurredBoundary {
                continue;
            }
            let (img, truth) = generate(&FixtureSpec::new(kind, 64, 64)).unwrap();
            for (&x, &t) in img.as_slice().iter().zip(truth.as_slice()) {
                assert_eq!(x, if t == 1.0 { FOREGROUND } else { BACKGROUND });
            }
            assert!(truth.sum() > 0.0);
        }
    }

    #[test]
    fn blurred_boundary_is_smooth() {
        let (img, truth) = generate(&FixtureSpec::new(FixtureKind::BlurredBoundary, 64, 64)).unwrap();
        let distinct = img.as_slice().iter().filter(|&&x| x > BACKGROUND + 1.0 && x < FOREGROUND - 1.0).count();
        assert!(distinct > 100);
        assert_eq!(img.get(32, 32).round(), FOREGROUND);
        assert!(truth.get(32, 32) == 1.0 && truth.get(0, 0) == 0.0);
    }

    #[test]
    fn seeds() {
        let spec = FixtureSpec::new(FixtureKind::StarCorners, 48, 40).with_noise(10.0, 7);
        assert_eq!(generate(&spec).unwrap().0, generate(&spec).unwrap().0);
        let other = FixtureSpec { seed: 8, ..spec };
        assert_ne!(generate(&spec).unwrap().0, generate(&other).unwrap().0);
    }

    #[test]
    fn noise_standard_deviation() {
        let spec = FixtureSpec::new(
            FixtureKind::Ring {
                inner: 40.0,
                outer: 90.0,
            },
            256,
            256,
        )
        .with_noise(10.0, 3);
        let (noisy, _) = generate(&spec).unwrap();
        let (clean, _) = generate_clean(&spec).unwrap();
        let d = &noisy - &clean;
        let mean = d.mean();
        let var = d.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var.sqrt() - 10.0).abs() < 0.3, "std {}", var.sqrt());
    }

    #[test]
    fn bias_fields() {
        let spec = FixtureSpec::new(FixtureKind::TwoShapes, 33, 20).with_bias(Bias::Linear { gain: 40.0 });
        let (img, _) = generate(&spec).unwrap();
        assert!((img.get(0, 0) - (BACKGROUND - 20.0)).abs() < 1e-12);
        assert!((img.get(32, 0) - (BACKGROUND + 20.0)).abs() < 1e-12);
        let spec = FixtureSpec::new(FixtureKind::StarCorners, 33, 33).with_bias(Bias::RadialGaussian {
            sigma_b: 5.0,
            amplitude: 30.0,
        });
        let (img, _) = generate(&spec).unwrap();
        assert!((img.get(16, 16) - (FOREGROUND + 30.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fixtures() {
        let bad = [
            FixtureSpec::new(
                FixtureKind::Ring {
                    inner: 10.0,
                    outer: 5.0,
                },
                64,
                64,
            ),
            FixtureSpec::new(
                FixtureKind::Ring {
                    inner: 10.0,
                    outer: 40.0,
                },
                64,
                64,
            ),
            FixtureSpec::new(FixtureKind::TwoShapes, 4, 64),
            FixtureSpec::new(FixtureKind::TwoShapes, 64, 64).with_noise(-1.0, 0),
            FixtureSpec::new(FixtureKind::TwoShapes, 64, 64).with_bias(Bias::RadialGaussian {
                sigma_b: 0.0,
                amplitude: 1.0,
            }),
        ];
        for spec in bad {
            assert!(matches!(generate(&spec), Err(Error::InvalidFixture(_))), "{spec:?}");
        }
    }

    #[test]
    fn truth_matches_binary_step_masks() {
        for kind in all_kinds() {
            let spec = FixtureSpec::new(kind, 64, 56);
            let (_, truth) = generate(&spec).unwrap();
            let init = InitSpec {
                shape: spec.shape().unwrap(),
                mode: InitMode::BinaryStep { c: 2.0 },
            };
            let (m1, _) = region_masks(&init_level_set(64, 56, &init).unwrap());
            assert_eq!(m1, truth);
        }
    }

    #[test]
    fn metric_values() {
        let full = ScalarField2D::filled(8, 8, 1.0);
        let half = ScalarField2D::from_fn(8, 8, |i, _| if i < 4 { 1.0 } else { 0.0 });
        let other = half.map(|x| 1.0 - x);
        let empty = ScalarField2D::zeros(8, 8);
        assert_eq!(dice(&half, &half).unwrap(), 1.0);
        assert_eq!(dice(&half, &other).unwrap(), 0.0);
        assert!((dice(&full, &half).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&full, &half).unwrap(), 0.5);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
        assert!(dice(&half, &half.map(|x| 0.5 * x)).is_err());
        assert!(dice(&half, &ScalarField2D::zeros(8, 9)).is_err());
    }

    fn mask_strategy() -> impl Strategy<Value = (ScalarField2D, ScalarField2D)> {
        (prop::collection::vec(any::<bool>(), 36), prop::collection::vec(any::<bool>(), 36)).prop_map(|(a, b)| {
            let f = |v: Vec<bool>| ScalarField2D::from_vec(6, 6, v.into_iter().map(|x| x as u8 as f64).collect()).unwrap();
            (f(a), f(b))
        })
    }

    proptest! {
        #[test]
        fn metrics_symmetric_and_ordered((a, b) in mask_strategy()) {
            let (d, i) = (dice(&a, &b).unwrap(), iou(&a, &b).unwrap());
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert_eq!(i, iou(&b, &a).unwrap());
            prop_assert!(i <= d + 1e-15);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}

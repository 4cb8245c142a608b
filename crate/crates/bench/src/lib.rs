//! Shared inputs for the benchmarks.

use mbeseg::levelset::{init_level_set, InitMode, InitSpec, Shape};
use mbeseg::{generate, Fidelity, FixtureKind, FixtureSpec, ModelSpec, Regularizer, ScalarField2D, Scheme};

/// Noisy ring image of side `n` and a rectangle init just outside the ring.
pub fn ring_problem(n: usize) -> (ScalarField2D, ScalarField2D) {
    let s = n as f64;
    let spec = FixtureSpec::new(
        FixtureKind::Ring {
            inner: 0.156 * s,
            outer: 0.3125 * s,
        },
        n,
        n,
    )
    .with_noise(10.0, 1);
    let (image, _) = generate(&spec).expect("valid fixture");
    let init = InitSpec {
        shape: Shape::Rectangle {
            x0: 0.19 * s,
            y0: 0.19 * s,
            x1: 0.81 * s - 1.0,
            y1: 0.81 * s - 1.0,
        },
        mode: InitMode::BinaryStep { c: 2.0 },
    };
    let phi = init_level_set(n, n, &init).expect("valid init");
    (image, phi)
}

/// MBE-RSF with the usual noisy-ring parameters.
pub fn mbe_rsf(scheme: Scheme) -> ModelSpec {
    ModelSpec::new(
        Fidelity::Rsf {
            lambda1: 0.33,
            lambda2: 0.67,
            sigma: 5.0,
            nu: 10.0,
        },
        Regularizer::Mbe { mu: 1.0, alpha: 15.0 },
        scheme,
        0.01,
        1,
    )
}

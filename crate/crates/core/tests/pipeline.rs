use mbeseg::levelset::{init_level_set, InitMode, InitSpec, Shape};
use mbeseg::{dice, generate, run, Fidelity, FixtureKind, FixtureSpec, ModelSpec, Regularizer, Scheme};

fn ring() -> FixtureSpec {
    FixtureSpec::new(FixtureKind::Ring { inner: 8.0, outer: 16.0 }, 48, 48).with_noise(5.0, 7)
}

fn rsf(regularizer: Regularizer, scheme: Scheme, iter_max: usize) -> ModelSpec {
    let fid = Fidelity::Rsf {
        lambda1: 0.33,
        lambda2: 0.67,
        sigma: 3.0,
        nu: 5.0,
    };
    ModelSpec::new(fid, regularizer, scheme, 0.01, iter_max)
}

fn around_ring(mode: InitMode) -> InitSpec {
    InitSpec {
        shape: Shape::Rectangle {
            x0: 6.0,
            y0: 6.0,
            x1: 41.0,
            y1: 41.0,
        },
        mode,
    }
}

#[test]
fn small_noisy_ring_is_recovered() {
    let (image, truth) = generate(&ring()).unwrap();
    let phi0 = init_level_set(48, 48, &around_ring(InitMode::BinaryStep { c: 2.0 })).unwrap();
    let out = run(&rsf(Regularizer::Mbe { mu: 1.0, alpha: 15.0 }, Scheme::Sav, 600), &image, &phi0).unwrap();
    let d = dice(&out.mask, &truth).unwrap();
    assert!(d > 0.95, "dice {d}");
    assert!(out.trace.is_monotone());
    assert_eq!(out.trace.len(), 601);
    // the ring has an outer and an inner boundary
    assert_eq!(out.contours().len(), 2);
}

#[test]
fn runs_are_bitwise_repeatable() {
    let (image, _) = generate(&ring()).unwrap();
    let phi0 = init_level_set(48, 48, &around_ring(InitMode::SignedDistance)).unwrap();
    let model = rsf(Regularizer::Dr2 { mu: 1.0 }, Scheme::Sav, 50);
    let a = run(&model, &image, &phi0).unwrap();
    let b = run(&model, &image, &phi0).unwrap();
    assert_eq!(a.phi, b.phi);
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
}

#[test]
fn tolerance_stops_a_stalled_run() {
    let (image, _) = generate(&ring()).unwrap();
    let phi0 = init_level_set(48, 48, &around_ring(InitMode::BinaryStep { c: 2.0 })).unwrap();
    let mut model = rsf(Regularizer::Mbe { mu: 1.0, alpha: 15.0 }, Scheme::Sav, 5000);
    model.tol = Some(1e3);
    let out = run(&model, &image, &phi0).unwrap();
    assert!(out.converged);
    assert!(out.iterations < 5000);
}

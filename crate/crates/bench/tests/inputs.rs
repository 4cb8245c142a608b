use mbeseg::{Scheme, Solver};
use mbeseg_bench::{mbe_rsf, ring_problem};

#[test]
fn bench_inputs_are_valid_for_both_schemes() {
    for n in [32, 64] {
        let (image, phi) = ring_problem(n);
        assert_eq!(image.dims(), (n, n));
        assert!(phi.max() > 0.0 && phi.min() < 0.0);
        for scheme in [Scheme::Sav, Scheme::Fdm] {
            let solver = Solver::new(&mbe_rsf(scheme), &image).unwrap();
            let (state, eval) = solver.initial_state(&phi).unwrap();
            let next = solver.step(&state, &eval).unwrap();
            assert!(next.phi.is_finite());
        }
    }
}

use aclab::diagnostics::{coercivity_check, relative_entropy, tau};
use aclab::geometry::{xi, Cutoff, Trajectory};
use aclab::grid::Grid;
use aclab::potential::Potential;
use proptest::prelude::*;

proptest! {
    #[test]
    fn psi_is_increasing(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let p = Potential::standard();
        prop_assume!(a < b);
        prop_assert!(p.psi(a) <= p.psi(b));
    }

    #[test]
    fn tau_is_monotone_and_bounded(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        prop_assume!(a < b);
        prop_assert!(tau(a) <= tau(b));
        prop_assert!(tau(a).abs() <= 1.0);
    }

    #[test]
    fn xi_is_at_most_unit_length(x in -1.5f64..1.5, y in -1.5f64..1.5, t in 0.0f64..0.3) {
        let traj = Trajectory::sphere(2, 1.0, None).unwrap();
        let cut = Cutoff::new(0.4, 1.0);
        let v = xi(&traj, &cut, &[x, y], t).unwrap();
        prop_assert!((v[0] * v[0] + v[1] * v[1]).sqrt() <= 1.0 + 1e-12);
    }

    #[test]
    fn coercivity_holds_for_perturbed_profiles(
        shift in -0.05f64..0.05,
        stretch in 0.6f64..1.6,
        amp in 0.0f64..0.3,
        freq in 1.0f64..12.0,
    ) {
        let eps = 0.05;
        let grid = Grid::full(1, 1.2, 480).unwrap();
        let p = Potential::standard();
        let traj = Trajectory::plane(vec![1.0], 0.0).unwrap();
        let cut = Cutoff::new(0.5, 1.0);
        let u: Vec<f64> = (0..grid.len())
            .map(|k| {
                let x = grid.point(k)[0];
                let v = (1.5 * stretch * (x - shift) / eps).tanh() + amp * (freq * x).sin();
                v.clamp(-1.0, 1.0)
            })
            .collect();
        let b = relative_entropy(&grid, &p, eps, &u, &traj, &cut, 0.0).unwrap();
        prop_assert!(b.rel_entropy >= 0.0);
        let report = coercivity_check(&b, &cut);
        prop_assert!(report.pass(), "{:?}", report);
    }
}

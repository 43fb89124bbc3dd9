use lagflow::flow_map::{identity_residuals, neumann_tail_bound, InverseMapOptions, DEFAULT_K_MAX};
use lagflow::scenarios::{random_solenoidal, rng, shear_map};
use lagflow::{FlowMap, Grid, Interpolation, InverseMethod, ScalarField, VectorField};
use proptest::prelude::*;

fn grid() -> Grid<f64> {
    Grid::periodic(32).unwrap()
}

/// Flow map of a frozen random divergence-free field after `steps` steps.
fn random_map(seed: u64, amp: f64, steps: usize) -> FlowMap<f64> {
    let g = grid();
    let v = random_solenoidal(&g, 3, 1.5, &mut rng(seed)).scale(amp);
    let mut fm = FlowMap::identity(&g);
    for _ in 0..steps {
        fm = fm.advance_eulerian(&v, &v, 0.05, Interpolation::Spectral).unwrap();
    }
    fm
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn divergence_free_flows_keep_unit_determinant(seed in any::<u64>(), amp in 0.05f64..0.4) {
        let fm = random_map(seed, amp, 6);
        let inv = fm.invariants().unwrap();
        prop_assert!(inv.det_deviation <= 1e-5, "det deviation {}", inv.det_deviation);
        prop_assert!(inv.jacobian_bound_holds());
        prop_assert!(inv.inverse_bound_holds());
        prop_assert!((fm.time() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn inverse_map_undoes_the_map(seed in any::<u64>(), amp in 0.05f64..0.4) {
        let fm = random_map(seed, amp, 4);
        let g = fm.grid().clone();
        let labels = fm.inverse_map(&fm.positions(), &InverseMapOptions::default()).unwrap();
        for (i, y) in labels.iter().enumerate() {
            let p = g.point(i);
            prop_assert!(g.periodic_delta(y[0], p[0]).abs() < 1e-9);
            prop_assert!(g.periodic_delta(y[1], p[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn neumann_series_within_tail(seed in any::<u64>(), amp in 0.05f64..0.3) {
        let fm = random_map(seed, amp, 4);
        let r = fm.jacobian_integral().linf_op_norm();
        prop_assume!(r < 0.9);
        let direct = fm.inverse_jacobian(InverseMethod::DirectAdjugate).unwrap();
        let series = fm.inverse_jacobian(InverseMethod::NeumannSeries { k_max: DEFAULT_K_MAX }).unwrap();
        let gap = (direct.matrix() - series.matrix()).linf_op_norm();
        prop_assert!(gap <= neumann_tail_bound(r, DEFAULT_K_MAX) + 1e-13);
    }

    #[test]
    fn twisted_identities_on_shears(eps in 0.0f64..0.35, axis in 0usize..2, seed in any::<u64>()) {
        let g = grid();
        let a = shear_map(&g, eps, axis).inverse_jacobian(InverseMethod::DirectAdjugate).unwrap().into_matrix();
        let u = random_solenoidal(&g, 3, 1.0, &mut rng(seed));
        let p = ScalarField::from_fn(&g, |x, y| (x + 2.0 * y).sin());
        let h = VectorField::from_fn(&g, |x, y| [x.sin() * y.cos(), (x - y).cos()]);
        prop_assert!(identity_residuals(&a, &p, &u, &h).max() <= 1e-6);
    }
}

#[test]
fn reverse_flow_returns_labels() {
    let g = grid();
    let v = random_solenoidal(&g, 3, 1.5, &mut rng(5)).scale(0.2);
    let fwd = FlowMap::identity(&g).advance_eulerian(&v, &v, 0.1, Interpolation::Spectral).unwrap();
    let labels = fwd.inverse_map_grid(&InverseMapOptions::default()).unwrap();
    // Y(x) = x − 0.1·v at midpoint; one step of the frozen flow backwards
    let back: Vec<[f64; 2]> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            [x[0] - labels[i][0], x[1] - labels[i][1]]
        })
        .collect();
    let max_shift = back
        .iter()
        .map(|d| g.wrap(d[0] + g.length() / 2.0) - g.length() / 2.0)
        .fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(max_shift <= 0.1 * v.linf_norm() * 1.01);
}

use lagflow::diagnostics::{ladyzhenskaya_ratio, C_LADY};
use lagflow::scenarios::{random_band_limited, rng};
use lagflow::spectral::{curl, divergence, gradient, helmholtz_split, inverse_laplacian, laplacian, leray_project, partial};
use lagflow::{Grid, MatrixField, ScalarField, Snapshot, VectorField};
use proptest::prelude::*;

fn grid() -> Grid<f64> {
    Grid::periodic(16).unwrap()
}

fn field(seed: u64, k_max: usize) -> VectorField<f64> {
    random_band_limited(&grid(), k_max, 1.0, &mut rng(seed))
}

fn scalar(seed: u64, k_max: usize) -> ScalarField<f64> {
    field(seed, k_max).component(0).clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn leray_is_an_idempotent_split(seed in any::<u64>(), k_max in 1usize..7) {
        let v = field(seed, k_max);
        let p = leray_project(&v);
        prop_assert!((&leray_project(&p) - &p).linf_norm() <= 1e-12 * v.linf_norm());
        prop_assert!(divergence(&p).linf_norm() <= 1e-10 * v.linf_norm().max(1.0));
        let (s, g) = helmholtz_split(&v);
        prop_assert!((&(&s + &g) - &v).linf_norm() <= 1e-12 * v.linf_norm());
        prop_assert!(curl(&g).linf_norm() <= 1e-10 * v.linf_norm().max(1.0));
        // orthogonal parts
        prop_assert!(s.inner(&g).abs() <= 1e-10 * v.inner(&v));
    }

    #[test]
    fn gradients_are_curl_free(seed in any::<u64>(), k_max in 1usize..7) {
        let f = scalar(seed, k_max);
        prop_assert!(curl(&gradient(&f)).linf_norm() <= 1e-10 * f.linf_norm().max(1.0));
    }

    #[test]
    fn inverse_laplacian_inverts_on_mean_zero(seed in any::<u64>(), shift in -3.0f64..3.0) {
        let f = scalar(seed, 5).map(|x| x + shift);
        let inv = inverse_laplacian(&f);
        prop_assert!((inv.removed_mean - f.mean()).abs() <= 1e-12);
        let back = laplacian(&inv.field);
        let expected = f.map(|x| x - inv.removed_mean);
        prop_assert!((&back - &expected).linf_norm() <= 1e-10 * f.linf_norm());
        prop_assert!(inv.field.mean().abs() <= 1e-12);
    }

    #[test]
    fn derivatives_are_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, s1 in any::<u64>(), s2 in any::<u64>()) {
        let (f, g) = (scalar(s1, 4), scalar(s2, 4));
        let mut comb = f.scale(a);
        comb.axpy(b, &g);
        for axis in 0..2 {
            let mut expected = partial(&f, axis).scale(a);
            expected.axpy(b, &partial(&g, axis));
            prop_assert!((&partial(&comb, axis) - &expected).linf_norm() <= 1e-10 * (1.0 + expected.linf_norm()));
        }
    }

    #[test]
    fn snapshots_roundtrip_bitwise(seed in any::<u64>()) {
        let v = field(seed, 6);
        let snap = Snapshot::Vector(v.clone());
        prop_assert_eq!(Snapshot::parse(&snap.to_text()).unwrap(), snap);
        let m = MatrixField::from_fn(&grid(), |x, y| {
            let p = v.component(0).values()[0];
            lagflow::Mat2::new(x.sin() * p, y, x * y, -p)
        });
        let snap = Snapshot::Matrix(m);
        prop_assert_eq!(Snapshot::parse(&snap.to_text()).unwrap(), snap);
    }

    #[test]
    fn ladyzhenskaya_is_scale_invariant_and_bounded(seed in any::<u64>(), k_max in 1usize..8, scale in 0.01f64..100.0) {
        let v = field(seed, k_max);
        let r = ladyzhenskaya_ratio(&v).unwrap();
        let rs = ladyzhenskaya_ratio(&v.scale(scale)).unwrap();
        prop_assert!((r - rs).abs() <= 1e-10 * r);
        prop_assert!(r <= C_LADY, "ratio {} above {}", r, C_LADY);
    }
}

#[test]
fn thread_counts_agree() {
    let v = random_band_limited(&Grid::<f64>::periodic(64).unwrap(), 8, 1.0, &mut rng(3));
    let compute = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let p = leray_project(&v);
            (p.l2_norm(), divergence(&v).integral(), p)
        })
    };
    let (n1, s1, p1) = compute(1);
    let (n4, s4, p4) = compute(4);
    assert!((n1 - n4).abs() <= 1e-12 * n1);
    assert!((s1 - s4).abs() <= 1e-12 * (1.0 + s1.abs()));
    assert!((&p1 - &p4).linf_norm() <= 1e-12 * p1.linf_norm());
}

#[test]
fn single_precision_tracks_double() {
    let g64 = Grid::<f64>::periodic(32).unwrap();
    let g32 = Grid::<f32>::periodic(32).unwrap();
    let v64 = VectorField::from_fn(&g64, |x, y| [(x + 2.0 * y).sin(), (3.0 * x).cos() * y.sin()]);
    let v32 = VectorField::from_fn(&g32, |x, y| [(x + 2.0 * y).sin(), (3.0 * x).cos() * y.sin()]);
    let p64 = leray_project(&v64);
    let p32 = leray_project(&v32);
    for (a, b) in p64.component(0).values().iter().zip(p32.component(0).values()) {
        assert!((a - f64::from(*b)).abs() < 1e-5);
    }
    assert!(f64::from(divergence(&p32).linf_norm()) < 1e-5);
}

use proptest::prelude::*;

use sbp_interface::coupling::{CoupledSystem, Geometry, InterfaceSpec, Method, Orientation};
use sbp_interface::diagnostics::{read_records, write_records, ExperimentRecord};
use sbp_interface::interp::{build_interpolation_pair, InterpKind};
use sbp_interface::sbp::{build_sbp_d2, Order};
use sbp_interface::sparse::Triplets;

fn order() -> impl Strategy<Value = Order> {
    prop_oneof![Just(Order::Fourth), Just(Order::Sixth)]
}

fn kind() -> impl Strategy<Value = InterpKind> {
    prop_oneof![
        Just(InterpKind::Traditional),
        Just(InterpKind::OrderPreserving)
    ]
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![Just(Method::Projection), Just(Method::Hybrid)]
}

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![Just(Orientation::Standard), Just(Orientation::Mirrored)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d2_reproduces_quadratics(order in order(), m in 13usize..80, h in 0.01f64..2.0) {
        let op = build_sbp_d2(order, m, h).unwrap();
        let x: Vec<f64> = (0..m).map(|i| i as f64 * h).collect();
        let ones = op.d2.apply(&vec![1.0; m]);
        let quad = op.d2.apply(&x.iter().map(|v| v * v).collect::<Vec<_>>());
        for i in 0..m {
            prop_assert!(ones[i].abs() <= 1e-12 / (h * h) * 100.0);
            prop_assert!((quad[i] - 2.0).abs() <= 1e-9 * (1.0 + (x[m - 1] / h).powi(2)));
        }
    }

    #[test]
    fn sbp_identity_holds(order in order(), m in 13usize..80, h in 0.01f64..2.0) {
        let op = build_sbp_d2(order, m, h).unwrap();
        prop_assert!(op.sbp_residual() * h <= 1e-12);
        prop_assert!(op.norm.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn scaling_law(order in order(), m in 13usize..60, h in 0.05f64..3.0) {
        let a = build_sbp_d2(order, m, 1.0).unwrap();
        let b = build_sbp_d2(order, m, h).unwrap();
        for i in 0..m {
            prop_assert!((b.norm[i] - h * a.norm[i]).abs() <= 1e-14 * h);
            for (j, v) in a.d2.row(i) {
                prop_assert!((b.d2.get(i, j) - v / (h * h)).abs() <= 1e-12 * v.abs().max(1.0) / (h * h));
            }
            for (j, v) in a.stiffness.row(i) {
                prop_assert!((b.stiffness.get(i, j) - v / h).abs() <= 1e-12 * v.abs().max(1.0) / h);
            }
        }
        for (x, y) in a.d_left.coeffs.iter().zip(&b.d_left.coeffs) {
            prop_assert!((y - x / h).abs() <= 1e-12 * x.abs().max(1.0) / h);
        }
    }

    #[test]
    fn interpolation_preserves_constants_and_is_norm_compatible(order in order(), kind in kind(), mc in 16usize..70) {
        let pair = build_interpolation_pair(order, kind, mc).unwrap();
        prop_assert_eq!(pair.m_fine, 2 * mc - 1);
        for v in pair.c2f.apply(&vec![1.0; mc]) {
            prop_assert!((v - 1.0).abs() <= 1e-12);
        }
        for v in pair.f2c.apply(&vec![1.0; 2 * mc - 1]) {
            prop_assert!((v - 1.0).abs() <= 1e-12);
        }
        prop_assert!(pair.norm_compatibility_residual() <= 1e-12);
    }

    #[test]
    fn projection_invariants(method in method(), orientation in orientation(), kind in kind(), seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut spec = InterfaceSpec::new(Order::Fourth, kind, method);
        spec.orientation = orientation;
        let sys = CoupledSystem::new(spec, &Geometry::default(), 13).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = sys.len();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = |x: &[f64]| sys.inner(x, x).sqrt();
        let pa = sys.project(&a);
        let ppa = sys.project(&pa);
        let d: Vec<f64> = ppa.iter().zip(&pa).map(|(x, y)| x - y).collect();
        prop_assert!(norm(&d) <= 1e-10 * norm(&a));
        let lhs = sys.inner(&a, &sys.project(&b));
        let rhs = sys.inner(&pa, &b);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * norm(&a) * norm(&b));
        let lp = sys.constraint.apply(&pa);
        let an = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(lp.iter().all(|v| v.abs() <= 1e-10 * an));
    }

    #[test]
    fn triplets_round_trip(entries in prop::collection::vec((0usize..9, 0usize..7, -1e6f64..1e6), 0..40)) {
        let mut t = Triplets::new(9, 7);
        for &(i, j, v) in &entries {
            t.push(i, j, v);
        }
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = Triplets::read_from(&buf[..]).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn records_round_trip(m in 2usize..2000, rho in proptest::option::of(0.0f64..100.0),
                          e in proptest::option::of(-12.0f64..0.0), q in proptest::option::of(-7.0f64..0.0),
                          secs in 0.0f64..1e4) {
        let row = ExperimentRecord {
            method: "hybrid".into(),
            order: 6,
            interp: "op".into(),
            m,
            rho_tilde: rho,
            log10_error: e,
            rate: q,
            seconds: secs,
        };
        let mut buf = Vec::new();
        write_records(&mut buf, std::slice::from_ref(&row)).unwrap();
        let back = read_records(&buf[..]).unwrap();
        prop_assert_eq!(back, vec![row]);
    }
}

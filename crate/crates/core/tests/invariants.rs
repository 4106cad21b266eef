use proptest::prelude::*;
use sasaki_core::base::{ManifoldChart, Preset};
use sasaki_core::curvature::{antisymmetry_defect, curvature_closed_form, Reading};
use sasaki_core::expr::Expression;
use sasaki_core::fiber::FiberType;
use sasaki_core::geodesic::energy;
use sasaki_core::norden::{polynomial_defect, StructureTensor};
use sasaki_core::oracle::oracle_at;
use sasaki_core::sasaki::{levi_civita_11, levi_civita_pq, RescaleFunction, SasakiBundle};

fn sphere(f: &str) -> SasakiBundle {
    let chart = ManifoldChart::preset(&Preset::Sphere(1.0)).unwrap();
    SasakiBundle::new(chart, RescaleFunction::parse(f, 2).unwrap(), 1, 1).unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    (0.3f64..2.8, -3.0f64..3.0, prop::collection::vec(-1.5f64..1.5, 4)).prop_map(|(a, b, t)| {
        let mut y = vec![a, b];
        y.extend(t);
        y
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn polynomial_expressions_evaluate(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -5.0f64..5.0) {
        let e = Expression::parse_in(&format!("x1^2*x2 - 3*x1 + ({c})"), 2).unwrap();
        let v = e.eval(&[a, b]).unwrap();
        prop_assert!((v - (a * a * b - 3.0 * a + c)).abs() < 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn fiber_index_round_trip(n in 1usize..4, p in 0usize..3, q in 0usize..3, k in 0usize..10_000) {
        let ft = FiberType::new(n, p, q);
        let flat = k % ft.dim();
        prop_assert_eq!(ft.flatten(&ft.unflatten(flat)), flat);
    }

    #[test]
    fn structure_identities(v in prop::collection::vec(-10.0f64..10.0, 6)) {
        let vs = vec![v];
        prop_assert!(polynomial_defect(&StructureTensor::paracomplex(2), 0.0, 1.0, &vs) < 1e-12);
        prop_assert!(polynomial_defect(&StructureTensor::diagonal_identity(2), 0.0, 1.0, &vs) < 1e-12);
        prop_assert!(polynomial_defect(&StructureTensor::golden_tilde(2), 1.0, 1.0, &vs) < 1e-12);
        prop_assert!(polynomial_defect(&StructureTensor::golden_bar(2), 1.0, 1.0, &vs) < 1e-12);
    }

    #[test]
    fn frame_round_trip_and_positive_metric(y in point(), w in prop::collection::vec(-2.0f64..2.0, 6)) {
        let sb = sphere("exp(x1/5)");
        let b = sb.at_order(&y, 1).unwrap();
        let back = b.adapted(&b.natural(&w));
        for (a, c) in back.iter().zip(&w) {
            prop_assert!((a - c).abs() < 1e-10);
        }
        let norm: f64 = w.iter().map(|v| v * v).sum();
        prop_assert!(norm == 0.0 || energy(&b, &w) > 0.0);
    }

    #[test]
    fn levi_civita_matches_oracle(y in point()) {
        let sb = sphere("1 + x2^2/10");
        let b = sb.at_order(&y, 2).unwrap();
        let c = levi_civita_11(&b).unwrap();
        prop_assert!(c.max_abs_diff(&levi_civita_pq(&b)) < 1e-10);
        prop_assert!(c.max_abs_diff(&oracle_at(&sb, &y, false).unwrap().connection) < 1e-8);
    }

    #[test]
    fn curvature_is_antisymmetric(y in point()) {
        let sb = sphere("exp(x1/5)");
        let c = curvature_closed_form(&sb.at(&y).unwrap(), Reading::Repaired).unwrap();
        prop_assert!(antisymmetry_defect(2, 6, &c.r).iter().all(|(_, v)| *v < 1e-10));
    }
}

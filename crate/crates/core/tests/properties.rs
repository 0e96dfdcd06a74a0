use proptest::prelude::*;

use sysrisk::clearing::{
    aggregate, aggregate_rows, clearing_fictitious_default, clearing_picard, fixed_point_residual,
    validate_liabilities, AggregationSpec, LiabilityStructure,
};
use sysrisk::risk::AcceptanceCriterion;
use sysrisk::scenario::{sample_market, MarketSpec};
use sysrisk::setvalued::{boundary_intrinsic, boundary_monetary, default_monetary_box, SystemRisk};

/// A network of `d` banks with society as node 0.
fn network() -> impl Strategy<Value = LiabilityStructure> {
    (2usize..=6).prop_flat_map(|d| {
        (prop::collection::vec(0.0f64..1.0, d * d), prop::collection::vec(0.1f64..1.0, d)).prop_map(
            move |(inter, society)| {
                let mut rows = vec![vec![0.0; d + 1]; d + 1];
                for i in 0..d {
                    rows[i + 1][0] = society[i];
                    for j in 0..d {
                        if i != j {
                            rows[i + 1][j + 1] = inter[i * d + j];
                        }
                    }
                }
                validate_liabilities(&rows).unwrap()
            },
        )
    })
}

fn with_wealth(pairs: usize) -> impl Strategy<Value = (LiabilityStructure, Vec<Vec<f64>>)> {
    network().prop_flat_map(move |net| {
        let d = net.d();
        (Just(net), prop::collection::vec(prop::collection::vec(0.0f64..2.0, d), pairs))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clearing_vectors_are_certified_fixed_points((net, xs) in with_wealth(1)) {
        let x = &xs[0];
        let a = clearing_picard(x, &net, 1e-13, 1_000_000).unwrap();
        let b = clearing_fictitious_default(x, &net).unwrap();
        for (i, (u, v)) in a.p.iter().zip(&b.p).enumerate() {
            prop_assert!((u - v).abs() <= 1e-10);
            prop_assert!(*v >= 0.0 && *v <= net.lhat()[i]);
        }
        prop_assert!(fixed_point_residual(x, &net, &a.p) <= 1e-10);
        prop_assert!(fixed_point_residual(x, &net, &b.p) <= 1e-10);
        prop_assert_eq!(b.residual, fixed_point_residual(x, &net, &b.p));
    }

    #[test]
    fn aggregate_is_monotone_concave_and_bounded((net, xs) in with_wealth(2), beta in 0.05f64..0.95, bump in 0.0f64..0.5) {
        let spec = AggregationSpec::new(net, beta).unwrap();
        let (x, y) = (&xs[0], &xs[1]);
        let (lo, hi) = spec.range();
        let fx = aggregate(x, &spec).unwrap();
        let fy = aggregate(y, &spec).unwrap();
        prop_assert!(fx >= lo - 1e-12 && fx <= hi + 1e-12);
        let up: Vec<f64> = x.iter().map(|v| v + bump).collect();
        prop_assert!(aggregate(&up, &spec).unwrap() >= fx - 1e-10);
        for a in [0.25, 0.5, 0.75] {
            let mix: Vec<f64> = x.iter().zip(y).map(|(u, v)| a * u + (1.0 - a) * v).collect();
            prop_assert!(aggregate(&mix, &spec).unwrap() >= a * fx + (1.0 - a) * fy - 1e-10);
        }
    }

    #[test]
    fn row_order_carries_through_aggregation((net, xs) in with_wealth(5), shift in 1usize..5) {
        let spec = AggregationSpec::new(net, 0.5).unwrap();
        let rows: Vec<f64> = xs.concat();
        let rotated: Vec<f64> = xs.iter().cycle().skip(shift).take(xs.len()).flatten().copied().collect();
        let a = aggregate_rows(&rows, &spec).unwrap();
        let b = aggregate_rows(&rotated, &spec).unwrap();
        for i in 0..xs.len() {
            prop_assert_eq!(b[i], a[(i + shift) % xs.len()]);
        }
    }
}

#[test]
fn wealth_above_obligations_yields_constant_aggregate() {
    let spec = AggregationSpec::new(LiabilityStructure::complete(3, 0.3, 0.2).unwrap(), 0.9).unwrap();
    let rows = vec![5.0; 12];
    let v = aggregate_rows(&rows, &spec).unwrap();
    assert!(v.iter().all(|&x| (x - 0.1 * 0.6).abs() < 1e-15));
}

/// Relabelling the two banks of the symmetric base case must mirror every
/// boundary point: the swapped system evaluates the very same scenarios.
#[test]
fn base_case_boundaries_mirror_under_relabelling() {
    let market = sample_market(&MarketSpec::symmetric(2, 2.0, 5.0, 0.2, 5000, 20240607).unwrap()).unwrap();
    let swapped = market.permute(&[1, 0]).unwrap();
    let agg = AggregationSpec::new(LiabilityStructure::complete(2, 0.6, 0.2).unwrap(), 0.9).unwrap();
    let es = AcceptanceCriterion::es(0.05).unwrap();
    let (a, b) = (SystemRisk::new(&market, &agg, es).unwrap(), SystemRisk::new(&swapped, &agg, es).unwrap());
    let eps = 1e-6;
    let tol = 2.0 * eps;
    let bounds = default_monetary_box(&market.x0);
    let pairs = [
        (boundary_intrinsic(&a, 0.05, eps).unwrap(), boundary_intrinsic(&b, 0.05, eps).unwrap()),
        (boundary_monetary(&a, 0.05, eps, bounds).unwrap(), boundary_monetary(&b, 0.05, eps, bounds).unwrap()),
    ];
    for (orig, mirror) in &pairs {
        assert_eq!(orig.points.len(), mirror.points.len());
        for p in &orig.points {
            let q = mirror
                .points
                .iter()
                .find(|q| q.origin[0] == p.origin[1] && q.origin[1] == p.origin[0])
                .expect("mirrored origin");
            assert!((q.point[0] - p.point[1]).abs() <= tol && (q.point[1] - p.point[0]).abs() <= tol, "{p:?} vs {q:?}");
        }
    }
}

mod common;

use harvest_core::eigen::principal_eigenpair;
use harvest_core::grid::{CoefficientSet, Domain, DomainKind, ScalarField};
use harvest_core::operators::assemble;
use harvest_core::thresholds::compute_thresholds;
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = DomainKind> {
    prop_oneof![Just(DomainKind::SpPeriodic), Just(DomainKind::BoundedNeumann)]
}

/// A small 1-D or 2-D domain together with a nodal vector generator.
fn grid() -> impl Strategy<Value = (DomainKind, Vec<usize>)> {
    (kind(), prop_oneof![(4usize..12).prop_map(|n| vec![n]), (4usize..8, 4usize..8).prop_map(|(a, b)| vec![a, b])])
}

fn fields(n: usize, lo: f64, hi: f64, count: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(lo..hi, n), count)
}

fn weighted_dot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_self_adjoint_and_nonnegative(
        ((kind, res), vs) in grid().prop_flat_map(|(k, r)| {
            let n: usize = r.iter().product();
            (Just((k, r)), fields(n, -1.0, 1.0, 3))
        })
    ) {
        let d = common::domain(kind, &res);
        let a = ScalarField::new(d.clone(), vs[0].iter().map(|v| 1.5 + v).collect()).unwrap();
        let op = assemble(&d, &a).unwrap();
        let (x, y) = (&vs[1], &vs[2]);
        let mut ax = vec![0.0; x.len()];
        let mut ay = vec![0.0; y.len()];
        op.mul_strong(x, &mut ax);
        op.mul_strong(y, &mut ay);
        let w = op.mass();
        let lhs = weighted_dot(w, &ax, y);
        let rhs = weighted_dot(w, x, &ay);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        prop_assert!(weighted_dot(w, &ax, x) >= -1e-10);
    }

    #[test]
    fn principal_eigenvalue_orders_and_shifts(
        ((kind, res), vs, c) in grid().prop_flat_map(|(k, r)| {
            let n: usize = r.iter().product();
            (Just((k, r)), fields(n, -2.0, 2.0, 3), -3.0f64..3.0)
        })
    ) {
        let d = common::domain(kind, &res);
        let a = ScalarField::new(d.clone(), vs[0].iter().map(|v| 1.0 + 0.4 * v).collect()).unwrap();
        let op = assemble(&d, &a).unwrap();
        let mu = ScalarField::new(d.clone(), vs[1].clone()).unwrap();
        let bigger = ScalarField::new(d.clone(), vs[1].iter().zip(&vs[2]).map(|(m, e)| m + e.abs()).collect()).unwrap();
        let shifted = mu.map(|m| m + c).unwrap();
        let l = principal_eigenpair(&op, &mu, 1e-11).unwrap();
        let lb = principal_eigenpair(&op, &bigger, 1e-11).unwrap();
        let ls = principal_eigenpair(&op, &shifted, 1e-11).unwrap();
        prop_assert!(lb.lambda1 <= l.lambda1 + 1e-9);
        prop_assert!((ls.lambda1 - (l.lambda1 - c)).abs() <= 1e-8);
        prop_assert!(ls.phi.sup_distance(&l.phi) <= 1e-6);
        prop_assert!(l.phi_min > 0.0);
        // Bounded by the extremes of μ.
        prop_assert!(l.lambda1 <= -mu.values().iter().zip(op.mass()).map(|(m, w)| m * w).sum::<f64>() / op.mass().iter().sum::<f64>() + 1e-9);
        prop_assert!(l.lambda1 >= -mu.max() - 1e-9);
    }

    #[test]
    fn thresholds_are_ordered(
        ((kind, res), vs) in grid().prop_flat_map(|(k, r)| {
            let n: usize = r.iter().product();
            (Just((k, r)), fields(n, 0.0, 1.0, 3))
        }),
        mu0 in 0.5f64..4.0,
    ) {
        let d = common::domain(kind, &res);
        let mu = ScalarField::new(d.clone(), vs[0].iter().map(|v| mu0 * (2.0 * v - 0.3)).collect()).unwrap();
        let nu = ScalarField::new(d.clone(), vs[1].iter().map(|v| 0.5 + v).collect()).unwrap();
        let h = ScalarField::new(d.clone(), vs[2].iter().map(|v| 0.2 + v).collect()).unwrap();
        let coeffs = CoefficientSet::new(ScalarField::constant(d.clone(), 0.3), mu, nu, h, CoefficientSet::DEFAULT_TAU).unwrap();
        let op = assemble(&d, &coeffs.a).unwrap();
        let pair = principal_eigenpair(&op, &coeffs.mu, 1e-11).unwrap();
        let t = compute_thresholds(&coeffs, &pair, 0.01).unwrap();
        prop_assert_eq!(t.applicable, t.lambda1 < 0.0);
        if t.applicable {
            prop_assert!(0.0 < t.delta1 && t.delta1 <= t.delta2 * (1.0 + 1e-12));
            prop_assert!(t.kappa0 > 0.0);
        }
    }

    #[test]
    fn node_indices_round_trip(kind in kind(), n0 in 4usize..20, n1 in 4usize..20, l0 in 0.1f64..5.0, l1 in 0.1f64..5.0) {
        let d = Domain::new(kind, 2, &[l0, l1], &[n0, n1]).unwrap();
        for i in 0..d.len() {
            prop_assert_eq!(d.flat_index(d.multi_index(i)), i);
            let c = d.coords(i);
            prop_assert_eq!(d.nearest_index(c), i);
        }
        let total: f64 = d.mass_weights().iter().sum::<f64>() * d.cell_volume();
        prop_assert!((total - l0 * l1).abs() <= 1e-12 * l0 * l1);
    }
}

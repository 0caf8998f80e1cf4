use mbsim_core::ironing::{build_curve, iron, QuantileCurve, DEFAULT_GRID};
use mbsim_core::DistributionSpec;
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn curves() -> impl Strategy<Value = QuantileCurve> {
    prop::collection::vec(-5.0f64..5.0, 1..64).prop_map(|t| QuantileCurve::from_theta(t).unwrap())
}

proptest! {
    #[test]
    fn hull_dominates_cumulative(curve in curves()) {
        let r = iron(&curve).unwrap();
        for (h, c) in r.hull.iter().zip(&curve.cumulative) {
            prop_assert!(h + TOL >= *c, "hull {h} below curve {c}");
        }
        prop_assert!((r.hull[0] - curve.cumulative[0]).abs() <= TOL);
        let last = curve.cumulative.len() - 1;
        prop_assert!((r.hull[last] - curve.cumulative[last]).abs() <= TOL);
    }

    #[test]
    fn ironed_slopes_are_nonincreasing(curve in curves()) {
        let r = iron(&curve).unwrap();
        for w in r.ironed_theta.windows(2) {
            prop_assert!(w[1] <= w[0] + TOL, "{:?}", w);
        }
    }

    #[test]
    fn ironing_is_idempotent(curve in curves()) {
        let once = iron(&curve).unwrap();
        let twice = iron(&once.as_curve()).unwrap();
        for (a, b) in once.ironed_theta.iter().zip(&twice.ironed_theta) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn ironing_preserves_total_mass(curve in curves()) {
        let r = iron(&curve).unwrap();
        let total: f64 = r.ironed_theta.iter().map(|t| t / r.ironed_theta.len() as f64).sum();
        let last = *curve.cumulative.last().unwrap();
        prop_assert!((total - last).abs() <= 1e-9);
    }
}

#[test]
fn hazard_extremes_on_default_grid() {
    let uniform = iron(&build_curve(&DistributionSpec::uniform(0.0, 1.0).unwrap(), DEFAULT_GRID).unwrap()).unwrap();
    assert!(uniform.spread() <= 1e-6, "uniform spread {}", uniform.spread());
    let expo = iron(&build_curve(&DistributionSpec::exponential(2.0).unwrap(), DEFAULT_GRID).unwrap()).unwrap();
    assert!(expo.spread() <= 1e-6);
    let pareto = iron(&build_curve(&DistributionSpec::pareto(3.0, 1.0).unwrap(), DEFAULT_GRID).unwrap()).unwrap();
    assert!(pareto.max_deviation() <= 1e-6, "pareto deviation {}", pareto.max_deviation());
}

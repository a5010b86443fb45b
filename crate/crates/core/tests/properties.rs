use std::sync::Arc;

use doseopt::design::information;
use doseopt::maximin::ReferenceDesigns;
use doseopt::*;
use proptest::prelude::*;

fn sorted_distinct(mut xs: Vec<f64>, min_gap: f64) -> Option<Vec<f64>> {
    xs.sort_by(f64::total_cmp);
    xs.windows(2).all(|w| w[1] - w[0] > min_gap).then_some(xs)
}

fn design_strategy() -> impl Strategy<Value = ContinuousDesign> {
    (1usize..=6, 0.2f64..5.0).prop_flat_map(|(n, t)| {
        (
            prop::collection::vec(0.0..=t, n),
            prop::collection::vec(0.01f64..1.0, n),
            Just(t),
        )
            .prop_filter_map("distinct points", |(p, w, t)| {
                let mut pairs: Vec<(f64, f64)> = p.into_iter().zip(w).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                pairs.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6 * t);
                let (p, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                ContinuousDesign::from_unnormalized(p, w, t).ok()
            })
    })
}

fn theta_strategy() -> impl Strategy<Value = Theta> {
    (0.1f64..3.0, 0.05f64..4.0, 0.0f64..0.95, 1.0f64..3.0)
        .prop_map(|(a, b, c, d)| Theta::new(a, b, c, d))
}

fn maximin_refs() -> (MaximinProblem, Arc<ReferenceDesigns>) {
    let problem = MaximinProblem::nominal(1.0, 1.0);
    let refs = reference_designs(&problem, &OptimizerConfig::default()).unwrap();
    (problem, refs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn document_round_trip_is_identity(design in design_strategy(), theta in theta_strategy(), m in 0usize..5) {
        let model = ModelId::ALL[m];
        let doc = DesignDocument::new(model, theta, design, Provenance::new("property", Some(OptimizerConfig::default())));
        let text = doc.to_json();
        let back = DesignDocument::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        for (x, y) in back.design.points().iter().zip(doc.design.points()) {
            prop_assert!((x - y).abs() <= 1e-11 * y.abs().max(1e-300));
        }
        prop_assert_eq!(back.model, model);
    }

    #[test]
    fn weight_scaling_is_identity(design in design_strategy(), lambda in 0.01f64..100.0) {
        let scaled: Vec<f64> = design.weights().iter().map(|w| w * lambda).collect();
        let again = ContinuousDesign::from_unnormalized(design.points().to_vec(), scaled, design.space_upper()).unwrap();
        prop_assert!(again.distance(&design) < 1e-14);
    }

    #[test]
    fn criteria_ignore_support_order(design in design_strategy(), theta in theta_strategy()) {
        let mut p = design.points().to_vec();
        let mut w = design.weights().to_vec();
        p.reverse();
        w.reverse();
        let permuted = information(&p, &w, ModelId::Full, &theta);
        let original = information(design.points(), design.weights(), ModelId::Full, &theta);
        prop_assert!((permuted - original).abs().max() < 1e-12);
    }

    #[test]
    fn rounding_preserves_total(design in design_strategy(), n in 1usize..500) {
        let exact = round_design(&design, n).unwrap();
        prop_assert_eq!(exact.total(), n);
        for (&t, &c) in exact.points().iter().zip(exact.counts()) {
            let i = design.points().iter().position(|&x| x == t).unwrap();
            prop_assert!((c as f64 - n as f64 * design.weights()[i]).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn rescaling_round_trips(design in design_strategy(), b in 0.1f64..3.0, d in 0.5f64..3.0, d2 in 0.5f64..3.0, t2 in 0.2f64..4.0) {
        let from = Scaling::new(b, d, design.space_upper());
        let b2 = from.invariant() / t2.powf(d2);
        let to = Scaling::new(b2, d2, t2);
        let there = rescale_design(&design, from, to).unwrap();
        prop_assert!((there.space_upper() - t2).abs() < 1e-12 * t2);
        let back = rescale_design(&there, to, from).unwrap();
        prop_assert!(back.distance(&design) < 1e-9 * design.space_upper());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn explicit_weights_sum_to_one(pts in prop::collection::vec(0.0f64..=1.0, 3), b in 0.1f64..3.0) {
        let pts = sorted_distinct(pts, 1e-3);
        prop_assume!(pts.is_some());
        let pts = pts.unwrap();
        let theta = Theta::nominal(b);
        for (model, k) in [(ModelId::ExpPow, 2), (ModelId::ExpSat, 2)] {
            match weights_from_points(&pts, model, &theta, k) {
                Ok(w) => {
                    prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    prop_assert!(w.iter().all(|&x| x > 0.0));
                }
                Err(Error::NegativeWeight { .. }) | Err(Error::SingularSupport) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn maximin_objective_bounded_by_each_pair(pts in prop::collection::vec(0.0f64..=1.0, 4), w in prop::collection::vec(0.05f64..1.0, 4)) {
        let pts = sorted_distinct(pts, 1e-3);
        prop_assume!(pts.is_some());
        let design = ContinuousDesign::from_unnormalized(pts.unwrap(), w, 1.0).unwrap();
        let (problem, refs) = maximin_refs();
        let value = maximin_objective(&design, &problem, &refs);
        let report = maximin::maximin_report(&design, &problem, &refs);
        prop_assert_eq!(report.pair_effs.len(), 4);
        for e in report.pair_effs.values() {
            prop_assert!(value <= *e + 1e-15);
        }
        prop_assert!(value >= 0.0);
        prop_assert!(value <= 1.0 + 1e-9, "a 4-point design beats a reference: {}", value);
    }
}

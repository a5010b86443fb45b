use doseopt::*;

fn xi_mm() -> ExactDesign {
    builtin_designs().remove("xi_mm").unwrap()
}

#[test]
fn small_noise_matches_asymptotic_variance() {
    let spec = SimSpec::new(
        Theta::new(1.0, 0.08, 0.1, 1.0),
        1e-6,
        1500,
        11,
        ModelId::Full,
    );
    let result = simulate_fit(&xi_mm(), &spec).unwrap();
    assert_eq!(result.failures, 0);
    for p in &result.params {
        let asym = p.asymptotic.unwrap();
        let rel = (p.normalized_variance - asym).abs() / asym;
        assert!(
            rel < 0.10,
            "{}: simulated {} vs asymptotic {asym}",
            p.parameter,
            p.normalized_variance
        );
    }
}

#[test]
fn estimator_means_are_unbiased_at_small_noise() {
    let theta = Theta::new(1.0, 0.08, 0.1, 1.0);
    let spec = SimSpec::new(theta, 1e-4, 400, 5, ModelId::Full);
    let result = simulate_fit(&xi_mm(), &spec).unwrap();
    for p in &result.params {
        let truth = theta.get(p.parameter);
        assert!(
            (p.mean - truth).abs() <= 3.0 * p.mean_stderr,
            "{}: mean {} truth {truth} se {}",
            p.parameter,
            p.mean,
            p.mean_stderr
        );
    }
}

#[test]
fn seeded_reports_are_reproducible() {
    let request: SimulationRequest = serde_json::from_str(
        r#"{"true_theta": {"b": 0.08, "c": 0.1, "d": 1.0}, "reps": 40, "fit_models": ["2.3", "2.5"]}"#,
    )
    .unwrap();
    let a = run_simulation(&request, 99).unwrap();
    let b = run_simulation(&request, 99).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 2 * (3 + 4));
    let c = run_simulation(&request, 100).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}

#[test]
fn identical_designs_do_not_dominate_strictly() {
    let spec = SimSpec::new(Theta::new(1.0, 0.08, 0.1, 1.0), 0.05, 60, 3, ModelId::Full);
    let report = compare_designs(&xi_mm(), &xi_mm(), &spec).unwrap();
    for e in &report.entries {
        assert!((e.ratio - 1.0).abs() < 1e-12);
    }
}

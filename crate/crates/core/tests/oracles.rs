use doseopt::design::InfoMatrix;
use doseopt::local::{alternation_certificate, verify_c_optimality};
use doseopt::*;

fn local(model: ModelId, theta: Theta, target: Param, t: f64) -> ContinuousDesign {
    solve_local(&LocalDesignProblem::new(model, theta, target, t)).unwrap()
}

fn close(a: &ContinuousDesign, b: &ContinuousDesign, tol: f64) -> bool {
    a.len() == b.len() && a.distance(b) < tol
}

#[test]
fn local_designs_do_not_depend_on_a() {
    for (model, target) in [
        (ModelId::ExpPow, Param::D),
        (ModelId::ExpSat, Param::C),
        (ModelId::Full, Param::C),
    ] {
        let base = local(model, Theta::nominal(1.0), target, 1.0);
        for a in [0.5, 2.0] {
            let other = local(model, Theta::nominal(1.0).with(Param::A, a), target, 1.0);
            assert!(
                close(&base, &other, 1e-6),
                "{model}/{target} a={a}: {other:?} vs {base:?}"
            );
        }
    }
}

#[test]
fn d_optimal_designs_do_not_depend_on_a() {
    let cfg = OptimizerConfig::default();
    for model in [ModelId::Exp, ModelId::ExpPow, ModelId::ExpSat] {
        let base = solve_d_optimal(model, &Theta::nominal(1.0), 1.0, &cfg).unwrap();
        for a in [0.5, 2.0] {
            let other =
                solve_d_optimal(model, &Theta::nominal(1.0).with(Param::A, a), 1.0, &cfg).unwrap();
            assert!(close(&base, &other, 1e-6), "{model} a={a}");
        }
    }
}

#[test]
fn power_map_matches_direct_solve() {
    let base = local(ModelId::ExpPow, Theta::nominal(1.0), Param::D, 1.0);
    let mapped = rescale_design(
        &base,
        Scaling::new(1.0, 1.0, 1.0),
        Scaling::new(1.0, 2.0, 1.0),
    )
    .unwrap();
    let direct = local(
        ModelId::ExpPow,
        Theta::nominal(1.0).with(Param::D, 2.0),
        Param::D,
        1.0,
    );
    assert!(close(&mapped, &direct, 1e-5), "{mapped:?} vs {direct:?}");
    assert!((mapped.points()[1] - base.points()[1].sqrt()).abs() < 1e-12);
}

#[test]
fn rate_map_of_closed_form_middle_point() {
    for (b, t, r) in [(1.0, 1.0, 2.0), (0.3, 2.5, 0.1), (4.0, 0.7, 7.5)] {
        let direct = middle_point_closed_form(b, 0.0, t);
        let scaled = middle_point_closed_form(b * r, 0.0, t / r) * r;
        assert!((direct - scaled).abs() < 1e-10 * t, "b={b} T={t} r={r}");
    }
}

#[test]
fn closed_form_matches_numeric_search() {
    let cfg = OptimizerConfig::default();
    for b in [0.2, 1.0, 3.0] {
        let problem = LocalDesignProblem::new(ModelId::ExpSat, Theta::nominal(b), Param::C, 1.0);
        let closed = solve_local(&problem).unwrap();
        let numeric = solve_local_numeric(&problem, &cfg).unwrap();
        assert!(close(&closed, &numeric, 1e-3), "b={b}");
    }
}

#[test]
fn uniform_design_fails_c_bound() {
    let th = Theta::nominal(1.0);
    let d = ContinuousDesign::uniform(vec![0.0, 0.5, 1.0], 1.0).unwrap();
    let report = verify_c_optimality(&d, ModelId::ExpSat, &th, 2).unwrap();
    assert!(!report.passed);
    let opt = local(ModelId::ExpSat, th, Param::C, 1.0);
    assert!(
        verify_c_optimality(&opt, ModelId::ExpSat, &th, 2)
            .unwrap()
            .passed
    );
    assert!(
        alternation_certificate(opt.points(), ModelId::ExpSat, &th, 1.0)
            .unwrap()
            .passed
    );
    assert!(!chebyshev_alternation_check(&[0.0, 0.9, 1.0], ModelId::ExpSat, &th, 1.0).unwrap());
}

#[test]
fn variance_agrees_with_determinant_ratio() {
    let th = Theta::new(1.3, 0.8, 0.4, 1.7);
    let d = ContinuousDesign::new(
        vec![0.0, 0.2, 0.45, 0.8, 1.0],
        vec![0.1, 0.3, 0.2, 0.25, 0.15],
        1.0,
    )
    .unwrap();
    let info = InfoMatrix::new(&d, ModelId::Full, &th);
    for j in 0..4 {
        let minor = info.entries.clone().remove_row(j).remove_column(j);
        let ratio = minor.determinant() / info.det();
        let v = info.coordinate_variance(j).unwrap();
        assert!((v - ratio).abs() < 1e-10 * ratio, "j={j}: {v} vs {ratio}");
    }
}

#[test]
fn optimal_references_bound_efficiencies() {
    let th = Theta::nominal(1.0);
    let cfg = OptimizerConfig::default();
    let d = ContinuousDesign::uniform(vec![0.0, 0.25, 0.5, 0.75, 1.0], 1.0).unwrap();
    for model in ESTIMATION_MODELS {
        let best = solve_d_optimal(model, &th, 1.0, &cfg).unwrap();
        let e = d_efficiency(&d, model, &th, &best).unwrap();
        assert!(e > 0.0 && e <= 1.0 + 1e-9, "{model}: {e}");
        for &p in model.params() {
            let best = solve_c_optimal(model, &th, p, 1.0, &cfg).unwrap();
            let e = param_efficiency(&d, model, &th, p, &best.design).unwrap();
            assert!(e > 0.0 && e <= 1.0 + 1e-6, "{model}:{p}: {e}");
        }
    }
}

#[test]
fn restrictions_reproduce_child_means() {
    let th = Theta::new(1.7, 0.9, 0.35, 1.8);
    for edge in nesting_edges() {
        let restricted = th.with(edge.param, edge.value);
        for t in [0.0, 0.3, 1.0, 2.5] {
            let parent = edge.parent.mean_unchecked(&restricted, t);
            let child = edge.child.mean_unchecked(&restricted, t);
            assert!(
                (parent - child).abs() < 1e-12,
                "{} -> {} at t={t}",
                edge.parent,
                edge.child
            );
        }
    }
}

#[test]
fn rat_allocation_rounding() {
    let d = ContinuousDesign::new(
        vec![0.0, 3.6, 24.0, 60.0],
        vec![0.117, 0.2, 0.217, 0.466],
        60.0,
    )
    .unwrap();
    let e = round_design(&d, 60).unwrap();
    assert_eq!(e.counts(), &[7, 12, 13, 28]);
}

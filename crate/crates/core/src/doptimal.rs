//! Locally D-optimal designs.

use crate::design::{information, log_det, ContinuousDesign, InfoMatrix};
use crate::error::{Error, Result};
use crate::local::{BoundReport, CERTIFICATE_GRID};
use crate::model::{ModelId, Theta};
use crate::optim::{finalize_design, grow_support, OptimizerConfig};

/// Relative slack of the bound `d(t) ≤ m`.
pub const D_BOUND_TOL: f64 = 1e-6;

const POLISH_ITERATIONS: usize = 2000;
const RETRY_ROUNDS: usize = 2;

/// Standardized variance `d(t) = f(t)ᵀ M⁻¹ f(t)` on a grid.
pub fn verify_d_optimality(
    design: &ContinuousDesign,
    model: ModelId,
    theta: &Theta,
) -> Result<BoundReport> {
    theta.validate(model)?;
    let m = model.dim();
    let inv = InfoMatrix::new(design, model, theta).inverse()?;
    let variance = |t: f64| {
        let f = nalgebra::DVector::from_vec(
            model
                .gradient(theta, t)
                .unwrap_or_else(|_| vec![f64::NAN; m]),
        );
        (f.transpose() * &inv * &f)[(0, 0)]
    };
    let t_max = design.space_upper();
    let step = t_max / (CERTIFICATE_GRID - 1) as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    let consider = |best: &mut (f64, f64), t: f64| {
        let v = variance(t);
        if v > best.1 {
            *best = (t, v);
        }
    };
    for i in 0..CERTIFICATE_GRID {
        consider(&mut best, i as f64 * step);
    }
    let centre = best.0;
    for i in -10..=10 {
        consider(
            &mut best,
            (centre + i as f64 * step / 10.0).clamp(0.0, t_max),
        );
    }
    for &t in design.points() {
        consider(&mut best, t);
    }
    let (argmax, max_value) = best;
    let support_residual = design
        .points()
        .iter()
        .map(|&t| (variance(t) - m as f64).abs())
        .fold(0.0, f64::max);
    let threshold = m as f64 * (1.0 + D_BOUND_TOL);
    Ok(BoundReport {
        criterion: "D".into(),
        max_value,
        argmax,
        threshold,
        support_residual,
        passed: max_value <= threshold,
    })
}

/// Multiplicative weight iterations `w_i ← w_i d(t_i)/m` on a fixed support.
fn polish_weights(points: &[f64], weights: &[f64], model: ModelId, theta: &Theta) -> Vec<f64> {
    let m = model.dim() as f64;
    let grads: Vec<nalgebra::DVector<f64>> = points
        .iter()
        .map(|&t| nalgebra::DVector::from_vec(model.gradient(theta, t).expect("validated theta")))
        .collect();
    let mut w = weights.to_vec();
    for _ in 0..POLISH_ITERATIONS {
        let Some(inv) = information(points, &w, model, theta).try_inverse() else {
            return weights.to_vec();
        };
        let d: Vec<f64> = grads
            .iter()
            .map(|f| (f.transpose() * &inv * f)[(0, 0)])
            .collect();
        let spread = d.iter().fold(0.0f64, |acc, x| acc.max((x - m).abs()));
        w.iter_mut().zip(&d).for_each(|(wi, di)| *wi *= di / m);
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
        if spread < 1e-12 * m {
            break;
        }
    }
    w
}

/// Locally D-optimal design of `model` on `[0, T]`. The constant model
/// returns the one-point design `{T}`.
pub fn solve_d_optimal(
    model: ModelId,
    theta: &Theta,
    space_upper: f64,
    config: &OptimizerConfig,
) -> Result<ContinuousDesign> {
    theta.validate(model)?;
    if !(space_upper.is_finite() && space_upper > 0.0) {
        return Err(Error::param("T", "must be > 0"));
    }
    if model == ModelId::Constant {
        return ContinuousDesign::new(vec![space_upper], vec![1.0], space_upper);
    }
    let m = model.dim();
    let objective = |p: &[f64], w: &[f64]| log_det(&information(p, w, model, theta));
    let mut last = None;
    for round in 0..=RETRY_ROUNDS {
        let cfg = OptimizerConfig {
            starts: config.starts * (round + 1),
            ..config.with_seed(config.seed.wrapping_add(round as u64 * 104_729))
        };
        let grown = grow_support(objective, m, space_upper, &[], &cfg)?;
        let raw = grown.best_design;
        let weights = polish_weights(raw.points(), raw.weights(), model, theta);
        let design = finalize_design(raw.points(), &weights, space_upper)?;
        let report = verify_d_optimality(&design, model, theta)?;
        if report.passed {
            return Ok(design);
        }
        last = Some(report);
    }
    let r = last.expect("at least one round");
    Err(Error::OptimizerFailure(format!(
        "D-optimality bound violated: max d(t) = {:.9} > {:.9} at t = {:.6}",
        r.max_value, r.threshold, r.argmax
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_model_is_one_point() {
        let d = solve_d_optimal(
            ModelId::Constant,
            &Theta::nominal(1.0),
            2.0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(d.points(), &[2.0]);
    }

    #[test]
    fn exp_model_matches_grid_oracle() {
        let th = Theta::nominal(1.0);
        let d = solve_d_optimal(ModelId::Exp, &th, 1.0, &OptimizerConfig::default()).unwrap();
        // det M for two points is w1 w2 (f1(s) f2(t) - f1(t) f2(s))^2
        let f = |t: f64| [(-t).exp(), -t * (-t).exp()];
        let n = 2001;
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let (s, t) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
                let (fs, ft) = (f(s), f(t));
                let v = (fs[0] * ft[1] - ft[0] * fs[1]).abs();
                if v > best.0 {
                    best = (v, s, t);
                }
            }
        }
        assert_eq!(d.len(), 2);
        assert!((d.points()[0] - best.1).abs() < 2e-3);
        assert!((d.points()[1] - best.2).abs() < 2e-3);
        for w in d.weights() {
            assert!((w - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_ten_points_fail() {
        let pts: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let d = ContinuousDesign::uniform(pts, 1.0).unwrap();
        let r = verify_d_optimality(&d, ModelId::ExpPow, &Theta::nominal(1.0)).unwrap();
        assert!(!r.passed);
    }
}

//! Locally `e_k`-optimal designs for discriminating nested models.
//!
//! For the models with three or four parameters the gradient components form
//! a Chebyshev system on `[0, T]`. The `e_k`-optimal design is then
//! supported at the `m` Chebyshev points, and for a support `t_1 < … < t_m`
//! with `F = (f(t_1), …, f(t_m))` the optimal weights are
//!
//! ```text
//! ω = J F⁻¹ e_k / (1ᵀ J F⁻¹ e_k),     J = diag(1, -1, 1, …)
//! ```
//!
//! With these weights the criterion `e_kᵀ M⁻¹ e_k` equals `(Σ |(F⁻¹ e_k)_i|)²`,
//! which is what the point search minimizes.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{ContinuousDesign, InfoMatrix};
use crate::error::{Error, Result};
use crate::model::{ModelId, Param, Theta};
use crate::optim::{latin_hypercube, maximize, Bounds, OptimizerConfig};

/// Grid size used by the certificates.
pub const CERTIFICATE_GRID: usize = 2000;

/// Relative tolerance of the c-optimality bound.
pub const C_BOUND_TOL: f64 = 1e-6;

/// Absolute slack of the alternation bound `|p(t)| ≤ 1`.
pub const ALTERNATION_TOL: f64 = 1e-8;

/// Penalty (in log-criterion units) for supports whose explicit weights are
/// not all positive.
const SIGN_PENALTY: f64 = 50.0;

/// Minimum relative separation of support points during the search.
const MIN_SEPARATION: f64 = 1e-6;

/// Additional search rounds before a failed certificate becomes an error.
const RETRY_ROUNDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalDesignProblem {
    pub model: ModelId,
    pub theta: Theta,
    pub target: Param,
    #[serde(rename = "T")]
    pub space_upper: f64,
}

impl LocalDesignProblem {
    pub fn new(model: ModelId, theta: Theta, target: Param, space_upper: f64) -> Self {
        LocalDesignProblem {
            model,
            theta,
            target,
            space_upper,
        }
    }

    pub fn validate(&self) -> Result<usize> {
        self.theta.validate(self.model)?;
        if !(self.space_upper.is_finite() && self.space_upper > 0.0) {
            return Err(Error::param("T", "must be > 0"));
        }
        let supported = matches!(
            (self.model, self.target),
            (ModelId::ExpPow, Param::D)
                | (ModelId::ExpSat, Param::C)
                | (ModelId::Full, Param::D)
                | (ModelId::Full, Param::C)
        );
        if !supported {
            return Err(Error::Unsupported(format!(
                "no discrimination design for target `{}` in model {}",
                self.target, self.model
            )));
        }
        if self.model == ModelId::ExpSat && self.theta.c >= 1.0 {
            return Err(Error::param(
                "theta.c",
                "the e_3-optimal design of model 2.4 requires 0 <= c < 1",
            ));
        }
        Ok(self
            .model
            .index_of(self.target)
            .expect("target checked above"))
    }
}

/// Outcome of a pointwise equivalence-theorem check on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub criterion: String,
    /// Largest value of the check function over the grid.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub max_value: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub argmax: f64,
    /// The design passes when `max_value <= threshold`.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub threshold: f64,
    /// Largest absolute deviation from equality at the support points.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub support_residual: f64,
    pub passed: bool,
}

/// Equioscillation certificate of a support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternationReport {
    #[serde(serialize_with = "crate::io::ser_f64_seq")]
    pub coefficients: Vec<f64>,
    /// `sup |p(t)|` over the grid.
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub sup: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub argsup: f64,
    pub passed: bool,
}

fn support_matrix(points: &[f64], model: ModelId, theta: &Theta) -> DMatrix<f64> {
    let m = model.dim();
    let mut f = DMatrix::zeros(m, points.len());
    let mut g = [0.0; 4];
    for (i, &t) in points.iter().enumerate() {
        model.gradient_into(theta, t, &mut g[..m]);
        for r in 0..m {
            f[(r, i)] = g[r];
        }
    }
    f
}

/// `F⁻¹ e_k`, or `None` when `F` is singular.
fn support_coefficients(
    points: &[f64],
    model: ModelId,
    theta: &Theta,
    k: usize,
) -> Option<DVector<f64>> {
    let m = model.dim();
    let f = support_matrix(points, model, theta);
    let mut e = DVector::zeros(m);
    e[k] = 1.0;
    let lu = f.lu();
    let diag = lu.u().diagonal().abs();
    if !(diag.min() > 1e-14 * diag.max()) {
        return None;
    }
    let u = lu.solve(&e)?;
    u.iter().all(|x| x.is_finite()).then_some(u)
}

fn alternates(u: &DVector<f64>) -> bool {
    let s0 = u[0].signum();
    u.iter()
        .enumerate()
        .all(|(i, x)| *x != 0.0 && x.signum() == if i % 2 == 0 { s0 } else { -s0 })
}

/// Explicit weights `J F⁻¹ e_k / (1ᵀ J F⁻¹ e_k)` for a support of exactly
/// `m` points (`k` is the zero-based canonical index of the target).
pub fn weights_from_points(
    points: &[f64],
    model: ModelId,
    theta: &Theta,
    k: usize,
) -> Result<Vec<f64>> {
    let m = model.dim();
    if points.len() != m {
        return Err(Error::InvalidDesign(format!(
            "explicit weights need exactly {m} points, got {}",
            points.len()
        )));
    }
    if k >= m {
        return Err(Error::param(
            "target",
            format!("index {k} out of range for model {model}"),
        ));
    }
    let u = support_coefficients(points, model, theta, k).ok_or(Error::SingularSupport)?;
    let signed: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, x)| if i % 2 == 0 { *x } else { -*x })
        .collect();
    let total: f64 = signed.iter().sum();
    let weights: Vec<f64> = signed.iter().map(|x| x / total).collect();
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::NegativeWeight { index, value });
    }
    Ok(weights)
}

/// `1/x - 1/(1 - e^{-x})`, evaluated without cancellation near 0.
fn gap_factor(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        -0.5 - x / 12.0 + x.powi(3) / 720.0
    } else {
        1.0 / x + 1.0 / (-x).exp_m1()
    }
}

/// Middle support point of the `e_3`-optimal design of model 2.4 with outer
/// points `t1 < t3`:
///
/// ```text
/// t2 = 1/b + (t1 e^{-b t1} - t3 e^{-b t3}) / (e^{-b t1} - e^{-b t3})
/// ```
///
/// evaluated in the equivalent form `t3 + Δ·(1/(bΔ) - 1/(1 - e^{-bΔ}))`,
/// `Δ = t3 - t1`, which stays accurate as `b → 0`.
pub fn middle_point_closed_form(b: f64, t1: f64, t3: f64) -> f64 {
    let delta = t3 - t1;
    t3 + delta * gap_factor(b * delta)
}

/// `(b, d, T)` configuration of the rate/power rescaling maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub b: f64,
    #[serde(default = "one")]
    pub d: f64,
    #[serde(rename = "T")]
    pub space_upper: f64,
}

fn one() -> f64 {
    1.0
}

impl Scaling {
    pub fn new(b: f64, d: f64, space_upper: f64) -> Self {
        Scaling { b, d, space_upper }
    }

    /// `b T^d`, the quantity both maps preserve.
    pub fn invariant(&self) -> f64 {
        self.b * self.space_upper.powf(self.d)
    }

    fn validate(&self, which: &str) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.b) {
            return Err(Error::param(format!("{which}.b"), "must be > 0"));
        }
        if !ok(self.d) {
            return Err(Error::param(format!("{which}.d"), "must be > 0"));
        }
        if !ok(self.space_upper) {
            return Err(Error::param(format!("{which}.T"), "must be > 0"));
        }
        Ok(())
    }
}

/// Transports an optimal design between configurations connected by the
/// power map `t ↦ t^{1/d}` (with `T ↦ T^{1/d}`) and the rate map
/// `t ↦ t/r` (with `b ↦ r b`, `T ↦ T/r`). Weights are unchanged; points map
/// as `t' = (b t^d / b')^{1/d'}`. The two configurations are connected iff
/// `b T^d = b' T'^{d'}`.
pub fn rescale_design(
    design: &ContinuousDesign,
    from: Scaling,
    to: Scaling,
) -> Result<ContinuousDesign> {
    from.validate("from")?;
    to.validate("to")?;
    if (design.space_upper() - from.space_upper).abs() > 1e-12 * from.space_upper {
        return Err(Error::InvalidDesign(format!(
            "design lives on [0, {}] but the source configuration has T = {}",
            design.space_upper(),
            from.space_upper
        )));
    }
    if from == to {
        return Ok(design.clone());
    }
    let (lhs, rhs) = (from.invariant(), to.invariant());
    if !((lhs - rhs).abs() <= 1e-9 * lhs.max(rhs)) {
        return Err(Error::UnreachableScaling {
            from_b: from.b,
            from_d: from.d,
            from_t: from.space_upper,
            to_b: to.b,
            to_d: to.d,
            to_t: to.space_upper,
        });
    }
    let ratio = from.b / to.b;
    let points: Vec<f64> = design
        .points()
        .iter()
        .map(|&t| {
            if t == 0.0 {
                0.0
            } else if t == from.space_upper {
                to.space_upper
            } else {
                (ratio * t.powf(from.d))
                    .powf(1.0 / to.d)
                    .min(to.space_upper)
            }
        })
        .collect();
    ContinuousDesign::new(points, design.weights().to_vec(), to.space_upper)
}

fn grid(space_upper: f64) -> impl Iterator<Item = f64> {
    (0..CERTIFICATE_GRID).map(move |i| space_upper * i as f64 / (CERTIFICATE_GRID - 1) as f64)
}

/// Grid maximum of `h` over `[0, T]`, refined with a ten times finer grid
/// around the coarse maximizer.
fn refined_max(space_upper: f64, h: impl Fn(f64) -> f64) -> (f64, f64) {
    let step = space_upper / (CERTIFICATE_GRID - 1) as f64;
    let (mut arg, mut best) =
        grid(space_upper)
            .map(|t| (t, h(t)))
            .fold(
                (0.0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
    let centre = arg;
    for i in -10..=10 {
        let t = (centre + i as f64 * step / 10.0).clamp(0.0, space_upper);
        let v = h(t);
        if v > best {
            best = v;
            arg = t;
        }
    }
    (arg, best)
}

/// Equivalence check of `e_j`-optimality:
/// `g(t) = (f(t)ᵀ M⁻¹ e_j)² - e_jᵀ M⁻¹ e_j ≤ 0` on `[0, T]`, accepted up to
/// `1e-6 · e_jᵀ M⁻¹ e_j`.
pub fn verify_c_optimality(
    design: &ContinuousDesign,
    model: ModelId,
    theta: &Theta,
    j: usize,
) -> Result<BoundReport> {
    let m = model.dim();
    let inv = InfoMatrix::new(design, model, theta).inverse()?;
    let h = inv.column(j).into_owned();
    let variance = h[j];
    let check = |t: f64| {
        let mut f = [0.0; 4];
        model.gradient_into(theta, t, &mut f[..m]);
        let proj: f64 = (0..m).map(|r| f[r] * h[r]).sum();
        proj * proj - variance
    };
    let (argmax, max_grid) = refined_max(design.space_upper(), check);
    let support: Vec<f64> = design.points().iter().map(|&t| check(t)).collect();
    let support_max = support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (argmax, max_value) = if support_max > max_grid {
        let i = support.iter().position(|&v| v == support_max).unwrap_or(0);
        (design.points()[i], support_max)
    } else {
        (argmax, max_grid)
    };
    let threshold = C_BOUND_TOL * variance;
    Ok(BoundReport {
        criterion: format!("e_{}", j + 1),
        max_value,
        argmax,
        threshold,
        support_residual: support.iter().map(|v| v.abs()).fold(0.0, f64::max),
        passed: max_value <= threshold,
    })
}

/// Solves `p(t_i) = (-1)^i` for `p = cᵀ f` and reports `sup |p|` on the grid.
pub fn alternation_certificate(
    points: &[f64],
    model: ModelId,
    theta: &Theta,
    space_upper: f64,
) -> Result<AlternationReport> {
    let m = model.dim();
    if points.len() != m {
        return Err(Error::InvalidDesign(format!(
            "alternation needs exactly {m} points, got {}",
            points.len()
        )));
    }
    let f = support_matrix(points, model, theta);
    let signs = DVector::from_iterator(m, (1..=m).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }));
    let c = f
        .transpose()
        .lu()
        .solve(&signs)
        .ok_or(Error::SingularSupport)?;
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSupport);
    }
    let poly = |t: f64| {
        let mut g = [0.0; 4];
        model.gradient_into(theta, t, &mut g[..m]);
        (0..m).map(|r| g[r] * c[r]).sum::<f64>().abs()
    };
    let (argsup, sup) = refined_max(space_upper, poly);
    Ok(AlternationReport {
        coefficients: c.iter().copied().collect(),
        sup,
        argsup,
        passed: sup <= 1.0 + ALTERNATION_TOL,
    })
}

/// True iff the points carry an equioscillation certificate, i.e. they are
/// the Chebyshev points of the model's gradient system on `[0, T]`.
pub fn chebyshev_alternation_check(
    points: &[f64],
    model: ModelId,
    theta: &Theta,
    space_upper: f64,
) -> Result<bool> {
    Ok(alternation_certificate(points, model, theta, space_upper)?.passed)
}

/// Result of a support search: the sorted points and `Σ |F⁻¹ e_k|`.
struct SupportSearch {
    points: Vec<f64>,
    l1: f64,
}

/// Log of the `Σ|u|` criterion for an unsorted candidate support, with the
/// separation and sign penalties applied.
fn support_objective(
    x: &[f64],
    model: ModelId,
    theta: &Theta,
    k: usize,
    space_upper: f64,
    require_alternation: bool,
) -> f64 {
    let mut pts = x.to_vec();
    pts.sort_by(f64::total_cmp);
    let min_gap = pts
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let separation_penalty = if min_gap < MIN_SEPARATION * space_upper {
        SIGN_PENALTY
    } else {
        0.0
    };
    match support_coefficients(&pts, model, theta, k) {
        Some(u) => {
            let l1: f64 = u.iter().map(|x| x.abs()).sum();
            if !(l1 > 0.0 && l1.is_finite()) {
                return f64::NEG_INFINITY;
            }
            let sign_penalty = if require_alternation && !alternates(&u) {
                SIGN_PENALTY
            } else {
                0.0
            };
            -(2.0 * l1.ln()) - sign_penalty - separation_penalty
        }
        None => f64::NEG_INFINITY,
    }
}

fn heuristic_start(m: usize, space_upper: f64) -> Vec<f64> {
    // 0, T r^{m-2}, ..., T r, T
    let r: f64 = 0.3;
    let mut pts = vec![0.0];
    for i in (1..m - 1).rev() {
        pts.push(space_upper * r.powi(i as i32));
    }
    pts.push(space_upper);
    pts
}

fn search_support(
    model: ModelId,
    theta: &Theta,
    k: usize,
    space_upper: f64,
    require_alternation: bool,
    config: &OptimizerConfig,
    round: usize,
) -> Result<SupportSearch> {
    let m = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(round as u64 * 7919));
    let n_starts = config.starts.max(2) * (round + 1);
    let mut starts = vec![heuristic_start(m, space_upper)];
    starts.extend(latin_hypercube(n_starts - 1, m, space_upper, &mut rng));
    let bounds = Bounds::uniform(m, 0.0, space_upper);

    let results: Vec<Result<(Vec<f64>, f64)>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, start)| {
            let cfg = config.with_seed(config.seed.wrapping_add((round * 1000 + i) as u64));
            let objective =
                |x: &[f64]| support_objective(x, model, theta, k, space_upper, require_alternation);
            let opt = maximize(objective, start, &bounds, &cfg)?;
            let mut pts = opt.x;
            pts.sort_by(f64::total_cmp);
            Ok((pts, opt.value))
        })
        .collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in results {
        let (pts, value) = r?;
        let replace = match &best {
            None => true,
            Some((bp, bv)) => value > *bv || (value == *bv && pts < *bp),
        };
        if replace {
            best = Some((pts, value));
        }
    }
    let (points, value) = best.ok_or_else(|| Error::OptimizerFailure("no start".into()))?;
    if !value.is_finite() {
        return Err(Error::OptimizerFailure(
            "every start produced a singular support".into(),
        ));
    }
    let u = support_coefficients(&points, model, theta, k).ok_or(Error::SingularSupport)?;
    Ok(SupportSearch {
        l1: u.iter().map(|x| x.abs()).sum(),
        points,
    })
}

/// Locally optimal discriminating design with default optimizer settings.
pub fn solve_local(problem: &LocalDesignProblem) -> Result<ContinuousDesign> {
    solve_local_with(problem, &OptimizerConfig::default())
}

/// Locally optimal discriminating design. Model 2.4 uses the closed-form
/// middle point; the other models search the support numerically.
pub fn solve_local_with(
    problem: &LocalDesignProblem,
    config: &OptimizerConfig,
) -> Result<ContinuousDesign> {
    let k = problem.validate()?;
    if problem.model == ModelId::ExpSat {
        let t = problem.space_upper;
        let points = vec![0.0, middle_point_closed_form(problem.theta.b, 0.0, t), t];
        let weights = weights_from_points(&points, problem.model, &problem.theta, k)?;
        return ContinuousDesign::new(points, weights, t);
    }
    solve_local_numeric(problem, config)
}

/// Numerical support search for any supported problem, including model 2.4
/// (used to cross-check the closed form).
pub fn solve_local_numeric(
    problem: &LocalDesignProblem,
    config: &OptimizerConfig,
) -> Result<ContinuousDesign> {
    let k = problem.validate()?;
    config.validate()?;
    let LocalDesignProblem {
        model,
        theta,
        space_upper,
        ..
    } = *problem;
    let mut last_report = None;
    for round in 0..=RETRY_ROUNDS {
        let found = search_support(model, &theta, k, space_upper, true, config, round)?;
        let weights = match weights_from_points(&found.points, model, &theta, k) {
            Ok(w) => w,
            Err(Error::NegativeWeight { .. }) => continue,
            Err(e) => return Err(e),
        };
        let design = ContinuousDesign::new(found.points, weights, space_upper)?;
        let report = verify_c_optimality(&design, model, &theta, k)?;
        if report.passed {
            return Ok(design);
        }
        last_report = Some(report);
    }
    Err(Error::OptimizerFailure(match last_report {
        Some(r) => format!(
            "c-optimality bound violated: max {:.3e} > {:.3e} at t = {:.6}",
            r.max_value, r.threshold, r.argmax
        ),
        None => "no support with positive explicit weights found".into(),
    }))
}

/// A c-optimal design for a single coordinate with its optimal variance.
#[derive(Debug, Clone, PartialEq)]
pub struct COptimal {
    pub design: ContinuousDesign,
    /// `min_ξ e_jᵀ M⁻(ξ) e_j`.
    pub variance: f64,
}

/// Locally `e_j`-optimal design for any parameter of any model, found by
/// minimizing `Σ |F⁻¹ e_j|` over `m`-point supports. Points whose
/// coefficient vanishes are dropped, so the result may have fewer than `m`
/// points and a singular information matrix in whose range `e_j` lies.
pub fn solve_c_optimal(
    model: ModelId,
    theta: &Theta,
    param: Param,
    space_upper: f64,
    config: &OptimizerConfig,
) -> Result<COptimal> {
    theta.validate(model)?;
    let j = model.index_of(param).ok_or_else(|| {
        Error::param(
            "target",
            format!("model {model} has no parameter `{param}`"),
        )
    })?;
    if model == ModelId::Constant {
        return Ok(COptimal {
            design: ContinuousDesign::new(vec![space_upper], vec![1.0], space_upper)?,
            variance: 1.0,
        });
    }
    let found = search_support(model, theta, j, space_upper, false, config, 0)?;
    let u = support_coefficients(&found.points, model, theta, j).ok_or(Error::SingularSupport)?;
    let (points, weights): (Vec<f64>, Vec<f64>) = found
        .points
        .iter()
        .zip(u.iter())
        .filter(|(_, x)| x.abs() > 1e-9 * found.l1)
        .map(|(&t, x)| (t, x.abs()))
        .unzip();
    let design = crate::optim::finalize_design(&points, &weights, space_upper)?;
    Ok(COptimal {
        design,
        variance: found.l1 * found.l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::em_variance;

    #[test]
    fn explicit_weights_of_known_supports() {
        let th = Theta::nominal(1.0);
        let w = weights_from_points(&[0.0, 0.418, 1.0], ModelId::ExpSat, &th, 2).unwrap();
        for (a, b) in w.iter().zip([0.180, 0.469, 0.351]) {
            assert!((a - b).abs() < 0.002, "{w:?}");
        }
        let th = Theta::nominal(0.1);
        let w = weights_from_points(&[0.0, 0.355, 1.0], ModelId::ExpPow, &th, 2).unwrap();
        for (a, b) in w.iter().zip([0.311, 0.500, 0.189]) {
            assert!((a - b).abs() < 0.002, "{w:?}");
        }
    }

    #[test]
    fn explicit_weights_reach_l1_criterion() {
        let th = Theta::nominal(1.0);
        let pts = [0.0, 0.3, 0.9];
        let w = weights_from_points(&pts, ModelId::ExpPow, &th, 2).unwrap();
        let d = ContinuousDesign::new(pts.to_vec(), w, 1.0).unwrap();
        let v = em_variance(&d, ModelId::ExpPow, &th, Param::D).unwrap();
        let u = support_coefficients(&pts, ModelId::ExpPow, &th, 2).unwrap();
        let l1: f64 = u.iter().map(|x| x.abs()).sum();
        assert!((v - l1 * l1).abs() < 1e-9 * v);
    }

    #[test]
    fn singular_support() {
        let th = Theta::nominal(1.0);
        assert_eq!(
            weights_from_points(&[0.2, 0.2, 0.9], ModelId::ExpPow, &th, 2).unwrap_err(),
            Error::SingularSupport
        );
    }

    #[test]
    fn closed_form_values() {
        assert!((middle_point_closed_form(1.0, 0.0, 1.0) - 0.418).abs() < 1e-3);
        assert!((middle_point_closed_form(0.1, 0.0, 1.0) - 0.492).abs() < 1e-3);
        assert!((middle_point_closed_form(1e-6, 0.0, 1.0) - 0.5).abs() < 1e-4);
        // literal formula away from the series branch
        let (b, t1, t3): (f64, f64, f64) = (1.7, 0.2, 1.3);
        let e1 = (-b * t1).exp();
        let e3 = (-b * t3).exp();
        let literal = 1.0 / b + (t1 * e1 - t3 * e3) / (e1 - e3);
        assert!((middle_point_closed_form(b, t1, t3) - literal).abs() < 1e-12);
    }

    #[test]
    fn exp_sat_closed_form_is_returned() {
        let th = Theta::nominal(1.0);
        let d = solve_local(&LocalDesignProblem::new(ModelId::ExpSat, th, Param::C, 1.0)).unwrap();
        assert_eq!(
            d.points(),
            &[0.0, middle_point_closed_form(1.0, 0.0, 1.0), 1.0]
        );
    }

    #[test]
    fn exp_sat_rejects_c_one() {
        let th = Theta::nominal(1.0).with(Param::C, 1.0);
        assert!(matches!(
            solve_local(&LocalDesignProblem::new(ModelId::ExpSat, th, Param::C, 1.0)),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn unsupported_target() {
        let th = Theta::nominal(1.0);
        assert!(matches!(
            solve_local(&LocalDesignProblem::new(ModelId::ExpPow, th, Param::B, 1.0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rescale_identity_and_unreachable() {
        let d =
            ContinuousDesign::new(vec![0.0, 0.251, 1.0], vec![0.276, 0.473, 0.251], 1.0).unwrap();
        let s = Scaling::new(1.0, 1.0, 1.0);
        assert_eq!(rescale_design(&d, s, s).unwrap(), d);
        assert!(matches!(
            rescale_design(&d, s, Scaling::new(2.0, 1.0, 1.0)),
            Err(Error::UnreachableScaling { .. })
        ));
        let squared = rescale_design(&d, s, Scaling::new(1.0, 2.0, 1.0)).unwrap();
        assert!((squared.points()[1] - 0.251f64.sqrt()).abs() < 1e-15);
        assert_eq!(squared.weights(), d.weights());
    }
}

//! Derivative-free maximization: a bounded Nelder–Mead simplex with
//! restarts, and a driver that grows the support of a design one point at a
//! time until the criterion stops improving.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::ContinuousDesign;
use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Bound on the free weight logits.
const LOGIT_BOUND: f64 = 20.0;

/// Relative gap below which support points are merged.
pub const MERGE_GAP: f64 = 1e-4;

/// Relative distance at which a point is moved onto an endpoint.
const SNAP_GAP: f64 = 1e-8;

fn default_growth_tol() -> f64 {
    1e-6
}

fn default_starts() -> usize {
    20
}

fn default_max_support() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Absolute spread of simplex values at which a run terminates.
    pub f_tol: f64,
    /// Simplex diameter (sup norm) at which a run terminates.
    pub x_tol: f64,
    /// Nelder–Mead runs per start; each rerun begins a fresh simplex at the
    /// incumbent.
    pub restarts: usize,
    pub seed: u64,
    /// Number of multi-start initial points.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Minimum improvement that justifies one more support point.
    #[serde(default = "default_growth_tol")]
    pub growth_tol: f64,
    #[serde(default = "default_max_support")]
    pub max_support: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iter: 4000,
            f_tol: 1e-13,
            x_tol: 1e-10,
            restarts: 4,
            seed: 0x5eed,
            starts: default_starts(),
            growth_tol: default_growth_tol(),
            max_support: default_max_support(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::param(format!("config.{field}"), msg));
        if !(self.f_tol > 0.0) {
            return bad("f_tol", "must be > 0");
        }
        if !(self.x_tol > 0.0) {
            return bad("x_tol", "must be > 0");
        }
        if !(self.growth_tol > 0.0) {
            return bad("growth_tol", "must be > 0");
        }
        if self.restarts == 0 {
            return bad("restarts", "must be >= 1");
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be >= 1");
        }
        if self.starts == 0 {
            return bad("starts", "must be >= 1");
        }
        Ok(())
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Bounds { lower, upper }
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        Bounds::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, lo), hi)| v >= lo && v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each run.
    pub trace: Vec<f64>,
}

struct RunOutcome {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
}

/// One bounded Nelder–Mead run minimizing `g`.
fn nelder_mead_run<G: FnMut(&[f64]) -> f64>(
    g: &mut G,
    start: &[f64],
    start_value: f64,
    bounds: &Bounds,
    steps: &[f64],
    config: &OptimizerConfig,
) -> RunOutcome {
    let n = start.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], g: &mut G| -> f64 {
        evaluations += 1;
        let v = g(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    values.push(start_value);
    for i in 0..n {
        let mut v = start.to_vec();
        let step = steps[i];
        v[i] = if v[i] + step <= bounds.upper[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        bounds.clip(&mut v);
        values.push(eval(&v, g));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for _ in 0..config.max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n.saturating_sub(1)];

        let spread = values[worst] - values[best];
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread <= config.f_tol || !spread.is_finite() && values[worst] == values[best])
            && diameter <= config.x_tol
        {
            break;
        }
        if diameter == 0.0 {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }

        let along = |coef: f64, from: &[f64], out: &mut Vec<f64>| {
            for ((o, c), f) in out.iter_mut().zip(&centroid).zip(from) {
                *o = c + coef * (c - f);
            }
            bounds.clip(out);
        };

        along(REFLECT, &simplex[worst], &mut trial);
        let reflected = trial.clone();
        let fr = eval(&reflected, g);

        if fr < values[best] {
            along(EXPAND * REFLECT, &simplex[worst], &mut trial);
            let fe = eval(&trial, g);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }

        let (fc, accept) = if fr < values[worst] {
            // outside contraction toward the reflected point
            for ((o, c), r) in trial.iter_mut().zip(&centroid).zip(&reflected) {
                *o = c + CONTRACT * (r - c);
            }
            bounds.clip(&mut trial);
            let fc = eval(&trial, g);
            (fc, fc <= fr)
        } else {
            for ((o, c), w) in trial.iter_mut().zip(&centroid).zip(&simplex[worst]) {
                *o = c + CONTRACT * (w - c);
            }
            bounds.clip(&mut trial);
            let fc = eval(&trial, g);
            (fc, fc < values[worst])
        };
        if accept {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fc;
            continue;
        }

        let anchor = simplex[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + SHRINK * (*x - a);
            }
            values[i] = eval(&simplex[i], g);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    RunOutcome {
        x: simplex.swap_remove(best),
        value: values[best],
        evaluations,
    }
}

/// Maximizes `objective` over `bounds` from `start` with Nelder–Mead.
///
/// Proposals outside the box are clipped onto it. The first run starts at
/// `start`; every further run restarts a fresh simplex (with a seeded random
/// size) at the incumbent, and the search stops once a rerun fails to improve
/// by more than `f_tol`.
pub fn maximize<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    start: &[f64],
    bounds: &Bounds,
    config: &OptimizerConfig,
) -> Result<Optimum> {
    assert_eq!(
        start.len(),
        bounds.dim(),
        "start and bounds differ in dimension"
    );
    let mut x0 = start.to_vec();
    bounds.clip(&mut x0);
    let f0 = objective(&x0);
    if f0.is_nan() {
        return Err(Error::NonFiniteObjective);
    }
    let mut g = |x: &[f64]| -objective(x);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let widths: Vec<f64> = bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .zip(&x0)
        .map(|((lo, hi), x)| {
            let w = hi - lo;
            if w.is_finite() && w > 0.0 {
                w
            } else {
                x.abs().max(1.0)
            }
        })
        .collect();

    let mut best_x = x0;
    let mut best_g = -f0;
    let mut evaluations = 1;
    let mut trace = Vec::with_capacity(config.restarts);
    for run in 0..config.restarts {
        let scale = if run == 0 {
            0.1
        } else {
            0.1 * rng.random_range(0.25..1.0) / run as f64
        };
        let steps: Vec<f64> = widths.iter().map(|w| (scale * w).max(1e-12)).collect();
        let out = nelder_mead_run(&mut g, &best_x, best_g, bounds, &steps, config);
        evaluations += out.evaluations;
        let improvement = best_g - out.value;
        if out.value < best_g {
            best_g = out.value;
            best_x = out.x;
        }
        trace.push(-best_g);
        if run > 0 && !(improvement > config.f_tol) {
            break;
        }
    }
    Ok(Optimum {
        x: best_x,
        value: -best_g,
        evaluations,
        trace,
    })
}

/// Outcome of [`grow_support`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthResult {
    pub best_design: ContinuousDesign,
    pub best_value: f64,
    /// `(support size, best criterion value)` for every size tried.
    pub criterion_trace: Vec<(usize, f64)>,
}

/// Encodes a design as `[t_1..t_n, z_1..z_{n-1}]` with weights
/// `w_i ∝ exp(z_i)` and `z_n = 0`.
pub fn encode_design(points: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = points.len();
    let last = weights[n - 1];
    let mut x = points.to_vec();
    x.extend(
        weights[..n - 1]
            .iter()
            .map(|w| (w / last).ln().clamp(-LOGIT_BOUND, LOGIT_BOUND)),
    );
    x
}

/// Inverse of [`encode_design`]: `(points, weights)`, weights summing to 1.
pub fn decode_design(x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let points = x[..n].to_vec();
    let mut weights: Vec<f64> = x[n..].iter().map(|z| z.exp()).collect();
    weights.push(1.0);
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (points, weights)
}

fn design_bounds(n: usize, space_upper: f64) -> Bounds {
    let mut lower = vec![0.0; n];
    let mut upper = vec![space_upper; n];
    lower.extend(std::iter::repeat_n(-LOGIT_BOUND, n - 1));
    upper.extend(std::iter::repeat_n(LOGIT_BOUND, n - 1));
    Bounds::new(lower, upper)
}

/// Sorts support points and merges neighbours closer than `MERGE_GAP * T`,
/// placing a merged point at the weighted mean of its members. Applied until
/// no pair is close, so merging twice equals merging once.
pub fn merge_support(points: &[f64], weights: &[f64], space_upper: f64) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gap = MERGE_GAP * space_upper;
    loop {
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        let mut changed = false;
        for (t, w) in pairs.iter().copied() {
            match merged.last_mut() {
                Some(last) if t - last.0 < gap => {
                    let total = last.1 + w;
                    last.0 = (last.0 * last.1 + t * w) / total;
                    last.1 = total;
                    changed = true;
                }
                _ => merged.push((t, w)),
            }
        }
        pairs = merged;
        if !changed {
            break;
        }
    }
    pairs.into_iter().unzip()
}

/// Builds a validated design from raw optimizer output, merging
/// near-duplicate points and clamping into `[0, T]`.
pub fn finalize_design(
    points: &[f64],
    weights: &[f64],
    space_upper: f64,
) -> Result<ContinuousDesign> {
    let snap = SNAP_GAP * space_upper;
    let clamped: Vec<f64> = points
        .iter()
        .map(|&t| match t {
            t if t < snap => 0.0,
            t if t > space_upper - snap => space_upper,
            t => t,
        })
        .collect();
    let (p, w) = merge_support(&clamped, weights, space_upper);
    ContinuousDesign::from_unnormalized(p, w, space_upper)
}

/// Latin-hypercube samples of `count` sorted `n`-point supports on `[0, T]`.
pub fn latin_hypercube(
    count: usize,
    n: usize,
    space_upper: f64,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let mut samples = vec![vec![0.0; n]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for j in 0..n {
        strata.shuffle(rng);
        for (s, &k) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            samples[s][j] = (k as f64 + u) / count as f64 * space_upper;
        }
    }
    for s in &mut samples {
        s.sort_by(f64::total_cmp);
    }
    samples
}

struct Candidate {
    points: Vec<f64>,
    weights: Vec<f64>,
    value: f64,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            let mut pa = a.points.clone();
            let mut pb = b.points.clone();
            pa.sort_by(f64::total_cmp);
            pb.sort_by(f64::total_cmp);
            pa < pb
        }
    }
}

fn optimize_from<F>(
    objective: &F,
    points: &[f64],
    weights: &[f64],
    space_upper: f64,
    config: &OptimizerConfig,
) -> Result<Candidate>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = points.len();
    let bounds = design_bounds(n, space_upper);
    let start = encode_design(points, weights);
    let opt = maximize(
        |x| {
            let (p, w) = decode_design(x, n);
            objective(&p, &w)
        },
        &start,
        &bounds,
        config,
    )?;
    let (p, w) = decode_design(&opt.x, n);
    Ok(Candidate {
        points: p,
        weights: w,
        value: opt.value,
    })
}

fn best_of(cands: Vec<Result<Candidate>>) -> Result<Candidate> {
    let mut best: Option<Candidate> = None;
    let mut last_err = None;
    for c in cands {
        match c {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| better(&c, b)) {
                    best = Some(c);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::OptimizerFailure("no start succeeded".into()))
    })
}

/// Maximizes a design criterion `objective(points, weights)` over designs
/// on `[0, T]`, starting with `n0`-point designs and adding one point at a
/// time while the best value improves by more than `growth_tol`.
///
/// The `n0`-point search runs from every design in `initial` (those with
/// `n0` points) plus `config.starts` Latin-hypercube supports with equal
/// weights. Larger supports start from the incumbent with one point inserted
/// into each gap. Starts run in parallel; the winner is chosen by value with
/// ties broken by the lexicographically smallest support.
pub fn grow_support<F>(
    objective: F,
    n0: usize,
    space_upper: f64,
    initial: &[ContinuousDesign],
    config: &OptimizerConfig,
) -> Result<GrowthResult>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    config.validate()?;
    if n0 == 0 {
        return Err(Error::param("n0", "initial support size must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts: Vec<(Vec<f64>, Vec<f64>)> = initial
        .iter()
        .filter(|d| d.len() == n0)
        .map(|d| (d.points().to_vec(), d.weights().to_vec()))
        .collect();
    for pts in latin_hypercube(config.starts, n0, space_upper, &mut rng) {
        starts.push((pts, vec![1.0 / n0 as f64; n0]));
    }

    let run_all = |starts: &[(Vec<f64>, Vec<f64>)], salt: u64| -> Result<Candidate> {
        let results: Vec<Result<Candidate>> = starts
            .par_iter()
            .enumerate()
            .map(|(k, (p, w))| {
                let cfg = config.with_seed(
                    config
                        .seed
                        .wrapping_add(salt.wrapping_mul(0x9E37_79B9))
                        .wrapping_add(k as u64 + 1),
                );
                optimize_from(&objective, p, w, space_upper, &cfg)
            })
            .collect();
        best_of(results)
    };

    let mut best = run_all(&starts, 0)?;
    let mut trace = vec![(n0, best.value)];
    let max_support = config.max_support.max(n0);
    for n in n0 + 1..=max_support {
        let (p, w) = merge_support(&best.points, &best.weights, space_upper);
        let base = p.len();
        let mut candidates = Vec::new();
        let mut insert_at: Vec<f64> = Vec::new();
        if p.first().is_some_and(|&t| t > MERGE_GAP * space_upper) {
            insert_at.push(0.0);
        }
        if p.last()
            .is_some_and(|&t| t < space_upper * (1.0 - MERGE_GAP))
        {
            insert_at.push(space_upper);
        }
        insert_at.extend(p.windows(2).map(|s| 0.5 * (s[0] + s[1])));
        let extra = n.saturating_sub(base);
        if extra == 0 {
            break;
        }
        for &t in &insert_at {
            let mut pts = p.clone();
            let mut ws: Vec<f64> = w
                .iter()
                .map(|x| x * (1.0 - extra as f64 / n as f64))
                .collect();
            for k in 0..extra {
                pts.push((t + k as f64 * 1e-3 * space_upper).min(space_upper));
                ws.push(1.0 / n as f64);
            }
            candidates.push((pts, ws));
        }
        let grown = run_all(&candidates, n as u64)?;
        trace.push((n, grown.value.max(best.value)));
        if grown.value > best.value + config.growth_tol {
            best = grown;
        } else {
            break;
        }
    }

    let best_design = finalize_design(&best.points, &best.weights, space_upper)?;
    Ok(GrowthResult {
        best_value: objective(best_design.points(), best_design.weights()),
        best_design,
        criterion_trace: trace,
    })
}

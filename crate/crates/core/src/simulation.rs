//! Monte-Carlo least-squares simulations of exact designs.
//!
//! Each replicate draws `Y_ij = η(t_i, θ) + ε_ij`, `ε ~ N(0, σ²)`, fits the
//! fit model by least squares and records `θ̂`. Normalized variances are
//! `N/σ²` times the empirical variance of each component, comparable to the
//! diagonal of `M⁻¹(ξ, θ)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::InfoMatrix;
use crate::error::{Error, Result};
use crate::model::{ModelId, Param, Theta};
use crate::optim::{maximize, Bounds, OptimizerConfig};

pub use crate::io::ExactDesign;

/// Least-squares starts per replicate.
pub const FIT_STARTS: usize = 5;

/// Relative perturbation of the true value for each start.
pub const START_SPREAD: f64 = 0.2;

/// Replicates whose RSS exceeds this multiple of the median are excluded.
pub const RSS_OUTLIER_FACTOR: f64 = 10.0;

/// Box used for the least-squares fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitBounds {
    /// `a, b > 0`, `c ∈ [0, 1]`, `d ≥ 1`.
    Natural,
    /// `a, b > 0`, `c` and `d` free within wide limits.
    #[default]
    Relaxed,
}

impl FitBounds {
    fn interval(self, param: Param, truth: f64) -> (f64, f64) {
        let wide = 100.0 * truth.abs().max(1.0);
        match (self, param) {
            (_, Param::A) | (_, Param::B) => (1e-10, wide),
            (FitBounds::Natural, Param::C) => (0.0, 1.0),
            (FitBounds::Natural, Param::D) => (1.0, wide),
            (FitBounds::Relaxed, Param::C) => (-wide, wide),
            (FitBounds::Relaxed, Param::D) => (1e-3, wide),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(default = "full")]
    pub true_model: ModelId,
    pub true_theta: Theta,
    pub sigma: f64,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    pub fit_model: ModelId,
    #[serde(default)]
    pub bounds: FitBounds,
}

fn full() -> ModelId {
    ModelId::Full
}

impl SimSpec {
    pub fn new(true_theta: Theta, sigma: f64, reps: usize, seed: u64, fit_model: ModelId) -> Self {
        SimSpec {
            true_model: ModelId::Full,
            true_theta,
            sigma,
            reps,
            seed,
            fit_model,
            bounds: FitBounds::default(),
        }
    }

    pub fn with_fit_model(mut self, fit_model: ModelId) -> Self {
        self.fit_model = fit_model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be > 0"));
        }
        if self.reps < 2 {
            return Err(Error::param(
                "reps",
                "at least 2 replicates are needed for a variance",
            ));
        }
        if self.fit_model == ModelId::Constant {
            return Err(Error::Unsupported("fitting the constant model".into()));
        }
        self.true_theta.validate_generating(self.true_model)
    }
}

/// The two designs of the rat study: the uniform log-spaced `xi_u` and the
/// maximin design `xi_mm`, both with 60 animals on `[0, 60]`.
pub fn builtin_designs() -> BTreeMap<String, ExactDesign> {
    let mut map = BTreeMap::new();
    map.insert(
        "xi_u".to_string(),
        ExactDesign::new(
            vec![0.0, 1.0, 1.7, 2.8, 4.7, 7.8, 13.0, 22.0, 36.0, 60.0],
            vec![6; 10],
        )
        .expect("valid builtin design"),
    );
    map.insert(
        "xi_mm".to_string(),
        ExactDesign::new(vec![0.0, 3.6, 24.0, 60.0], vec![7, 12, 13, 28])
            .expect("valid builtin design"),
    );
    map
}

/// Simulation summary for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: Param,
    pub normalized_variance: f64,
    /// Monte-Carlo standard error of `normalized_variance`.
    pub mc_stderr: f64,
    pub mean: f64,
    /// Standard error of `mean`.
    pub mean_stderr: f64,
    /// `e_jᵀ M⁻¹ e_j` of the fit model at the true parameter, when defined.
    pub asymptotic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub fit_model: ModelId,
    pub n: usize,
    pub reps: usize,
    /// Replicates used for the summaries.
    pub used: usize,
    /// Replicates excluded as non-converged.
    pub failures: usize,
    /// Fraction of used replicates with an estimate on the box boundary.
    pub boundary_fraction: f64,
    pub params: Vec<ParamSummary>,
}

impl SimulationResult {
    pub fn get(&self, param: Param) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.parameter == param)
    }

    pub fn normalized_variance(&self, param: Param) -> Option<f64> {
        self.get(param).map(|p| p.normalized_variance)
    }
}

struct Fit {
    estimate: Vec<f64>,
    rss: f64,
    on_boundary: bool,
}

/// Tolerances scale with the noise level so that tiny `σ` still resolves
/// the estimator's spread.
fn fit_config(sigma: f64, n: usize) -> OptimizerConfig {
    OptimizerConfig {
        max_iter: 3000,
        f_tol: (1e-9 * n as f64 * sigma * sigma).min(1e-12),
        x_tol: (1e-3 * sigma).min(1e-7),
        restarts: 2,
        seed: 0,
        starts: 1,
        ..OptimizerConfig::default()
    }
}

fn fit_once(
    doses: &[f64],
    y: &[f64],
    spec: &SimSpec,
    bounds: &Bounds,
    truth: &[f64],
    rng: &mut ChaCha8Rng,
) -> Option<Fit> {
    let model = spec.fit_model;
    let base = spec.true_theta;
    // RSS = within-dose SS + Σ n_i (ȳ_i - η(t_i))²
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for (&t, &yi) in doses.iter().zip(y) {
        match groups.last_mut() {
            Some(g) if g.0 == t => {
                g.1 += yi;
                g.2 += 1.0;
            }
            _ => groups.push((t, yi, 1.0)),
        }
    }
    groups.iter_mut().for_each(|g| g.1 /= g.2);
    let mut within = 0.0;
    let mut g = 0;
    for (&t, &yi) in doses.iter().zip(y) {
        while groups[g].0 != t {
            g += 1;
        }
        within += (yi - groups[g].1).powi(2);
    }
    let rss = |x: &[f64]| {
        let th = base.with_values(model, x);
        within
            + groups
                .iter()
                .map(|&(t, mean, n)| n * (mean - model.mean_unchecked(&th, t)).powi(2))
                .sum::<f64>()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for k in 0..FIT_STARTS {
        let mut start: Vec<f64> = truth
            .iter()
            .map(|&v| {
                let scale = if v != 0.0 { v.abs() } else { 1.0 };
                v + START_SPREAD * scale * rng.random_range(-1.0..=1.0)
            })
            .collect();
        bounds.clip(&mut start);
        let cfg = fit_config(spec.sigma, doses.len()).with_seed(rng.random());
        let Ok(opt) = maximize(|x| -rss(x), &start, bounds, &cfg) else {
            continue;
        };
        let value = -opt.value;
        if value.is_finite()
            && best
                .as_ref()
                .is_none_or(|b| value < b.1 || (value == b.1 && k == 0))
        {
            best = Some((opt.x, value));
        }
    }
    let (estimate, rss) = best?;
    let on_boundary = estimate.iter().enumerate().any(|(i, &v)| {
        let tol = 1e-6 * (bounds.upper[i] - bounds.lower[i]).abs().min(1.0);
        v - bounds.lower[i] <= tol || bounds.upper[i] - v <= tol
    });
    Some(Fit {
        estimate,
        rss,
        on_boundary,
    })
}

fn fit_bounds(spec: &SimSpec) -> Bounds {
    let (lower, upper): (Vec<f64>, Vec<f64>) = spec
        .fit_model
        .params()
        .iter()
        .map(|&p| spec.bounds.interval(p, spec.true_theta.get(p)))
        .unzip();
    Bounds::new(lower, upper)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs `spec.reps` replicates on `design` and summarizes the estimates.
pub fn simulate_fit(design: &ExactDesign, spec: &SimSpec) -> Result<SimulationResult> {
    spec.validate()?;
    let model = spec.fit_model;
    let doses = design.doses();
    let n = doses.len();
    if n < model.dim() || design.points().len() < model.dim() {
        return Err(Error::SingularSupport);
    }
    let bounds = fit_bounds(spec);
    let mut truth = spec.true_theta.values(model);
    bounds.clip(&mut truth);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::param("sigma", e.to_string()))?;
    let means: Vec<f64> = doses
        .iter()
        .map(|&t| spec.true_model.mean_unchecked(&spec.true_theta, t))
        .collect();

    let fits: Vec<Option<Fit>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(rep as u64);
            let y: Vec<f64> = means.iter().map(|m| m + noise.sample(&mut rng)).collect();
            fit_once(&doses, &y, spec, &bounds, &truth, &mut rng)
        })
        .collect();

    let mut rss: Vec<f64> = fits.iter().flatten().map(|f| f.rss).collect();
    if rss.is_empty() {
        return Err(Error::OptimizerFailure("no replicate converged".into()));
    }
    let cutoff = RSS_OUTLIER_FACTOR * median(&mut rss);
    let used: Vec<&Fit> = fits.iter().flatten().filter(|f| f.rss <= cutoff).collect();
    let failures = spec.reps - used.len();
    if failures > 0 {
        log::info!(
            "{failures} of {} replicates excluded as non-converged",
            spec.reps
        );
    }
    if used.len() < 2 {
        return Err(Error::OptimizerFailure(
            "fewer than two replicates converged".into(),
        ));
    }
    let k = used.len() as f64;
    let scale = n as f64 / (spec.sigma * spec.sigma);
    let asymptotic = design
        .to_continuous(
            design
                .points()
                .last()
                .copied()
                .unwrap_or(0.0)
                .max(f64::MIN_POSITIVE),
        )
        .ok()
        .map(|d| InfoMatrix::new(&d, model, &spec.true_theta.with_values(model, &truth)));

    let params = model
        .params()
        .iter()
        .enumerate()
        .map(|(j, &parameter)| {
            let xs: Vec<f64> = used.iter().map(|f| f.estimate[j]).collect();
            let mean = xs.iter().sum::<f64>() / k;
            let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
            let variance = m2 * k / (k - 1.0);
            let var_se = ((m4 - m2 * m2).max(0.0) / k).sqrt();
            ParamSummary {
                parameter,
                normalized_variance: scale * variance,
                mc_stderr: scale * var_se,
                mean,
                mean_stderr: (variance / k).sqrt(),
                asymptotic: asymptotic
                    .as_ref()
                    .and_then(|m| m.coordinate_variance(j).ok()),
            }
        })
        .collect();

    Ok(SimulationResult {
        fit_model: model,
        n,
        reps: spec.reps,
        used: used.len(),
        failures,
        boundary_fraction: used.iter().filter(|f| f.on_boundary).count() as f64 / k,
        params,
    })
}

/// Variance ratio `B / A` for one parameter with a normal-approximation
/// interval on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub parameter: Param,
    pub variance_a: f64,
    pub variance_b: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub fit_model: ModelId,
    pub entries: Vec<RatioEntry>,
}

impl DominanceReport {
    pub fn get(&self, param: Param) -> Option<&RatioEntry> {
        self.entries.iter().find(|e| e.parameter == param)
    }

    /// True when every ratio exceeds 1, i.e. A has the smaller variances.
    pub fn a_dominates(&self) -> bool {
        self.entries.iter().all(|e| e.ratio > 1.0)
    }
}

/// Simulates both designs under `spec` and reports `var_B / var_A` per
/// parameter with 95% intervals.
pub fn compare_designs(
    a: &ExactDesign,
    b: &ExactDesign,
    spec: &SimSpec,
) -> Result<DominanceReport> {
    let (ra, rb) = rayon::join(|| simulate_fit(a, spec), || simulate_fit(b, spec));
    let (ra, rb) = (ra?, rb?);
    let entries = ra
        .params
        .iter()
        .zip(&rb.params)
        .map(|(pa, pb)| {
            let ratio = pb.normalized_variance / pa.normalized_variance;
            let rel = ((pa.mc_stderr / pa.normalized_variance).powi(2)
                + (pb.mc_stderr / pb.normalized_variance).powi(2))
            .sqrt();
            RatioEntry {
                parameter: pa.parameter,
                variance_a: pa.normalized_variance,
                variance_b: pb.normalized_variance,
                ratio,
                ci_low: ratio * (-1.96 * rel).exp(),
                ci_high: ratio * (1.96 * rel).exp(),
            }
        })
        .collect();
    Ok(DominanceReport {
        fit_model: spec.fit_model,
        entries,
    })
}

/// Where a simulated design comes from in a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignSource {
    Builtin(String),
    Exact {
        name: String,
        #[serde(flatten)]
        design: ExactDesign,
    },
}

impl DesignSource {
    pub fn resolve(&self) -> Result<(String, ExactDesign)> {
        match self {
            DesignSource::Builtin(name) => builtin_designs()
                .remove(name)
                .map(|d| (name.clone(), d))
                .ok_or_else(|| Error::param("designs", format!("unknown builtin design `{name}`"))),
            DesignSource::Exact { name, design } => Ok((name.clone(), design.clone())),
        }
    }
}

fn default_designs() -> Vec<DesignSource> {
    vec![
        DesignSource::Builtin("xi_mm".into()),
        DesignSource::Builtin("xi_u".into()),
    ]
}

fn default_fit_models() -> Vec<ModelId> {
    vec![ModelId::Full]
}

fn default_reps() -> usize {
    1000
}

fn default_sigma() -> f64 {
    0.05
}

/// A batch of simulations: every design crossed with every fit model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRequest {
    #[serde(default = "default_designs")]
    pub designs: Vec<DesignSource>,
    #[serde(default = "full")]
    pub true_model: ModelId,
    pub true_theta: Theta,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_fit_models")]
    pub fit_models: Vec<ModelId>,
    #[serde(default)]
    pub bounds: FitBounds,
}

/// One line of a simulation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub design: String,
    pub model: ModelId,
    pub parameter: Param,
    pub normalized_variance: f64,
    pub mc_stderr: f64,
    pub asymptotic: Option<f64>,
    pub boundary_fraction: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub reps: usize,
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: &str =
    "design,model,parameter,normalized_variance,mc_stderr,asymptotic,boundary_fraction,failures";

impl SimulationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let asymptotic = r.asymptotic.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{:.4},{}",
                r.design,
                r.model,
                r.parameter,
                r.normalized_variance,
                r.mc_stderr,
                asymptotic,
                r.boundary_fraction,
                r.failures
            );
        }
        out
    }
}

impl SimulationRequest {
    fn plan(&self, seed: u64) -> Result<Vec<(String, ExactDesign, SimSpec)>> {
        if self.fit_models.is_empty() {
            return Err(Error::param(
                "fit_models",
                "at least one fit model is required",
            ));
        }
        let designs: Vec<(String, ExactDesign)> = self
            .designs
            .iter()
            .map(DesignSource::resolve)
            .collect::<Result<_>>()?;
        if designs.is_empty() {
            return Err(Error::param("designs", "at least one design is required"));
        }
        let mut plan = Vec::new();
        for (name, design) in designs {
            for &fit_model in &self.fit_models {
                let spec = SimSpec {
                    true_model: self.true_model,
                    true_theta: self.true_theta,
                    sigma: self.sigma,
                    reps: self.reps,
                    seed,
                    fit_model,
                    bounds: self.bounds,
                };
                spec.validate()?;
                plan.push((name.clone(), design.clone(), spec));
            }
        }
        Ok(plan)
    }

    /// Checks the request without running any fits.
    pub fn validate(&self) -> Result<()> {
        self.plan(0).map(|_| ())
    }
}

/// Runs every (design, fit model) combination of `request`; `default_seed`
/// applies when the request carries none.
pub fn run_simulation(request: &SimulationRequest, default_seed: u64) -> Result<SimulationReport> {
    let seed = request.seed.unwrap_or(default_seed);
    let mut rows = Vec::new();
    for (name, design, spec) in request.plan(seed)? {
        let result = simulate_fit(&design, &spec)?;
        for p in &result.params {
            rows.push(ReportRow {
                design: name.clone(),
                model: spec.fit_model,
                parameter: p.parameter,
                normalized_variance: p.normalized_variance,
                mc_stderr: p.mc_stderr,
                asymptotic: p.asymptotic,
                boundary_fraction: result.boundary_fraction,
                failures: result.failures,
            });
        }
    }
    Ok(SimulationReport {
        seed,
        reps: request.reps,
        rows,
    })
}

//! Maximin efficient designs for the four nested-model comparisons.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    coordinate_variance, information, pair_key, ContinuousDesign, EfficiencyReport, InfoMatrix,
    MAXIMIN_PAIRS,
};
use crate::error::{Error, Result};
use crate::local::{solve_local_with, LocalDesignProblem};
use crate::model::{discrimination_target, ModelId, Theta};
use crate::optim::{grow_support, GrowthResult, OptimizerConfig};

/// Support size the search starts from.
pub const MAXIMIN_N0: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximinProblem {
    pub theta: Theta,
    #[serde(rename = "T")]
    pub space_upper: f64,
}

impl MaximinProblem {
    pub fn new(theta: Theta, space_upper: f64) -> Self {
        MaximinProblem { theta, space_upper }
    }

    /// The nominal point `θ = (1, b, 1, 0)`.
    pub fn nominal(b: f64, space_upper: f64) -> Self {
        MaximinProblem::new(Theta::nominal(b), space_upper)
    }

    pub fn pairs(&self) -> &'static [(ModelId, ModelId); 4] {
        &MAXIMIN_PAIRS
    }

    pub fn validate(&self) -> Result<()> {
        self.theta.validate(ModelId::Full)?;
        if self.theta.c >= 1.0 {
            return Err(Error::param(
                "theta.c",
                "the model 2.4 reference design requires c < 1",
            ));
        }
        if !(self.space_upper.is_finite() && self.space_upper > 0.0) {
            return Err(Error::param("T", "must be > 0"));
        }
        Ok(())
    }
}

/// Locally optimal discriminating design of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReference {
    pub parent: ModelId,
    pub child: ModelId,
    /// Zero-based index of the discriminating parameter in the parent.
    pub index: usize,
    pub design: ContinuousDesign,
    /// Optimal variance `e_kᵀ M⁻¹ e_k` under the parent.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDesigns {
    pub pairs: Vec<PairReference>,
}

impl ReferenceDesigns {
    pub fn get(&self, parent: ModelId, child: ModelId) -> Option<&PairReference> {
        self.pairs
            .iter()
            .find(|r| r.parent == parent && r.child == child)
    }
}

type CacheKey = [u64; 6];

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<ReferenceDesigns>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<ReferenceDesigns>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cache_key(problem: &MaximinProblem, config: &OptimizerConfig) -> CacheKey {
    let th = problem.theta;
    [
        th.a.to_bits(),
        th.b.to_bits(),
        th.c.to_bits(),
        th.d.to_bits(),
        problem.space_upper.to_bits(),
        config.seed ^ (config.starts as u64).rotate_left(32) ^ config.max_iter as u64,
    ]
}

/// The four locally optimal discriminating designs, computed once per
/// `(θ, T)` and optimizer settings and shared afterwards.
pub fn reference_designs(
    problem: &MaximinProblem,
    config: &OptimizerConfig,
) -> Result<Arc<ReferenceDesigns>> {
    problem.validate()?;
    let key = cache_key(problem, config);
    if let Some(hit) = cache().lock().expect("cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let computed: Result<Vec<PairReference>> = MAXIMIN_PAIRS
        .par_iter()
        .map(|&(parent, child)| {
            let (param, _) = discrimination_target(parent, child)?;
            let index = parent.index_of(param).expect("target belongs to parent");
            let local = LocalDesignProblem::new(parent, problem.theta, param, problem.space_upper);
            let design = solve_local_with(&local, config)?;
            let variance =
                InfoMatrix::new(&design, parent, &problem.theta).coordinate_variance(index)?;
            Ok(PairReference {
                parent,
                child,
                index,
                design,
                variance,
            })
        })
        .collect();
    let refs = Arc::new(ReferenceDesigns { pairs: computed? });
    let mut guard = cache().lock().expect("cache poisoned");
    Ok(Arc::clone(guard.entry(key).or_insert(refs)))
}

fn pair_efficiencies(
    points: &[f64],
    weights: &[f64],
    theta: &Theta,
    refs: &ReferenceDesigns,
) -> Vec<Option<f64>> {
    refs.pairs
        .iter()
        .map(|r| {
            let m = information(points, weights, r.parent, theta);
            coordinate_variance(&m, r.index).map(|v| r.variance / v)
        })
        .collect()
}

fn min_or_zero(effs: &[Option<f64>]) -> f64 {
    effs.iter()
        .try_fold(f64::INFINITY, |acc, e| e.map(|v| acc.min(v)))
        .unwrap_or(0.0)
}

/// `min` of the four pair efficiencies; 0 when any information matrix is
/// singular.
pub fn maximin_objective(
    design: &ContinuousDesign,
    problem: &MaximinProblem,
    refs: &ReferenceDesigns,
) -> f64 {
    min_or_zero(&pair_efficiencies(
        design.points(),
        design.weights(),
        &problem.theta,
        refs,
    ))
}

/// All four pair efficiencies of `design`; singular pairs are reported as 0.
pub fn maximin_report(
    design: &ContinuousDesign,
    problem: &MaximinProblem,
    refs: &ReferenceDesigns,
) -> EfficiencyReport {
    let effs = pair_efficiencies(design.points(), design.weights(), &problem.theta, refs);
    let mut report = EfficiencyReport::default();
    for (r, e) in refs.pairs.iter().zip(effs) {
        report
            .pair_effs
            .insert(pair_key(r.parent, r.child), e.unwrap_or(0.0));
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximinSolution {
    pub design: ContinuousDesign,
    pub efficiencies: EfficiencyReport,
    /// Minimum of the reported pair efficiencies.
    pub criterion: f64,
    pub growth: GrowthResult,
}

pub fn solve_maximin(
    problem: &MaximinProblem,
    config: &OptimizerConfig,
) -> Result<MaximinSolution> {
    config.validate()?;
    let refs = reference_designs(problem, config)?;
    let theta = problem.theta;
    let objective = |p: &[f64], w: &[f64]| min_or_zero(&pair_efficiencies(p, w, &theta, &refs));
    let initial: Vec<ContinuousDesign> = refs
        .pairs
        .iter()
        .filter(|r| r.design.len() == MAXIMIN_N0)
        .map(|r| r.design.clone())
        .collect();
    let growth = grow_support(objective, MAXIMIN_N0, problem.space_upper, &initial, config)?;
    let design = growth.best_design.clone();
    let efficiencies = maximin_report(&design, problem, &refs);
    let criterion = efficiencies.min_pair().unwrap_or(0.0);
    if !(criterion > 0.0) {
        return Err(Error::OptimizerFailure(
            "no design with a nonsingular information matrix found".into(),
        ));
    }
    Ok(MaximinSolution {
        design,
        efficiencies,
        criterion,
        growth,
    })
}

//! Continuous designs, information matrices, optimality criteria and
//! efficiencies.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{discrimination_target, ModelId, Param, Theta};

/// Relative eigenvalue threshold below which an information matrix is
/// treated as singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// Tolerance on the weight sum accepted by [`ContinuousDesign::new`] before
/// renormalization.
const WEIGHT_SUM_SLACK: f64 = 1e-9;

/// A probability measure with finite support on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign", into = "RawDesign")]
pub struct ContinuousDesign {
    points: Vec<f64>,
    weights: Vec<f64>,
    space_upper: f64,
}

#[derive(Serialize, Deserialize)]
struct RawDesign {
    #[serde(serialize_with = "crate::io::ser_f64_seq")]
    points: Vec<f64>,
    #[serde(serialize_with = "crate::io::ser_f64_seq")]
    weights: Vec<f64>,
    #[serde(rename = "T", serialize_with = "crate::io::ser_f64")]
    space_upper: f64,
}

impl TryFrom<RawDesign> for ContinuousDesign {
    type Error = Error;

    // Stored weights are kept as written so that documents re-serialize to
    // the same text.
    fn try_from(raw: RawDesign) -> Result<Self> {
        ContinuousDesign::check_sum(&raw.weights)?;
        ContinuousDesign::build(raw.points, raw.weights, raw.space_upper, false)
    }
}

impl From<ContinuousDesign> for RawDesign {
    fn from(d: ContinuousDesign) -> Self {
        RawDesign {
            points: d.points,
            weights: d.weights,
            space_upper: d.space_upper,
        }
    }
}

impl ContinuousDesign {
    /// Builds a design from support points and weights.
    ///
    /// Points may be given in any order; they are sorted together with their
    /// weights. Weights must be positive and sum to one within `1e-9`; they
    /// are then renormalized exactly.
    pub fn new(points: Vec<f64>, weights: Vec<f64>, space_upper: f64) -> Result<Self> {
        Self::check_sum(&weights)?;
        Self::from_unnormalized(points, weights, space_upper)
    }

    fn check_sum(weights: &[f64]) -> Result<()> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_SLACK {
            return Err(Error::InvalidDesign(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Like [`ContinuousDesign::new`] but accepts any positive weights and
    /// normalizes them.
    pub fn from_unnormalized(
        points: Vec<f64>,
        weights: Vec<f64>,
        space_upper: f64,
    ) -> Result<Self> {
        Self::build(points, weights, space_upper, true)
    }

    fn build(
        points: Vec<f64>,
        weights: Vec<f64>,
        space_upper: f64,
        normalize: bool,
    ) -> Result<Self> {
        if !(space_upper.is_finite() && space_upper > 0.0) {
            return Err(Error::param("T", "design space upper bound must be > 0"));
        }
        if points.is_empty() {
            return Err(Error::InvalidDesign("no support points".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidDesign(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidDesign(format!("weight {w} is not positive")));
        }
        if let Some(t) = points
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0 && **t <= space_upper))
        {
            return Err(Error::InvalidDesign(format!(
                "point {t} lies outside [0, {space_upper}]"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = points.into_iter().zip(weights).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        if pairs.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err(Error::InvalidDesign(
                "support points must be distinct".into(),
            ));
        }
        let total: f64 = if normalize {
            pairs.iter().map(|p| p.1).sum()
        } else {
            1.0
        };
        Ok(ContinuousDesign {
            points: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
            space_upper,
        })
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<f64>, space_upper: f64) -> Result<Self> {
        let n = points.len();
        Self::from_unnormalized(points, vec![1.0; n], space_upper)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn space_upper(&self) -> f64 {
        self.space_upper
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// Largest absolute difference in points and weights against `other`,
    /// or infinity when the support sizes differ.
    pub fn distance(&self, other: &ContinuousDesign) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.iter()
            .zip(other.iter())
            .map(|((t1, w1), (t2, w2))| (t1 - t2).abs().max((w1 - w2).abs()))
            .fold(0.0, f64::max)
    }
}

/// Information matrix `M(ξ, θ) = Σ ω_i f(t_i) f(t_i)^T` of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub entries: DMatrix<f64>,
    pub model: ModelId,
    pub theta: Theta,
}

impl InfoMatrix {
    pub fn new(design: &ContinuousDesign, model: ModelId, theta: &Theta) -> Self {
        InfoMatrix {
            entries: information(design.points(), design.weights(), model, theta),
            model,
            theta: *theta,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Numerical rank under the relative eigenvalue threshold.
    pub fn rank(&self) -> usize {
        let ev = self.eigenvalues();
        let top = ev.last().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        ev.iter().filter(|&&l| l >= SINGULAR_RATIO * top).count()
    }

    pub fn is_singular(&self) -> bool {
        self.rank() < self.dim()
    }

    pub fn det(&self) -> f64 {
        self.entries.determinant()
    }

    /// `log det M`, or `-inf` when singular.
    pub fn log_det(&self) -> f64 {
        log_det(&self.entries)
    }

    fn singular_error(&self) -> Error {
        Error::SingularInformation {
            rank: self.rank(),
            dim: self.dim(),
        }
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        if self.is_singular() {
            return Err(self.singular_error());
        }
        self.entries
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| self.singular_error())
    }

    /// `e_j^T M^{-1} e_j`.
    pub fn coordinate_variance(&self, j: usize) -> Result<f64> {
        if self.is_singular() {
            return Err(self.singular_error());
        }
        coordinate_variance(&self.entries, j).ok_or_else(|| self.singular_error())
    }

    /// `e_j^T M^- e_j` through the pseudo-inverse, for possibly singular
    /// matrices in whose range `e_j` lies.
    pub fn estimable_variance(&self, j: usize) -> Result<f64> {
        let eig = self.entries.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if top <= 0.0 {
            return Err(self.singular_error());
        }
        let mut value = 0.0;
        let mut null_mass = 0.0;
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let q = eig.eigenvectors[(j, k)];
            if lambda >= SINGULAR_RATIO * top {
                value += q * q / lambda;
            } else {
                null_mass += q * q;
            }
        }
        if null_mass > 1e-10 {
            return Err(self.singular_error());
        }
        Ok(value)
    }
}

/// Raw information matrix for unsorted support slices.
pub fn information(points: &[f64], weights: &[f64], model: ModelId, theta: &Theta) -> DMatrix<f64> {
    let m = model.dim();
    let mut out = DMatrix::zeros(m, m);
    let mut f = [0.0; 4];
    for (&t, &w) in points.iter().zip(weights) {
        model.gradient_into(theta, t, &mut f[..m]);
        for r in 0..m {
            let wr = w * f[r];
            for c in r..m {
                out[(r, c)] += wr * f[c];
            }
        }
    }
    for r in 0..m {
        for c in 0..r {
            out[(r, c)] = out[(c, r)];
        }
    }
    out
}

fn is_singular_raw(m: &DMatrix<f64>) -> bool {
    let ev = m.clone().symmetric_eigenvalues();
    let top = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let low = ev.iter().copied().fold(f64::INFINITY, f64::min);
    !(top > 0.0) || low < SINGULAR_RATIO * top
}

/// `e_j^T M^{-1} e_j` or `None` if `M` is singular.
pub(crate) fn coordinate_variance(m: &DMatrix<f64>, j: usize) -> Option<f64> {
    if is_singular_raw(m) {
        return None;
    }
    let chol = m.clone().cholesky()?;
    let mut e = DVector::zeros(m.nrows());
    e[j] = 1.0;
    let x = chol.solve(&e);
    let v = x[j];
    (v.is_finite() && v > 0.0).then_some(v)
}

/// `log det M` or `-inf` for singular `M`.
pub(crate) fn log_det(m: &DMatrix<f64>) -> f64 {
    if is_singular_raw(m) {
        return f64::NEG_INFINITY;
    }
    match m.clone().cholesky() {
        Some(chol) => 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

fn target_index(model: ModelId, target: Param) -> Result<usize> {
    model.index_of(target).ok_or_else(|| {
        Error::param(
            "target",
            format!("model {model} has no parameter `{target}`"),
        )
    })
}

/// Asymptotic variance `e_j^T M^{-1}(ξ, θ) e_j` of the estimator of
/// `target`.
pub fn em_variance(
    design: &ContinuousDesign,
    model: ModelId,
    theta: &Theta,
    target: Param,
) -> Result<f64> {
    theta.validate(model)?;
    let j = target_index(model, target)?;
    InfoMatrix::new(design, model, theta).coordinate_variance(j)
}

/// Efficiency of `design` for discriminating `parent` from `child`,
/// relative to `reference`.
pub fn pair_efficiency(
    design: &ContinuousDesign,
    parent: ModelId,
    child: ModelId,
    theta: &Theta,
    reference: &ContinuousDesign,
) -> Result<f64> {
    let (param, _) = discrimination_target(parent, child)?;
    let best = em_variance(reference, parent, theta, param)?;
    let own = em_variance(design, parent, theta, param)?;
    Ok(best / own)
}

/// `log det M(ξ, θ)`; `-inf` when the matrix is singular.
pub fn d_criterion(design: &ContinuousDesign, model: ModelId, theta: &Theta) -> f64 {
    InfoMatrix::new(design, model, theta).log_det()
}

/// `(det M(ξ) / det M(ξ_ref))^{1/m}`.
pub fn d_efficiency(
    design: &ContinuousDesign,
    model: ModelId,
    theta: &Theta,
    reference: &ContinuousDesign,
) -> Result<f64> {
    theta.validate(model)?;
    let own = InfoMatrix::new(design, model, theta);
    let best = InfoMatrix::new(reference, model, theta);
    if own.is_singular() {
        return Err(own.singular_error());
    }
    if best.is_singular() {
        return Err(best.singular_error());
    }
    let m = model.dim() as f64;
    Ok(((own.log_det() - best.log_det()) / m).exp())
}

/// Efficiency for estimating a single parameter, relative to the
/// `e_j`-optimal `reference`. The reference may be singular provided the
/// parameter is estimable under it.
pub fn param_efficiency(
    design: &ContinuousDesign,
    model: ModelId,
    theta: &Theta,
    param: Param,
    reference: &ContinuousDesign,
) -> Result<f64> {
    theta.validate(model)?;
    let j = target_index(model, param)?;
    let best = InfoMatrix::new(reference, model, theta).estimable_variance(j)?;
    let own = InfoMatrix::new(design, model, theta).coordinate_variance(j)?;
    Ok(best / own)
}

/// The four model pairs of the maximin criterion, parent first.
pub const MAXIMIN_PAIRS: [(ModelId, ModelId); 4] = [
    (ModelId::ExpPow, ModelId::Exp),
    (ModelId::ExpSat, ModelId::Exp),
    (ModelId::Full, ModelId::ExpPow),
    (ModelId::Full, ModelId::ExpSat),
];

/// Models whose D- and per-parameter efficiencies are reported.
pub const ESTIMATION_MODELS: [ModelId; 4] = [
    ModelId::Exp,
    ModelId::ExpPow,
    ModelId::ExpSat,
    ModelId::Full,
];

pub fn pair_key(parent: ModelId, child: ModelId) -> String {
    format!("{parent}-{child}")
}

pub fn param_key(model: ModelId, param: Param) -> String {
    format!("{model}:{param}")
}

/// Efficiencies of one design. Keys: `"2.3-2.2"` for pairs, `"2.5"` for
/// D-efficiencies, `"2.5:c"` for parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    #[serde(
        default,
        skip_serializing_if = "BTreeMap::is_empty",
        serialize_with = "crate::io::ser_f64_map"
    )]
    pub pair_effs: BTreeMap<String, f64>,
    #[serde(
        default,
        skip_serializing_if = "BTreeMap::is_empty",
        serialize_with = "crate::io::ser_f64_map"
    )]
    pub d_effs: BTreeMap<String, f64>,
    #[serde(
        default,
        skip_serializing_if = "BTreeMap::is_empty",
        serialize_with = "crate::io::ser_f64_map"
    )]
    pub param_effs: BTreeMap<String, f64>,
}

impl EfficiencyReport {
    pub fn pair(&self, parent: ModelId, child: ModelId) -> Option<f64> {
        self.pair_effs.get(&pair_key(parent, child)).copied()
    }

    pub fn d(&self, model: ModelId) -> Option<f64> {
        self.d_effs.get(model.label()).copied()
    }

    pub fn param(&self, model: ModelId, param: Param) -> Option<f64> {
        self.param_effs.get(&param_key(model, param)).copied()
    }

    /// Smallest pair efficiency (the maximin criterion when all four pairs
    /// are present).
    pub fn min_pair(&self) -> Option<f64> {
        self.pair_effs.values().copied().reduce(f64::min)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pair_effs
            .values()
            .chain(self.d_effs.values())
            .chain(self.param_effs.values())
            .copied()
    }
}

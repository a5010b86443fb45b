//! Design documents, number formatting and exact-design rounding.

use serde::{Deserialize, Serialize, Serializer};

use crate::design::{ContinuousDesign, EfficiencyReport};
use crate::error::{Error, Result};
use crate::local::{AlternationReport, BoundReport};
use crate::model::{ModelId, Theta};
use crate::optim::OptimizerConfig;

pub const SCHEMA_VERSION: &str = "1";

/// Significant digits kept when numbers are written to documents.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_significant(*x))
}

pub fn ser_f64_seq<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| round_significant(*x)))
}

pub fn ser_f64_map<S: Serializer>(
    map: &std::collections::BTreeMap<String, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(map.iter().map(|(k, v)| (k, round_significant(*v))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub criterion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<OptimizerConfig>,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(criterion: impl Into<String>, config: Option<OptimizerConfig>) -> Self {
        Provenance {
            criterion: criterion.into(),
            config,
            tool_version: format!("doseopt {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternation: Option<AlternationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bound: Option<BoundReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_bound: Option<BoundReport>,
}

/// The canonical JSON document exchanged by the CLI and the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDocument {
    pub schema_version: String,
    pub model: ModelId,
    pub theta: Theta,
    #[serde(rename = "T", serialize_with = "ser_f64")]
    pub space_upper: f64,
    pub design: ContinuousDesign,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Certificates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiencies: Option<EfficiencyReport>,
}

impl DesignDocument {
    pub fn new(
        model: ModelId,
        theta: Theta,
        design: ContinuousDesign,
        provenance: Provenance,
    ) -> Self {
        DesignDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            model,
            theta,
            space_upper: design.space_upper(),
            design,
            provenance,
            certificates: None,
            efficiencies: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::param(
                "schema_version",
                format!("unsupported schema version `{}`", self.schema_version),
            ));
        }
        self.theta.validate(self.model)?;
        let t = self.design.space_upper();
        if (self.space_upper - t).abs() > 1e-9 * t.max(self.space_upper) {
            return Err(Error::param("T", "document T differs from the design's T"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DesignDocument = serde_json::from_str(text)
            .map_err(|e| Error::InvalidDesign(format!("malformed document: {e}")))?;
        doc.validate()?;
        Ok(doc)
    }
}

/// A design with integer replicate counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExact", into = "RawExact")]
pub struct ExactDesign {
    points: Vec<f64>,
    counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawExact {
    #[serde(serialize_with = "ser_f64_seq")]
    doses: Vec<f64>,
    counts: Vec<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    total: Option<usize>,
}

impl TryFrom<RawExact> for ExactDesign {
    type Error = Error;

    fn try_from(raw: RawExact) -> Result<Self> {
        let design = ExactDesign::new(raw.doses, raw.counts)?;
        match raw.total {
            Some(n) if n != design.total() => Err(Error::param(
                "N",
                format!("counts sum to {} but N = {n}", design.total()),
            )),
            _ => Ok(design),
        }
    }
}

impl From<ExactDesign> for RawExact {
    fn from(d: ExactDesign) -> Self {
        let total = Some(d.total());
        RawExact {
            doses: d.points,
            counts: d.counts,
            total,
        }
    }
}

impl ExactDesign {
    pub fn new(points: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if points.len() != counts.len() {
            return Err(Error::InvalidDesign(
                "points and counts differ in length".into(),
            ));
        }
        if points.is_empty() || counts.iter().all(|&c| c == 0) {
            return Err(Error::InvalidDesign(
                "an exact design needs at least one observation".into(),
            ));
        }
        if let Some(t) = points.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Domain(*t));
        }
        let mut pairs: Vec<(f64, usize)> = points
            .into_iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (points, counts): (Vec<f64>, Vec<usize>) = pairs.into_iter().unzip();
        Ok(ExactDesign { points, counts })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Every observation's dose, in support order.
    pub fn doses(&self) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.counts)
            .flat_map(|(&p, &c)| std::iter::repeat_n(p, c))
            .collect()
    }

    pub fn to_continuous(&self, space_upper: f64) -> Result<ContinuousDesign> {
        let n = self.total() as f64;
        ContinuousDesign::new(
            self.points.clone(),
            self.counts.iter().map(|&c| c as f64 / n).collect(),
            space_upper,
        )
    }
}

/// Largest-remainder rounding of `N ω_i`: floors first, then the remaining
/// units go to the largest fractional parts (earlier points win ties).
/// Points that receive no observations are dropped.
pub fn round_design(design: &ContinuousDesign, n: usize) -> Result<ExactDesign> {
    if n == 0 {
        return Err(Error::param("N", "must be >= 1"));
    }
    let quotas: Vec<f64> = design.weights().iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    ExactDesign::new(design.points().to_vec(), counts)
}

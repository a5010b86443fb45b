//! Request types and document-producing entry points shared by the CLI and
//! the HTTP service.

use serde::{Deserialize, Serialize};

use crate::design::{
    d_efficiency, pair_efficiency, pair_key, param_efficiency, param_key, ContinuousDesign,
    EfficiencyReport, InfoMatrix, ESTIMATION_MODELS, MAXIMIN_PAIRS,
};
use crate::doptimal::{solve_d_optimal, verify_d_optimality};
use crate::error::{Error, Result};
use crate::io::{Certificates, DesignDocument, Provenance};
use crate::local::{
    alternation_certificate, rescale_design, solve_c_optimal, solve_local_with,
    verify_c_optimality, LocalDesignProblem, Scaling,
};
use crate::maximin::{reference_designs, solve_maximin, MaximinProblem};
use crate::model::{ModelId, Param, Theta};
use crate::optim::OptimizerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRequest {
    pub model: ModelId,
    pub theta: Theta,
    pub target: Param,
    #[serde(rename = "T")]
    pub space_upper: f64,
    #[serde(default)]
    pub config: Option<OptimizerConfig>,
}

/// Locally optimal discriminating design with its alternation and
/// c-optimality certificates. Fails rather than return a design whose
/// certificate does not pass.
pub fn local_document(req: &LocalRequest) -> Result<DesignDocument> {
    let config = req.config.unwrap_or_default();
    let problem = LocalDesignProblem::new(req.model, req.theta, req.target, req.space_upper);
    let k = problem.validate()?;
    let design = solve_local_with(&problem, &config)?;
    let alternation =
        alternation_certificate(design.points(), req.model, &req.theta, req.space_upper)?;
    let c_bound = verify_c_optimality(&design, req.model, &req.theta, k)?;
    if !alternation.passed || !c_bound.passed {
        return Err(Error::OptimizerFailure(format!(
            "certificate failed: sup |p| = {:.3e}, c-bound max = {:.3e} > {:.3e}",
            alternation.sup, c_bound.max_value, c_bound.threshold
        )));
    }
    let mut doc = DesignDocument::new(
        req.model,
        req.theta,
        design,
        Provenance::new(format!("e_{}", k + 1), Some(config)),
    );
    doc.certificates = Some(Certificates {
        alternation: Some(alternation),
        c_bound: Some(c_bound),
        d_bound: None,
    });
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximinRequest {
    pub theta: Theta,
    #[serde(rename = "T")]
    pub space_upper: f64,
    #[serde(default)]
    pub config: Option<OptimizerConfig>,
}

pub fn maximin_document(req: &MaximinRequest) -> Result<DesignDocument> {
    let config = req.config.unwrap_or_default();
    let solution = solve_maximin(&MaximinProblem::new(req.theta, req.space_upper), &config)?;
    let mut doc = DesignDocument::new(
        ModelId::Full,
        req.theta,
        solution.design,
        Provenance::new("maximin", Some(config)),
    );
    doc.efficiencies = Some(solution.efficiencies);
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DOptimalRequest {
    pub model: ModelId,
    pub theta: Theta,
    #[serde(rename = "T")]
    pub space_upper: f64,
    #[serde(default)]
    pub config: Option<OptimizerConfig>,
}

pub fn doptimal_document(req: &DOptimalRequest) -> Result<DesignDocument> {
    let config = req.config.unwrap_or_default();
    let design = solve_d_optimal(req.model, &req.theta, req.space_upper, &config)?;
    let d_bound = verify_d_optimality(&design, req.model, &req.theta)?;
    let mut doc = DesignDocument::new(
        req.model,
        req.theta,
        design,
        Provenance::new("D", Some(config)),
    );
    doc.certificates = Some(Certificates {
        d_bound: Some(d_bound),
        ..Default::default()
    });
    Ok(doc)
}

/// Families of efficiencies an evaluation may ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EfficiencyKind {
    Pairs,
    D,
    Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub design: ContinuousDesign,
    pub theta: Theta,
    pub requests: Vec<EfficiencyKind>,
    /// Models for the D- and per-parameter efficiencies.
    #[serde(default = "default_models")]
    pub models: Vec<ModelId>,
    /// Common reference for every efficiency. When absent each efficiency is
    /// taken relative to the corresponding optimal design.
    #[serde(default)]
    pub reference: Option<ContinuousDesign>,
    #[serde(default)]
    pub config: Option<OptimizerConfig>,
}

fn default_models() -> Vec<ModelId> {
    ESTIMATION_MODELS.to_vec()
}

fn singular(design: &ContinuousDesign, model: ModelId, theta: &Theta) -> bool {
    InfoMatrix::new(design, model, theta).is_singular()
}

/// Requested efficiencies of `req.design`. Entries for models under which
/// the design's information matrix is singular are reported as 0.
pub fn evaluate(req: &EvaluateRequest) -> Result<EfficiencyReport> {
    let config = req.config.unwrap_or_default();
    let design = &req.design;
    let t = design.space_upper();
    let theta = &req.theta;
    if let Some(r) = &req.reference {
        if (r.space_upper() - t).abs() > 1e-9 * t {
            return Err(Error::param(
                "reference.T",
                "reference lives on a different design space",
            ));
        }
    }
    for &model in &req.models {
        theta.validate(model)?;
    }
    let mut report = EfficiencyReport::default();
    if req.requests.contains(&EfficiencyKind::Pairs) {
        match &req.reference {
            Some(r) => {
                for (parent, child) in MAXIMIN_PAIRS {
                    let e = if singular(design, parent, theta) {
                        0.0
                    } else {
                        pair_efficiency(design, parent, child, theta, r)?
                    };
                    report.pair_effs.insert(pair_key(parent, child), e);
                }
            }
            None => {
                let problem = MaximinProblem::new(*theta, t);
                let refs = reference_designs(&problem, &config)?;
                for r in &refs.pairs {
                    let e = if singular(design, r.parent, theta) {
                        0.0
                    } else {
                        pair_efficiency(design, r.parent, r.child, theta, &r.design)?
                    };
                    report.pair_effs.insert(pair_key(r.parent, r.child), e);
                }
            }
        }
    }
    if req.requests.contains(&EfficiencyKind::D) {
        for &model in &req.models {
            let e = match &req.reference {
                _ if singular(design, model, theta) => 0.0,
                Some(r) => d_efficiency(design, model, theta, r)?,
                None => d_efficiency(
                    design,
                    model,
                    theta,
                    &solve_d_optimal(model, theta, t, &config)?,
                )?,
            };
            report.d_effs.insert(model.label().to_string(), e);
        }
    }
    if req.requests.contains(&EfficiencyKind::Params) {
        for &model in &req.models {
            for &p in model.params() {
                let e = match &req.reference {
                    _ if singular(design, model, theta) => 0.0,
                    Some(r) => param_efficiency(design, model, theta, p, r)?,
                    None => {
                        let best = solve_c_optimal(model, theta, p, t, &config)?;
                        param_efficiency(design, model, theta, p, &best.design)?
                    }
                };
                report.param_effs.insert(param_key(model, p), e);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRequest {
    pub design: DesignDocument,
    /// Source configuration; defaults to the document's `(b, d, T)`.
    #[serde(default)]
    pub from: Option<Scaling>,
    pub to: Scaling,
}

/// Moves a document to another `(b, d, T)` configuration. Certificates and
/// efficiencies are dropped since they refer to the source configuration.
pub fn transform_document(req: &TransformRequest) -> Result<DesignDocument> {
    let doc = &req.design;
    doc.validate()?;
    let from = req
        .from
        .unwrap_or_else(|| Scaling::new(doc.theta.b, doc.theta.d, doc.space_upper));
    let design = rescale_design(&doc.design, from, req.to)?;
    let theta = Theta {
        b: req.to.b,
        d: req.to.d,
        ..doc.theta
    };
    let provenance = Provenance::new(
        format!("{} (rescaled)", doc.provenance.criterion),
        doc.provenance.config,
    );
    Ok(DesignDocument::new(doc.model, theta, design, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_reference_gives_unit_efficiencies() {
        let design =
            ContinuousDesign::new(vec![0.0, 0.2, 0.5, 1.0], vec![0.2, 0.3, 0.2, 0.3], 1.0).unwrap();
        let req = EvaluateRequest {
            reference: Some(design.clone()),
            design,
            theta: Theta::nominal(1.0),
            requests: vec![
                EfficiencyKind::Pairs,
                EfficiencyKind::D,
                EfficiencyKind::Params,
            ],
            models: default_models(),
            config: None,
        };
        let report = evaluate(&req).unwrap();
        assert_eq!(report.pair_effs.len(), 4);
        assert_eq!(report.param_effs.len(), 12);
        for v in report.values() {
            assert!((v - 1.0).abs() < 1e-12, "{report:?}");
        }
    }

    #[test]
    fn singular_designs_score_zero() {
        let design = ContinuousDesign::uniform(vec![0.0, 0.5, 1.0], 1.0).unwrap();
        let req = EvaluateRequest {
            reference: None,
            design,
            theta: Theta::nominal(1.0),
            requests: vec![EfficiencyKind::Pairs, EfficiencyKind::D],
            models: vec![ModelId::Exp, ModelId::Full],
            config: None,
        };
        let report = evaluate(&req).unwrap();
        assert_eq!(report.d(ModelId::Full), Some(0.0));
        assert!(report.d(ModelId::Exp).unwrap() > 0.0);
        assert_eq!(report.pair(ModelId::Full, ModelId::ExpPow), Some(0.0));
        assert!(report.pair(ModelId::ExpSat, ModelId::Exp).unwrap() > 0.0);
    }

    #[test]
    fn local_document_carries_certificates() {
        let req = LocalRequest {
            model: ModelId::ExpSat,
            theta: Theta::nominal(1.0),
            target: Param::C,
            space_upper: 1.0,
            config: None,
        };
        let doc = local_document(&req).unwrap();
        let certs = doc.certificates.unwrap();
        assert!(certs.alternation.unwrap().passed);
        assert!(certs.c_bound.unwrap().passed);
    }
}

//! The five nested exponential dose-response models.
//!
//! | id    | mean response                     | parameters (canonical order) |
//! |-------|-----------------------------------|------------------------------|
//! | `2.1` | `a`                               | `(a)`                        |
//! | `2.2` | `a exp(-b t)`                     | `(a, b)`                     |
//! | `2.3` | `a exp(-b t^d)`                   | `(a, b, d)`                  |
//! | `2.4` | `a (c - (c - 1) exp(-b t))`       | `(a, b, c)`                  |
//! | `2.5` | `a (c - (c - 1) exp(-b t^d))`     | `(a, b, d, c)`               |
//!
//! The canonical order is the component order of the gradient vector, so for
//! the full model `e_3` targets `d` and `e_4` targets `c`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Identifier of one of the nested models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelId {
    /// `a`
    Constant,
    /// `a exp(-b t)`
    Exp,
    /// `a exp(-b t^d)`
    ExpPow,
    /// `a (c - (c - 1) exp(-b t))`
    ExpSat,
    /// `a (c - (c - 1) exp(-b t^d))`
    Full,
}

/// A named model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    A,
    B,
    C,
    D,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::A => "a",
            Param::B => "b",
            Param::C => "c",
            Param::D => "d",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Param::A),
            "b" => Ok(Param::B),
            "c" => Ok(Param::C),
            "d" => Ok(Param::D),
            other => Err(Error::param(
                "target",
                format!("unknown parameter `{other}`"),
            )),
        }
    }
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [
        ModelId::Constant,
        ModelId::Exp,
        ModelId::ExpPow,
        ModelId::ExpSat,
        ModelId::Full,
    ];

    /// Short label used in files, flags and tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelId::Constant => "2.1",
            ModelId::Exp => "2.2",
            ModelId::ExpPow => "2.3",
            ModelId::ExpSat => "2.4",
            ModelId::Full => "2.5",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Constant => "CONSTANT",
            ModelId::Exp => "EXP",
            ModelId::ExpPow => "EXP_POW",
            ModelId::ExpSat => "EXP_SAT",
            ModelId::Full => "FULL",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            ModelId::Constant => "a",
            ModelId::Exp => "a*exp(-b*t)",
            ModelId::ExpPow => "a*exp(-b*t^d)",
            ModelId::ExpSat => "a*(c-(c-1)*exp(-b*t))",
            ModelId::Full => "a*(c-(c-1)*exp(-b*t^d))",
        }
    }

    /// Parameters in gradient-component order.
    pub fn params(self) -> &'static [Param] {
        match self {
            ModelId::Constant => &[Param::A],
            ModelId::Exp => &[Param::A, Param::B],
            ModelId::ExpPow => &[Param::A, Param::B, Param::D],
            ModelId::ExpSat => &[Param::A, Param::B, Param::C],
            ModelId::Full => &[Param::A, Param::B, Param::D, Param::C],
        }
    }

    /// Number of parameters `m`.
    pub fn dim(self) -> usize {
        self.params().len()
    }

    /// Canonical (zero-based) index of `param`, if the model has it.
    pub fn index_of(self, param: Param) -> Option<usize> {
        self.params().iter().position(|&p| p == param)
    }

    pub fn has(self, param: Param) -> bool {
        self.index_of(param).is_some()
    }

    /// Mean response. Validates `theta` and `t`.
    pub fn mean(self, theta: &Theta, t: f64) -> Result<f64> {
        theta.validate(self)?;
        check_dose(t)?;
        Ok(self.mean_unchecked(theta, t))
    }

    /// Gradient of the mean response with respect to the parameters, in
    /// canonical order.
    pub fn gradient(self, theta: &Theta, t: f64) -> Result<Vec<f64>> {
        theta.validate(self)?;
        check_dose(t)?;
        let mut out = vec![0.0; self.dim()];
        self.gradient_into(theta, t, &mut out);
        Ok(out)
    }

    /// Mean response without validation. Used in inner loops and by the
    /// least-squares fitter, which may step outside the natural domain.
    pub fn mean_unchecked(self, theta: &Theta, t: f64) -> f64 {
        let Theta { a, b, c, d } = *theta;
        match self {
            ModelId::Constant => a,
            ModelId::Exp => a * (-b * t).exp(),
            ModelId::ExpPow => a * (-b * t.powf(d)).exp(),
            ModelId::ExpSat => a * (c - (c - 1.0) * (-b * t).exp()),
            ModelId::Full => a * (c - (c - 1.0) * (-b * t.powf(d)).exp()),
        }
    }

    /// Writes the gradient into `out` (length `dim()`), without validation.
    pub fn gradient_into(self, theta: &Theta, t: f64, out: &mut [f64]) {
        let Theta { a, b, c, d } = *theta;
        match self {
            ModelId::Constant => out[0] = 1.0,
            ModelId::Exp => {
                let e = (-b * t).exp();
                out[0] = e;
                out[1] = -a * t * e;
            }
            ModelId::ExpPow => {
                let s = t.powf(d);
                let e = (-b * s).exp();
                out[0] = e;
                out[1] = -a * s * e;
                out[2] = -a * b * pow_log(t, d) * e;
            }
            ModelId::ExpSat => {
                let e = (-b * t).exp();
                out[0] = c - (c - 1.0) * e;
                out[1] = a * (c - 1.0) * t * e;
                out[2] = a * (1.0 - e);
            }
            ModelId::Full => {
                let s = t.powf(d);
                let e = (-b * s).exp();
                out[0] = c - (c - 1.0) * e;
                out[1] = a * (c - 1.0) * s * e;
                out[2] = a * (c - 1.0) * b * pow_log(t, d) * e;
                out[3] = a * (1.0 - e);
            }
        }
    }

    /// Direct nesting edges: `parent` reduces to `self` by a single
    /// parameter restriction, or by the `b = 0` collapse onto the constant
    /// model.
    pub fn nested_in(self, parent: ModelId) -> bool {
        nests(self, parent)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().trim_start_matches('(').trim_end_matches(')');
        let key = key.to_ascii_uppercase().replace('-', "_");
        let id = match key.as_str() {
            "2.1" | "CONSTANT" => ModelId::Constant,
            "2.2" | "EXP" => ModelId::Exp,
            "2.3" | "EXP_POW" => ModelId::ExpPow,
            "2.4" | "EXP_SAT" => ModelId::ExpSat,
            "2.5" | "FULL" => ModelId::Full,
            _ => return Err(Error::param("model", format!("unknown model `{s}`"))),
        };
        Ok(id)
    }
}

impl Serialize for ModelId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `t^d ln t`, continuously extended by 0 at `t = 0`.
#[inline]
fn pow_log(t: f64, d: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t.powf(d) * t.ln()
    }
}

fn check_dose(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(t))
    }
}

fn default_a() -> f64 {
    1.0
}

fn default_c() -> f64 {
    0.0
}

fn default_d() -> f64 {
    1.0
}

/// Nominal parameter values. Models ignore the fields they do not use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    #[serde(default = "default_a", serialize_with = "crate::io::ser_f64")]
    pub a: f64,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub b: f64,
    #[serde(default = "default_c", serialize_with = "crate::io::ser_f64")]
    pub c: f64,
    #[serde(default = "default_d", serialize_with = "crate::io::ser_f64")]
    pub d: f64,
}

impl Default for Theta {
    fn default() -> Self {
        Theta {
            a: 1.0,
            b: 1.0,
            c: 0.0,
            d: 1.0,
        }
    }
}

impl Theta {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Theta { a, b, c, d }
    }

    /// `(a, b, d=1, c=0)`: the nominal point at which the sub-models meet.
    pub fn nominal(b: f64) -> Self {
        Theta {
            b,
            ..Theta::default()
        }
    }

    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::A => self.a,
            Param::B => self.b,
            Param::C => self.c,
            Param::D => self.d,
        }
    }

    pub fn set(&mut self, param: Param, value: f64) {
        match param {
            Param::A => self.a = value,
            Param::B => self.b = value,
            Param::C => self.c = value,
            Param::D => self.d = value,
        }
    }

    pub fn with(mut self, param: Param, value: f64) -> Self {
        self.set(param, value);
        self
    }

    /// Values of the model's parameters in canonical order.
    pub fn values(&self, model: ModelId) -> Vec<f64> {
        model.params().iter().map(|&p| self.get(p)).collect()
    }

    /// Overwrites the model's parameters from a canonical-order slice.
    pub fn with_values(mut self, model: ModelId, values: &[f64]) -> Self {
        for (&p, &v) in model.params().iter().zip(values) {
            self.set(p, v);
        }
        self
    }

    /// Checks the natural constraints of `model`: `a > 0`, `b > 0`,
    /// `c ∈ [0, 1]`, `d ≥ 1` for the parameters the model uses.
    pub fn validate(&self, model: ModelId) -> Result<()> {
        for &p in model.params() {
            let v = self.get(p);
            let field = format!("theta.{}", p.name());
            if !v.is_finite() {
                return Err(Error::param(field, "must be finite"));
            }
            let ok = match p {
                Param::A | Param::B => v > 0.0,
                Param::C => (0.0..=1.0).contains(&v),
                Param::D => v >= 1.0,
            };
            if !ok {
                let rule = match p {
                    Param::A | Param::B => "must be > 0",
                    Param::C => "must lie in [0, 1]",
                    Param::D => "must be >= 1",
                };
                return Err(Error::param(field, format!("{rule} (got {v})")));
            }
        }
        Ok(())
    }

    /// Looser check for data-generating values: `a, b, d > 0` and finite `c`.
    pub fn validate_generating(&self, model: ModelId) -> Result<()> {
        for &p in model.params() {
            let v = self.get(p);
            let ok = v.is_finite() && (p == Param::C || v > 0.0);
            if !ok {
                return Err(Error::param(
                    format!("theta.{}", p.name()),
                    format!("invalid value {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// How a parent model collapses to a child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NestingEdge {
    pub parent: ModelId,
    pub child: ModelId,
    pub param: Param,
    pub value: f64,
}

/// Single-parameter restrictions of the nesting diagram.
pub const RESTRICTIONS: [NestingEdge; 5] = [
    NestingEdge {
        parent: ModelId::Full,
        child: ModelId::ExpSat,
        param: Param::D,
        value: 1.0,
    },
    NestingEdge {
        parent: ModelId::Full,
        child: ModelId::ExpPow,
        param: Param::C,
        value: 0.0,
    },
    NestingEdge {
        parent: ModelId::ExpSat,
        child: ModelId::Constant,
        param: Param::C,
        value: 1.0,
    },
    NestingEdge {
        parent: ModelId::ExpSat,
        child: ModelId::Exp,
        param: Param::C,
        value: 0.0,
    },
    NestingEdge {
        parent: ModelId::ExpPow,
        child: ModelId::Exp,
        param: Param::D,
        value: 1.0,
    },
];

/// All nesting edges, including the `b = 0` collapse of every non-constant
/// model onto the constant model.
pub fn nesting_edges() -> Vec<NestingEdge> {
    let mut edges = RESTRICTIONS.to_vec();
    for parent in [
        ModelId::Exp,
        ModelId::ExpPow,
        ModelId::ExpSat,
        ModelId::Full,
    ] {
        edges.push(NestingEdge {
            parent,
            child: ModelId::Constant,
            param: Param::B,
            value: 0.0,
        });
    }
    edges
}

/// `child` is obtained from `parent` by a direct restriction.
pub fn nests(child: ModelId, parent: ModelId) -> bool {
    if parent != ModelId::Constant && child == ModelId::Constant {
        return true;
    }
    RESTRICTIONS
        .iter()
        .any(|e| e.parent == parent && e.child == child)
}

/// Parameter whose restriction collapses `parent` onto `child`, and its
/// restricted value. The `b = 0` collapse is not a discrimination target.
pub fn discrimination_target(parent: ModelId, child: ModelId) -> Result<(Param, f64)> {
    RESTRICTIONS
        .iter()
        .find(|e| e.parent == parent && e.child == child)
        .map(|e| (e.param, e.value))
        .ok_or(Error::NoSingleParameterNesting { parent, child })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let dims: Vec<_> = ModelId::ALL.iter().map(|m| m.dim()).collect();
        assert_eq!(dims, vec![1, 2, 3, 3, 4]);
        assert_eq!(ModelId::Full.index_of(Param::D), Some(2));
        assert_eq!(ModelId::Full.index_of(Param::C), Some(3));
    }

    #[test]
    fn mean_examples() {
        let th = Theta::new(1.0, 1.0, 0.0, 1.0);
        assert_eq!(ModelId::Constant.mean(&th, 0.7).unwrap(), 1.0);
        assert_eq!(ModelId::Exp.mean(&th, 0.0).unwrap(), 1.0);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let full = ModelId::Full.mean(&th, t).unwrap();
            let exp = ModelId::Exp.mean(&th, t).unwrap();
            assert!((full - exp).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_examples() {
        let th = Theta::new(1.0, 1.0, 0.0, 1.0);
        assert_eq!(
            ModelId::ExpPow.gradient(&th, 0.0).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        let g = ModelId::ExpPow.gradient(&th, 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((g[0] - e).abs() < 1e-15 && (g[1] + e).abs() < 1e-15 && g[2] == 0.0);
    }

    #[test]
    fn exp_pow_sign_structure() {
        // On (0, 1) ln t < 0, so -a b t^d ln(t) e^{-b t^d} is positive.
        let th = Theta::new(1.3, 0.7, 0.0, 1.5);
        for i in 1..100 {
            let t = i as f64 / 100.0;
            let g = ModelId::ExpPow.gradient(&th, t).unwrap();
            assert!(g[0] > 0.0, "t={t}");
            assert!(g[1] < 0.0, "t={t}");
            assert!(g[2] > 0.0, "t={t}");
        }
    }

    #[test]
    fn validation_errors() {
        let bad = Theta::new(1.0, -1.0, 0.0, 1.0);
        match ModelId::Exp.mean(&bad, 0.5) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "theta.b"),
            other => panic!("unexpected {other:?}"),
        }
        // b is irrelevant for the constant model.
        assert!(ModelId::Constant.mean(&bad, 0.5).is_ok());
        assert!(ModelId::ExpSat
            .mean(&Theta::new(1.0, 1.0, 1.2, 1.0), 0.5)
            .is_err());
        assert!(ModelId::ExpPow
            .mean(&Theta::new(1.0, 1.0, 0.0, 0.9), 0.5)
            .is_err());
        assert!(matches!(
            ModelId::Exp.mean(&Theta::default(), -0.1),
            Err(Error::Domain(_))
        ));
        // boundary values are admissible
        assert!(Theta::new(1.0, 1.0, 1.0, 1.0)
            .validate(ModelId::Full)
            .is_ok());
        assert!(Theta::new(1.0, 1.0, 0.0, 1.0)
            .validate(ModelId::Full)
            .is_ok());
    }

    #[test]
    fn targets() {
        assert_eq!(
            discrimination_target(ModelId::ExpSat, ModelId::Exp).unwrap(),
            (Param::C, 0.0)
        );
        assert_eq!(
            discrimination_target(ModelId::Full, ModelId::ExpPow).unwrap(),
            (Param::C, 0.0)
        );
        assert_eq!(
            discrimination_target(ModelId::Full, ModelId::ExpSat).unwrap(),
            (Param::D, 1.0)
        );
        assert_eq!(
            discrimination_target(ModelId::ExpSat, ModelId::Constant).unwrap(),
            (Param::C, 1.0)
        );
        assert_eq!(
            discrimination_target(ModelId::ExpPow, ModelId::Exp).unwrap(),
            (Param::D, 1.0)
        );
        assert!(matches!(
            discrimination_target(ModelId::Exp, ModelId::Constant),
            Err(Error::NoSingleParameterNesting { .. })
        ));
    }

    #[test]
    fn nesting_predicate() {
        use ModelId::*;
        let expected = [
            (ExpSat, Full),
            (ExpPow, Full),
            (Constant, ExpSat),
            (Exp, ExpSat),
            (Exp, ExpPow),
            (Constant, Exp),
            (Constant, ExpPow),
            (Constant, Full),
        ];
        for child in ModelId::ALL {
            for parent in ModelId::ALL {
                assert_eq!(
                    nests(child, parent),
                    expected.contains(&(child, parent)),
                    "{child} in {parent}"
                );
            }
        }
    }

    #[test]
    fn parse_labels() {
        for m in ModelId::ALL {
            assert_eq!(m.label().parse::<ModelId>().unwrap(), m);
            assert_eq!(m.name().parse::<ModelId>().unwrap(), m);
        }
        assert!("2.7".parse::<ModelId>().is_err());
    }
}

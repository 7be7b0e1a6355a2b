//! Surrogate models trained on a database of (design, cost) pairs.
//!
//! Three families are provided: a Gaussian radial-basis-function network
//! that interpolates the data, an epsilon-insensitive support vector
//! regressor, and ordinary Kriging, which also reports a confidence
//! (standard deviation) for each prediction.

mod kriging;
mod rbfn;
mod svr;
mod training;

pub use kriging::{fit_ok, OkModel, ThetaSpec, NUGGET_MAX, NUGGET_START};
pub use rbfn::{default_width, fit_rbfn, RbfnModel};
pub use svr::{fit_svr, SvrModel, SvrParams};
pub use training::TrainingSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};
use crate::problem::Evaluator;

/// A surrogate output: the predicted cost and, for Kriging, its standard
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rbfn,
    Svr,
    Ok,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rbfn, ModelKind::Svr, ModelKind::Ok];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rbfn => "rbfn",
            ModelKind::Svr => "svr",
            ModelKind::Ok => "ok",
        }
    }

    pub fn default_spec(self) -> ModelSpec {
        match self {
            ModelKind::Rbfn => ModelSpec::Rbfn { width: None },
            ModelKind::Svr => ModelSpec::Svr(SvrParams::default()),
            ModelKind::Ok => ModelSpec::Ok { theta: None },
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = SbdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbfn" => Ok(ModelKind::Rbfn),
            "svr" => Ok(ModelKind::Svr),
            "ok" => Ok(ModelKind::Ok),
            other => Err(SbdError::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Model family plus hyperparameters; `None` selects the data-driven default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Rbfn { width: Option<f64> },
    Svr(SvrParams),
    Ok { theta: Option<Vec<f64>> },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Rbfn { .. } => ModelKind::Rbfn,
            ModelSpec::Svr(_) => ModelKind::Svr,
            ModelSpec::Ok { .. } => ModelKind::Ok,
        }
    }

    pub fn fit(&self, data: &TrainingSet) -> Result<Surrogate> {
        Ok(match self {
            ModelSpec::Rbfn { width } => Surrogate::Rbfn(fit_rbfn(data, *width)?),
            ModelSpec::Svr(params) => Surrogate::Svr(fit_svr(data, params)?),
            ModelSpec::Ok { theta } => {
                let spec = match theta {
                    Some(t) => ThetaSpec::Fixed(t.clone()),
                    None => ThetaSpec::Auto,
                };
                Surrogate::Ok(fit_ok(data, &spec)?)
            }
        })
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone)]
pub enum Surrogate {
    Rbfn(RbfnModel),
    Svr(SvrModel),
    Ok(OkModel),
}

impl Surrogate {
    pub fn kind(&self) -> ModelKind {
        match self {
            Surrogate::Rbfn(_) => ModelKind::Rbfn,
            Surrogate::Svr(_) => ModelKind::Svr,
            Surrogate::Ok(_) => ModelKind::Ok,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Surrogate::Rbfn(m) => m.dims(),
            Surrogate::Svr(m) => m.dims(),
            Surrogate::Ok(m) => m.dims(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dims() {
            return Err(SbdError::DimensionMismatch {
                expected: self.dims(),
                got: x.len(),
            });
        }
        Ok(match self {
            Surrogate::Rbfn(m) => Prediction {
                value: m.value(x),
                confidence: None,
            },
            Surrogate::Svr(m) => Prediction {
                value: m.value(x),
                confidence: None,
            },
            Surrogate::Ok(m) => {
                let (value, sd) = m.value_and_sd(x);
                Prediction {
                    value,
                    confidence: Some(sd),
                }
            }
        })
    }
}

impl Evaluator for Surrogate {
    fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dims());
        match self {
            Surrogate::Rbfn(m) => m.value(x),
            Surrogate::Svr(m) => m.value(x),
            Surrogate::Ok(m) => m.value(x),
        }
    }
}

/// Normalized squared prediction error over a test set:
/// `sum |pred - phi|^2 / sum |phi|^2`.
pub fn sm_error(model: &Surrogate, test: &TrainingSet) -> Result<f64> {
    if test.is_empty() {
        return Err(SbdError::EmptyTrainingSet);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, phi) in test.iter() {
        let pred = model.predict(x)?.value;
        num += (pred - phi).powi(2);
        den += phi * phi;
    }
    if den == 0.0 {
        return Err(SbdError::ZeroDenominator);
    }
    Ok(num / den)
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

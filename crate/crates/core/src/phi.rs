//! The φ-transform: the feature space that importance estimators see.
//!
//! `Covariates` is the identity map, `Predictions` replaces each row by the
//! pre-threshold output of a model fit on the full training set, and `Both`
//! concatenates the two. The same fitted model is applied to training and
//! test covariates; test targets are never an input.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{self, LearnerConfig, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhiMode {
    #[serde(rename = "C")]
    Covariates,
    #[serde(rename = "P")]
    Predictions,
    #[serde(rename = "CP")]
    Both,
}

impl PhiMode {
    pub const ALL: [PhiMode; 3] = [PhiMode::Covariates, PhiMode::Predictions, PhiMode::Both];

    pub fn suffix(&self) -> &'static str {
        match self {
            PhiMode::Covariates => "C",
            PhiMode::Predictions => "P",
            PhiMode::Both => "CP",
        }
    }
}

impl fmt::Display for PhiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.suffix())
    }
}

impl FromStr for PhiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches('-').to_ascii_uppercase().as_str() {
            "C" => Ok(PhiMode::Covariates),
            "P" => Ok(PhiMode::Predictions),
            "CP" => Ok(PhiMode::Both),
            other => Err(Error::Parse(format!("unknown phi mode {other:?} (expected C, P or CP)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiMapper {
    mode: PhiMode,
    model: Option<LinearModel>,
    input_dim: usize,
    output_dim: usize,
}

impl PhiMapper {
    pub fn identity(dim: usize) -> Self {
        PhiMapper {
            mode: PhiMode::Covariates,
            model: None,
            input_dim: dim,
            output_dim: dim,
        }
    }

    pub fn mode(&self) -> PhiMode {
        self.mode
    }

    pub fn model(&self) -> Option<&LinearModel> {
        self.model.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        apply_phi(self, x)
    }
}

pub fn fit_phi(train: &Dataset, mode: PhiMode, learner: &LearnerConfig) -> Result<PhiMapper> {
    let d = train.dim();
    match mode {
        PhiMode::Covariates => Ok(PhiMapper::identity(d)),
        PhiMode::Predictions | PhiMode::Both => {
            let model = learners::fit(train, learner)?;
            let k = model.output_dim();
            let output_dim = if mode == PhiMode::Both { d + k } else { k };
            Ok(PhiMapper {
                mode,
                model: Some(model),
                input_dim: d,
                output_dim,
            })
        }
    }
}

pub fn apply_phi(mapper: &PhiMapper, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != mapper.input_dim {
        return Err(Error::DimensionMismatch {
            expected: mapper.input_dim,
            found: x.ncols(),
        });
    }
    let model = || mapper.model.as_ref().expect("prediction mappers carry a model");
    match mapper.mode {
        PhiMode::Covariates => Ok(x.to_owned()),
        PhiMode::Predictions => learners::predict_raw(model(), x),
        PhiMode::Both => {
            let preds = learners::predict_raw(model(), x)?;
            Ok(concatenate(Axis(1), &[x, preds.view()]).expect("row counts agree"))
        }
    }
}

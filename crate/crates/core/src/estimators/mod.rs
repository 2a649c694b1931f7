//! Learners over feature matrices and the exact kernel ridge oracle.

mod lipschitz;
mod ridge;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::features::{build_feature_matrix, FeatureMatrix, WeightedFeatureSet};
use crate::kernels::KernelSpec;
use crate::{Error, Result};

pub use lipschitz::{fit_lipschitz, hinge_objective, logistic_objective, SolverOptions};
pub use ridge::{
    fit_krr, fit_krr_exact, fit_ridge, function_approx_error, orthogonality_check,
    orthogonality_check_projection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Squared,
    Hinge,
    Logistic,
}

impl Loss {
    pub fn as_str(&self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Hinge => "hinge",
            Loss::Logistic => "logistic",
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Loss::Squared)
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squared" | "square" | "ls" => Ok(Loss::Squared),
            "hinge" | "svm" => Ok(Loss::Hinge),
            "logistic" | "logit" => Ok(Loss::Logistic),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }
}

/// `+1` for nonnegative values, `-1` otherwise.
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Linear model in feature space.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub beta: DVector<f64>,
    pub lambda: f64,
    pub loss: Loss,
    /// Kernel and frequencies the model was trained on, when known.
    pub source: Option<(KernelSpec, WeightedFeatureSet)>,
    /// False when an iterative solver stopped at its iteration cap.
    pub converged: bool,
    pub iterations: usize,
    /// Objective values per iteration (empty for closed-form fits).
    pub objective_trace: Vec<f64>,
}

impl LinearModel {
    /// Raw scores `Z beta`.
    pub fn decision_values(&self, z: &FeatureMatrix) -> Result<DVector<f64>> {
        if z.dim() != self.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.beta.len(),
                got: z.dim(),
            });
        }
        Ok(z.values() * &self.beta)
    }

    /// Predictions on a prebuilt feature matrix: `Z beta` for regression, its
    /// sign for classification.
    pub fn predict_features(&self, z: &FeatureMatrix) -> Result<DVector<f64>> {
        let raw = self.decision_values(z)?;
        Ok(if self.loss.is_classification() {
            raw.map(sign)
        } else {
            raw
        })
    }

    /// Rebuild features for `x_new` with the training frequencies, weights and
    /// scaling, then predict.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (spec, set) = self.source.as_ref().ok_or_else(|| {
            Error::invalid("model carries no feature source; use predict_features")
        })?;
        self.predict_with(spec, set, x_new)
    }

    /// Predict with an explicitly supplied kernel and feature set.
    pub fn predict_with(
        &self,
        spec: &KernelSpec,
        set: &WeightedFeatureSet,
        x_new: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        let z = build_feature_matrix(set, spec, x_new)?;
        self.predict_features(&z)
    }
}

/// Exact kernel ridge regression model with dual coefficients.
#[derive(Debug, Clone)]
pub struct KrrModel {
    pub alpha: DVector<f64>,
    pub lambda: f64,
    /// Kernel and training inputs, when fitted through [`fit_krr`].
    pub training: Option<(KernelSpec, DMatrix<f64>)>,
}

impl KrrModel {
    /// `k(x_new, X_train) alpha`.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (spec, x_train) = self
            .training
            .as_ref()
            .ok_or_else(|| Error::invalid("model carries no training inputs; use predict_with"))?;
        self.predict_with(spec, x_train, x_new)
    }

    pub fn predict_with(
        &self,
        spec: &KernelSpec,
        x_train: &DMatrix<f64>,
        x_new: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        if x_train.nrows() != self.alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: self.alpha.len(),
                got: x_train.nrows(),
            });
        }
        Ok(spec.cross_gram(x_new, x_train)? * &self.alpha)
    }
}

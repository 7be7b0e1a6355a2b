use nalgebra::{DMatrix, DVector};

use super::{squared_distance, TrainingSet};
use crate::error::{Result, SbdError};

/// Gaussian radial-basis-function network interpolating its training data:
/// `f(x) = sum_s w_s exp(-|x - c_s|^2 / (2 sigma^2))`.
#[derive(Debug, Clone)]
pub struct RbfnModel {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    width: f64,
}

impl RbfnModel {
    pub fn dims(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.width * self.width);
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (-squared_distance(c, x) * inv).exp())
            .sum()
    }
}

/// Mean nearest-neighbour distance among the inputs; 1.0 for a single input.
pub fn default_width(inputs: &[Vec<f64>]) -> f64 {
    if inputs.len() < 2 {
        return 1.0;
    }
    let total: f64 = inputs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            inputs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| squared_distance(a, b))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    let width = total / inputs.len() as f64;
    if width > 0.0 {
        width
    } else {
        1.0
    }
}

fn closest_pair(inputs: &[Vec<f64>]) -> (usize, usize) {
    let mut best = (0, 1.min(inputs.len() - 1), f64::INFINITY);
    for i in 0..inputs.len() {
        for j in (i + 1)..inputs.len() {
            let d = squared_distance(&inputs[i], &inputs[j]);
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

pub fn fit_rbfn(data: &TrainingSet, width: Option<f64>) -> Result<RbfnModel> {
    if data.is_empty() {
        return Err(SbdError::EmptyTrainingSet);
    }
    let width = width.unwrap_or_else(|| default_width(data.inputs()));
    if !(width.is_finite() && width > 0.0) {
        return Err(SbdError::InvalidArgument(format!("RBF width must be positive, got {width}")));
    }
    let n = data.len();
    let inv = 1.0 / (2.0 * width * width);
    let inputs = data.inputs();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (-squared_distance(&inputs[i], &inputs[j]) * inv).exp()
        }
    });
    let rhs = DVector::from_column_slice(data.targets());
    let singular = || {
        let (first, second) = closest_pair(inputs);
        SbdError::SingularSystem { first, second }
    };
    let weights = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram.clone().lu().solve(&rhs).ok_or_else(singular)?,
    };
    let residual = (&gram * &weights - &rhs).norm();
    if !(residual <= 1e-8 * (1.0 + rhs.norm())) {
        return Err(singular());
    }
    Ok(RbfnModel {
        centers: inputs.to_vec(),
        weights: weights.iter().copied().collect(),
        width,
    })
}

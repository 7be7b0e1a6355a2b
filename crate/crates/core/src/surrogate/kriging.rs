//! Ordinary Kriging with an anisotropic Gaussian correlation
//! `R_pq = exp(-sum_k theta_k (x_pk - x_qk)^2)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::TrainingSet;
use crate::error::{Result, SbdError};

pub const NUGGET_START: f64 = 1e-10;
pub const NUGGET_MAX: f64 = 1e-4;

/// Grid of log10 multipliers for automatic theta selection. A multiplier
/// `g` maps to `theta_k = 10^g / range_k^2`.
const LOG_GRID_MIN: f64 = -1.0;
const LOG_GRID_MAX: f64 = 3.0;
const GRID_POINTS: usize = 25;
/// Above this many dimensions a single shared theta is fitted.
const MAX_ANISOTROPIC_DIMS: usize = 4;
const COORDINATE_SWEEPS: usize = 2;
/// Relative lower bound on the process variance, so a model fitted to a
/// single sample or to constant targets still reports nonzero uncertainty
/// away from its data.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    /// One value per dimension, or a single value shared by all.
    Fixed(Vec<f64>),
    /// Maximize the concentrated log-likelihood over a log-spaced grid.
    Auto,
}

#[derive(Debug, Clone)]
pub struct OkModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    theta: Vec<f64>,
    mu: f64,
    process_variance: f64,
    nugget: f64,
    log_likelihood: f64,
    chol: Cholesky<f64, Dyn>,
    residual_weights: DVector<f64>,
    one_rinv_one: f64,
}

impl OkModel {
    pub fn dims(&self) -> usize {
        self.theta.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn process_variance(&self) -> f64 {
        self.process_variance
    }

    /// Diagonal regularization actually used in the factorization.
    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `R^{-1} (phi - 1 mu)`.
    pub fn residual_weights(&self) -> &[f64] {
        self.residual_weights.as_slice()
    }

    fn correlation_vector(&self, x: &[f64]) -> std::result::Result<DVector<f64>, usize> {
        let mut eta = DVector::zeros(self.inputs.len());
        for (s, xs) in self.inputs.iter().enumerate() {
            if xs.as_slice() == x {
                return Err(s);
            }
            eta[s] = correlation(&self.theta, xs, x);
        }
        Ok(eta)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.correlation_vector(x) {
            Ok(eta) => self.mu + eta.dot(&self.residual_weights),
            Err(s) => self.targets[s],
        }
    }

    /// Predicted value and Kriging standard deviation. At a training input
    /// the stored target and a zero deviation are returned exactly.
    pub fn value_and_sd(&self, x: &[f64]) -> (f64, f64) {
        let eta = match self.correlation_vector(x) {
            Ok(eta) => eta,
            Err(s) => return (self.targets[s], 0.0),
        };
        let value = self.mu + eta.dot(&self.residual_weights);
        let rinv_eta = self.chol.solve(&eta);
        let one_rinv_eta: f64 = rinv_eta.sum();
        let var = self.process_variance
            * (1.0 - eta.dot(&rinv_eta)
                + (1.0 - one_rinv_eta).powi(2) / self.one_rinv_one);
        (value, var.max(0.0).sqrt())
    }
}

fn correlation(theta: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((t, p), q) in theta.iter().zip(a).zip(b) {
        let d = p - q;
        acc += t * d * d;
    }
    (-acc).exp()
}

fn correlation_matrix(inputs: &[Vec<f64>], theta: &[f64]) -> DMatrix<f64> {
    let n = inputs.len();
    let mut r = DMatrix::identity(n, n);
    for p in 0..n {
        for q in (p + 1)..n {
            let v = correlation(theta, &inputs[p], &inputs[q]);
            r[(p, q)] = v;
            r[(q, p)] = v;
        }
    }
    r
}

/// Factorize `R + nugget I`, escalating the nugget tenfold on failure.
fn factorize(r: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut nugget = NUGGET_START;
    loop {
        let mut m = r.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += nugget;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, nugget));
        }
        if nugget >= NUGGET_MAX {
            return Err(SbdError::NotPositiveDefinite { nugget });
        }
        nugget = (nugget * 10.0).min(NUGGET_MAX);
    }
}

fn build(data: &TrainingSet, theta: Vec<f64>) -> Result<OkModel> {
    let n = data.len();
    let r = correlation_matrix(data.inputs(), &theta);
    let (chol, nugget) = factorize(&r)?;
    let phi = DVector::from_column_slice(data.targets());
    let ones = DVector::from_element(n, 1.0);
    let rinv_one = chol.solve(&ones);
    let rinv_phi = chol.solve(&phi);
    let one_rinv_one = rinv_one.sum();
    let mu = rinv_phi.sum() / one_rinv_one;
    let residual = &phi - &ones * mu;
    let residual_weights = chol.solve(&residual);
    let scale = data.targets().iter().map(|t| t * t).sum::<f64>() / n as f64;
    let variance_floor = VARIANCE_FLOOR * scale.max(1.0);
    let process_variance = (residual.dot(&residual_weights) / n as f64).max(variance_floor);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let log_likelihood = -0.5 * n as f64 * process_variance.ln() - 0.5 * log_det;
    Ok(OkModel {
        inputs: data.inputs().to_vec(),
        targets: data.targets().to_vec(),
        theta,
        mu,
        process_variance,
        nugget,
        log_likelihood,
        chol,
        residual_weights,
        one_rinv_one,
    })
}

fn input_ranges(data: &TrainingSet) -> Vec<f64> {
    (0..data.dims())
        .map(|k| {
            let (lo, hi) = data
                .inputs()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x[k]), hi.max(x[k]))
                });
            let range = hi - lo;
            if range > 0.0 {
                range
            } else {
                1.0
            }
        })
        .collect()
}

fn log_grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| LOG_GRID_MIN + (LOG_GRID_MAX - LOG_GRID_MIN) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

fn theta_from_exponents(exponents: &[f64], ranges: &[f64]) -> Vec<f64> {
    exponents
        .iter()
        .zip(ranges)
        .map(|(g, r)| 10f64.powf(*g) / (r * r))
        .collect()
}

/// Keep the first strictly better model; grid order breaks ties.
fn better(candidate: Result<OkModel>, best: &mut Option<OkModel>) -> bool {
    match candidate {
        Ok(model) if model.log_likelihood.is_finite() => {
            if best.as_ref().is_none_or(|b| model.log_likelihood > b.log_likelihood) {
                *best = Some(model);
                return true;
            }
            false
        }
        _ => false,
    }
}

fn fit_auto(data: &TrainingSet) -> Result<OkModel> {
    let k = data.dims();
    let ranges = input_ranges(data);
    let grid = log_grid();

    let mut best: Option<OkModel> = None;
    let mut best_shared = grid[0];
    for &g in &grid {
        if better(build(data, theta_from_exponents(&vec![g; k], &ranges)), &mut best) {
            best_shared = g;
        }
    }

    if k > 1 && k <= MAX_ANISOTROPIC_DIMS && best.is_some() {
        let mut exponents = vec![best_shared; k];
        for _ in 0..COORDINATE_SWEEPS {
            for dim in 0..k {
                for &g in &grid {
                    let mut trial = exponents.clone();
                    trial[dim] = g;
                    if better(build(data, theta_from_exponents(&trial, &ranges)), &mut best) {
                        exponents = trial;
                    }
                }
            }
        }
    }

    best.ok_or(SbdError::NotPositiveDefinite { nugget: NUGGET_MAX })
}

/// Fit an ordinary Kriging model. Automatic theta needs at least two samples.
pub fn fit_ok(data: &TrainingSet, theta: &ThetaSpec) -> Result<OkModel> {
    if data.is_empty() {
        return Err(SbdError::EmptyTrainingSet);
    }
    match theta {
        ThetaSpec::Fixed(values) => {
            let theta = match values.len() {
                1 => vec![values[0]; data.dims()],
                n if n == data.dims() => values.clone(),
                n => {
                    return Err(SbdError::DimensionMismatch {
                        expected: data.dims(),
                        got: n,
                    })
                }
            };
            if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(SbdError::InvalidArgument("theta must be positive".into()));
            }
            build(data, theta)
        }
        ThetaSpec::Auto => {
            if data.len() < 2 {
                return Err(SbdError::InvalidArgument(
                    "automatic theta needs at least two samples".into(),
                ));
            }
            fit_auto(data)
        }
    }
}

/// Average distance from `x` to the training inputs.
#[cfg(test)]
fn mean_distance(model: &OkModel, x: &[f64]) -> f64 {
    let n = model.inputs.len() as f64;
    model
        .inputs
        .iter()
        .map(|xs| super::squared_distance(xs, x).sqrt())
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> TrainingSet {
        let samples = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..dims).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let y = x.iter().map(|v| (2.0 * v).sin() + 0.3 * v * v).sum::<f64>();
                (x, y)
            })
            .collect();
        TrainingSet::from_samples(samples).unwrap()
    }

    #[test]
    fn single_sample_is_constant() {
        let data = TrainingSet::from_samples(vec![(vec![0.5, 0.5], 3.0)]).unwrap();
        let m = fit_ok(&data, &ThetaSpec::Fixed(vec![1.0])).unwrap();
        assert_eq!(m.mu(), 3.0);
        let (v, sd) = m.value_and_sd(&[0.9, 0.1]);
        assert!((v - 3.0).abs() < 1e-12);
        assert!(sd > 0.0);
        assert_eq!(m.value_and_sd(&[0.5, 0.5]), (3.0, 0.0));
        assert!(fit_ok(&data, &ThetaSpec::Auto).is_err());
    }

    #[test]
    fn interpolates_with_zero_confidence_at_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_set(&mut rng, 12, 2);
        let m = fit_ok(&data, &ThetaSpec::Auto).unwrap();
        for (x, y) in data.iter() {
            let (v, sd) = m.value_and_sd(x);
            assert_eq!(v, y);
            assert_eq!(sd, 0.0);
        }
        let (_, sd) = m.value_and_sd(&[1.9, -1.9]);
        assert!(sd > 0.0);
    }

    #[test]
    fn confidence_grows_away_from_data() {
        let data = TrainingSet::from_samples(vec![
            (vec![0.0], 0.0),
            (vec![1.0], 1.0),
            (vec![2.0], 0.0),
        ])
        .unwrap();
        let m = fit_ok(&data, &ThetaSpec::Fixed(vec![1.0])).unwrap();
        let near = m.value_and_sd(&[1.05]).1;
        let far = m.value_and_sd(&[5.0]).1;
        assert!(near < far);
        assert!(mean_distance(&m, &[1.05]) < mean_distance(&m, &[5.0]));
    }

    #[test]
    fn nugget_escalates_until_factorizable() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 + 1e-8, 1.0 + 1e-8, 1.0]);
        let (_, nugget) = factorize(&r).unwrap();
        assert!(nugget > 1e-8 && nugget <= 1e-7, "nugget {nugget}");
        let hopeless = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            factorize(&hopeless).unwrap_err(),
            SbdError::NotPositiveDefinite { nugget: NUGGET_MAX }
        );
    }

    #[test]
    fn theta_validation() {
        let data = TrainingSet::from_samples(vec![(vec![0.0, 0.0], 0.0)]).unwrap();
        assert!(fit_ok(&data, &ThetaSpec::Fixed(vec![1.0, 2.0, 3.0])).is_err());
        assert!(fit_ok(&data, &ThetaSpec::Fixed(vec![-1.0])).is_err());
        assert!(fit_ok(&TrainingSet::new(1), &ThetaSpec::Auto).is_err());
    }

    #[test]
    fn anisotropic_theta_for_small_dims() {
        // Output depends on x1 only: the x2 scale should come out smaller.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = (0..30)
            .map(|_| {
                let x: Vec<f64> = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let y = (6.0 * x[0]).sin();
                (x, y)
            })
            .collect();
        let data = TrainingSet::from_samples(samples).unwrap();
        let m = fit_ok(&data, &ThetaSpec::Auto).unwrap();
        assert!(m.theta()[1] < m.theta()[0], "theta = {:?}", m.theta());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn interpolates_separated_samples(jitter in prop::collection::vec(0.1f64..0.9, 3..12)) {
                let n = jitter.len() as f64;
                let samples: Vec<(Vec<f64>, f64)> = jitter
                    .iter()
                    .enumerate()
                    .map(|(i, u)| {
                        let x = (i as f64 + u) / n;
                        (vec![x], (3.0 * x).sin())
                    })
                    .collect();
                let data = TrainingSet::from_samples(samples.clone()).unwrap();
                let m = fit_ok(&data, &ThetaSpec::Auto).unwrap();
                for (x, y) in &samples {
                    let (v, sd) = m.value_and_sd(x);
                    prop_assert!((v - y).abs() < 1e-3, "{} vs {}", v, y);
                    prop_assert!((0.0..1e-2).contains(&sd));
                }
            }
        }
    }
}

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};
use crate::problem::SearchSpace;

/// Levy function; global minimum 0 at `x = (1, ..., 1)`.
pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let middle: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let last = w[d - 1];
    let tail = (last - 1.0).powi(2) * (1.0 + (2.0 * PI * last).sin().powi(2));
    head + middle + tail
}

/// Schwefel function; global minimum ~0 at `x_k = 420.9687`.
pub fn schwefel(x: &[f64]) -> f64 {
    418.9829 * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

/// Ackley function (a = 20, b = 0.2, c = 2 pi); global minimum 0 at the origin.
pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let mean_cos = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    // grouped so the origin evaluates to exactly zero
    20.0 * (1.0 - (-0.2 * rms).exp()) + (E - mean_cos.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Levy,
    Schwefel,
    Ackley,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Levy, Benchmark::Schwefel, Benchmark::Ackley];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Levy => "levy",
            Benchmark::Schwefel => "schwefel",
            Benchmark::Ackley => "ackley",
        }
    }

    pub fn evaluate(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Levy => levy(x),
            Benchmark::Schwefel => schwefel(x),
            Benchmark::Ackley => ackley(x),
        }
    }

    /// Canonical per-dimension domain.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Benchmark::Levy => (-10.0, 10.0),
            Benchmark::Schwefel => (-500.0, 500.0),
            Benchmark::Ackley => (-5.0, 5.0),
        }
    }

    pub fn optimum_coordinate(self) -> f64 {
        match self {
            Benchmark::Levy => 1.0,
            Benchmark::Schwefel => 420.9687,
            Benchmark::Ackley => 0.0,
        }
    }

    pub fn space(self, dims: usize) -> Result<SearchSpace> {
        let (lo, hi) = self.bounds();
        SearchSpace::uniform(dims, lo, hi)
    }
}

impl std::str::FromStr for Benchmark {
    type Err = SbdError;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| SbdError::InvalidArgument(format!("unknown benchmark `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stated_optima() {
        assert!(levy(&[1.0; 6]).abs() < 1e-15);
        assert_eq!(ackley(&[0.0; 6]), 0.0);
        for k in 1..=6 {
            assert!(schwefel(&vec![420.9687; k]) <= 1e-3 * k as f64);
            assert!((schwefel(&vec![0.0; k]) - 418.9829 * k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn optima_beat_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for bench in Benchmark::ALL {
            let (lo, hi) = bench.bounds();
            let dims = 2;
            let at_opt = bench.evaluate(&vec![bench.optimum_coordinate(); dims]);
            for _ in 0..100_000 {
                let x: Vec<f64> = (0..dims).map(|_| rng.gen_range(lo..hi)).collect();
                assert!(bench.evaluate(&x) >= at_opt, "{} beaten at {x:?}", bench.name());
            }
        }
    }

    #[test]
    fn names_parse() {
        for bench in Benchmark::ALL {
            assert_eq!(bench.name().parse::<Benchmark>().unwrap(), bench);
        }
        assert!("rosenbrock".parse::<Benchmark>().is_err());
    }
}

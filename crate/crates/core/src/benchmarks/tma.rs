//! Coarse time-modulated array model: isotropic radiators behind ideal RF
//! switches. Element `n` is on during `[t_on_n, t_on_n + tau_n)` modulo the
//! (normalized) period, and the cost measures how much the instantaneous
//! broadside directivity ripples around its period average.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};
use crate::problem::{Problem, SearchSpace};

pub const MIN_TIME_GRID: usize = 256;
pub const DEFAULT_TIME_GRID: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmaConfig {
    pub n_elements: usize,
    /// Modulation period in seconds; times elsewhere are normalized by it.
    pub period: f64,
    /// Pulse durations as fractions of the period.
    pub durations: Vec<f64>,
    pub spacing_wavelengths: f64,
    /// Base points of the uniform integration grid.
    pub time_grid: usize,
}

impl TmaConfig {
    /// Half-wavelength array with Dolph-Chebyshev pulse durations.
    pub fn chebyshev(n_elements: usize, sll_db: f64) -> Result<Self> {
        let cfg = Self {
            n_elements,
            period: 10e-6,
            durations: chebyshev_durations(n_elements, sll_db)?,
            spacing_wavelengths: 0.5,
            time_grid: DEFAULT_TIME_GRID,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 || !self.n_elements.is_multiple_of(2) {
            return Err(SbdError::InvalidArgument(format!(
                "element count must be even and >= 2, got {}",
                self.n_elements
            )));
        }
        if self.durations.len() != self.n_elements {
            return Err(SbdError::DimensionMismatch {
                expected: self.n_elements,
                got: self.durations.len(),
            });
        }
        if let Some(tau) = self.durations.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(SbdError::InvalidArgument(format!("pulse duration {tau} outside [0, 1]")));
        }
        if self.time_grid < MIN_TIME_GRID {
            return Err(SbdError::InvalidArgument(format!(
                "time grid must have at least {MIN_TIME_GRID} points"
            )));
        }
        if !(self.spacing_wavelengths > 0.0) || !(self.period > 0.0) {
            return Err(SbdError::InvalidArgument(
                "spacing and period must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Degrees of freedom after the symmetry reduction.
    pub fn dims(&self) -> usize {
        self.n_elements / 2
    }

    /// Switch-on instants live in `[0, 1)`; the box is closed at 1 and
    /// callers wrap modulo the period.
    pub fn space(&self) -> SearchSpace {
        SearchSpace::uniform(self.dims(), 0.0, 1.0).expect("non-empty unit box")
    }
}

/// Dolph-Chebyshev amplitude taper with side lobes at `sll_db` (negative),
/// normalized to a unit maximum.
pub fn chebyshev_durations(n: usize, sll_db: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(SbdError::InvalidArgument("at least two elements are required".into()));
    }
    if !(sll_db < 0.0) {
        return Err(SbdError::InvalidArgument(format!("side-lobe level must be negative, got {sll_db}")));
    }
    let order = (n - 1) as f64;
    let ratio = 10f64.powf(-sll_db / 20.0);
    let beta = (ratio.acosh() / order).cosh();
    let cheb = |x: f64| -> f64 {
        if x > 1.0 {
            (order * x.acosh()).cosh()
        } else if x < -1.0 {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sign * (order * (-x).acosh()).cosh()
        } else {
            (order * x.acos()).cos()
        }
    };
    // samples of the pattern in the DFT domain
    let nf = n as f64;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let p = cheb(beta * (PI * k as f64 / nf).cos());
            if n % 2 == 1 {
                (p, 0.0)
            } else {
                let phase = PI * k as f64 / nf;
                (p * phase.cos(), p * phase.sin())
            }
        })
        .collect();
    let dft_real = |m: usize| -> f64 {
        samples
            .iter()
            .enumerate()
            .map(|(k, (re, im))| {
                let angle = -2.0 * PI * (k * m) as f64 / nf;
                re * angle.cos() - im * angle.sin()
            })
            .sum()
    };
    let spectrum: Vec<f64> = (0..n).map(dft_real).collect();
    let mut w = Vec::with_capacity(n);
    if n % 2 == 1 {
        let half = n.div_ceil(2);
        w.extend((1..half).rev().map(|i| spectrum[i]));
        w.extend_from_slice(&spectrum[..half]);
    } else {
        let half = n / 2 + 1;
        w.extend((1..half).rev().map(|i| spectrum[i]));
        w.extend_from_slice(&spectrum[1..half]);
    }
    // enforce exact symmetry, then normalize
    for i in 0..n / 2 {
        let avg = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = avg;
        w[n - 1 - i] = avg;
    }
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(w.into_iter().map(|v| v / max).collect())
}

/// Whether an element switched on at `t_on` for `tau` (both normalized) is
/// on at time `t`.
pub fn on_state(t: f64, t_on: f64, tau: f64) -> bool {
    if tau >= 1.0 {
        return true;
    }
    if tau <= 0.0 {
        return false;
    }
    let off = t_on + tau;
    if off <= 1.0 {
        t >= t_on && t < off
    } else {
        t >= t_on || t < off - 1.0
    }
}

/// Full switch-on vector from the half vector: `t_n = t_{N-n+1}`.
pub fn expand_symmetric(half: &[f64]) -> Vec<f64> {
    half.iter().chain(half.iter().rev()).copied().collect()
}

fn check_instants(t_on: &[f64]) -> Result<()> {
    for (index, &value) in t_on.iter().enumerate() {
        if !(0.0..1.0).contains(&value) {
            return Err(SbdError::SwitchInstantOutOfRange { index, value });
        }
    }
    Ok(())
}

/// `sin(pi a) / (pi a)`, exactly zero at nonzero integers.
fn sinc_pi(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else if a.fract() == 0.0 {
        0.0
    } else {
        (PI * a).sin() / (PI * a)
    }
}

/// Broadside directivity of the elements that are on, each with unit
/// excitation: `|sum a_n|^2 / sum_mn a_m a_n sinc(2 d (m - n))`. For
/// half-wavelength spacing this is the number of active elements.
fn directivity(active: &[bool], spacing: f64) -> f64 {
    let count = active.iter().filter(|a| **a).count();
    if count == 0 {
        return 0.0;
    }
    let numerator = (count * count) as f64;
    let mut denominator = 0.0;
    for (m, am) in active.iter().enumerate() {
        if !am {
            continue;
        }
        for (n, an) in active.iter().enumerate() {
            if *an {
                denominator += sinc_pi(2.0 * spacing * (m as f64 - n as f64));
            }
        }
    }
    numerator / denominator
}

fn states_at(config: &TmaConfig, t_on: &[f64], t: f64, buf: &mut Vec<bool>) {
    buf.clear();
    buf.extend(
        t_on.iter()
            .zip(&config.durations)
            .map(|(on, tau)| on_state(t, *on, *tau)),
    );
}

/// Instantaneous directivity `D(t)` for a full switch-on vector; zero when
/// every element is off.
pub fn tma_instantaneous_directivity(config: &TmaConfig, t_on: &[f64], t: f64) -> Result<f64> {
    config.validate()?;
    if t_on.len() != config.n_elements {
        return Err(SbdError::DimensionMismatch {
            expected: config.n_elements,
            got: t_on.len(),
        });
    }
    check_instants(t_on)?;
    if !(0.0..1.0).contains(&t) {
        return Err(SbdError::InvalidArgument(format!("time {t} outside [0, 1)")));
    }
    let mut buf = Vec::with_capacity(t_on.len());
    states_at(config, t_on, t, &mut buf);
    Ok(directivity(&buf, config.spacing_wavelengths))
}

/// Segment boundaries in `[0, 1]`: the uniform grid plus every switching
/// instant, sorted and deduplicated.
fn breakpoints(config: &TmaConfig, t_on: &[f64]) -> Vec<f64> {
    let grid = config.time_grid;
    let mut points: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).collect();
    for (on, tau) in t_on.iter().zip(&config.durations) {
        if *tau > 0.0 && *tau < 1.0 {
            points.push(*on);
            let off = on + tau;
            points.push(if off >= 1.0 { off - 1.0 } else { off });
        }
    }
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup();
    points
}

/// Piecewise-constant `D(t)` as `(start, length, value)` segments covering
/// one period.
fn directivity_segments(config: &TmaConfig, t_on: &[f64]) -> Vec<(f64, f64, f64)> {
    let points = breakpoints(config, t_on);
    let mut buf = Vec::with_capacity(t_on.len());
    points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            // D is constant on [w0, w1); the midpoint identifies the piece
            states_at(config, t_on, 0.5 * (w[0] + w[1]), &mut buf);
            (w[0], w[1] - w[0], directivity(&buf, config.spacing_wavelengths))
        })
        .collect()
}

/// Normalized mean absolute deviation of `D(t)` from its period average,
/// for the symmetric half vector `omega` of switch-on instants.
pub fn tma_cost(config: &TmaConfig, omega: &[f64]) -> Result<f64> {
    config.validate()?;
    if omega.len() != config.dims() {
        return Err(SbdError::DimensionMismatch {
            expected: config.dims(),
            got: omega.len(),
        });
    }
    check_instants(omega)?;
    let t_on = expand_symmetric(omega);
    let segments = directivity_segments(config, &t_on);
    let mean: f64 = segments.iter().map(|(_, len, d)| len * d).sum();
    if mean <= 0.0 {
        return Err(SbdError::DeadAperture);
    }
    let deviation: f64 = segments.iter().map(|(_, len, d)| len * (mean - d).abs()).sum();
    Ok(deviation / mean)
}

/// `(t, D(t))` samples over one period, for plotting.
pub fn tma_directivity_trace(config: &TmaConfig, omega: &[f64], points: usize) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    check_instants(omega)?;
    let t_on = expand_symmetric(omega);
    let mut buf = Vec::with_capacity(t_on.len());
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / points as f64;
            states_at(config, &t_on, t, &mut buf);
            (t, directivity(&buf, config.spacing_wavelengths))
        })
        .collect())
}

/// Expensive-problem wrapper: design values are wrapped modulo the period
/// and invalid configurations cost `+inf`.
pub fn tma_problem(config: TmaConfig) -> Result<Problem> {
    config.validate()?;
    let space = config.space();
    Ok(Problem::new(space, move |omega: &[f64]| {
        let wrapped: Vec<f64> = omega.iter().map(|w| w.rem_euclid(1.0)).collect();
        tma_cost(&config, &wrapped).unwrap_or(f64::INFINITY)
    }))
}

/// Pattern magnitude in dB (peak-normalized) of a linear array with the
/// given weights, sampled at `points` values of `u = cos(theta)` in [-1, 1].
pub fn array_factor_db(weights: &[f64], spacing: f64, points: usize) -> Vec<(f64, f64)> {
    let raw: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let u = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (n, w) in weights.iter().enumerate() {
                let phase = 2.0 * PI * spacing * n as f64 * u;
                re += w * phase.cos();
                im += w * phase.sin();
            }
            (u, (re * re + im * im).sqrt())
        })
        .collect();
    let peak = raw.iter().map(|(_, a)| *a).fold(0.0, f64::max);
    raw.into_iter()
        .map(|(u, a)| (u, 20.0 * (a / peak).max(1e-300).log10()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg16() -> TmaConfig {
        TmaConfig::chebyshev(16, -30.0).unwrap()
    }

    #[test]
    fn two_element_taper_is_uniform() {
        assert_eq!(chebyshev_durations(2, -30.0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(chebyshev_durations(2, -10.0).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn taper_is_symmetric_and_normalized() {
        let w = chebyshev_durations(16, -30.0).unwrap();
        assert_eq!(w.len(), 16);
        for i in 0..8 {
            assert_eq!(w[i], w[15 - i]);
        }
        let max = w.iter().copied().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(w.iter().all(|v| *v > 0.0));
        assert!(chebyshev_durations(1, -30.0).is_err());
        assert!(chebyshev_durations(16, 3.0).is_err());
    }

    #[test]
    fn odd_taper_matches_known_values() {
        // 5-element, -20 dB Dolph-Chebyshev: 1, 1.6085, 1.9319 (edge-normalized)
        let w = chebyshev_durations(5, -20.0).unwrap();
        let edge = w[0];
        let scaled: Vec<f64> = w.iter().map(|v| v / edge).collect();
        assert!((scaled[1] - 1.6085).abs() < 1e-3, "{scaled:?}");
        assert!((scaled[2] - 1.9319).abs() < 1e-3, "{scaled:?}");
    }

    #[test]
    fn on_state_wraps() {
        assert!(on_state(0.95, 0.9, 0.2));
        assert!(on_state(0.05, 0.9, 0.2));
        assert!(!on_state(0.15, 0.9, 0.2));
        assert!(on_state(0.3, 0.1, 0.5));
        assert!(!on_state(0.6, 0.1, 0.5));
        assert!(on_state(0.99, 0.5, 1.0));
        assert!(!on_state(0.5, 0.5, 0.0));
    }

    #[test]
    fn directivity_counts_active_elements() {
        let mut cfg = cfg16();
        cfg.durations = vec![1.0; 16];
        let t_on = vec![0.3; 16];
        assert_eq!(tma_instantaneous_directivity(&cfg, &t_on, 0.7).unwrap(), 16.0);

        let mut single = cfg16();
        single.durations = vec![0.0; 16];
        single.durations[3] = 0.5;
        assert_eq!(tma_instantaneous_directivity(&single, &t_on, 0.4).unwrap(), 1.0);
        assert_eq!(tma_instantaneous_directivity(&single, &t_on, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn directivity_rejects_bad_instants() {
        let cfg = cfg16();
        let mut t_on = vec![0.1; 16];
        t_on[4] = 1.0;
        assert_eq!(
            tma_instantaneous_directivity(&cfg, &t_on, 0.2),
            Err(SbdError::SwitchInstantOutOfRange { index: 4, value: 1.0 })
        );
        assert!(tma_cost(&cfg, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, -0.1]).is_err());
        assert!(tma_cost(&cfg, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn wider_spacing_gives_superdirective_denominator() {
        // with spacing other than lambda/2 the cross terms contribute
        let active = vec![true, true];
        assert_eq!(directivity(&active, 0.5), 2.0);
        assert!(directivity(&active, 0.25) < 2.0);
    }

    #[test]
    fn always_on_costs_zero() {
        let mut cfg = cfg16();
        cfg.durations = vec![1.0; 16];
        assert_eq!(tma_cost(&cfg, &[0.1, 0.5, 0.2, 0.9, 0.3, 0.7, 0.0, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn dead_aperture_is_an_error() {
        let mut cfg = cfg16();
        cfg.durations = vec![0.0; 16];
        assert_eq!(tma_cost(&cfg, &[0.0; 8]), Err(SbdError::DeadAperture));
    }

    #[test]
    fn config_validation() {
        assert!(TmaConfig::chebyshev(15, -30.0).is_err());
        let mut cfg = cfg16();
        cfg.time_grid = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = cfg16();
        cfg.durations[0] = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn problem_wraps_the_upper_bound() {
        use crate::problem::Evaluator;
        let cfg = cfg16();
        let problem = tma_problem(cfg.clone()).unwrap();
        let omega = [1.0, 0.25, 0.5, 0.75, 0.1, 0.2, 0.3, 0.4];
        let mut wrapped = omega;
        wrapped[0] = 0.0;
        assert_eq!(problem.evaluate(&omega), tma_cost(&cfg, &wrapped).unwrap());
        assert_eq!(problem.eval_count(), 1);
    }

    #[test]
    fn trace_has_requested_points() {
        let cfg = cfg16();
        let trace = tma_directivity_trace(&cfg, &[0.0; 8], 64).unwrap();
        assert_eq!(trace.len(), 64);
        // all switched on together at t = 0
        assert_eq!(trace[0].1, 16.0);
    }

    fn brute_directivity(cfg: &TmaConfig, t_on: &[f64], t: f64) -> f64 {
        let mut on = 0usize;
        for n in 0..cfg.n_elements {
            let tau = cfg.durations[n];
            let shifted = (t - t_on[n]).rem_euclid(1.0);
            if shifted < tau {
                on += 1;
            }
        }
        on as f64
    }

    #[test]
    fn chebyshev_sidelobes_sit_at_design_level() {
        let w = chebyshev_durations(16, -30.0).unwrap();
        let points = 2048;
        let pattern: Vec<f64> = (0..points)
            .map(|i| {
                let psi = PI * (-1.0 + 2.0 * i as f64 / (points - 1) as f64);
                let (re, im) = w.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, a)| {
                    (re + a * (psi * n as f64).cos(), im + a * (psi * n as f64).sin())
                });
                (re * re + im * im).sqrt()
            })
            .collect();
        let peak = pattern.iter().copied().fold(0.0, f64::max);
        let db: Vec<f64> = pattern.iter().map(|a| 20.0 * (a / peak).log10()).collect();
        let lobes: Vec<f64> = (1..points - 1)
            .filter(|&i| db[i] > db[i - 1] && db[i] >= db[i + 1] && db[i] < -1.0)
            .map(|i| db[i])
            .collect();
        assert!(lobes.len() >= 10, "{lobes:?}");
        for lobe in lobes {
            assert!((lobe + 30.0).abs() <= 0.1, "side lobe at {lobe} dB");
        }
        let library = array_factor_db(&w, 0.5, points);
        for ((_, a), b) in library.iter().zip(&db) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn directivity_matches_indicator_sum() {
        use rand::{Rng, SeedableRng};
        let cfg = cfg16();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let t_on: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
            let t: f64 = rng.gen();
            let d = tma_instantaneous_directivity(&cfg, &t_on, t).unwrap();
            assert_eq!(d, brute_directivity(&cfg, &t_on, t));
        }
    }

    #[test]
    fn cost_matches_dense_sum_and_is_shift_invariant() {
        use rand::{Rng, SeedableRng};
        let cfg = cfg16();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let omega: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let cost = tma_cost(&cfg, &omega).unwrap();
            assert!(cost >= 0.0);
            let t_on = expand_symmetric(&omega);
            let m = 200_000;
            let d: Vec<f64> = (0..m)
                .map(|j| brute_directivity(&cfg, &t_on, (j as f64 + 0.5) / m as f64))
                .collect();
            let mean = d.iter().sum::<f64>() / m as f64;
            let dense = d.iter().map(|v| (v - mean).abs()).sum::<f64>() / m as f64 / mean;
            assert!((cost - dense).abs() < 1e-3 * dense, "{cost} vs {dense}");

            let c: f64 = rng.gen();
            let shifted: Vec<f64> = omega.iter().map(|w| (w + c).rem_euclid(1.0)).collect();
            let moved = tma_cost(&cfg, &shifted).unwrap();
            assert!((moved - cost).abs() < 1e-9, "{moved} vs {cost}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn objective_is_periodic_in_switch_instants(
                omega in prop::collection::vec(0.0f64..1.0, 4),
                shift in -3i32..4,
            ) {
                let problem = tma_problem(TmaConfig::chebyshev(8, -25.0).unwrap()).unwrap();
                let base = problem.evaluate_untracked(&omega);
                prop_assert!(base.is_finite() && base >= 0.0);
                let moved: Vec<f64> = omega.iter().map(|w| w + shift as f64).collect();
                let other = problem.evaluate_untracked(&moved);
                prop_assert!((other - base).abs() <= 1e-9 * base.max(1.0), "{} vs {}", other, base);
            }
        }
    }
}

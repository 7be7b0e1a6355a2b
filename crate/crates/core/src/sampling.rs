//! Training-set designs: Latin hypercube, full-factorial grids and the
//! optimization-driven output-space-filling (OSF) expansion.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};
use crate::problem::{Evaluator, Problem, SearchSpace};
use crate::rng::{stream_rng, Stream};
use crate::surrogate::{ModelKind, ModelSpec, Surrogate, TrainingSet};

pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Lhs,
    Grid,
    Osf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub points: Vec<Vec<f64>>,
    pub generator: Generator,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Input columns of the training-set CSV (`x1,...,xK`).
    pub fn to_csv(&self) -> String {
        let dims = self.points.first().map_or(0, Vec::len);
        let mut out = String::new();
        let header: Vec<String> = (1..=dims).map(|k| format!("x{k}")).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Latin hypercube design of `n` points: in every dimension each of the `n`
/// equal-width strata holds exactly one point, placed uniformly within it.
pub fn lhs(space: &SearchSpace, n: usize, seed: u64) -> Result<SamplingPlan> {
    if n == 0 {
        return Err(SbdError::InvalidArgument("LHS needs at least one point".into()));
    }
    let mut rng = stream_rng(seed, Stream::TrainingDesign, 0);
    let dims = space.dims();
    let mut points = vec![vec![0.0; dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..dims {
        strata.shuffle(&mut rng);
        let (lo, width) = (space.lower()[k], space.width(k));
        for (point, &stratum) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            let v = lo + width * (stratum as f64 + u) / n as f64;
            // keep the point inside its stratum despite rounding
            let stratum_hi = lo + width * (stratum + 1) as f64 / n as f64;
            point[k] = if v >= stratum_hi { v.next_down().max(lo) } else { v };
        }
    }
    Ok(SamplingPlan {
        points,
        generator: Generator::Lhs,
        seed,
    })
}

/// Stratum index of coordinate `v` in dimension `k` of an `n`-point design.
pub fn stratum_index(space: &SearchSpace, k: usize, n: usize, v: f64) -> usize {
    let u = (v - space.lower()[k]) / space.width(k);
    ((u * n as f64).floor() as usize).min(n - 1)
}

/// Tensor grid with `q` levels per dimension including both bounds.
pub fn full_factorial(space: &SearchSpace, q: usize, cap: Option<usize>) -> Result<SamplingPlan> {
    if q < 2 {
        return Err(SbdError::InvalidArgument("grid needs at least 2 levels".into()));
    }
    let cap = cap.unwrap_or(DEFAULT_GRID_CAP);
    let dims = space.dims();
    let total = (q as f64).powi(dims as i32);
    if total > cap as f64 {
        return Err(SbdError::GridTooLarge { points: total, cap });
    }
    let total = total as usize;
    let levels: Vec<Vec<f64>> = (0..dims)
        .map(|k| {
            (0..q)
                .map(|i| {
                    if i == q - 1 {
                        space.upper()[k]
                    } else {
                        space.lower()[k] + space.width(k) * i as f64 / (q - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let points = (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; dims];
            for k in (0..dims).rev() {
                p[k] = levels[k][idx % q];
                idx /= q;
            }
            p
        })
        .collect();
    Ok(SamplingPlan {
        points,
        generator: Generator::Grid,
        seed: 0,
    })
}

/// Evaluate every point of a plan with the true objective.
pub fn evaluate_plan(problem: &Problem, plan: &SamplingPlan) -> Result<TrainingSet> {
    let costs = problem.evaluate_batch(&plan.points);
    let mut set = TrainingSet::new(problem.dims());
    for (x, cost) in plan.points.iter().zip(costs) {
        set.push(x.clone(), cost)?;
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsfConfig {
    pub s_target: usize,
    /// Candidates per loop; defaults to 100 x K.
    pub candidates: Option<usize>,
    pub phi_th: f64,
    pub seed: u64,
    pub model: ModelSpec,
}

impl OsfConfig {
    pub fn new(s_target: usize, phi_th: f64, seed: u64) -> Self {
        Self {
            s_target,
            candidates: None,
            phi_th,
            seed,
            model: ModelKind::Ok.default_spec(),
        }
    }
}

/// Record of one adaptive addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsfSelection {
    pub loop_index: usize,
    pub x: Vec<f64>,
    pub predicted: f64,
    pub actual: f64,
    /// Min output-space distance to the training targets at selection time.
    pub score: f64,
    /// `false` when no candidate met the threshold and the fallback
    /// (lowest prediction) was used.
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct OsfOutcome {
    pub data: TrainingSet,
    pub selections: Vec<OsfSelection>,
    pub refit_failures: usize,
}

/// Pick the candidate maximizing the min distance `|pred_c - phi_s|` among
/// those with `pred_c <= phi_th` (lowest index on ties). Falls back to the
/// lowest prediction when no candidate qualifies.
pub fn select_osf_candidate(predictions: &[f64], targets: &[f64], phi_th: f64) -> (usize, f64, bool) {
    let mut best: Option<(usize, f64)> = None;
    for (c, &pred) in predictions.iter().enumerate() {
        if !(pred <= phi_th) {
            continue;
        }
        let score = targets
            .iter()
            .map(|t| (pred - t).abs())
            .fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    if let Some((c, score)) = best {
        return (c, score, true);
    }
    let mut fallback = 0;
    for (c, &pred) in predictions.iter().enumerate() {
        if pred < predictions[fallback] {
            fallback = c;
        }
    }
    let score = targets
        .iter()
        .map(|t| (predictions[fallback] - t).abs())
        .fold(f64::INFINITY, f64::min);
    (fallback, score, false)
}

/// Grow `d0` to `s_target` samples, one true evaluation per loop, each time
/// choosing the candidate whose predicted cost best fills the gaps between
/// the costs already in the database.
pub fn osf_expand(problem: &Problem, d0: &TrainingSet, config: &OsfConfig) -> Result<OsfOutcome> {
    if d0.dims() != problem.dims() {
        return Err(SbdError::DimensionMismatch {
            expected: problem.dims(),
            got: d0.dims(),
        });
    }
    if config.s_target < d0.len() {
        return Err(SbdError::InvalidArgument(format!(
            "target size {} smaller than the initial set ({})",
            config.s_target,
            d0.len()
        )));
    }
    let candidates = config.candidates.unwrap_or(100 * problem.dims());
    if candidates == 0 {
        return Err(SbdError::InvalidArgument("at least one candidate is required".into()));
    }
    let mut data = d0.clone();
    let mut selections = Vec::new();
    let mut refit_failures = 0;
    if data.len() == config.s_target {
        return Ok(OsfOutcome {
            data,
            selections,
            refit_failures,
        });
    }

    let mut model: Surrogate = config.model.fit(&data)?;
    let mut loop_index = 0;
    while data.len() < config.s_target {
        if loop_index > 0 {
            match config.model.fit(&data) {
                Ok(m) => model = m,
                Err(err) => {
                    refit_failures += 1;
                    log::warn!("OSF loop {loop_index}: refit failed ({err}); keeping previous model");
                }
            }
        }
        let seed = crate::rng::derive_seed(config.seed, Stream::Candidates, loop_index as u64);
        let plan = lhs(problem.space(), candidates, seed)?;
        let predictions: Vec<f64> = plan.points.par_iter().map(|x| model.evaluate(x)).collect();
        let (chosen, score, feasible) =
            select_osf_candidate(&predictions, data.targets(), config.phi_th);
        let x = plan.points[chosen].clone();
        let actual = problem.evaluate(&x);
        data.push(x.clone(), actual)?;
        selections.push(OsfSelection {
            loop_index,
            x,
            predicted: predictions[chosen],
            actual,
            score,
            feasible,
        });
        loop_index += 1;
    }
    Ok(OsfOutcome {
        data,
        selections,
        refit_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::ackley;

    #[test]
    fn lhs_single_point_in_box() {
        let space = SearchSpace::uniform(3, -1.0, 2.0).unwrap();
        let plan = lhs(&space, 1, 4).unwrap();
        assert_eq!(plan.len(), 1);
        assert!(space.contains(&plan.points[0]));
        assert!(lhs(&space, 0, 4).is_err());
    }

    #[test]
    fn lhs_unit_strata() {
        let space = SearchSpace::uniform(1, 0.0, 10.0).unwrap();
        let plan = lhs(&space, 10, 99).unwrap();
        let mut cells: Vec<usize> = plan.points.iter().map(|p| p[0].floor() as usize).collect();
        cells.sort_unstable();
        assert_eq!(cells, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn lhs_is_deterministic() {
        let space = SearchSpace::uniform(4, 0.0, 1.0).unwrap();
        assert_eq!(lhs(&space, 17, 5).unwrap(), lhs(&space, 17, 5).unwrap());
        assert_ne!(lhs(&space, 17, 5).unwrap(), lhs(&space, 17, 6).unwrap());
    }

    #[test]
    fn grid_sizes() {
        let space = SearchSpace::uniform(5, 0.0, 1.0).unwrap();
        assert_eq!(full_factorial(&space, 10, None).unwrap().len(), 100_000);
        let one = SearchSpace::uniform(1, -2.0, 3.0).unwrap();
        assert_eq!(full_factorial(&one, 2, None).unwrap().points, vec![vec![-2.0], vec![3.0]]);
        let two = SearchSpace::uniform(2, 0.0, 1.0).unwrap();
        let grid = full_factorial(&two, 3, None).unwrap();
        assert_eq!(grid.len(), 9);
        for a in [0.0, 0.5, 1.0] {
            for b in [0.0, 0.5, 1.0] {
                assert!(grid.points.contains(&vec![a, b]));
            }
        }
        let big = SearchSpace::uniform(7, 0.0, 1.0).unwrap();
        assert!(matches!(
            full_factorial(&big, 10, None),
            Err(SbdError::GridTooLarge { .. })
        ));
        assert!(full_factorial(&two, 1, None).is_err());
    }

    #[test]
    fn plan_csv_header() {
        let space = SearchSpace::uniform(2, 0.0, 1.0).unwrap();
        let csv = full_factorial(&space, 2, None).unwrap().to_csv();
        assert!(csv.starts_with("x1,x2\n0.0,0.0\n"));
    }

    #[test]
    fn candidate_selection_rules() {
        let targets = [0.0, 5.0];
        // candidate 2 is farthest from both targets but violates the threshold
        let (c, score, feasible) = select_osf_candidate(&[1.0, 2.5, 9.0], &targets, 6.0);
        assert_eq!((c, feasible), (1, true));
        assert_eq!(score, 2.5);
        // ties go to the lowest index
        let (c, _, _) = select_osf_candidate(&[2.5, 2.5], &targets, 6.0);
        assert_eq!(c, 0);
        // singleton
        assert_eq!(select_osf_candidate(&[3.0], &targets, 6.0).0, 0);
        // nothing feasible: lowest prediction
        let (c, _, feasible) = select_osf_candidate(&[8.0, 7.0, 9.0], &targets, 6.0);
        assert_eq!((c, feasible), (1, false));
        // infinite threshold never rejects
        let (c, _, feasible) = select_osf_candidate(&[1.0, 2.5, 9.0], &targets, f64::INFINITY);
        assert_eq!((c, feasible), (2, true));
    }

    fn ackley_problem() -> Problem {
        Problem::new(SearchSpace::uniform(1, -5.0, 5.0).unwrap(), ackley)
    }

    #[test]
    fn osf_noop_when_target_reached() {
        let problem = ackley_problem();
        let d0 = evaluate_plan(&problem, &lhs(problem.space(), 5, 1).unwrap()).unwrap();
        let before = problem.eval_count();
        let out = osf_expand(&problem, &d0, &OsfConfig::new(5, 6.0, 1)).unwrap();
        assert_eq!(out.data, d0);
        assert_eq!(problem.eval_count(), before);
    }

    #[test]
    fn osf_prefix_and_ledger() {
        let problem = ackley_problem();
        let d0 = evaluate_plan(&problem, &lhs(problem.space(), 5, 2).unwrap()).unwrap();
        let before = problem.eval_count();
        let mut cfg = OsfConfig::new(15, 6.0, 2);
        cfg.candidates = Some(50);
        let out = osf_expand(&problem, &d0, &cfg).unwrap();
        assert_eq!(out.data.len(), 15);
        assert_eq!(problem.eval_count() - before, 10);
        assert_eq!(&out.data.inputs()[..5], d0.inputs());
        assert_eq!(&out.data.targets()[..5], d0.targets());
        for s in &out.selections {
            assert!(!s.feasible || s.predicted <= 6.0);
        }
    }

    #[test]
    fn osf_single_candidate() {
        let problem = ackley_problem();
        let d0 = evaluate_plan(&problem, &lhs(problem.space(), 5, 3).unwrap()).unwrap();
        let mut cfg = OsfConfig::new(7, f64::INFINITY, 3);
        cfg.candidates = Some(1);
        let out = osf_expand(&problem, &d0, &cfg).unwrap();
        assert_eq!(out.selections.len(), 2);
        assert!(out.selections.iter().all(|s| s.feasible));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn lhs_fills_every_stratum_once(dims in 1usize..5, n in 1usize..40, seed in any::<u64>()) {
                let space = SearchSpace::uniform(dims, -3.0, 7.0).unwrap();
                let plan = lhs(&space, n, seed).unwrap();
                prop_assert_eq!(plan.len(), n);
                for k in 0..dims {
                    let mut seen = vec![false; n];
                    for p in &plan.points {
                        prop_assert!(space.contains(p));
                        let s = stratum_index(&space, k, n, p[k]);
                        prop_assert!(!seen[s]);
                        seen[s] = true;
                    }
                }
            }
        }
    }
}

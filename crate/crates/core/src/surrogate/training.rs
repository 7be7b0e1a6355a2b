use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};

/// Ordered database of (design, cost) samples sharing one dimension.
///
/// Inputs are unique: re-submitting an existing design overwrites its cost
/// in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    dims: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(dims: usize) -> Self {
        Self {
            dims,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn from_samples(samples: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let dims = samples.first().map(|(x, _)| x.len()).ok_or(SbdError::EmptyTrainingSet)?;
        let mut set = Self::new(dims);
        for (x, phi) in samples {
            set.push(x, phi)?;
        }
        Ok(set)
    }

    /// Append a sample. Returns `false` when `x` was already present and its
    /// cost was overwritten instead.
    pub fn push(&mut self, x: Vec<f64>, cost: f64) -> Result<bool> {
        if x.len() != self.dims {
            return Err(SbdError::DimensionMismatch {
                expected: self.dims,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) || !cost.is_finite() {
            return Err(SbdError::InvalidArgument("non-finite training sample".into()));
        }
        if let Some(pos) = self.inputs.iter().position(|existing| *existing == x) {
            self.targets[pos] = cost;
            return Ok(false);
        }
        self.inputs.push(x);
        self.targets.push(cost);
        Ok(true)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inputs.iter().map(Vec::as_slice).zip(self.targets.iter().copied())
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.targets.iter().copied().reduce(f64::min)
    }

    /// Index of the lowest-cost sample (first one on ties).
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, t) in self.targets.iter().enumerate() {
            if best.is_none_or(|b| *t < self.targets[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn target_range(&self) -> f64 {
        let min = self.targets.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.targets.is_empty() {
            0.0
        } else {
            max - min
        }
    }

    /// CSV with header `x1,...,xK,phi`; floats use shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dims).map(|k| format!("x{k}")).collect();
        let _ = writeln!(out, "{},phi", header.join(","));
        for (x, phi) in self.iter() {
            for v in x {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{phi:?}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SbdError::Parse("missing header".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || *cols.last().unwrap() != "phi" {
            return Err(SbdError::Parse("header must be `x1,...,xK,phi`".into()));
        }
        let dims = cols.len() - 1;
        for (k, c) in cols[..dims].iter().enumerate() {
            if *c != format!("x{}", k + 1) {
                return Err(SbdError::Parse(format!("unexpected column `{c}`")));
            }
        }
        let mut set = Self::new(dims);
        for (n, line) in lines.enumerate() {
            let values = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| SbdError::Parse(format!("line {}: {e}", n + 2)))?;
            if values.len() != dims + 1 {
                return Err(SbdError::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    n + 2,
                    dims + 1,
                    values.len()
                )));
            }
            let phi = values[dims];
            set.push(values[..dims].to_vec(), phi)?;
        }
        Ok(set)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_merge_keeping_latest() {
        let mut set = TrainingSet::new(2);
        assert!(set.push(vec![0.0, 1.0], 3.0).unwrap());
        assert!(set.push(vec![1.0, 1.0], 2.0).unwrap());
        assert!(!set.push(vec![0.0, 1.0], 5.0).unwrap());
        assert_eq!(set.len(), 2);
        assert_eq!(set.targets(), &[5.0, 2.0]);
        assert_eq!(set.best_index(), Some(1));
        assert!(set.push(vec![0.0], 1.0).is_err());
        assert!(set.push(vec![0.0, f64::NAN], 1.0).is_err());
    }

    #[test]
    fn csv_header_and_errors() {
        let set = TrainingSet::from_samples(vec![(vec![0.1, 0.2], 1.5)]).unwrap();
        let csv = set.to_csv();
        assert!(csv.starts_with("x1,x2,phi\n"));
        assert!(TrainingSet::from_csv("a,b\n1,2\n").is_err());
        assert!(TrainingSet::from_csv("x1,phi\n1,2,3\n").is_err());
        assert!(TrainingSet::from_csv("x1,phi\n1,abc\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), -1e9f64..1e9), 1..20)
        ) {
            let set = TrainingSet::from_samples(rows).unwrap();
            let back = TrainingSet::from_csv(&set.to_csv()).unwrap();
            prop_assert_eq!(back, set);
        }
    }
}

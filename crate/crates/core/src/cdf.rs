//! Empirical CDF tables shared by the corpus and scoring reports.

use crate::{Error, Result};

/// Step function of an empirical distribution: sorted `(value, cumulative
/// fraction)` pairs. `total == 0` marks the explicit empty case.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub steps: Vec<(f64, f64)>,
    pub total: usize,
}

impl CdfTable {
    pub fn from_values(values: &[f64]) -> Self {
        let total = values.len();
        if total == 0 {
            return CdfTable {
                steps: Vec::new(),
                total: 0,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in CDF input"));
        let mut steps: Vec<(f64, f64)> = Vec::new();
        let mut seen = 0usize;
        for &v in &sorted {
            seen += 1;
            match steps.last_mut() {
                Some(last) if last.0 == v => last.1 = seen as f64 / total as f64,
                _ => steps.push((v, seen as f64 / total as f64)),
            }
        }
        CdfTable { steps, total }
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Cumulative fractions must be nondecreasing and end at 1 for
    /// nonempty tables.
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for &(v, f) in &self.steps {
            if f < prev {
                return Err(Error::NonMonotoneCdf { value: v });
            }
            prev = f;
        }
        if !self.is_empty() && (prev - 1.0).abs() > 1e-9 {
            return Err(Error::NonMonotoneCdf { value: prev });
        }
        Ok(())
    }

    /// Kolmogorov distance to the uniform distribution on [0, 1].
    pub fn kolmogorov_to_uniform(&self) -> f64 {
        let mut max = 0.0f64;
        let mut prev_frac = 0.0;
        for &(v, f) in &self.steps {
            // sup over the step: compare the uniform CDF against both the
            // fraction before and after the jump at v
            max = max.max((v.clamp(0.0, 1.0) - prev_frac).abs());
            max = max.max((v.clamp(0.0, 1.0) - f).abs());
            prev_frac = f;
        }
        max
    }
}

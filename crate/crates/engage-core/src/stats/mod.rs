//! Nonparametric tests, effect sizes, and achievement-gap arithmetic used by
//! the trial report.

mod categorical;
mod effect;
mod rank;

pub use categorical::{bonferroni, chi_square, ChiSquare, ContingencyTable};
pub use effect::{effect_size_a, gap_metrics, median_split, EffectSize, GapMetrics, MedianSplit};
pub use rank::{kruskal_wallis, mann_whitney, KruskalWallis, MannWhitney};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A labeled batch of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Sample {
        Sample {
            label: label.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn sd(&self) -> f64 {
        if self.values.len() < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (self.values.len() - 1) as f64).sqrt()
    }
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample {label:?} is empty")]
    EmptySample { label: String },
    #[error("sample {label:?} contains a non-finite value")]
    NonFinite { label: String },
    #[error("need at least two groups")]
    TooFewGroups,
    #[error("contingency table is degenerate: {reason}")]
    DegenerateTable { reason: String },
    #[error("pretest gap is zero, reduction is undefined")]
    ZeroPreGap,
    #[error("need at least two students")]
    TooFewStudents,
}

fn check_sample(sample: &Sample) -> Result<(), StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample {
            label: sample.label.clone(),
        });
    }
    if sample.values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite {
            label: sample.label.clone(),
        });
    }
    Ok(())
}

/// Midranks of the pooled values, returned in input order.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).unwrap());
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of tied groups in the pooled values.
fn tie_sizes(pooled: &[f64]) -> Vec<usize> {
    let mut sorted = pooled.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        if j > i {
            sizes.push(j - i + 1);
        }
        i = j + 1;
    }
    sizes
}

//! Pearson chi-square over group-by-category counts, and the Bonferroni
//! family-wise adjustment.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::StatsError;

/// Counts per group (row) and category (column).
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    rows: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

impl ContingencyTable {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<ContingencyTable, StatsError> {
        if rows.len() < 2 {
            return Err(StatsError::DegenerateTable {
                reason: "fewer than two rows".into(),
            });
        }
        let width = rows[0].len();
        if width < 2 {
            return Err(StatsError::DegenerateTable {
                reason: "fewer than two columns".into(),
            });
        }
        if rows.iter().any(|r| r.len() != width) {
            return Err(StatsError::DegenerateTable {
                reason: "ragged rows".into(),
            });
        }
        if rows.iter().any(|r| r.iter().all(|&c| c == 0)) {
            return Err(StatsError::DegenerateTable {
                reason: "all-zero row".into(),
            });
        }
        for col in 0..width {
            if rows.iter().all(|r| r[col] == 0) {
                return Err(StatsError::DegenerateTable {
                    reason: "all-zero column".into(),
                });
            }
        }
        Ok(ContingencyTable { rows })
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }
}

/// Pearson chi-square test of homogeneity. A 2x2 table gets the continuity
/// correction, clamped so exact agreement still scores zero; wider tables
/// use the plain statistic.
pub fn chi_square(table: &ContingencyTable) -> ChiSquare {
    let rows = table.rows();
    let n_rows = rows.len();
    let n_cols = rows[0].len();
    let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..n_cols)
        .map(|c| rows.iter().map(|r| r[c] as f64).sum())
        .collect();
    let total: f64 = row_sums.iter().sum();
    let yates = n_rows == 2 && n_cols == 2;
    let mut chi2 = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            let mut dev = (observed as f64 - expected).abs();
            if yates {
                dev = (dev - 0.5).max(0.0);
            }
            chi2 += dev * dev / expected;
        }
    }
    let df = (n_rows - 1) * (n_cols - 1);
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(chi2);
    ChiSquare {
        chi2,
        df,
        p: p.clamp(0.0, 1.0),
    }
}

/// Family-wise adjustment: each p is scaled by the comparison count and
/// capped at one. `m` may exceed the list length when some comparisons are
/// reported elsewhere.
pub fn bonferroni(p_values: &[f64], m: usize) -> Vec<f64> {
    assert!(
        m >= p_values.len(),
        "comparison count below number of p-values"
    );
    p_values.iter().map(|p| (p * m as f64).min(1.0)).collect()
}

//! Rank-based two-sample and k-sample tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{check_sample, midranks, tie_sizes, Sample, StatsError};

/// How many pooled observations still get the exact permutation p-value.
const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    /// True when the p-value came from full enumeration rather than the
    /// normal approximation.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalWallis {
    pub h: f64,
    pub df: usize,
    pub p: f64,
}

/// Two-sided Mann-Whitney with midrank ties. Exact by enumeration for small
/// pooled sizes, otherwise the normal approximation with tie and continuity
/// corrections.
pub fn mann_whitney(x: &Sample, y: &Sample) -> Result<MannWhitney, StatsError> {
    check_sample(x)?;
    check_sample(y)?;
    let n = x.len();
    let m = y.len();
    let pooled: Vec<f64> = x.values.iter().chain(y.values.iter()).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_x: f64 = ranks[..n].iter().sum();
    let u = rank_sum_x - (n * (n + 1)) as f64 / 2.0;

    if n + m <= EXACT_LIMIT {
        let p = exact_two_sided_p(&ranks, n, u);
        return Ok(MannWhitney {
            u,
            p_two_sided: p,
            exact: true,
        });
    }

    let nm = (n * m) as f64;
    let big_n = (n + m) as f64;
    let tie_term: f64 = tie_sizes(&pooled)
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum::<f64>()
        / (big_n * (big_n - 1.0));
    let variance = nm / 12.0 * ((big_n + 1.0) - tie_term);
    if variance <= 0.0 {
        // Every pooled value identical: no evidence either way.
        return Ok(MannWhitney {
            u,
            p_two_sided: 1.0,
            exact: false,
        });
    }
    let mean = nm / 2.0;
    let shifted = u - mean;
    // Continuity correction of half a unit toward the mean.
    let corrected = if shifted > 0.0 {
        (shifted - 0.5).max(0.0)
    } else {
        (shifted + 0.5).min(0.0)
    };
    let z = corrected / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let p = (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0);
    Ok(MannWhitney {
        u,
        p_two_sided: p,
        exact: false,
    })
}

/// Exact two-sided p by counting size-`n` subsets of the pooled ranks at or
/// beyond the observed U in either tail. Subset counts come from a
/// subset-sum table over doubled ranks, which are integers even with
/// midrank ties.
fn exact_two_sided_p(ranks: &[f64], n: usize, u_observed: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled-rank sum s.
    let mut counts = vec![vec![0u64; total + 1]; n + 1];
    counts[0][0] = 1;
    for &w in &doubled {
        for k in (0..n).rev() {
            for s in (0..=total - w).rev() {
                if counts[k][s] > 0 {
                    counts[k + 1][s + w] += counts[k][s];
                }
            }
        }
    }
    let offset = n * (n + 1);
    let mut at_or_below = 0u64;
    let mut at_or_above = 0u64;
    let mut all = 0u64;
    for (s, &c) in counts[n].iter().enumerate() {
        if c == 0 {
            continue;
        }
        all += c;
        // Doubled U for this subset sum; compare in doubled units.
        let u2 = s as i64 - offset as i64;
        let observed2 = (2.0 * u_observed).round() as i64;
        if u2 <= observed2 {
            at_or_below += c;
        }
        if u2 >= observed2 {
            at_or_above += c;
        }
    }
    let tail = at_or_below.min(at_or_above) as f64 / all as f64;
    (2.0 * tail).min(1.0)
}

/// Kruskal-Wallis H with tie correction; p from the chi-square distribution
/// with k - 1 degrees of freedom.
pub fn kruskal_wallis(groups: &[Sample]) -> Result<KruskalWallis, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    for g in groups {
        check_sample(g)?;
    }
    let pooled: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.values.iter().copied())
        .collect();
    let big_n = pooled.len() as f64;
    let ranks = midranks(&pooled);
    let mut h = 0.0;
    let mut start = 0;
    for g in groups {
        let rank_sum: f64 = ranks[start..start + g.len()].iter().sum();
        h += rank_sum * rank_sum / g.len() as f64;
        start += g.len();
    }
    h = 12.0 / (big_n * (big_n + 1.0)) * h - 3.0 * (big_n + 1.0);
    let tie_divisor = 1.0
        - tie_sizes(&pooled)
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum::<f64>()
            / (big_n * big_n * big_n - big_n);
    let h = if tie_divisor > 0.0 {
        h / tie_divisor
    } else {
        // All observations identical.
        0.0
    };
    let df = groups.len() - 1;
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(h.max(0.0));
    Ok(KruskalWallis {
        h,
        df,
        p: p.clamp(0.0, 1.0),
    })
}

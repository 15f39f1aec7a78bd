//! The trial's result tables: section times and served problem types,
//! posttest outcome comparisons, and the prior-knowledge gap analysis.
//!
//! Everything is computed once into an [`ExperimentReport`], then rendered
//! either as an aligned text page or as tab-delimited blocks. Both renderings
//! are deterministic for a given input, down to the bootstrap draws behind
//! each confidence interval, which are seeded from the master seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scoring::{nlg, ProblemKind};
use crate::sim::{AttemptRow, Condition, SessionLog, SlotRole};
use crate::stats::{
    bonferroni, chi_square, effect_size_a, gap_metrics, kruskal_wallis, mann_whitney, median_split,
    ChiSquare, ContingencyTable, EffectSize, GapMetrics, KruskalWallis, Sample, StatsError,
};
use crate::{derive_seed, seeded_rng};

const BOOTSTRAP_ITERS: usize = 1000;
/// Planned pairwise comparisons per family; the Bonferroni multiplier.
const PAIRWISE_FAMILY: usize = 3;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("trial is incomplete: {reason}")]
    IncompleteTrial { reason: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// A mean together with the spread and count it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let sample = Sample::new("", values.to_vec());
        Some(MeanSd {
            mean: sample.mean(),
            sd: sample.sd(),
            n: values.len(),
        })
    }

    fn cell(&self, decimals: usize) -> String {
        format!("{:.d$} ({:.d$})", self.mean, self.sd, d = decimals)
    }
}

/// One condition's row of section times and served training types.
#[derive(Debug, Clone)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n: usize,
    pub training_hours: MeanSd,
    pub level_test_hours: MeanSd,
    pub posttest_hours: MeanSd,
    /// Served training problems, in [`ProblemKind::ALL`] order.
    pub type_counts: [u64; 3],
    pub type_percents: [f64; 3],
}

/// Pairwise homogeneity test between two conditions' type counts.
#[derive(Debug, Clone)]
pub struct TypeTest {
    pub a: Condition,
    pub b: Condition,
    pub outcome: TypeTestOutcome,
}

#[derive(Debug, Clone)]
pub enum TypeTestOutcome {
    Tested {
        chi2: f64,
        df: usize,
        p_raw: f64,
        p_adjusted: f64,
    },
    /// The pair's table had an empty row or column, so the test is undefined.
    Skipped { reason: String },
}

/// Posttest outcome columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Mean posttest composite.
    Score,
    /// Normalized learning gain from pretest to posttest.
    Gain,
    /// Rule accuracy over posttest applications, as a percentage.
    Accuracy,
    /// Minutes per posttest problem.
    TimeMinutes,
    /// Steps per posttest problem.
    Steps,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Score,
        Metric::Gain,
        Metric::Accuracy,
        Metric::TimeMinutes,
        Metric::Steps,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Score => "Score",
            Metric::Gain => "NLG",
            Metric::Accuracy => "Rule Acc.",
            Metric::TimeMinutes => "Time (min)",
            Metric::Steps => "Steps",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Metric::Score => "score",
            Metric::Gain => "nlg",
            Metric::Accuracy => "ruleAccuracy",
            Metric::TimeMinutes => "timeMinutes",
            Metric::Steps => "steps",
        }
    }

    fn decimals(self) -> usize {
        match self {
            Metric::Gain => 2,
            _ => 1,
        }
    }
}

/// One condition's cell in an outcome column, with its significance mark
/// against Control.
#[derive(Debug, Clone)]
pub struct MetricCell {
    pub condition: Condition,
    pub stats: MeanSd,
    pub star: &'static str,
}

#[derive(Debug, Clone)]
pub struct MetricComparison {
    pub a: Condition,
    pub b: Condition,
    pub u: f64,
    pub exact: bool,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub effect: EffectSize,
}

#[derive(Debug, Clone)]
pub struct MetricBlock {
    pub metric: Metric,
    pub cells: Vec<MetricCell>,
    pub omnibus: KruskalWallis,
    pub pairwise: Vec<MetricComparison>,
}

/// Pretest median-split side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prior {
    High,
    Low,
}

impl Prior {
    pub fn label(self) -> &'static str {
        match self {
            Prior::High => "High",
            Prior::Low => "Low",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubgroupRow {
    pub prior: Prior,
    pub condition: Condition,
    pub n: usize,
    pub pretest: Option<MeanSd>,
    pub posttest: Option<MeanSd>,
}

#[derive(Debug, Clone)]
pub struct GapRow {
    pub condition: Condition,
    /// None when a subgroup is empty or the pretest gap is zero.
    pub gap: Option<GapMetrics>,
}

/// The full result tables for one finished trial.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub conditions: Vec<ConditionSummary>,
    pub type_tests: Vec<TypeTest>,
    pub metrics: Vec<MetricBlock>,
    pub pretest_median: f64,
    pub subgroups: Vec<SubgroupRow>,
    pub gaps: Vec<GapRow>,
    /// Students whose gain is undefined because they aced the pretest.
    pub nlg_excluded: usize,
}

fn star_mark(p_adjusted: f64) -> &'static str {
    if p_adjusted < 0.05 {
        "*"
    } else if p_adjusted < 0.10 {
        "†"
    } else {
        ""
    }
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn accuracy_percent(row: &AttemptRow) -> f64 {
    if row.applications.is_empty() {
        return 100.0;
    }
    let correct = row.applications.iter().filter(|a| a.correct).count();
    100.0 * correct as f64 / row.applications.len() as f64
}

fn posttest_mean(log: &SessionLog, value: impl Fn(&AttemptRow) -> f64) -> f64 {
    let rows: Vec<f64> = log
        .rows
        .iter()
        .filter(|r| r.role == SlotRole::Posttest)
        .map(value)
        .collect();
    rows.iter().sum::<f64>() / rows.len() as f64
}

fn metric_values(metric: Metric, group: &[&SessionLog]) -> (Vec<f64>, usize) {
    let mut excluded = 0;
    let mut values = Vec::with_capacity(group.len());
    for log in group {
        match metric {
            Metric::Score => values.push(log.posttest),
            Metric::Gain => match nlg(log.pretest, log.posttest) {
                Ok(v) => values.push(v),
                Err(_) => excluded += 1,
            },
            Metric::Accuracy => values.push(posttest_mean(log, accuracy_percent)),
            Metric::TimeMinutes => values.push(posttest_mean(log, |r| r.duration / 60.0)),
            Metric::Steps => values.push(posttest_mean(log, |r| r.steps as f64)),
        }
    }
    (values, excluded)
}

const PAIRS: [(usize, usize); PAIRWISE_FAMILY] = [(0, 1), (0, 2), (1, 2)];

impl ExperimentReport {
    pub fn from_logs(
        logs: &[SessionLog],
        config_hash: &str,
        master_seed: u64,
    ) -> Result<ExperimentReport, ReportError> {
        let mut groups: BTreeMap<Condition, Vec<&SessionLog>> = BTreeMap::new();
        for log in logs {
            groups.entry(log.condition).or_default().push(log);
        }
        for condition in Condition::ALL {
            let n = groups.get(&condition).map_or(0, Vec::len);
            if n < 2 {
                return Err(ReportError::IncompleteTrial {
                    reason: format!("{} has {n} students, need at least 2", condition.label()),
                });
            }
        }
        for log in logs {
            if !log.rows.iter().any(|r| r.role == SlotRole::Posttest) {
                return Err(ReportError::IncompleteTrial {
                    reason: format!("student {} has no posttest rows", log.student_id),
                });
            }
        }

        let mut rng = seeded_rng(derive_seed(master_seed, &["report", "bootstrap"]));

        let mut conditions = Vec::new();
        for condition in Condition::ALL {
            let group = &groups[&condition];
            let hours = |role: SlotRole| {
                let per_student: Vec<f64> = group
                    .iter()
                    .map(|log| {
                        log.rows
                            .iter()
                            .filter(|r| r.role == role)
                            .map(|r| r.duration)
                            .sum::<f64>()
                            / 3600.0
                    })
                    .collect();
                MeanSd::of(&per_student).expect("condition group is non-empty")
            };
            let mut type_counts = [0u64; 3];
            for log in group.iter() {
                for row in log.rows.iter().filter(|r| r.role == SlotRole::Training) {
                    let slot = ProblemKind::ALL
                        .iter()
                        .position(|&k| k == row.kind)
                        .expect("every kind is listed");
                    type_counts[slot] += 1;
                }
            }
            let total: u64 = type_counts.iter().sum();
            if total == 0 {
                return Err(ReportError::IncompleteTrial {
                    reason: format!("{} has no training rows", condition.label()),
                });
            }
            let type_percents = type_counts.map(|c| 100.0 * c as f64 / total as f64);
            conditions.push(ConditionSummary {
                condition,
                n: group.len(),
                training_hours: hours(SlotRole::Training),
                level_test_hours: hours(SlotRole::LevelTest),
                posttest_hours: hours(SlotRole::Posttest),
                type_counts,
                type_percents,
            });
        }

        let partial: Vec<Result<ChiSquare, String>> = PAIRS
            .iter()
            .map(|&(i, j)| {
                ContingencyTable::new(vec![
                    conditions[i].type_counts.to_vec(),
                    conditions[j].type_counts.to_vec(),
                ])
                .map(|table| chi_square(&table))
                .map_err(|e| e.to_string())
            })
            .collect();
        let raw_ps: Vec<f64> = partial
            .iter()
            .filter_map(|r| r.as_ref().ok().map(|c| c.p))
            .collect();
        let adjusted = bonferroni(&raw_ps, PAIRWISE_FAMILY);
        let mut adjusted_iter = adjusted.into_iter();
        let type_tests: Vec<TypeTest> = PAIRS
            .iter()
            .zip(partial)
            .map(|(&(i, j), result)| TypeTest {
                a: conditions[i].condition,
                b: conditions[j].condition,
                outcome: match result {
                    Ok(cs) => TypeTestOutcome::Tested {
                        chi2: cs.chi2,
                        df: cs.df,
                        p_raw: cs.p,
                        p_adjusted: adjusted_iter
                            .next()
                            .expect("one adjusted p per tested pair"),
                    },
                    Err(reason) => TypeTestOutcome::Skipped { reason },
                },
            })
            .collect();

        let mut nlg_excluded = 0;
        let mut metrics = Vec::new();
        for metric in Metric::ALL {
            let mut samples = Vec::new();
            for condition in Condition::ALL {
                let (values, excluded) = metric_values(metric, &groups[&condition]);
                if metric == Metric::Gain {
                    nlg_excluded += excluded;
                }
                if values.is_empty() {
                    return Err(ReportError::IncompleteTrial {
                        reason: format!(
                            "no defined {} values in {}",
                            metric.label(),
                            condition.label()
                        ),
                    });
                }
                samples.push(Sample::new(condition.label(), values));
            }
            let omnibus = kruskal_wallis(&samples)?;

            let mut tested = Vec::new();
            let mut raw_ps = Vec::new();
            for &(i, j) in &PAIRS {
                let mw = mann_whitney(&samples[i], &samples[j])?;
                let effect = effect_size_a(&samples[i], &samples[j], BOOTSTRAP_ITERS, &mut rng)?;
                raw_ps.push(mw.p_two_sided);
                tested.push((i, j, mw, effect));
            }
            let pairwise: Vec<MetricComparison> = tested
                .into_iter()
                .zip(bonferroni(&raw_ps, PAIRWISE_FAMILY))
                .map(|((i, j, mw, effect), p_adjusted)| MetricComparison {
                    a: Condition::ALL[i],
                    b: Condition::ALL[j],
                    u: mw.u,
                    exact: mw.exact,
                    p_raw: mw.p_two_sided,
                    p_adjusted,
                    effect,
                })
                .collect();

            let cells = Condition::ALL
                .iter()
                .enumerate()
                .map(|(k, &condition)| {
                    let stats = MeanSd::of(&samples[k].values).expect("checked non-empty above");
                    let star = pairwise
                        .iter()
                        .find(|c| c.a == Condition::Control && c.b == condition)
                        .map_or("", |c| star_mark(c.p_adjusted));
                    MetricCell {
                        condition,
                        stats,
                        star,
                    }
                })
                .collect();
            metrics.push(MetricBlock {
                metric,
                cells,
                omnibus,
                pairwise,
            });
        }

        let pretests: Vec<(u32, f64)> = logs.iter().map(|l| (l.student_id, l.pretest)).collect();
        let split = median_split(&pretests)?;
        let high: BTreeSet<u32> = split.high.iter().copied().collect();
        let mut subgroups = Vec::new();
        let mut gaps = Vec::new();
        for condition in Condition::ALL {
            let group = &groups[&condition];
            let side = |prior: Prior| {
                let members: Vec<&SessionLog> = group
                    .iter()
                    .filter(|l| high.contains(&l.student_id) == (prior == Prior::High))
                    .copied()
                    .collect();
                let pre: Vec<f64> = members.iter().map(|l| l.pretest).collect();
                let post: Vec<f64> = members.iter().map(|l| l.posttest).collect();
                SubgroupRow {
                    prior,
                    condition,
                    n: members.len(),
                    pretest: MeanSd::of(&pre),
                    posttest: MeanSd::of(&post),
                }
            };
            let high_row = side(Prior::High);
            let low_row = side(Prior::Low);
            let gap = match (
                &high_row.pretest,
                &low_row.pretest,
                &high_row.posttest,
                &low_row.posttest,
            ) {
                (Some(ph), Some(pl), Some(th), Some(tl)) => {
                    gap_metrics(ph.mean, pl.mean, th.mean, tl.mean).ok()
                }
                _ => None,
            };
            subgroups.push(high_row);
            subgroups.push(low_row);
            gaps.push(GapRow { condition, gap });
        }

        Ok(ExperimentReport {
            config_hash: config_hash.to_string(),
            master_seed,
            conditions,
            type_tests,
            metrics,
            pretest_median: split.median,
            subgroups,
            gaps,
            nlg_excluded,
        })
    }

    /// The aligned, human-readable page.
    pub fn render_text(&self) -> String {
        self.to_string()
    }

    /// Tab-delimited blocks with full float precision, for downstream tools.
    pub fn render_delimited(&self) -> String {
        Delimited(self).to_string()
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ADAPTIVE SCAFFOLDING TRIAL REPORT")?;
        writeln!(f, "config  {}", self.config_hash)?;
        writeln!(f, "seed    {}", self.master_seed)?;
        writeln!(f)?;

        writeln!(f, "== Tutor sections and training problem types ==")?;
        writeln!(f)?;
        write!(
            f,
            "{:<15}{:<14}{:<14}{:<14}| ",
            "Group (N)", "Training", "Level-End", "Posttest"
        )?;
        for kind in ProblemKind::ALL {
            write!(f, "{:<15}", kind.label())?;
        }
        writeln!(f)?;
        for row in &self.conditions {
            write!(
                f,
                "{:<15}{:<14}{:<14}{:<14}| ",
                format!("{} ({})", row.condition.label(), row.n),
                row.training_hours.cell(2),
                row.level_test_hours.cell(2),
                row.posttest_hours.cell(2),
            )?;
            for (count, percent) in row.type_counts.iter().zip(row.type_percents) {
                write!(f, "{:<15}", format!("{count} ({percent:.1}%)"))?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "Type distribution, pairwise chi-square (Bonferroni over {PAIRWISE_FAMILY}):"
        )?;
        for test in &self.type_tests {
            match &test.outcome {
                TypeTestOutcome::Tested {
                    chi2,
                    df,
                    p_adjusted,
                    ..
                } => writeln!(
                    f,
                    "  {:<18} chi2({df}) = {chi2:.2}   adj p = {}{}",
                    format!("{} vs {}", test.a.label(), test.b.label()),
                    fmt_p(*p_adjusted),
                    star_mark(*p_adjusted),
                )?,
                TypeTestOutcome::Skipped { reason } => writeln!(
                    f,
                    "  {:<18} not testable: {reason}",
                    format!("{} vs {}", test.a.label(), test.b.label()),
                )?,
            }
        }
        writeln!(f)?;

        writeln!(f, "== Posttest performance per problem, Mean (SD) ==")?;
        writeln!(f)?;
        write!(f, "{:<15}", "Group (N)")?;
        for block in &self.metrics {
            write!(f, "{:<16}", block.metric.label())?;
        }
        writeln!(f)?;
        for (k, condition) in Condition::ALL.iter().enumerate() {
            let n = self.conditions[k].n;
            write!(f, "{:<15}", format!("{} ({n})", condition.label()))?;
            for block in &self.metrics {
                let cell = &block.cells[k];
                write!(
                    f,
                    "{:<16}",
                    format!("{}{}", cell.stats.cell(block.metric.decimals()), cell.star)
                )?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "Kruskal-Wallis omnibus, then Mann-Whitney pairs (Bonferroni over {PAIRWISE_FAMILY}) with A [CI95]:"
        )?;
        for block in &self.metrics {
            writeln!(
                f,
                "  {:<12} H({}) = {:.2}, p = {}",
                block.metric.label(),
                block.omnibus.df,
                block.omnibus.h,
                fmt_p(block.omnibus.p),
            )?;
            for comparison in &block.pairwise {
                writeln!(
                    f,
                    "    {:<18} U = {:<9} adj p = {}{:<4} A = {:.2} [{:.2}, {:.2}]",
                    format!("{} vs {}", comparison.a.label(), comparison.b.label()),
                    format!("{:.1}", comparison.u),
                    fmt_p(comparison.p_adjusted),
                    star_mark(comparison.p_adjusted),
                    comparison.effect.a,
                    comparison.effect.ci95.0,
                    comparison.effect.ci95.1,
                )?;
            }
        }
        writeln!(f)?;

        writeln!(
            f,
            "== Prior-knowledge subgroups (pretest median split at {:.1}) ==",
            self.pretest_median
        )?;
        writeln!(f)?;
        writeln!(
            f,
            "{:<15}{:>4}   {:<15}{:<15}",
            "Group", "N", "Pretest", "Posttest"
        )?;
        for row in &self.subgroups {
            let cell = |m: &Option<MeanSd>| m.as_ref().map_or("-".to_string(), |m| m.cell(1));
            writeln!(
                f,
                "{:<15}{:>4}   {:<15}{:<15}",
                format!("{}-{}", row.prior.label(), row.condition.label()),
                row.n,
                cell(&row.pretest),
                cell(&row.posttest),
            )?;
        }
        writeln!(f)?;
        writeln!(f, "Achievement gap between High and Low, by condition:")?;
        for row in &self.gaps {
            match &row.gap {
                Some(g) => writeln!(
                    f,
                    "  {:<9} pre gap {:.1}   post gap {:.1}   reduction {:.1}%",
                    row.condition.label(),
                    g.pre_gap,
                    g.post_gap,
                    g.reduction_percent,
                )?,
                None => writeln!(
                    f,
                    "  {:<9} not defined (empty subgroup or zero pretest gap)",
                    row.condition.label(),
                )?,
            }
        }
        writeln!(f)?;

        writeln!(f, "Notes:")?;
        writeln!(f, "  * adjusted p < .05, † adjusted p < .10.")?;
        writeln!(
            f,
            "  Pairwise p-values are Bonferroni-adjusted within each family of {PAIRWISE_FAMILY}; table stars compare against Control."
        )?;
        writeln!(
            f,
            "  Chi-square uses the continuity correction for 2x2 tables only; the type tables above are 2x3, uncorrected."
        )?;
        if self.nlg_excluded > 0 {
            writeln!(
                f,
                "  NLG is undefined at a pretest of 100; {} student(s) excluded from that column.",
                self.nlg_excluded
            )?;
        }
        Ok(())
    }
}

struct Delimited<'a>(&'a ExperimentReport);

impl fmt::Display for Delimited<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let report = self.0;
        writeln!(f, "# adaptive scaffolding trial report")?;
        writeln!(f, "configHash\t{}", report.config_hash)?;
        writeln!(f, "masterSeed\t{}", report.master_seed)?;

        writeln!(f, "\n[sections]")?;
        writeln!(
            f,
            "condition\tn\ttrainingMean\ttrainingSd\tlevelTestMean\tlevelTestSd\tposttestMean\tposttestSd"
        )?;
        for row in &report.conditions {
            writeln!(
                f,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                row.condition.label(),
                row.n,
                row.training_hours.mean,
                row.training_hours.sd,
                row.level_test_hours.mean,
                row.level_test_hours.sd,
                row.posttest_hours.mean,
                row.posttest_hours.sd,
            )?;
        }

        writeln!(f, "\n[types]")?;
        write!(f, "condition")?;
        for kind in ProblemKind::ALL {
            let key = kind.label().to_lowercase();
            write!(f, "\t{key}Count\t{key}Percent")?;
        }
        writeln!(f)?;
        for row in &report.conditions {
            write!(f, "{}", row.condition.label())?;
            for (count, percent) in row.type_counts.iter().zip(row.type_percents) {
                write!(f, "\t{count}\t{percent:.6}")?;
            }
            writeln!(f)?;
        }

        writeln!(f, "\n[typeTests]")?;
        writeln!(f, "pair\tchi2\tdf\tpRaw\tpAdjusted")?;
        for test in &report.type_tests {
            let pair = format!("{}-{}", test.a.label(), test.b.label());
            match &test.outcome {
                TypeTestOutcome::Tested {
                    chi2,
                    df,
                    p_raw,
                    p_adjusted,
                } => writeln!(f, "{pair}\t{chi2:.6}\t{df}\t{p_raw:.6}\t{p_adjusted:.6}")?,
                TypeTestOutcome::Skipped { .. } => writeln!(f, "{pair}\tna\tna\tna\tna")?,
            }
        }

        writeln!(f, "\n[outcomes]")?;
        writeln!(f, "metric\tcondition\tn\tmean\tsd\tsignificance")?;
        for block in &report.metrics {
            for cell in &block.cells {
                writeln!(
                    f,
                    "{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
                    block.metric.key(),
                    cell.condition.label(),
                    cell.stats.n,
                    cell.stats.mean,
                    cell.stats.sd,
                    cell.star,
                )?;
            }
        }

        writeln!(f, "\n[outcomeTests]")?;
        writeln!(
            f,
            "metric\tpair\tu\texact\tpRaw\tpAdjusted\ta\tciLow\tciHigh"
        )?;
        for block in &report.metrics {
            for c in &block.pairwise {
                writeln!(
                    f,
                    "{}\t{}-{}\t{:.6}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                    block.metric.key(),
                    c.a.label(),
                    c.b.label(),
                    c.u,
                    c.exact,
                    c.p_raw,
                    c.p_adjusted,
                    c.effect.a,
                    c.effect.ci95.0,
                    c.effect.ci95.1,
                )?;
            }
        }

        writeln!(f, "\n[omnibus]")?;
        writeln!(f, "metric\th\tdf\tp")?;
        for block in &report.metrics {
            writeln!(
                f,
                "{}\t{:.6}\t{}\t{:.6}",
                block.metric.key(),
                block.omnibus.h,
                block.omnibus.df,
                block.omnibus.p,
            )?;
        }

        writeln!(f, "\n[subgroups]")?;
        writeln!(
            f,
            "prior\tcondition\tn\tpretestMean\tpretestSd\tposttestMean\tposttestSd"
        )?;
        for row in &report.subgroups {
            let col = |m: &Option<MeanSd>, pick: fn(&MeanSd) -> f64| {
                m.as_ref()
                    .map_or("na".to_string(), |m| format!("{:.6}", pick(m)))
            };
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                row.prior.label(),
                row.condition.label(),
                row.n,
                col(&row.pretest, |m| m.mean),
                col(&row.pretest, |m| m.sd),
                col(&row.posttest, |m| m.mean),
                col(&row.posttest, |m| m.sd),
            )?;
        }

        writeln!(f, "\n[gaps]")?;
        writeln!(f, "condition\tpreGap\tpostGap\treductionPercent")?;
        for row in &report.gaps {
            match &row.gap {
                Some(g) => writeln!(
                    f,
                    "{}\t{:.6}\t{:.6}\t{:.6}",
                    row.condition.label(),
                    g.pre_gap,
                    g.post_gap,
                    g.reduction_percent,
                )?,
                None => writeln!(f, "{}\tna\tna\tna", row.condition.label())?,
            }
        }

        writeln!(f, "\n[notes]")?;
        writeln!(f, "pretestMedian\t{:.6}", report.pretest_median)?;
        writeln!(f, "nlgExcluded\t{}", report.nlg_excluded)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Rule;
    use crate::scoring::RuleApplication;
    use crate::sim::Condition;

    fn row(
        role: SlotRole,
        kind: ProblemKind,
        duration: f64,
        steps: usize,
        correct: usize,
        wrong: usize,
    ) -> AttemptRow {
        let mut applications = Vec::new();
        for _ in 0..correct {
            applications.push(RuleApplication {
                rule: Rule::ModusPonens,
                correct: true,
            });
        }
        for _ in 0..wrong {
            applications.push(RuleApplication {
                rule: Rule::ModusPonens,
                correct: false,
            });
        }
        AttemptRow {
            student_id: 0,
            condition: Condition::Control,
            level: 2,
            slot: 1,
            role,
            problem_id: "p".into(),
            kind,
            passive: false,
            applications,
            steps,
            duration,
            hints: 0,
            composite: None,
            mastery: BTreeMap::new(),
            decision: None,
        }
    }

    fn log(id: u32, condition: Condition, pretest: f64, posttest: f64) -> SessionLog {
        let mut rows = Vec::new();
        for i in 0..15 {
            rows.push(row(
                SlotRole::Training,
                ProblemKind::ALL[(i + id as usize) % 3],
                300.0 + 10.0 * i as f64,
                5,
                4,
                1,
            ));
        }
        for _ in 0..5 {
            rows.push(row(SlotRole::LevelTest, ProblemKind::Ps, 400.0, 6, 5, 1));
        }
        for i in 0..6 {
            rows.push(row(
                SlotRole::Posttest,
                ProblemKind::Ps,
                420.0 + posttest,
                5 + i % 2,
                5,
                usize::from(posttest < 50.0),
            ));
        }
        SessionLog {
            student_id: id,
            condition,
            rows,
            decisions: Vec::new(),
            pretest,
            level_tests: BTreeMap::new(),
            posttest_scores: Vec::new(),
            posttest,
        }
    }

    fn trial_logs() -> Vec<SessionLog> {
        let mut logs = Vec::new();
        let posts = [
            [55.0, 61.0, 48.0, 66.0],
            [70.0, 77.0, 64.0, 81.0],
            [72.0, 68.0, 75.0, 79.0],
        ];
        let pres = [40.0, 62.0, 48.0, 75.0];
        for (c, condition) in Condition::ALL.into_iter().enumerate() {
            for s in 0..4 {
                let id = (c * 4 + s + 1) as u32;
                logs.push(log(id, condition, pres[s], posts[c][s]));
            }
        }
        logs
    }

    #[test]
    fn missing_condition_is_an_incomplete_trial() {
        let logs: Vec<SessionLog> = trial_logs()
            .into_iter()
            .filter(|l| l.condition != Condition::Drl)
            .collect();
        let err = ExperimentReport::from_logs(&logs, "h", 1).unwrap_err();
        assert!(matches!(
            &err,
            ReportError::IncompleteTrial { reason } if reason.contains("DRL")
        ));
    }

    #[test]
    fn type_percentages_close_within_a_tenth() {
        let report = ExperimentReport::from_logs(&trial_logs(), "h", 1).unwrap();
        for row in &report.conditions {
            let exact: f64 = row.type_percents.iter().sum();
            assert!((exact - 100.0).abs() < 1e-9);
            let displayed: f64 = row
                .type_percents
                .iter()
                .map(|p| (p * 10.0).round() / 10.0)
                .sum();
            assert!((displayed - 100.0).abs() <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn exactly_three_pairwise_comparisons_everywhere() {
        let report = ExperimentReport::from_logs(&trial_logs(), "h", 1).unwrap();
        assert_eq!(report.type_tests.len(), 3);
        assert_eq!(report.metrics.len(), 5);
        for block in &report.metrics {
            assert_eq!(block.pairwise.len(), 3);
            let pairs: BTreeSet<(Condition, Condition)> =
                block.pairwise.iter().map(|c| (c.a, c.b)).collect();
            assert_eq!(pairs.len(), 3, "pairs must be distinct");
            for c in &block.pairwise {
                assert_ne!(c.a, c.b);
            }
        }
    }

    #[test]
    fn bonferroni_triples_and_caps_every_pairwise_p() {
        let report = ExperimentReport::from_logs(&trial_logs(), "h", 1).unwrap();
        for block in &report.metrics {
            for c in &block.pairwise {
                assert!((c.p_adjusted - (3.0 * c.p_raw).min(1.0)).abs() < 1e-12);
            }
        }
        for test in &report.type_tests {
            if let TypeTestOutcome::Tested {
                p_raw, p_adjusted, ..
            } = test.outcome
            {
                assert!((p_adjusted - (3.0 * p_raw).min(1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_groups_show_no_marks() {
        let mut logs = Vec::new();
        for (c, condition) in Condition::ALL.into_iter().enumerate() {
            for s in 0..4 {
                logs.push(log((c * 4 + s + 1) as u32, condition, 60.0, 70.0));
            }
        }
        let report = ExperimentReport::from_logs(&logs, "h", 1).unwrap();
        for block in &report.metrics {
            for c in &block.pairwise {
                assert_eq!(c.p_adjusted, 1.0);
            }
            for cell in &block.cells {
                assert_eq!(cell.star, "");
            }
        }
        let text = report.render_text();
        let tables = text.split("Notes:").next().unwrap();
        assert!(!tables.contains('*'));
        assert!(!tables.contains('†'));
    }

    #[test]
    fn report_is_deterministic() {
        let logs = trial_logs();
        let a = ExperimentReport::from_logs(&logs, "h", 42).unwrap();
        let b = ExperimentReport::from_logs(&logs, "h", 42).unwrap();
        assert_eq!(a.render_text(), b.render_text());
        assert_eq!(a.render_delimited(), b.render_delimited());
    }

    #[test]
    fn perfect_pretest_leaves_the_gain_column() {
        let mut logs = trial_logs();
        logs[0].pretest = 100.0;
        let report = ExperimentReport::from_logs(&logs, "h", 1).unwrap();
        assert_eq!(report.nlg_excluded, 1);
        let gain = report
            .metrics
            .iter()
            .find(|b| b.metric == Metric::Gain)
            .unwrap();
        let control = &gain.cells[0];
        assert_eq!(control.stats.n, 3);
        let score = report
            .metrics
            .iter()
            .find(|b| b.metric == Metric::Score)
            .unwrap();
        assert_eq!(score.cells[0].stats.n, 4);
        assert!(report.render_text().contains("excluded from that column"));
    }

    #[test]
    fn subgroup_split_and_gap_arithmetic() {
        let mut logs = Vec::new();
        let mut id = 0;
        for condition in Condition::ALL {
            for (pre, post) in [(40.0, 60.0), (80.0, 70.0)] {
                id += 1;
                logs.push(log(id, condition, pre, post));
            }
        }
        let report = ExperimentReport::from_logs(&logs, "h", 1).unwrap();
        assert_eq!(report.pretest_median, 60.0);
        for row in &report.subgroups {
            assert_eq!(row.n, 1);
        }
        let control = report.gaps[0].gap.as_ref().unwrap();
        assert!((control.pre_gap - 40.0).abs() < 1e-12);
        assert!((control.post_gap - 10.0).abs() < 1e-12);
        assert!((control.reduction_percent - 75.0).abs() < 1e-12);
    }

    #[test]
    fn all_tied_pretests_park_everyone_low() {
        let mut logs = Vec::new();
        for (c, condition) in Condition::ALL.into_iter().enumerate() {
            for s in 0..2 {
                logs.push(log(
                    (c * 2 + s + 1) as u32,
                    condition,
                    50.0,
                    60.0 + s as f64,
                ));
            }
        }
        let report = ExperimentReport::from_logs(&logs, "h", 1).unwrap();
        for row in &report.subgroups {
            match row.prior {
                Prior::High => assert_eq!(row.n, 0),
                Prior::Low => assert_eq!(row.n, 2),
            }
        }
        assert!(report.gaps.iter().all(|g| g.gap.is_none()));
        assert!(report.render_text().contains("not defined"));
    }

    #[test]
    fn delimited_blocks_are_complete() {
        let report = ExperimentReport::from_logs(&trial_logs(), "abc123", 7).unwrap();
        let text = report.render_delimited();
        for block in [
            "[sections]",
            "[types]",
            "[typeTests]",
            "[outcomes]",
            "[outcomeTests]",
            "[omnibus]",
            "[subgroups]",
            "[gaps]",
            "[notes]",
        ] {
            assert!(text.contains(block), "missing {block}");
        }
        assert!(text.contains("configHash\tabc123"));
        assert!(text.contains("masterSeed\t7"));
        let outcome_rows = text
            .lines()
            .filter(|l| l.starts_with("score\t") || l.starts_with("nlg\t"))
            .count();
        assert_eq!(outcome_rows, 2 * (3 + 3 + 1));
    }
}

//! The end-to-end experiment as a chain of file-producing phases.
//!
//! Every phase reads its inputs from the output directory and writes its
//! products back there, so a run is fully described by what is on disk.
//! Artifacts are content-addressed: each one names the config hash and
//! master seed that produced it, and a phase is skipped when all of its
//! outputs already carry the current addressing. Deleting an artifact, or
//! changing anything in the config, re-executes that phase and everything
//! after it; `force` re-executes the lot. Because every phase is a pure
//! function of config and seed, a re-run can only reproduce the same bytes.
//!
//! The phases, in order:
//!
//! 1. `history`: the historical cohort, uniform-random problem types.
//! 2. `thresholds`: mastery thresholds distilled from the history file.
//! 3. `drl-corpus`: the training cohort, its transitions, and the frozen
//!    normalization constants.
//! 4. `train`: the policy network, trained from the corpus files.
//! 5. `trial`: the randomized three-condition trial.
//! 6. `report`: the statistical report over the trial sessions.

use std::error::Error as StdError;
use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bkt::{BktParams, ThresholdTable, THRESHOLDS_SCHEMA};
use crate::config::ExperimentConfig;
use crate::drl::{LevelTimeNorm, NormalizationConstants, TrainedPolicy, Transition, MODEL_SCHEMA};
use crate::jsonl::{read_jsonl, write_jsonl, FileHeader};
use crate::logic::ProblemBank;
use crate::report::ExperimentReport;
use crate::sim::{
    decision_observations, run_corpus_phase, run_history_phase, run_trial_phase,
    sessions_from_rows, train_policy, AttemptRow, Curriculum, SessionLog, SESSIONS_SCHEMA,
    TRANSITIONS_SCHEMA,
};

pub const NORMS_SCHEMA: &str = "engage.norms.v1";

/// Phase names in execution order, as they appear on the command line and
/// in error messages.
pub const PHASES: [&str; 6] = [
    "history",
    "thresholds",
    "drl-corpus",
    "train",
    "trial",
    "report",
];

/// Where each artifact lives under one output directory.
#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub resolved_config: PathBuf,
    pub history_sessions: PathBuf,
    pub thresholds: PathBuf,
    pub corpus_sessions: PathBuf,
    pub corpus_transitions: PathBuf,
    pub corpus_norms: PathBuf,
    pub model: PathBuf,
    pub trial_sessions: PathBuf,
    pub trial_transitions: PathBuf,
    pub report_text: PathBuf,
    pub report_delimited: PathBuf,
}

impl ArtifactPaths {
    pub fn new(output_dir: impl AsRef<Path>) -> ArtifactPaths {
        let dir = output_dir.as_ref();
        ArtifactPaths {
            resolved_config: dir.join("config.resolved.toml"),
            history_sessions: dir.join("history.sessions.jsonl"),
            thresholds: dir.join("thresholds.json"),
            corpus_sessions: dir.join("corpus.sessions.jsonl"),
            corpus_transitions: dir.join("corpus.transitions.jsonl"),
            corpus_norms: dir.join("corpus.norms.json"),
            model: dir.join("model.json"),
            trial_sessions: dir.join("trial.sessions.jsonl"),
            trial_transitions: dir.join("trial.transitions.jsonl"),
            report_text: dir.join("report.txt"),
            report_delimited: dir.join("report.tsv"),
        }
    }
}

/// What happened to one phase during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseRun {
    pub phase: &'static str,
    /// False when every output was already current and the phase was skipped.
    pub executed: bool,
}

#[derive(Debug, Error)]
#[error("phase {phase} failed at {}: {source}", path.display())]
pub struct PipelineError {
    pub phase: &'static str,
    /// The artifact being read or written when things went wrong.
    pub path: PathBuf,
    #[source]
    pub source: Box<dyn StdError + Send + Sync>,
}

fn fail(
    phase: &'static str,
    path: &Path,
    source: impl Into<Box<dyn StdError + Send + Sync>>,
) -> PipelineError {
    PipelineError {
        phase,
        path: path.to_path_buf(),
        source: source.into(),
    }
}

/// The normalization constants a trained model depends on, persisted so the
/// train phase can re-run from files alone. Sessions are expensive to
/// re-simulate and raw feature vectors never reach disk, so the corpus phase
/// freezes these next to the transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NormsDoc {
    pub schema: String,
    #[serde(default)]
    pub config_hash: String,
    #[serde(default)]
    pub master_seed: u64,
    pub normalization: NormalizationConstants,
    pub time_norms: Vec<LevelTimeNorm>,
}

#[derive(Debug, Error)]
pub enum NormsError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed norms document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported norms schema {found:?}, expected {NORMS_SCHEMA:?}")]
    Schema { found: String },
}

impl NormsDoc {
    pub fn parse(text: &str) -> Result<NormsDoc, NormsError> {
        let doc: NormsDoc = serde_json::from_str(text)?;
        if doc.schema != NORMS_SCHEMA {
            return Err(NormsError::Schema { found: doc.schema });
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NormsDoc, NormsError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| NormsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        NormsDoc::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NormsError> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("norms serialize");
        fs::write(path, text + "\n").map_err(|source| NormsError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// The addressing fields every artifact leads with, read leniently so one
/// check covers line-delimited files and single-document ones alike.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Provenance {
    schema: String,
    #[serde(default)]
    config_hash: String,
    #[serde(default)]
    master_seed: u64,
}

/// How to decide whether an artifact matches the current addressing.
#[derive(Debug, Clone, Copy)]
enum Check {
    /// First line parses as JSON whose schema, configHash, and masterSeed
    /// all match.
    Doc(&'static str),
    /// The plain-text report's `config` and `seed` lines match.
    ReportText,
    /// The delimited report's `configHash` and `masterSeed` lines match.
    ReportDelimited,
}

fn first_line(path: &Path) -> Option<String> {
    let file = fs::File::open(path).ok()?;
    let mut line = String::new();
    io::BufReader::new(file).read_line(&mut line).ok()?;
    Some(line)
}

fn is_fresh(path: &Path, check: Check, hash: &str, seed: u64) -> bool {
    match check {
        Check::Doc(schema) => {
            let Some(line) = first_line(path) else {
                return false;
            };
            match serde_json::from_str::<Provenance>(line.trim_end()) {
                Ok(p) => p.schema == schema && p.config_hash == hash && p.master_seed == seed,
                Err(_) => false,
            }
        }
        Check::ReportText => {
            let Ok(text) = fs::read_to_string(path) else {
                return false;
            };
            let config_line = format!("config  {hash}");
            let seed_line = format!("seed    {seed}");
            text.lines().any(|l| l == config_line) && text.lines().any(|l| l == seed_line)
        }
        Check::ReportDelimited => {
            let Ok(text) = fs::read_to_string(path) else {
                return false;
            };
            let config_line = format!("configHash\t{hash}");
            let seed_line = format!("masterSeed\t{seed}");
            text.lines().any(|l| l == config_line) && text.lines().any(|l| l == seed_line)
        }
    }
}

fn phase_outputs<'a>(phase: &str, paths: &'a ArtifactPaths) -> Vec<(&'a Path, Check)> {
    match phase {
        "history" => vec![(&paths.history_sessions, Check::Doc(SESSIONS_SCHEMA))],
        "thresholds" => vec![(&paths.thresholds, Check::Doc(THRESHOLDS_SCHEMA))],
        "drl-corpus" => vec![
            (&paths.corpus_sessions, Check::Doc(SESSIONS_SCHEMA)),
            (&paths.corpus_transitions, Check::Doc(TRANSITIONS_SCHEMA)),
            (&paths.corpus_norms, Check::Doc(NORMS_SCHEMA)),
        ],
        "train" => vec![(&paths.model, Check::Doc(MODEL_SCHEMA))],
        "trial" => vec![
            (&paths.trial_sessions, Check::Doc(SESSIONS_SCHEMA)),
            (&paths.trial_transitions, Check::Doc(TRANSITIONS_SCHEMA)),
        ],
        "report" => vec![
            (&paths.report_text, Check::ReportText),
            (&paths.report_delimited, Check::ReportDelimited),
        ],
        other => unreachable!("unknown phase {other}"),
    }
}

fn rows_of(logs: &[SessionLog]) -> impl Iterator<Item = &AttemptRow> {
    logs.iter().flat_map(|log| log.rows.iter())
}

/// Runs every phase through `last`, skipping the ones whose outputs are
/// already current. Returns what ran and what was skipped, in order.
pub fn run_pipeline_until(
    config: &ExperimentConfig,
    last: &str,
    force: bool,
) -> Result<Vec<PhaseRun>, PipelineError> {
    let setup = |path: &Path, e: Box<dyn StdError + Send + Sync>| fail("setup", path, e);

    let stop = PHASES
        .iter()
        .position(|p| *p == last)
        .ok_or_else(|| setup(&config.output_dir, format!("unknown phase {last:?}").into()))?;

    config
        .validate()
        .map_err(|e| setup(&config.output_dir, e.into()))?;
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| setup(&config.output_dir, e.into()))?;
    let bank = ProblemBank::load_dir(&config.bank).map_err(|e| setup(&config.bank, e.into()))?;
    let curriculum = Curriculum::new(&bank).map_err(|e| setup(&config.bank, e.into()))?;

    let paths = ArtifactPaths::new(&config.output_dir);
    let hash = config.hash();
    let seed = config.master_seed;

    // The resolved config is the run's own record of what produced it, so
    // it is rewritten every time rather than skipped.
    let resolved = format!(
        "# configHash {hash}\n# masterSeed {seed}\n{}",
        config.resolved_toml()
    );
    fs::write(&paths.resolved_config, resolved)
        .map_err(|e| setup(&paths.resolved_config, e.into()))?;

    let mut runs = Vec::with_capacity(stop + 1);
    let mut dirty = force;
    for phase in PHASES.iter().take(stop + 1).copied() {
        let fresh = phase_outputs(phase, &paths)
            .iter()
            .all(|(path, check)| is_fresh(path, *check, &hash, seed));
        let executed = dirty || !fresh;
        if executed {
            run_phase(phase, config, &curriculum, &paths, &hash)?;
            dirty = true;
        }
        runs.push(PhaseRun { phase, executed });
    }
    Ok(runs)
}

/// Runs the whole pipeline.
pub fn run_pipeline(
    config: &ExperimentConfig,
    force: bool,
) -> Result<Vec<PhaseRun>, PipelineError> {
    run_pipeline_until(config, PHASES[PHASES.len() - 1], force)
}

fn run_phase(
    phase: &'static str,
    config: &ExperimentConfig,
    curriculum: &Curriculum,
    paths: &ArtifactPaths,
    hash: &str,
) -> Result<(), PipelineError> {
    let header = |schema: &str| FileHeader {
        schema: schema.to_string(),
        config_hash: hash.to_string(),
        master_seed: config.master_seed,
    };
    match phase {
        "history" => {
            let history = run_history_phase(curriculum, config)
                .map_err(|e| fail(phase, &paths.history_sessions, e))?;
            write_jsonl(
                &paths.history_sessions,
                &header(SESSIONS_SCHEMA),
                rows_of(&history.logs),
            )
            .map_err(|e| fail(phase, &paths.history_sessions, e))?;
        }
        "thresholds" => {
            let (_, rows): (_, Vec<AttemptRow>) =
                read_jsonl(&paths.history_sessions, SESSIONS_SCHEMA)
                    .map_err(|e| fail(phase, &paths.history_sessions, e))?;
            let observations = decision_observations(&rows)
                .map_err(|e| fail(phase, &paths.history_sessions, e))?;
            let table = ThresholdTable::compute(observations, &BktParams::default())
                .map_err(|e| fail(phase, &paths.thresholds, e))?;
            table
                .save(&paths.thresholds, hash, config.master_seed)
                .map_err(|e| fail(phase, &paths.thresholds, e))?;
        }
        "drl-corpus" => {
            let corpus = run_corpus_phase(curriculum, config)
                .map_err(|e| fail(phase, &paths.corpus_sessions, e))?;
            write_jsonl(
                &paths.corpus_sessions,
                &header(SESSIONS_SCHEMA),
                rows_of(&corpus.logs),
            )
            .map_err(|e| fail(phase, &paths.corpus_sessions, e))?;
            write_jsonl(
                &paths.corpus_transitions,
                &header(TRANSITIONS_SCHEMA),
                corpus.transitions.iter(),
            )
            .map_err(|e| fail(phase, &paths.corpus_transitions, e))?;
            let h = header(NORMS_SCHEMA);
            NormsDoc {
                schema: h.schema,
                config_hash: h.config_hash,
                master_seed: h.master_seed,
                normalization: corpus.normalization,
                time_norms: corpus.time_norms,
            }
            .save(&paths.corpus_norms)
            .map_err(|e| fail(phase, &paths.corpus_norms, e))?;
        }
        "train" => {
            let (_, transitions): (_, Vec<Transition>) =
                read_jsonl(&paths.corpus_transitions, TRANSITIONS_SCHEMA)
                    .map_err(|e| fail(phase, &paths.corpus_transitions, e))?;
            let norms =
                NormsDoc::load(&paths.corpus_norms).map_err(|e| fail(phase, &paths.corpus_norms, e))?;
            let policy = train_policy(&transitions, &norms.normalization, &norms.time_norms, config)
                .map_err(|e| fail(phase, &paths.model, e))?;
            policy
                .save(&paths.model, hash, config.master_seed)
                .map_err(|e| fail(phase, &paths.model, e))?;
        }
        "trial" => {
            let thresholds = ThresholdTable::load(&paths.thresholds)
                .map_err(|e| fail(phase, &paths.thresholds, e))?;
            let policy =
                TrainedPolicy::load(&paths.model).map_err(|e| fail(phase, &paths.model, e))?;
            let trial = run_trial_phase(curriculum, config, &thresholds, &policy)
                .map_err(|e| fail(phase, &paths.trial_sessions, e))?;
            write_jsonl(
                &paths.trial_sessions,
                &header(SESSIONS_SCHEMA),
                rows_of(&trial.logs),
            )
            .map_err(|e| fail(phase, &paths.trial_sessions, e))?;
            write_jsonl(
                &paths.trial_transitions,
                &header(TRANSITIONS_SCHEMA),
                trial.transitions.iter(),
            )
            .map_err(|e| fail(phase, &paths.trial_transitions, e))?;
        }
        "report" => {
            let (file_header, rows): (FileHeader, Vec<AttemptRow>) =
                read_jsonl(&paths.trial_sessions, SESSIONS_SCHEMA)
                    .map_err(|e| fail(phase, &paths.trial_sessions, e))?;
            let logs =
                sessions_from_rows(rows).map_err(|e| fail(phase, &paths.trial_sessions, e))?;
            let report =
                ExperimentReport::from_logs(&logs, &file_header.config_hash, file_header.master_seed)
                    .map_err(|e| fail(phase, &paths.trial_sessions, e))?;
            fs::write(&paths.report_text, report.render_text())
                .map_err(|e| fail(phase, &paths.report_text, e))?;
            fs::write(&paths.report_delimited, report.render_delimited())
                .map_err(|e| fail(phase, &paths.report_delimited, e))?;
        }
        other => unreachable!("unknown phase {other}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::{Path, PathBuf};

    use super::*;
    use crate::sim::run_history_phase;

    fn bank_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../banks/default")
    }

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.bank = bank_dir();
        config.output_dir = dir.to_path_buf();
        config.population.history = 5;
        config.population.drl_corpus = 4;
        config.population.trial = 6;
        config.ddqn.epochs = 2;
        config.ddqn.batch_size = 16;
        config
    }

    fn artifact_files(paths: &ArtifactPaths) -> Vec<PathBuf> {
        vec![
            paths.resolved_config.clone(),
            paths.history_sessions.clone(),
            paths.thresholds.clone(),
            paths.corpus_sessions.clone(),
            paths.corpus_transitions.clone(),
            paths.corpus_norms.clone(),
            paths.model.clone(),
            paths.trial_sessions.clone(),
            paths.trial_transitions.clone(),
            paths.report_text.clone(),
            paths.report_delimited.clone(),
        ]
    }

    fn executed_flags(runs: &[PhaseRun]) -> Vec<bool> {
        runs.iter().map(|r| r.executed).collect()
    }

    #[test]
    fn first_run_executes_everything_and_a_second_skips() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());

        let first = run_pipeline(&config, false).unwrap();
        assert_eq!(executed_flags(&first), vec![true; 6]);
        for path in artifact_files(&ArtifactPaths::new(dir.path())) {
            assert!(path.exists(), "missing artifact {}", path.display());
        }

        let second = run_pipeline(&config, false).unwrap();
        assert_eq!(executed_flags(&second), vec![false; 6]);
    }

    #[test]
    fn force_reruns_byte_for_byte() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = ArtifactPaths::new(dir.path());

        run_pipeline(&config, false).unwrap();
        let before: Vec<Vec<u8>> = artifact_files(&paths)
            .iter()
            .map(|p| fs::read(p).unwrap())
            .collect();

        let rerun = run_pipeline(&config, true).unwrap();
        assert_eq!(executed_flags(&rerun), vec![true; 6]);
        for (path, old) in artifact_files(&paths).iter().zip(&before) {
            let new = fs::read(path).unwrap();
            assert_eq!(&new, old, "{} changed across a re-run", path.display());
        }
    }

    #[test]
    fn deleting_the_model_reruns_training_onward() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = ArtifactPaths::new(dir.path());

        run_pipeline(&config, false).unwrap();
        fs::remove_file(&paths.model).unwrap();

        let second = run_pipeline(&config, false).unwrap();
        assert_eq!(
            executed_flags(&second),
            vec![false, false, false, true, true, true]
        );
    }

    #[test]
    fn changed_config_invalidates_everything() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path());

        run_pipeline(&config, false).unwrap();
        config.time_bounds.t_slow = 500.0;
        let second = run_pipeline(&config, false).unwrap();
        assert_eq!(executed_flags(&second), vec![true; 6]);
    }

    #[test]
    fn threshold_rebuild_matches_the_in_memory_table() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = ArtifactPaths::new(dir.path());

        run_pipeline_until(&config, "thresholds", false).unwrap();
        let from_disk = ThresholdTable::load(&paths.thresholds).unwrap();

        let bank = ProblemBank::load_dir(&config.bank).unwrap();
        let curriculum = Curriculum::new(&bank).unwrap();
        let in_memory = run_history_phase(&curriculum, &config).unwrap().thresholds;
        assert_eq!(from_disk, in_memory);
    }

    #[test]
    fn stops_at_the_requested_phase() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = ArtifactPaths::new(dir.path());

        let runs = run_pipeline_until(&config, "history", false).unwrap();
        assert_eq!(runs.len(), 1);
        assert!(paths.history_sessions.exists());
        assert!(!paths.thresholds.exists());

        let err = run_pipeline_until(&config, "nonsense", false).unwrap_err();
        assert_eq!(err.phase, "setup");
    }

    #[test]
    fn phase_errors_name_the_phase_and_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = ArtifactPaths::new(dir.path());

        run_pipeline_until(&config, "history", false).unwrap();
        let mut text = fs::read_to_string(&paths.history_sessions).unwrap();
        text.push_str("not json\n");
        fs::write(&paths.history_sessions, text).unwrap();

        let err = run_pipeline_until(&config, "thresholds", false).unwrap_err();
        assert_eq!(err.phase, "thresholds");
        assert_eq!(err.path, paths.history_sessions);
        let message = err.to_string();
        assert!(message.contains("thresholds"), "{message}");
        assert!(
            message.contains("history.sessions.jsonl"),
            "{message}"
        );
    }

    #[test]
    fn every_artifact_names_its_config() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = ArtifactPaths::new(dir.path());
        let hash = config.hash();

        run_pipeline(&config, false).unwrap();

        for path in [
            &paths.history_sessions,
            &paths.thresholds,
            &paths.corpus_sessions,
            &paths.corpus_transitions,
            &paths.corpus_norms,
            &paths.model,
            &paths.trial_sessions,
            &paths.trial_transitions,
        ] {
            let line = first_line(path).unwrap();
            let p: Provenance = serde_json::from_str(line.trim_end()).unwrap();
            assert_eq!(p.config_hash, hash, "{}", path.display());
            assert_eq!(p.master_seed, config.master_seed, "{}", path.display());
        }

        let text = fs::read_to_string(&paths.report_text).unwrap();
        assert!(text.contains(&format!("config  {hash}")));
        let tsv = fs::read_to_string(&paths.report_delimited).unwrap();
        assert!(tsv.contains(&format!("configHash\t{hash}")));

        let resolved = fs::read_to_string(&paths.resolved_config).unwrap();
        assert!(resolved.starts_with(&format!("# configHash {hash}\n# masterSeed 42\n")));
        let reloaded = ExperimentConfig::parse(&resolved).unwrap();
        assert_eq!(reloaded.hash(), hash);
    }

    #[test]
    fn trial_sessions_round_trip_into_logs() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = ArtifactPaths::new(dir.path());

        run_pipeline_until(&config, "drl-corpus", false).unwrap();
        let (_, rows): (_, Vec<AttemptRow>) =
            read_jsonl(&paths.corpus_sessions, SESSIONS_SCHEMA).unwrap();
        let rebuilt = sessions_from_rows(rows).unwrap();

        let bank = ProblemBank::load_dir(&config.bank).unwrap();
        let curriculum = Curriculum::new(&bank).unwrap();
        let direct = run_corpus_phase(&curriculum, &config).unwrap().logs;

        assert_eq!(rebuilt.len(), direct.len());
        for (r, d) in rebuilt.iter().zip(direct.iter()) {
            assert_eq!(r.student_id, d.student_id);
            assert_eq!(r.condition, d.condition);
            assert_eq!(r.rows, d.rows);
            assert_eq!(r.pretest.to_bits(), d.pretest.to_bits());
            assert_eq!(r.level_tests, d.level_tests);
            assert_eq!(r.posttest_scores, d.posttest_scores);
            assert_eq!(r.posttest.to_bits(), d.posttest.to_bits());
            assert!(r.decisions.is_empty());
        }
    }
}

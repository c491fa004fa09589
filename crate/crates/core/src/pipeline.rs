//! Extract, probe, score and mitigate over whole documents.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{Backend, BackendConfig, BackendError};
use crate::extract::{extract_document, Statement, StatementId};
use crate::kind::ProbeKind;
use crate::mitigation::{self, MitigatedStatement, MitigationError};
use crate::parallel;
use crate::probe::{
    ConfusableLexicon, Counterfactual, LexiconError, ProbeError, ProbeGenerator, ProbeStrategy, TemplateError,
    TemplateSet,
};
use crate::scoring::{detect_statement, ScoringError, ScoringWeights, SensitivityReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("report was produced under config {found}, current config is {expected}")]
    DigestMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub probes_per_statement: usize,
    pub probe_strategy: ProbeStrategy,
    pub weights: ScoringWeights,
    pub mitigation_enabled: bool,
    pub seed: u64,
    pub parallel_statements: usize,
    pub disabled_kinds: Vec<ProbeKind>,
    pub lexicon_path: Option<PathBuf>,
    pub templates_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendConfig::default(),
            probes_per_statement: 4,
            probe_strategy: ProbeStrategy::RuleThenModel,
            weights: ScoringWeights::default(),
            mitigation_enabled: false,
            seed: 0,
            parallel_statements: 4,
            disabled_kinds: Vec::new(),
            lexicon_path: None,
            templates_path: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.probes_per_statement < 1 {
            return Err(PipelineError::Config("probes_per_statement must be >= 1".into()));
        }
        if self.parallel_statements < 1 {
            return Err(PipelineError::Config("parallel_statements must be >= 1".into()));
        }
        self.weights.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.backend.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, leaving out settings that cannot
    /// change any score (parallelism, timeouts, cache location).
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("parallel_statements");
            if let Some(backend) = obj.get_mut("backend").and_then(|b| b.as_object_mut()) {
                for key in ["max_parallel", "cache_path", "timeout_secs"] {
                    backend.remove(key);
                }
            }
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub statement: Statement,
    pub probes: Vec<Counterfactual>,
    pub probes_exhausted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<SensitivityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StatementRecord {
    pub fn flagged(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.verdict)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationRecord {
    pub statement_id: StatementId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<MitigatedStatement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Counterfactual>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One row of the per-kind mitigation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationRow {
    /// A probe kind label, or "Overall".
    pub kind: String,
    pub count: usize,
    pub original_score: f64,
    pub mitigated_score: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub statements: usize,
    pub scored: usize,
    pub errors: usize,
    pub flagged: usize,
    /// Flagged statements that went through mitigation, rewritten or not.
    pub mitigated: usize,
    pub successful: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_improvement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mitigation_table: Vec<MitigationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub schema_version: u32,
    pub document_id: String,
    pub config_digest: String,
    pub partial: bool,
    pub statements: Vec<StatementRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mitigations: Vec<MitigationRecord>,
    pub summary: Summary,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn table_row(kind: String, rows: &[&MitigatedStatement]) -> MitigationRow {
    let avg = |f: fn(&MitigatedStatement) -> f64| mean(rows.iter().map(|m| f(m))).unwrap_or(0.0);
    MitigationRow {
        kind,
        count: rows.len(),
        original_score: avg(|m| m.score_before),
        mitigated_score: avg(|m| m.score_after),
        improvement: avg(|m| m.improvement),
    }
}

impl DocumentReport {
    /// Summary recomputed from the records.
    pub fn recount(&self) -> Summary {
        let done: Vec<&MitigatedStatement> = self.mitigations.iter().filter_map(|m| m.result.as_ref()).collect();
        let successful = done.iter().filter(|m| m.is_successful()).count();
        let mut by_kind: BTreeMap<ProbeKind, Vec<&MitigatedStatement>> = BTreeMap::new();
        for m in &done {
            by_kind.entry(m.strategy).or_default().push(m);
        }
        let mut mitigation_table: Vec<MitigationRow> =
            by_kind.into_iter().map(|(k, rows)| table_row(k.label().to_string(), &rows)).collect();
        if !done.is_empty() {
            mitigation_table.push(table_row("Overall".to_string(), &done));
        }
        Summary {
            statements: self.statements.len(),
            scored: self.statements.iter().filter(|s| s.report.is_some()).count(),
            errors: self.statements.iter().filter(|s| s.error.is_some()).count(),
            flagged: self.statements.iter().filter(|s| s.flagged()).count(),
            mitigated: self.mitigations.len(),
            successful,
            mean_improvement: mean(done.iter().map(|m| m.improvement)),
            success_rate: (!self.mitigations.is_empty()).then(|| successful as f64 / self.mitigations.len() as f64),
            mitigation_table,
        }
    }
}

enum Failure {
    Transport(String),
    Other(String),
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        if e.is_transport() {
            Failure::Transport(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

impl From<ProbeError> for Failure {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Backend(b) => b.into(),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<ScoringError> for Failure {
    fn from(e: ScoringError) -> Self {
        match e {
            ScoringError::Backend(b) => b.into(),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<MitigationError> for Failure {
    fn from(e: MitigationError) -> Self {
        match e {
            MitigationError::Scoring(s) => s.into(),
            other => Failure::Other(other.to_string()),
        }
    }
}

/// Runs `f` over `items` with bounded fan-out. After the first transport
/// failure no new items start, and the output ends at that failure.
fn run_bounded<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> Result<R, (R, Failure)> + Sync,
) -> (Vec<R>, bool) {
    let aborted = AtomicBool::new(false);
    let results = parallel::ordered_map(items, workers, |_, item| {
        if aborted.load(Ordering::SeqCst) {
            return None;
        }
        let outcome = f(item);
        if let Err((_, Failure::Transport(_))) = &outcome {
            aborted.store(true, Ordering::SeqCst);
        }
        Some(outcome)
    });
    let mut out = Vec::with_capacity(results.len());
    for result in results {
        match result {
            Some(Ok(r)) | Some(Err((r, Failure::Other(_)))) => out.push(r),
            Some(Err((r, Failure::Transport(_)))) => {
                out.push(r);
                return (out, true);
            }
            None => return (out, true),
        }
    }
    (out, false)
}

fn failure_message(f: &Failure) -> String {
    match f {
        Failure::Transport(m) | Failure::Other(m) => m.clone(),
    }
}

pub struct Pipeline {
    config: RunConfig,
    generator: ProbeGenerator,
    backend: Arc<Backend>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("config", &self.config).finish_non_exhaustive()
    }
}

// Failed records travel with their error so partial reports keep them.
#[allow(clippy::result_large_err)]
impl Pipeline {
    /// Builds the backend from `config.backend`, seeded with `config.seed`.
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let backend = Backend::from_config(&config.backend, config.seed)?;
        Self::with_backend(config, Arc::new(backend))
    }

    pub fn with_backend(config: RunConfig, backend: Arc<Backend>) -> Result<Self, PipelineError> {
        config.validate()?;
        let lexicon = match &config.lexicon_path {
            Some(path) => ConfusableLexicon::load(path)?,
            None => ConfusableLexicon::builtin(),
        };
        let templates = match &config.templates_path {
            Some(path) => TemplateSet::load(path)?,
            None => TemplateSet::builtin(),
        };
        let generator = ProbeGenerator::new(lexicon, templates).with_disabled(config.disabled_kinds.iter().copied());
        Ok(Pipeline { config, generator, backend })
    }

    /// Same backend and lexicon under a different configuration.
    pub fn reconfigured(&self, config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let generator = ProbeGenerator::new(self.generator.lexicon.clone(), self.generator.templates.clone())
            .with_disabled(config.disabled_kinds.iter().copied());
        Ok(Pipeline { config, generator, backend: Arc::clone(&self.backend) })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn backend(&self) -> &Arc<Backend> {
        &self.backend
    }

    pub fn generator(&self) -> &ProbeGenerator {
        &self.generator
    }

    pub fn digest(&self) -> String {
        self.config.digest()
    }

    fn probe(&self, statement: &Statement) -> Result<crate::probe::ProbeSet, ProbeError> {
        self.generator.generate(
            statement,
            self.config.probes_per_statement,
            self.config.probe_strategy,
            Some(&self.backend),
            self.config.seed,
        )
    }

    fn detect_one(&self, statement: &Statement) -> Result<StatementRecord, (StatementRecord, Failure)> {
        let mut record = StatementRecord {
            statement: statement.clone(),
            probes: Vec::new(),
            probes_exhausted: false,
            report: None,
            error: None,
        };
        let scored = self.probe(statement).map_err(Failure::from).and_then(|set| {
            record.probes = set.probes;
            record.probes_exhausted = set.exhausted;
            detect_statement(statement, &record.probes, &self.backend, &self.config.weights).map_err(Failure::from)
        });
        match scored {
            Ok(report) => {
                record.report = Some(report);
                Ok(record)
            }
            Err(failure) => {
                record.error = Some(failure_message(&failure));
                Err((record, failure))
            }
        }
    }

    /// Detection over already-extracted statements.
    pub fn detect_statements(&self, document_id: &str, statements: &[Statement]) -> DocumentReport {
        let (records, partial) = run_bounded(statements, self.config.parallel_statements, |s| self.detect_one(s));
        let mut report = DocumentReport {
            schema_version: SCHEMA_VERSION,
            document_id: document_id.to_string(),
            config_digest: self.digest(),
            partial,
            statements: records,
            mitigations: Vec::new(),
            summary: Summary::default(),
        };
        report.summary = report.recount();
        report
    }

    /// Extracts statements from `document` and scores each one.
    pub fn run_detect(&self, document_id: &str, document: &str) -> DocumentReport {
        self.detect_statements(document_id, &extract_document(document_id, document))
    }

    fn mitigate_one(&self, record: &StatementRecord) -> Result<MitigationRecord, (MitigationRecord, Failure)> {
        let statement = &record.statement;
        let mut out = MitigationRecord { statement_id: statement.id.clone(), result: None, probes: Vec::new(), error: None };
        let report = record.report.as_ref().expect("only scored statements are mitigated");
        let outcome = (|| {
            let strategy = mitigation::choose_strategy(statement, report)
                .ok_or_else(|| Failure::Other("no rewrite site for any claim kind".to_string()))?;
            let text = mitigation::mitigate(statement, strategy)?;
            let rewritten = mitigation::mitigated_statement(statement, &text);
            out.probes = self.probe(&rewritten)?.probes;
            Ok(mitigation::rescore_mitigation(
                report,
                statement,
                &text,
                strategy,
                &out.probes,
                &self.backend,
                &self.config.weights,
            )?)
        })();
        match outcome {
            Ok(result) => {
                out.result = Some(result);
                Ok(out)
            }
            Err(failure) => {
                out.error = Some(failure_message(&failure));
                Err((out, failure))
            }
        }
    }

    /// Rewrites and rescores every flagged statement of a report produced
    /// under this configuration.
    pub fn run_mitigate(&self, mut report: DocumentReport) -> Result<DocumentReport, PipelineError> {
        let expected = self.digest();
        if report.config_digest != expected {
            return Err(PipelineError::DigestMismatch { expected, found: report.config_digest });
        }
        let flagged: Vec<&StatementRecord> = report.statements.iter().filter(|r| r.flagged()).collect();
        let (mitigations, partial) =
            run_bounded(&flagged, self.config.parallel_statements, |r| self.mitigate_one(r));
        report.mitigations = mitigations;
        report.partial |= partial;
        report.summary = report.recount();
        Ok(report)
    }

    /// Detection followed by mitigation when the config enables it.
    pub fn run(&self, document_id: &str, document: &str) -> Result<DocumentReport, PipelineError> {
        let report = self.run_detect(document_id, document);
        if self.config.mitigation_enabled && !report.partial {
            self.run_mitigate(report)
        } else {
            Ok(report)
        }
    }
}

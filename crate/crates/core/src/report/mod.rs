//! End-to-end runs: configuration, pipeline orchestration and output files.

mod config;
mod pipeline;

use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use crate::ingest::{IngestError, ValidationReport};
use crate::rules::{summarize_findings, BreachFinding, RunSummary};

pub use config::{InputPaths, RunConfig};
pub use pipeline::{
    execute, load_corpus, run_pipeline, write_violations, ClusterStats, Diagnostics, LoadedCorpus, PermitStats, PhotoStats,
    RunArtifacts, StrategyChoice, LIMITATIONS,
};

pub const FINDINGS_FILE: &str = "findings.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const CLUSTERS_FILE: &str = "clusters.jsonl";
pub const VIOLATIONS_FILE: &str = "violations.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing input file {}", .0.display())]
    MissingInput(PathBuf),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("corpus rejected with {} hard violation(s)", report.hard_count())]
    Validation {
        report: ValidationReport,
        violations_file: Option<PathBuf>,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingInput(_) => 2,
            PipelineError::Validation { .. } | PipelineError::Input(_) => 3,
            PipelineError::Config(_) => 4,
            PipelineError::Io { .. } | PipelineError::Runtime(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::MissingInput(_) => "missing_input",
            PipelineError::Config(_) => "config",
            PipelineError::Validation { .. } => "validation",
            PipelineError::Input(_) => "invalid_input",
            PipelineError::Io { .. } => "io",
            PipelineError::Runtime(_) => "runtime",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            PipelineError::MissingInput(p) => v["path"] = json!(p),
            PipelineError::Validation { report, violations_file } => {
                v["hard_violations"] = json!(report.hard_count());
                if let Some(p) = violations_file {
                    v["violations_file"] = json!(p);
                }
            }
            _ => {}
        }
        v
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(source) => PipelineError::Runtime(source.to_string()),
            other => PipelineError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("reading findings: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed finding on line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Parses a findings file. Blank lines are skipped.
pub fn read_findings<R: BufRead>(reader: R) -> Result<Vec<BreachFinding>, SummarizeError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let finding = serde_json::from_str(&line).map_err(|e| SummarizeError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(finding);
    }
    Ok(out)
}

/// Recomputes the run summary from a findings file alone.
pub fn summarize<R: BufRead>(reader: R) -> Result<RunSummary, SummarizeError> {
    Ok(summarize_findings(&read_findings(reader)?))
}

pub fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

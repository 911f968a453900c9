//! End-to-end orchestration from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use tenonos_libgraph::corpus::{self, CorpusTree};
use tenonos_libgraph::{
    orchestrate_parsed, parse_kconfig, parse_tree, MockParser, ObjectiveParser, OrchestrateParams, Orchestration,
    RemoteParser, Report, Strategy,
};

use crate::BenchError;

/// A Kconfig tree on disk or a bundled corpus member (`corpus:<name>`).
#[derive(Debug, Clone)]
pub enum TreeSource {
    Corpus(&'static CorpusTree),
    Path(PathBuf),
}

impl TreeSource {
    pub fn parse(spec: &str) -> Result<Self, BenchError> {
        match spec.strip_prefix("corpus:") {
            Some(name) => corpus::get(name)
                .map(TreeSource::Corpus)
                .ok_or_else(|| BenchError::Config(format!("no corpus tree `{name}`"))),
            None => Ok(TreeSource::Path(PathBuf::from(spec))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TreeSource::Corpus(t) => format!("corpus:{}", t.name),
            TreeSource::Path(p) => p.display().to_string(),
        }
    }

    /// The corpus objective, when the tree has one.
    pub fn default_objective(&self) -> Option<&'static str> {
        match self {
            TreeSource::Corpus(t) => Some(t.objective),
            TreeSource::Path(_) => None,
        }
    }

    pub fn parse_graph(&self) -> Result<tenonos_libgraph::Parsed, BenchError> {
        Ok(match self {
            TreeSource::Corpus(t) => parse_tree(&t.loader(), "Kconfig")?,
            TreeSource::Path(p) => parse_kconfig(p)?,
        })
    }
}

/// `@path` reads the objective from a file; anything else is the text.
pub fn resolve_objective(arg: &str) -> Result<String, BenchError> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e)),
        None => Ok(arg.to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct OrchestrateOptions {
    pub objective: Option<String>,
    pub strategy: Strategy,
    pub params: OrchestrateParams,
    pub mapping: Option<BTreeMap<String, String>>,
    /// Where `.config` and `report.json` go.
    pub out_dir: Option<PathBuf>,
}

impl Default for OrchestrateOptions {
    fn default() -> Self {
        Self {
            objective: None,
            strategy: Strategy::Mock,
            params: OrchestrateParams::default(),
            mapping: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub tree: String,
    pub strategy: Strategy,
    pub valid: bool,
    /// Parse through validation, in microseconds.
    pub end_to_end_us: u128,
    pub report: &'a Report,
}

#[derive(Debug, Clone)]
pub struct OrchestrateOutcome {
    pub tree: String,
    pub strategy: Strategy,
    pub orchestration: Orchestration,
    pub dotconfig: String,
    pub end_to_end_us: u128,
}

impl OrchestrateOutcome {
    pub fn valid(&self) -> bool {
        self.orchestration.report.validation.is_valid()
    }

    pub fn report_json(&self) -> String {
        let summary = RunSummary {
            tree: self.tree.clone(),
            strategy: self.strategy,
            valid: self.valid(),
            end_to_end_us: self.end_to_end_us,
            report: &self.orchestration.report,
        };
        serde_json::to_string_pretty(&summary).expect("report serializes")
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
        let config = dir.join(".config");
        std::fs::write(&config, &self.dotconfig).map_err(|e| BenchError::io(&config, e))?;
        let report = dir.join("report.json");
        std::fs::write(&report, self.report_json() + "\n").map_err(|e| BenchError::io(&report, e))
    }
}

pub fn run_orchestrate(tree: &TreeSource, opts: &OrchestrateOptions) -> Result<OrchestrateOutcome, BenchError> {
    let started = Instant::now();
    let objective = match (&opts.objective, tree.default_objective()) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.to_string(),
        (None, None) => return Err(BenchError::Config("an objective is required for trees outside the corpus".into())),
    };
    let remote;
    let parser: &dyn ObjectiveParser = match opts.strategy {
        Strategy::Mock => &MockParser,
        Strategy::Remote => {
            remote = RemoteParser::from_env()?;
            &remote
        }
    };
    let parsed = tree.parse_graph()?;
    let orchestration = orchestrate_parsed(parsed, &objective, parser, &opts.params, opts.mapping.as_ref())?;
    let dotconfig = orchestration.selection.to_dotconfig(&orchestration.graph);
    let outcome = OrchestrateOutcome {
        tree: tree.name(),
        strategy: opts.strategy,
        orchestration,
        dotconfig,
        end_to_end_us: started.elapsed().as_micros(),
    };
    if let Some(dir) = &opts.out_dir {
        outcome.write_artifacts(dir)?;
    }
    Ok(outcome)
}

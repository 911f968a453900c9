//! Suite files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tenonos_core::Cycles;
use tenonos_rt::{workloads, Scenario, ScenarioMetrics};

use crate::BenchError;

const BUNDLED: &[(&str, &str)] = &[
    ("full", include_str!("../suites/full.json")),
    ("table3", include_str!("../suites/table3.json")),
    ("table4", include_str!("../suites/table4.json")),
    ("table5", include_str!("../suites/table5.json")),
    ("fig8", include_str!("../suites/fig8.json")),
    ("fig9", include_str!("../suites/fig9.json")),
];

/// A generated workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Workload {
    ThreadSwitch { threads: u32, ectx: bool, rounds: u32 },
    Preemption { ectx: bool, rounds: u32, #[serde(default)] ready: u32 },
    SemWakeup { ectx: bool, rounds: u32 },
    Interrupt { count: u32 },
    TimerLoad { seed: u64, timers: u32, window: Cycles, #[serde(default)] fixed_tick: Option<Cycles> },
    HypercallMix { threads: u32, calls: u32 },
    Soak { seed: u64, events: u32 },
}

impl Workload {
    /// Builds the scenario. `seed_offset` shifts the seed of randomized
    /// workloads.
    pub fn scenario(&self, seed_offset: u64) -> Scenario {
        match *self {
            Workload::ThreadSwitch { threads, ectx, rounds } => workloads::thread_switch(threads, ectx, rounds),
            Workload::Preemption { ectx, rounds, ready } => workloads::preemption(ectx, rounds, ready),
            Workload::SemWakeup { ectx, rounds } => workloads::sem_wakeup(ectx, rounds),
            Workload::Interrupt { count } => workloads::interrupt(count),
            Workload::TimerLoad { seed, timers, window, fixed_tick } => {
                workloads::timer_load(seed.wrapping_add(seed_offset), timers, window, fixed_tick)
            }
            Workload::HypercallMix { threads, calls } => workloads::hypercall_mix(threads, calls),
            Workload::Soak { seed, events } => workloads::soak(seed.wrapping_add(seed_offset), events),
        }
    }
}

/// Where a scenario runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deploy {
    /// Directly on the simulated CPU, no hypervisor.
    #[default]
    Bare,
    /// Alone in a statically pinned instance on two CPUs.
    Mode1,
    /// Pinned to one CPU next to a busy neighbor instance on two others.
    Mode1Neighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<Workload>,
    /// Scenario file, relative to the suite file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Overrides the profile given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default)]
    pub deploy: Deploy,
    pub metrics: Vec<String>,
    /// Metric name to reference key (`suite/row/column`).
    #[serde(default)]
    pub reference: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSuite {
    pub name: String,
    #[serde(default)]
    pub scenarios: Vec<SuiteEntry>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl BenchmarkSuite {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let suite: BenchmarkSuite = serde_json::from_str(text).map_err(|e| BenchError::SuiteParse(e.to_string()))?;
        suite.check()?;
        Ok(suite)
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut suite = Self::from_json(&text)?;
        suite.base_dir = path.parent().map(Path::to_path_buf);
        Ok(suite)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_json(text).expect("bundled suite parses"))
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    /// `builtin:<name>` names a bundled suite; anything else is a path.
    pub fn load(spec: &str) -> Result<Self, BenchError> {
        match spec.strip_prefix("builtin:") {
            Some(name) => Self::bundled(name).ok_or_else(|| BenchError::SuiteParse(format!("no bundled suite `{name}`"))),
            None => Self::from_file(Path::new(spec)),
        }
    }

    fn check(&self) -> Result<(), BenchError> {
        let mut names = std::collections::BTreeSet::new();
        for e in &self.scenarios {
            if !names.insert(e.name.as_str()) {
                return Err(BenchError::SuiteParse(format!("scenario `{}` listed twice", e.name)));
            }
            if e.workload.is_some() == e.file.is_some() {
                return Err(BenchError::SuiteParse(format!(
                    "scenario `{}` needs exactly one of `workload` and `file`",
                    e.name
                )));
            }
            for m in e.metrics.iter().chain(e.reference.keys()) {
                if !ScenarioMetrics::NAMES.contains(&m.as_str()) {
                    return Err(BenchError::UnknownMetric { scenario: e.name.clone(), metric: m.clone() });
                }
            }
            if let Some(m) = e.reference.keys().find(|m| !e.metrics.contains(m)) {
                return Err(BenchError::SuiteParse(format!(
                    "scenario `{}` references metric `{m}` it does not emit",
                    e.name
                )));
            }
        }
        Ok(())
    }

    /// Resolves an entry to a runnable scenario.
    pub fn scenario(&self, entry: &SuiteEntry, seed_offset: u64) -> Result<Scenario, BenchError> {
        if let Some(w) = &entry.workload {
            return Ok(w.scenario(seed_offset));
        }
        let rel = entry.file.as_ref().expect("checked at load");
        let path = match &self.base_dir {
            Some(dir) if rel.is_relative() => dir.join(rel),
            _ => rel.clone(),
        };
        let text = std::fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
        Scenario::from_json(&text).map_err(|e| BenchError::ScenarioParse { name: entry.name.clone(), reason: e.to_string() })
    }
}

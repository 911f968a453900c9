//! Suite execution.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use tenonos_core::CostProfile;

use crate::colocate::run_deployed;
use crate::reference::ReferenceData;
use crate::report::{Report, ReportRow};
use crate::suite::{BenchmarkSuite, SuiteEntry};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Used by entries that name no profile.
    pub profile: CostProfile,
    /// Added to the seed of every randomized workload.
    pub seed: u64,
}

impl BenchOptions {
    pub fn new(profile: CostProfile) -> Self {
        Self { profile, seed: 0 }
    }
}

/// A bundled profile name, or a path to a profile file.
pub fn load_profile(spec: &str) -> Result<CostProfile, BenchError> {
    if spec.ends_with(".json") || Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).map_err(|e| BenchError::io(spec, e))?;
        return CostProfile::from_json(&text).map_err(BenchError::from);
    }
    Ok(CostProfile::bundled(spec)?)
}

fn entry_rows(
    suite: &BenchmarkSuite,
    entry: &SuiteEntry,
    profile: &CostProfile,
    refs: &ReferenceData,
    seed: u64,
) -> Result<Vec<ReportRow>, BenchError> {
    let scenario = suite.scenario(entry, seed)?;
    let metrics = run_deployed(&scenario, entry.deploy, profile)?;
    entry
        .metrics
        .iter()
        .map(|m| {
            let simulated = metrics
                .get(m)
                .ok_or_else(|| BenchError::MissingMetric { scenario: entry.name.clone(), metric: m.clone() })?;
            let reference = entry.reference.get(m).map(|key| refs.get(key).expect("checked before running"));
            Ok(ReportRow {
                scenario: entry.name.clone(),
                metric: m.clone(),
                simulated,
                reference: reference.map(|r| r.value),
                source: reference.map(|r| r.source.clone()),
            })
        })
        .collect()
}

/// Runs every entry of `suite` and assembles the rows in suite order.
///
/// Profiles and reference keys are resolved before anything runs, so an
/// input error never leaves a partial report behind.
pub fn run_bench(suite: &BenchmarkSuite, refs: &ReferenceData, opts: &BenchOptions) -> Result<Report, BenchError> {
    let mut profiles: BTreeMap<&str, CostProfile> = BTreeMap::new();
    for e in &suite.scenarios {
        if let Some(name) = &e.profile {
            if !profiles.contains_key(name.as_str()) {
                profiles.insert(name, CostProfile::bundled(name)?);
            }
        }
        if let Some(key) = e.reference.values().find(|k| refs.get(k).is_none()) {
            return Err(BenchError::UnknownReference(key.clone()));
        }
    }
    let per_entry: Vec<Result<Vec<ReportRow>, BenchError>> = suite
        .scenarios
        .par_iter()
        .map(|e| {
            let profile = e.profile.as_deref().map_or(&opts.profile, |n| &profiles[n]);
            entry_rows(suite, e, profile, refs, opts.seed)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_entry {
        rows.extend(r?);
    }
    Ok(Report { rows })
}

//! The same Tenon scenario on bare metal, alone in a pinned instance, and
//! pinned next to a busy neighbor.

use serde::{Deserialize, Serialize};
use tenonos_core::{keys, CostProfile, Cycles};
use tenonos_mortise::{boot_static, colocate, InstanceConfig, InstanceId, StaticBootConfig};
use tenonos_rt::{BareMetal, Scenario, ScenarioMetrics, ScenarioRunner};

use crate::suite::{Deploy, Workload};
use crate::BenchError;

const VICTIM: u32 = 1;
const NEIGHBOR: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborConfig {
    pub cpus: Vec<u32>,
    pub workload: Workload,
}

impl Default for NeighborConfig {
    fn default() -> Self {
        Self {
            cpus: vec![2, 3],
            workload: Workload::Preemption { ectx: true, rounds: 30, ready: 3 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColocateConfig {
    #[serde(default = "default_cpus")]
    pub machine_cpus: u32,
    /// CPUs of the instance running the scenario when it is alone.
    #[serde(default = "default_solo")]
    pub victim_cpus: Vec<u32>,
    /// CPUs of the scenario's instance when the neighbor is present.
    #[serde(default = "default_shared")]
    pub shared_victim_cpus: Vec<u32>,
    #[serde(default)]
    pub neighbor: NeighborConfig,
    #[serde(default = "default_quantum")]
    pub quantum: Cycles,
}

fn default_cpus() -> u32 {
    4
}
fn default_solo() -> Vec<u32> {
    vec![1, 2]
}
fn default_shared() -> Vec<u32> {
    vec![1]
}
fn default_quantum() -> Cycles {
    5_000
}

impl Default for ColocateConfig {
    fn default() -> Self {
        Self {
            machine_cpus: default_cpus(),
            victim_cpus: default_solo(),
            shared_victim_cpus: default_shared(),
            neighbor: NeighborConfig::default(),
            quantum: default_quantum(),
        }
    }
}

impl ColocateConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }
}

fn bare(scenario: &Scenario, profile: &CostProfile) -> Result<ScenarioMetrics, BenchError> {
    let fail = |source| BenchError::Scenario { name: scenario.name.clone(), source };
    let runner = ScenarioRunner::new(scenario, profile).map_err(fail)?;
    Ok(runner.run(&mut BareMetal::new()).map_err(fail)?.metrics)
}

fn solo(scenario: &Scenario, profile: &CostProfile, cfg: &ColocateConfig) -> Result<ScenarioMetrics, BenchError> {
    let boot = StaticBootConfig::new(cfg.machine_cpus, vec![InstanceConfig::pinned(VICTIM, cfg.victim_cpus.clone())]);
    let mut sys = boot_static(&boot, profile)?;
    let out = colocate(&mut sys, &[(InstanceId(VICTIM), scenario.clone())], profile, cfg.quantum)?;
    Ok(out.into_iter().next().expect("one guest").metrics)
}

fn shared(
    scenario: &Scenario,
    profile: &CostProfile,
    cfg: &ColocateConfig,
) -> Result<(ScenarioMetrics, ScenarioMetrics), BenchError> {
    let boot = StaticBootConfig::new(
        cfg.machine_cpus,
        vec![
            InstanceConfig::pinned(VICTIM, cfg.shared_victim_cpus.clone()),
            InstanceConfig::pinned(NEIGHBOR, cfg.neighbor.cpus.clone()),
        ],
    );
    let mut sys = boot_static(&boot, profile)?;
    let guests = [
        (InstanceId(VICTIM), scenario.clone()),
        (InstanceId(NEIGHBOR), cfg.neighbor.workload.scenario(0)),
    ];
    let mut out = colocate(&mut sys, &guests, profile, cfg.quantum)?.into_iter();
    let victim = out.next().expect("victim").metrics;
    let neighbor = out.next().expect("neighbor").metrics;
    Ok((victim, neighbor))
}

/// Runs `scenario` in one deployment shape with the default colocation
/// layout.
pub fn run_deployed(scenario: &Scenario, deploy: Deploy, profile: &CostProfile) -> Result<ScenarioMetrics, BenchError> {
    let cfg = ColocateConfig::default();
    match deploy {
        Deploy::Bare => bare(scenario, profile),
        Deploy::Mode1 => solo(scenario, profile, &cfg),
        Deploy::Mode1Neighbor => Ok(shared(scenario, profile, &cfg)?.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColocateRow {
    pub metric: String,
    pub bare: Option<f64>,
    pub mode1: Option<f64>,
    pub mode1_neighbor: Option<f64>,
}

impl ColocateRow {
    pub fn delta_mode1(&self) -> Option<f64> {
        Some(self.mode1? - self.bare?)
    }

    pub fn delta_neighbor(&self) -> Option<f64> {
        Some(self.mode1_neighbor? - self.mode1?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColocateReport {
    pub scenario: String,
    pub profile: String,
    pub bare: ScenarioMetrics,
    pub mode1: ScenarioMetrics,
    pub mode1_neighbor: ScenarioMetrics,
    /// The neighbor's own metrics in the shared run.
    pub neighbor: ScenarioMetrics,
    pub rows: Vec<ColocateRow>,
    pub hypercall_trap: Cycles,
    /// `mode1.total_cycles - bare.total_cycles`.
    pub total_delta: i128,
    /// What that delta must be: one trap per hypercall.
    pub expected_delta: i128,
}

impl ColocateReport {
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"));
        let mut out = format!(
            "{:<24} {:>14} {:>14} {:>16} {:>12} {:>14}\n",
            "metric", "bare", "mode1", "mode1+neighbor", "d(mode1)", "d(neighbor)"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>14} {:>14} {:>16} {:>12} {:>14}\n",
                r.metric,
                cell(r.bare),
                cell(r.mode1),
                cell(r.mode1_neighbor),
                cell(r.delta_mode1()),
                cell(r.delta_neighbor())
            ));
        }
        out.push_str(&format!(
            "hypercalls: {} x trap {} = expected delta {}, observed {}\n",
            self.mode1.hypercalls, self.hypercall_trap, self.expected_delta, self.total_delta
        ));
        out
    }
}

/// Runs `scenario` in all three shapes and lines the metrics up.
pub fn run_colocate(scenario: &Scenario, cfg: &ColocateConfig, profile: &CostProfile) -> Result<ColocateReport, BenchError> {
    let b = bare(scenario, profile)?;
    let m1 = solo(scenario, profile, cfg)?;
    let (mn, neighbor) = shared(scenario, profile, cfg)?;
    let rows = ScenarioMetrics::NAMES
        .iter()
        .map(|name| ColocateRow {
            metric: name.to_string(),
            bare: b.get(name),
            mode1: m1.get(name),
            mode1_neighbor: mn.get(name),
        })
        .filter(|r| r.bare.is_some() || r.mode1.is_some() || r.mode1_neighbor.is_some())
        .collect();
    let trap = profile.cost(keys::HYPERCALL_TRAP)?;
    Ok(ColocateReport {
        scenario: scenario.name.clone(),
        profile: profile.name.clone(),
        total_delta: m1.total_cycles as i128 - b.total_cycles as i128,
        expected_delta: m1.hypercalls as i128 * trap as i128,
        hypercall_trap: trap,
        bare: b,
        mode1: m1,
        mode1_neighbor: mn,
        neighbor,
        rows,
    })
}

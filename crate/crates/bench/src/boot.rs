//! Boot simulation report.

use serde::Serialize;
use tenonos_core::{keys, CostProfile, Cycles, EventKind};
use tenonos_mortise::{boot_dynamic, boot_static, BootConfig, InstanceKind, MortiseSystem};

use crate::reference::{ReferenceData, ReferenceEntry};
use crate::BenchError;

pub const WALL_CLOCK_NOTE: &str =
    "Reference boot times are wall-clock seconds measured on hardware; they are listed for comparison and are not reproduced by the cycle-cost simulation.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseMarker {
    pub step: u8,
    pub name: String,
    pub at: Cycles,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LaunchRecord {
    pub instance: u32,
    pub cpus: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootReport {
    /// `static`, `dynamic` or `bare`.
    pub mode: String,
    pub phases: Vec<PhaseMarker>,
    pub launches: Vec<LaunchRecord>,
    pub cpus_registered: usize,
    pub hv_init_cycles: Cycles,
    /// Every cycle charged during boot.
    pub init_cycles: Cycles,
    pub references: Vec<ReferenceEntry>,
    pub note: String,
}

impl BootReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("mode: {}\n", self.mode);
        for p in &self.phases {
            out.push_str(&format!("  phase {} {:<16} at {}\n", p.step, p.name, p.at));
        }
        for l in &self.launches {
            out.push_str(&format!("  launch I{} on cpus {:?}\n", l.instance, l.cpus));
        }
        out.push_str(&format!("cpus registered: {}\n", self.cpus_registered));
        out.push_str(&format!("hypervisor init cycles: {}\n", self.hv_init_cycles));
        out.push_str(&format!("total init cycles: {}\n", self.init_cycles));
        for r in &self.references {
            out.push_str(&format!("reference {} = {} {} ({})\n", r.key(), r.value, r.unit, r.source));
        }
        out.push_str(&self.note);
        out.push('\n');
        out
    }
}

fn table2_row(cfg: &BootConfig, bare: bool) -> Option<&'static str> {
    let BootConfig::Static(s) = cfg else { return None };
    let tenon = s.instances.iter().filter(|i| i.kind == InstanceKind::Tenon).count();
    let generic = s.instances.len() - tenon;
    Some(match (bare, tenon, generic) {
        (true, 1, 0) => "tenonos-bare",
        (true, 0, 1) => "linux-bare",
        (false, 1, 0) => "tenonos-solo",
        (false, 1, 1) => "tenonos-linux",
        (false, 0, 1) => "linux-solo",
        (false, 0, 2) => "linux-linux",
        _ => return None,
    })
}

fn summarize(sys: &MortiseSystem) -> (Vec<PhaseMarker>, Vec<LaunchRecord>, usize, Cycles, Cycles) {
    let mut phases = Vec::new();
    let mut launches = Vec::new();
    let (mut cpus, mut hv, mut total) = (0, 0, 0);
    for e in sys.events() {
        total += e.cost;
        match &e.kind {
            EventKind::BootPhase { step, name } => phases.push(PhaseMarker { step: *step, name: name.clone(), at: e.at }),
            EventKind::Launch { instance, cpus } => launches.push(LaunchRecord { instance: *instance, cpus: cpus.clone() }),
            EventKind::CpuRegistered { .. } => cpus += 1,
            EventKind::Cost { key } if key == keys::HV_INIT => hv += e.cost,
            _ => {}
        }
    }
    (phases, launches, cpus, hv, total)
}

/// Boots the configuration in `text` (`"mode": "static" | "dynamic"`).
///
/// With `bare` the configuration is still checked but no hypervisor is
/// brought up: no phases, no launches and zero hypervisor cycles.
pub fn run_boot(text: &str, profile: &CostProfile, bare: bool) -> Result<BootReport, BenchError> {
    let cfg: BootConfig = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
    let refs = ReferenceData::bundled();
    let references = table2_row(&cfg, bare)
        .map(|row| refs.suite("table2").filter(|e| e.row == row).cloned().collect())
        .unwrap_or_default();
    let note = WALL_CLOCK_NOTE.to_string();
    if bare {
        if let BootConfig::Static(s) = &cfg {
            if s.instances.len() != 1 {
                return Err(BenchError::Config("a bare boot runs exactly one guest".into()));
            }
        }
        return Ok(BootReport {
            mode: "bare".into(),
            phases: Vec::new(),
            launches: Vec::new(),
            cpus_registered: 0,
            hv_init_cycles: 0,
            init_cycles: 0,
            references,
            note,
        });
    }
    let (mode, sys) = match &cfg {
        BootConfig::Static(s) => ("static", boot_static(s, profile)?),
        BootConfig::Dynamic(p) => ("dynamic", boot_dynamic(p, profile)?),
    };
    let (phases, launches, cpus_registered, hv_init_cycles, init_cycles) = summarize(&sys);
    Ok(BootReport {
        mode: mode.into(),
        phases,
        launches,
        cpus_registered,
        hv_init_cycles,
        init_cycles,
        references,
        note,
    })
}

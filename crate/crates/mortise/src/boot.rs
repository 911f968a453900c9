//! Boot sequences for both allocation modes.
//!
//! Static boot runs four phases: initialize the hypervisor on CPU 0, read
//! the configuration, register the remaining CPUs, launch each instance on
//! its dedicated CPUs. Dynamic boot runs the same first three phases, then
//! installs the lifecycle hypercalls and waits for requests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tenonos_core::{keys, CostProfile, EventKind};

use crate::hypercall::{Handler, LifecycleCall};
use crate::instance::{Instance, InstanceId, InstanceKind, InstanceSpec};
use crate::memory::Perm;
use crate::system::{Mode, MortiseSystem};
use crate::MortiseError;

pub const PHASES_STATIC: [&str; 4] = ["init-hypervisor", "read-config", "register-cpus", "launch"];
pub const PHASES_DYNAMIC: [&str; 4] = ["init-hypervisor", "read-config", "register-cpus", "await-requests"];

/// Platform services every booted system routes.
pub const HC_VERSION: u32 = 0x20;
pub const HC_CPU_ID: u32 = 0x21;
pub const HC_NOP: u32 = 0x22;

fn default_cpus() -> u32 {
    4
}

fn default_colors() -> u32 {
    16
}

fn default_region_size() -> u64 {
    64 * 1024
}

fn default_perm() -> Perm {
    Perm::Rw
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IidRepr {
    Num(u32),
    Name(String),
}

impl IidRepr {
    fn resolve(&self) -> Result<u32, MortiseError> {
        match self {
            IidRepr::Num(n) => Ok(*n),
            IidRepr::Name(s) => s
                .trim_start_matches(|c: char| !c.is_ascii_digit())
                .parse()
                .map_err(|_| MortiseError::Config(format!("instance id `{s}` has no number"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionConfig {
    Name(String),
    Full {
        name: String,
        #[serde(default = "default_region_size")]
        size: u64,
        #[serde(default = "default_perm")]
        perm: Perm,
    },
}

impl RegionConfig {
    fn parts(&self) -> (&str, u64, Perm) {
        match self {
            RegionConfig::Name(n) => (n, default_region_size(), Perm::Rw),
            RegionConfig::Full { name, size, perm } => (name, *size, *perm),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub colors: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceConfig {
    #[serde(default)]
    pub iid: Option<IidRepr>,
    #[serde(default)]
    pub kind: InstanceKind,
    pub cpus: Vec<u32>,
    /// Regions named by more than one instance are shared between them.
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    #[serde(default)]
    pub coloring: ColoringConfig,
    #[serde(default)]
    pub priority: u32,
}

impl InstanceConfig {
    pub fn pinned(iid: u32, cpus: impl IntoIterator<Item = u32>) -> Self {
        Self {
            iid: Some(IidRepr::Num(iid)),
            kind: InstanceKind::Tenon,
            cpus: cpus.into_iter().collect(),
            regions: Vec::new(),
            coloring: ColoringConfig::default(),
            priority: 0,
        }
    }

    pub fn with_kind(mut self, kind: InstanceKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_colors(mut self, colors: u32) -> Self {
        self.coloring = ColoringConfig { enabled: true, colors };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticBootConfig {
    #[serde(default = "default_cpus")]
    pub machine_cpus: u32,
    #[serde(default = "default_colors")]
    pub total_colors: u32,
    #[serde(default)]
    pub instances: Vec<InstanceConfig>,
}

impl StaticBootConfig {
    pub fn new(machine_cpus: u32, instances: Vec<InstanceConfig>) -> Self {
        Self {
            machine_cpus,
            total_colors: default_colors(),
            instances,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[serde(alias = "strict_priority", alias = "priority")]
    StrictPriority,
    #[serde(alias = "round_robin", alias = "rr")]
    RoundRobin,
    Edf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicPolicy {
    #[serde(rename = "policy")]
    pub kind: PolicyKind,
    #[serde(default)]
    pub slice_cycles: u64,
    #[serde(default = "default_cpus")]
    pub machine_cpus: u32,
    #[serde(default = "default_colors")]
    pub total_colors: u32,
    /// Instances the policy expects to be asked for; validated at boot but
    /// not launched.
    #[serde(default)]
    pub instances: Vec<InstanceSpec>,
}

impl DynamicPolicy {
    pub fn new(kind: PolicyKind, machine_cpus: u32) -> Self {
        Self {
            kind,
            slice_cycles: if kind == PolicyKind::RoundRobin { 10_000 } else { 0 },
            machine_cpus,
            total_colors: default_colors(),
            instances: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), MortiseError> {
        if self.machine_cpus < 2 {
            return Err(MortiseError::InvalidPolicy("need at least one guest cpu".into()));
        }
        if self.kind == PolicyKind::RoundRobin && self.slice_cycles == 0 {
            return Err(MortiseError::InvalidPolicy("round-robin needs slice_cycles > 0".into()));
        }
        if self.kind == PolicyKind::StrictPriority {
            let mut seen = BTreeSet::new();
            for s in &self.instances {
                if !seen.insert(s.priority) {
                    return Err(MortiseError::InvalidPolicy(format!(
                        "duplicate priority {} under strict-priority",
                        s.priority
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BootConfig {
    Static(StaticBootConfig),
    Dynamic(DynamicPolicy),
}

pub fn boot_from_json(text: &str, profile: &CostProfile) -> Result<MortiseSystem, MortiseError> {
    let cfg: BootConfig = serde_json::from_str(text).map_err(|e| MortiseError::Config(e.to_string()))?;
    match cfg {
        BootConfig::Static(c) => boot_static(&c, profile),
        BootConfig::Dynamic(p) => boot_dynamic(&p, profile),
    }
}

fn phase(sys: &mut MortiseSystem, step: u8, name: &str) {
    sys.clock.emit(EventKind::BootPhase { step, name: name.to_string() });
}

fn platform_group(sys: &mut MortiseSystem) -> Result<(), MortiseError> {
    let cpus: BTreeMap<u32, u64> = sys
        .registry()
        .assignment()
        .into_iter()
        .rev()
        .map(|(c, i)| (i.0, c as u64))
        .collect();
    sys.register_hypercall_group(
        "platform",
        [
            (HC_VERSION, Handler::func("version", |_, _| Ok(1))),
            (
                HC_CPU_ID,
                Handler::func("cpu_id", move |caller, _| {
                    Ok(caller.and_then(|c| cpus.get(&c.0).copied()).unwrap_or(0))
                }),
            ),
            (HC_NOP, Handler::func("nop", |_, _| Ok(0))),
        ],
    )
}

fn init(sys: &mut MortiseSystem, names: &[&str; 4]) -> Result<(), MortiseError> {
    phase(sys, 1, names[0]);
    sys.clock.advance(keys::HV_INIT, &sys.profile().clone())?;
    sys.add_region("hv-text", 256 * 1024, true);
    sys.add_region("hv-shared", 4096, true);
    phase(sys, 2, names[1]);
    phase(sys, 3, names[2]);
    let profile = sys.profile().clone();
    for cpu in sys.registry().guest_cpus() {
        sys.clock.advance(keys::CPU_REGISTER, &profile)?;
        sys.clock.emit(EventKind::CpuRegistered { cpu });
    }
    Ok(())
}

fn validate_static(cfg: &StaticBootConfig) -> Result<Vec<(u32, BTreeSet<u32>)>, MortiseError> {
    if cfg.instances.is_empty() {
        return Err(MortiseError::EmptyInstanceList);
    }
    let mut owner: BTreeMap<u32, InstanceId> = BTreeMap::new();
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (n, ic) in cfg.instances.iter().enumerate() {
        let iid = match &ic.iid {
            Some(r) => r.resolve()?,
            None => n as u32 + 1,
        };
        if iid == 0 {
            return Err(MortiseError::Config("instance id 0 is reserved for the host".into()));
        }
        if !ids.insert(iid) {
            return Err(MortiseError::DuplicateInstance(InstanceId(iid)));
        }
        if ic.cpus.is_empty() {
            return Err(MortiseError::EmptyCpuSet(InstanceId(iid)));
        }
        let mut set = BTreeSet::new();
        for &cpu in &ic.cpus {
            if cpu >= cfg.machine_cpus {
                return Err(MortiseError::UnknownCpu(cpu));
            }
            if cpu == 0 {
                return Err(MortiseError::ReservedCpu);
            }
            if let Some(prev) = owner.insert(cpu, InstanceId(iid)) {
                if prev != InstanceId(iid) {
                    return Err(MortiseError::OverlappingCpuSets { cpu, a: prev, b: InstanceId(iid) });
                }
            }
            set.insert(cpu);
        }
        out.push((iid, set));
    }
    let wanted: u32 = cfg.instances.iter().filter(|i| i.coloring.enabled).map(|i| i.coloring.colors).sum();
    if wanted > cfg.total_colors {
        return Err(MortiseError::InsufficientColors { requested: wanted, free: cfg.total_colors });
    }
    Ok(out)
}

/// Mode 1 boot. Fails before touching any state if the configuration is
/// inconsistent.
pub fn boot_static(cfg: &StaticBootConfig, profile: &CostProfile) -> Result<MortiseSystem, MortiseError> {
    let resolved = validate_static(cfg)?;
    let mut sys = MortiseSystem::empty(Mode::Static, cfg.machine_cpus, cfg.total_colors, profile.clone());
    init(&mut sys, &PHASES_STATIC)?;
    phase(&mut sys, 4, PHASES_STATIC[3]);
    let hv_shared = sys.region_by_name("hv-shared").expect("created at init").rid;
    for (ic, (iid, cpus)) in cfg.instances.iter().zip(resolved) {
        let iid = sys.alloc_iid(Some(iid))?;
        sys.insert_instance(Instance::new(iid, ic.kind, ic.priority, cpus.len() as u32));
        let private = sys.add_region(format!("{iid}-mem"), 1 << 20, false);
        sys.grant(private, iid, Perm::Rw)?;
        sys.grant(hv_shared, iid, Perm::Ro)?;
        for rc in &ic.regions {
            let (name, size, perm) = rc.parts();
            let rid = match sys.region_by_name(name) {
                Some(r) => r.rid,
                None => sys.add_region(name, size, false),
            };
            sys.grant(rid, iid, perm)?;
        }
        if ic.coloring.enabled {
            sys.assign_colors(iid, ic.coloring.colors)?;
        }
        sys.pin(iid, &cpus);
        sys.launch(iid)?;
    }
    platform_group(&mut sys)?;
    Ok(sys)
}

/// Mode 2 boot: CPUs registered but unassigned, lifecycle group installed,
/// nothing launched.
pub fn boot_dynamic(policy: &DynamicPolicy, profile: &CostProfile) -> Result<MortiseSystem, MortiseError> {
    policy.validate()?;
    let mut sys = MortiseSystem::empty(Mode::Dynamic, policy.machine_cpus, policy.total_colors, profile.clone());
    sys.set_policy(policy.clone());
    init(&mut sys, &PHASES_DYNAMIC)?;
    phase(&mut sys, 4, PHASES_DYNAMIC[3]);
    sys.register_hypercall_group(
        "lifecycle",
        LifecycleCall::IDS.iter().map(|(id, c)| (*id, Handler::Lifecycle(*c))),
    )?;
    platform_group(&mut sys)?;
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_iids_resolve() {
        assert_eq!(IidRepr::Name("I7".into()).resolve().unwrap(), 7);
        assert!(IidRepr::Name("linux".into()).resolve().is_err());
    }

    #[test]
    fn parse_static_json() {
        let text = r#"{"mode":"static","instances":[
            {"iid":"I1","kind":"tenon","cpus":[1],"regions":["shm"],"coloring":{"enabled":true,"colors":4}},
            {"iid":2,"kind":"linux","cpus":[2,3],"regions":[{"name":"shm","perm":"RO"}]}
        ]}"#;
        let cfg: BootConfig = serde_json::from_str(text).unwrap();
        assert!(matches!(cfg, BootConfig::Static(ref c) if c.instances.len() == 2));
    }

    #[test]
    fn parse_dynamic_json() {
        let text = r#"{"mode":"dynamic","policy":"round-robin","slice_cycles":500}"#;
        let cfg: BootConfig = serde_json::from_str(text).unwrap();
        assert!(matches!(cfg, BootConfig::Dynamic(ref p) if p.kind == PolicyKind::RoundRobin));
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use tenonos_core::Cycles;

use crate::memory::RegionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u32);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    #[default]
    #[serde(alias = "Tenon")]
    Tenon,
    #[serde(alias = "generic", alias = "linux", alias = "GenericGuest", alias = "generic_guest")]
    GenericGuest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceState {
    Created,
    Running,
    Paused,
    Terminated,
}

impl InstanceState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Created => "created",
            Self::Running => "running",
            Self::Paused => "paused",
            Self::Terminated => "terminated",
        }
    }
}

/// What a dynamic Create request asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(default)]
    pub kind: InstanceKind,
    #[serde(default)]
    pub priority: u32,
    #[serde(default = "one")]
    pub cpu_demand: u32,
    #[serde(default)]
    pub deadline: Option<Cycles>,
    #[serde(default)]
    pub colors: Option<u32>,
}

fn one() -> u32 {
    1
}

impl InstanceSpec {
    pub fn new(priority: u32, cpu_demand: u32) -> Self {
        Self {
            kind: InstanceKind::Tenon,
            priority,
            cpu_demand,
            deadline: None,
            colors: None,
        }
    }

    pub fn with_deadline(mut self, deadline: Cycles) -> Self {
        self.deadline = Some(deadline);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Instance {
    pub iid: InstanceId,
    pub kind: InstanceKind,
    pub state: InstanceState,
    pub cpus: BTreeSet<u32>,
    pub regions: BTreeSet<RegionId>,
    pub priority: u32,
    pub colors: Option<BTreeSet<u32>>,
    pub cpu_demand: u32,
    pub deadline: Option<Cycles>,
    /// Paused because a higher-priority instance took its CPUs, not on
    /// request; such an instance resumes on its own.
    pub preempted: bool,
    pub deadline_missed: bool,
}

impl Instance {
    pub fn new(iid: InstanceId, kind: InstanceKind, priority: u32, cpu_demand: u32) -> Self {
        Self {
            iid,
            kind,
            state: InstanceState::Created,
            cpus: BTreeSet::new(),
            regions: BTreeSet::new(),
            priority,
            colors: None,
            cpu_demand,
            deadline: None,
            preempted: false,
            deadline_missed: false,
        }
    }

    /// Wants CPUs from the dynamic scheduler.
    pub fn runnable(&self) -> bool {
        match self.state {
            InstanceState::Created | InstanceState::Running => true,
            InstanceState::Paused => self.preempted,
            InstanceState::Terminated => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CpuSlot {
    Unassigned,
    Hypervisor,
    AssignedTo(InstanceId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CpuRegistry {
    cpus: BTreeMap<u32, CpuSlot>,
}

impl CpuRegistry {
    /// CPU 0 hosts the hypervisor; the rest start unassigned.
    pub fn new(machine_cpus: u32) -> Self {
        let cpus = (0..machine_cpus)
            .map(|c| (c, if c == 0 { CpuSlot::Hypervisor } else { CpuSlot::Unassigned }))
            .collect();
        Self { cpus }
    }

    pub fn len(&self) -> usize {
        self.cpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cpus.is_empty()
    }

    pub fn get(&self, cpu: u32) -> Option<CpuSlot> {
        self.cpus.get(&cpu).copied()
    }

    pub fn set(&mut self, cpu: u32, slot: CpuSlot) {
        self.cpus.insert(cpu, slot);
    }

    pub fn slots(&self) -> &BTreeMap<u32, CpuSlot> {
        &self.cpus
    }

    /// Every CPU a guest could be given.
    pub fn guest_cpus(&self) -> Vec<u32> {
        self.cpus
            .iter()
            .filter(|(_, s)| **s != CpuSlot::Hypervisor)
            .map(|(c, _)| *c)
            .collect()
    }

    pub fn owned_by(&self, iid: InstanceId) -> BTreeSet<u32> {
        self.cpus
            .iter()
            .filter(|(_, s)| **s == CpuSlot::AssignedTo(iid))
            .map(|(c, _)| *c)
            .collect()
    }

    pub fn release(&mut self, iid: InstanceId) {
        for slot in self.cpus.values_mut() {
            if *slot == CpuSlot::AssignedTo(iid) {
                *slot = CpuSlot::Unassigned;
            }
        }
    }

    /// cpu -> instance for every assigned CPU.
    pub fn assignment(&self) -> BTreeMap<u32, InstanceId> {
        self.cpus
            .iter()
            .filter_map(|(c, s)| match s {
                CpuSlot::AssignedTo(i) => Some((*c, *i)),
                _ => None,
            })
            .collect()
    }
}

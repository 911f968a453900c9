//! Per-primitive cost tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clock::Cycles;
use crate::SimError;

/// Primitive-operation keys understood by the bundled layers.
pub mod keys {
    pub const CTX_SAVE: &str = "ctx_save";
    pub const CTX_RESTORE: &str = "ctx_restore";
    pub const ECTX_SAVE: &str = "ectx_save";
    pub const ECTX_RESTORE: &str = "ectx_restore";
    pub const QUEUE_SCAN_PER_THREAD: &str = "queue_scan_per_thread";
    pub const IRQ_CTX_SAVE: &str = "irq_ctx_save";
    pub const ISR_DISPATCH: &str = "isr_dispatch";
    pub const IRQ_CTX_RESTORE: &str = "irq_ctx_restore";
    pub const SEM_WAKE: &str = "sem_wake";
    pub const TICK_HANDLER: &str = "tick_handler";
    pub const TIMER_REPROGRAM: &str = "timer_reprogram";
    pub const TIMER_FIRE: &str = "timer_fire";
    pub const HYPERCALL_TRAP: &str = "hypercall_trap";
    pub const IPC_COPY_PER_MSG: &str = "ipc_copy_per_msg";
    pub const IPC_HANDOFF: &str = "ipc_handoff";
    pub const NET_STACK_PER_MSG: &str = "net_stack_per_msg";
    pub const HV_INIT: &str = "hv_init";
    pub const CPU_REGISTER: &str = "cpu_register";
    pub const INSTANCE_LAUNCH: &str = "instance_launch";
    pub const COLOR_SETUP: &str = "color_setup";

    /// Every key a bundled profile defines.
    pub const ALL: &[&str] = &[
        CTX_SAVE,
        CTX_RESTORE,
        ECTX_SAVE,
        ECTX_RESTORE,
        QUEUE_SCAN_PER_THREAD,
        IRQ_CTX_SAVE,
        ISR_DISPATCH,
        IRQ_CTX_RESTORE,
        SEM_WAKE,
        TICK_HANDLER,
        TIMER_REPROGRAM,
        TIMER_FIRE,
        HYPERCALL_TRAP,
        IPC_COPY_PER_MSG,
        IPC_HANDOFF,
        NET_STACK_PER_MSG,
        HV_INIT,
        CPU_REGISTER,
        INSTANCE_LAUNCH,
        COLOR_SETUP,
    ];
}

const BUNDLED: &[(&str, &str)] = &[
    ("tenon-paper", include_str!("../profiles/tenon-paper.json")),
    (
        "tenon-noectx-paper",
        include_str!("../profiles/tenon-noectx-paper.json"),
    ),
    ("zephyr-paper", include_str!("../profiles/zephyr-paper.json")),
    ("rtthread-paper", include_str!("../profiles/rtthread-paper.json")),
];

/// A named table mapping primitive keys to cycle costs.
///
/// Costs are unsigned, so a negative entry in a profile file fails to parse.
/// Looking up a key the table does not define is an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostProfile {
    pub name: String,
    pub costs: BTreeMap<String, Cycles>,
}

impl CostProfile {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            costs: BTreeMap::new(),
        }
    }

    /// Profile defining every standard key at zero cost.
    pub fn zero(name: impl Into<String>) -> Self {
        let mut p = Self::new(name);
        for k in keys::ALL {
            p.costs.insert((*k).to_string(), 0);
        }
        p
    }

    pub fn with(mut self, key: impl Into<String>, cycles: Cycles) -> Self {
        self.costs.insert(key.into(), cycles);
        self
    }

    pub fn set(&mut self, key: impl Into<String>, cycles: Cycles) {
        self.costs.insert(key.into(), cycles);
    }

    pub fn cost(&self, key: &str) -> Result<Cycles, SimError> {
        self.costs
            .get(key)
            .copied()
            .ok_or_else(|| SimError::UnknownCostKey {
                profile: self.name.clone(),
                key: key.to_string(),
            })
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidProfile(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn bundled(name: &str) -> Result<Self, SimError> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| SimError::UnknownProfile(name.to_string()))?;
        Self::from_json(text)
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }
}

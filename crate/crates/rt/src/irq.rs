//! Interrupt entry: save context, dispatch the ISR, restore context.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use tenonos_core::{keys, CostProfile, CycleClock, Cycles, EventKind};

use crate::kernel::Action;
use crate::RtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IsrId(pub u32);

impl fmt::Display for IsrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "isr{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Isr {
    #[serde(default)]
    pub body_cycles: Cycles,
    #[serde(default)]
    pub resched: bool,
    #[serde(default)]
    pub action: Action,
}

impl Isr {
    pub fn empty() -> Self {
        Self {
            body_cycles: 0,
            resched: false,
            action: Action::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterruptPipeline {
    save_key: String,
    dispatch_key: String,
    restore_key: String,
    isrs: BTreeMap<IsrId, Isr>,
}

impl Default for InterruptPipeline {
    fn default() -> Self {
        Self::new()
    }
}

impl InterruptPipeline {
    pub fn new() -> Self {
        Self::with_keys(keys::IRQ_CTX_SAVE, keys::ISR_DISPATCH, keys::IRQ_CTX_RESTORE)
    }

    pub fn with_keys(save: &str, dispatch: &str, restore: &str) -> Self {
        Self {
            save_key: save.to_string(),
            dispatch_key: dispatch.to_string(),
            restore_key: restore.to_string(),
            isrs: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, id: IsrId, isr: Isr) {
        self.isrs.insert(id, isr);
    }

    pub fn isr(&self, id: IsrId) -> Option<&Isr> {
        self.isrs.get(&id)
    }

    /// Runs the three phases around the handler body and returns the total
    /// cycles with the handler that ran. The caller applies its flag effects.
    pub fn handle_interrupt(
        &self,
        id: IsrId,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<(Cycles, &Isr), RtError> {
        let isr = self.isrs.get(&id).ok_or(RtError::UnknownIsr(id))?;
        let mut cycles = clock.advance(&self.save_key, profile)?;
        cycles += clock.advance(&self.dispatch_key, profile)?;
        if isr.body_cycles > 0 {
            cycles += clock.charge(isr.body_cycles, "isr_body")?;
        }
        cycles += clock.advance(&self.restore_key, profile)?;
        clock.emit(EventKind::Irq { isr: id.0 });
        Ok((cycles, isr))
    }
}

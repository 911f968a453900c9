use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThreadId(pub u32);

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreadState {
    Ready,
    Running,
    Blocked,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub tid: ThreadId,
    /// Higher value wins.
    pub priority: u8,
    pub state: ThreadState,
    /// Save the extended (FPU/SIMD) register file on every switch.
    pub ectx: bool,
    pub owner: ProcessId,
}

impl Thread {
    pub fn new(tid: u32, priority: u8) -> Self {
        Self {
            tid: ThreadId(tid),
            priority,
            state: ThreadState::Ready,
            ectx: false,
            owner: ProcessId::default(),
        }
    }

    pub fn with_ectx(mut self, ectx: bool) -> Self {
        self.ectx = ectx;
        self
    }

    pub fn in_process(mut self, owner: u32) -> Self {
        self.owner = ProcessId(owner);
        self
    }
}

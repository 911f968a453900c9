//! Virtual cycle clock with an append-only event log.

use serde::Serialize;

use crate::cost::CostProfile;
use crate::SimError;

/// Virtual CPU cycles.
pub type Cycles = u64;

/// What happened at a point on the virtual timeline.
///
/// The vocabulary covers every layer of the stack so that one log can be
/// audited end to end. Only [`EventKind::Cost`] and [`EventKind::Idle`]
/// carry a non-zero cost; the rest are markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Cost { key: String },
    Idle,
    ContextSwitch { from: Option<u32>, to: u32 },
    Irq { isr: u32 },
    Tick,
    TimerFire { timer: u32 },
    SemWake { sem: u32, thread: u32 },
    Hypercall { caller: u32, id: u32 },
    BootPhase { step: u8, name: String },
    CpuRegistered { cpu: u32 },
    Launch { instance: u32, cpus: Vec<u32> },
    Lifecycle { instance: u32, from: String, to: String },
    Preempted { instance: u32, by: Option<u32> },
    CpuAssigned { cpu: u32, instance: Option<u32> },
    InstanceRun { instance: u32, cpu: u32 },
    Access { instance: u32, region: String, access: String, allowed: bool },
    IsolationViolation { instance: u32, detail: String },
    IvcTransfer { channel: u32, instance: u32, op: String, bytes: usize },
    DeadlineMiss { instance: u32 },
    Marker { label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub at: Cycles,
    pub cost: Cycles,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Monotonic virtual clock.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CycleClock {
    start: Cycles,
    now: Cycles,
    log: Vec<Event>,
}

impl CycleClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(now: Cycles) -> Self {
        Self {
            start: now,
            now,
            log: Vec::new(),
        }
    }

    pub fn now(&self) -> Cycles {
        self.now
    }

    pub fn start(&self) -> Cycles {
        self.start
    }

    /// Cycles elapsed since the clock was created.
    pub fn elapsed(&self) -> Cycles {
        self.now - self.start
    }

    pub fn events(&self) -> &[Event] {
        &self.log
    }

    /// Charges one primitive operation and returns its cost.
    pub fn advance(&mut self, key: &str, profile: &CostProfile) -> Result<Cycles, SimError> {
        self.advance_times(key, 1, profile)
    }

    /// Charges `times` repetitions of a primitive as a single log entry.
    pub fn advance_times(
        &mut self,
        key: &str,
        times: u64,
        profile: &CostProfile,
    ) -> Result<Cycles, SimError> {
        let unit = profile.cost(key)?;
        let delta = unit.checked_mul(times).ok_or(SimError::ClockOverflow {
            now: self.now,
            delta: unit,
        })?;
        self.charge(delta, key)
    }

    /// Charges an arbitrary number of cycles under a label, e.g. an ISR body
    /// whose cost is part of the workload rather than the profile.
    pub fn charge(&mut self, cycles: Cycles, label: &str) -> Result<Cycles, SimError> {
        let at = self.now;
        self.bump(cycles)?;
        self.log.push(Event {
            at,
            cost: cycles,
            kind: EventKind::Cost {
                key: label.to_string(),
            },
        });
        Ok(cycles)
    }

    /// Idles forward to `t`. Returns the idle cycles, zero when `t` is not
    /// in the future.
    pub fn idle_until(&mut self, t: Cycles) -> Result<Cycles, SimError> {
        if t <= self.now {
            return Ok(0);
        }
        let delta = t - self.now;
        let at = self.now;
        self.bump(delta)?;
        self.log.push(Event {
            at,
            cost: delta,
            kind: EventKind::Idle,
        });
        Ok(delta)
    }

    /// Logs a zero-cost marker at the current instant.
    pub fn emit(&mut self, kind: EventKind) {
        self.log.push(Event {
            at: self.now,
            cost: 0,
            kind,
        });
    }

    /// Sum of the cost column of the log.
    pub fn logged_cost(&self) -> Cycles {
        self.log.iter().map(|e| e.cost).sum()
    }

    fn bump(&mut self, delta: Cycles) -> Result<(), SimError> {
        self.now = self.now.checked_add(delta).ok_or(SimError::ClockOverflow {
            now: self.now,
            delta,
        })?;
        Ok(())
    }
}

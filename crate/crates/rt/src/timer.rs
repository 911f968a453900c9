//! Dual-mode timer subsystem.
//!
//! In fixed-tick mode a periodic tick runs the timer check regardless of
//! whether anything is due; in tickless mode the hardware comparator is
//! reprogrammed to the next deadline and only real expirations cost time.
//! Both modes fire the same timers at the same (deadline) times.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tenonos_core::{keys, CostProfile, CycleClock, Cycles, EventKind};

use crate::RtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimerId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HandlerId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerMode {
    #[serde(alias = "fixed-tick", alias = "FixedTick", alias = "fixed")]
    FixedTick,
    #[serde(alias = "Tickless")]
    Tickless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FiredTimer {
    pub id: TimerId,
    pub handler: HandlerId,
    pub at: Cycles,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TimerCostReport {
    pub management_cycles: Cycles,
    pub fires: Vec<FiredTimer>,
    pub tick_count: u64,
}

impl TimerCostReport {
    pub fn fire_count(&self) -> usize {
        self.fires.len()
    }

    fn merge(&mut self, other: TimerCostReport) {
        self.management_cycles += other.management_cycles;
        self.fires.extend(other.fires);
        self.tick_count += other.tick_count;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Armed {
    id: TimerId,
    handler: HandlerId,
    period: Option<Cycles>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimerSubsystem {
    mode: TimerMode,
    tick_period: Cycles,
    /// Keyed by (deadline, arming sequence) so equal deadlines fire in
    /// registration order.
    armed: BTreeMap<(Cycles, u64), Armed>,
    seq: u64,
    next_id: u32,
    reprograms: u64,
    next_tick: Option<Cycles>,
}

impl TimerSubsystem {
    pub fn tickless() -> Self {
        Self::build(TimerMode::Tickless, 0)
    }

    pub fn fixed_tick(tick_period: Cycles) -> Result<Self, RtError> {
        if tick_period == 0 {
            return Err(RtError::ZeroTickPeriod);
        }
        Ok(Self::build(TimerMode::FixedTick, tick_period))
    }

    pub fn new(mode: TimerMode, tick_period: Cycles) -> Result<Self, RtError> {
        match mode {
            TimerMode::Tickless => Ok(Self::build(mode, tick_period)),
            TimerMode::FixedTick => Self::fixed_tick(tick_period),
        }
    }

    fn build(mode: TimerMode, tick_period: Cycles) -> Self {
        Self {
            mode,
            tick_period,
            armed: BTreeMap::new(),
            seq: 0,
            next_id: 0,
            reprograms: 0,
            next_tick: None,
        }
    }

    /// Lays the fixed-tick grid down at `origin`. Without this the grid
    /// starts wherever the first `run_until` call finds the clock.
    pub fn anchor_ticks(&mut self, origin: Cycles) {
        self.next_tick = Some(origin);
    }

    pub fn mode(&self) -> TimerMode {
        self.mode
    }

    pub fn tick_period(&self) -> Cycles {
        self.tick_period
    }

    pub fn pending(&self) -> usize {
        self.armed.len()
    }

    pub fn earliest(&self) -> Option<Cycles> {
        self.armed.keys().next().map(|(d, _)| *d)
    }

    /// Comparator reprogramming events triggered by `arm` in tickless mode.
    pub fn arm_reprograms(&self) -> u64 {
        self.reprograms
    }

    /// Registers a timer. `period` makes it periodic.
    pub fn arm(
        &mut self,
        deadline: Cycles,
        handler: HandlerId,
        period: Option<Cycles>,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<TimerId, RtError> {
        if deadline < clock.now() {
            return Err(RtError::DeadlineInPast {
                deadline,
                now: clock.now(),
            });
        }
        if period == Some(0) {
            return Err(RtError::ZeroPeriod);
        }
        if self.mode == TimerMode::Tickless && self.earliest().is_none_or(|e| deadline < e) {
            clock.advance(keys::TIMER_REPROGRAM, profile)?;
            self.reprograms += 1;
        }
        let id = TimerId(self.next_id);
        self.next_id += 1;
        self.insert(deadline, Armed { id, handler, period });
        Ok(id)
    }

    pub fn cancel(&mut self, id: TimerId) -> bool {
        let key = self
            .armed
            .iter()
            .find(|(_, a)| a.id == id)
            .map(|(k, _)| *k);
        key.and_then(|k| self.armed.remove(&k)).is_some()
    }

    fn insert(&mut self, deadline: Cycles, armed: Armed) {
        self.armed.insert((deadline, self.seq), armed);
        self.seq += 1;
    }

    /// Advances the clock through the half-open window `[now, t_end)`,
    /// firing every timer whose deadline falls before `t_end`. Fixed ticks
    /// stay on the grid laid down by the first call, so splitting a window
    /// never adds or drops ticks. The clock ends at `max(t_end, now)`.
    pub fn run_until(
        &mut self,
        t_end: Cycles,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<TimerCostReport, RtError> {
        let mut report = TimerCostReport::default();
        match self.mode {
            TimerMode::Tickless => {
                while let Some(fire) = self.pop_due(t_end) {
                    clock.idle_until(fire.at)?;
                    report.management_cycles += clock.advance(keys::TIMER_REPROGRAM, profile)?;
                    report.management_cycles += self.fire(fire, clock, profile)?;
                    report.fires.push(fire);
                }
            }
            TimerMode::FixedTick => {
                let mut next_tick = *self.next_tick.get_or_insert(clock.now());
                loop {
                    // Expirations are attributed to their own deadline; the
                    // tick only pays for discovering them.
                    while let Some(fire) = self.pop_due(next_tick.min(t_end)) {
                        clock.idle_until(fire.at)?;
                        report.management_cycles += self.fire(fire, clock, profile)?;
                        report.fires.push(fire);
                    }
                    if next_tick >= t_end {
                        break;
                    }
                    clock.idle_until(next_tick)?;
                    report.management_cycles += clock.advance(keys::TICK_HANDLER, profile)?;
                    clock.emit(EventKind::Tick);
                    report.tick_count += 1;
                    next_tick += self.tick_period;
                }
                self.next_tick = Some(next_tick);
            }
        }
        clock.idle_until(t_end)?;
        Ok(report)
    }

    /// `run_until` that accumulates into an existing report.
    pub fn run_until_into(
        &mut self,
        t_end: Cycles,
        clock: &mut CycleClock,
        profile: &CostProfile,
        into: &mut TimerCostReport,
    ) -> Result<(), RtError> {
        let r = self.run_until(t_end, clock, profile)?;
        into.merge(r);
        Ok(())
    }

    fn pop_due(&mut self, before: Cycles) -> Option<FiredTimer> {
        let (&(deadline, seq), _) = self.armed.iter().next()?;
        if deadline >= before {
            return None;
        }
        let armed = self.armed.remove(&(deadline, seq)).expect("key present");
        let fire = FiredTimer {
            id: armed.id,
            handler: armed.handler,
            at: deadline,
        };
        if let Some(p) = armed.period {
            self.insert(deadline + p, armed);
        }
        Some(fire)
    }

    fn fire(
        &self,
        fire: FiredTimer,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<Cycles, RtError> {
        let c = clock.advance(keys::TIMER_FIRE, profile)?;
        clock.emit(EventKind::TimerFire { timer: fire.id.0 });
        Ok(c)
    }
}

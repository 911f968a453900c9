//! One Tenon instance: scheduler, semaphores, timers and interrupts on a
//! shared clock.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tenonos_core::{CostProfile, CycleClock, Cycles};

use crate::irq::{InterruptPipeline, Isr, IsrId};
use crate::sched::{SchedDecision, Scheduler};
use crate::sem::{SemId, SemWait, Semaphore};
use crate::thread::{Thread, ThreadId, ThreadState};
use crate::timer::{HandlerId, TimerCostReport, TimerId, TimerMode, TimerSubsystem};
use crate::RtError;

/// Side effect attached to an ISR or timer handler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    #[default]
    None,
    PostSem(SemId),
    Unblock(ThreadId),
    Resched,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InterruptOutcome {
    pub cycles: Cycles,
    pub woken: Option<ThreadId>,
}

#[derive(Debug, Clone)]
pub struct TenonKernel {
    pub sched: Scheduler,
    pub clock: CycleClock,
    profile: CostProfile,
    sems: BTreeMap<SemId, Semaphore>,
    timers: TimerSubsystem,
    irqs: InterruptPipeline,
    handlers: BTreeMap<HandlerId, Action>,
    decisions: Vec<SchedDecision>,
    timer_report: TimerCostReport,
    arm_cycles: Cycles,
}

impl TenonKernel {
    pub fn new(profile: CostProfile, mode: TimerMode, tick_period: Cycles) -> Result<Self, RtError> {
        let mut timers = TimerSubsystem::new(mode, tick_period)?;
        timers.anchor_ticks(0);
        Ok(Self {
            sched: Scheduler::new(),
            clock: CycleClock::new(),
            profile,
            sems: BTreeMap::new(),
            timers,
            irqs: InterruptPipeline::new(),
            handlers: BTreeMap::new(),
            decisions: Vec::new(),
            timer_report: TimerCostReport::default(),
            arm_cycles: 0,
        })
    }

    pub fn profile(&self) -> &CostProfile {
        &self.profile
    }

    pub fn split(&mut self) -> (&mut CycleClock, &CostProfile) {
        (&mut self.clock, &self.profile)
    }

    pub fn timers(&self) -> &TimerSubsystem {
        &self.timers
    }

    pub fn semaphore(&self, id: SemId) -> Option<&Semaphore> {
        self.sems.get(&id)
    }

    /// Every scheduling decision taken so far, in order.
    pub fn decisions(&self) -> &[SchedDecision] {
        &self.decisions
    }

    pub fn timer_report(&self) -> &TimerCostReport {
        &self.timer_report
    }

    /// Cycles spent reprogramming the comparator when arming timers.
    pub fn arm_cycles(&self) -> Cycles {
        self.arm_cycles
    }

    pub fn spawn(&mut self, thread: Thread) -> Result<(), RtError> {
        self.sched.spawn(thread)
    }

    pub fn add_semaphore(&mut self, id: SemId, count: u32) {
        self.sems.insert(id, Semaphore::new(id, count));
    }

    pub fn register_isr(&mut self, id: IsrId, isr: Isr) {
        self.irqs.register(id, isr);
    }

    pub fn bind_handler(&mut self, handler: HandlerId, action: Action) {
        self.handlers.insert(handler, action);
    }

    /// A scheduling point. With every thread blocked the CPU idles and
    /// `None` is returned instead of an error.
    pub fn schedule(&mut self, yield_requested: bool) -> Result<Option<SchedDecision>, RtError> {
        match self.sched.schedule(yield_requested, &mut self.clock, &self.profile) {
            Ok(d) => {
                self.decisions.push(d.clone());
                Ok(Some(d))
            }
            Err(RtError::NoRunnableThread) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn sem_wait(&mut self, id: SemId) -> Result<SemWait, RtError> {
        let sem = self.sems.get_mut(&id).ok_or(RtError::UnknownSemaphore(id))?;
        let out = sem.wait(&mut self.sched, &mut self.clock, &self.profile)?;
        if let SemWait::Blocked(d) = &out {
            self.decisions.push(d.clone());
        }
        Ok(out)
    }

    /// Like [`Self::sem_wait`], but an empty run queue idles the CPU.
    pub fn sem_wait_or_idle(&mut self, id: SemId) -> Result<Option<SemWait>, RtError> {
        match self.sem_wait(id) {
            Ok(w) => Ok(Some(w)),
            Err(RtError::NoRunnableThread) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn sem_post(&mut self, id: SemId) -> Result<Option<ThreadId>, RtError> {
        let sem = self.sems.get_mut(&id).ok_or(RtError::UnknownSemaphore(id))?;
        sem.post(&mut self.sched, &mut self.clock, &self.profile)
    }

    pub fn interrupt(&mut self, id: IsrId) -> Result<InterruptOutcome, RtError> {
        let (cycles, isr) = self.irqs.handle_interrupt(id, &mut self.clock, &self.profile)?;
        let (resched, action) = (isr.resched, isr.action);
        if resched {
            self.sched.request_resched();
        }
        let woken = self.apply(action)?;
        Ok(InterruptOutcome { cycles, woken })
    }

    pub fn arm_timer(
        &mut self,
        deadline: Cycles,
        handler: HandlerId,
        period: Option<Cycles>,
    ) -> Result<TimerId, RtError> {
        let before = self.clock.now();
        let id = self
            .timers
            .arm(deadline, handler, period, &mut self.clock, &self.profile)?;
        self.arm_cycles += self.clock.now() - before;
        Ok(id)
    }

    /// Advances to `t`, firing timers as they fall due. Each batch of fires
    /// raises `need_resched`, applies the bound actions and reschedules.
    pub fn advance_to(&mut self, t: Cycles) -> Result<(), RtError> {
        while let Some(d) = self.timers.earliest().filter(|d| *d < t) {
            let report = self.timers.run_until(d + 1, &mut self.clock, &self.profile)?;
            let fired: Vec<HandlerId> = report.fires.iter().map(|f| f.handler).collect();
            self.timer_report.management_cycles += report.management_cycles;
            self.timer_report.tick_count += report.tick_count;
            self.timer_report.fires.extend(report.fires);
            if fired.is_empty() {
                continue;
            }
            self.sched.request_resched();
            for h in fired {
                let action = self.handlers.get(&h).copied().unwrap_or_default();
                self.apply(action)?;
            }
            if self.sched.current().is_some() || self.sched.ready_count() > 0 {
                self.schedule(false)?;
            }
        }
        let report = self.timers.run_until(t, &mut self.clock, &self.profile)?;
        self.timer_report.management_cycles += report.management_cycles;
        self.timer_report.tick_count += report.tick_count;
        self.timer_report.fires.extend(report.fires);
        Ok(())
    }

    fn apply(&mut self, action: Action) -> Result<Option<ThreadId>, RtError> {
        match action {
            Action::None => Ok(None),
            Action::Resched => {
                self.sched.request_resched();
                Ok(None)
            }
            Action::PostSem(id) => self.sem_post(id),
            // Waking a thread that is not blocked is a no-op.
            Action::Unblock(tid) => match self.sched.thread(tid).map(|t| t.state) {
                Some(ThreadState::Blocked) => {
                    self.sched.unblock(tid)?;
                    Ok(Some(tid))
                }
                Some(_) => Ok(None),
                None => Err(RtError::UnknownThread(tid)),
            },
        }
    }
}

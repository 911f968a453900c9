//! Priority-preemptive scheduler.
//!
//! `schedule` follows the flowchart branch for branch:
//!
//! 1. rescheduling requested and `prev` still ready: switch only when
//!    preemption is enabled, the scheduler is unlocked, and a strictly
//!    higher-priority thread is waiting;
//! 2. `prev` not ready (blocked, terminated, or no thread yet): hand the CPU
//!    to the highest-priority ready thread;
//! 3. `prev` yields: requeue it at the tail of its priority FIFO, then pick;
//! 4. otherwise keep running `prev`.
//!
//! A thread that loses the CPU to preemption goes back to the head of its
//! FIFO; yielding and waking threads join the tail.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;
use tenonos_core::{keys, CostProfile, CycleClock, Cycles, EventKind};

use crate::thread::{Thread, ThreadId, ThreadState};
use crate::RtError;

/// Which flowchart branch produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SchedBranch {
    /// Rescheduling was requested and honoured.
    Preempt,
    /// Rescheduling was requested but preemption is off or the scheduler is
    /// locked; the request stays pending.
    Deferred,
    /// The previous thread could not continue.
    Handoff,
    Yield,
    Continue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchedDecision {
    pub branch: SchedBranch,
    pub prev: Option<ThreadId>,
    pub next: ThreadId,
    pub switched: bool,
    pub cycles: Cycles,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheduler {
    threads: BTreeMap<ThreadId, Thread>,
    run_queue: BTreeMap<u8, VecDeque<ThreadId>>,
    current: Option<ThreadId>,
    need_resched: bool,
    preemption_enabled: bool,
    sched_locked: bool,
}

impl Default for Scheduler {
    fn default() -> Self {
        Self::new()
    }
}

impl Scheduler {
    pub fn new() -> Self {
        Self {
            threads: BTreeMap::new(),
            run_queue: BTreeMap::new(),
            current: None,
            need_resched: false,
            preemption_enabled: true,
            sched_locked: false,
        }
    }

    pub fn current(&self) -> Option<ThreadId> {
        self.current
    }

    pub fn current_thread(&self) -> Option<&Thread> {
        self.current.and_then(|t| self.threads.get(&t))
    }

    pub fn thread(&self, tid: ThreadId) -> Option<&Thread> {
        self.threads.get(&tid)
    }

    pub fn threads(&self) -> impl Iterator<Item = &Thread> {
        self.threads.values()
    }

    pub fn need_resched(&self) -> bool {
        self.need_resched
    }

    pub fn request_resched(&mut self) {
        self.need_resched = true;
    }

    pub fn preemption_enabled(&self) -> bool {
        self.preemption_enabled
    }

    pub fn set_preemption(&mut self, enabled: bool) {
        self.preemption_enabled = enabled;
    }

    pub fn locked(&self) -> bool {
        self.sched_locked
    }

    pub fn lock(&mut self) {
        self.sched_locked = true;
    }

    pub fn unlock(&mut self) {
        self.sched_locked = false;
    }

    /// Ready threads in selection order: priority descending, FIFO within a
    /// level.
    pub fn ready_order(&self) -> Vec<ThreadId> {
        self.run_queue
            .iter()
            .rev()
            .flat_map(|(_, q)| q.iter().copied())
            .collect()
    }

    pub fn queue_at(&self, priority: u8) -> Vec<ThreadId> {
        self.run_queue
            .get(&priority)
            .map(|q| q.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn ready_count(&self) -> usize {
        self.run_queue.values().map(VecDeque::len).sum()
    }

    /// Adds a ready thread at the tail of its priority FIFO.
    pub fn spawn(&mut self, mut thread: Thread) -> Result<(), RtError> {
        if self.threads.contains_key(&thread.tid) {
            return Err(RtError::DuplicateThread(thread.tid));
        }
        thread.state = ThreadState::Ready;
        let (tid, prio) = (thread.tid, thread.priority);
        self.threads.insert(tid, thread);
        self.enqueue_tail(tid, prio);
        self.raise_if_outranks(prio);
        Ok(())
    }

    /// Blocks a thread. Blocking the running thread leaves it current but not
    /// ready; the next `schedule` hands the CPU away.
    pub fn block(&mut self, tid: ThreadId) -> Result<(), RtError> {
        let thread = self
            .threads
            .get_mut(&tid)
            .ok_or(RtError::UnknownThread(tid))?;
        match thread.state {
            ThreadState::Running => thread.state = ThreadState::Blocked,
            ThreadState::Ready => {
                thread.state = ThreadState::Blocked;
                let prio = thread.priority;
                self.remove_queued(tid, prio);
            }
            state => {
                return Err(RtError::BadThreadState {
                    tid,
                    state,
                    expected: ThreadState::Running,
                })
            }
        }
        Ok(())
    }

    pub fn block_current(&mut self) -> Result<ThreadId, RtError> {
        let tid = self.current.ok_or(RtError::NothingRunning)?;
        self.block(tid)?;
        Ok(tid)
    }

    /// Blocked → Ready at the tail of the thread's FIFO.
    pub fn unblock(&mut self, tid: ThreadId) -> Result<(), RtError> {
        let thread = self
            .threads
            .get_mut(&tid)
            .ok_or(RtError::UnknownThread(tid))?;
        if thread.state != ThreadState::Blocked {
            return Err(RtError::BadThreadState {
                tid,
                state: thread.state,
                expected: ThreadState::Blocked,
            });
        }
        thread.state = ThreadState::Ready;
        let prio = thread.priority;
        self.enqueue_tail(tid, prio);
        self.raise_if_outranks(prio);
        Ok(())
    }

    pub fn terminate(&mut self, tid: ThreadId) -> Result<(), RtError> {
        let thread = self
            .threads
            .get_mut(&tid)
            .ok_or(RtError::UnknownThread(tid))?;
        let was = thread.state;
        thread.state = ThreadState::Terminated;
        if was == ThreadState::Ready {
            let prio = thread.priority;
            self.remove_queued(tid, prio);
        }
        Ok(())
    }

    /// Runs one scheduling point for the current thread.
    pub fn schedule(
        &mut self,
        yield_requested: bool,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<SchedDecision, RtError> {
        let prev = self.current;
        let prev_ready = prev
            .and_then(|t| self.threads.get(&t))
            .is_some_and(|t| t.state == ThreadState::Running);

        if self.need_resched && prev_ready {
            let prev = prev.expect("ready prev exists");
            if !(self.preemption_enabled && !self.sched_locked) {
                return Ok(SchedDecision {
                    branch: SchedBranch::Deferred,
                    prev: Some(prev),
                    next: prev,
                    switched: false,
                    cycles: 0,
                });
            }
            self.need_resched = false;
            let mut cycles = self.charge_scan(self.ready_count() + 1, clock, profile)?;
            let prev_prio = self.threads[&prev].priority;
            let outranked = self.top_priority().is_some_and(|p| p > prev_prio);
            if !outranked {
                return Ok(SchedDecision {
                    branch: SchedBranch::Preempt,
                    prev: Some(prev),
                    next: prev,
                    switched: false,
                    cycles,
                });
            }
            let next = self.pop_highest().expect("outranking thread queued");
            self.set_state(prev, ThreadState::Ready);
            self.enqueue_head(prev, prev_prio);
            cycles += self.switch_to(Some(prev), next, clock, profile)?;
            return Ok(SchedDecision {
                branch: SchedBranch::Preempt,
                prev: Some(prev),
                next,
                switched: true,
                cycles,
            });
        }

        if !prev_ready {
            self.need_resched = false;
            let mut cycles = self.charge_scan(self.ready_count(), clock, profile)?;
            let next = self.pop_highest().ok_or(RtError::NoRunnableThread)?;
            cycles += self.switch_to(prev, next, clock, profile)?;
            return Ok(SchedDecision {
                branch: SchedBranch::Handoff,
                prev,
                next,
                switched: true,
                cycles,
            });
        }

        let prev = prev.expect("ready prev exists");
        if yield_requested {
            let prio = self.threads[&prev].priority;
            self.set_state(prev, ThreadState::Ready);
            self.enqueue_tail(prev, prio);
            let mut cycles = self.charge_scan(self.ready_count(), clock, profile)?;
            let next = self.pop_highest().expect("prev was just queued");
            if next == prev {
                self.set_state(prev, ThreadState::Running);
                return Ok(SchedDecision {
                    branch: SchedBranch::Yield,
                    prev: Some(prev),
                    next,
                    switched: false,
                    cycles,
                });
            }
            cycles += self.switch_to(Some(prev), next, clock, profile)?;
            return Ok(SchedDecision {
                branch: SchedBranch::Yield,
                prev: Some(prev),
                next,
                switched: true,
                cycles,
            });
        }

        Ok(SchedDecision {
            branch: SchedBranch::Continue,
            prev: Some(prev),
            next: prev,
            switched: false,
            cycles: 0,
        })
    }

    /// A ready thread that outranks the running one while preemption is
    /// enabled and the scheduler unlocked, if any.
    pub fn priority_violation(&self) -> Option<(ThreadId, ThreadId)> {
        if !self.preemption_enabled || self.sched_locked {
            return None;
        }
        let cur = self.current_thread()?;
        if cur.state != ThreadState::Running {
            return None;
        }
        let (prio, q) = self.run_queue.iter().next_back()?;
        (*prio > cur.priority).then(|| (q[0], cur.tid))
    }

    fn charge_scan(
        &self,
        ready: usize,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<Cycles, RtError> {
        Ok(clock.advance_times(keys::QUEUE_SCAN_PER_THREAD, ready as u64, profile)?)
    }

    fn switch_to(
        &mut self,
        prev: Option<ThreadId>,
        next: ThreadId,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<Cycles, RtError> {
        let prev_ectx = prev.and_then(|t| self.threads.get(&t)).is_some_and(|t| t.ectx);
        let next_ectx = self.threads[&next].ectx;
        let mut cycles = 0;
        if prev.is_some() {
            cycles += clock.advance(keys::CTX_SAVE, profile)?;
        }
        cycles += clock.advance(keys::CTX_RESTORE, profile)?;
        if prev_ectx || next_ectx {
            if prev.is_some() {
                cycles += clock.advance(keys::ECTX_SAVE, profile)?;
            }
            cycles += clock.advance(keys::ECTX_RESTORE, profile)?;
        }
        self.set_state(next, ThreadState::Running);
        self.current = Some(next);
        clock.emit(EventKind::ContextSwitch {
            from: prev.map(|t| t.0),
            to: next.0,
        });
        Ok(cycles)
    }

    fn raise_if_outranks(&mut self, prio: u8) {
        if let Some(cur) = self.current_thread() {
            if prio > cur.priority {
                self.need_resched = true;
            }
        }
    }

    fn top_priority(&self) -> Option<u8> {
        self.run_queue.keys().next_back().copied()
    }

    fn pop_highest(&mut self) -> Option<ThreadId> {
        let prio = self.top_priority()?;
        let q = self.run_queue.get_mut(&prio).expect("level exists");
        let tid = q.pop_front();
        if q.is_empty() {
            self.run_queue.remove(&prio);
        }
        tid
    }

    fn enqueue_tail(&mut self, tid: ThreadId, prio: u8) {
        self.run_queue.entry(prio).or_default().push_back(tid);
    }

    fn enqueue_head(&mut self, tid: ThreadId, prio: u8) {
        self.run_queue.entry(prio).or_default().push_front(tid);
    }

    fn remove_queued(&mut self, tid: ThreadId, prio: u8) {
        if let Some(q) = self.run_queue.get_mut(&prio) {
            q.retain(|t| *t != tid);
            if q.is_empty() {
                self.run_queue.remove(&prio);
            }
        }
    }

    fn set_state(&mut self, tid: ThreadId, state: ThreadState) {
        if let Some(t) = self.threads.get_mut(&tid) {
            t.state = state;
        }
    }
}

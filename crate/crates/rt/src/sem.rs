//! Counting semaphores with priority-ordered wait queues.

use std::fmt;

use serde::{Deserialize, Serialize};
use tenonos_core::{keys, CostProfile, CycleClock, EventKind};

use crate::sched::{SchedDecision, Scheduler};
use crate::thread::{ThreadId, ThreadState};
use crate::RtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemId(pub u32);

impl fmt::Display for SemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sem{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemWait {
    Acquired,
    /// The caller blocked; carries the scheduling decision that followed.
    Blocked(SchedDecision),
}

/// Invariant: a positive count implies no waiters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Semaphore {
    id: SemId,
    count: u32,
    /// (thread, priority), highest priority first, FIFO among equals.
    waiters: Vec<(ThreadId, u8)>,
}

impl Semaphore {
    pub fn new(id: SemId, count: u32) -> Self {
        Self {
            id,
            count,
            waiters: Vec::new(),
        }
    }

    pub fn id(&self) -> SemId {
        self.id
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn waiters(&self) -> Vec<ThreadId> {
        self.waiters.iter().map(|(t, _)| *t).collect()
    }

    pub fn waiter_priorities(&self) -> Vec<u8> {
        self.waiters.iter().map(|(_, p)| *p).collect()
    }

    /// Takes the semaphore on behalf of the running thread or blocks it.
    pub fn wait(
        &mut self,
        sched: &mut Scheduler,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<SemWait, RtError> {
        if self.count > 0 {
            self.count -= 1;
            return Ok(SemWait::Acquired);
        }
        let tid = sched
            .current_thread()
            .filter(|t| t.state == ThreadState::Running)
            .map(|t| t.tid)
            .ok_or(RtError::NothingRunning)?;
        let prio = sched.thread(tid).expect("current exists").priority;
        sched.block(tid)?;
        self.enqueue(tid, prio);
        let decision = sched.schedule(false, clock, profile)?;
        Ok(SemWait::Blocked(decision))
    }

    /// Releases the semaphore, waking the highest-priority waiter if any.
    pub fn post(
        &mut self,
        sched: &mut Scheduler,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<Option<ThreadId>, RtError> {
        // Waiters released by other means in the meantime are dropped.
        self.waiters
            .retain(|(t, _)| sched.thread(*t).is_some_and(|th| th.state == ThreadState::Blocked));
        if self.waiters.is_empty() {
            self.count += 1;
            return Ok(None);
        }
        let (tid, _) = self.waiters.remove(0);
        sched.unblock(tid)?;
        clock.advance(keys::SEM_WAKE, profile)?;
        sched.request_resched();
        clock.emit(EventKind::SemWake {
            sem: self.id.0,
            thread: tid.0,
        });
        Ok(Some(tid))
    }

    fn enqueue(&mut self, tid: ThreadId, prio: u8) {
        let pos = self
            .waiters
            .iter()
            .position(|(_, p)| *p < prio)
            .unwrap_or(self.waiters.len());
        self.waiters.insert(pos, (tid, prio));
    }
}

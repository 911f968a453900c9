//! The Tenon real-time layer.
//!
//! [`Scheduler`] implements the priority-driven scheduling flowchart: a
//! per-priority FIFO run queue, a `need_resched` flag raised by interrupts,
//! wakeups and timers, and a single `schedule` entry point that either keeps
//! the current thread or switches to the highest-priority ready one. The
//! interrupt pipeline, semaphores and the dual-mode timer subsystem all
//! charge their work to the same [`tenonos_core::CycleClock`].
//!
//! [`TenonKernel`] bundles these pieces into one instance and
//! [`ScenarioRunner`] drives it from a scenario file.

pub mod irq;
pub mod kernel;
pub mod port;
pub mod scenario;
pub mod sched;
pub mod sem;
pub mod thread;
pub mod timer;
pub mod workloads;

pub use irq::{InterruptPipeline, Isr, IsrId};
pub use kernel::{Action, TenonKernel};
pub use port::{BareMetal, PortError, ServicePort};
pub use scenario::{Scenario, ScenarioMetrics, ScenarioOutcome, ScenarioRunner};
pub use sched::{SchedBranch, SchedDecision, Scheduler};
pub use sem::{SemId, SemWait, Semaphore};
pub use thread::{ProcessId, Thread, ThreadId, ThreadState};
pub use timer::{FiredTimer, HandlerId, TimerCostReport, TimerId, TimerMode, TimerSubsystem};

use tenonos_core::{Cycles, SimError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RtError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no runnable thread")]
    NoRunnableThread,
    #[error("thread {0} already exists")]
    DuplicateThread(ThreadId),
    #[error("unknown thread {0}")]
    UnknownThread(ThreadId),
    #[error("thread {tid} is {state:?}, expected {expected:?}")]
    BadThreadState {
        tid: ThreadId,
        state: ThreadState,
        expected: ThreadState,
    },
    #[error("no thread is running")]
    NothingRunning,
    #[error("unknown interrupt source {0}")]
    UnknownIsr(IsrId),
    #[error("unknown semaphore {0}")]
    UnknownSemaphore(SemId),
    #[error("deadline {deadline} is before now ({now})")]
    DeadlineInPast { deadline: Cycles, now: Cycles },
    #[error("periodic timer needs a non-zero period")]
    ZeroPeriod,
    #[error("fixed-tick mode needs a non-zero tick period")]
    ZeroTickPeriod,
    #[error(transparent)]
    Port(#[from] PortError),
    #[error("scenario: {0}")]
    Scenario(String),
}

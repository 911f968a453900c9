//! Deterministic simulation substrate shared by the Tenon and Mortise layers.
//!
//! Everything here is measured in virtual CPU cycles. A [`CycleClock`] only
//! moves when a primitive operation is charged against a [`CostProfile`] or
//! when the simulation idles forward to a known instant, and every movement
//! is recorded in the clock's event log. Two runs fed the same inputs, the
//! same profile and the same seed produce identical logs.

pub mod clock;
pub mod cost;
pub mod pool;
pub mod rng;

pub use clock::{CycleClock, Cycles, Event, EventKind};
pub use cost::{keys, CostProfile};
pub use pool::{CompositionReport, LibraryPool, MicroLibrary, PoolError};
pub use rng::{seeded, SimRng};

use thiserror::Error;

/// Errors raised by the clock and cost-profile machinery.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("cost profile `{profile}` has no entry for `{key}`")]
    UnknownCostKey { profile: String, key: String },
    #[error("cycle counter overflow at {now} + {delta}")]
    ClockOverflow { now: Cycles, delta: Cycles },
    #[error("invalid cost profile: {0}")]
    InvalidProfile(String),
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
}

//! The Mortise hypervisor layer.
//!
//! A [`MortiseSystem`] is produced by [`boot_static`] (every instance pinned
//! to dedicated CPUs at boot) or [`boot_dynamic`] (instances created, paused
//! and reclaimed at run time through the lifecycle hypercall group, with
//! CPUs handed out by a policy). Guests reach the hypervisor only through
//! the [`HypercallTable`]; memory is modeled as regions with per-instance
//! permission classes, and inter-instance channels live in [`ivc`].

pub mod boot;
pub mod color;
pub mod guest;
pub mod hypercall;
pub mod instance;
pub mod ivc;
pub mod memory;
pub mod system;

pub use boot::{
    boot_dynamic, boot_from_json, boot_static, BootConfig, DynamicPolicy, InstanceConfig,
    PolicyKind, RegionConfig, StaticBootConfig,
};
pub use color::ColorPartition;
pub use guest::{audit_isolation, colocate, GuestPort};
pub use hypercall::{Handler, HypercallFn, HypercallTable, LifecycleCall};
pub use instance::{CpuRegistry, CpuSlot, Instance, InstanceId, InstanceKind, InstanceSpec, InstanceState};
pub use ivc::{Channel, SendOutcome};
pub use memory::{Access, AccessDecision, DenyReason, MemoryRegion, Perm, RegionId};
pub use system::{Caller, LifecycleAction, Mode, MortiseSystem};

use tenonos_core::SimError;
use tenonos_rt::RtError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MortiseError {
    #[error("function id {id:#x} already registered in group `{group}`")]
    DuplicateFunctionId { id: u32, group: String },
    #[error("hypercall group `{0}` already registered")]
    DuplicateGroupName(String),
    #[error("hypercall {0:#x} is not routable")]
    UnknownHypercall(u32),
    #[error("caller {0} is not running")]
    CallerNotRunning(InstanceId),
    #[error("hypercall handler failed: {0}")]
    HandlerFailed(String),
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error("instance {0} already exists")]
    DuplicateInstance(InstanceId),
    #[error("illegal transition for {iid}: {action} while {from:?}")]
    IllegalTransition {
        iid: InstanceId,
        from: InstanceState,
        action: &'static str,
    },
    #[error("configuration lists no instances")]
    EmptyInstanceList,
    #[error("cpu {cpu} assigned to both {a} and {b}")]
    OverlappingCpuSets { cpu: u32, a: InstanceId, b: InstanceId },
    #[error("cpu {0} does not exist on this machine")]
    UnknownCpu(u32),
    #[error("cpu 0 is reserved for the hypervisor")]
    ReservedCpu,
    #[error("instance {0} has no cpus")]
    EmptyCpuSet(InstanceId),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("requested {requested} colors but only {free} are free")]
    InsufficientColors { requested: u32, free: u32 },
    #[error("unknown region {0}")]
    UnknownRegion(RegionId),
    #[error("hypervisor region {0} may only be shared read-only or execute-only")]
    HypervisorRegionWritable(RegionId),
    #[error("channel capacity must be positive")]
    ZeroCapacity,
    #[error("unknown channel {0}")]
    UnknownChannel(u32),
    #[error("channel {0} already exists")]
    DuplicateChannel(u32),
    #[error("instance {iid} is not an endpoint of channel {cid} for this operation")]
    NotAnEndpoint { cid: u32, iid: InstanceId },
    #[error("message of {len} bytes exceeds channel limit {max}")]
    MessageTooLarge { len: usize, max: usize },
    #[error("zero-copy needs a shared-memory channel")]
    ZeroCopyNeedsSharedMemory,
    #[error("operation requires {0:?} mode")]
    WrongMode(Mode),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rt(#[from] RtError),
}

//! Services an instance reaches outside its own kernel.

use std::collections::{BTreeMap, VecDeque};

use tenonos_core::{keys, CostProfile, CycleClock, SimError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PortError {
    #[error("hypercall {0:#x} is not routable")]
    UnknownHypercall(u32),
    #[error("unknown channel {0}")]
    UnknownChannel(u32),
    #[error("denied: {0}")]
    Denied(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The boundary between a Tenon instance and whatever hosts it.
pub trait ServicePort {
    fn hypercall(
        &mut self,
        id: u32,
        args: &[u64],
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<u64, PortError>;

    /// Returns `false` when the channel is full.
    fn ivc_send(
        &mut self,
        channel: u32,
        payload: &[u8],
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<bool, PortError>;

    fn ivc_recv(
        &mut self,
        channel: u32,
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<Option<Vec<u8>>, PortError>;
}

/// No hypervisor underneath: services are linked in directly, so a
/// "hypercall" is an ordinary call that costs nothing extra, and channels
/// are local loopback queues.
#[derive(Debug, Clone, Default)]
pub struct BareMetal {
    queues: BTreeMap<u32, VecDeque<Vec<u8>>>,
    capacity: BTreeMap<u32, usize>,
}

impl BareMetal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_channel(mut self, channel: u32, capacity: usize) -> Self {
        self.add_channel(channel, capacity);
        self
    }

    pub fn add_channel(&mut self, channel: u32, capacity: usize) {
        self.queues.insert(channel, VecDeque::new());
        self.capacity.insert(channel, capacity);
    }
}

impl ServicePort for BareMetal {
    fn hypercall(
        &mut self,
        _id: u32,
        _args: &[u64],
        _clock: &mut CycleClock,
        _profile: &CostProfile,
    ) -> Result<u64, PortError> {
        Ok(0)
    }

    fn ivc_send(
        &mut self,
        channel: u32,
        payload: &[u8],
        clock: &mut CycleClock,
        profile: &CostProfile,
    ) -> Result<bool, PortError> {
        let q = self
            .queues
            .get_mut(&channel)
            .ok_or(PortError::UnknownChannel(channel))?;
        if q.len() >= self.capacity[&channel] {
            return Ok(false);
        }
        clock.advance(keys::IPC_COPY_PER_MSG, profile)?;
        q.push_back(payload.to_vec());
        Ok(true)
    }

    fn ivc_recv(
        &mut self,
        channel: u32,
        _clock: &mut CycleClock,
        _profile: &CostProfile,
    ) -> Result<Option<Vec<u8>>, PortError> {
        let q = self
            .queues
            .get_mut(&channel)
            .ok_or(PortError::UnknownChannel(channel))?;
        Ok(q.pop_front())
    }
}

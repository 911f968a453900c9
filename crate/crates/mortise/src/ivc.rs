//! Inter-instance channels: shared-memory rings and message queues.
//!
//! A channel joins two instances. A directed channel carries data from `a`
//! to `b` only. Every refused endpoint check is logged as an isolation
//! violation on the hypervisor timeline.

use std::collections::VecDeque;

use serde::Serialize;
use tenonos_core::{keys, CycleClock, Cycles, EventKind};
pub use tenonos_rt::scenario::{ChannelKind, ChannelSpec};

use crate::instance::{InstanceId, InstanceState};
use crate::memory::{Perm, RegionId};
use crate::system::MortiseSystem;
use crate::MortiseError;

pub const DEFAULT_MAX_MESSAGE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SendOutcome {
    Sent,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Channel {
    pub cid: u32,
    pub kind: ChannelKind,
    pub a: InstanceId,
    pub b: InstanceId,
    pub capacity: usize,
    pub directed: bool,
    pub zero_copy: bool,
    pub max_message: usize,
    pub region: Option<RegionId>,
    queue: VecDeque<Vec<u8>>,
    pub sent: u64,
    pub received: u64,
    pub cycles: Cycles,
}

impl Channel {
    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    fn may_send(&self, iid: InstanceId) -> bool {
        iid == self.a || (!self.directed && iid == self.b)
    }

    fn may_recv(&self, iid: InstanceId) -> bool {
        iid == self.b || (!self.directed && iid == self.a)
    }
}

impl MortiseSystem {
    pub fn channel(&self, cid: u32) -> Option<&Channel> {
        self.channels.get(&cid)
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.channels.values()
    }

    /// Opens a channel, allocating the next free id.
    pub fn open(
        &mut self,
        kind: ChannelKind,
        a: InstanceId,
        b: InstanceId,
        capacity: usize,
    ) -> Result<u32, MortiseError> {
        let cid = self.channels.keys().next_back().map_or(0, |c| c + 1);
        self.open_channel(&ChannelSpec {
            cid,
            kind,
            a: a.0,
            b: b.0,
            capacity,
            directed: false,
            zero_copy: false,
        })
    }

    pub fn open_channel(&mut self, spec: &ChannelSpec) -> Result<u32, MortiseError> {
        let (a, b) = (InstanceId(spec.a), InstanceId(spec.b));
        for iid in [a, b] {
            match self.instance(iid) {
                Some(i) if i.state != InstanceState::Terminated => {}
                _ => return Err(MortiseError::UnknownInstance(iid)),
            }
        }
        if spec.capacity == 0 {
            return Err(MortiseError::ZeroCapacity);
        }
        if spec.zero_copy && spec.kind != ChannelKind::SharedMemory {
            return Err(MortiseError::ZeroCopyNeedsSharedMemory);
        }
        if self.channels.contains_key(&spec.cid) {
            return Err(MortiseError::DuplicateChannel(spec.cid));
        }
        let region = match spec.kind {
            ChannelKind::SharedMemory => {
                let rid = self.add_region(format!("ivc-{}", spec.cid), (spec.capacity * DEFAULT_MAX_MESSAGE) as u64, false);
                self.grant(rid, a, Perm::Rw)?;
                self.grant(rid, b, Perm::Rw)?;
                Some(rid)
            }
            ChannelKind::MessageQueue => None,
        };
        self.channels.insert(
            spec.cid,
            Channel {
                cid: spec.cid,
                kind: spec.kind,
                a,
                b,
                capacity: spec.capacity,
                directed: spec.directed,
                zero_copy: spec.zero_copy,
                max_message: DEFAULT_MAX_MESSAGE,
                region,
                queue: VecDeque::new(),
                sent: 0,
                received: 0,
                cycles: 0,
            },
        );
        Ok(spec.cid)
    }

    fn endpoint_alive(&self, iid: InstanceId) -> Result<(), MortiseError> {
        match self.instance(iid) {
            Some(i) if i.state != InstanceState::Terminated => Ok(()),
            _ => Err(MortiseError::UnknownInstance(iid)),
        }
    }

    /// Appends `msg`. Cost goes to `clock` (the sender's timeline) or the
    /// hypervisor clock.
    pub fn send(
        &mut self,
        cid: u32,
        from: InstanceId,
        msg: &[u8],
        clock: Option<&mut CycleClock>,
    ) -> Result<SendOutcome, MortiseError> {
        let ch = self.channels.get(&cid).ok_or(MortiseError::UnknownChannel(cid))?;
        if !ch.may_send(from) {
            self.violation(from, format!("send on channel {cid} without endpoint grant"));
            return Err(MortiseError::NotAnEndpoint { cid, iid: from });
        }
        self.endpoint_alive(ch.a)?;
        self.endpoint_alive(ch.b)?;
        if msg.len() > ch.max_message {
            return Err(MortiseError::MessageTooLarge { len: msg.len(), max: ch.max_message });
        }
        if ch.queue.len() >= ch.capacity {
            return Ok(SendOutcome::Full);
        }
        let key = if ch.zero_copy { keys::IPC_HANDOFF } else { keys::IPC_COPY_PER_MSG };
        let profile = self.profile().clone();
        let cost = match clock {
            Some(c) => c.advance(key, &profile)?,
            None => self.clock.advance(key, &profile)?,
        };
        let ch = self.channels.get_mut(&cid).expect("checked");
        ch.queue.push_back(msg.to_vec());
        ch.sent += 1;
        ch.cycles += cost;
        self.clock.emit(EventKind::IvcTransfer {
            channel: cid,
            instance: from.0,
            op: "send".into(),
            bytes: msg.len(),
        });
        Ok(SendOutcome::Sent)
    }

    pub fn recv(&mut self, cid: u32, to: InstanceId) -> Result<Option<Vec<u8>>, MortiseError> {
        let ch = self.channels.get(&cid).ok_or(MortiseError::UnknownChannel(cid))?;
        if !ch.may_recv(to) {
            self.violation(to, format!("recv on channel {cid} without endpoint grant"));
            return Err(MortiseError::NotAnEndpoint { cid, iid: to });
        }
        self.endpoint_alive(to)?;
        let ch = self.channels.get_mut(&cid).expect("checked");
        let msg = ch.queue.pop_front();
        if let Some(m) = &msg {
            ch.received += 1;
            let bytes = m.len();
            self.clock.emit(EventKind::IvcTransfer {
                channel: cid,
                instance: to.0,
                op: "recv".into(),
                bytes,
            });
        }
        Ok(msg)
    }
}

//! The booted hypervisor: instances, CPUs, regions, colors and the
//! hypercall table on one deterministic timeline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tenonos_core::{keys, CostProfile, CycleClock, Cycles, Event, EventKind};

use crate::boot::{DynamicPolicy, PolicyKind};
use crate::color::ColorPartition;
use crate::hypercall::{Handler, HypercallTable, LifecycleCall};
use crate::instance::{CpuRegistry, CpuSlot, Instance, InstanceId, InstanceKind, InstanceSpec, InstanceState};
use crate::ivc::Channel;
use crate::memory::{Access, AccessDecision, DenyReason, MemoryRegion, Perm, RegionId};
use crate::MortiseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Mode 1: every instance pinned to dedicated CPUs at boot.
    Static,
    /// Mode 2: the hypervisor schedules instances across CPUs.
    Dynamic,
}

/// Who issues a hypercall. The host console stands for the management
/// interface that exists before any instance does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Caller {
    Host,
    Instance(InstanceId),
}

impl Caller {
    /// The id logged for this caller; the host is 0.
    pub fn log_id(self) -> u32 {
        match self {
            Caller::Host => 0,
            Caller::Instance(i) => i.0,
        }
    }

    fn instance(self) -> Option<InstanceId> {
        match self {
            Caller::Host => None,
            Caller::Instance(i) => Some(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LifecycleAction {
    Create(InstanceSpec),
    Pause(InstanceId),
    Resume(InstanceId),
    Terminate(InstanceId),
    YieldCpu(InstanceId),
}

#[derive(Debug, Clone)]
pub struct MortiseSystem {
    mode: Mode,
    policy: Option<DynamicPolicy>,
    registry: CpuRegistry,
    instances: BTreeMap<InstanceId, Instance>,
    regions: BTreeMap<RegionId, MemoryRegion>,
    colors: ColorPartition,
    table: HypercallTable,
    pub(crate) channels: BTreeMap<u32, Channel>,
    /// The hypervisor's own timeline (boot work and the audit log).
    pub clock: CycleClock,
    profile: CostProfile,
    next_iid: u32,
    next_rid: u32,
    /// Rotation order among equal priorities.
    rotation: Vec<InstanceId>,
    /// Mode 1: CPUs each instance received at boot.
    boot_cpus: BTreeMap<InstanceId, BTreeSet<u32>>,
    launched: BTreeSet<InstanceId>,
    hypercalls: u64,
}

impl MortiseSystem {
    pub(crate) fn empty(mode: Mode, machine_cpus: u32, total_colors: u32, profile: CostProfile) -> Self {
        Self {
            mode,
            policy: None,
            registry: CpuRegistry::new(machine_cpus),
            instances: BTreeMap::new(),
            regions: BTreeMap::new(),
            colors: ColorPartition::new(total_colors),
            table: HypercallTable::new(),
            channels: BTreeMap::new(),
            clock: CycleClock::new(),
            profile,
            next_iid: 1,
            next_rid: 0,
            rotation: Vec::new(),
            boot_cpus: BTreeMap::new(),
            launched: BTreeSet::new(),
            hypercalls: 0,
        }
    }

    pub(crate) fn set_policy(&mut self, policy: DynamicPolicy) {
        self.policy = Some(policy);
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn policy(&self) -> Option<&DynamicPolicy> {
        self.policy.as_ref()
    }

    pub fn profile(&self) -> &CostProfile {
        &self.profile
    }

    pub fn registry(&self) -> &CpuRegistry {
        &self.registry
    }

    pub fn instance(&self, iid: InstanceId) -> Option<&Instance> {
        self.instances.get(&iid)
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.instances.values()
    }

    pub fn region(&self, rid: RegionId) -> Option<&MemoryRegion> {
        self.regions.get(&rid)
    }

    pub fn region_by_name(&self, name: &str) -> Option<&MemoryRegion> {
        self.regions.values().find(|r| r.name == name)
    }

    pub fn regions(&self) -> impl Iterator<Item = &MemoryRegion> {
        self.regions.values()
    }

    pub fn colors(&self) -> &ColorPartition {
        &self.colors
    }

    pub fn table(&self) -> &HypercallTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut HypercallTable {
        &mut self.table
    }

    pub fn events(&self) -> &[Event] {
        self.clock.events()
    }

    pub fn hypercall_count(&self) -> u64 {
        self.hypercalls
    }

    pub fn boot_cpus(&self, iid: InstanceId) -> Option<&BTreeSet<u32>> {
        self.boot_cpus.get(&iid)
    }

    pub fn register_hypercall_group(
        &mut self,
        name: &str,
        entries: impl IntoIterator<Item = (u32, Handler)>,
    ) -> Result<(), MortiseError> {
        self.table.register_group(name, entries)
    }

    pub(crate) fn alloc_iid(&mut self, requested: Option<u32>) -> Result<InstanceId, MortiseError> {
        let iid = InstanceId(requested.unwrap_or(self.next_iid));
        if iid.0 == 0 {
            return Err(MortiseError::Config("instance id 0 is reserved for the host".into()));
        }
        if self.instances.contains_key(&iid) {
            return Err(MortiseError::DuplicateInstance(iid));
        }
        self.next_iid = self.next_iid.max(iid.0 + 1);
        Ok(iid)
    }

    pub(crate) fn insert_instance(&mut self, inst: Instance) {
        self.rotation.push(inst.iid);
        self.instances.insert(inst.iid, inst);
    }

    pub(crate) fn pin(&mut self, iid: InstanceId, cpus: &BTreeSet<u32>) {
        for c in cpus {
            self.registry.set(*c, CpuSlot::AssignedTo(iid));
        }
        self.boot_cpus.insert(iid, cpus.clone());
        let inst = self.instances.get_mut(&iid).expect("inserted");
        inst.cpus = cpus.clone();
    }

    pub(crate) fn launch(&mut self, iid: InstanceId) -> Result<(), MortiseError> {
        self.clock.advance(keys::INSTANCE_LAUNCH, &self.profile)?;
        let inst = self.instances.get_mut(&iid).expect("exists");
        let from = inst.state;
        inst.state = InstanceState::Running;
        inst.preempted = false;
        let cpus = inst.cpus.iter().copied().collect();
        self.launched.insert(iid);
        self.clock.emit(EventKind::Launch { instance: iid.0, cpus });
        self.log_transition(iid, from, InstanceState::Running);
        Ok(())
    }

    pub fn add_region(&mut self, name: impl Into<String>, size: u64, hypervisor: bool) -> RegionId {
        let rid = RegionId(self.next_rid);
        self.next_rid += 1;
        let region = if hypervisor {
            MemoryRegion::hypervisor(rid, name, size)
        } else {
            MemoryRegion::new(rid, name, size)
        };
        self.regions.insert(rid, region);
        rid
    }

    pub fn grant(&mut self, rid: RegionId, iid: InstanceId, perm: Perm) -> Result<(), MortiseError> {
        if !self.instances.contains_key(&iid) {
            return Err(MortiseError::UnknownInstance(iid));
        }
        let region = self.regions.get_mut(&rid).ok_or(MortiseError::UnknownRegion(rid))?;
        region.grant(iid, perm)?;
        self.instances.get_mut(&iid).expect("checked").regions.insert(rid);
        Ok(())
    }

    /// Pure permission check; an unknown region is simply not mapped.
    pub fn check_access(&self, rid: RegionId, iid: InstanceId, access: Access) -> AccessDecision {
        self.regions
            .get(&rid)
            .map_or(AccessDecision::Denied(DenyReason::NotMapped), |r| r.check_access(iid, access))
    }

    /// A guest touches a region: checked, logged, and logged again as a
    /// violation when refused.
    pub fn access(&mut self, iid: InstanceId, rid: RegionId, access: Access) -> AccessDecision {
        let decision = self.check_access(rid, iid, access);
        self.clock.emit(EventKind::Access {
            instance: iid.0,
            region: rid.to_string(),
            access: access.as_str().to_string(),
            allowed: decision.allowed(),
        });
        if let AccessDecision::Denied(reason) = decision {
            self.violation(iid, format!("{} {rid}: {reason:?}", access.as_str()));
        }
        decision
    }

    pub(crate) fn violation(&mut self, iid: InstanceId, detail: String) {
        self.clock.emit(EventKind::IsolationViolation { instance: iid.0, detail });
    }

    pub fn assign_colors(&mut self, iid: InstanceId, requested: u32) -> Result<BTreeSet<u32>, MortiseError> {
        let inst = self.instances.get(&iid).ok_or(MortiseError::UnknownInstance(iid))?;
        if inst.state == InstanceState::Terminated {
            return Err(MortiseError::UnknownInstance(iid));
        }
        let got = self.colors.assign(iid, requested)?;
        self.clock.advance(keys::COLOR_SETUP, &self.profile)?;
        let all = self.colors.colors_of(iid).cloned().unwrap_or_default();
        self.instances.get_mut(&iid).expect("checked").colors = Some(all);
        Ok(got)
    }

    /// Routes a hypercall. The trap cost lands on `caller_clock` (the
    /// caller's own timeline) or, without one, on the hypervisor clock.
    pub fn dispatch(
        &mut self,
        caller: Caller,
        id: u32,
        args: &[u64],
        caller_clock: Option<&mut CycleClock>,
    ) -> Result<u64, MortiseError> {
        if let Caller::Instance(iid) = caller {
            let inst = self.instances.get(&iid).ok_or(MortiseError::UnknownInstance(iid))?;
            if inst.state != InstanceState::Running {
                return Err(MortiseError::CallerNotRunning(iid));
            }
        }
        let handler = self
            .table
            .lookup(id)
            .cloned()
            .ok_or(MortiseError::UnknownHypercall(id))?;
        let event = EventKind::Hypercall { caller: caller.log_id(), id };
        match caller_clock {
            Some(c) => {
                c.advance(keys::HYPERCALL_TRAP, &self.profile)?;
                c.emit(event.clone());
            }
            None => {
                self.clock.advance(keys::HYPERCALL_TRAP, &self.profile)?;
            }
        }
        self.clock.emit(event);
        self.hypercalls += 1;
        match handler {
            Handler::Func { f, .. } => f(caller.instance(), args).map_err(MortiseError::HandlerFailed),
            Handler::Lifecycle(call) => self.lifecycle_call(call, caller, args),
        }
    }

    fn lifecycle_call(&mut self, call: LifecycleCall, caller: Caller, args: &[u64]) -> Result<u64, MortiseError> {
        let target = || -> Result<InstanceId, MortiseError> {
            match (args.first(), caller.instance()) {
                (Some(a), _) => Ok(InstanceId(*a as u32)),
                (None, Some(i)) => Ok(i),
                (None, None) => Err(MortiseError::HandlerFailed("missing instance argument".into())),
            }
        };
        let action = match call {
            LifecycleCall::Create => {
                let mut spec = InstanceSpec::new(
                    args.first().copied().unwrap_or(0) as u32,
                    args.get(1).copied().unwrap_or(1) as u32,
                );
                spec.deadline = args.get(2).copied().filter(|d| *d > 0);
                LifecycleAction::Create(spec)
            }
            LifecycleCall::Pause => LifecycleAction::Pause(target()?),
            LifecycleCall::Resume => LifecycleAction::Resume(target()?),
            LifecycleCall::Terminate => LifecycleAction::Terminate(target()?),
            LifecycleCall::YieldCpu => LifecycleAction::YieldCpu(target()?),
        };
        Ok(self.lifecycle(action)?.map_or(0, |i| i.0 as u64))
    }

    fn log_transition(&mut self, iid: InstanceId, from: InstanceState, to: InstanceState) {
        if from != to {
            self.clock.emit(EventKind::Lifecycle {
                instance: iid.0,
                from: from.as_str().into(),
                to: to.as_str().into(),
            });
        }
    }

    fn illegal(&self, iid: InstanceId, action: &'static str) -> MortiseError {
        MortiseError::IllegalTransition {
            iid,
            from: self.instances[&iid].state,
            action,
        }
    }

    /// Applies a lifecycle action. `Create` returns the new instance id.
    pub fn lifecycle(&mut self, action: LifecycleAction) -> Result<Option<InstanceId>, MortiseError> {
        let created = match action {
            LifecycleAction::Create(spec) => {
                if self.mode != Mode::Dynamic {
                    return Err(MortiseError::WrongMode(Mode::Dynamic));
                }
                Some(self.create(spec)?)
            }
            LifecycleAction::Pause(iid) => {
                let inst = self.live(iid)?;
                match inst.state {
                    InstanceState::Running => {}
                    InstanceState::Paused if inst.preempted => {}
                    _ => return Err(self.illegal(iid, "pause")),
                }
                let from = inst.state;
                let inst = self.instances.get_mut(&iid).expect("live");
                inst.state = InstanceState::Paused;
                inst.preempted = false;
                if self.mode == Mode::Dynamic {
                    self.release_cpus(iid);
                }
                self.log_transition(iid, from, InstanceState::Paused);
                None
            }
            LifecycleAction::Resume(iid) => {
                let inst = self.live(iid)?;
                if inst.state != InstanceState::Paused {
                    return Err(self.illegal(iid, "resume"));
                }
                if self.mode == Mode::Static {
                    self.instances.get_mut(&iid).expect("live").state = InstanceState::Running;
                    self.log_transition(iid, InstanceState::Paused, InstanceState::Running);
                } else {
                    // Runnable again; the scheduler decides when it gets CPUs.
                    self.instances.get_mut(&iid).expect("live").preempted = true;
                }
                None
            }
            LifecycleAction::Terminate(iid) => {
                let inst = self.live(iid)?;
                let from = inst.state;
                let inst = self.instances.get_mut(&iid).expect("live");
                inst.state = InstanceState::Terminated;
                inst.preempted = false;
                inst.cpus.clear();
                inst.colors = None;
                let regions = std::mem::take(&mut inst.regions);
                for rid in regions {
                    if let Some(r) = self.regions.get_mut(&rid) {
                        r.revoke(iid);
                    }
                }
                self.release_cpus(iid);
                self.colors.release(iid);
                self.log_transition(iid, from, InstanceState::Terminated);
                None
            }
            LifecycleAction::YieldCpu(iid) => {
                let inst = self.live(iid)?;
                if inst.state != InstanceState::Running {
                    return Err(self.illegal(iid, "yield-cpu"));
                }
                self.rotation.retain(|i| *i != iid);
                self.rotation.push(iid);
                None
            }
        };
        if self.mode == Mode::Dynamic {
            self.hv_schedule()?;
        }
        Ok(created)
    }

    fn live(&self, iid: InstanceId) -> Result<&Instance, MortiseError> {
        match self.instances.get(&iid) {
            Some(i) if i.state != InstanceState::Terminated => Ok(i),
            Some(_) => Err(self.illegal(iid, "act on")),
            None => Err(MortiseError::UnknownInstance(iid)),
        }
    }

    fn release_cpus(&mut self, iid: InstanceId) {
        for cpu in self.registry.owned_by(iid) {
            self.registry.set(cpu, CpuSlot::Unassigned);
            self.clock.emit(EventKind::CpuAssigned { cpu, instance: None });
        }
        if let Some(inst) = self.instances.get_mut(&iid) {
            inst.cpus.clear();
        }
    }

    fn create(&mut self, spec: InstanceSpec) -> Result<InstanceId, MortiseError> {
        let policy = self.policy.as_ref().expect("dynamic mode has a policy");
        if policy.kind == PolicyKind::StrictPriority {
            if let Some(other) = self
                .instances
                .values()
                .find(|i| i.state != InstanceState::Terminated && i.priority == spec.priority)
            {
                return Err(MortiseError::InvalidPolicy(format!(
                    "priority {} already held by {} under strict-priority",
                    spec.priority, other.iid
                )));
            }
        }
        if spec.cpu_demand == 0 {
            return Err(MortiseError::Config("cpu_demand must be positive".into()));
        }
        let iid = self.alloc_iid(None)?;
        let mut inst = Instance::new(iid, spec.kind, spec.priority, spec.cpu_demand);
        inst.deadline = spec.deadline;
        self.insert_instance(inst);
        let rid = self.add_region(format!("{iid}-mem"), 1 << 20, false);
        self.grant(rid, iid, Perm::Rw)?;
        if let Some(hv) = self.region_by_name("hv-shared").map(|r| r.rid) {
            self.grant(hv, iid, Perm::Ro)?;
        }
        if let Some(n) = spec.colors {
            self.assign_colors(iid, n)?;
        }
        self.log_transition(iid, InstanceState::Terminated, InstanceState::Created);
        Ok(iid)
    }

    /// Runnable instances in the order the policy serves them.
    fn policy_order(&self) -> Vec<InstanceId> {
        let pos: BTreeMap<InstanceId, usize> =
            self.rotation.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut order: Vec<&Instance> = self.instances.values().filter(|i| i.runnable()).collect();
        let kind = self.policy.as_ref().map_or(PolicyKind::StrictPriority, |p| p.kind);
        match kind {
            PolicyKind::StrictPriority | PolicyKind::RoundRobin => {
                order.sort_by_key(|i| (std::cmp::Reverse(i.priority), pos[&i.iid]));
            }
            PolicyKind::Edf => {
                order.sort_by_key(|i| {
                    (i.deadline.unwrap_or(Cycles::MAX), std::cmp::Reverse(i.priority), i.iid)
                });
            }
        }
        order.into_iter().map(|i| i.iid).collect()
    }

    /// Hands CPUs to runnable instances in policy order, each receiving up
    /// to its demand. Instances keep CPUs they already hold where possible.
    /// A running instance left with none is paused by preemption.
    pub fn hv_schedule(&mut self) -> Result<BTreeMap<u32, InstanceId>, MortiseError> {
        if self.mode == Mode::Static {
            return Ok(self.registry.assignment());
        }
        let order = self.policy_order();
        let guest = self.registry.guest_cpus();
        let mut remaining = guest.len() as u32;
        let mut quota: BTreeMap<InstanceId, u32> = BTreeMap::new();
        for iid in &order {
            let q = self.instances[iid].cpu_demand.min(remaining);
            remaining -= q;
            quota.insert(*iid, q);
        }
        let mut next: BTreeMap<u32, InstanceId> = BTreeMap::new();
        for iid in &order {
            for cpu in self.instances[iid].cpus.iter().take(quota[iid] as usize) {
                next.insert(*cpu, *iid);
            }
        }
        for iid in &order {
            let have = next.values().filter(|i| *i == iid).count() as u32;
            let free: Vec<u32> = guest.iter().copied().filter(|c| !next.contains_key(c)).collect();
            for cpu in free.into_iter().take((quota[iid] - have) as usize) {
                next.insert(cpu, *iid);
            }
        }

        for cpu in guest {
            let old = match self.registry.get(cpu) {
                Some(CpuSlot::AssignedTo(i)) => Some(i),
                _ => None,
            };
            let new = next.get(&cpu).copied();
            if old != new {
                self.registry.set(cpu, new.map_or(CpuSlot::Unassigned, CpuSlot::AssignedTo));
                self.clock.emit(EventKind::CpuAssigned { cpu, instance: new.map(|i| i.0) });
            }
        }

        let gainer = order.iter().copied().find(|iid| {
            let now = next.values().filter(|i| *i == iid).count();
            now > self.instances[iid].cpus.len()
        });
        let now = self.clock.now();
        for iid in order {
            let cpus: BTreeSet<u32> = next.iter().filter(|(_, i)| **i == iid).map(|(c, _)| *c).collect();
            let inst = self.instances.get_mut(&iid).expect("ordered");
            let from = inst.state;
            inst.cpus = cpus;
            if inst.cpus.is_empty() {
                if from == InstanceState::Running {
                    inst.state = InstanceState::Paused;
                    inst.preempted = true;
                    self.clock.emit(EventKind::Preempted {
                        instance: iid.0,
                        by: gainer.map(|g| g.0),
                    });
                    self.log_transition(iid, from, InstanceState::Paused);
                }
                let inst = self.instances.get_mut(&iid).expect("ordered");
                if inst.deadline.is_some_and(|d| d <= now) && !inst.deadline_missed {
                    inst.deadline_missed = true;
                    self.clock.emit(EventKind::DeadlineMiss { instance: iid.0 });
                }
            } else if from != InstanceState::Running {
                if self.launched.contains(&iid) {
                    let inst = self.instances.get_mut(&iid).expect("ordered");
                    inst.state = InstanceState::Running;
                    inst.preempted = false;
                    self.log_transition(iid, from, InstanceState::Running);
                } else {
                    self.launch(iid)?;
                }
            }
        }
        Ok(self.registry.assignment())
    }

    /// Round-robin slice boundary: instances holding CPUs move behind their
    /// equal-priority peers.
    pub fn slice_expired(&mut self) -> Result<(), MortiseError> {
        let (holding, waiting): (Vec<InstanceId>, Vec<InstanceId>) = self
            .rotation
            .iter()
            .partition(|i| self.instances.get(i).is_some_and(|x| !x.cpus.is_empty()));
        self.rotation = waiting.into_iter().chain(holding).collect();
        if self.mode == Mode::Dynamic {
            self.hv_schedule()?;
        }
        Ok(())
    }

    /// Moves the hypervisor clock forward, e.g. to let deadlines pass.
    pub fn advance_to(&mut self, t: Cycles) -> Result<(), MortiseError> {
        self.clock.idle_until(t)?;
        if self.mode == Mode::Dynamic {
            self.hv_schedule()?;
        }
        Ok(())
    }

    /// Instances whose kind matches.
    pub fn instances_of(&self, kind: InstanceKind) -> Vec<InstanceId> {
        self.instances.values().filter(|i| i.kind == kind).map(|i| i.iid).collect()
    }

    /// A Running instance outranked by a preempted one, if any.
    pub fn priority_inversion(&self) -> Option<(InstanceId, InstanceId)> {
        for waiting in self.instances.values().filter(|i| i.state == InstanceState::Paused && i.preempted) {
            for running in self.instances.values().filter(|i| i.state == InstanceState::Running) {
                if waiting.priority > running.priority {
                    return Some((waiting.iid, running.iid));
                }
            }
        }
        None
    }
}

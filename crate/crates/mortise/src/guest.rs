//! Running Tenon scenarios as guests, and auditing the result.

use tenonos_core::{CostProfile, CycleClock, Cycles, EventKind};
use tenonos_rt::{PortError, RtError, Scenario, ScenarioOutcome, ScenarioRunner, ServicePort};

use crate::instance::{InstanceId, InstanceKind, InstanceState};
use crate::ivc::SendOutcome;
use crate::memory::Access;
use crate::system::{Caller, Mode, MortiseSystem};
use crate::MortiseError;

/// What a guest kernel sees of the hypervisor.
pub struct GuestPort<'a> {
    pub system: &'a mut MortiseSystem,
    pub iid: InstanceId,
}

fn port_err(e: MortiseError) -> PortError {
    match e {
        MortiseError::UnknownHypercall(id) => PortError::UnknownHypercall(id),
        MortiseError::UnknownChannel(c) => PortError::UnknownChannel(c),
        e @ (MortiseError::CallerNotRunning(_) | MortiseError::NotAnEndpoint { .. }) => {
            PortError::Denied(e.to_string())
        }
        MortiseError::Sim(s) => PortError::Sim(s),
        e => PortError::Failed(e.to_string()),
    }
}

impl ServicePort for GuestPort<'_> {
    fn hypercall(
        &mut self,
        id: u32,
        args: &[u64],
        clock: &mut CycleClock,
        _profile: &CostProfile,
    ) -> Result<u64, PortError> {
        self.system
            .dispatch(Caller::Instance(self.iid), id, args, Some(clock))
            .map_err(port_err)
    }

    fn ivc_send(
        &mut self,
        channel: u32,
        payload: &[u8],
        clock: &mut CycleClock,
        _profile: &CostProfile,
    ) -> Result<bool, PortError> {
        self.system
            .send(channel, self.iid, payload, Some(clock))
            .map(|o| o == SendOutcome::Sent)
            .map_err(port_err)
    }

    fn ivc_recv(
        &mut self,
        channel: u32,
        _clock: &mut CycleClock,
        _profile: &CostProfile,
    ) -> Result<Option<Vec<u8>>, PortError> {
        self.system.recv(channel, self.iid).map_err(port_err)
    }
}

/// Runs each scenario on its instance, interleaved one `quantum` of virtual
/// time at a time. Each guest keeps its own clock (its own CPU); the
/// hypervisor log records which instance ran on which CPU each quantum.
pub fn colocate(
    system: &mut MortiseSystem,
    guests: &[(InstanceId, Scenario)],
    profile: &CostProfile,
    quantum: Cycles,
) -> Result<Vec<ScenarioOutcome>, MortiseError> {
    if quantum == 0 {
        return Err(MortiseError::Config("quantum must be positive".into()));
    }
    let mut runners = Vec::new();
    for (iid, scenario) in guests {
        let inst = system.instance(*iid).ok_or(MortiseError::UnknownInstance(*iid))?;
        if inst.kind != InstanceKind::Tenon {
            return Err(MortiseError::Config(format!("{iid} is not a Tenon instance")));
        }
        if inst.state != InstanceState::Running {
            return Err(MortiseError::CallerNotRunning(*iid));
        }
        for spec in &scenario.channels {
            if system.channel(spec.cid).is_none() {
                system.open_channel(spec)?;
            }
        }
        let runner = ScenarioRunner::new(scenario, profile)?;
        let target = runner.end_cycle() + 1;
        runners.push((*iid, runner, target, false));
    }
    let mut t: Cycles = 0;
    while runners.iter().any(|r| !r.3) {
        t = t.saturating_add(quantum);
        for (iid, runner, target, done) in runners.iter_mut().filter(|r| !r.3) {
            let cpu = system
                .instance(*iid)
                .and_then(|i| i.cpus.iter().next().copied())
                .ok_or(MortiseError::CallerNotRunning(*iid))?;
            system.clock.emit(EventKind::InstanceRun { instance: iid.0, cpu });
            let step = t.min(*target);
            let mut port = GuestPort { system, iid: *iid };
            runner.step_until(step, &mut port).map_err(MortiseError::Rt)?;
            *done = step == *target;
        }
    }
    Ok(runners.into_iter().map(|(_, r, _, _)| r.finish()).collect())
}

/// Rechecks the hypervisor log and state for isolation breaches. Returns a
/// description of each problem found; empty means clean.
pub fn audit_isolation(system: &MortiseSystem) -> Vec<String> {
    let mut problems = Vec::new();
    let events = system.events();
    for (n, e) in events.iter().enumerate() {
        match &e.kind {
            EventKind::InstanceRun { instance, cpu } if system.mode() == Mode::Static => {
                let ok = system
                    .boot_cpus(InstanceId(*instance))
                    .is_some_and(|s| s.contains(cpu));
                if !ok {
                    problems.push(format!("I{instance} ran on cpu {cpu} outside its boot set"));
                }
            }
            EventKind::Access { instance, region, access, allowed } => {
                let iid = InstanceId(*instance);
                if !allowed {
                    let logged = events.get(n + 1).is_some_and(|next| {
                        matches!(&next.kind, EventKind::IsolationViolation { instance: i, .. } if *i == *instance)
                    });
                    if !logged {
                        problems.push(format!("denied access by {iid} to {region} not logged as a violation"));
                    }
                } else if system.instance(iid).is_some_and(|i| i.state != InstanceState::Terminated) {
                    let rid = system.regions().find(|r| r.rid.to_string() == *region).map(|r| r.rid);
                    let acc = Access::ALL.into_iter().find(|a| a.as_str() == access);
                    let still = match (rid, acc) {
                        (Some(rid), Some(acc)) => system.check_access(rid, iid, acc).allowed(),
                        _ => false,
                    };
                    if !still {
                        problems.push(format!("{iid} was allowed {access} on {region} without a grant"));
                    }
                }
            }
            _ => {}
        }
    }
    if system.mode() == Mode::Static {
        for inst in system.instances().filter(|i| i.state != InstanceState::Terminated) {
            let owned = system.registry().owned_by(inst.iid);
            if Some(&owned) != system.boot_cpus(inst.iid) {
                problems.push(format!("{} holds cpus {owned:?} that differ from its boot set", inst.iid));
            }
        }
    }
    problems
}

impl From<MortiseError> for RtError {
    fn from(e: MortiseError) -> Self {
        RtError::Port(port_err(e))
    }
}

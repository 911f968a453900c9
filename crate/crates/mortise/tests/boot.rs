use std::collections::BTreeMap;

use proptest::prelude::*;
use tenonos_core::{CostProfile, EventKind};
use tenonos_mortise::*;

fn profile() -> CostProfile {
    CostProfile::bundled("tenon-paper").unwrap()
}

fn phases(sys: &MortiseSystem) -> Vec<(u8, String)> {
    sys.events()
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::BootPhase { step, name } => Some((*step, name.clone())),
            _ => None,
        })
        .collect()
}

fn launches(sys: &MortiseSystem) -> usize {
    sys.events().iter().filter(|e| matches!(e.kind, EventKind::Launch { .. })).count()
}

#[test]
fn static_registry_matches_config() {
    let cfg = StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [1]), InstanceConfig::pinned(2, [2, 3])]);
    let sys = boot_static(&cfg, &profile()).unwrap();
    let slots: Vec<CpuSlot> = sys.registry().slots().values().copied().collect();
    assert_eq!(
        slots,
        vec![
            CpuSlot::Hypervisor,
            CpuSlot::AssignedTo(InstanceId(1)),
            CpuSlot::AssignedTo(InstanceId(2)),
            CpuSlot::AssignedTo(InstanceId(2)),
        ]
    );
    assert!(sys.instances().all(|i| i.state == InstanceState::Running));
    assert_eq!(launches(&sys), 2);
}

#[test]
fn static_rejects_bad_configs() {
    let p = profile();
    let overlap = StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [1]), InstanceConfig::pinned(2, [1, 2])]);
    assert!(matches!(boot_static(&overlap, &p), Err(MortiseError::OverlappingCpuSets { cpu: 1, .. })));
    let unknown = StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [4])]);
    assert_eq!(boot_static(&unknown, &p).unwrap_err(), MortiseError::UnknownCpu(4));
    assert_eq!(boot_static(&StaticBootConfig::new(4, vec![]), &p).unwrap_err(), MortiseError::EmptyInstanceList);
    let reserved = StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [0])]);
    assert_eq!(boot_static(&reserved, &p).unwrap_err(), MortiseError::ReservedCpu);
}

#[test]
fn boot_log_has_four_ordered_phases() {
    let sys = boot_static(&StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [1, 2, 3])]), &profile()).unwrap();
    let got = phases(&sys);
    assert_eq!(got.len(), 4);
    assert_eq!(got.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert_eq!(got[0].1, "init-hypervisor");
    assert_eq!(got[3].1, "launch");
}

#[test]
fn dynamic_boot_leaves_cpus_unassigned() {
    let sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::StrictPriority, 4), &profile()).unwrap();
    let slots: Vec<CpuSlot> = sys.registry().slots().values().copied().collect();
    assert_eq!(slots, vec![CpuSlot::Hypervisor, CpuSlot::Unassigned, CpuSlot::Unassigned, CpuSlot::Unassigned]);
    assert_eq!(launches(&sys), 0);
    assert_eq!(phases(&sys).len(), 4);
}

#[test]
fn duplicate_priority_rejected_under_strict_policy() {
    let mut p = DynamicPolicy::new(PolicyKind::StrictPriority, 4);
    p.instances = vec![InstanceSpec::new(3, 1), InstanceSpec::new(3, 1)];
    assert!(matches!(boot_dynamic(&p, &profile()), Err(MortiseError::InvalidPolicy(_))));
    p.kind = PolicyKind::RoundRobin;
    p.slice_cycles = 100;
    assert!(boot_dynamic(&p, &profile()).is_ok());
    p.slice_cycles = 0;
    assert!(matches!(boot_dynamic(&p, &profile()), Err(MortiseError::InvalidPolicy(_))));
}

#[test]
fn higher_priority_preempts_on_single_cpu() {
    let mut sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::StrictPriority, 2), &profile()).unwrap();
    let low = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(5, 1))).unwrap().unwrap();
    assert_eq!(sys.instance(low).unwrap().state, InstanceState::Running);
    let high = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(9, 1))).unwrap().unwrap();
    assert_eq!(sys.instance(high).unwrap().state, InstanceState::Running);
    let l = sys.instance(low).unwrap();
    assert_eq!(l.state, InstanceState::Paused);
    assert!(l.preempted);
    assert!(sys
        .events()
        .iter()
        .any(|e| e.kind == EventKind::Preempted { instance: low.0, by: Some(high.0) }));
    // Once the high instance leaves, the preempted one comes back.
    sys.lifecycle(LifecycleAction::Terminate(high)).unwrap();
    assert_eq!(sys.instance(low).unwrap().state, InstanceState::Running);
}

#[test]
fn spare_cpu_stays_idle_and_no_preemption_when_capacity_suffices() {
    let mut sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::StrictPriority, 3), &profile()).unwrap();
    sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(1, 1))).unwrap();
    assert_eq!(sys.registry().assignment().len(), 1);
    sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(2, 1))).unwrap();
    assert!(!sys.events().iter().any(|e| matches!(e.kind, EventKind::Preempted { .. })));
}

#[test]
fn lifecycle_transitions() {
    let mut sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::StrictPriority, 4), &profile()).unwrap();
    let a = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(1, 2))).unwrap().unwrap();
    let b = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(2, 3))).unwrap().unwrap();
    // b (higher) takes all 3 guest cpus, a is preempted.
    assert_eq!(sys.registry().owned_by(b).len(), 3);
    sys.lifecycle(LifecycleAction::Pause(b)).unwrap();
    assert_eq!(sys.registry().owned_by(a).len(), 2);
    sys.lifecycle(LifecycleAction::Terminate(a)).unwrap();
    assert!(sys.registry().owned_by(a).is_empty());
    assert!(sys.registry().assignment().is_empty());
    assert!(matches!(
        sys.lifecycle(LifecycleAction::Resume(a)),
        Err(MortiseError::IllegalTransition { .. })
    ));
    sys.lifecycle(LifecycleAction::Resume(b)).unwrap();
    assert_eq!(sys.instance(b).unwrap().state, InstanceState::Running);
}

#[test]
fn pause_reassigns_cpus() {
    let mut sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::StrictPriority, 2), &profile()).unwrap();
    let a = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(9, 1))).unwrap().unwrap();
    let b = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(1, 1))).unwrap().unwrap();
    let before = sys.registry().assignment();
    assert_eq!(before, BTreeMap::from([(1, a)]));
    sys.lifecycle(LifecycleAction::Pause(a)).unwrap();
    assert_eq!(sys.registry().assignment(), BTreeMap::from([(1, b)]));
}

#[test]
fn edf_serves_earliest_deadline_and_logs_misses() {
    let mut sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::Edf, 2), &profile()).unwrap();
    let late = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(9, 1).with_deadline(5_000_000))).unwrap().unwrap();
    let soon = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(1, 1).with_deadline(2_000_000))).unwrap().unwrap();
    assert_eq!(sys.registry().assignment(), BTreeMap::from([(1, soon)]));
    sys.advance_to(6_000_000).unwrap();
    assert!(sys.events().iter().any(|e| e.kind == EventKind::DeadlineMiss { instance: late.0 }));
}

#[test]
fn round_robin_rotates_equal_priorities() {
    let mut p = DynamicPolicy::new(PolicyKind::RoundRobin, 2);
    p.slice_cycles = 1000;
    let mut sys = boot_dynamic(&p, &profile()).unwrap();
    let a = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(1, 1))).unwrap().unwrap();
    let b = sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(1, 1))).unwrap().unwrap();
    assert_eq!(sys.registry().owned_by(a).len(), 1);
    sys.slice_expired().unwrap();
    assert_eq!(sys.registry().owned_by(b).len(), 1);
    sys.slice_expired().unwrap();
    assert_eq!(sys.registry().owned_by(a).len(), 1);
}

#[derive(Debug, Clone)]
enum Op {
    Create(u32, u32),
    Pause(u32),
    Resume(u32),
    Terminate(u32),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..30u32, 1..4u32).prop_map(|(p, d)| Op::Create(p, d)),
        (1..12u32).prop_map(Op::Pause),
        (1..12u32).prop_map(Op::Resume),
        (1..12u32).prop_map(Op::Terminate),
    ]
}

proptest! {
    #[test]
    fn no_preempted_instance_outranks_a_running_one(cpus in 2..6u32, ops in prop::collection::vec(op(), 1..40)) {
        let mut sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::StrictPriority, cpus), &profile()).unwrap();
        for o in ops {
            let r = match o {
                Op::Create(p, d) => sys.lifecycle(LifecycleAction::Create(InstanceSpec::new(p, d))).map(|_| ()),
                Op::Pause(i) => sys.lifecycle(LifecycleAction::Pause(InstanceId(i))).map(|_| ()),
                Op::Resume(i) => sys.lifecycle(LifecycleAction::Resume(InstanceId(i))).map(|_| ()),
                Op::Terminate(i) => sys.lifecycle(LifecycleAction::Terminate(InstanceId(i))).map(|_| ()),
            };
            let _ = r;
            prop_assert_eq!(sys.priority_inversion(), None);
            // Registry agrees with each instance's cpu set.
            for inst in sys.instances() {
                prop_assert_eq!(&sys.registry().owned_by(inst.iid), &inst.cpus);
                prop_assert!(inst.cpus.len() as u32 <= inst.cpu_demand);
            }
            prop_assert!(sys.colors().is_disjoint());
        }
    }
}

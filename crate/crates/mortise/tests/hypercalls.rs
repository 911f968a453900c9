use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use tenonos_core::{keys, CostProfile, CycleClock};
use tenonos_mortise::{
    boot_dynamic, boot_static, Caller, DynamicPolicy, Handler, HypercallTable, InstanceConfig,
    InstanceId, LifecycleAction, MortiseError, PolicyKind, StaticBootConfig,
};

fn profile() -> CostProfile {
    CostProfile::bundled("tenon-paper").unwrap()
}

#[test]
fn dispatch_reaches_the_registered_handler() {
    let mut sys = boot_static(&StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [1])]), &profile()).unwrap();
    let hits = Arc::new(Mutex::new(Vec::new()));
    let (h1, h2) = (hits.clone(), hits.clone());
    sys.register_hypercall_group(
        "mem",
        [
            (0x10, Handler::func("alloc", move |_, _| { h1.lock().unwrap().push("alloc"); Ok(1) })),
            (0x11, Handler::func("free", move |_, _| { h2.lock().unwrap().push("free"); Ok(2) })),
        ],
    )
    .unwrap();
    let mut clock = CycleClock::new();
    let r = sys.dispatch(Caller::Instance(InstanceId(1)), 0x11, &[], Some(&mut clock)).unwrap();
    assert_eq!(r, 2);
    assert_eq!(*hits.lock().unwrap(), vec!["free"]);
    assert_eq!(clock.now(), profile().cost(keys::HYPERCALL_TRAP).unwrap());
    assert_eq!(
        sys.dispatch(Caller::Instance(InstanceId(1)), 0xFF, &[], None),
        Err(MortiseError::UnknownHypercall(0xFF))
    );
}

#[test]
fn paused_caller_is_refused() {
    let mut sys = boot_static(&StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [1])]), &profile()).unwrap();
    sys.lifecycle(LifecycleAction::Pause(InstanceId(1))).unwrap();
    assert_eq!(
        sys.dispatch(Caller::Instance(InstanceId(1)), 0x22, &[], None),
        Err(MortiseError::CallerNotRunning(InstanceId(1)))
    );
}

#[test]
fn routing_is_total_over_the_id_space() {
    let mut table = HypercallTable::new();
    let mut expected: BTreeMap<u32, String> = BTreeMap::new();
    for (g, ids) in [("mem", vec![0x10, 0x11, 0x12]), ("io", (0x100..0x140).collect()), ("misc", vec![0x3FF, 0x0, 0x2A])] {
        let entries: Vec<(u32, Handler)> = ids
            .iter()
            .map(|id| {
                let name = format!("{g}-{id:#x}");
                expected.insert(*id, name.clone());
                let tag = *id as u64;
                (*id, Handler::func(name, move |_, _| Ok(tag)))
            })
            .collect();
        table.register_group(g, entries).unwrap();
    }
    assert!(table.is_consistent());
    for id in 0..1024u32 {
        match (table.lookup(id), expected.get(&id)) {
            (Some(h), Some(name)) => assert_eq!(&h.name(), name),
            (None, None) => {}
            (got, want) => panic!("id {id:#x}: got {got:?}, want {want:?}"),
        }
    }
}

#[test]
fn dynamic_boot_installs_lifecycle_group() {
    let mut sys = boot_dynamic(&DynamicPolicy::new(PolicyKind::StrictPriority, 4), &profile()).unwrap();
    for id in 1..=5 {
        assert_eq!(sys.table().group_of(id), Some("lifecycle"));
    }
    let iid = sys.dispatch(Caller::Host, 0x01, &[5, 1], None).unwrap();
    assert_eq!(iid, 1);
    assert_eq!(sys.registry().owned_by(InstanceId(1)).len(), 1);
}

//! Scenario generators for the standard micro-benchmarks.

use rand::Rng;
use serde_json::json;
use tenonos_core::{seeded, Cycles};

use crate::irq::Isr;
use crate::kernel::Action;
use crate::scenario::Scenario;
use crate::sem::SemId;

/// Gap between consecutive events, large enough that no event's work
/// spills into the next slot under any bundled profile.
pub const SLOT: Cycles = 10_000;

/// `threads` equal-priority threads yielding round-robin.
pub fn thread_switch(threads: u32, ectx: bool, rounds: u32) -> Scenario {
    let mut s = Scenario::new(format!(
        "thread-switch-{threads}-{}",
        if ectx { "ectx" } else { "noectx" }
    ));
    for tid in 1..=threads {
        s = s.thread(tid, 10, ectx);
    }
    for i in 0..rounds as u64 * threads as u64 {
        s.push_event((i + 1) * SLOT, "yield", json!({}));
    }
    s
}

/// A low-priority thread runs while a higher-priority one is woken
/// repeatedly and blocks again. `ready` extra low-priority threads stay
/// queued to load the scan.
pub fn preemption(ectx: bool, rounds: u32, ready: u32) -> Scenario {
    let mut s = Scenario::new(format!(
        "preemption-{}",
        if ectx { "ectx" } else { "noectx" }
    ))
    .thread(1, 20, ectx)
    .thread(2, 5, ectx);
    for i in 0..ready {
        s = s.thread(10 + i, 1, ectx);
    }
    let mut t = SLOT;
    s.push_event(t, "block", json!({}));
    for _ in 0..rounds {
        t += SLOT;
        s.push_event(t, "unblock", json!({"tid": 1}));
        t += SLOT;
        s.push_event(t, "block", json!({"tid": 1}));
    }
    s
}

/// A high-priority thread waits on a semaphore, a low-priority thread posts.
pub fn sem_wakeup(ectx: bool, rounds: u32) -> Scenario {
    let mut s = Scenario::new("sem-wakeup")
        .thread(1, 20, ectx)
        .thread(2, 5, ectx)
        .semaphore(0, 0);
    let mut t = 0;
    for _ in 0..rounds {
        t += SLOT;
        s.push_event(t, "sem_wait", json!({"sem": 0}));
        t += SLOT;
        s.push_event(t, "sem_post", json!({"sem": 0}));
    }
    s
}

/// Empty-handler interrupts against a single running thread.
pub fn interrupt(count: u32) -> Scenario {
    let mut s = Scenario::new("interrupt").thread(1, 10, false).isr(1, Isr::empty());
    for i in 0..count as u64 {
        s.push_event((i + 1) * SLOT, "irq", json!({"isr": 1}));
    }
    s
}

/// `timers` one-shot timers with seeded deadlines inside `[0, window)`.
pub fn timer_load(seed: u64, timers: u32, window: Cycles, fixed_tick: Option<Cycles>) -> Scenario {
    let mut rng = seeded(seed);
    let mut s = Scenario::new(format!("timers-{timers}")).thread(1, 10, false);
    if let Some(p) = fixed_tick {
        s.timer_mode = crate::timer::TimerMode::FixedTick;
        s.tick_period = p;
    }
    let mut deadlines: Vec<Cycles> = (0..timers).map(|_| rng.random_range(1..window)).collect();
    deadlines.sort_unstable();
    for (i, d) in deadlines.into_iter().enumerate() {
        s.push_event(0, "arm_timer", json!({"deadline": d, "handler": i}));
    }
    s.end_cycle = Some(window);
    s
}

/// A hypercall-bearing variant of the thread-switch workload.
pub fn hypercall_mix(threads: u32, calls: u32) -> Scenario {
    let mut s = thread_switch(threads, false, calls.max(1));
    s.name = format!("hypercall-mix-{threads}");
    for i in 0..calls as u64 {
        s.push_event((i + 1) * SLOT + SLOT / 2, "hypercall", json!({"id": 0x22}));
    }
    s
}

/// A random mixed trace with `events` events.
pub fn soak(seed: u64, events: u32) -> Scenario {
    let mut rng = seeded(seed);
    let n_threads = rng.random_range(2..=8u32);
    let mut s = Scenario::new(format!("soak-{seed}"));
    s.lenient = true;
    for tid in 1..=n_threads {
        s = s.thread(tid, rng.random_range(0..4), rng.random_bool(0.3));
    }
    s = s.semaphore(0, 0).semaphore(1, 1);
    s = s.isr(
        1,
        Isr {
            body_cycles: 10,
            resched: true,
            action: Action::PostSem(SemId(0)),
        },
    );
    s = s.isr(2, Isr::empty());
    for i in 0..events as u64 {
        let at = (i + 1) * 2_000;
        let tid = rng.random_range(1..=n_threads);
        let (kind, args) = match rng.random_range(0..12u32) {
            0 | 1 => ("yield", json!({})),
            2 => ("block", json!({"tid": tid})),
            3 | 4 => ("unblock", json!({"tid": tid})),
            5 => ("sem_wait", json!({"sem": rng.random_range(0..2u32)})),
            6 => ("sem_post", json!({"sem": rng.random_range(0..2u32)})),
            7 => ("irq", json!({"isr": rng.random_range(1..=2u32)})),
            8 => ("arm_timer", json!({"delay": rng.random_range(1..5_000u64), "action": {"unblock": tid}})),
            9 => ("resched", json!({})),
            10 => (if rng.random_bool(0.5) { "lock" } else { "unlock" }, json!({})),
            _ => ("preemption", json!({"enabled": rng.random_bool(0.8)})),
        };
        s.push_event(at, kind, args);
    }
    s
}

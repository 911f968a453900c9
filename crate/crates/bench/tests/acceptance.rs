//! Acceptance run: one PASS/FAIL line per criterion.

#[path = "../../libgraph/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenonos_bench::*;
use tenonos_core::{keys, CostProfile, CycleClock, Cycles, EventKind};
use tenonos_libgraph::{
    candidate_scores, corpus, parse_str, validate_config, GenerateParams, LibGraph,
};
use tenonos_mortise::boot::{HC_CPU_ID, HC_NOP, HC_VERSION};
use tenonos_mortise::*;
use tenonos_rt::scenario::{ChannelKind, ChannelSpec};
use tenonos_rt::{
    workloads, BareMetal, HandlerId, SchedBranch, Scheduler, ScenarioRunner, Thread, ThreadId, ThreadState,
    TimerSubsystem,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn tenon() -> CostProfile {
    CostProfile::bundled("tenon-paper").unwrap()
}

// 1. Scheduler against a direct interpreter of the scheduling flowchart.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum St {
    Ready,
    Running,
    Blocked,
}

struct Costs {
    save: u64,
    restore: u64,
    esave: u64,
    erestore: u64,
    scan: u64,
}

const COSTS: Costs = Costs { save: 101, restore: 103, esave: 1009, erestore: 1013, scan: 7 };

fn oracle_profile() -> CostProfile {
    CostProfile::zero("flow")
        .with(keys::CTX_SAVE, COSTS.save)
        .with(keys::CTX_RESTORE, COSTS.restore)
        .with(keys::ECTX_SAVE, COSTS.esave)
        .with(keys::ECTX_RESTORE, COSTS.erestore)
        .with(keys::QUEUE_SCAN_PER_THREAD, COSTS.scan)
}

#[derive(Debug, PartialEq, Eq)]
struct Decision {
    branch: &'static str,
    prev: Option<usize>,
    next: usize,
    switched: bool,
    cycles: u64,
}

/// Thread `i` is tid `i + 1`. The ready list is one sequence in arrival
/// order; selection takes the first entry of the highest priority present.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Flow {
    prio: Vec<u8>,
    ectx: Vec<bool>,
    st: Vec<St>,
    ready: Vec<usize>,
    cur: Option<usize>,
    resched: bool,
    preempt: bool,
    locked: bool,
}

impl Flow {
    fn new(prio: &[u8]) -> Self {
        Self {
            prio: prio.to_vec(),
            ectx: (0..prio.len()).map(|i| i % 2 == 0).collect(),
            st: vec![St::Ready; prio.len()],
            ready: (0..prio.len()).collect(),
            cur: None,
            resched: false,
            preempt: true,
            locked: false,
        }
    }

    fn best(&self) -> Option<usize> {
        let top = self.ready.iter().map(|&t| self.prio[t]).max()?;
        self.ready.iter().copied().find(|&t| self.prio[t] == top)
    }

    fn take(&mut self, t: usize) {
        self.ready.retain(|&x| x != t);
    }

    fn dispatch(&mut self, prev: Option<usize>, next: usize) -> u64 {
        let mut c = COSTS.restore + if prev.is_some() { COSTS.save } else { 0 };
        if prev.is_some_and(|p| self.ectx[p]) || self.ectx[next] {
            c += COSTS.erestore + if prev.is_some() { COSTS.esave } else { 0 };
        }
        self.st[next] = St::Running;
        self.cur = Some(next);
        c
    }

    fn schedule(&mut self, yielding: bool) -> Option<Decision> {
        let prev = self.cur;
        let runnable = prev.is_some_and(|p| self.st[p] == St::Running);
        if self.resched && runnable {
            let p = prev.unwrap();
            if !self.preempt || self.locked {
                return Some(Decision { branch: "deferred", prev, next: p, switched: false, cycles: 0 });
            }
            self.resched = false;
            let mut cycles = COSTS.scan * (self.ready.len() as u64 + 1);
            return Some(match self.best() {
                Some(b) if self.prio[b] > self.prio[p] => {
                    self.take(b);
                    self.st[p] = St::Ready;
                    self.ready.insert(0, p);
                    cycles += self.dispatch(prev, b);
                    Decision { branch: "preempt", prev, next: b, switched: true, cycles }
                }
                _ => Decision { branch: "preempt", prev, next: p, switched: false, cycles },
            });
        }
        if !runnable {
            self.resched = false;
            let mut cycles = COSTS.scan * self.ready.len() as u64;
            let b = self.best()?;
            self.take(b);
            cycles += self.dispatch(prev, b);
            return Some(Decision { branch: "handoff", prev, next: b, switched: true, cycles });
        }
        let p = prev.unwrap();
        if yielding {
            self.st[p] = St::Ready;
            self.ready.push(p);
            let mut cycles = COSTS.scan * self.ready.len() as u64;
            let b = self.best().unwrap();
            self.take(b);
            if b == p {
                self.st[p] = St::Running;
                return Some(Decision { branch: "yield", prev, next: p, switched: false, cycles });
            }
            cycles += self.dispatch(prev, b);
            return Some(Decision { branch: "yield", prev, next: b, switched: true, cycles });
        }
        Some(Decision { branch: "continue", prev, next: p, switched: false, cycles: 0 })
    }

    fn toggle(&mut self, t: usize) {
        match self.st[t] {
            St::Blocked => {
                self.st[t] = St::Ready;
                self.ready.push(t);
                if self.cur.is_some_and(|c| self.prio[t] > self.prio[c]) {
                    self.resched = true;
                }
            }
            St::Running => self.st[t] = St::Blocked,
            St::Ready => {
                self.st[t] = St::Blocked;
                self.take(t);
            }
        }
    }

    fn selection_order(&self) -> Vec<usize> {
        let mut order = self.ready.clone();
        order.sort_by_key(|&t| std::cmp::Reverse(self.prio[t]));
        order
    }
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Schedule,
    Yield,
    Resched,
    TogglePreempt,
    ToggleLock,
    Toggle(usize),
}

fn branch_name(b: SchedBranch) -> &'static str {
    match b {
        SchedBranch::Deferred => "deferred",
        SchedBranch::Preempt => "preempt",
        SchedBranch::Handoff => "handoff",
        SchedBranch::Yield => "yield",
        SchedBranch::Continue => "continue",
    }
}

fn idx(t: ThreadId) -> usize {
    t.0 as usize - 1
}

fn apply(real: &mut Scheduler, flow: &mut Flow, ev: Ev, profile: &CostProfile) -> Result<(), String> {
    match ev {
        Ev::Schedule | Ev::Yield => {
            let y = matches!(ev, Ev::Yield);
            let mut clock = CycleClock::new();
            let got = real.schedule(y, &mut clock, profile);
            let want = flow.schedule(y);
            match (got, want) {
                (Ok(d), Some(w)) => {
                    let d2 = Decision {
                        branch: branch_name(d.branch),
                        prev: d.prev.map(idx),
                        next: idx(d.next),
                        switched: d.switched,
                        cycles: d.cycles,
                    };
                    ensure!(d2 == w, "decision {d2:?}, flowchart {w:?}");
                    ensure!(clock.now() == w.cycles, "clock moved {} for {} cycles", clock.now(), w.cycles);
                }
                (Err(tenonos_rt::RtError::NoRunnableThread), None) => {}
                (g, w) => return Err(format!("scheduler {g:?}, flowchart {w:?}")),
            }
        }
        Ev::Resched => {
            real.request_resched();
            flow.resched = true;
        }
        Ev::TogglePreempt => {
            real.set_preemption(!real.preemption_enabled());
            flow.preempt = !flow.preempt;
        }
        Ev::ToggleLock => {
            if real.locked() {
                real.unlock();
            } else {
                real.lock();
            }
            flow.locked = !flow.locked;
        }
        Ev::Toggle(t) => {
            let tid = ThreadId(t as u32 + 1);
            if real.thread(tid).unwrap().state == ThreadState::Blocked {
                real.unblock(tid).map_err(|e| e.to_string())?;
            } else {
                real.block(tid).map_err(|e| e.to_string())?;
            }
            flow.toggle(t);
        }
    }
    let states: Vec<St> = (0..flow.prio.len())
        .map(|i| match real.thread(ThreadId(i as u32 + 1)).unwrap().state {
            ThreadState::Ready => St::Ready,
            ThreadState::Running => St::Running,
            _ => St::Blocked,
        })
        .collect();
    ensure!(states == flow.st, "states {states:?}, flowchart {:?}", flow.st);
    let order: Vec<usize> = real.ready_order().into_iter().map(idx).collect();
    ensure!(order == flow.selection_order(), "queue {order:?}, flowchart {:?}", flow.selection_order());
    ensure!(real.current().map(idx) == flow.cur, "current differs");
    ensure!(real.need_resched() == flow.resched, "need_resched differs");
    ensure!(real.preemption_enabled() == flow.preempt && real.locked() == flow.locked, "flags differ");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn explore(
    real: &Scheduler,
    flow: &Flow,
    alphabet: &[Ev],
    left: usize,
    trace: &mut Vec<Ev>,
    count: &mut u64,
    seen: &mut HashSet<(Flow, usize)>,
    profile: &CostProfile,
) -> Result<(), String> {
    // Every field of `Flow` is compared against the scheduler after each
    // event, so a state already explored at this depth has the same suffixes.
    if left == 0 || !seen.insert((flow.clone(), left)) {
        return Ok(());
    }
    for &ev in alphabet {
        let (mut r, mut f) = (real.clone(), flow.clone());
        trace.push(ev);
        apply(&mut r, &mut f, ev, profile).map_err(|e| format!("{e} after {trace:?} (prio {:?})", flow.prio))?;
        *count += 1;
        explore(&r, &f, alphabet, left - 1, trace, count, seen, profile)?;
        trace.pop();
    }
    Ok(())
}

fn scheduler_oracle() -> Outcome {
    let profile = oracle_profile();
    let (mut configs, mut steps) = (0u64, 0u64);
    for n in 1..=4usize {
        let mut alphabet = vec![Ev::Schedule, Ev::Yield, Ev::Resched, Ev::TogglePreempt, Ev::ToggleLock];
        alphabet.extend((0..n).map(Ev::Toggle));
        for code in 0..3usize.pow(n as u32) {
            let prio: Vec<u8> = (0..n).map(|i| (code / 3usize.pow(i as u32) % 3) as u8).collect();
            let flow = Flow::new(&prio);
            let mut real = Scheduler::new();
            for (i, p) in prio.iter().enumerate() {
                real.spawn(Thread::new(i as u32 + 1, *p).with_ectx(flow.ectx[i])).unwrap();
            }
            explore(&real, &flow, &alphabet, 6, &mut Vec::new(), &mut steps, &mut HashSet::new(), &profile)?;
            configs += 1;
        }
    }
    Ok(format!("{configs} priority configurations, {steps} distinct (state, event) transitions over all sequences of up to 6 events, 0 disagreements"))
}

// 2. Priority safety on long random traces.

fn soak() -> Outcome {
    let profile = tenon();
    let mut checks = 0u64;
    for seed in 0..100u64 {
        let events = 10_000u64;
        let s = workloads::soak(seed, events as u32);
        let mut r = ScenarioRunner::new(&s, &profile).unwrap().lenient(true);
        let mut port = BareMetal::new();
        for i in 0..events {
            r.step_until((i + 1) * 2_000 + 1, &mut port).map_err(|e| format!("seed {seed}: {e}"))?;
            let sched = &r.kernel().sched;
            let running = sched.threads().find(|t| t.state == ThreadState::Running);
            let top_ready = sched.threads().filter(|t| t.state == ThreadState::Ready).map(|t| t.priority).max();
            match (running, top_ready) {
                (None, Some(p)) => return Err(format!("seed {seed} event {i}: cpu idle with a ready thread at {p}")),
                (Some(cur), Some(p)) if sched.preemption_enabled() && !sched.locked() && p > cur.priority => {
                    return Err(format!("seed {seed} event {i}: ready {p} outranks running {}", cur.priority))
                }
                _ => {}
            }
            checks += 1;
        }
        let out = r.finish();
        ensure!(out.metrics.priority_violations == 0, "seed {seed}: kernel counted violations");
    }
    Ok(format!("100 seeds x 10^4 events, {checks} scheduling-point exits checked"))
}

// 3. Table 3 ordering.

fn ectx_ordering() -> Outcome {
    let suite = BenchmarkSuite::bundled("table3").unwrap();
    let report = run_bench(&suite, &ReferenceData::bundled(), &BenchOptions::new(tenon())).map_err(|e| e.to_string())?;
    let mean = |name: String| report.row(&name, "switch_mean").map(|r| r.simulated).ok_or(format!("no row {name}"));
    let mut on = Vec::new();
    let mut off = Vec::new();
    for n in [2, 10, 20, 50, 100] {
        let (a, b) = (mean(format!("switch-{n}-ectx"))?, mean(format!("switch-{n}-noectx"))?);
        ensure!(a >= b, "{n} threads: ectx {a} < no-ectx {b}");
        on.push(a);
        off.push(b);
    }
    ensure!(on.windows(2).all(|w| w[0] <= w[1]), "ectx series not monotone: {on:?}");
    ensure!(off.windows(2).all(|w| w[0] <= w[1]), "no-ectx series not monotone: {off:?}");
    Ok(format!("ectx {on:.0?} >= no-ectx {off:.0?}"))
}

// 4. Interrupt pipeline totals.

fn interrupt_totals() -> Outcome {
    let suite = BenchmarkSuite::bundled("fig8").unwrap();
    let report = run_bench(&suite, &ReferenceData::bundled(), &BenchOptions::new(tenon())).map_err(|e| e.to_string())?;
    let mut got = Vec::new();
    for (name, want) in [("irq-tenon", 208.0), ("irq-zephyr", 355.0), ("irq-rtthread", 335.0)] {
        let row = report.row(name, "irq_mean").ok_or(format!("no row {name}"))?;
        ensure!(row.simulated == want, "{name}: {} != {want}", row.simulated);
        ensure!(row.reference == Some(want), "{name}: reference column {:?}", row.reference);
        got.push(row.simulated);
    }
    Ok(format!("tenon/zephyr/rtthread = {got:?}"))
}

// 5. Mode 1 adds nothing but hypercall traps.

fn mode1_interference() -> Outcome {
    let cfg = ColocateConfig::default();
    let mut plain = vec![
        workloads::thread_switch(2, false, 20),
        workloads::thread_switch(50, false, 3),
        workloads::thread_switch(10, true, 5),
        workloads::preemption(false, 20, 3),
        workloads::preemption(true, 20, 3),
        workloads::sem_wakeup(false, 20),
        workloads::sem_wakeup(true, 20),
        workloads::interrupt(20),
    ];
    for seed in 0..3 {
        plain.push(workloads::timer_load(seed, 40, 500_000, None));
        plain.push(workloads::timer_load(seed, 40, 500_000, Some(5_000)));
    }
    let mut checked = 0;
    for profile in [tenon(), CostProfile::bundled("rtthread-paper").unwrap()] {
        for s in &plain {
            let r = run_colocate(s, &cfg, &profile).map_err(|e| e.to_string())?;
            ensure!(r.bare == r.mode1, "{}: bare and Mode 1 metrics differ", s.name);
            ensure!(r.mode1 == r.mode1_neighbor, "{}: neighbor changed the victim", s.name);
            checked += 1;
        }
        let trap = profile.cost(keys::HYPERCALL_TRAP).unwrap() as i128;
        for threads in [1, 2, 4] {
            for calls in [1, 5, 12, 30] {
                let s = workloads::hypercall_mix(threads, calls);
                let r = run_colocate(&s, &cfg, &profile).map_err(|e| e.to_string())?;
                ensure!(r.mode1.hypercalls == calls as u64, "{}: {} hypercalls", s.name, r.mode1.hypercalls);
                ensure!(r.total_delta == calls as i128 * trap, "{}: delta {} != {calls} x {trap}", s.name, r.total_delta);
                ensure!(r.mode1 == r.mode1_neighbor, "{}: neighbor changed the victim", s.name);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} scenarios across 2 profiles"))
}

// 6. Timer modes.

fn timer_modes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7131);
    let (mut scaling_cases, mut fires_total) = (0, 0);
    for case in 0..1000 {
        let n = rng.random_range(0..40);
        let timers: Vec<(Cycles, Option<Cycles>)> = (0..n)
            .map(|_| (rng.random_range(0..5_000), rng.random_bool(0.3).then(|| rng.random_range(1..800))))
            .collect();
        let period = rng.random_range(1..700);
        let window = rng.random_range(1..6_000);
        const BASE: Cycles = 10_000;
        let run = |mut ts: TimerSubsystem, p: &CostProfile| {
            let mut c = CycleClock::new();
            for (i, (d, per)) in timers.iter().enumerate() {
                ts.arm(BASE + d, HandlerId(i as u32), *per, &mut c, p).unwrap();
            }
            ts.run_until(BASE + window, &mut c, p).unwrap()
        };
        let p = CostProfile::zero("t")
            .with(keys::TIMER_REPROGRAM, rng.random_range(0..100))
            .with(keys::TICK_HANDLER, rng.random_range(0..100))
            .with(keys::TIMER_FIRE, rng.random_range(0..100));
        let a = run(TimerSubsystem::tickless(), &p);
        let b = run(TimerSubsystem::fixed_tick(period).unwrap(), &p);
        let set = |r: &tenonos_rt::TimerCostReport| r.fires.iter().map(|f| (f.id, f.at)).collect::<Vec<_>>();
        ensure!(set(&a) == set(&b), "case {case}: fire sets differ");
        fires_total += a.fires.len();

        let c = rng.random_range(1..100);
        let eq = CostProfile::zero("eq")
            .with(keys::TIMER_REPROGRAM, c)
            .with(keys::TICK_HANDLER, c)
            .with(keys::TIMER_FIRE, rng.random_range(0..100));
        let less = run(TimerSubsystem::tickless(), &eq);
        let tick = run(TimerSubsystem::fixed_tick(period).unwrap(), &eq);
        if less.fires.len() as u64 <= tick.tick_count {
            scaling_cases += 1;
            ensure!(
                less.management_cycles <= tick.management_cycles,
                "case {case}: tickless {} > fixed tick {}",
                less.management_cycles,
                tick.management_cycles
            );
        }
    }
    Ok(format!("1000 workloads, {fires_total} fires identical; tickless <= fixed tick in {scaling_cases}/{scaling_cases} qualifying cases"))
}

// 7. Hypercall routing.

fn routing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4c);
    let mut dispatched = 0u64;
    for layout in 0..20 {
        let mut sys = boot_static(&StaticBootConfig::new(4, vec![InstanceConfig::pinned(1, [1])]), &tenon()).unwrap();
        let platform: BTreeMap<u32, u64> = [(HC_VERSION, 1), (HC_CPU_ID, 1), (HC_NOP, 0)].into();
        let taken: BTreeSet<u32> = platform.keys().copied().collect();
        let mut pool: Vec<u32> = (0..1024).filter(|id| !taken.contains(id)).collect();
        let hits = Arc::new(Mutex::new(Vec::new()));
        let mut expected: BTreeMap<u32, u64> = platform.clone();
        for group in ["mem", "io"] {
            let size = rng.random_range(1..=64);
            let mut ids = Vec::new();
            for _ in 0..size {
                let k = rng.random_range(0..pool.len());
                ids.push(pool.swap_remove(k));
            }
            let entries: Vec<(u32, Handler)> = ids
                .iter()
                .map(|&id| {
                    let hits = hits.clone();
                    let tag = 10_000 + id as u64;
                    expected.insert(id, tag);
                    (id, Handler::func(format!("{group}-{id}"), move |_, _| {
                        hits.lock().unwrap().push(id);
                        Ok(tag)
                    }))
                })
                .collect();
            sys.register_hypercall_group(group, entries).map_err(|e| e.to_string())?;
        }
        ensure!(sys.table().group_names().len() == 3, "layout {layout}: {:?}", sys.table().group_names());
        for id in 0..1024u32 {
            let before = hits.lock().unwrap().len();
            let got = sys.dispatch(Caller::Instance(InstanceId(1)), id, &[], None);
            let after = hits.lock().unwrap().clone();
            match expected.get(&id) {
                Some(want) => {
                    ensure!(got.as_ref() == Ok(want), "layout {layout} id {id:#x}: {got:?}, want {want}");
                    if !platform.contains_key(&id) {
                        ensure!(after.len() == before + 1 && after[before] == id, "id {id:#x} reached no handler");
                    }
                }
                None => {
                    ensure!(got == Err(MortiseError::UnknownHypercall(id)), "layout {layout} id {id:#x}: {got:?}");
                    ensure!(after.len() == before, "unregistered id {id:#x} ran a handler");
                }
            }
            dispatched += 1;
        }
        ensure!(sys.hypercall_count() == expected.len() as u64, "layout {layout}: trap count");
    }
    Ok(format!("20 layouts x 2^10 ids ({dispatched} dispatches), 3 groups each"))
}

// 8. Isolation.

#[derive(Debug, Clone, Copy)]
enum IsoStep {
    Access(u32, usize, Access),
    Send(u32, bool),
    Recv(u32),
    Color(u32, u32),
    Terminate(u32),
}

fn iso_step(rng: &mut ChaCha8Rng) -> IsoStep {
    let inst = rng.random_range(1..5);
    match rng.random_range(0..5) {
        0 => IsoStep::Access(inst, rng.random_range(0..12), *[Access::Read, Access::Write, Access::Execute].choose(rng).unwrap()),
        1 => IsoStep::Send(inst, rng.random_bool(0.5)),
        2 => IsoStep::Recv(inst),
        3 => IsoStep::Color(inst, rng.random_range(0..6)),
        _ => IsoStep::Terminate(inst),
    }
}

fn colors_disjoint(sys: &MortiseSystem) -> bool {
    let mut seen = BTreeSet::new();
    let total = sys.colors().total();
    sys.colors().assignments().values().flatten().all(|c| *c < total && seen.insert(*c)) && sys.colors().is_disjoint()
}

fn isolation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x150);
    let mut total_steps = 0;
    for seq in 0..1000 {
        let cfg = StaticBootConfig::new(
            4,
            vec![InstanceConfig::pinned(1, [1]), InstanceConfig::pinned(2, [2]), InstanceConfig::pinned(3, [3])],
        );
        let mut sys = boot_static(&cfg, &tenon()).unwrap();
        let spec = |cid, kind, a, b, directed| ChannelSpec { cid, kind, a, b, capacity: 3, directed, zero_copy: false };
        let shm = sys.open_channel(&spec(0, ChannelKind::SharedMemory, 1, 2, false)).unwrap();
        let mq = sys.open_channel(&spec(1, ChannelKind::MessageQueue, 2, 3, true)).unwrap();
        let mut perms: BTreeMap<(RegionId, u32), Perm> = BTreeMap::new();
        for r in sys.regions() {
            for (i, p) in &r.permissions {
                perms.insert((r.rid, i.0), *p);
            }
        }
        let rids: Vec<RegionId> = sys.regions().map(|r| r.rid).collect();
        let mut queues: BTreeMap<u32, VecDeque<u8>> = [(shm, VecDeque::new()), (mq, VecDeque::new())].into();
        let mut dead = BTreeSet::new();
        let mut counter = 0u8;
        let mut expected_violations = 0;
        let steps = rng.random_range(1..60);
        for _ in 0..steps {
            let s = iso_step(&mut rng);
            let ctx = || format!("sequence {seq}, step {s:?}");
            match s {
                IsoStep::Access(i, r, a) => {
                    let rid = rids.get(r).copied().unwrap_or(RegionId(999));
                    let want = !dead.contains(&i)
                        && perms.get(&(rid, i)).is_some_and(|p| {
                            matches!(
                                (p, a),
                                (Perm::Ro | Perm::Rw, Access::Read) | (Perm::Rw, Access::Write) | (Perm::Xo, Access::Execute)
                            )
                        });
                    ensure!(sys.access(InstanceId(i), rid, a).allowed() == want, "{}: wrong decision", ctx());
                    expected_violations += usize::from(!want);
                }
                IsoStep::Send(i, use_mq) => {
                    let (cid, a, b, directed) = if use_mq { (mq, 2, 3, true) } else { (shm, 1, 2, false) };
                    counter = counter.wrapping_add(1);
                    let r = sys.send(cid, InstanceId(i), &[counter], None);
                    if !(i == a || (!directed && i == b)) {
                        ensure!(matches!(r, Err(MortiseError::NotAnEndpoint { .. })), "{}: {r:?}", ctx());
                        expected_violations += 1;
                    } else if dead.contains(&a) || dead.contains(&b) {
                        ensure!(r.is_err(), "{}: send to a dead endpoint succeeded", ctx());
                    } else if queues[&cid].len() >= 3 {
                        ensure!(r == Ok(SendOutcome::Full), "{}: {r:?}", ctx());
                    } else {
                        ensure!(r == Ok(SendOutcome::Sent), "{}: {r:?}", ctx());
                        queues.get_mut(&cid).unwrap().push_back(counter);
                    }
                }
                IsoStep::Recv(i) => {
                    for (cid, a, b, directed) in [(shm, 1, 2, false), (mq, 2, 3, true)] {
                        let r = sys.recv(cid, InstanceId(i));
                        if !(i == b || (!directed && i == a)) {
                            ensure!(r.is_err(), "{}: non-endpoint receive", ctx());
                            expected_violations += 1;
                        } else if dead.contains(&i) {
                            ensure!(r.is_err(), "{}: dead receiver", ctx());
                        } else {
                            let want = queues.get_mut(&cid).unwrap().pop_front();
                            ensure!(r.as_ref().map(|m| m.as_ref().map(|m| m[0])) == Ok(want), "{}: {r:?}", ctx());
                        }
                    }
                }
                IsoStep::Color(i, n) => {
                    let _ = sys.assign_colors(InstanceId(i), n);
                    ensure!(colors_disjoint(&sys), "{}: colors overlap", ctx());
                }
                IsoStep::Terminate(i) => {
                    if sys.lifecycle(LifecycleAction::Terminate(InstanceId(i))).is_ok() {
                        dead.insert(i);
                        perms.retain(|(_, who), _| *who != i);
                    }
                    ensure!(colors_disjoint(&sys), "{}: colors overlap", ctx());
                }
            }
            total_steps += 1;
        }
        let logged = sys.events().iter().filter(|e| matches!(e.kind, EventKind::IsolationViolation { .. })).count();
        ensure!(logged == expected_violations, "sequence {seq}: {logged} logged, {expected_violations} expected");
        let audit = audit_isolation(&sys);
        ensure!(audit.is_empty(), "sequence {seq}: {audit:?}");
    }
    Ok(format!("1000 sequences, {total_steps} steps, every denial logged, colors disjoint throughout"))
}

// 9. Validation against exhaustive evaluation.

const GRAPHS: &[&str] = &[
    "config A\n\tbool \"a\"\n",
    "config A\n\tbool \"a\"\n\nconfig B\n\tbool \"b\"\n\tdepends on A\n",
    "config A\n\ttristate \"a\"\n\nconfig B\n\ttristate \"b\"\n\tdepends on A\n",
    "config A\n\tbool \"a\"\n\nconfig B\n\tbool \"b\"\n\nconfig C\n\tbool \"c\"\n\tdepends on A && B\n",
    "config A\n\tbool \"a\"\n\nconfig B\n\tbool \"b\"\n\nconfig C\n\ttristate \"c\"\n\tdepends on A || B\n",
    "config A\n\tbool \"a\"\n\nconfig B\n\tbool \"b\"\n\tdepends on !A\n",
    "config A\n\ttristate \"a\"\n\nconfig B\n\tbool \"b\"\n\tdepends on A = m\n",
    "config A\n\ttristate \"a\"\n\nconfig B\n\ttristate \"b\"\n\tdepends on A != n\n",
    "config T\n\tbool \"t\"\n\nconfig S\n\tbool \"s\"\n\tselect T\n",
    "config T\n\ttristate \"t\"\n\nconfig S\n\ttristate \"s\"\n\tselect T\n",
    "config T\n\ttristate \"t\"\n\nconfig C\n\tbool \"c\"\n\nconfig S\n\ttristate \"s\"\n\tselect T if C\n",
    "config A\n\tbool \"a\"\n\tselect B\n\nconfig B\n\tbool \"b\"\n\tselect C\n\nconfig C\n\tbool \"c\"\n\tdepends on D\n\nconfig D\n\tbool \"d\"\n",
    "choice\n\tprompt \"p\"\nconfig P\n\tbool \"p\"\nconfig Q\n\tbool \"q\"\nendchoice\n",
    "config G\n\tbool \"g\"\n\nchoice\n\tprompt \"p\"\n\tdepends on G\nconfig P\n\tbool \"p\"\nconfig Q\n\tbool \"q\"\nconfig R\n\tbool \"r\"\nendchoice\n",
    "config G\n\tbool \"g\"\n\nchoice\n\tprompt \"p\"\nconfig P\n\tbool \"p\"\n\tdepends on G\nconfig Q\n\tbool \"q\"\n\tdepends on G\nendchoice\n",
    "config G\n\tbool \"g\"\n\nmenu \"m\"\n\tdepends on G\n\nconfig A\n\tbool \"a\"\n\nconfig B\n\ttristate \"b\"\n\tdepends on A\n\nendmenu\n",
    "config G\n\ttristate \"g\"\n\nif G\n\nconfig A\n\ttristate \"a\"\n\nconfig B\n\tbool \"b\"\n\nendif\n",
    "menuconfig NET\n\tbool \"net\"\n\nif NET\n\nconfig TCP\n\tbool \"tcp\"\n\nconfig UDP\n\tbool \"udp\"\n\nconfig SOCK\n\tbool \"sock\"\n\tdepends on TCP || UDP\n\nendif\n",
    "config A\n\tbool \"a\"\n\tdefault y\n\nconfig B\n\tbool \"b\"\n\tdepends on A\n\tdefault y\n\nconfig C\n\tbool \"c\"\n\tselect A\n",
    "config A\n\ttristate \"a\"\n\nconfig B\n\ttristate \"b\"\n\nconfig C\n\ttristate \"c\"\n\tdepends on A && !B\n\nconfig D\n\ttristate \"d\"\n\tselect C if A\n",
    "config SMP\n\tbool \"smp\"\n\nconfig RT\n\tbool \"rt\"\n\tdepends on SMP\n\nconfig BAL\n\tbool \"balance\"\n\tdepends on SMP && !RT\n\nconfig IDLE\n\tbool \"idle\"\n\tselect BAL if SMP\n",
    "config X\n\tbool \"x\"\n\nchoice\n\tprompt \"alloc\"\n\tdepends on X\nconfig BUDDY\n\tbool \"buddy\"\nconfig REGION\n\tbool \"region\"\nendchoice\n\nconfig STATS\n\tbool \"stats\"\n\tdepends on BUDDY\n",
    "config A\n\tbool \"a\"\n\nconfig B\n\tbool \"b\"\n\nconfig C\n\tbool \"c\"\n\nconfig D\n\tbool \"d\"\n\tdepends on (A || B) && (C || !A)\n\nconfig E\n\ttristate \"e\"\n\tdepends on D = y\n",
    "config A\n\ttristate \"a\"\n\tselect B\n\tselect C\n\nconfig B\n\ttristate \"b\"\n\nconfig C\n\tbool \"c\"\n\nconfig F\n\ttristate \"f\"\n\tdepends on B\n",
    "menu \"root\"\n\nconfig A\n\tbool \"a\"\n\nif A\n\nmenu \"inner\"\n\nconfig B\n\ttristate \"b\"\n\nconfig C\n\ttristate \"c\"\n\tdepends on B\n\nendmenu\n\nendif\n\nconfig D\n\tbool \"d\"\n\tselect C\n\nendmenu\n",
];

fn validation_oracle() -> Outcome {
    ensure!(GRAPHS.len() == 25, "expected 25 graphs, have {}", GRAPHS.len());
    let mut assignments = 0;
    for (i, text) in GRAPHS.iter().enumerate() {
        let g = parse_str(text).map_err(|e| format!("graph {i}: {e}"))?.graph;
        let syms = g.tri_symbols().count();
        ensure!((1..=10).contains(&syms), "graph {i}: {syms} symbols");
        for vals in common::assignments(&g) {
            let want = common::oracle_violations(&g, &vals);
            let got: BTreeSet<String> = validate_config(&g, &common::to_selection(&vals))
                .violations()
                .iter()
                .map(|v| v.symbol.clone())
                .collect();
            ensure!(got == want, "graph {i} under {vals:?}: {got:?} vs {want:?}");
            assignments += 1;
        }
    }
    Ok(format!("25 graphs, {assignments} assignments, exact agreement"))
}

// 10. Orchestration corpus.

fn brute_force_best(g: &LibGraph, o: &tenonos_libgraph::Report) -> f64 {
    let scores = candidate_scores(g, &o.candidates);
    let hard = &o.objective.hard_constraints;
    let lambda = GenerateParams::default().lambda;
    common::assignments(g)
        .into_iter()
        .filter(|vals| hard.iter().all(|(k, v)| !g.get(k).unwrap().is_tri() || vals[k] == v.tri().level()))
        .filter(|vals| common::oracle_violations(g, vals).is_empty())
        .map(|vals| {
            vals.iter()
                .filter(|(_, v)| **v > 0)
                .map(|(k, _)| scores.get(k).copied().unwrap_or(if hard.contains_key(k) { 0.0 } else { -lambda }))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn corpus_run() -> Outcome {
    let opts = OrchestrateOptions::default();
    let (mut valid, mut argmax) = (0, 0);
    for t in corpus::TREES {
        let tree = TreeSource::Corpus(t);
        let a = run_orchestrate(&tree, &opts).map_err(|e| format!("{}: {e}", t.name))?;
        let b = run_orchestrate(&tree, &opts).map_err(|e| format!("{}: {e}", t.name))?;
        ensure!(a.valid(), "{}: {:?}", t.name, a.orchestration.report.validation);
        ensure!(validate_config(&a.orchestration.graph, &a.orchestration.selection).is_valid(), "{}: revalidation", t.name);
        ensure!(a.dotconfig == b.dotconfig && a.orchestration.selection == b.orchestration.selection, "{}: runs differ", t.name);
        valid += 1;
        let g = &a.orchestration.graph;
        if g.tri_symbols().count() <= 12 {
            let best = brute_force_best(g, &a.orchestration.report);
            let got = a.orchestration.report.utility;
            ensure!((got - best).abs() < 1e-9, "{}: utility {got}, brute force {best}", t.name);
            argmax += 1;
        }
    }
    ensure!(valid == 14, "{valid}/14 valid");
    ensure!(argmax > 0, "no corpus tree small enough for brute force");
    Ok(format!("14/14 Valid and repeatable; brute-force argmax matched on {argmax} trees with <= 12 symbols"))
}

// 11. Byte-identical CSV.

fn determinism() -> Outcome {
    let suite = BenchmarkSuite::bundled("full").unwrap();
    let opts = BenchOptions { seed: 42, ..BenchOptions::new(tenon()) };
    let refs = ReferenceData::bundled();
    let first = run_bench(&suite, &refs, &opts).map_err(|e| e.to_string())?.to_csv();
    let second = run_bench(&suite, &refs, &opts).map_err(|e| e.to_string())?.to_csv();
    ensure!(first == second, "two library runs differ");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("full.csv");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_tenonos"))
        .args(["bench", "builtin:full", "--format", "csv", "--seed", "42", "--out"])
        .arg(&path)
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "tenonos bench exited with {status}");
    let third = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    ensure!(third == first, "binary output differs from library output");
    Ok(format!("{} rows, {} bytes, identical across 3 runs", first.lines().count() - 1, first.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("scheduler oracle equivalence", 10, scheduler_oracle),
        ("priority-safety soak", 30, soak),
        ("ectx ordering", 5, ectx_ordering),
        ("interrupt pipeline calibration", 1, interrupt_totals),
        ("Mode-1 zero interference", 10, mode1_interference),
        ("timer-mode equivalence and scaling", 30, timer_modes),
        ("hypercall routing totality", 5, routing),
        ("isolation default-deny", 30, isolation),
        ("Kconfig validation oracle", 10, validation_oracle),
        ("orchestration corpus", 60, corpus_run),
        ("determinism", 60, determinism),
    ];
    let mut failed = 0;
    for (n, (name, budget, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > Duration::from_secs(*budget) => {
                Err(format!("{detail}; took {:.2}s, budget {budget}s", took.as_secs_f64()))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail} [{:.2}s]", n + 1, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {why} [{:.2}s]", n + 1, took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

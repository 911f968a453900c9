//! Scenario files and the runner that drives a [`TenonKernel`] from them.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "threads": [{"tid": 1, "priority": 3, "ectx": false}],
//!   "semaphores": [{"id": 0, "count": 0}],
//!   "isrs": [{"id": 1, "body_cycles": 0, "resched": true, "action": {"post_sem": 0}}],
//!   "events": [{"at_cycle": 100, "kind": "irq", "args": {"isr": 1}}],
//!   "profile": "tenon-paper",
//!   "timer_mode": "tickless",
//!   "tick_period": 1000
//! }
//! ```
//!
//! Event kinds and their `args`:
//!
//! | kind | args |
//! |------|------|
//! | `spawn` | `tid`, `priority`, `ectx`?, `process`? |
//! | `block` | `tid`? (default: the running thread) |
//! | `unblock` | `tid` |
//! | `terminate` | `tid`? |
//! | `yield` | none |
//! | `resched` | none |
//! | `lock` / `unlock` | none |
//! | `preemption` | `enabled` |
//! | `sem_wait` / `sem_post` | `sem` |
//! | `irq` | `isr` |
//! | `arm_timer` | `deadline` or `delay`, `handler`?, `period`?, `action`? |
//! | `hypercall` | `id`, `args`? |
//! | `ivc_send` | `channel`, `bytes`? |
//! | `ivc_recv` | `channel` |

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tenonos_core::{CostProfile, Cycles};

use crate::irq::{Isr, IsrId};
use crate::kernel::{Action, TenonKernel};
use crate::port::ServicePort;
use crate::sched::SchedBranch;
use crate::sem::{SemId, SemWait};
use crate::thread::{Thread, ThreadId};
use crate::timer::{HandlerId, TimerMode};
use crate::RtError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadSpec {
    pub tid: u32,
    pub priority: u8,
    #[serde(default)]
    pub ectx: bool,
    #[serde(default)]
    pub process: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemSpec {
    pub id: u32,
    #[serde(default)]
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsrSpec {
    pub id: u32,
    #[serde(flatten)]
    pub isr: Isr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    #[serde(alias = "shared-memory", alias = "SharedMemory")]
    SharedMemory,
    #[serde(alias = "message-queue", alias = "MessageQueue")]
    MessageQueue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub cid: u32,
    pub kind: ChannelKind,
    pub a: u32,
    pub b: u32,
    pub capacity: usize,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub zero_copy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub at_cycle: Cycles,
    pub kind: String,
    #[serde(default)]
    pub args: Value,
}

fn default_timer_mode() -> TimerMode {
    TimerMode::Tickless
}

fn default_tick_period() -> Cycles {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub threads: Vec<ThreadSpec>,
    #[serde(default)]
    pub semaphores: Vec<SemSpec>,
    #[serde(default)]
    pub isrs: Vec<IsrSpec>,
    #[serde(default)]
    pub events: Vec<RawEvent>,
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default = "default_timer_mode")]
    pub timer_mode: TimerMode,
    #[serde(default = "default_tick_period")]
    pub tick_period: Cycles,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    /// Run the clock to this point after the last event.
    #[serde(default)]
    pub end_cycle: Option<Cycles>,
    /// Skip events that are illegal when they arrive; see
    /// [`ScenarioRunner::lenient`].
    #[serde(default)]
    pub lenient: bool,
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            threads: Vec::new(),
            semaphores: Vec::new(),
            isrs: Vec::new(),
            events: Vec::new(),
            profile: None,
            timer_mode: TimerMode::Tickless,
            tick_period: default_tick_period(),
            channels: Vec::new(),
            end_cycle: None,
            lenient: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RtError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| RtError::Scenario(e.to_string()))?;
        s.parse_events()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, RtError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RtError::Scenario(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_json(&text)?;
        if s.name.is_empty() {
            s.name = path
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn thread(mut self, tid: u32, priority: u8, ectx: bool) -> Self {
        self.threads.push(ThreadSpec {
            tid,
            priority,
            ectx,
            process: 0,
        });
        self
    }

    pub fn semaphore(mut self, id: u32, count: u32) -> Self {
        self.semaphores.push(SemSpec { id, count });
        self
    }

    pub fn isr(mut self, id: u32, isr: Isr) -> Self {
        self.isrs.push(IsrSpec { id, isr });
        self
    }

    pub fn event(mut self, at_cycle: Cycles, kind: &str, args: Value) -> Self {
        self.events.push(RawEvent {
            at_cycle,
            kind: kind.to_string(),
            args,
        });
        self
    }

    pub fn push_event(&mut self, at_cycle: Cycles, kind: &str, args: Value) {
        self.events.push(RawEvent {
            at_cycle,
            kind: kind.to_string(),
            args,
        });
    }

    /// Whether any event needs a hypervisor service.
    pub fn uses_hypercalls(&self) -> bool {
        self.events.iter().any(|e| e.kind == "hypercall")
    }

    pub fn parse_events(&self) -> Result<Vec<(Cycles, ScenarioEvent)>, RtError> {
        let mut out: Vec<(Cycles, ScenarioEvent)> = self
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| ScenarioEvent::parse(&e.kind, &e.args).map(|ev| (e.at_cycle, ev)).map_err(|m| RtError::Scenario(format!("event {i} ({}): {m}", e.kind))))
            .collect::<Result<_, _>>()?;
        out.sort_by_key(|(t, _)| *t);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioEvent {
    Spawn(ThreadSpec),
    Block(Option<u32>),
    Unblock(u32),
    Terminate(Option<u32>),
    Yield,
    Resched,
    Lock,
    Unlock,
    Preemption(bool),
    SemWait(u32),
    SemPost(u32),
    Irq(u32),
    ArmTimer {
        deadline: Option<Cycles>,
        delay: Option<Cycles>,
        handler: Option<u32>,
        period: Option<Cycles>,
        action: Action,
    },
    Hypercall { id: u32, args: Vec<u64> },
    IvcSend { channel: u32, bytes: usize },
    IvcRecv(u32),
}

fn field_u64(args: &Value, key: &str) -> Result<Option<u64>, String> {
    match args.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| format!("`{key}` must be a non-negative integer")),
    }
}

fn need_u64(args: &Value, key: &str) -> Result<u64, String> {
    field_u64(args, key)?.ok_or_else(|| format!("missing `{key}`"))
}

fn need_u32(args: &Value, key: &str) -> Result<u32, String> {
    let v = need_u64(args, key)?;
    u32::try_from(v).map_err(|_| format!("`{key}` out of range"))
}

fn opt_u32(args: &Value, key: &str) -> Result<Option<u32>, String> {
    field_u64(args, key)?
        .map(|v| u32::try_from(v).map_err(|_| format!("`{key}` out of range")))
        .transpose()
}

impl ScenarioEvent {
    pub fn parse(kind: &str, args: &Value) -> Result<Self, String> {
        Ok(match kind {
            "spawn" => Self::Spawn(
                serde_json::from_value(args.clone()).map_err(|e| e.to_string())?,
            ),
            "block" => Self::Block(opt_u32(args, "tid")?),
            "unblock" => Self::Unblock(need_u32(args, "tid")?),
            "terminate" => Self::Terminate(opt_u32(args, "tid")?),
            "yield" => Self::Yield,
            "resched" => Self::Resched,
            "lock" => Self::Lock,
            "unlock" => Self::Unlock,
            "preemption" => Self::Preemption(
                args.get("enabled")
                    .and_then(Value::as_bool)
                    .ok_or("missing boolean `enabled`")?,
            ),
            "sem_wait" => Self::SemWait(need_u32(args, "sem")?),
            "sem_post" => Self::SemPost(need_u32(args, "sem")?),
            "irq" => Self::Irq(need_u32(args, "isr")?),
            "arm_timer" => {
                let deadline = field_u64(args, "deadline")?;
                let delay = field_u64(args, "delay")?;
                if deadline.is_some() == delay.is_some() {
                    return Err("exactly one of `deadline` or `delay` is required".into());
                }
                let action = match args.get("action") {
                    None | Some(Value::Null) => Action::None,
                    Some(v) => serde_json::from_value(v.clone()).map_err(|e| e.to_string())?,
                };
                Self::ArmTimer {
                    deadline,
                    delay,
                    handler: opt_u32(args, "handler")?,
                    period: field_u64(args, "period")?,
                    action,
                }
            }
            "hypercall" => {
                let id = need_u32(args, "id")?;
                let list = match args.get("args") {
                    None | Some(Value::Null) => Vec::new(),
                    Some(v) => serde_json::from_value(v.clone()).map_err(|e| e.to_string())?,
                };
                Self::Hypercall { id, args: list }
            }
            "ivc_send" => Self::IvcSend {
                channel: need_u32(args, "channel")?,
                bytes: field_u64(args, "bytes")?.unwrap_or(64) as usize,
            },
            "ivc_recv" => Self::IvcRecv(need_u32(args, "channel")?),
            other => return Err(format!("unknown event kind `{other}`")),
        })
    }
}

/// Aggregate measurements of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    /// Cycles spent doing work (elapsed minus idle).
    pub total_cycles: Cycles,
    pub elapsed_cycles: Cycles,
    pub scheduling_points: u64,
    pub switches: u64,
    pub switch_cycles: Cycles,
    pub preemptions: u64,
    pub preempt_cycles: Cycles,
    pub interrupts: u64,
    pub irq_cycles: Cycles,
    pub sem_wakeups: u64,
    pub sem_wakeup_cycles: Cycles,
    pub timer_fires: u64,
    pub timer_management_cycles: Cycles,
    pub ticks: u64,
    pub hypercalls: u64,
    pub hypercall_cycles: Cycles,
    pub ivc_messages: u64,
    pub ivc_cycles: Cycles,
    pub ivc_full: u64,
    pub priority_violations: u64,
    /// Events skipped in lenient mode because they were illegal in the
    /// state they arrived in.
    pub rejected_events: u64,
}

fn mean(sum: Cycles, n: u64) -> Option<f64> {
    (n > 0).then(|| sum as f64 / n as f64)
}

impl ScenarioMetrics {
    /// Mean cost of a scheduling decision that switched threads.
    pub fn switch_mean(&self) -> Option<f64> {
        mean(self.switch_cycles, self.switches)
    }

    pub fn preempt_mean(&self) -> Option<f64> {
        mean(self.preempt_cycles, self.preemptions)
    }

    pub fn irq_mean(&self) -> Option<f64> {
        mean(self.irq_cycles, self.interrupts)
    }

    /// Post-to-running latency of a woken thread.
    pub fn sem_wakeup_mean(&self) -> Option<f64> {
        mean(self.sem_wakeup_cycles, self.sem_wakeups)
    }

    /// Looks a metric up by its report name.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "total_cycles" => Some(self.total_cycles as f64),
            "elapsed_cycles" => Some(self.elapsed_cycles as f64),
            "switch_mean" => self.switch_mean(),
            "preempt_mean" => self.preempt_mean(),
            "irq_mean" => self.irq_mean(),
            "sem_wakeup_mean" => self.sem_wakeup_mean(),
            "timer_management_cycles" => Some(self.timer_management_cycles as f64),
            "timer_fires" => Some(self.timer_fires as f64),
            "ticks" => Some(self.ticks as f64),
            "hypercalls" => Some(self.hypercalls as f64),
            "hypercall_cycles" => Some(self.hypercall_cycles as f64),
            "ivc_messages" => Some(self.ivc_messages as f64),
            "ivc_cycles" => Some(self.ivc_cycles as f64),
            "switches" => Some(self.switches as f64),
            "priority_violations" => Some(self.priority_violations as f64),
            "rejected_events" => Some(self.rejected_events as f64),
            _ => None,
        }
    }

    pub const NAMES: &'static [&'static str] = &[
        "total_cycles",
        "elapsed_cycles",
        "switch_mean",
        "preempt_mean",
        "irq_mean",
        "sem_wakeup_mean",
        "timer_management_cycles",
        "timer_fires",
        "ticks",
        "hypercalls",
        "hypercall_cycles",
        "ivc_messages",
        "ivc_cycles",
        "switches",
        "priority_violations",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub profile: String,
    pub metrics: ScenarioMetrics,
}

/// Drives one scenario on one kernel. `step_until` lets a host interleave
/// several runners on a shared timeline.
#[derive(Debug, Clone)]
pub struct ScenarioRunner {
    name: String,
    kernel: TenonKernel,
    events: Vec<(Cycles, ScenarioEvent)>,
    next: usize,
    end_cycle: Cycles,
    metrics: ScenarioMetrics,
    next_handler: u32,
    lenient: bool,
}

impl ScenarioRunner {
    /// `default_profile` applies when the scenario names none.
    pub fn new(scenario: &Scenario, default_profile: &CostProfile) -> Result<Self, RtError> {
        let profile = match &scenario.profile {
            Some(name) if name != &default_profile.name => CostProfile::bundled(name)?,
            _ => default_profile.clone(),
        };
        Self::with_profile(scenario, profile)
    }

    pub fn with_profile(scenario: &Scenario, profile: CostProfile) -> Result<Self, RtError> {
        let mut kernel = TenonKernel::new(profile, scenario.timer_mode, scenario.tick_period)?;
        for s in &scenario.semaphores {
            kernel.add_semaphore(SemId(s.id), s.count);
        }
        for i in &scenario.isrs {
            kernel.register_isr(IsrId(i.id), i.isr.clone());
        }
        for t in &scenario.threads {
            kernel.spawn(Thread::new(t.tid, t.priority).with_ectx(t.ectx).in_process(t.process))?;
        }
        let events = scenario.parse_events()?;
        let last = events.last().map_or(0, |(t, _)| *t);
        let end_cycle = scenario.end_cycle.unwrap_or(0).max(last);
        let next_handler = 1 + events
            .iter()
            .filter_map(|(_, e)| match e {
                ScenarioEvent::ArmTimer { handler, .. } => *handler,
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let mut runner = Self {
            name: scenario.name.clone(),
            kernel,
            events,
            next: 0,
            end_cycle,
            metrics: ScenarioMetrics::default(),
            next_handler,
            lenient: scenario.lenient,
        };
        if !scenario.threads.is_empty() {
            runner.schedule(false)?;
        }
        Ok(runner)
    }

    /// Skip (and count) events that are illegal in the current state, such
    /// as unblocking a thread that is not blocked, instead of failing.
    pub fn lenient(mut self, on: bool) -> Self {
        self.lenient = on;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kernel(&self) -> &TenonKernel {
        &self.kernel
    }

    pub fn end_cycle(&self) -> Cycles {
        self.end_cycle
    }

    pub fn finished(&self) -> bool {
        self.next >= self.events.len() && self.kernel.clock.now() >= self.end_cycle
    }

    /// Processes every event scheduled before `t` and moves the clock to `t`.
    pub fn step_until(&mut self, t: Cycles, port: &mut dyn ServicePort) -> Result<(), RtError> {
        while self.next < self.events.len() && self.events[self.next].0 < t {
            let (at, ev) = self.events[self.next].clone();
            self.next += 1;
            self.kernel.advance_to(at)?;
            match self.apply(ev, port) {
                Err(
                    RtError::BadThreadState { .. }
                    | RtError::NothingRunning
                    | RtError::UnknownThread(_)
                    | RtError::DeadlineInPast { .. },
                ) if self.lenient => {
                    self.metrics.rejected_events += 1;
                    self.schedule(false)?;
                }
                r => r?,
            }
        }
        self.kernel.advance_to(t)?;
        Ok(())
    }

    /// Runs to completion.
    pub fn run(mut self, port: &mut dyn ServicePort) -> Result<ScenarioOutcome, RtError> {
        self.step_until(self.end_cycle + 1, port)?;
        Ok(self.finish())
    }

    pub fn finish(mut self) -> ScenarioOutcome {
        self.collect();
        ScenarioOutcome {
            name: self.name,
            profile: self.kernel.profile().name.clone(),
            metrics: self.metrics,
        }
    }

    pub fn metrics(&mut self) -> &ScenarioMetrics {
        self.collect();
        &self.metrics
    }

    fn collect(&mut self) {
        let k = &self.kernel;
        let m = &mut self.metrics;
        let idle: Cycles = k
            .clock
            .events()
            .iter()
            .filter(|e| matches!(e.kind, tenonos_core::EventKind::Idle))
            .map(|e| e.cost)
            .sum();
        m.elapsed_cycles = k.clock.elapsed();
        m.total_cycles = m.elapsed_cycles - idle;
        m.scheduling_points = k.decisions().len() as u64;
        m.switches = 0;
        m.switch_cycles = 0;
        m.preemptions = 0;
        m.preempt_cycles = 0;
        for d in k.decisions().iter().filter(|d| d.switched) {
            m.switches += 1;
            m.switch_cycles += d.cycles;
            if d.branch == SchedBranch::Preempt {
                m.preemptions += 1;
                m.preempt_cycles += d.cycles;
            }
        }
        m.timer_fires = k.timer_report().fire_count() as u64;
        m.ticks = k.timer_report().tick_count;
        m.timer_management_cycles = k.timer_report().management_cycles + k.arm_cycles();
    }

    fn schedule(&mut self, yield_requested: bool) -> Result<Cycles, RtError> {
        let d = self.kernel.schedule(yield_requested)?;
        self.check_safety();
        Ok(d.map_or(0, |d| d.cycles))
    }

    fn check_safety(&mut self) {
        if self.kernel.sched.priority_violation().is_some() {
            self.metrics.priority_violations += 1;
        }
    }

    fn apply(&mut self, ev: ScenarioEvent, port: &mut dyn ServicePort) -> Result<(), RtError> {
        let k = &mut self.kernel;
        match ev {
            ScenarioEvent::Spawn(t) => {
                k.spawn(Thread::new(t.tid, t.priority).with_ectx(t.ectx).in_process(t.process))?;
            }
            ScenarioEvent::Block(tid) => match tid {
                Some(t) => k.sched.block(ThreadId(t))?,
                None => {
                    k.sched.block_current()?;
                }
            },
            ScenarioEvent::Unblock(t) => k.sched.unblock(ThreadId(t))?,
            ScenarioEvent::Terminate(tid) => {
                let t = match tid {
                    Some(t) => ThreadId(t),
                    None => k.sched.current().ok_or(RtError::NothingRunning)?,
                };
                k.sched.terminate(t)?;
            }
            ScenarioEvent::Yield => {
                self.schedule(true)?;
                return Ok(());
            }
            ScenarioEvent::Resched => k.sched.request_resched(),
            ScenarioEvent::Lock => k.sched.lock(),
            ScenarioEvent::Unlock => k.sched.unlock(),
            ScenarioEvent::Preemption(on) => k.sched.set_preemption(on),
            ScenarioEvent::SemWait(id) => {
                if let Some(SemWait::Blocked(_)) = k.sem_wait_or_idle(SemId(id))? {
                    self.check_safety();
                }
                return Ok(());
            }
            ScenarioEvent::SemPost(id) => {
                let before = k.clock.now();
                let woken = k.sem_post(SemId(id))?;
                let after_post = k.clock.now();
                let sched = self.schedule(false)?;
                if woken.is_some() {
                    self.metrics.sem_wakeups += 1;
                    self.metrics.sem_wakeup_cycles += after_post - before + sched;
                }
                return Ok(());
            }
            ScenarioEvent::Irq(id) => {
                let out = k.interrupt(IsrId(id))?;
                self.metrics.interrupts += 1;
                self.metrics.irq_cycles += out.cycles;
            }
            ScenarioEvent::ArmTimer {
                deadline,
                delay,
                handler,
                period,
                action,
            } => {
                let handler = handler.unwrap_or_else(|| {
                    self.next_handler += 1;
                    self.next_handler - 1
                });
                let deadline = deadline.unwrap_or_else(|| k.clock.now() + delay.unwrap_or(0));
                if action != Action::None {
                    k.bind_handler(HandlerId(handler), action);
                }
                k.arm_timer(deadline, HandlerId(handler), period)?;
            }
            ScenarioEvent::Hypercall { id, args } => {
                let before = k.clock.now();
                { let (clock, profile) = k.split(); port.hypercall(id, &args, clock, profile) }?;
                self.metrics.hypercalls += 1;
                self.metrics.hypercall_cycles += self.kernel.clock.now() - before;
            }
            ScenarioEvent::IvcSend { channel, bytes } => {
                let before = k.clock.now();
                let payload = vec![self.metrics.ivc_messages as u8; bytes];
                if { let (clock, profile) = k.split(); port.ivc_send(channel, &payload, clock, profile) }? {
                    self.metrics.ivc_messages += 1;
                } else {
                    self.metrics.ivc_full += 1;
                }
                self.metrics.ivc_cycles += self.kernel.clock.now() - before;
            }
            ScenarioEvent::IvcRecv(channel) => {
                let before = k.clock.now();
                { let (clock, profile) = k.split(); port.ivc_recv(channel, clock, profile) }?;
                self.metrics.ivc_cycles += self.kernel.clock.now() - before;
            }
        }
        self.schedule(false)?;
        Ok(())
    }
}

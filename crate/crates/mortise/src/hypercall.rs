//! Group-registered hypercall routing.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::instance::InstanceId;
use crate::MortiseError;

/// A custom hypercall body: `(caller, args) -> result`. The host console
/// calls with `None`.
pub type HypercallFn = Arc<dyn Fn(Option<InstanceId>, &[u64]) -> Result<u64, String> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleCall {
    Create,
    Pause,
    Resume,
    Terminate,
    YieldCpu,
}

impl LifecycleCall {
    pub const IDS: [(u32, LifecycleCall); 5] = [
        (0x01, LifecycleCall::Create),
        (0x02, LifecycleCall::Pause),
        (0x03, LifecycleCall::Resume),
        (0x04, LifecycleCall::Terminate),
        (0x05, LifecycleCall::YieldCpu),
    ];
}

#[derive(Clone)]
pub enum Handler {
    /// Handled by the hypervisor itself.
    Lifecycle(LifecycleCall),
    Func { name: String, f: HypercallFn },
}

impl Handler {
    pub fn func(
        name: impl Into<String>,
        f: impl Fn(Option<InstanceId>, &[u64]) -> Result<u64, String> + Send + Sync + 'static,
    ) -> Self {
        Handler::Func {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Handler::Lifecycle(c) => format!("{c:?}").to_lowercase(),
            Handler::Func { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for Handler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Handler({})", self.name())
    }
}

#[derive(Debug, Clone, Default)]
pub struct HypercallTable {
    groups: BTreeMap<String, BTreeMap<u32, Handler>>,
    /// function id -> owning group
    index: BTreeMap<u32, String>,
}

impl HypercallTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a whole group atomically: on a collision nothing changes.
    pub fn register_group(
        &mut self,
        name: &str,
        entries: impl IntoIterator<Item = (u32, Handler)>,
    ) -> Result<(), MortiseError> {
        if self.groups.contains_key(name) {
            return Err(MortiseError::DuplicateGroupName(name.to_string()));
        }
        let mut group = BTreeMap::new();
        for (id, h) in entries {
            if let Some(owner) = self.index.get(&id) {
                return Err(MortiseError::DuplicateFunctionId {
                    id,
                    group: owner.clone(),
                });
            }
            if group.insert(id, h).is_some() {
                return Err(MortiseError::DuplicateFunctionId {
                    id,
                    group: name.to_string(),
                });
            }
        }
        for id in group.keys() {
            self.index.insert(*id, name.to_string());
        }
        self.groups.insert(name.to_string(), group);
        Ok(())
    }

    pub fn lookup(&self, id: u32) -> Option<&Handler> {
        let group = self.index.get(&id)?;
        self.groups.get(group).and_then(|g| g.get(&id))
    }

    pub fn group_of(&self, id: u32) -> Option<&str> {
        self.index.get(&id).map(String::as_str)
    }

    pub fn routable_ids(&self) -> Vec<u32> {
        self.index.keys().copied().collect()
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.groups.keys().map(String::as_str).collect()
    }

    pub fn has_group(&self, name: &str) -> bool {
        self.groups.contains_key(name)
    }

    /// The flat index agrees with the union of the groups.
    pub fn is_consistent(&self) -> bool {
        let union: BTreeMap<u32, &str> = self
            .groups
            .iter()
            .flat_map(|(g, m)| m.keys().map(move |id| (*id, g.as_str())))
            .collect();
        let total: usize = self.groups.values().map(BTreeMap::len).sum();
        total == union.len()
            && union.len() == self.index.len()
            && union.iter().all(|(id, g)| self.index.get(id).map(String::as_str) == Some(*g))
    }
}

//! Capability-tagged micro-libraries and image composition.
//!
//! A [`MicroLibrary`] advertises the capabilities it provides and the ones it
//! requires. Composing an image from a selection orders the libraries so that
//! every provider precedes its consumers and reports the requirements no
//! selected library satisfies.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("library `{0}` is already registered")]
    DuplicateLibrary(String),
    #[error("library `{0}` is not in the pool")]
    UnknownLibrary(String),
    #[error("library `{id}` both provides and requires {tags:?} without the self-provision flag")]
    SelfProvision { id: String, tags: Vec<String> },
    #[error("capability requirements form a cycle among {0:?}")]
    CapabilityCycle(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroLibrary {
    pub id: String,
    #[serde(default)]
    pub capabilities: BTreeSet<String>,
    #[serde(default)]
    pub requires: BTreeSet<String>,
    #[serde(default = "default_version")]
    pub version: String,
    /// Allows a library to list a capability it also provides.
    #[serde(default)]
    pub self_provision: bool,
}

fn default_version() -> String {
    "0.1.0".to_string()
}

impl MicroLibrary {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            capabilities: BTreeSet::new(),
            requires: BTreeSet::new(),
            version: default_version(),
            self_provision: false,
        }
    }

    pub fn provides(mut self, cap: impl Into<String>) -> Self {
        self.capabilities.insert(cap.into());
        self
    }

    pub fn requires(mut self, cap: impl Into<String>) -> Self {
        self.requires.insert(cap.into());
        self
    }

    pub fn self_provisioning(mut self) -> Self {
        self.self_provision = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompositionReport {
    /// Libraries in dependency-respecting order.
    pub order: Vec<String>,
    pub unresolved: BTreeSet<String>,
    pub valid: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryPool {
    libraries: BTreeMap<String, MicroLibrary>,
}

impl LibraryPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// The micro-libraries shared by Tenon and Mortise builds. The capability
    /// vocabulary is local to this crate.
    pub fn standard() -> Self {
        let mut pool = Self::new();
        let libs = [
            MicroLibrary::new("arch/arm64")
                .provides("cpu.context")
                .provides("cpu.exceptions"),
            MicroLibrary::new("plat/rk3568")
                .provides("plat.irqchip")
                .provides("plat.clock")
                .requires("cpu.exceptions"),
            MicroLibrary::new("drivers/serial")
                .provides("io.console")
                .requires("plat.irqchip"),
            MicroLibrary::new("lib/memory")
                .provides("mem.alloc")
                .provides("mem.pages"),
            MicroLibrary::new("lib/tntimer")
                .provides("time.timer")
                .requires("plat.clock")
                .requires("plat.irqchip"),
            MicroLibrary::new("lib/tnsched")
                .provides("sched.rt")
                .requires("cpu.context")
                .requires("time.timer")
                .requires("mem.alloc"),
            MicroLibrary::new("lib/tnsem")
                .provides("sync.sem")
                .requires("sched.rt"),
            MicroLibrary::new("lib/tnprocess")
                .provides("proc.multi")
                .requires("sched.rt")
                .requires("mem.pages"),
            MicroLibrary::new("lib/hypercall")
                .provides("hv.hypercall")
                .requires("cpu.exceptions"),
            MicroLibrary::new("lib/lifecycle")
                .provides("hv.lifecycle")
                .requires("hv.hypercall")
                .requires("mem.pages"),
            MicroLibrary::new("lib/pagecolor")
                .provides("mem.coloring")
                .requires("mem.pages"),
            MicroLibrary::new("lib/ivc")
                .provides("hv.ivc")
                .requires("hv.hypercall")
                .requires("mem.pages"),
        ];
        for lib in libs {
            pool.register(lib).expect("standard pool ids are unique");
        }
        pool
    }

    pub fn register(&mut self, lib: MicroLibrary) -> Result<(), PoolError> {
        if self.libraries.contains_key(&lib.id) {
            return Err(PoolError::DuplicateLibrary(lib.id));
        }
        if !lib.self_provision {
            let overlap: Vec<String> = lib
                .capabilities
                .intersection(&lib.requires)
                .cloned()
                .collect();
            if !overlap.is_empty() {
                return Err(PoolError::SelfProvision {
                    id: lib.id,
                    tags: overlap,
                });
            }
        }
        self.libraries.insert(lib.id.clone(), lib);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&MicroLibrary> {
        self.libraries.get(id)
    }

    pub fn len(&self) -> usize {
        self.libraries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.libraries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.libraries.keys().map(String::as_str)
    }

    /// Orders `selection` so providers precede consumers.
    ///
    /// Ties are broken by library id. A requirement met by the library itself
    /// (self-provision) adds no ordering edge.
    pub fn compose_image<'a, I>(&self, selection: I) -> Result<CompositionReport, PoolError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut selected: BTreeMap<&str, &MicroLibrary> = BTreeMap::new();
        for id in selection {
            let lib = self
                .libraries
                .get(id)
                .ok_or_else(|| PoolError::UnknownLibrary(id.to_string()))?;
            selected.insert(lib.id.as_str(), lib);
        }

        let mut unresolved = BTreeSet::new();
        let mut successors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut indegree: BTreeMap<&str, usize> = selected.keys().map(|id| (*id, 0)).collect();

        for (&consumer, lib) in &selected {
            for cap in &lib.requires {
                if lib.self_provision && lib.capabilities.contains(cap) {
                    continue;
                }
                let providers: Vec<&str> = selected
                    .iter()
                    .filter(|(id, p)| **id != consumer && p.capabilities.contains(cap))
                    .map(|(id, _)| *id)
                    .collect();
                if providers.is_empty() {
                    unresolved.insert(cap.clone());
                }
                for provider in providers {
                    if successors.entry(provider).or_default().insert(consumer) {
                        *indegree.get_mut(consumer).unwrap() += 1;
                    }
                }
            }
        }

        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut order = Vec::with_capacity(selected.len());
        while let Some(id) = ready.pop_first() {
            order.push(id.to_string());
            if let Some(next) = successors.get(id) {
                for succ in next {
                    let d = indegree.get_mut(succ).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(succ);
                    }
                }
            }
        }

        if order.len() < selected.len() {
            let stuck = indegree
                .iter()
                .filter(|(_, d)| **d > 0)
                .map(|(id, _)| id.to_string())
                .collect();
            return Err(PoolError::CapabilityCycle(stuck));
        }

        let valid = unresolved.is_empty();
        Ok(CompositionReport {
            order,
            unresolved,
            valid,
        })
    }
}

//! Memory regions with per-instance permission classes.
//!
//! Address translation is not modeled; a region is a named extent plus the
//! access class each instance holds on it. No entry means no access.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::InstanceId;
use crate::MortiseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Perm {
    #[serde(alias = "ro")]
    Ro,
    #[serde(alias = "rw")]
    Rw,
    #[serde(alias = "xo")]
    Xo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Read,
    Write,
    Execute,
}

impl Access {
    pub const ALL: [Access; 3] = [Access::Read, Access::Write, Access::Execute];

    pub fn as_str(self) -> &'static str {
        match self {
            Access::Read => "read",
            Access::Write => "write",
            Access::Execute => "execute",
        }
    }
}

impl Perm {
    pub fn grants(self, access: Access) -> bool {
        matches!(
            (self, access),
            (Perm::Ro, Access::Read)
                | (Perm::Rw, Access::Read)
                | (Perm::Rw, Access::Write)
                | (Perm::Xo, Access::Execute)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DenyReason {
    NotMapped,
    PermissionClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AccessDecision {
    Allowed,
    Denied(DenyReason),
}

impl AccessDecision {
    pub fn allowed(self) -> bool {
        self == AccessDecision::Allowed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryRegion {
    pub rid: RegionId,
    pub name: String,
    pub size: u64,
    pub permissions: BTreeMap<InstanceId, Perm>,
    pub shared_with: BTreeSet<InstanceId>,
    pub hypervisor_owned: bool,
}

impl MemoryRegion {
    pub fn new(rid: RegionId, name: impl Into<String>, size: u64) -> Self {
        Self {
            rid,
            name: name.into(),
            size,
            permissions: BTreeMap::new(),
            shared_with: BTreeSet::new(),
            hypervisor_owned: false,
        }
    }

    pub fn hypervisor(rid: RegionId, name: impl Into<String>, size: u64) -> Self {
        Self {
            hypervisor_owned: true,
            ..Self::new(rid, name, size)
        }
    }

    /// Grants `perm` to `iid`. Hypervisor pages never become writable to a
    /// guest.
    pub fn grant(&mut self, iid: InstanceId, perm: Perm) -> Result<(), MortiseError> {
        if self.hypervisor_owned && perm == Perm::Rw {
            return Err(MortiseError::HypervisorRegionWritable(self.rid));
        }
        self.permissions.insert(iid, perm);
        if self.permissions.len() > 1 {
            self.shared_with = self.permissions.keys().copied().collect();
        }
        Ok(())
    }

    pub fn revoke(&mut self, iid: InstanceId) {
        self.permissions.remove(&iid);
        self.shared_with.remove(&iid);
        if self.permissions.len() <= 1 {
            self.shared_with.clear();
        }
    }

    pub fn check_access(&self, iid: InstanceId, access: Access) -> AccessDecision {
        match self.permissions.get(&iid) {
            None => AccessDecision::Denied(DenyReason::NotMapped),
            Some(p) if p.grants(access) => AccessDecision::Allowed,
            Some(_) => AccessDecision::Denied(DenyReason::PermissionClass),
        }
    }
}

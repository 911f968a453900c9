//! Last-level-cache colors handed out as disjoint sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::instance::InstanceId;
use crate::MortiseError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColorPartition {
    total_colors: u32,
    free: BTreeSet<u32>,
    assignments: BTreeMap<InstanceId, BTreeSet<u32>>,
}

impl ColorPartition {
    pub fn new(total_colors: u32) -> Self {
        Self {
            total_colors,
            free: (0..total_colors).collect(),
            assignments: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> u32 {
        self.total_colors
    }

    pub fn free_count(&self) -> u32 {
        self.free.len() as u32
    }

    pub fn assignments(&self) -> &BTreeMap<InstanceId, BTreeSet<u32>> {
        &self.assignments
    }

    pub fn colors_of(&self, iid: InstanceId) -> Option<&BTreeSet<u32>> {
        self.assignments.get(&iid)
    }

    /// Takes the `requested` lowest free colors. Repeated calls for the same
    /// instance add to its set.
    pub fn assign(&mut self, iid: InstanceId, requested: u32) -> Result<BTreeSet<u32>, MortiseError> {
        if requested > self.free_count() {
            return Err(MortiseError::InsufficientColors {
                requested,
                free: self.free_count(),
            });
        }
        let taken: BTreeSet<u32> = self.free.iter().take(requested as usize).copied().collect();
        for c in &taken {
            self.free.remove(c);
        }
        self.assignments.entry(iid).or_default().extend(taken.iter().copied());
        Ok(taken)
    }

    pub fn release(&mut self, iid: InstanceId) {
        if let Some(set) = self.assignments.remove(&iid) {
            self.free.extend(set);
        }
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        for set in self.assignments.values() {
            for c in set {
                if !seen.insert(*c) || self.free.contains(c) || *c >= self.total_colors {
                    return false;
                }
            }
        }
        seen.len() + self.free.len() == self.total_colors as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascending_free_list() {
        let mut p = ColorPartition::new(16);
        assert_eq!(p.assign(InstanceId(1), 4).unwrap(), (0..4).collect());
        assert_eq!(p.assign(InstanceId(2), 4).unwrap(), (4..8).collect());
    }

    #[test]
    fn zero_request_still_enables() {
        let mut p = ColorPartition::new(16);
        assert!(p.assign(InstanceId(1), 0).unwrap().is_empty());
        assert!(p.colors_of(InstanceId(1)).is_some());
    }

    #[test]
    fn over_request() {
        let mut p = ColorPartition::new(16);
        assert_eq!(
            p.assign(InstanceId(1), 17),
            Err(MortiseError::InsufficientColors { requested: 17, free: 16 })
        );
    }

    #[test]
    fn release_returns_colors() {
        let mut p = ColorPartition::new(8);
        p.assign(InstanceId(1), 3).unwrap();
        p.assign(InstanceId(2), 2).unwrap();
        p.release(InstanceId(1));
        assert_eq!(p.assign(InstanceId(3), 4).unwrap(), [0, 1, 2, 5].into());
        assert!(p.is_disjoint());
    }
}

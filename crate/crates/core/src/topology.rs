//! Sites, storage elements, distances and link classes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distance used to isolate a storage element from every peer.
pub const ISOLATING_DISTANCE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteId(pub u32);

/// Storage element handle. Handles are assigned in lexicographic order of
/// element names, so comparing handles compares names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub name: String,
    /// Concurrent single-core job slots.
    pub slots: u32,
    pub is_cloud: bool,
    /// Site can serve tape recalls.
    pub tape: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeKind {
    Datadisk,
    Scratchdisk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consolidation {
    pub sink: SeId,
    /// Occupancy fraction above which cached data is moved to the sink.
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageElement {
    pub name: String,
    pub site: SiteId,
    pub capacity_tb: f64,
    pub greedy_deletion: bool,
    pub kind: SeKind,
    pub high_watermark: f64,
    pub low_watermark: f64,
    pub consolidation: Option<Consolidation>,
}

/// Abstract source-selection distances between storage elements. Lookups are
/// total: unset pairs return `default_distance`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    default_distance: f64,
    entries: Vec<Option<f64>>,
}

impl DistanceMatrix {
    pub fn new(n: usize, default_distance: f64) -> Result<Self> {
        if !(default_distance >= 0.0) {
            return Err(Error::config("default distance must be >= 0"));
        }
        Ok(DistanceMatrix {
            n,
            default_distance,
            entries: vec![None; n * n],
        })
    }

    pub fn default_distance(&self) -> f64 {
        self.default_distance
    }

    pub fn get(&self, src: SeId, dst: SeId) -> f64 {
        self.entries
            .get(src.0 as usize * self.n + dst.0 as usize)
            .copied()
            .flatten()
            .unwrap_or(self.default_distance)
    }

    pub fn set(&mut self, src: SeId, dst: SeId, distance: f64) -> Result<()> {
        if !(distance >= 0.0) {
            return Err(Error::config(format!(
                "distance must be >= 0, got {distance}"
            )));
        }
        let idx = src.0 as usize * self.n + dst.0 as usize;
        match self.entries.get_mut(idx) {
            Some(slot) => {
                *slot = Some(distance);
                Ok(())
            }
            None => Err(Error::config(format!(
                "storage element {:?} out of range",
                src.max(dst)
            ))),
        }
    }

    /// Sets the distance from `src` to every other element.
    pub fn set_from(&mut self, src: SeId, distance: f64) -> Result<()> {
        for dst in 0..self.n as u32 {
            if dst != src.0 {
                self.set(src, SeId(dst), distance)?;
            }
        }
        Ok(())
    }
}

/// Candidate with the smallest distance to `destination`; ties go to the
/// lexicographically smallest element name.
pub fn select_source(
    candidates: &[SeId],
    destination: SeId,
    distances: &DistanceMatrix,
) -> Result<SeId, SelectError> {
    candidates
        .iter()
        .copied()
        .min_by(|a, b| {
            distances
                .get(*a, destination)
                .total_cmp(&distances.get(*b, destination))
                .then(a.cmp(b))
        })
        .ok_or(SelectError::NoSource)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectError {
    NoSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkClass {
    Internet,
    Interconnect,
}

impl LinkClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkClass::Internet => "INTERNET",
            LinkClass::Interconnect => "INTERCONNECT",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Links {
    interconnect: BTreeSet<(SiteId, SiteId)>,
    pub provisioned_circuits: u32,
}

impl Links {
    pub fn set_interconnect(&mut self, src: SiteId, dst: SiteId) {
        self.interconnect.insert((src, dst));
    }

    pub fn has_interconnect(&self) -> bool {
        !self.interconnect.is_empty()
    }

    pub fn route_class(&self, src: SiteId, dst: SiteId) -> LinkClass {
        if self.interconnect.contains(&(src, dst)) {
            LinkClass::Interconnect
        } else {
            LinkClass::Internet
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub sites: Vec<Site>,
    pub ses: Vec<StorageElement>,
    pub distances: DistanceMatrix,
    pub links: Links,
}

impl Topology {
    pub fn site(&self, id: SiteId) -> &Site {
        &self.sites[id.0 as usize]
    }

    pub fn se(&self, id: SeId) -> &StorageElement {
        &self.ses[id.0 as usize]
    }

    pub fn se_mut(&mut self, id: SeId) -> &mut StorageElement {
        &mut self.ses[id.0 as usize]
    }

    pub fn site_of(&self, se: SeId) -> SiteId {
        self.se(se).site
    }

    pub fn se_is_cloud(&self, se: SeId) -> bool {
        self.site(self.site_of(se)).is_cloud
    }

    pub fn se_ids(&self) -> impl Iterator<Item = SeId> + '_ {
        (0..self.ses.len() as u32).map(SeId)
    }

    pub fn site_by_name(&self, name: &str) -> Option<SiteId> {
        self.sites
            .iter()
            .position(|s| s.name == name)
            .map(|i| SiteId(i as u32))
    }

    pub fn se_by_name(&self, name: &str) -> Option<SeId> {
        self.ses
            .iter()
            .position(|s| s.name == name)
            .map(|i| SeId(i as u32))
    }

    /// First DATADISK at a site.
    pub fn datadisk_of(&self, site: SiteId) -> Option<SeId> {
        self.se_ids()
            .find(|&id| self.se(id).site == site && self.se(id).kind == SeKind::Datadisk)
    }

    pub fn scratchdisk_of(&self, site: SiteId) -> Option<SeId> {
        self.se_ids()
            .find(|&id| self.se(id).site == site && self.se(id).kind == SeKind::Scratchdisk)
    }

    pub fn route_class(&self, src: SiteId, dst: SiteId) -> LinkClass {
        self.links.route_class(src, dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(ds: &[f64]) -> DistanceMatrix {
        // element ds.len() is the destination
        let mut m = DistanceMatrix::new(ds.len() + 1, 1.0).unwrap();
        for (i, &d) in ds.iter().enumerate() {
            m.set(SeId(i as u32), SeId(ds.len() as u32), d).unwrap();
        }
        m
    }

    #[test]
    fn select_source_examples() {
        let m = matrix(&[1.0, 5.0]);
        assert_eq!(select_source(&[SeId(0), SeId(1)], SeId(2), &m), Ok(SeId(0)));

        let m = matrix(&[ISOLATING_DISTANCE, 3.0]);
        assert_eq!(select_source(&[SeId(0), SeId(1)], SeId(2), &m), Ok(SeId(1)));

        let m = matrix(&[3.0, 3.0]);
        assert_eq!(select_source(&[SeId(1), SeId(0)], SeId(2), &m), Ok(SeId(0)));

        assert_eq!(select_source(&[], SeId(2), &m), Err(SelectError::NoSource));
    }

    #[test]
    fn missing_pairs_use_default() {
        let mut m = DistanceMatrix::new(3, 7.0).unwrap();
        assert_eq!(m.get(SeId(0), SeId(2)), 7.0);
        m.set_from(SeId(0), ISOLATING_DISTANCE).unwrap();
        assert_eq!(m.get(SeId(0), SeId(2)), ISOLATING_DISTANCE);
        assert_eq!(m.get(SeId(0), SeId(0)), 7.0);
        assert!(m.set(SeId(0), SeId(1), -1.0).is_err());
        assert!(DistanceMatrix::new(1, -1.0).is_err());
    }

    #[test]
    fn route_class_defaults_to_internet() {
        let mut links = Links::default();
        assert_eq!(links.route_class(SiteId(0), SiteId(1)), LinkClass::Internet);
        links.set_interconnect(SiteId(0), SiteId(1));
        assert_eq!(
            links.route_class(SiteId(0), SiteId(1)),
            LinkClass::Interconnect
        );
        assert_eq!(links.route_class(SiteId(1), SiteId(0)), LinkClass::Internet);
        assert_eq!(links.route_class(SiteId(0), SiteId(0)), LinkClass::Internet);
    }

    proptest! {
        #[test]
        fn selection_is_permutation_invariant(ds in prop::collection::vec(0.0f64..10.0, 1..8), seed in any::<u64>()) {
            let m = matrix(&ds);
            let dst = SeId(ds.len() as u32);
            let mut cands: Vec<SeId> = (0..ds.len() as u32).map(SeId).collect();
            let a = select_source(&cands, dst, &m).unwrap();
            // deterministic shuffle
            let n = cands.len();
            for i in 0..n {
                let j = ((seed >> (i % 60)) as usize + i * 7) % n;
                cands.swap(i, j);
            }
            prop_assert_eq!(a, select_source(&cands, dst, &m).unwrap());
        }

        #[test]
        fn raising_distance_never_newly_selects(ds in prop::collection::vec(0.0f64..10.0, 2..8), k in 0usize..8, bump in 0.0f64..100.0) {
            let k = k % ds.len();
            let dst = SeId(ds.len() as u32);
            let cands: Vec<SeId> = (0..ds.len() as u32).map(SeId).collect();
            let before = select_source(&cands, dst, &matrix(&ds)).unwrap();
            let mut raised = ds.clone();
            raised[k] += bump;
            let after = select_source(&cands, dst, &matrix(&raised)).unwrap();
            if before != SeId(k as u32) {
                prop_assert_ne!(after, SeId(k as u32));
            }
        }
    }
}

//! Replica lifecycle.
//!
//! A [`DataState`] owns every dataset, replica and replication rule in a run.
//! Each replica is PERSISTENT, TEMPORARY or CACHED depending on the rules
//! pinning it; only CACHED replicas may be deleted or moved away. Volume
//! bookkeeping per storage element is kept in four counters so that
//! `occupancy == written + transferred_in - deleted - moved_out` holds after
//! every operation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::time::{SimTime, DAY};
use crate::topology::{SeId, SiteId, StorageElement, Topology};

/// Lifetime given to rules created when production input is replicated to a
/// site.
pub const PRODUCTION_INPUT_LIFETIME: SimTime = 14 * DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Format {
    Raw,
    Evnt,
    Hits,
    Rdo,
    Aod,
    Daod,
    Desd,
}

impl Format {
    pub const ALL: [Format; 7] = [
        Format::Raw,
        Format::Evnt,
        Format::Hits,
        Format::Rdo,
        Format::Aod,
        Format::Daod,
        Format::Desd,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Format::Raw => "RAW",
            Format::Evnt => "EVNT",
            Format::Hits => "HITS",
            Format::Rdo => "RDO",
            Format::Aod => "AOD",
            Format::Daod => "DAOD",
            Format::Desd => "DESD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReplicaClass {
    Persistent,
    Temporary,
    Cached,
}

impl ReplicaClass {
    pub const ALL: [ReplicaClass; 3] = [
        ReplicaClass::Persistent,
        ReplicaClass::Temporary,
        ReplicaClass::Cached,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReplicaClass::Persistent => "PERSISTENT",
            ReplicaClass::Temporary => "TEMPORARY",
            ReplicaClass::Cached => "CACHED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DatasetId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: DatasetId,
    pub format: Format,
    pub size_tb: f64,
    pub created_at: SimTime,
    /// Open datasets still receive job output and are not transferable.
    pub sealed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: RuleId,
    pub dataset: DatasetId,
    pub se: SeId,
    pub lifetime: Option<SimTime>,
    pub created_at: SimTime,
}

impl Rule {
    pub fn expiry(&self) -> Option<SimTime> {
        self.lifetime.map(|l| self.created_at + l)
    }

    /// Expiry is inclusive: a rule expiring at `now` is no longer active.
    pub fn is_active(&self, now: SimTime) -> bool {
        self.expiry().is_none_or(|e| e > now)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    pub dataset: DatasetId,
    pub se: SeId,
    pub created_at: SimTime,
    pub last_access: SimTime,
}

/// Classification of one replica against a rule set, as a pure function of
/// the rules and the clock.
pub fn classify<'a>(
    replica: &Replica,
    rules: impl IntoIterator<Item = &'a Rule>,
    now: SimTime,
) -> ReplicaClass {
    let mut temporary = false;
    for r in rules {
        if r.dataset != replica.dataset || r.se != replica.se || !r.is_active(now) {
            continue;
        }
        if r.lifetime.is_none() {
            return ReplicaClass::Persistent;
        }
        temporary = true;
    }
    if temporary {
        ReplicaClass::Temporary
    } else {
        ReplicaClass::Cached
    }
}

/// Pure expiry filter over a rule list, used to cross-check
/// [`DataState::expire_rules`].
pub fn expired_subset(rules: &[Rule], now: SimTime) -> Vec<RuleId> {
    rules
        .iter()
        .filter(|r| !r.is_active(now))
        .map(|r| r.id)
        .collect()
}

/// Cumulative volume flows for one storage element, in TB.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VolumeCounters {
    pub written: f64,
    pub transferred_in: f64,
    pub deleted: f64,
    pub moved_out: f64,
}

impl VolumeCounters {
    pub fn balance(&self) -> f64 {
        self.written + self.transferred_in - self.deleted - self.moved_out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapacityExceeded {
    pub se: SeId,
}

#[derive(Debug, Clone, Default)]
struct PairState {
    persistent: u32,
    temporary: u32,
}

impl PairState {
    fn class(&self) -> ReplicaClass {
        if self.persistent > 0 {
            ReplicaClass::Persistent
        } else if self.temporary > 0 {
            ReplicaClass::Temporary
        } else {
            ReplicaClass::Cached
        }
    }
}

#[derive(Debug, Clone)]
struct SeState {
    capacity_tb: f64,
    occupancy: f64,
    counters: VolumeCounters,
    by_class: [f64; 3],
    by_format: [f64; 7],
    replicas: BTreeSet<DatasetId>,
    /// CACHED replicas ordered by (last access, dataset).
    cached: BTreeSet<(SimTime, DatasetId)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deletion {
    pub dataset: DatasetId,
    pub se: SeId,
    pub tb: f64,
    pub class: ReplicaClass,
}

#[derive(Debug, Clone)]
pub struct DataState {
    datasets: BTreeMap<DatasetId, Dataset>,
    replicas: BTreeMap<(DatasetId, SeId), Replica>,
    rules: BTreeMap<RuleId, Rule>,
    pairs: BTreeMap<(DatasetId, SeId), PairState>,
    expiries: BTreeSet<(SimTime, RuleId)>,
    ses: Vec<SeState>,
    next_dataset: u64,
    next_rule: u64,
}

const EPS_TB: f64 = 1e-9;

impl DataState {
    pub fn new(capacities: impl IntoIterator<Item = f64>) -> Self {
        DataState {
            datasets: BTreeMap::new(),
            replicas: BTreeMap::new(),
            rules: BTreeMap::new(),
            pairs: BTreeMap::new(),
            expiries: BTreeSet::new(),
            ses: capacities
                .into_iter()
                .map(|capacity_tb| SeState {
                    capacity_tb,
                    occupancy: 0.0,
                    counters: VolumeCounters::default(),
                    by_class: [0.0; 3],
                    by_format: [0.0; 7],
                    replicas: BTreeSet::new(),
                    cached: BTreeSet::new(),
                })
                .collect(),
            next_dataset: 0,
            next_rule: 0,
        }
    }

    pub fn for_topology(topology: &Topology) -> Self {
        Self::new(topology.ses.iter().map(|s| s.capacity_tb))
    }

    fn se(&self, se: SeId) -> &SeState {
        &self.ses[se.0 as usize]
    }

    fn se_mut(&mut self, se: SeId) -> &mut SeState {
        &mut self.ses[se.0 as usize]
    }

    pub fn set_capacity(&mut self, se: SeId, capacity_tb: f64) {
        self.se_mut(se).capacity_tb = capacity_tb;
    }

    pub fn capacity(&self, se: SeId) -> f64 {
        self.se(se).capacity_tb
    }

    pub fn occupancy(&self, se: SeId) -> f64 {
        self.se(se).occupancy
    }

    pub fn free(&self, se: SeId) -> f64 {
        (self.se(se).capacity_tb - self.se(se).occupancy).max(0.0)
    }

    pub fn fits(&self, se: SeId, tb: f64) -> bool {
        self.se(se).occupancy + tb <= self.se(se).capacity_tb + EPS_TB
    }

    pub fn counters(&self, se: SeId) -> VolumeCounters {
        self.se(se).counters
    }

    pub fn stored_by_class(&self, se: SeId) -> [f64; 3] {
        self.se(se).by_class
    }

    pub fn stored_by_format(&self, se: SeId) -> [f64; 7] {
        self.se(se).by_format
    }

    pub fn dataset(&self, id: DatasetId) -> Option<&Dataset> {
        self.datasets.get(&id)
    }

    pub fn datasets(&self) -> impl Iterator<Item = &Dataset> {
        self.datasets.values()
    }

    pub fn replica(&self, ds: DatasetId, se: SeId) -> Option<&Replica> {
        self.replicas.get(&(ds, se))
    }

    pub fn has_replica(&self, ds: DatasetId, se: SeId) -> bool {
        self.replicas.contains_key(&(ds, se))
    }

    pub fn holders(&self, ds: DatasetId) -> Vec<SeId> {
        self.replicas
            .range((ds, SeId(0))..=(ds, SeId(u32::MAX)))
            .map(|(&(_, se), _)| se)
            .collect()
    }

    pub fn replicas_on(&self, se: SeId) -> impl Iterator<Item = DatasetId> + '_ {
        self.se(se).replicas.iter().copied()
    }

    pub fn cached_on(&self, se: SeId) -> impl Iterator<Item = DatasetId> + '_ {
        self.se(se).cached.iter().map(|&(_, d)| d)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn class_of(&self, ds: DatasetId, se: SeId) -> Option<ReplicaClass> {
        self.replicas.contains_key(&(ds, se)).then(|| {
            self.pairs
                .get(&(ds, se))
                .map_or(ReplicaClass::Cached, PairState::class)
        })
    }

    pub fn next_expiry(&self) -> Option<SimTime> {
        self.expiries.first().map(|&(t, _)| t)
    }

    pub fn create_dataset(
        &mut self,
        format: Format,
        size_tb: f64,
        now: SimTime,
        sealed: bool,
    ) -> DatasetId {
        let id = DatasetId(self.next_dataset);
        self.next_dataset += 1;
        self.datasets.insert(
            id,
            Dataset {
                id,
                format,
                size_tb,
                created_at: now,
                sealed,
            },
        );
        id
    }

    pub fn seal(&mut self, ds: DatasetId) {
        if let Some(d) = self.datasets.get_mut(&ds) {
            d.sealed = true;
        }
    }

    fn adjust_volume(&mut self, ds: DatasetId, se: SeId, class: ReplicaClass, delta: f64) {
        let format = self.datasets[&ds].format;
        let s = self.se_mut(se);
        s.occupancy += delta;
        s.by_class[class.index()] += delta;
        s.by_format[format.index()] += delta;
    }

    fn insert_replica(
        &mut self,
        ds: DatasetId,
        se: SeId,
        now: SimTime,
    ) -> Result<f64, CapacityExceeded> {
        let size = self.datasets[&ds].size_tb;
        if self.replicas.contains_key(&(ds, se)) {
            return Ok(0.0);
        }
        if !self.fits(se, size) {
            return Err(CapacityExceeded { se });
        }
        self.replicas.insert(
            (ds, se),
            Replica {
                dataset: ds,
                se,
                created_at: now,
                last_access: now,
            },
        );
        let class = self.class_of(ds, se).expect("just inserted");
        self.adjust_volume(ds, se, class, size);
        let s = self.se_mut(se);
        s.replicas.insert(ds);
        if class == ReplicaClass::Cached {
            s.cached.insert((now, ds));
        }
        Ok(size)
    }

    /// Registers a replica produced or placed locally at `se`.
    pub fn write_replica(
        &mut self,
        ds: DatasetId,
        se: SeId,
        now: SimTime,
    ) -> Result<(), CapacityExceeded> {
        let added = self.insert_replica(ds, se, now)?;
        self.se_mut(se).counters.written += added;
        Ok(())
    }

    /// Registers a replica that arrived by transfer.
    pub fn receive_replica(
        &mut self,
        ds: DatasetId,
        se: SeId,
        now: SimTime,
    ) -> Result<(), CapacityExceeded> {
        let added = self.insert_replica(ds, se, now)?;
        self.se_mut(se).counters.transferred_in += added;
        Ok(())
    }

    /// Grows an open dataset by `tb` at the one element holding it.
    pub fn append(&mut self, ds: DatasetId, se: SeId, tb: f64) -> Result<(), CapacityExceeded> {
        if !self.fits(se, tb) {
            return Err(CapacityExceeded { se });
        }
        let class = self.class_of(ds, se).expect("append to missing replica");
        self.datasets.get_mut(&ds).expect("dataset").size_tb += tb;
        self.adjust_volume(ds, se, class, tb);
        self.se_mut(se).counters.written += tb;
        Ok(())
    }

    pub fn touch(&mut self, ds: DatasetId, se: SeId, now: SimTime) {
        let Some(r) = self.replicas.get_mut(&(ds, se)) else {
            return;
        };
        let old = r.last_access;
        r.last_access = now;
        let s = &mut self.ses[se.0 as usize];
        if s.cached.remove(&(old, ds)) {
            s.cached.insert((now, ds));
        }
    }

    fn remove_replica(&mut self, ds: DatasetId, se: SeId) -> Option<(f64, ReplicaClass)> {
        let class = self.class_of(ds, se)?;
        let r = self.replicas.remove(&(ds, se)).expect("replica");
        let size = self.datasets[&ds].size_tb;
        self.adjust_volume(ds, se, class, -size);
        let s = self.se_mut(se);
        s.replicas.remove(&ds);
        s.cached.remove(&(r.last_access, ds));
        self.forget_if_orphan(ds);
        Some((size, class))
    }

    fn forget_if_orphan(&mut self, ds: DatasetId) {
        let sealed = self.datasets.get(&ds).is_some_and(|d| d.sealed);
        let has_replica = self
            .replicas
            .range((ds, SeId(0))..=(ds, SeId(u32::MAX)))
            .next()
            .is_some();
        let has_rule = self
            .pairs
            .range((ds, SeId(0))..=(ds, SeId(u32::MAX)))
            .next()
            .is_some();
        if sealed && !has_replica && !has_rule {
            self.datasets.remove(&ds);
        }
    }

    /// Deletes a replica regardless of class. Returns the freed volume.
    pub fn delete_replica(&mut self, ds: DatasetId, se: SeId) -> Option<Deletion> {
        let (tb, class) = self.remove_replica(ds, se)?;
        self.se_mut(se).counters.deleted += tb;
        Some(Deletion {
            dataset: ds,
            se,
            tb,
            class,
        })
    }

    /// Removes the source side of a move (consolidation).
    pub fn move_out(&mut self, ds: DatasetId, se: SeId) -> Option<f64> {
        let (tb, _) = self.remove_replica(ds, se)?;
        self.se_mut(se).counters.moved_out += tb;
        Some(tb)
    }

    fn set_pair_class(&mut self, ds: DatasetId, se: SeId, before: ReplicaClass) {
        let after = self
            .pairs
            .get(&(ds, se))
            .map_or(ReplicaClass::Cached, PairState::class);
        if before == after {
            return;
        }
        if let Some(r) = self.replicas.get(&(ds, se)) {
            let last_access = r.last_access;
            let size = self.datasets[&ds].size_tb;
            let s = &mut self.ses[se.0 as usize];
            s.by_class[before.index()] -= size;
            s.by_class[after.index()] += size;
            if after == ReplicaClass::Cached {
                s.cached.insert((last_access, ds));
            } else if before == ReplicaClass::Cached {
                s.cached.remove(&(last_access, ds));
            }
        }
    }

    pub fn add_rule(
        &mut self,
        ds: DatasetId,
        se: SeId,
        lifetime: Option<SimTime>,
        now: SimTime,
    ) -> RuleId {
        let id = RuleId(self.next_rule);
        self.next_rule += 1;
        let rule = Rule {
            id,
            dataset: ds,
            se,
            lifetime,
            created_at: now,
        };
        let before = self
            .pairs
            .get(&(ds, se))
            .map_or(ReplicaClass::Cached, PairState::class);
        let pair = self.pairs.entry((ds, se)).or_default();
        if lifetime.is_none() {
            pair.persistent += 1;
        } else {
            pair.temporary += 1;
        }
        if let Some(e) = rule.expiry() {
            self.expiries.insert((e, id));
        }
        self.rules.insert(id, rule);
        self.set_pair_class(ds, se, before);
        id
    }

    fn drop_rule(&mut self, id: RuleId) -> Option<Rule> {
        let rule = self.rules.remove(&id)?;
        if let Some(e) = rule.expiry() {
            self.expiries.remove(&(e, id));
        }
        let key = (rule.dataset, rule.se);
        let before = self
            .pairs
            .get(&key)
            .map_or(ReplicaClass::Cached, PairState::class);
        if let Some(p) = self.pairs.get_mut(&key) {
            if rule.lifetime.is_none() {
                p.persistent -= 1;
            } else {
                p.temporary -= 1;
            }
            if p.persistent == 0 && p.temporary == 0 {
                self.pairs.remove(&key);
            }
        }
        self.set_pair_class(rule.dataset, rule.se, before);
        self.forget_if_orphan(rule.dataset);
        Some(rule)
    }

    /// Withdraws a rule before its expiry.
    pub fn remove_rule(&mut self, id: RuleId) -> Option<Rule> {
        self.drop_rule(id)
    }

    /// Removes every rule with `expiry <= now`. Replicas stay behind and are
    /// reclassified.
    pub fn expire_rules(&mut self, now: SimTime) -> Vec<Rule> {
        let due: Vec<RuleId> = self
            .expiries
            .range(..=(now, RuleId(u64::MAX)))
            .map(|&(_, id)| id)
            .collect();
        due.into_iter()
            .filter_map(|id| self.drop_rule(id))
            .collect()
    }

    /// Deletion pass for one element. Greedy elements lose every CACHED
    /// replica; others delete CACHED replicas in least-recently-accessed
    /// order only once occupancy exceeds the high watermark, stopping at the
    /// low watermark. Pinned replicas are never touched.
    pub fn run_deletion(&mut self, se: SeId, config: &StorageElement) -> Vec<Deletion> {
        let s = self.se(se);
        let victims: Vec<DatasetId> = if config.greedy_deletion {
            s.cached.iter().map(|&(_, d)| d).collect()
        } else {
            let high = config.high_watermark * s.capacity_tb;
            let low = config.low_watermark * s.capacity_tb;
            if s.occupancy <= high {
                Vec::new()
            } else {
                let mut occ = s.occupancy;
                let mut v = Vec::new();
                for &(_, d) in &s.cached {
                    if occ <= low {
                        break;
                    }
                    occ -= self.datasets[&d].size_tb;
                    v.push(d);
                }
                v
            }
        };
        victims
            .into_iter()
            .filter_map(|d| self.delete_replica(d, se))
            .collect()
    }

    /// Makes room for `tb` on a non-greedy element by evicting CACHED
    /// replicas in LRU order. Returns what was deleted.
    pub fn evict_for(&mut self, se: SeId, tb: f64) -> Vec<Deletion> {
        let mut out = Vec::new();
        while !self.fits(se, tb) {
            let Some(&(_, d)) = self.se(se).cached.first() else {
                break;
            };
            out.extend(self.delete_replica(d, se));
        }
        out
    }

    /// Oldest CACHED replicas to move off `se` so that occupancy returns to
    /// `pressure` of capacity. Empty below the threshold.
    pub fn consolidation_candidates(&self, se: SeId, pressure: f64) -> Vec<DatasetId> {
        let s = self.se(se);
        let limit = pressure * s.capacity_tb;
        let mut occ = s.occupancy;
        let mut out = Vec::new();
        for &(_, d) in &s.cached {
            if occ <= limit {
                break;
            }
            occ -= self.datasets[&d].size_tb;
            out.push(d);
        }
        out
    }

    /// Cross-checks the incremental bookkeeping of one element.
    pub fn audit(&self, se: SeId) -> Result<(), String> {
        let s = self.se(se);
        let tol = 1e-6
            * (1.0
                + s.capacity_tb
                    .max(s.counters.written + s.counters.transferred_in));
        let from_replicas: f64 = s.replicas.iter().map(|d| self.datasets[d].size_tb).sum();
        if (from_replicas - s.occupancy).abs() > tol {
            return Err(format!(
                "SE {}: replica sum {from_replicas} != occupancy {}",
                se.0, s.occupancy
            ));
        }
        if (s.counters.balance() - s.occupancy).abs() > tol {
            return Err(format!(
                "SE {}: flow balance {} != occupancy {}",
                se.0,
                s.counters.balance(),
                s.occupancy
            ));
        }
        if s.occupancy < -tol || s.occupancy > s.capacity_tb + tol {
            return Err(format!(
                "SE {}: occupancy {} outside [0, {}]",
                se.0, s.occupancy, s.capacity_tb
            ));
        }
        let by_class: f64 = s.by_class.iter().sum();
        let by_format: f64 = s.by_format.iter().sum();
        if (by_class - by_format).abs() > tol || (by_class - s.occupancy).abs() > tol {
            return Err(format!("SE {}: class/format totals disagree", se.0));
        }
        Ok(())
    }
}

/// Where a sealed output dataset goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Producing site hosts the nucleus element; nothing moves.
    Local,
    /// WAN transfer from the producing element to the nucleus.
    Transfer { src: SeId, dst: SeId },
    /// Nucleus cannot take the output; the task stalls.
    Stall,
}

pub fn place_output(
    nucleus: SeId,
    producing_site: SiteId,
    producing_se: SeId,
    output: &Dataset,
    topology: &Topology,
    data: &DataState,
) -> Placement {
    if topology.site_of(nucleus) == producing_site {
        return Placement::Local;
    }
    if data.has_replica(output.id, nucleus) || data.fits(nucleus, output.size_tb) {
        Placement::Transfer {
            src: producing_se,
            dst: nucleus,
        }
    } else {
        Placement::Stall
    }
}

//! Scenario files: the JSON document describing one simulation, its
//! validation, and its compilation into resolved identifiers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamgmt::Format;
use crate::pricing::{PricingCatalog, SubscriptionPlan};
use crate::time::{self, SimTime};
use crate::topology::{
    Consolidation, DistanceMatrix, Links, SeId, SeKind, Site, SiteId, StorageElement, Topology,
    ISOLATING_DISTANCE,
};
use crate::workload::{FairsharePolicy, RampProfile, WorkflowKind, WorkflowTemplate};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Mandatory; kept optional here so a missing seed is reported as a
    /// validation issue rather than a parse error.
    #[serde(default)]
    pub seed: Option<u64>,
    pub duration_days: f64,
    #[serde(default = "default_sample_interval_h")]
    pub sample_interval_h: f64,
    #[serde(default)]
    pub catalog: PricingCatalog,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subscription: Option<SubscriptionPlan>,
    #[serde(default)]
    pub overhead_usd_per_day: f64,
    #[serde(default)]
    pub sites: Vec<SiteSpec>,
    #[serde(default)]
    pub storage_elements: Vec<SeSpec>,
    #[serde(default)]
    pub distances: DistanceSpec,
    #[serde(default)]
    pub links: LinkSpec,
    /// Site whose slots run the workload. Defaults to the first cloud site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute_site: Option<String>,
    /// Site whose storage and egress the metrics describe. Defaults to the
    /// compute site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus_site: Option<String>,
    #[serde(default)]
    pub compute: ComputeSpec,
    #[serde(default)]
    pub templates: Vec<WorkflowTemplate>,
    /// Empty means equal weights over every kind.
    #[serde(default)]
    pub fairshare: BTreeMap<WorkflowKind, f64>,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub task_streams: Vec<StreamSpec>,
    #[serde(default)]
    pub placements: Vec<PlacementSpec>,
    #[serde(default)]
    pub config_changes: Vec<ConfigChangeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<DemandSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSpec>,
    #[serde(default)]
    pub data_policy: DataPolicy,
}

fn default_sample_interval_h() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub name: String,
    #[serde(default)]
    pub slots: u32,
    #[serde(default)]
    pub cloud: bool,
    #[serde(default)]
    pub tape: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSpec {
    pub name: String,
    pub site: String,
    pub capacity_tb: f64,
    #[serde(default = "default_kind")]
    pub kind: SeKind,
    #[serde(default)]
    pub greedy_deletion: bool,
    #[serde(default = "default_high")]
    pub high_watermark: f64,
    #[serde(default = "default_low")]
    pub low_watermark: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consolidation: Option<ConsolidationSpec>,
}

fn default_kind() -> SeKind {
    SeKind::Datadisk
}
fn default_high() -> f64 {
    0.95
}
fn default_low() -> f64 {
    0.90
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsolidationSpec {
    pub sink: String,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSpec {
    #[serde(default = "default_distance")]
    pub default: f64,
    #[serde(default)]
    pub entries: Vec<DistanceEntry>,
}

fn default_distance() -> f64 {
    1.0
}

impl Default for DistanceSpec {
    fn default() -> Self {
        DistanceSpec {
            default: default_distance(),
            entries: Vec::new(),
        }
    }
}

/// `dst` absent means every other element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceEntry {
    pub src: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<String>,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    #[serde(default)]
    pub interconnect: Vec<SitePair>,
    #[serde(default)]
    pub circuits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SitePair {
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeSpec {
    /// Applied to every slot increase, including the initial allocation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampProfile>,
    #[serde(default)]
    pub eviction_hazard: f64,
    #[serde(default)]
    pub failure_hazard: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    #[default]
    Persistent,
    Temporary {
        lifetime_days: f64,
    },
    None,
}

/// Data present at the start of the run. `count > 1` creates that many
/// datasets named `name#0`, `name#1`, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub format: Format,
    pub size_tb: f64,
    pub se: String,
    #[serde(default)]
    pub rule: RuleSpec,
    #[serde(default = "one_u32")]
    pub count: u32,
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    #[default]
    None,
    /// A dataset from the `datasets` section.
    Dataset(String),
    /// A fresh dataset sized from the template, created at `at` on release.
    Generated { at: String },
    /// RAW recalled from tape at `from`.
    Carousel {
        from: String,
        tape_rate_tb_per_h: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub template: String,
    pub total_events: u64,
    pub nucleus: String,
    #[serde(default)]
    pub release_day: f64,
    #[serde(default)]
    pub input: InputSpec,
}

/// A task every `every_h` hours from `from_day` until `until_day`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub name: String,
    pub template: String,
    pub events_per_task: u64,
    pub every_h: f64,
    #[serde(default)]
    pub from_day: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until_day: Option<f64>,
    pub nucleus: String,
    #[serde(default)]
    pub input: InputSpec,
}

/// One-off replication of a dataset to an element at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    pub day: f64,
    pub dataset: String,
    pub to: String,
    #[serde(default)]
    pub rule: RuleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigChangeSpec {
    pub day: f64,
    pub change: Change,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    SetSlots {
        site: String,
        slots: u32,
    },
    SetGreedyDeletion {
        se: String,
        enabled: bool,
    },
    SetDistances {
        src: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dst: Option<String>,
        distance: f64,
    },
    /// Route outputs of tasks released from now on to `se`; only the named
    /// stream when `stream` is given.
    SetNucleus {
        se: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stream: Option<String>,
    },
    EnableInterconnect {
        src: String,
        dst: String,
        circuits: u32,
    },
    SetFairshare {
        shares: BTreeMap<WorkflowKind, f64>,
    },
    SetCapacity {
        se: String,
        capacity_tb: f64,
    },
    /// Decommission `se`: data held nowhere else moves to `to`, the rest is
    /// deleted.
    Drain {
        se: String,
        to: String,
    },
}

/// Reads of the focus site's data by jobs elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    /// Probability per day that a sealed dataset is read by some other site.
    pub reads_per_dataset_day: f64,
    pub destinations: Vec<String>,
    /// Formats that attract reads; empty means all.
    #[serde(default)]
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub rate_per_day: f64,
    pub template: String,
    #[serde(default)]
    pub from_day: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until_day: Option<f64>,
    /// Element receiving analysis outputs; kept local when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPolicy {
    #[serde(default = "default_input_lifetime")]
    pub input_rule_lifetime_days: f64,
    #[serde(default = "default_output_lifetime")]
    pub output_rule_lifetime_days: f64,
    /// Jobs whose outputs are merged into one dataset before it is sealed
    /// and shipped to the nucleus.
    #[serde(default = "default_output_jobs")]
    pub output_dataset_jobs: u32,
}

fn default_input_lifetime() -> f64 {
    14.0
}
fn default_output_lifetime() -> f64 {
    7.0
}
fn default_output_jobs() -> u32 {
    100
}

impl Default for DataPolicy {
    fn default() -> Self {
        DataPolicy {
            input_rule_lifetime_days: default_input_lifetime(),
            output_rule_lifetime_days: default_output_lifetime(),
            output_dataset_jobs: default_output_jobs(),
        }
    }
}

/// One problem found while validating, with a path into the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| {
            Error::Validation(vec![ValidationIssue {
                path: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            }])
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Every violation in the document. Empty means valid.
    pub fn issues(&self) -> Vec<ValidationIssue> {
        Validator::new(self).run()
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    pub fn compile(&self) -> Result<Setup> {
        self.validate()?;
        Ok(compile(self))
    }
}

struct Validator<'a> {
    s: &'a Scenario,
    issues: Vec<ValidationIssue>,
    sites: BTreeSet<&'a str>,
    ses: BTreeSet<&'a str>,
    templates: BTreeSet<&'a str>,
    datasets: BTreeMap<String, u32>,
    streams: BTreeSet<&'a str>,
}

impl<'a> Validator<'a> {
    fn new(s: &'a Scenario) -> Self {
        Validator {
            s,
            issues: Vec::new(),
            sites: s.sites.iter().map(|x| x.name.as_str()).collect(),
            ses: s.storage_elements.iter().map(|x| x.name.as_str()).collect(),
            templates: s.templates.iter().map(|x| x.name.as_str()).collect(),
            datasets: s
                .datasets
                .iter()
                .map(|d| (d.name.clone(), d.count))
                .collect(),
            streams: s.task_streams.iter().map(|x| x.name.as_str()).collect(),
        }
    }

    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.issue(path, message);
        }
    }

    fn site(&mut self, path: String, name: &str) {
        if !self.sites.contains(name) {
            self.issue(path, format!("unknown site '{name}'"));
        }
    }

    fn se(&mut self, path: String, name: &str) {
        if !self.ses.contains(name) {
            self.issue(path, format!("unknown storage element '{name}'"));
        }
    }

    fn dataset_exists(&self, name: &str) -> bool {
        if self.datasets.get(name).is_some_and(|&c| c == 1) {
            return true;
        }
        name.rsplit_once('#')
            .and_then(|(base, i)| Some((self.datasets.get(base)?, i.parse::<u32>().ok()?)))
            .is_some_and(|(&c, i)| c > 1 && i < c)
    }

    fn rule(&mut self, path: String, rule: &RuleSpec) {
        if let RuleSpec::Temporary { lifetime_days } = rule {
            self.check(*lifetime_days > 0.0, path, "rule lifetime must be > 0");
        }
    }

    fn input(&mut self, path: String, input: &InputSpec) {
        match input {
            InputSpec::None => {}
            InputSpec::Dataset(name) => {
                if !self.dataset_exists(name) {
                    self.issue(path, format!("unknown dataset '{name}'"));
                }
            }
            InputSpec::Generated { at } => self.se(format!("{path}.generated.at"), at),
            InputSpec::Carousel {
                from,
                tape_rate_tb_per_h,
            } => {
                self.se(format!("{path}.carousel.from"), from);
                let tape = self
                    .s
                    .storage_elements
                    .iter()
                    .find(|e| &e.name == from)
                    .and_then(|e| self.s.sites.iter().find(|x| x.name == e.site))
                    .is_some_and(|x| x.tape);
                self.check(
                    tape,
                    format!("{path}.carousel.from"),
                    "carousel source site has no tape",
                );
                self.check(
                    *tape_rate_tb_per_h > 0.0 && tape_rate_tb_per_h.is_finite(),
                    format!("{path}.carousel.tape_rate_tb_per_h"),
                    "tape rate must be > 0",
                );
            }
        }
    }

    fn day(&mut self, path: String, day: f64) {
        self.check(day >= 0.0 && day.is_finite(), path, "day must be >= 0");
    }

    fn unique<'b>(&mut self, section: &str, names: impl Iterator<Item = &'b str>) {
        let mut seen = BTreeSet::new();
        for (i, n) in names.enumerate() {
            if !seen.insert(n) {
                self.issue(format!("{section}[{i}]"), format!("duplicate name '{n}'"));
            }
        }
    }

    fn run(mut self) -> Vec<ValidationIssue> {
        let s = self.s;
        if s.seed.is_none() {
            self.issue("seed", "seed required");
        }
        self.check(
            s.duration_days > 0.0 && s.duration_days.is_finite(),
            "duration_days",
            "duration must be > 0",
        );
        self.check(
            s.sample_interval_h > 0.0,
            "sample_interval_h",
            "sample interval must be > 0",
        );
        if let Err(e) = s.catalog.validate() {
            self.issue("catalog", e.to_string());
        }
        if let Some(p) = &s.subscription {
            if let Err(e) = p.validate() {
                self.issue("subscription", e.to_string());
            }
        }
        self.check(
            s.overhead_usd_per_day >= 0.0,
            "overhead_usd_per_day",
            "overhead must be >= 0",
        );

        self.unique("sites", s.sites.iter().map(|x| x.name.as_str()));
        self.unique(
            "storage_elements",
            s.storage_elements.iter().map(|x| x.name.as_str()),
        );
        self.unique("templates", s.templates.iter().map(|x| x.name.as_str()));
        self.unique("datasets", s.datasets.iter().map(|x| x.name.as_str()));
        self.unique("tasks", s.tasks.iter().map(|x| x.id.as_str()));
        self.unique(
            "task_streams",
            s.task_streams.iter().map(|x| x.name.as_str()),
        );

        for (i, e) in s.storage_elements.iter().enumerate() {
            let p = format!("storage_elements[{i}]");
            self.site(format!("{p}.site"), &e.site);
            self.check(
                e.capacity_tb > 0.0,
                format!("{p}.capacity_tb"),
                "capacity must be > 0",
            );
            self.check(
                0.0 < e.low_watermark
                    && e.low_watermark <= e.high_watermark
                    && e.high_watermark <= 1.0,
                p.clone(),
                "watermarks must satisfy 0 < low <= high <= 1",
            );
            if let Some(c) = &e.consolidation {
                self.se(format!("{p}.consolidation.sink"), &c.sink);
                self.check(
                    c.sink != e.name,
                    format!("{p}.consolidation.sink"),
                    "sink must differ from the element",
                );
                self.check(
                    (0.0..=1.0).contains(&c.pressure),
                    format!("{p}.consolidation.pressure"),
                    "pressure must be in [0, 1]",
                );
            }
        }

        self.check(
            s.distances.default >= 0.0,
            "distances.default",
            "distance must be >= 0",
        );
        for (i, d) in s.distances.entries.iter().enumerate() {
            let p = format!("distances.entries[{i}]");
            self.se(format!("{p}.src"), &d.src);
            if let Some(dst) = &d.dst {
                self.se(format!("{p}.dst"), dst);
            }
            self.check(
                d.distance >= 0.0,
                format!("{p}.distance"),
                "distance must be >= 0",
            );
        }
        for (i, l) in s.links.interconnect.iter().enumerate() {
            self.site(format!("links.interconnect[{i}].src"), &l.src);
            self.site(format!("links.interconnect[{i}].dst"), &l.dst);
        }

        let compute = compute_site_name(s);
        match &compute {
            Some(name) => {
                self.site("compute_site".into(), name);
                let has_disk = s
                    .storage_elements
                    .iter()
                    .any(|e| &e.site == name && e.kind == SeKind::Datadisk);
                let needs_disk =
                    !s.tasks.is_empty() || !s.task_streams.is_empty() || s.analysis.is_some();
                self.check(
                    has_disk || !needs_disk,
                    "compute_site",
                    format!("compute site '{name}' has no DATADISK"),
                );
            }
            None => {
                let needs =
                    !s.tasks.is_empty() || !s.task_streams.is_empty() || s.analysis.is_some();
                self.check(
                    !needs,
                    "compute_site",
                    "workload declared but no compute site",
                );
            }
        }
        if let Some(f) = &s.focus_site {
            self.site("focus_site".into(), f);
        }

        if let Some(r) = &s.compute.ramp {
            if let Err(m) = r.validate() {
                self.issue("compute.ramp", m);
            }
        }
        for (name, h) in [
            ("compute.eviction_hazard", s.compute.eviction_hazard),
            ("compute.failure_hazard", s.compute.failure_hazard),
        ] {
            self.check((0.0..=1.0).contains(&h), name, "hazard must be in [0, 1]");
        }

        for (i, t) in s.templates.iter().enumerate() {
            if let Err(m) = t.validate() {
                self.issue(
                    format!("templates[{i}]"),
                    format!("template '{}': {m}", t.name),
                );
            }
        }
        if !s.fairshare.is_empty() {
            if let Err(e) = FairsharePolicy::new(&s.fairshare) {
                self.issue("fairshare", e.to_string());
            }
        }

        for (i, d) in s.datasets.iter().enumerate() {
            let p = format!("datasets[{i}]");
            self.se(format!("{p}.se"), &d.se);
            self.check(d.size_tb > 0.0, format!("{p}.size_tb"), "size must be > 0");
            self.check(d.count >= 1, format!("{p}.count"), "count must be >= 1");
            self.rule(format!("{p}.rule"), &d.rule);
        }

        for (i, t) in s.tasks.iter().enumerate() {
            let p = format!("tasks[{i}]");
            if !self.templates.contains(t.template.as_str()) {
                self.issue(
                    format!("{p}.template"),
                    format!(
                        "task '{}' references unknown template '{}'",
                        t.id, t.template
                    ),
                );
            }
            self.check(
                t.total_events > 0,
                format!("{p}.total_events"),
                format!("task '{}': total_events must be > 0", t.id),
            );
            self.se(format!("{p}.nucleus"), &t.nucleus);
            self.day(format!("{p}.release_day"), t.release_day);
            self.input(format!("{p}.input"), &t.input);
        }
        for (i, t) in s.task_streams.iter().enumerate() {
            let p = format!("task_streams[{i}]");
            if !self.templates.contains(t.template.as_str()) {
                self.issue(
                    format!("{p}.template"),
                    format!(
                        "stream '{}' references unknown template '{}'",
                        t.name, t.template
                    ),
                );
            }
            self.check(
                t.events_per_task > 0,
                format!("{p}.events_per_task"),
                "events_per_task must be > 0",
            );
            self.check(
                t.every_h > 0.0,
                format!("{p}.every_h"),
                "every_h must be > 0",
            );
            self.se(format!("{p}.nucleus"), &t.nucleus);
            self.day(format!("{p}.from_day"), t.from_day);
            if let Some(u) = t.until_day {
                self.check(
                    u >= t.from_day,
                    format!("{p}.until_day"),
                    "until_day must be >= from_day",
                );
            }
            self.input(format!("{p}.input"), &t.input);
        }
        for (i, pl) in s.placements.iter().enumerate() {
            let p = format!("placements[{i}]");
            self.day(format!("{p}.day"), pl.day);
            if !self.dataset_exists(&pl.dataset) {
                self.issue(
                    format!("{p}.dataset"),
                    format!("unknown dataset '{}'", pl.dataset),
                );
            }
            self.se(format!("{p}.to"), &pl.to);
            self.rule(format!("{p}.rule"), &pl.rule);
        }
        for (i, c) in s.config_changes.iter().enumerate() {
            let p = format!("config_changes[{i}]");
            self.day(format!("{p}.day"), c.day);
            match &c.change {
                Change::SetSlots { site, .. } => self.site(format!("{p}.change.site"), site),
                Change::SetGreedyDeletion { se, .. } => self.se(format!("{p}.change.se"), se),
                Change::SetDistances { src, dst, distance } => {
                    self.se(format!("{p}.change.src"), src);
                    if let Some(d) = dst {
                        self.se(format!("{p}.change.dst"), d);
                    }
                    self.check(
                        *distance >= 0.0,
                        format!("{p}.change.distance"),
                        "distance must be >= 0",
                    );
                }
                Change::SetNucleus { se, stream } => {
                    self.se(format!("{p}.change.se"), se);
                    if let Some(st) = stream {
                        if !self.streams.contains(st.as_str()) {
                            self.issue(
                                format!("{p}.change.stream"),
                                format!("unknown stream '{st}'"),
                            );
                        }
                    }
                }
                Change::EnableInterconnect { src, dst, .. } => {
                    self.site(format!("{p}.change.src"), src);
                    self.site(format!("{p}.change.dst"), dst);
                }
                Change::SetFairshare { shares } => {
                    if let Err(e) = FairsharePolicy::new(shares) {
                        self.issue(format!("{p}.change.shares"), e.to_string());
                    }
                }
                Change::SetCapacity { se, capacity_tb } => {
                    self.se(format!("{p}.change.se"), se);
                    self.check(
                        *capacity_tb > 0.0,
                        format!("{p}.change.capacity_tb"),
                        "capacity must be > 0",
                    );
                }
                Change::Drain { se, to } => {
                    self.se(format!("{p}.change.se"), se);
                    self.se(format!("{p}.change.to"), to);
                    self.check(
                        se != to,
                        format!("{p}.change.to"),
                        "cannot drain into the same element",
                    );
                }
            }
        }
        if let Some(d) = &s.demand {
            self.check(
                (0.0..=1.0).contains(&d.reads_per_dataset_day),
                "demand.reads_per_dataset_day",
                "must be a probability in [0, 1]",
            );
            self.check(
                !d.destinations.is_empty(),
                "demand.destinations",
                "at least one destination required",
            );
            for (i, n) in d.destinations.iter().enumerate() {
                self.se(format!("demand.destinations[{i}]"), n);
            }
        }
        if let Some(a) = &s.analysis {
            self.check(
                a.rate_per_day >= 0.0 && a.rate_per_day.is_finite(),
                "analysis.rate_per_day",
                "rate must be >= 0",
            );
            if !self.templates.contains(a.template.as_str()) {
                self.issue(
                    "analysis.template",
                    format!("unknown template '{}'", a.template),
                );
            }
            self.day("analysis.from_day".into(), a.from_day);
            if let Some(o) = &a.output_to {
                self.se("analysis.output_to".into(), o);
            }
        }
        let dp = &s.data_policy;
        self.check(
            dp.input_rule_lifetime_days > 0.0,
            "data_policy.input_rule_lifetime_days",
            "lifetime must be > 0",
        );
        self.check(
            dp.output_rule_lifetime_days > 0.0,
            "data_policy.output_rule_lifetime_days",
            "lifetime must be > 0",
        );
        self.check(
            dp.output_dataset_jobs >= 1,
            "data_policy.output_dataset_jobs",
            "must be >= 1",
        );
        self.issues
    }
}

fn compute_site_name(s: &Scenario) -> Option<String> {
    s.compute_site
        .clone()
        .or_else(|| s.sites.iter().find(|x| x.cloud).map(|x| x.name.clone()))
        .or_else(|| s.sites.first().map(|x| x.name.clone()))
}

/// A validated scenario with every name resolved.
#[derive(Debug, Clone)]
pub struct Setup {
    pub seed: u64,
    pub duration: SimTime,
    pub sample_interval: SimTime,
    pub catalog: PricingCatalog,
    pub overhead_usd_per_day: f64,
    pub topology: Topology,
    pub compute_site: Option<SiteId>,
    pub compute_disk: Option<SeId>,
    pub focus_site: Option<SiteId>,
    pub ramp: Option<RampProfile>,
    pub eviction_hazard: f64,
    pub failure_hazard: f64,
    pub templates: Vec<WorkflowTemplate>,
    pub fairshare: FairsharePolicy,
    pub datasets: Vec<InitialDataset>,
    pub tasks: Vec<TaskPlan>,
    pub stream_names: Vec<String>,
    pub placements: Vec<PlacementPlan>,
    pub changes: Vec<(SimTime, ChangePlan)>,
    pub demand: Option<DemandPlan>,
    pub analysis: Option<AnalysisPlan>,
    pub input_rule_lifetime: SimTime,
    pub output_rule_lifetime: SimTime,
    pub output_dataset_jobs: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RulePlan {
    Persistent,
    Temporary(SimTime),
    None,
}

impl RulePlan {
    fn from_spec(r: &RuleSpec) -> Self {
        match r {
            RuleSpec::Persistent => RulePlan::Persistent,
            RuleSpec::Temporary { lifetime_days } => {
                RulePlan::Temporary(time::from_days(*lifetime_days).max(1))
            }
            RuleSpec::None => RulePlan::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataset {
    pub name: String,
    pub format: Format,
    pub size_tb: f64,
    pub se: SeId,
    pub rule: RulePlan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputPlan {
    None,
    Dataset(usize),
    Generated { at: SeId },
    Carousel { from: SeId, tape_rate_tb_per_h: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPlan {
    pub name: String,
    pub template: usize,
    pub total_events: u64,
    pub nucleus: SeId,
    pub release: SimTime,
    pub input: InputPlan,
    pub stream: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementPlan {
    pub at: SimTime,
    pub dataset: usize,
    pub to: SeId,
    pub rule: RulePlan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChangePlan {
    SetSlots {
        site: SiteId,
        slots: u32,
    },
    SetGreedyDeletion {
        se: SeId,
        enabled: bool,
    },
    SetDistances {
        src: SeId,
        dst: Option<SeId>,
        distance: f64,
    },
    SetNucleus {
        se: SeId,
        stream: Option<usize>,
    },
    EnableInterconnect {
        src: SiteId,
        dst: SiteId,
        circuits: u32,
    },
    SetFairshare(FairsharePolicy),
    SetCapacity {
        se: SeId,
        capacity_tb: f64,
    },
    Drain {
        se: SeId,
        to: SeId,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandPlan {
    pub reads_per_dataset_day: f64,
    pub destinations: Vec<SeId>,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPlan {
    pub rate_per_day: f64,
    pub template: usize,
    pub from: SimTime,
    pub until: SimTime,
    pub output_to: Option<SeId>,
}

fn compile(s: &Scenario) -> Setup {
    let sites: Vec<Site> = s
        .sites
        .iter()
        .map(|x| Site {
            name: x.name.clone(),
            slots: x.slots,
            is_cloud: x.cloud,
            tape: x.tape,
        })
        .collect();
    let site_id = |name: &str| {
        SiteId(
            s.sites
                .iter()
                .position(|x| x.name == name)
                .expect("validated") as u32,
        )
    };

    // handles follow name order so the smallest handle is the smallest name
    let mut order: Vec<&SeSpec> = s.storage_elements.iter().collect();
    order.sort_by(|a, b| a.name.cmp(&b.name));
    let se_id = |name: &str| {
        SeId(
            order
                .iter()
                .position(|x| x.name == name)
                .expect("validated") as u32,
        )
    };
    let ses: Vec<StorageElement> = order
        .iter()
        .map(|e| StorageElement {
            name: e.name.clone(),
            site: site_id(&e.site),
            capacity_tb: e.capacity_tb,
            greedy_deletion: e.greedy_deletion,
            kind: e.kind,
            high_watermark: e.high_watermark,
            low_watermark: e.low_watermark,
            consolidation: e.consolidation.as_ref().map(|c| Consolidation {
                sink: se_id(&c.sink),
                pressure: c.pressure,
            }),
        })
        .collect();

    let mut distances = DistanceMatrix::new(ses.len(), s.distances.default).expect("validated");
    for d in &s.distances.entries {
        match &d.dst {
            Some(dst) => distances.set(se_id(&d.src), se_id(dst), d.distance),
            None => distances.set_from(se_id(&d.src), d.distance),
        }
        .expect("validated");
    }
    let mut links = Links::default();
    for l in &s.links.interconnect {
        links.set_interconnect(site_id(&l.src), site_id(&l.dst));
    }
    links.provisioned_circuits = s.links.circuits;
    let topology = Topology {
        sites,
        ses,
        distances,
        links,
    };

    let compute_site = compute_site_name(s).map(|n| site_id(&n));
    let compute_disk = compute_site.and_then(|c| topology.datadisk_of(c));
    let focus_site = s.focus_site.as_deref().map(site_id).or(compute_site);

    let template_id = |name: &str| {
        s.templates
            .iter()
            .position(|t| t.name == name)
            .expect("validated")
    };

    let mut datasets = Vec::new();
    for d in &s.datasets {
        for k in 0..d.count {
            datasets.push(InitialDataset {
                name: if d.count == 1 {
                    d.name.clone()
                } else {
                    format!("{}#{k}", d.name)
                },
                format: d.format,
                size_tb: d.size_tb,
                se: se_id(&d.se),
                rule: RulePlan::from_spec(&d.rule),
            });
        }
    }
    let dataset_id = |name: &str| {
        datasets
            .iter()
            .position(|d| d.name == name)
            .expect("validated")
    };
    let input = |i: &InputSpec| match i {
        InputSpec::None => InputPlan::None,
        InputSpec::Dataset(n) => InputPlan::Dataset(dataset_id(n)),
        InputSpec::Generated { at } => InputPlan::Generated { at: se_id(at) },
        InputSpec::Carousel {
            from,
            tape_rate_tb_per_h,
        } => InputPlan::Carousel {
            from: se_id(from),
            tape_rate_tb_per_h: *tape_rate_tb_per_h,
        },
    };

    let duration = time::from_days(s.duration_days);
    let mut tasks: Vec<TaskPlan> = s
        .tasks
        .iter()
        .map(|t| TaskPlan {
            name: t.id.clone(),
            template: template_id(&t.template),
            total_events: t.total_events,
            nucleus: se_id(&t.nucleus),
            release: time::from_days(t.release_day),
            input: input(&t.input),
            stream: None,
        })
        .collect();
    for (si, st) in s.task_streams.iter().enumerate() {
        let from = time::from_days(st.from_day);
        let until = st.until_day.map_or(duration, time::from_days).min(duration);
        let step = time::from_hours(st.every_h).max(1);
        let mut k = 0u64;
        let mut t = from;
        while t < until {
            tasks.push(TaskPlan {
                name: format!("{}-{k}", st.name),
                template: template_id(&st.template),
                total_events: st.events_per_task,
                nucleus: se_id(&st.nucleus),
                release: t,
                input: input(&st.input),
                stream: Some(si),
            });
            k += 1;
            t = from + k * step;
        }
    }
    // stable: equal release times keep declaration order
    tasks.sort_by_key(|t| t.release);

    let placements = s
        .placements
        .iter()
        .map(|p| PlacementPlan {
            at: time::from_days(p.day),
            dataset: dataset_id(&p.dataset),
            to: se_id(&p.to),
            rule: RulePlan::from_spec(&p.rule),
        })
        .collect();

    let stream_id = |name: &str| {
        s.task_streams
            .iter()
            .position(|x| x.name == name)
            .expect("validated")
    };
    let mut changes: Vec<(SimTime, ChangePlan)> = s
        .config_changes
        .iter()
        .map(|c| {
            let plan = match &c.change {
                Change::SetSlots { site, slots } => ChangePlan::SetSlots {
                    site: site_id(site),
                    slots: *slots,
                },
                Change::SetGreedyDeletion { se, enabled } => ChangePlan::SetGreedyDeletion {
                    se: se_id(se),
                    enabled: *enabled,
                },
                Change::SetDistances { src, dst, distance } => ChangePlan::SetDistances {
                    src: se_id(src),
                    dst: dst.as_deref().map(se_id),
                    distance: *distance,
                },
                Change::SetNucleus { se, stream } => ChangePlan::SetNucleus {
                    se: se_id(se),
                    stream: stream.as_deref().map(stream_id),
                },
                Change::EnableInterconnect { src, dst, circuits } => {
                    ChangePlan::EnableInterconnect {
                        src: site_id(src),
                        dst: site_id(dst),
                        circuits: *circuits,
                    }
                }
                Change::SetFairshare { shares } => {
                    ChangePlan::SetFairshare(FairsharePolicy::new(shares).expect("validated"))
                }
                Change::SetCapacity { se, capacity_tb } => ChangePlan::SetCapacity {
                    se: se_id(se),
                    capacity_tb: *capacity_tb,
                },
                Change::Drain { se, to } => ChangePlan::Drain {
                    se: se_id(se),
                    to: se_id(to),
                },
            };
            (time::from_days(c.day), plan)
        })
        .collect();
    changes.sort_by_key(|c| c.0);

    let fairshare = if s.fairshare.is_empty() {
        FairsharePolicy::new(&WorkflowKind::ALL.iter().map(|&k| (k, 1.0)).collect())
            .expect("uniform")
    } else {
        FairsharePolicy::new(&s.fairshare).expect("validated")
    };

    Setup {
        seed: s.seed.expect("validated"),
        duration,
        sample_interval: time::from_hours(s.sample_interval_h).max(1),
        catalog: s.catalog.clone(),
        overhead_usd_per_day: s.overhead_usd_per_day,
        compute_site,
        compute_disk,
        focus_site,
        ramp: s.compute.ramp,
        eviction_hazard: s.compute.eviction_hazard,
        failure_hazard: s.compute.failure_hazard,
        templates: s.templates.clone(),
        fairshare,
        datasets,
        tasks,
        stream_names: s.task_streams.iter().map(|x| x.name.clone()).collect(),
        placements,
        changes,
        demand: s.demand.as_ref().map(|d| DemandPlan {
            reads_per_dataset_day: d.reads_per_dataset_day,
            destinations: d.destinations.iter().map(|n| se_id(n)).collect(),
            formats: d.formats.clone(),
        }),
        analysis: s.analysis.as_ref().map(|a| AnalysisPlan {
            rate_per_day: a.rate_per_day,
            template: template_id(&a.template),
            from: time::from_days(a.from_day),
            until: a.until_day.map_or(duration, time::from_days).min(duration),
            output_to: a.output_to.as_deref().map(se_id),
        }),
        input_rule_lifetime: time::from_days(s.data_policy.input_rule_lifetime_days).max(1),
        output_rule_lifetime: time::from_days(s.data_policy.output_rule_lifetime_days).max(1),
        output_dataset_jobs: s.data_policy.output_dataset_jobs,
        topology,
    }
}

/// Distance that isolates an element, for scenario authors.
pub const ISOLATE: f64 = ISOLATING_DISTANCE;

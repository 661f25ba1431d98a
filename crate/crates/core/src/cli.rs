//! Command-line entry points: validate, run, report and breakeven.
//!
//! Each command is a plain function returning the text to print, so the thin
//! binary only parses arguments and maps [`CliError::exit_code`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::accounting::{self, GROUP_NAMES};
use crate::engine::{self, Summary};
use crate::output;
use crate::pricing::{self, PricingCatalog, SubscriptionPlan};
use crate::scenario::Scenario;
use crate::time;
use crate::Error;

/// Seed used when `--seed` is not given.
pub const SEED_ENV: &str = "TCOSIM_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Failed(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(e) => match e {
                Error::Invariant { .. }
                | Error::NoSource { .. }
                | Error::UndefinedFractions
                | Error::UndefinedRatio => EXIT_RUNTIME,
                _ => EXIT_USAGE,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// An explicit seed wins over the environment value.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> CliResult<Option<u64>> {
    match (flag, env) {
        (Some(s), _) => Ok(Some(s)),
        (None, Some(v)) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))
        }),
        _ => Ok(None),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

/// Parses `FIRST:LAST` (inclusive simulation days).
pub fn parse_window(s: &str) -> CliResult<(u32, u32)> {
    let bad = || CliError::Usage(format!("window must be FIRST:LAST in days, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (u32, u32) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Checks a scenario file without running it.
pub fn validate(path: &Path) -> CliResult<Scenario> {
    let scenario = Scenario::load(path)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Runs one scenario and writes its artifacts into `out`.
pub fn run(path: &Path, out: &Path, seed: Option<u64>) -> CliResult<Summary> {
    let mut scenario = Scenario::load(path)?;
    if let Some(s) = resolve_seed(seed, env_seed().as_deref())? {
        scenario.seed = Some(s);
    }
    scenario.validate()?;
    std::fs::create_dir_all(out).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output directory {}: {e}",
            out.display()
        ))
    })?;
    let result = engine::run(&scenario)?;
    output::write_run(&result, out).map_err(|e| match e {
        Error::Io { path, source } => {
            CliError::Usage(format!("cannot write {}: {source}", path.display()))
        }
        other => CliError::Failed(other),
    })?;
    Ok(result.summary)
}

/// Runs independent scenarios on up to `workers` threads. Each writes into
/// `out/<file stem>`.
pub fn sweep(
    paths: &[PathBuf],
    out: &Path,
    seed: Option<u64>,
    workers: usize,
) -> Vec<(PathBuf, CliResult<Summary>)> {
    let workers = workers.clamp(1, paths.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<CliResult<Summary>>> = (0..paths.len()).map(|_| None).collect();
    let slots: Vec<std::sync::Mutex<&mut Option<CliResult<Summary>>>> =
        results.iter_mut().map(std::sync::Mutex::new).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(path) = paths.get(i) else { break };
                let stem = path
                    .file_stem()
                    .map_or_else(|| format!("run{i}"), |s| s.to_string_lossy().into_owned());
                let r = run(path, &out.join(stem), seed);
                **slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    drop(slots);
    paths
        .iter()
        .cloned()
        .zip(results.into_iter().map(|r| r.expect("every scenario ran")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Monthly,
    Fractions,
    Ratio,
    Subscription,
}

impl FromStr for ReportKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "monthly" => Ok(ReportKind::Monthly),
            "fractions" => Ok(ReportKind::Fractions),
            "ratio" => Ok(ReportKind::Ratio),
            "subscription" => Ok(ReportKind::Subscription),
            _ => Err(CliError::Usage(format!(
                "unknown report kind {s:?} (expected monthly, fractions, ratio or subscription)"
            ))),
        }
    }
}

struct RunInfo {
    catalog: PricingCatalog,
    plan: Option<SubscriptionPlan>,
}

fn read_run_info(dir: &Path) -> CliResult<RunInfo> {
    let path = dir.join(output::SUMMARY_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("{} is not a completed run: {e}", dir.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    let catalog = serde_json::from_value(v["catalog"].clone()).map_err(Error::from)?;
    let plan = match v.get("plan") {
        Some(p) if !p.is_null() => Some(serde_json::from_value(p.clone()).map_err(Error::from)?),
        _ => None,
    };
    Ok(RunInfo { catalog, plan })
}

/// Builds a report from a run directory, writes its CSV or JSON next to the
/// run artifacts and returns the table to print.
pub fn report(dir: &Path, kind: ReportKind, window: Option<(u32, u32)>) -> CliResult<String> {
    let info = read_run_info(dir)?;
    let hpm = info.catalog.hours_per_month;
    let ledger = output::read_ledger(&dir.join(output::LEDGER_FILE))?;
    let mut text = String::new();
    match kind {
        ReportKind::Monthly => {
            let mut b = accounting::monthly_breakdown(&ledger, hpm);
            if let Some((d0, d1)) = window {
                let (m0, m1) = (time::month_of_day(d0, hpm), time::month_of_day(d1, hpm));
                b.rows.retain(|(m, _)| (m0..=m1).contains(m));
            }
            output::write_breakdown(&b, &dir.join("breakdown.csv"))?;
            writeln!(text, "{}", output::breakdown_header().join(",")).unwrap();
            for (m, row) in &b.rows {
                let cells: Vec<String> = row.iter().map(|&c| output::usd(c)).collect();
                writeln!(
                    text,
                    "{m},{},{}",
                    cells.join(","),
                    output::usd(row.iter().copied().sum())
                )
                .unwrap();
            }
        }
        ReportKind::Fractions => {
            let last = ledger.entries.iter().map(|e| e.day).max().unwrap_or(0);
            let w = window.unwrap_or((0, last));
            let f = accounting::fractions(&ledger, w)?;
            output::write_fractions(&[(w, f)], &dir.join("fractions.csv"))?;
            writeln!(text, "days {}..={}", w.0, w.1).unwrap();
            for (name, p) in GROUP_NAMES.iter().zip(f.percent) {
                writeln!(text, "{name:<8} {p:>3}%").unwrap();
            }
        }
        ReportKind::Ratio => {
            let points = output::read_storage_points(&dir.join(output::METRICS_FILE))?;
            let rows = ratio_rows(&points, hpm, window);
            output::write_ratio(&rows, hpm, &dir.join("ratio.csv"))?;
            writeln!(text, "month  input_egress_tb  ratio").unwrap();
            for (m, egress, r) in rows {
                let r = r.map_or("undefined".to_string(), |r| format!("{r:.3}"));
                writeln!(text, "{m:<6} {egress:>15.1}  {r}").unwrap();
            }
        }
        ReportKind::Subscription => {
            let plan = info.plan.unwrap_or_else(SubscriptionPlan::reference);
            let r = accounting::subscription_report(&ledger, &plan, hpm)?;
            output::write_json(&r, &dir.join("subscription.json"))?;
            writeln!(text, "list price total  ${:.2}", r.list_total_usd).unwrap();
            writeln!(text, "plan total        ${:.2}", r.plan_total_usd).unwrap();
            match r.discount_fraction {
                Some(d) => writeln!(
                    text,
                    "discount {:.0}%, resource ratio {:.2}",
                    d * 100.0,
                    r.resource_ratio
                )
                .unwrap(),
                None => writeln!(text, "discount undefined (empty ledger)").unwrap(),
            }
            writeln!(
                text,
                "{} day(s) above the plan's daily rate of ${:.2}",
                r.flagged_days.len(),
                r.plan_daily_rate_usd
            )
            .unwrap();
        }
    }
    Ok(text)
}

/// Per accounting month covered by the samples: input egress and the
/// egress-to-stored ratio (`None` when undefined).
pub fn ratio_rows(
    points: &[accounting::StoragePoint],
    hours_per_month: f64,
    window: Option<(u32, u32)>,
) -> Vec<(u32, f64, Option<f64>)> {
    let Some(last) = points.last() else {
        return Vec::new();
    };
    let last_month = (last.time_h / hours_per_month) as u32;
    let (m0, m1) = match window {
        Some((d0, d1)) => (
            time::month_of_day(d0, hours_per_month),
            time::month_of_day(d1, hours_per_month),
        ),
        None => (0, last_month),
    };
    let at = |t: f64| {
        points
            .iter()
            .take_while(|p| p.time_h <= t)
            .last()
            .map_or(0.0, |p| p.cumulative_input_egress_tb)
    };
    (m0..=m1.min(last_month))
        .filter_map(|m| {
            let (a, b) = accounting::month_hours_span(m, hours_per_month);
            match accounting::egress_stored_ratio(points, m, hours_per_month) {
                Ok(r) => Some((m, at(b) - at(a), Some(r))),
                Err(Error::UndefinedRatio) => Some((m, at(b) - at(a), None)),
                Err(_) => None,
            }
        })
        .collect()
}

/// Volumes at which the break-even curves are printed.
pub const CURVE_TB: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 3000.0];

/// Break-even volume for one provisioned circuit plus cost curves.
pub fn breakeven(catalog: Option<&Path>, ratio: f64) -> CliResult<String> {
    let catalog = match catalog {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<PricingCatalog>(&text).map_err(Error::from)?
        }
        None => PricingCatalog::default(),
    };
    let v = pricing::breakeven(&catalog, ratio)?;
    let mut text = String::new();
    match v {
        Some(v) => writeln!(text, "break-even at ratio {ratio}: {v:.1} TB/month").unwrap(),
        None => writeln!(text, "break-even at ratio {ratio}: none").unwrap(),
    }
    writeln!(
        text,
        "{:>8}  {:>12}  {:>14}  {:>6}",
        "tb", "internet_usd", "interconnect_usd", "ratio"
    )
    .unwrap();
    for tb in CURVE_TB {
        let internet = pricing::egress_cost(tb, &catalog)?;
        let circuit = pricing::interconnect_cost(tb, catalog.hours_per_month, &catalog)?;
        writeln!(
            text,
            "{tb:>8}  {internet:>12.2}  {circuit:>16.2}  {:>6.3}",
            circuit / internet
        )
        .unwrap();
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_seed_wins_over_env() {
        assert_eq!(resolve_seed(Some(4), Some("9")).unwrap(), Some(4));
        assert_eq!(resolve_seed(None, Some("9")).unwrap(), Some(9));
        assert_eq!(resolve_seed(None, None).unwrap(), None);
        assert_eq!(
            resolve_seed(None, Some("x")).unwrap_err().exit_code(),
            EXIT_USAGE
        );
    }

    #[test]
    fn windows_parse() {
        assert_eq!(parse_window("3:9").unwrap(), (3, 9));
        assert!(parse_window("9:3").is_err());
        assert!(parse_window("nine").is_err());
    }

    #[test]
    fn unknown_report_kind_is_usage() {
        assert_eq!(
            "pie".parse::<ReportKind>().unwrap_err().exit_code(),
            EXIT_USAGE
        );
        assert_eq!("ratio".parse::<ReportKind>().unwrap(), ReportKind::Ratio);
    }

    #[test]
    fn exit_codes() {
        let inv = CliError::Failed(Error::Invariant {
            event_index: 3,
            message: "x".into(),
        });
        assert_eq!(inv.exit_code(), EXIT_RUNTIME);
        assert_eq!(
            CliError::Failed(Error::Validation(vec![])).exit_code(),
            EXIT_USAGE
        );
    }

    #[test]
    fn default_breakeven_text() {
        let t = breakeven(None, 0.5).unwrap();
        assert!(t.starts_with("break-even at ratio 0.5: 65"), "{t}");
        assert_eq!(t.lines().count(), 2 + CURVE_TB.len());
    }
}

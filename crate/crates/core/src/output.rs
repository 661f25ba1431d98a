//! Run artifacts on disk: CSV tables and the JSON summary.
//!
//! Column sets and order are fixed by the `*_HEADER` constants.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::accounting::{
    self, Fractions, Ledger, LedgerEntry, MonthlyBreakdown, Service, StoragePoint, Unit,
};
use crate::datamgmt::{Format, ReplicaClass};
use crate::engine::{Activity, SimulationResult};
use crate::pricing::Cents;
use crate::time;
use crate::workload::WorkflowKind;
use crate::{Error, Result};

pub const LEDGER_FILE: &str = "ledger.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const JOBS_FILE: &str = "jobs.csv";
pub const TRANSFERS_FILE: &str = "transfers.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const EGRESS_BY_DESTINATION_FILE: &str = "egress_by_destination.csv";

pub const LEDGER_HEADER: [&str; 6] = ["day", "date", "service", "usage", "unit", "amount_usd"];
pub const JOBS_HEADER: [&str; 10] = [
    "id", "task", "kind", "index", "events", "cores", "start_h", "end_h", "state", "lost_h",
];
pub const TRANSFERS_HEADER: [&str; 10] = [
    "time_h", "date", "dataset", "format", "tb", "src", "dst", "activity", "link", "billable",
];
pub const EGRESS_BY_DESTINATION_HEADER: [&str; 3] = ["time_h", "destination", "tb_24h"];
pub const BREAKDOWN_HEADER_LEAD: &str = "month";
pub const FRACTIONS_HEADER: [&str; 6] = [
    "first_day",
    "last_day",
    "compute",
    "storage",
    "egress",
    "other",
];
pub const RATIO_HEADER: [&str; 5] = ["month", "first_h", "last_h", "input_egress_tb", "ratio"];

/// Metrics columns: scalars, then per-kind running jobs, stored TB by class
/// and by format, and trailing-24 h egress by activity.
pub fn metrics_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "time_h",
        "slots",
        "running_cores",
        "queued_jobs",
        "staging_jobs",
        "stalled_tasks",
    ]
    .map(String::from)
    .to_vec();
    h.extend(
        WorkflowKind::ALL
            .iter()
            .map(|k| format!("running_{}", k.as_str().to_lowercase())),
    );
    h.extend(
        ReplicaClass::ALL
            .iter()
            .map(|c| format!("stored_{}_tb", c.as_str().to_lowercase())),
    );
    h.extend(
        Format::ALL
            .iter()
            .map(|f| format!("stored_{}_tb", f.as_str().to_lowercase())),
    );
    h.extend(
        Activity::REPORTED
            .iter()
            .map(|a| format!("egress_{}_tb", a.as_str())),
    );
    h.push("cumulative_input_egress_tb".into());
    h
}

pub fn breakdown_header() -> Vec<String> {
    std::iter::once(BREAKDOWN_HEADER_LEAD.to_string())
        .chain(Service::ALL.iter().map(|s| s.as_str().to_lowercase()))
        .chain(std::iter::once("total".to_string()))
        .collect()
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn hours(t: time::SimTime) -> String {
    time::to_hours(t).to_string()
}

pub fn usd(c: Cents) -> String {
    let sign = if c.0 < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", c.0.abs() / 100, c.0.abs() % 100)
}

pub fn parse_usd(s: &str) -> Option<Cents> {
    let (neg, s) = s.strip_prefix('-').map_or((false, s), |r| (true, r));
    let (whole, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.len() > 2 || frac.is_empty() {
        return None;
    }
    let whole: i64 = whole.parse().ok()?;
    let frac: i64 = format!("{frac:0<2}").parse().ok()?;
    let c = whole * 100 + frac;
    Some(Cents(if neg { -c } else { c }))
}

pub fn write_ledger(ledger: &Ledger, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(LEDGER_HEADER)?;
    for e in &ledger.entries {
        w.write_record([
            e.day.to_string(),
            time::day_label(e.day),
            e.service.as_str().to_string(),
            e.usage.to_string(),
            e.unit.as_str().to_string(),
            usd(e.amount),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ledger(path: &Path) -> Result<Ledger> {
    let mut r = csv::Reader::from_path(path)?;
    let bad = |row: usize, what: &str| {
        Error::config(format!("{}: row {row}: bad {what}", path.display()))
    };
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != LEDGER_HEADER.len() {
            return Err(bad(i + 1, "column count"));
        }
        entries.push(LedgerEntry {
            day: rec[0].parse().map_err(|_| bad(i + 1, "day"))?,
            service: Service::parse(&rec[2]).ok_or_else(|| bad(i + 1, "service"))?,
            usage: rec[3].parse().map_err(|_| bad(i + 1, "usage"))?,
            unit: Unit::parse(&rec[4]).ok_or_else(|| bad(i + 1, "unit"))?,
            amount: parse_usd(&rec[5]).ok_or_else(|| bad(i + 1, "amount"))?,
        });
    }
    Ok(Ledger { entries })
}

pub fn write_metrics(result: &SimulationResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(metrics_header())?;
    for m in &result.metrics {
        let mut row = vec![
            hours(m.time),
            m.slots.to_string(),
            m.running_cores.to_string(),
            m.queued_jobs.to_string(),
            m.staging_jobs.to_string(),
            m.stalled_tasks.to_string(),
        ];
        row.extend(m.running_jobs.iter().map(u32::to_string));
        row.extend(m.stored_by_class.iter().map(f64::to_string));
        row.extend(m.stored_by_format.iter().map(f64::to_string));
        row.extend(m.egress_by_activity.iter().map(f64::to_string));
        row.push(m.cumulative_input_egress_tb.to_string());
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads back what the egress-to-stored ratio needs from `metrics.csv`.
pub fn read_storage_points(path: &Path) -> Result<Vec<StoragePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::config(format!("{}: missing column {name}", path.display())))
    };
    let t = col("time_h")?;
    let stored: Vec<usize> = ReplicaClass::ALL
        .iter()
        .map(|c| col(&format!("stored_{}_tb", c.as_str().to_lowercase())))
        .collect::<Result<_>>()?;
    let cum = col("cumulative_input_egress_tb")?;
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::config(format!("{}: bad number {s:?}", path.display())))
    };
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut stored_tb = 0.0;
        for &c in &stored {
            stored_tb += num(&rec[c])?;
        }
        points.push(StoragePoint {
            time_h: num(&rec[t])?,
            stored_tb,
            cumulative_input_egress_tb: num(&rec[cum])?,
        });
    }
    Ok(points)
}

pub fn write_jobs(result: &SimulationResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(JOBS_HEADER)?;
    for j in &result.jobs {
        w.write_record([
            j.id.to_string(),
            result.task_names[j.task as usize].clone(),
            j.kind.as_str().to_string(),
            j.index.to_string(),
            j.events.to_string(),
            j.cores.to_string(),
            hours(j.start),
            hours(j.end),
            j.state.as_str().to_string(),
            hours(j.lost),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_transfers(result: &SimulationResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRANSFERS_HEADER)?;
    for t in &result.transfers {
        w.write_record([
            hours(t.time),
            time::day_label(time::day_of(t.time)),
            t.dataset.0.to_string(),
            t.format.as_str().to_string(),
            t.tb.to_string(),
            t.src.clone(),
            t.dst.clone(),
            t.activity.as_str().to_string(),
            t.link.as_str().to_string(),
            t.billable.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_egress_by_destination(result: &SimulationResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(EGRESS_BY_DESTINATION_HEADER)?;
    for m in &result.metrics {
        for (dst, tb) in &m.egress_by_destination {
            w.write_record([hours(m.time), dst.clone(), tb.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|e| Error::io(path, e))
}

/// Writes every run artifact into `dir`, which must exist. Returns the paths
/// written.
pub fn write_run(result: &SimulationResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = [
        LEDGER_FILE,
        METRICS_FILE,
        JOBS_FILE,
        TRANSFERS_FILE,
        EGRESS_BY_DESTINATION_FILE,
        SUMMARY_FILE,
    ];
    let paths: Vec<PathBuf> = files.iter().map(|f| dir.join(f)).collect();
    write_ledger(&result.ledger, &paths[0])?;
    write_metrics(result, &paths[1])?;
    write_jobs(result, &paths[2])?;
    write_transfers(result, &paths[3])?;
    write_egress_by_destination(result, &paths[4])?;
    write_json(&result.summary, &paths[5])?;
    Ok(paths)
}

pub fn write_breakdown(b: &MonthlyBreakdown, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(breakdown_header())?;
    for (m, row) in &b.rows {
        let mut rec = vec![m.to_string()];
        rec.extend(row.iter().map(|&c| usd(c)));
        rec.push(usd(row.iter().copied().sum()));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_fractions(rows: &[((u32, u32), Fractions)], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(FRACTIONS_HEADER)?;
    for ((d0, d1), f) in rows {
        let mut rec = vec![d0.to_string(), d1.to_string()];
        rec.extend(f.percent.iter().map(u32::to_string));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per accounting month: `(month, input egress TB, ratio)`; the
/// ratio is empty when undefined.
pub fn write_ratio(
    rows: &[(u32, f64, Option<f64>)],
    hours_per_month: f64,
    path: &Path,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RATIO_HEADER)?;
    for &(m, egress, ratio) in rows {
        let (a, b) = accounting::month_hours_span(m, hours_per_month);
        w.write_record([
            m.to_string(),
            a.to_string(),
            b.to_string(),
            egress.to_string(),
            ratio.map_or(String::new(), |r| r.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn usd_formatting() {
        assert_eq!(usd(Cents(0)), "0.00");
        assert_eq!(usd(Cents(5)), "0.05");
        assert_eq!(usd(Cents(13522000)), "135220.00");
        assert_eq!(usd(Cents(-101)), "-1.01");
        assert_eq!(parse_usd("1.5"), Some(Cents(150)));
        assert_eq!(parse_usd("7"), Some(Cents(700)));
        assert_eq!(parse_usd("1.234"), None);
    }

    proptest! {
        #[test]
        fn usd_round_trips(c in -1_000_000_000i64..1_000_000_000) {
            prop_assert_eq!(parse_usd(&usd(Cents(c))), Some(Cents(c)));
        }
    }

    #[test]
    fn ledger_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.csv");
        let ledger = Ledger {
            entries: vec![
                LedgerEntry {
                    day: 0,
                    service: Service::Storage,
                    amount: Cents(1000),
                    usage: 365.0 / 0.7,
                    unit: Unit::TbHours,
                },
                LedgerEntry {
                    day: 3,
                    service: Service::EgressInternet,
                    amount: Cents(8500),
                    usage: 1.0,
                    unit: Unit::Tb,
                },
            ],
        };
        write_ledger(&ledger, &path).unwrap();
        assert_eq!(read_ledger(&path).unwrap(), ledger);
    }
}

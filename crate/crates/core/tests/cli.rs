//! End-to-end checks of the `tcosim` binary.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture_path;

fn tcosim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcosim"))
        .args(args)
        .env_remove("TCOSIM_SEED")
        .output()
        .expect("spawn tcosim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn short_run(out: &Path) {
    let o = tcosim(&[
        "run",
        fixture_path("window_repro").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn every_fixture_validates() {
    for entry in std::fs::read_dir(fixture_path("x").parent().unwrap()).unwrap() {
        let p = entry.unwrap().path();
        let o = tcosim(&["validate", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
        assert!(stdout(&o).ends_with(": ok\n"));
    }
}

#[test]
fn invalid_scenarios_exit_2_with_a_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("noseed.json", r#"{"duration_days": 1}"#, "seed"),
        ("syntax.json", "{", ""),
        (
            "unknown.json",
            r#"{"seed": 1, "duration_days": 1, "bogus": 3}"#,
            "bogus",
        ),
        (
            "badse.json",
            r#"{"seed": 1, "duration_days": 1,
                "sites": [{"name": "A", "slots": 10, "cloud": true}],
                "storage_elements": [{"name": "A_DISK", "site": "NOWHERE", "capacity_tb": 1}]}"#,
            "NOWHERE",
        ),
        (
            "negative.json",
            r#"{"seed": 1, "duration_days": -1}"#,
            "duration",
        ),
    ];
    for (name, text, needle) in cases {
        let p = write(dir.path(), name, text);
        let o = tcosim(&["validate", &p]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
    }
    let o = tcosim(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_with_stable_headers() {
    let dir = tempfile::tempdir().unwrap();
    short_run(dir.path());
    let d = dir.path();
    assert_eq!(
        header(&d.join("ledger.csv")),
        "day,date,service,usage,unit,amount_usd"
    );
    assert_eq!(
        header(&d.join("jobs.csv")),
        "id,task,kind,index,events,cores,start_h,end_h,state,lost_h"
    );
    assert_eq!(
        header(&d.join("transfers.csv")),
        "time_h,date,dataset,format,tb,src,dst,activity,link,billable"
    );
    assert_eq!(
        header(&d.join("egress_by_destination.csv")),
        "time_h,destination,tb_24h"
    );
    assert_eq!(
        header(&d.join("metrics.csv")),
        "time_h,slots,running_cores,queued_jobs,staging_jobs,stalled_tasks,\
         running_evgen,running_sim,running_reco,running_groupprod,running_repro,running_analysis,\
         stored_persistent_tb,stored_temporary_tb,stored_cached_tb,\
         stored_raw_tb,stored_evnt_tb,stored_hits_tb,stored_rdo_tb,stored_aod_tb,stored_daod_tb,stored_desd_tb,\
         egress_production_input_tb,egress_production_output_tb,egress_consolidation_tb,egress_analysis_tb,\
         cumulative_input_egress_tb"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "window_repro");
    assert_eq!(summary["seed"], 1);
    // 5 days at 6 h plus the start sample
    let rows = std::fs::read_to_string(d.join("metrics.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 21);
}

#[test]
fn reports_read_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    short_run(dir.path());
    let d = dir.path().to_str().unwrap();

    let o = tcosim(&["report", d, "fractions"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let total: u32 = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            l.split_whitespace()
                .nth(1)
                .unwrap()
                .trim_end_matches('%')
                .parse::<u32>()
                .unwrap()
        })
        .sum();
    assert_eq!(total, 100);
    assert!(dir.path().join("fractions.csv").exists());

    let o = tcosim(&["report", d, "monthly"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("month,compute_cpu,"));
    assert!(dir.path().join("breakdown.csv").exists());

    for kind in ["ratio", "subscription"] {
        let o = tcosim(&["report", d, kind]);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
    }

    let o = tcosim(&["report", d, "fractions", "--window", "3:1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tcosim(&["report", d, "fractions", "--window", "50:60"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = tcosim(&["report", d, "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "file", "");
    let out = format!("{blocker}/sub");
    let o = tcosim(&[
        "run",
        fixture_path("burst").to_str().unwrap(),
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("output directory"), "{}", stderr(&o));
}

#[test]
fn seed_flag_and_environment_agree() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fixture_path("window_repro");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = tcosim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert!(o.status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_tcosim"))
        .args([
            "run",
            scenario.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ])
        .env("TCOSIM_SEED", "9")
        .output()
        .unwrap();
    assert!(o.status.success());
    for f in ["ledger.csv", "metrics.csv", "transfers.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let o = Command::new(env!("CARGO_BIN_EXE_tcosim"))
        .args([
            "run",
            scenario.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ])
        .env("TCOSIM_SEED", "nine")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("TCOSIM_SEED"));
}

#[test]
fn several_scenarios_need_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let burst = fixture_path("burst");
    let repro = fixture_path("window_repro");
    let out = dir.path().to_str().unwrap();
    let o = tcosim(&[
        "run",
        burst.to_str().unwrap(),
        repro.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = tcosim(&[
        "run",
        burst.to_str().unwrap(),
        repro.to_str().unwrap(),
        "--out",
        out,
        "--sweep",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("burst/ledger.csv").exists());
    assert!(dir.path().join("window_repro/ledger.csv").exists());
}

#[test]
fn breakeven_prints_volume_and_curve() {
    let o = tcosim(&["breakeven"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("break-even at ratio 0.5: "));
    assert!(text.contains("3000"));
    let o = tcosim(&["breakeven", "--ratio", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

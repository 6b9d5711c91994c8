use std::fs;
use std::path::Path;
use std::process::Command;

use adafore_cli::manifest::PARTIAL_MARKER;
use adafore_cli::pipeline::{BRACKETS_FILE, REPORT_FILE, TICKS_FILE};
use adafore_cli::{execute, run_pipeline, Manifest, Overrides, Plan, RunConfig, Stage};

const CONFIG: &str = r#"
[input]
synth = { seed = 11, days = 3 }

[grid]
reduced = "group=0,2;w=12,24;d=1;q=0,1;p=0,1"

[adf]
window = 48

[[selector]]
mode = 13
lambda = 0.95
c1 = 0.5
c2 = 0.75

[[selector]]
mode = 14
type = 1
lambda = 0.9
c1 = 0.25
c2 = 0.5

[[query]]
name = "small-window"
h1 = "w=12"
period = 12
"#;

fn plan_in(dir: &Path, text: &str) -> Plan {
    let o = Overrides {
        out: Some(dir.to_path_buf()),
        ..Overrides::default()
    };
    Plan::new(RunConfig::from_toml(text).unwrap(), &o).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adafore"))
}

#[test]
fn run_writes_complete_reproducible_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_pipeline(&plan_in(a.path(), CONFIG)).unwrap();
    let mb = run_pipeline(&plan_in(b.path(), CONFIG)).unwrap();
    assert_eq!(ma, mb);
    for f in [
        "brackets.csv",
        "features.csv",
        "forecasts.csv",
        "adf_scan.csv",
        "report.csv",
        "cum_pl.csv",
        "selections/MG13_50+75_095.csv",
        "selections/MG14_25+50_type-1_09.csv",
        "tests/MG13_50+75_095__small-window.csv",
        "plots/cumulative_pl.csv",
        "plots/adf_scan.csv",
    ] {
        assert!(ma.get(f).is_some(), "{f} missing from manifest");
    }
    assert_eq!(Manifest::read(a.path()).unwrap(), ma);
    assert!(!a.path().join(PARTIAL_MARKER).exists());

    // A later stage rerun alone reproduces its own output.
    fs::remove_file(a.path().join(REPORT_FILE)).unwrap();
    let again = execute(&plan_in(a.path(), CONFIG), &[Stage::Report]).unwrap();
    assert_eq!(again.get(REPORT_FILE), ma.get(REPORT_FILE));
}

#[test]
fn report_lists_baseline_selectors_and_fixed_models() {
    let dir = tempfile::tempdir().unwrap();
    let plan = plan_in(dir.path(), CONFIG);
    run_pipeline(&plan).unwrap();
    let text = fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap();
    let codes: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(codes[0], "BH");
    assert_eq!(&codes[1..3], ["MG13_50+75_095", "MG14_25+50_type-1_09"]);
    assert_eq!(codes.len(), 3 + plan.universe.len());
}

#[test]
fn tick_file_input_matches_synthetic_run() {
    let synth = tempfile::tempdir().unwrap();
    let file = tempfile::tempdir().unwrap();
    execute(&plan_in(synth.path(), CONFIG), &[Stage::Synth, Stage::Ingest]).unwrap();
    let ticks = synth.path().join(TICKS_FILE);
    let text = CONFIG.replace(
        "synth = { seed = 11, days = 3 }",
        &format!("ticks = {:?}", ticks.to_str().unwrap()),
    );
    execute(&plan_in(file.path(), &text), &[Stage::Synth, Stage::Ingest]).unwrap();
    assert!(!file.path().join(TICKS_FILE).exists());
    assert_eq!(
        fs::read(synth.path().join(BRACKETS_FILE)).unwrap(),
        fs::read(file.path().join(BRACKETS_FILE)).unwrap()
    );
}

#[test]
fn invalid_quantiles_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, CONFIG.replace("c2 = 0.75", "c2 = 0.5")).unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn missing_upstream_is_a_stage_failure_with_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let res = bin().args(["select", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(3));
    let marker = fs::read_to_string(out.join(PARTIAL_MARKER)).unwrap();
    assert!(marker.contains("select"), "{marker}");
    assert!(String::from_utf8_lossy(&res.stderr).contains("stage select failed"));
}

#[test]
fn stages_run_separately_match_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let split = dir.path().join("split");
    for cmd in ["synth", "ingest", "features", "adf", "grid", "select", "report", "test"] {
        let mut c = bin();
        c.arg(cmd).arg("--out").arg(&split).arg("--threads").arg("1");
        // After the first stage the stored run config is picked up.
        if cmd == "synth" {
            c.arg("--config").arg(&cfg);
        }
        assert!(c.status().unwrap().success(), "{cmd}");
    }
    let whole = dir.path().join("whole");
    assert!(bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&whole).status().unwrap().success());
    assert_eq!(Manifest::read(&split).unwrap(), Manifest::read(&whole).unwrap());
}

#[test]
fn seed_and_grid_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let synth = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let ok = bin()
            .args(["synth", "--seed", seed, "--reduced-grid", "M0_12_PDQ010,M2_24_PDQ111", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .success();
        assert!(ok);
        let stored = RunConfig::from_toml(&fs::read_to_string(out.join("run_config.toml")).unwrap()).unwrap();
        (stored, fs::read(out.join(TICKS_FILE)).unwrap())
    };
    let (a, ticks_a) = synth("1", "a");
    let (b, ticks_b) = synth("2", "b");
    assert_eq!(a.input.synth.unwrap().seed, 1);
    assert_eq!(b.input.synth.unwrap().seed, 2);
    assert_eq!(a.grid.reduced.as_deref(), Some("M0_12_PDQ010,M2_24_PDQ111"));
    assert_ne!(ticks_a, ticks_b);
}

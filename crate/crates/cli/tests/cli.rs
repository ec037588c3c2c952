use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SMALL: &str = r#"{
    "grid": {
        "u":  {"start": 0.1, "stop": 0.5, "step": 0.2},
        "pi": {"start": 0.1, "stop": 0.7, "step": 0.1},
        "d":  {"start": 0.1, "stop": 0.7, "step": 0.1},
        "margins": [0.3, 0.5]
    },
    "customers_per_cell": 200
}"#;

fn kiosk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kiosk-sim"))
        .args(args)
        .env_remove("KIOSK_SIM_PARALLELISM")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn sha256(p: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(p).unwrap()))
}

#[test]
fn default_sweep_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = kiosk(&["sweep", "--out", path(&out), "--customers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 89_373 + 1);
    assert!(csv.starts_with("cell_index,u,pi,d,m,customers,"));

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cells"], 89_373);
    assert_eq!(manifest["config"]["customers_per_cell"], 1);
    assert_eq!(manifest["failed_cells"].as_array().unwrap().len(), 0);
}

#[test]
fn sweep_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = kiosk(&[
        "sweep",
        "--config",
        path(&config),
        "--out",
        path(&a),
        "--parallelism",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_kiosk-sim"))
        .args(["sweep", "--config", path(&config), "--out", path(&b)])
        .env("KIOSK_SIM_PARALLELISM", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(a.join("sweep.csv")).unwrap(),
        fs::read(b.join("sweep.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["parallelism"], 3);
    assert_eq!(manifest["cells"], 3 * 7 * 7 * 2);
}

#[test]
fn manifest_digests_match_outputs_and_snapshot_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let first = dir.path().join("first");
    let o = kiosk(&[
        "sweep",
        "--config",
        path(&config),
        "--out",
        path(&first),
        "--seed",
        "7",
        "--rule",
        "additive",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for entry in outputs {
        let file = first.join(entry["file"].as_str().unwrap());
        assert_eq!(entry["sha256"].as_str().unwrap(), sha256(&file));
        assert_eq!(
            entry["bytes"].as_u64().unwrap(),
            fs::metadata(&file).unwrap().len()
        );
    }
    assert_eq!(manifest["config"]["master_seed"], 7);
    assert_eq!(manifest["config"]["rule"], "additive");
    assert!(manifest["started_at"].as_str().unwrap().ends_with('Z'));

    // The snapshot alone, without flags, reproduces the run.
    let snapshot = dir.path().join("snapshot.json");
    fs::write(&snapshot, manifest["config"].to_string()).unwrap();
    let second = dir.path().join("second");
    let o = kiosk(&["sweep", "--config", path(&snapshot), "--out", path(&second)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("sweep.csv")).unwrap(),
        fs::read(second.join("sweep.csv")).unwrap()
    );
}

#[test]
fn invalid_config_names_the_field_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"grid": {"d": {"start": 0.1, "stop": 0.7, "step": 0}}}"#,
    );
    let out = dir.path().join("out");
    let o = kiosk(&["sweep", "--config", path(&config), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.d.step"), "{}", stderr(&o));
    assert!(!out.exists());

    let config = write_config(dir.path(), r#"{"rule": "quadratic"}"#);
    let o = kiosk(&["sweep", "--config", path(&config), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rule"));

    let o = kiosk(&["sweep", "--out", path(&out), "--customers", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("customers_per_cell"));
    assert!(!out.exists());
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = kiosk(&["sweep", "--config", path(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(3));

    // Output "directory" is an existing regular file.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let config = write_config(dir.path(), SMALL);
    let o = kiosk(&[
        "sweep",
        "--config",
        path(&config),
        "--out",
        path(&blocker.join("sub")),
    ]);
    assert_eq!(o.status.code(), Some(3));

    let o = kiosk(&["report", "--input", path(&dir.path().join("nope.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn cell_reports_analytic_and_monte_carlo_side_by_side() {
    let o = kiosk(&[
        "cell",
        "--u",
        "0.5",
        "--pi",
        "0.1",
        "--d",
        "0.7",
        "--m",
        "0.3",
        "--customers",
        "100000",
        "--seed",
        "42",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let analytic = v["analytic"]["r_margin"].as_f64().unwrap();
    assert!((analytic + 8.5253).abs() < 1e-4);
    let est = v["r_margin_mc"].as_f64().unwrap();
    let se = v["r_margin_se"].as_f64().unwrap();
    assert!(
        (est - analytic).abs() <= 4.0 * se,
        "{est} vs {analytic} (se {se})"
    );
    assert_eq!(v["customers"], 100_000);
}

#[test]
fn cell_without_display_users_reports_missing_ratios() {
    let o = kiosk(&[
        "cell",
        "--u",
        "0",
        "--pi",
        "0.36",
        "--d",
        "0.2",
        "--m",
        "0.4",
        "--customers",
        "1000",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["r_customers_mc"].is_null());
    assert!(v["r_margin_mc"].is_null());
    assert_eq!(v["buyers_baseline"], v["buyers_display_scenario"]);
    assert_eq!(v["margin_sum_baseline"], v["margin_sum_display_scenario"]);

    let o = kiosk(&[
        "cell", "--u", "0", "--pi", "0.36", "--d", "0.2", "--m", "0.4", "--format", "csv",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.contains(",,,"), "{row}");
}

#[test]
fn cell_at_zero_increase_has_unit_buyer_ratio() {
    let o = kiosk(&[
        "cell",
        "--u",
        "0.5",
        "--pi",
        "0.36",
        "--d",
        "0.0669014",
        "--m",
        "0.4",
        "--customers",
        "1000",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["r_customers_mc"].as_f64(), Some(1.0));
}

#[test]
fn cell_matches_the_sweep_row_with_the_same_index() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    assert!(
        kiosk(&["sweep", "--config", path(&config), "--out", path(&out)])
            .status
            .success()
    );
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let row = csv.lines().nth(40).unwrap();
    let f: Vec<&str> = row.split(',').collect();
    let o = kiosk(&[
        "cell",
        "--config",
        path(&config),
        "--index",
        f[0],
        "--u",
        f[1],
        "--pi",
        f[2],
        "--d",
        f[3],
        "--m",
        f[4],
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        String::from_utf8(o.stdout).unwrap().lines().nth(1).unwrap(),
        row
    );
}

#[test]
fn cell_rejects_out_of_range_values() {
    for args in [
        ["--u", "1.5", "--pi", "0.1", "--d", "0.1", "--m", "0.3"],
        ["--u", "0.5", "--pi", "0", "--d", "0.1", "--m", "0.3"],
        ["--u", "0.5", "--pi", "0.1", "--d", "1", "--m", "0.3"],
        ["--u", "0.5", "--pi", "0.1", "--d", "0.1", "--m", "-1"],
        ["--u", "x", "--pi", "0.1", "--d", "0.1", "--m", "0.3"],
    ] {
        let mut full = vec!["cell"];
        full.extend(args);
        assert_eq!(kiosk(&full).status.code(), Some(2), "{args:?}");
    }
}

fn breakeven_rows(args: &[&str]) -> Vec<Vec<String>> {
    let dir = tempfile::tempdir().unwrap();
    let mut full = vec!["breakeven", "--out", path(dir.path())];
    full.extend(args);
    let o = kiosk(&full);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("breakeven.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("margin,pi,interval_lo,interval_hi"));
    lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn six(s: &str) -> String {
    format!("{:.6}", s.parse::<f64>().unwrap())
}

#[test]
fn breakeven_analytic_oracles() {
    let rows = breakeven_rows(&["--margins", "0.5", "--pi", "0.1"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(
        (six(&rows[0][2]), six(&rows[0][3])),
        ("0.094118".into(), "0.355413".into())
    );
    assert!((rows[0][2].parse::<f64>().unwrap() - 0.094117).abs() < 1e-6);

    let rows = breakeven_rows(&["--margins", "0.5", "--pi", "0.7"]);
    assert_eq!(six(&rows[0][3]), "0.150000");

    let rows = breakeven_rows(&["--margins", "0.3"]);
    assert_eq!(rows.len(), 31);
    assert!(rows.iter().all(|r| r[2].is_empty() && r[3].is_empty()));
}

#[test]
fn breakeven_empirical_reads_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    assert!(
        kiosk(&["sweep", "--config", path(&config), "--out", path(&out)])
            .status
            .success()
    );
    let sweep = out.join("sweep.csv");
    let rows = breakeven_rows(&[
        "--method",
        "empirical",
        "--input",
        path(&sweep),
        "--pi",
        "0.1",
    ]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "0.3");
    assert!(rows[0][2].is_empty());
    let lo: f64 = rows[1][2].parse().unwrap();
    let hi: f64 = rows[1][3].parse().unwrap();
    assert!(
        (lo - 0.094).abs() < 0.1 && (hi - 0.355).abs() < 0.1,
        "{lo} {hi}"
    );

    let o = kiosk(&[
        "breakeven",
        "--method",
        "empirical",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn breakeven_rejects_invalid_flags() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--margins", "0"],
        vec!["--pi", "1.5"],
        vec!["--pi-step", "0"],
        vec!["--d-max", "1.2"],
        vec!["--method", "guess"],
    ] {
        let mut full = vec!["breakeven", "--out", path(dir.path())];
        full.extend(args.iter().copied());
        assert_eq!(kiosk(&full).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn report_round_trips_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = dir.path().join("run");
    assert!(
        kiosk(&["sweep", "--config", path(&config), "--out", path(&run)])
            .status
            .success()
    );
    let rep = dir.path().join("rep");
    let o = kiosk(&[
        "report",
        "--input",
        path(&run.join("sweep.csv")),
        "--out",
        path(&rep),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&rep)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2 * 2 * 2);
    assert!(names.contains(&"r_margin_by_discount_m0.3.csv".to_string()));

    let text = fs::read_to_string(rep.join("r_customers_by_discount_m0.5.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d,r_customers"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 7);
    assert!(values.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn report_single_margin_and_mc_source() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = dir.path().join("run");
    assert!(
        kiosk(&["sweep", "--config", path(&config), "--out", path(&run)])
            .status
            .success()
    );
    let rep = dir.path().join("rep");
    let o = kiosk(&[
        "report",
        "--input",
        path(&run.join("sweep.csv")),
        "--out",
        path(&rep),
        "--margins",
        "0.5",
        "--metric",
        "r_margin",
        "--axis",
        "by_intention",
        "--source",
        "mc",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<String> = fs::read_dir(&rep)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec!["r_margin_by_intention_m0.5_mc.csv".to_string()]);
}

#[test]
fn report_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = kiosk(&["report", "--input", path(&empty), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let config = write_config(dir.path(), SMALL);
    let run = dir.path().join("run");
    assert!(
        kiosk(&["sweep", "--config", path(&config), "--out", path(&run)])
            .status
            .success()
    );
    let csv = fs::read_to_string(run.join("sweep.csv")).unwrap();

    let header_only = dir.path().join("header.csv");
    fs::write(&header_only, format!("{}\n", csv.lines().next().unwrap())).unwrap();
    let o = kiosk(&["report", "--input", path(&header_only), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));

    // Corrupt the `pi` field of the third data row.
    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[3].split(',').collect();
    fields[2] = "abc";
    lines[3] = fields.join(",");
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = kiosk(&["report", "--input", path(&bad), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("line 4") && msg.contains("pi"), "{msg}");
    assert!(!out.exists());

    // A margin missing from the input.
    let o = kiosk(&[
        "report",
        "--input",
        path(&run.join("sweep.csv")),
        "--out",
        path(&out),
        "--margins",
        "0.4",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

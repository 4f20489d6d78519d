//! End-to-end tests driving the compiled binary: exit codes, file layout,
//! reproducibility, and the chart round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn solace() -> Command {
    Command::new(env!("CARGO_BIN_EXE_solace"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn assert_exit(cmd: &mut Command, code: i32) -> String {
    let out = cmd.output().expect("binary runs");
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A four-file district small enough for debug-build runs: one street from
/// a pair of homes to a plaza, no soil zones.
fn write_micro_district(dir: &Path) {
    let polygon = |x0: f64, y0: f64, side: f64, props: &str| {
        format!(
            r#"{{"type": "Feature", "properties": {{{props}}}, "geometry": {{"type": "Polygon",
               "coordinates": [[[{x0}, {y0}], [{x1}, {y0}], [{x1}, {y1}], [{x0}, {y1}], [{x0}, {y0}]]]}}}}"#,
            x1 = x0 + side,
            y1 = y0 + side,
        )
    };
    let collection = |features: Vec<String>| {
        format!(
            r#"{{"type": "FeatureCollection", "features": [{}]}}"#,
            features.join(",\n")
        )
    };

    let home = r#""height": 5.0, "typology": "home", "vulnerability_class": "masonry""#;
    let buildings = collection(vec![
        polygon(1020.0, 1020.0, 4.0, home),
        polygon(1030.0, 1020.0, 4.0, home),
    ]);
    let roads = collection(vec![format!(
        r#"{{"type": "Feature", "properties": {{"width": 8.0}}, "geometry":
           {{"type": "LineString", "coordinates": [[1000.0, 1000.0], [1100.0, 1000.0]]}}}}"#
    )]);
    let safe_areas = collection(vec![polygon(1090.0, 990.0, 20.0, r#""name": "plaza""#)]);
    let soil = collection(vec![]);

    std::fs::write(dir.join("buildings.geojson"), buildings).unwrap();
    std::fs::write(dir.join("roads.geojson"), roads).unwrap();
    std::fs::write(dir.join("safe_areas.geojson"), safe_areas).unwrap();
    std::fs::write(dir.join("soil.geojson"), soil).unwrap();
}

/// Config over the micro district: eight adults at home, short horizon.
fn write_micro_config(dir: &Path) -> PathBuf {
    write_micro_district(dir);
    let config = format!(
        r#"
[environment]
buildings = "{d}/buildings.geojson"
roads = "{d}/roads.geojson"
safe_areas = "{d}/safe_areas.geojson"
soil = "{d}/soil.geojson"

[scenario]
name = "T"
seed = 7

[[scenarios]]
name = "T"
seed = 7

[sim]
horizon = 120.0

[population]
[population.groups.adult_15_29]
disabled_pct = [0.0, 0.0]
speed_cap = 3.83
[population.groups.adult_15_29.counts]
home = [8, 8]
"#,
        d = dir.display()
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn run_writes_result_and_trace_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let out = dir.path().join("out");
    run_ok(solace()
        .arg("run")
        .arg(&config)
        .args(["--seed", "42", "--out"])
        .arg(&out));

    let result = std::fs::read_to_string(out.join("T_42.csv")).unwrap();
    let trace = std::fs::read_to_string(out.join("T_42_trace.csv")).unwrap();
    assert!(result.starts_with("t,adult_arr,adult_frac,"));
    assert_eq!(result.lines().count(), 122, "header plus 121 frames");
    assert!(trace.starts_with("t,agent_id,event,detail"));
}

#[test]
fn unknown_config_key_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("seed = 7", "intesity = 8");
    std::fs::write(&config, text).unwrap();

    let stderr = assert_exit(
        solace().arg("run").arg(&config).args(["--out", "unused"]),
        1,
    );
    assert!(stderr.contains("intesity"), "{stderr}");
}

#[test]
fn identical_config_and_seed_reproduce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    for out in ["a", "b"] {
        run_ok(solace()
            .arg("run")
            .arg(&config)
            .args(["--seed", "5", "--out"])
            .arg(dir.path().join(out)));
    }
    for name in ["T_5.csv", "T_5_trace.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn effective_config_reproduces_the_run_it_describes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());

    let printed = run_ok(solace()
        .arg("run")
        .arg(&config)
        .args(["--set", "scenario.seed=9", "--print-effective-config"]));
    let effective = dir.path().join("effective.toml");
    std::fs::write(&effective, &printed.stdout).unwrap();

    run_ok(solace()
        .arg("run")
        .arg(&config)
        .args(["--set", "scenario.seed=9", "--out"])
        .arg(dir.path().join("direct")));
    run_ok(solace()
        .arg("run")
        .arg(&effective)
        .arg("--out")
        .arg(dir.path().join("replayed")));

    let a = std::fs::read(dir.path().join("direct/T_9.csv")).unwrap();
    let b = std::fs::read(dir.path().join("replayed/T_9.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn batch_writes_per_run_csvs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let out = dir.path().join("batch");
    run_ok(solace()
        .arg("batch")
        .arg(&config)
        .args(["--seeds", "1..3", "--out"])
        .arg(&out)
        .env("SOLACE_THREADS", "1"));

    for seed in 1..=3 {
        assert!(out.join(format!("T_{seed}.csv")).exists());
        assert!(out.join(format!("T_{seed}_trace.csv")).exists());
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("scenario,category,mean_final_frac,sd,n"));
    for line in summary.lines().skip(1) {
        assert!(line.starts_with("T,"), "{line}");
        assert!(line.ends_with(",3"), "n should be 3: {line}");
    }
    assert_eq!(summary.lines().count(), 6, "header plus five categories");
}

#[test]
fn batch_seed_range_with_equal_ends_is_one_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let out = dir.path().join("single");
    run_ok(solace()
        .arg("batch")
        .arg(&config)
        .args(["--seeds", "5..5", "--out"])
        .arg(&out)
        .env("SOLACE_THREADS", "1"));
    assert!(out.join("T_5.csv").exists());
    assert!(!out.join("T_6.csv").exists());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",1")));
}

#[test]
fn batch_rejects_unknown_scenario_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let stderr = assert_exit(
        solace()
            .arg("batch")
            .arg(&config)
            .args(["--scenarios", "S9", "--seeds", "1", "--out", "unused"]),
        1,
    );
    assert!(stderr.contains("S9"), "{stderr}");
}

#[test]
fn missing_environment_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    std::fs::remove_file(dir.path().join("roads.geojson")).unwrap();
    let stderr = assert_exit(solace().arg("validate").arg(&config), 2);
    assert!(stderr.contains("roads"), "{stderr}");
}

#[test]
fn chart_round_trips_the_csv_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let out = dir.path().join("out");
    run_ok(solace()
        .arg("run")
        .arg(&config)
        .args(["--seed", "3", "--out"])
        .arg(&out));

    let csv_path = out.join("T_3.csv");
    let svg_path = dir.path().join("chart.svg");
    run_ok(solace()
        .arg("chart")
        .arg(&csv_path)
        .args(["--series", "all", "--out"])
        .arg(&svg_path));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let fractions: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(10).unwrap())
        .collect();
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    let values = svg
        .split("data-values=\"")
        .nth(1)
        .and_then(|rest| rest.split('"').next())
        .expect("polyline has data-values");
    assert_eq!(values, fractions.join(" "), "chart must echo CSV fractions");

    let points = svg
        .split("points=\"")
        .nth(1)
        .and_then(|rest| rest.split('"').next())
        .unwrap();
    assert_eq!(
        points.split(' ').count(),
        fractions.len(),
        "one vertex per CSV row"
    );
}

#[test]
fn chart_with_unknown_category_exits_one_and_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let out = dir.path().join("out");
    run_ok(solace()
        .arg("run")
        .arg(&config)
        .args(["--seed", "3", "--out"])
        .arg(&out));
    let stderr = assert_exit(
        solace()
            .arg("chart")
            .arg(out.join("T_3.csv"))
            .args(["--series", "wizard", "--out"])
            .arg(dir.path().join("c.svg")),
        1,
    );
    assert!(stderr.contains("wizard_frac"), "{stderr}");
}

#[test]
fn bundled_defaults_file_matches_builtin_defaults() {
    let repo = Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .unwrap()
        .to_path_buf();
    let empty = tempfile::NamedTempFile::new().unwrap();

    let from_defaults = run_ok(solace()
        .arg("run")
        .arg(repo.join("config/defaults.toml"))
        .arg("--print-effective-config"));
    let from_empty = run_ok(solace()
        .arg("run")
        .arg(empty.path())
        .arg("--print-effective-config"));
    assert_eq!(
        String::from_utf8_lossy(&from_defaults.stdout),
        String::from_utf8_lossy(&from_empty.stdout),
        "config/defaults.toml must spell out exactly the built-in defaults"
    );
}

#[test]
fn bad_thread_cap_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_micro_config(dir.path());
    let stderr = assert_exit(
        solace()
            .arg("batch")
            .arg(&config)
            .args(["--seeds", "1", "--out", "unused"])
            .env("SOLACE_THREADS", "many"),
        1,
    );
    assert!(stderr.contains("SOLACE_THREADS"), "{stderr}");
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cem_core::{elite_count, miss_probability_bound, Variant};
use cem_harness::{compare_variants, variant_family, ExperimentConfig, HarnessError};

fn cem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const ONEMAX10: &str = r#"
variant = "batch"
replicates = 1
base_seed = 11
[problem]
kind = "onemax"
n = 10
[algorithm]
population = 50
budget = 5000
"#;

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# cem-harness "));
    lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn single_replicate_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", ONEMAX10);
    let out = cem(&["run", "--config", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# cem-harness results v1\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    let header = &rows[0];
    let row = &rows[1];
    let col = |name: &str| &row[header.iter().position(|h| h == name).unwrap()];
    assert_eq!(col("seed"), "11");
    assert_eq!(col("variant"), "batch");
    let hit = col("first_hit");
    assert!(
        hit == "never" || hit.parse::<u64>().unwrap() < 5000,
        "{hit}"
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for variant in ["batch", "window", "memoryless"] {
        let body = format!(
            "variant = \"{variant}\"\nreplicates = 6\nbase_seed = 99\n[problem]\nkind = \"trap_k\"\nn = 10\nk = 5\n[algorithm]\nbudget = 3000\n"
        );
        let config = write_config(dir.path(), "c.toml", &body);
        for format in ["csv", "json"] {
            let mut outputs = Vec::new();
            for (i, jobs) in ["1", "4", "4"].iter().enumerate() {
                let path = dir.path().join(format!("{variant}-{i}.{format}"));
                let out = cem(&[
                    "run",
                    "--config",
                    config.to_str().unwrap(),
                    "--jobs",
                    jobs,
                    "--format",
                    format,
                    "--out",
                    path.to_str().unwrap(),
                ]);
                assert!(out.status.success());
                outputs.push(std::fs::read(&path).unwrap());
            }
            assert_eq!(outputs[0], outputs[1], "{variant} {format}");
            assert_eq!(outputs[1], outputs[2], "{variant} {format}");
        }
    }
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", ONEMAX10);
    let a = cem(&["run", "--config", config.to_str().unwrap(), "--seed", "1"]);
    let b = cem(&["run", "--config", config.to_str().unwrap(), "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        &ONEMAX10.replace("replicates = 1", "replicates = 3"),
    );
    let csv = cem(&["run", "--config", config.to_str().unwrap()]);
    let json = cem(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let rows = csv_rows(&String::from_utf8(csv.stdout).unwrap());
    let value: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(value["schema"], "results");
    let json_rows = value["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), rows.len() - 1);
    for (csv_row, json_row) in rows[1..].iter().zip(json_rows) {
        let obj = json_row.as_object().unwrap();
        assert_eq!(obj.keys().count(), rows[0].len());
        for (name, cell) in rows[0].iter().zip(csv_row) {
            let v = &obj[name.as_str()];
            let rendered = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => String::new(),
                other => other.to_string(),
            };
            if let (Ok(a), Ok(b)) = (cell.parse::<f64>(), rendered.parse::<f64>()) {
                assert_eq!(a, b, "{name}");
            } else {
                assert_eq!(cell, &rendered, "{name}");
            }
        }
    }
}

#[test]
fn memoryless_with_too_small_population_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        r#"
        variant = "memoryless"
        [problem]
        kind = "onemax"
        n = 10
        [algorithm]
        population = 10
        rho = 0.1
        budget = 1000
        "#,
    );
    let out = cem(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("population"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", "variant = \"sideways\"\n");
    let out = cem(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_output_directory_is_a_runtime_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", ONEMAX10);
    let target = dir.path().join("absent/out.csv");
    let out = cem(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("absent/out.csv"));
}

#[test]
fn single_alpha_sweep_reports_the_miss_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        r#"
        variant = "window"
        replicates = 5
        [problem]
        kind = "trap_k"
        n = 10
        k = 5
        [algorithm]
        budget = 2000
        "#,
    );
    let out = cem(&[
        "sweep-alpha",
        "--config",
        config.to_str().unwrap(),
        "--alphas",
        "0.3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# cem-harness sweep v1\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    let col = |name: &str| {
        rows[1][rows[0].iter().position(|h| h == name).unwrap()]
            .parse::<f64>()
            .unwrap()
    };
    assert_eq!(col("alpha"), 0.3);
    assert_eq!(col("replicates"), 5.0);
    let alpha1 = 0.3 / elite_count(100, 0.1) as f64;
    let expected = miss_probability_bound(0.5f64.powi(10), alpha1, 10).unwrap();
    assert_eq!(col("miss_bound"), expected);
    assert!((col("miss_bound_full") - (1.0 - 0.5f64.powi(10)) * expected).abs() < 1e-15);
}

#[test]
fn compare_emits_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        r#"
        variant = "batch"
        replicates = 3
        [problem]
        kind = "onemax"
        n = 10
        [algorithm]
        population = 100
        budget = 5000
        "#,
    );
    let out = cem(&["compare", "--config", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 4);
    let variants: Vec<_> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(variants, ["batch", "window", "memoryless"]);
    for r in &rows[1..] {
        assert_eq!(r[1], "5000");
    }
}

#[test]
fn batch_generations_match_the_online_sample_count() {
    let mut config = ExperimentConfig::default();
    config.algorithm.population = 100;
    config.algorithm.budget = 5000;
    let family = variant_family(&config);
    let budgets: Vec<_> = family.iter().map(|c| c.evaluation_budget()).collect();
    assert_eq!(budgets, [5000, 5000, 5000]);
    match family[0].engine_config().unwrap() {
        cem_harness::config::EngineConfig::Batch(b) => assert_eq!(b.generations, 50),
        _ => unreachable!(),
    }
}

#[test]
fn compare_refuses_mismatched_budgets() {
    let mut config = ExperimentConfig {
        replicates: 1,
        ..ExperimentConfig::default()
    };
    config.algorithm.budget = 5000;
    let mut family = variant_family(&config);
    family[2].algorithm.budget = 6000;
    let err = compare_variants(&family, Some(1)).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
    assert!(err.to_string().contains("budget"), "{err}");

    let mut family = variant_family(&config);
    family[1].base_seed = 1;
    assert!(compare_variants(&family, Some(1)).is_err());
}

#[test]
fn onemax_20_compare_hits_at_least_90_percent() {
    let config = ExperimentConfig {
        replicates: 50,
        base_seed: 2024,
        ..ExperimentConfig::default()
    };
    let outcome = compare_variants(&variant_family(&config), None).unwrap();
    assert!(outcome.failures.is_empty());
    let rows = outcome.rows;
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(row.budget, 50_000);
        assert!(
            row.hit_rate >= 0.9,
            "{:?} hit rate {}",
            row.variant,
            row.hit_rate
        );
    }
    assert_eq!(
        rows.iter().map(|r| r.variant).collect::<Vec<_>>(),
        Variant::ALL
    );
}

#[test]
fn config_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", ONEMAX10);
    let dumped = dir.path().join("dump.toml");
    let out = cem(&[
        "config-dump",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dumped.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let original = ExperimentConfig::load(&config).unwrap();
    let reloaded = ExperimentConfig::load(&dumped).unwrap();
    assert_eq!(original, reloaded);
    assert_eq!(reloaded.algorithm.rho, 0.1);
}

#[test]
fn calibrate_reports_the_discrepancy() {
    let out = cem(&["calibrate-delta0", "--reps", "20000", "--format", "json"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &value["rows"][0];
    let calibrated = row["delta0_calibrated"].as_f64().unwrap();
    let quantile = row["delta0_quantile"].as_f64().unwrap();
    assert!((calibrated - 0.0503).abs() < 0.002, "{calibrated}");
    assert!((quantile - 0.20987).abs() < 1e-4, "{quantile}");
    assert!((row["discrepancy"].as_f64().unwrap() - quantile / calibrated).abs() < 1e-12);

    let small = cem(&["calibrate-delta0", "--reps", "10", "--population", "100"]);
    assert_eq!(small.status.code(), Some(2));
}

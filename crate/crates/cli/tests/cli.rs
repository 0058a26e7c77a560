use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trajlens::pipeline::{BENCHMARK_DIR, REPORT_DIR, REPORT_FILE, RESULTS_DIR, RESULTS_FILE};
use trajlens::sample::City;
use trajlens::{CliError, Loaded};
use trajlens_core::ingest::write_csv;

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample")
}

fn trajlens(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajlens"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config_errors(r: Result<Loaded, CliError>) -> Vec<String> {
    match r {
        Err(CliError::Config(v)) => v,
        other => panic!("expected a config error, got {other:?}"),
    }
}

const MINIMAL: &str = r#"
[data]
trajectories = "${DATA_DIR}/trips.csv"

[gateway]
model = "${MODEL}"
"#;

#[test]
fn environment_variables_are_interpolated() {
    let lookup = |k: &str| match k {
        "DATA_DIR" => Some("/data".to_string()),
        "MODEL" => Some("small-model".to_string()),
        _ => None,
    };
    let l = Loaded::parse(MINIMAL, Path::new("/cfg"), &lookup).unwrap();
    assert_eq!(l.config.data.trajectories, PathBuf::from("/data/trips.csv"));
    assert_eq!(l.config.gateway.model, "small-model");

    let errs = config_errors(Loaded::parse(MINIMAL, Path::new("/cfg"), &|_| None));
    assert_eq!(
        errs,
        vec![
            "environment variable DATA_DIR is not set".to_string(),
            "environment variable MODEL is not set".to_string()
        ]
    );
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "[data]\ntrajectories = \"t.csv\"\ncolour = \"red\"\n";
    let errs = config_errors(Loaded::parse(text, Path::new("."), &|_| None));
    assert!(errs[0].contains("colour"), "{errs:?}");
}

#[test]
fn every_violation_is_reported() {
    let text = r#"
jobs = 0
[data]
trajectories = "missing.csv"
region = "atlantis"
[tokenize]
delta = -1.0
layers = []
[anomaly]
mu = 1.5
[gateway]
max_in_flight = 0
"#;
    let l = Loaded::parse(text, Path::new("/nowhere"), &|_| None).unwrap();
    let v = l.violations();
    for needle in [
        "missing.csv",
        "atlantis",
        "delta",
        "layers",
        "mu",
        "jobs",
        "max_in_flight",
    ] {
        assert!(v.iter().any(|m| m.contains(needle)), "{needle} not in {v:?}");
    }
}

#[test]
fn relative_paths_follow_the_config_file() {
    let l = Loaded::load(&sample().join("config.toml")).unwrap();
    assert_eq!(l.trajectories_path(), sample().join("trajectories.csv"));
    assert_eq!(l.gateway_config().fixtures.unwrap(), sample().join("fixtures.jsonl"));
    assert_eq!(l.filter_policy().theta_poi, 100.0);
    l.validate().unwrap();
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = trajlens(&["segment", "-c", "does/not/exist.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let config = sample().join("config.toml");
    let config = config.to_str().unwrap();
    let out = trajlens(&["report", "-c", config], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join(REPORT_DIR).join(REPORT_FILE)).unwrap();
    assert!(report.contains("\"total\": 0"));

    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    for c in ["segment", "assemble"] {
        assert!(trajlens(&[c, "-c", config], tmp.path()).status.success());
    }
    let out = trajlens(
        &["run", "-c", config, "--fixtures", empty.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no fixture"));
}

#[test]
fn remote_backend_needs_its_credential() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("remote.toml");
    let text = fs::read_to_string(sample().join("config.toml"))
        .unwrap()
        .replace(
            "[gateway]\nbackend = \"mock\"",
            "[gateway]\nbackend = \"remote\"\napi_key_env = \"TRAJLENS_TEST_SURELY_UNSET_KEY\"",
        )
        .replace(
            "\"trajectories.csv\"",
            &format!("{:?}", sample().join("trajectories.csv")),
        )
        .replace(
            "\"context.geojson\"",
            &format!("{:?}", sample().join("context.geojson")),
        )
        .replace("\"fixtures.jsonl\"", &format!("{:?}", sample().join("fixtures.jsonl")));
    fs::write(&config, text).unwrap();
    let config = config.to_str().unwrap();
    assert!(trajlens(&["segment", "-c", config], tmp.path()).status.success());
    assert!(trajlens(&["assemble", "-c", config], tmp.path()).status.success());
    let out = trajlens(&["run", "-c", config], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("TRAJLENS_TEST_SURELY_UNSET_KEY"));
}

#[test]
fn sample_pipeline_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let config = sample().join("config.toml");
    let config = config.to_str().unwrap();
    for c in ["segment", "assemble", "run", "report"] {
        let out = trajlens(&[c, "-c", config, "--jobs", "2"], tmp.path());
        assert!(out.status.success(), "{c}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let results = trajlens::pipeline::read_results(&tmp.path().join(RESULTS_DIR).join(RESULTS_FILE)).unwrap();
    assert_eq!(results.len(), 10);
    assert_eq!(results.iter().filter(|r| !r.result.parse_ok).count(), 1);
    assert!(results.iter().all(|r| r.attempts == 1));
    for stage in ["segments", "sequences", "results", "report"] {
        assert!(tmp.path().join(stage).join("run_manifest.json").exists(), "{stage}");
    }
}

#[test]
fn synthesised_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    let pool = City::sample().trips("p", 60, 3);
    let csv = tmp.path().join("pool.csv");
    write_csv(&pool, fs::File::create(&csv).unwrap()).unwrap();
    let config = sample().join("config.toml");
    let out = trajlens(
        &[
            "synth-anomalies",
            "-c",
            config.to_str().unwrap(),
            "--trajectories",
            csv.to_str().unwrap(),
            "--seed",
            "5",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(tmp.path().join(BENCHMARK_DIR).join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 3);
    assert_eq!(manifest.matches("\"anomaly\":\"detour\"").count(), 2);

    let small = trajlens(&["synth-anomalies", "-c", config.to_str().unwrap()], tmp.path());
    assert_eq!(small.status.code(), Some(3));
}

mod properties {
    use proptest::prelude::*;
    use trajlens::config::interpolate;
    use trajlens::pipeline::item_name;

    proptest! {
        #[test]
        fn interpolation_substitutes_exactly(prefix in "[a-z /.]{0,12}", value in "[A-Za-z0-9/._-]{0,16}", suffix in "[a-z /.]{0,12}") {
            let mut v = toml::Value::String(format!("{prefix}${{SOME_VAR}}{suffix}"));
            let mut missing = Vec::new();
            interpolate(&mut v, &|k| (k == "SOME_VAR").then(|| value.clone()), &mut missing);
            prop_assert!(missing.is_empty());
            prop_assert_eq!(v.as_str().unwrap(), format!("{prefix}{value}{suffix}"));
        }

        #[test]
        fn plain_strings_are_untouched(s in "[^$]{0,40}") {
            let mut v = toml::Value::String(s.clone());
            let mut missing = Vec::new();
            interpolate(&mut v, &|_| None, &mut missing);
            prop_assert!(missing.is_empty());
            prop_assert_eq!(v.as_str().unwrap(), s);
        }

        #[test]
        fn item_names_are_safe_and_ordered(a in 0usize..9999, b in 0usize..9999, id in ".{0,20}") {
            let name = item_name(a, &id);
            prop_assert!(name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)));
            if a < b {
                prop_assert!(item_name(a, &id) < item_name(b, &id));
            }
        }
    }
}

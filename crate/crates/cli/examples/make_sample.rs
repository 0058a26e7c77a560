//! Regenerates `data/sample/`: ten synthetic trips, the city context, a
//! travel-time config, mock fixtures keyed by request digest and the golden
//! report produced by replaying them.
//!
//! cargo run -p trajlens --example make_sample

use std::fs;
use std::path::{Path, PathBuf};

use trajlens::pipeline::{self, REPORT_DIR, REPORT_FILE};
use trajlens::sample::City;
use trajlens::{Loaded, Overrides};
use trajlens_core::context::to_geojson;
use trajlens_core::ingest::write_csv;
use trajlens_core::labels::Label;
use trajlens_core::tokenize::text::format_time;
use trajlens_gateway::{request_digest, FixtureEntry};

const CONFIG: &str = r#"# Travel-time estimation on the synthetic sample city, replayed from fixtures.
seed = 7
output = "out"

[data]
trajectories = "trajectories.csv"
context = "context.geojson"
region = "chengdu"
city = "Chengdu"

[tokenize]
delta = 0.15
layers = ["poi", "road", "traffic_light"]
tiles = { kind = "checkerboard" }

[style]
image_px = 384

[task]
kind = "tte"

[gateway]
backend = "mock"
fixtures = "fixtures.jsonl"
model = "gpt-4o-mini"
max_in_flight = 4
"#;

/// Relative error of each scripted estimate; one answer is given as an
/// arrival time and one is unusable.
const ERRORS: [f64; 10] = [-0.12, 0.08, 0.15, -0.05, 0.22, -0.18, 0.03, 0.10, -0.09, 0.04];
const ARRIVAL_ANSWER: usize = 3;
const BROKEN_ANSWER: usize = 7;

fn answer(k: usize, truth_s: f64, start: i64) -> String {
    let est = (truth_s * (1.0 + ERRORS[k])).round() as i64;
    match k {
        BROKEN_ANSWER => "The route is unclear from the images, so I cannot give an estimate.".to_string(),
        ARRIVAL_ANSWER => format!(
            "The trip follows an arterial with two signals.\nFinal Answer: {}",
            format_time(start + est)
        ),
        _ => format!(
            "Segment analysis: steady urban driving with signal delays.\nTotal: {est} s.\nFinal Answer: {est} seconds"
        ),
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample");
    fs::create_dir_all(&root).unwrap();
    let city = City::sample();
    let trips = city.trips("cd", 10, 2024);
    write_csv(&trips, fs::File::create(root.join("trajectories.csv")).unwrap()).unwrap();
    let geo = serde_json::to_string_pretty(&to_geojson(&city.db)).unwrap();
    fs::write(root.join("context.geojson"), geo + "\n").unwrap();
    fs::write(root.join("config.toml"), CONFIG).unwrap();
    let fixtures = root.join("fixtures.jsonl");
    fs::write(&fixtures, "").unwrap();

    let scratch = tempfile::tempdir().unwrap();
    let load = |out: &Path| {
        let mut l = Loaded::load(&root.join("config.toml")).unwrap();
        l.apply(&Overrides {
            output: Some(out.to_path_buf()),
            ..Overrides::default()
        });
        l.validate().unwrap();
        l
    };
    let l = load(scratch.path());
    pipeline::cmd_segment(&l).unwrap();
    pipeline::cmd_assemble(&l).unwrap();
    let (_, prepared) = pipeline::prepare_requests(&l).unwrap();
    let mut lines = String::new();
    for (k, p) in prepared.iter().enumerate() {
        let Some(Label::TravelTime(truth)) = p.truth else {
            panic!("sample trips carry travel times")
        };
        let entry = FixtureEntry {
            digest: request_digest(&p.request),
            text: answer(k, truth, p.start_time),
            usage: None,
            note: Some(p.trajectory_id.clone()),
        };
        lines.push_str(&serde_json::to_string(&entry).unwrap());
        lines.push('\n');
    }
    fs::write(&fixtures, lines).unwrap();

    pipeline::cmd_run(&l).unwrap();
    let report = pipeline::cmd_report(&l).unwrap();
    fs::copy(
        scratch.path().join(REPORT_DIR).join(REPORT_FILE),
        root.join("golden_report.json"),
    )
    .unwrap();
    print!("{}", report.table());
    println!("wrote {}", root.display());
}

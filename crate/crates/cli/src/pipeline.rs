//! Command implementations. Each stage reads the previous stage's files
//! under the output directory and writes its own subdirectory plus a run
//! manifest.
//!
//! ```text
//! out/segments/NNNN_<id>.json
//! out/sequences/NNNN_<id>/{manifest.json,pairs.jsonl,*.png}
//! out/results/{results.jsonl,usage.json}
//! out/report/{report.json,report.txt}
//! out/optimize/{<task>.prompt,trace.jsonl}
//! out/benchmark/{trajectories.csv,manifest.jsonl}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use trajlens_core::context::ContextDb;
use trajlens_core::ingest::{ingest, write_csv};
use trajlens_core::labels::Label;
use trajlens_core::multiview::{assemble, read_sequence, write_sequence, AssembleOptions, InterleavedSequence};
use trajlens_core::segmentation::{segment, Segmentation};
use trajlens_core::tasks::{
    build_ad_benchmark, mp_split, score, MetricsReport, RegionGrid, TaskKind, TaskResult, TaskSpec,
};
use trajlens_core::tokenize::{Checkerboard, DirTiles, HttpTiles, TileSource};
use trajlens_core::traj::Trajectory;
use trajlens_gateway::{request_digest, ChatRequest, Gateway, GatewayError, ModelReport, Usage};
use trajlens_prompt::{
    builtin, optimize_default, text_only, user_content, OptimizeError, OptimizeOptions, Seed, SeedSet, TaskPrompt,
};

use crate::config::{Loaded, TilesConfig};
use crate::error::CliError;
use crate::manifest::RunManifest;

pub const SEGMENTS_DIR: &str = "segments";
pub const SEQUENCES_DIR: &str = "sequences";
pub const RESULTS_DIR: &str = "results";
pub const REPORT_DIR: &str = "report";
pub const OPTIMIZE_DIR: &str = "optimize";
pub const BENCHMARK_DIR: &str = "benchmark";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const REPORT_FILE: &str = "report.json";

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

/// Clears and recreates a stage directory so reruns leave no stale files.
fn fresh_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// File-system-safe name that also keeps dataset order: `NNNN_<id>`.
pub fn item_name(index: usize, id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .take(80)
        .collect();
    format!("{index:04}_{safe}")
}

pub fn load_trajectories(l: &Loaded) -> Result<Vec<Trajectory>, CliError> {
    let path = l.trajectories_path();
    let format = l
        .format()
        .ok_or_else(|| CliError::Data("unknown trajectory format".into()))?;
    let trajs = ingest(&path, format).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if trajs.is_empty() {
        return Err(CliError::Data(format!("{} holds no trajectories", path.display())));
    }
    Ok(trajs)
}

pub fn load_context(l: &Loaded) -> Result<ContextDb, CliError> {
    match &l.config.data.context {
        Some(p) => {
            let p = l.resolve(p);
            ContextDb::load(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
        None => Ok(ContextDb::empty()),
    }
}

pub fn tile_source(l: &Loaded) -> Box<dyn TileSource> {
    match &l.config.tokenize.tiles {
        TilesConfig::Checkerboard { light, dark, squares } => Box::new(Checkerboard::new(light.0, dark.0, *squares)),
        TilesConfig::Dir { root } => Box::new(DirTiles::new(l.resolve(root))),
        TilesConfig::Http { url, cache } => Box::new(HttpTiles::new(url.clone(), l.resolve(cache))),
    }
}

/// What the model sees of `traj` for `task`: mobility prediction hides the
/// trailing points.
pub fn task_input(task: TaskKind, traj: &Trajectory) -> Trajectory {
    let spec = TaskSpec::new(task);
    if spec.truncate_fraction > 0.0 {
        mp_split(traj, spec.truncate_fraction).0
    } else {
        traj.clone()
    }
}

/// Ground truth: the dataset label when present, otherwise derived from the
/// full trajectory where the task allows it.
pub fn truth(task: TaskKind, traj: &Trajectory, grid: Option<&RegionGrid>) -> Option<Label> {
    match (task, traj.label()) {
        (TaskKind::Tte, Some(l @ Label::TravelTime(_))) => Some(l.clone()),
        (TaskKind::Tte, _) => Some(Label::TravelTime(traj.duration_s() as f64)),
        (TaskKind::Ad, Some(l @ Label::Anomaly(_))) => Some(l.clone()),
        (TaskKind::Mp, Some(l @ Label::Region(_))) => Some(l.clone()),
        (TaskKind::Mp, _) => grid.map(|g| Label::Region(g.region_of(traj.last().pos()))),
        (TaskKind::Tmi, Some(l @ Label::Mode(_))) => Some(l.clone()),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub trajectory_id: String,
    pub task: TaskKind,
    /// Points after task-specific truncation.
    pub points: usize,
    pub segmentation: Segmentation,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub command: &'static str,
    pub dir: PathBuf,
    pub items: usize,
    pub warnings: usize,
}

pub fn cmd_segment(l: &Loaded) -> Result<StageSummary, CliError> {
    let trajs = load_trajectories(l)?;
    let db = load_context(l)?;
    let task = l.config.task.kind;
    let weights = l.config.segmentation;
    let out = l.output_dir().join(SEGMENTS_DIR);
    fresh_dir(&out)?;
    let records: Vec<(String, SegmentRecord)> = trajs
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let input = task_input(task, t);
            let seg = segment(&input, &db, &weights);
            (
                item_name(i, t.id()),
                SegmentRecord {
                    trajectory_id: t.id().to_string(),
                    task,
                    points: input.len(),
                    segmentation: seg,
                },
            )
        })
        .collect();
    let mut files = Vec::new();
    for (name, rec) in &records {
        let path = out.join(format!("{name}.json"));
        fs::write(&path, to_json(rec)).map_err(io_err(&path))?;
        files.push(format!("{name}.json"));
    }
    let segments: usize = records.iter().map(|(_, r)| r.segmentation.spans.len()).sum();
    RunManifest::new("segment", l)
        .input_file("trajectories", l, &l.config.data.trajectories)?
        .optional_input("context", l, l.config.data.context.as_deref())?
        .outputs(files)
        .count("trajectories", records.len())
        .count("segments", segments)
        .write(&out)?;
    info!("segmented {} trajectories into {segments} segments", records.len());
    Ok(StageSummary {
        command: "segment",
        dir: out,
        items: records.len(),
        warnings: 0,
    })
}

fn read_segments(l: &Loaded) -> Result<Vec<(String, SegmentRecord)>, CliError> {
    let dir = l.output_dir().join(SEGMENTS_DIR);
    if !dir.is_dir() {
        return Err(CliError::Data(format!(
            "{} is missing; run `segment` first",
            dir.display()
        )));
    }
    let mut names: Vec<String> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json") && n != crate::manifest::RUN_MANIFEST)
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let path = dir.join(&n);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let rec: SegmentRecord =
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            Ok((n.trim_end_matches(".json").to_string(), rec))
        })
        .collect()
}

pub fn cmd_assemble(l: &Loaded) -> Result<StageSummary, CliError> {
    let trajs = load_trajectories(l)?;
    let db = load_context(l)?;
    let tiles = tile_source(l);
    let segs = read_segments(l)?;
    let task = l.config.task.kind;
    let by_id: BTreeMap<&str, &Trajectory> = trajs.iter().map(|t| (t.id(), t)).collect();
    let opts = AssembleOptions {
        db: &db,
        policy: l.filter_policy(),
        style: l.config.style.clone(),
        tiles: tiles.as_ref(),
        layers: l.config.tokenize.layers.clone(),
        mask: TaskSpec::new(task).mask,
        delta: l.config.tokenize.delta,
    };
    let out = l.output_dir().join(SEQUENCES_DIR);
    fresh_dir(&out)?;
    let written: Vec<(String, usize, usize)> = segs
        .par_iter()
        .map(|(name, rec)| {
            if rec.task != task {
                return Err(CliError::Data(format!(
                    "segments were computed for task {} but the config asks for {task}; rerun `segment`",
                    rec.task
                )));
            }
            let traj = by_id.get(rec.trajectory_id.as_str()).ok_or_else(|| {
                CliError::Data(format!(
                    "segment file {name} refers to unknown trajectory {}",
                    rec.trajectory_id
                ))
            })?;
            let input = task_input(task, traj);
            let seq = assemble(&input, &rec.segmentation, &opts).map_err(CliError::data)?;
            write_sequence(&seq, &out.join(name)).map_err(CliError::data)?;
            Ok((name.clone(), seq.manifest.items, seq.manifest.warnings))
        })
        .collect::<Result<_, _>>()?;
    let items: usize = written.iter().map(|w| w.1).sum();
    let warnings: usize = written.iter().map(|w| w.2).sum();
    RunManifest::new("assemble", l)
        .input_file("trajectories", l, &l.config.data.trajectories)?
        .optional_input("context", l, l.config.data.context.as_deref())?
        .extra("tiles", json!(tiles.describe()))
        .outputs(written.iter().map(|w| w.0.clone()).collect())
        .count("sequences", written.len())
        .count("items", items)
        .count("warnings", warnings)
        .write(&out)?;
    info!(
        "assembled {} sequences with {items} items ({warnings} warnings)",
        written.len()
    );
    Ok(StageSummary {
        command: "assemble",
        dir: out,
        items: written.len(),
        warnings,
    })
}

/// The initial prompt with its location facts bound.
pub fn load_prompt(l: &Loaded, grid: Option<&RegionGrid>) -> Result<TaskPrompt, CliError> {
    let task = l.config.task.kind;
    let prompt = match &l.config.task.prompt {
        Some(p) => TaskPrompt::load(&l.resolve(p)).map_err(|e| CliError::Config(vec![e.to_string()]))?,
        None => builtin(task),
    };
    if prompt.kind != task {
        return Err(CliError::Config(vec![format!(
            "prompt is for task {} but task.kind is {task}",
            prompt.kind
        )]));
    }
    let mut facts = l.config.task.facts.clone();
    let city = l
        .config
        .data
        .city
        .clone()
        .or_else(|| l.config.data.region.clone())
        .unwrap_or_else(|| "an unnamed city".to_string());
    facts.entry("city".into()).or_insert(city);
    if let Some(g) = grid {
        facts.entry("region_grid".into()).or_insert_with(|| g.describe());
    }
    prompt
        .instantiate(&facts)
        .map_err(|e| CliError::Config(vec![e.to_string()]))
}

/// One model request per assembled trajectory.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub trajectory_id: String,
    pub request: ChatRequest,
    pub text_only: String,
    pub start_time: i64,
    pub truth: Option<Label>,
}

fn preface(task: TaskKind, seq: &InterleavedSequence) -> String {
    let m = &seq.manifest;
    let segments = m.partitions_per_view.iter().max().copied().unwrap_or(0);
    let hidden = match task {
        TaskKind::Mp => " The final part of the trip is hidden.",
        _ => "",
    };
    format!(
        "Trajectory {}: {} views over {segments} segment(s), {} image-text pairs.{hidden}",
        m.trajectory_id,
        m.views.len(),
        m.items
    )
}

fn read_sequences(l: &Loaded) -> Result<Vec<(String, InterleavedSequence)>, CliError> {
    let dir = l.output_dir().join(SEQUENCES_DIR);
    if !dir.is_dir() {
        return Err(CliError::Data(format!(
            "{} is missing; run `assemble` first",
            dir.display()
        )));
    }
    let mut names: Vec<String> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .into_par_iter()
        .map(|n| {
            let seq = read_sequence(&dir.join(&n)).map_err(CliError::data)?;
            Ok((n, seq))
        })
        .collect()
}

/// Region grid over the whole dataset, for mobility prediction.
pub fn region_grid(l: &Loaded, trajs: &[Trajectory]) -> Option<RegionGrid> {
    let n = l.config.task.region_grid;
    (l.config.task.kind == TaskKind::Mp)
        .then(|| RegionGrid::covering(trajs, n, n))
        .flatten()
}

pub fn prepare_requests(l: &Loaded) -> Result<(TaskPrompt, Vec<Prepared>), CliError> {
    let trajs = load_trajectories(l)?;
    let task = l.config.task.kind;
    let grid = region_grid(l, &trajs);
    if task == TaskKind::Mp && grid.is_none() {
        return Err(CliError::Data(
            "cannot build a region grid over a degenerate dataset extent".into(),
        ));
    }
    let prompt = load_prompt(l, grid.as_ref())?;
    let system = prompt
        .system_text()
        .map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let by_id: BTreeMap<&str, &Trajectory> = trajs.iter().map(|t| (t.id(), t)).collect();
    let gcfg = l.gateway_config();
    let prepared = read_sequences(l)?
        .into_iter()
        .map(|(name, seq)| {
            let id = seq.manifest.trajectory_id.clone();
            let traj = by_id
                .get(id.as_str())
                .ok_or_else(|| CliError::Data(format!("sequence {name} refers to unknown trajectory {id}")))?;
            let content = user_content(&seq, &preface(task, &seq));
            Ok(Prepared {
                request: gcfg.request(system.clone(), content),
                text_only: text_only(&seq),
                start_time: traj.first().t,
                truth: truth(task, traj, grid.as_ref()),
                trajectory_id: id,
                name,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if prepared.is_empty() {
        return Err(CliError::Data("no assembled sequences".into()));
    }
    Ok((prompt, prepared))
}

fn gateway(l: &Loaded) -> Result<Gateway, CliError> {
    Gateway::from_config(l.gateway_config()).map_err(|e| match e {
        GatewayError::Config(v) => CliError::Config(v),
        other => CliError::Gateway(other.to_string()),
    })
}

/// One line of the results store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub result: TaskResult,
    pub digest: String,
    pub attempts: u32,
    pub usage: Usage,
}

pub fn cmd_run(l: &Loaded) -> Result<StageSummary, CliError> {
    let (_, prepared) = prepare_requests(l)?;
    let gw = gateway(l)?;
    let task = l.config.task.kind;
    let records: Vec<RunRecord> = prepared
        .par_iter()
        .map(|p| {
            let resp = gw
                .send(&p.request)
                .map_err(|e| CliError::Gateway(format!("trajectory {}: {e}", p.trajectory_id)))?;
            Ok(RunRecord {
                result: TaskResult::new(&p.trajectory_id, task, &resp.text, Some(p.start_time), p.truth.clone()),
                digest: request_digest(&p.request),
                attempts: resp.attempts,
                usage: resp.usage,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let out = l.output_dir().join(RESULTS_DIR);
    fresh_dir(&out)?;
    let path = out.join(RESULTS_FILE);
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("serialisable"));
        text.push('\n');
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    let usage: Vec<ModelReport> = gw.usage_report();
    let usage_path = out.join("usage.json");
    fs::write(&usage_path, to_json(&usage)).map_err(io_err(&usage_path))?;
    let parsed = records.iter().filter(|r| r.result.parse_ok).count();
    RunManifest::new("run", l)
        .input_file("trajectories", l, &l.config.data.trajectories)?
        .optional_input("fixtures", l, l.config.gateway.fixtures.as_deref())?
        .extra("backend", json!(gw.backend()))
        .outputs(vec![RESULTS_FILE.into(), "usage.json".into()])
        .count("results", records.len())
        .count("parsed", parsed)
        .write(&out)?;
    info!("{} results, {parsed} parsed", records.len());
    Ok(StageSummary {
        command: "run",
        dir: out,
        items: records.len(),
        warnings: records.len() - parsed,
    })
}

pub fn read_results(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RunRecord =
            serde_json::from_str(&line).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

/// Scores the results store. An empty or missing store still writes a
/// coverage-0 report, then fails with a data error.
pub fn cmd_report(l: &Loaded) -> Result<MetricsReport, CliError> {
    let task = l.config.task.kind;
    let results_path = l.output_dir().join(RESULTS_DIR).join(RESULTS_FILE);
    let records = if results_path.exists() {
        read_results(&results_path)?
    } else {
        Vec::new()
    };
    let results: Vec<TaskResult> = records.into_iter().map(|r| r.result).collect();
    let report = score(task, &results);
    let out = l.output_dir().join(REPORT_DIR);
    fresh_dir(&out)?;
    let json_path = out.join(REPORT_FILE);
    fs::write(&json_path, to_json(&report)).map_err(io_err(&json_path))?;
    let txt_path = out.join("report.txt");
    fs::write(&txt_path, report.table()).map_err(io_err(&txt_path))?;
    RunManifest::new("report", l)
        .outputs(vec![REPORT_FILE.into(), "report.txt".into()])
        .count("results", report.total)
        .write(&out)?;
    if report.total == 0 {
        return Err(CliError::Data(format!(
            "no {task} results in {}",
            results_path.display()
        )));
    }
    Ok(report)
}

pub fn cmd_optimize(l: &Loaded) -> Result<(TaskPrompt, trajlens_prompt::OptimizationTrace), CliError> {
    let (prompt, prepared) = prepare_requests(l)?;
    let task = l.config.task.kind;
    let seeds: Vec<Seed> = prepared
        .iter()
        .filter_map(|p| {
            p.truth.clone().map(|truth| Seed {
                trajectory_id: p.trajectory_id.clone(),
                content: p.request.content.clone(),
                text_only: p.text_only.clone(),
                start_time: Some(p.start_time),
                truth,
            })
        })
        .take(l.config.optimize.seeds)
        .collect();
    if seeds.is_empty() {
        return Err(CliError::Data(format!(
            "no labelled {task} trajectories to use as seeds"
        )));
    }
    let seeds = SeedSet::new(task, seeds).map_err(CliError::data)?;
    let gw = gateway(l)?;
    let opts = OptimizeOptions {
        target: l
            .config
            .optimize
            .target
            .unwrap_or_else(|| trajlens_prompt::default_target(task)),
        max_rounds: l.config.optimize.max_rounds,
        tte_tolerance: l.config.optimize.tte_tolerance,
    };
    let out = l.output_dir().join(OPTIMIZE_DIR);
    fresh_dir(&out)?;
    let trace_path = out.join("trace.jsonl");
    let (best, trace) = match optimize_default(&prompt, &seeds, &gw, &opts) {
        Ok(r) => r,
        Err(OptimizeError::Gateway { source, trace, round }) => {
            trace.write_jsonl(&trace_path).map_err(io_err(&trace_path))?;
            return Err(CliError::Gateway(format!("round {round}: {source}")));
        }
        Err(e) => return Err(CliError::Data(e.to_string())),
    };
    trace.write_jsonl(&trace_path).map_err(io_err(&trace_path))?;
    let prompt_name = format!("{task}.prompt");
    let prompt_path = out.join(&prompt_name);
    best.save(&prompt_path).map_err(CliError::data)?;
    RunManifest::new("optimize", l)
        .input_file("trajectories", l, &l.config.data.trajectories)?
        .extra("stop_reason", json!(trace.stop_reason))
        .extra("best_version", json!(trace.best_version))
        .outputs(vec![prompt_name, "trace.jsonl".into()])
        .count("rounds", trace.rounds.len())
        .count("seeds", seeds.seeds().len())
        .write(&out)?;
    Ok((best, trace))
}

pub fn cmd_synth_anomalies(l: &Loaded) -> Result<StageSummary, CliError> {
    let pool = load_trajectories(l)?;
    let params = l.config.anomaly;
    let bench = build_ad_benchmark(&pool, &params, l.config.seed).map_err(CliError::data)?;
    let out = l.output_dir().join(BENCHMARK_DIR);
    fresh_dir(&out)?;
    let csv_path = out.join("trajectories.csv");
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(&bench.trajectories, file).map_err(CliError::data)?;
    let manifest_path = out.join("manifest.jsonl");
    let mut f = fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?;
    for r in &bench.manifest {
        writeln!(f, "{}", serde_json::to_string(r).expect("serialisable")).map_err(io_err(&manifest_path))?;
    }
    RunManifest::new("synth-anomalies", l)
        .input_file("trajectories", l, &l.config.data.trajectories)?
        .extra("params", serde_json::to_value(params).unwrap_or(Value::Null))
        .outputs(vec!["trajectories.csv".into(), "manifest.jsonl".into()])
        .count("pool", pool.len())
        .count("anomalies", bench.anomalies())
        .write(&out)?;
    Ok(StageSummary {
        command: "synth-anomalies",
        dir: out,
        items: bench.anomalies(),
        warnings: 0,
    })
}

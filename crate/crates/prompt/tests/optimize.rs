use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use trajlens_core::labels::{Label, TransportMode};
use trajlens_core::tasks::TaskKind;
use trajlens_gateway::{
    ChatRequest, Completion, FnTransport, Gateway, GatewayConfig, Part, RetryPolicy, TransportError, Usage,
};
use trajlens_prompt::*;

fn raw_seeds(n: usize) -> Vec<Seed> {
    (0..n)
        .map(|i| Seed {
            trajectory_id: format!("s{i}"),
            content: vec![Part::text(format!("seed {i}"))],
            text_only: format!("segment text {i}"),
            start_time: None,
            truth: Label::Mode(TransportMode::Car),
        })
        .collect()
}

fn seeds(n: usize) -> SeedSet {
    SeedSet::new(TaskKind::Tmi, raw_seeds(n)).unwrap()
}

fn reply(text: &str) -> Result<Completion, TransportError> {
    Ok(Completion {
        text: text.to_string(),
        usage: Usage::default(),
    })
}

fn seed_index(req: &ChatRequest) -> usize {
    match &req.content[0] {
        Part::Text { text } => text.trim_start_matches("seed ").parse().unwrap(),
        _ => unreachable!(),
    }
}

/// Scripted mock. `answer(version, seed)` decides whether the seed is
/// answered correctly under the prompt version encoded in the task text;
/// `refine(n)` is the n-th refinement reply.
fn scripted(
    answer: impl Fn(u32, usize) -> bool + Send + Sync + 'static,
    refine: impl Fn(u32) -> String + Send + Sync + 'static,
    systems: Arc<Mutex<Vec<String>>>,
    refinements: Arc<AtomicU32>,
) -> Gateway {
    let t = FnTransport::new(move |req: &ChatRequest| {
        if req.system == REFINER_SYSTEM {
            let n = refinements.fetch_add(1, Ordering::SeqCst) + 1;
            return reply(&refine(n));
        }
        systems.lock().unwrap().push(req.system.clone());
        let version = req
            .system
            .split("revision ")
            .nth(1)
            .and_then(|s| s.split_whitespace().next())
            .and_then(|v| v.trim_end_matches('.').parse().ok())
            .unwrap_or(1);
        let mode = if answer(version, seed_index(req)) {
            "car"
        } else {
            "walk"
        };
        reply(&format!("Steady speeds on arterials.\nFinal Answer:\n{mode}"))
    });
    let cfg = GatewayConfig {
        retry: RetryPolicy {
            max_attempts: 1,
            ..RetryPolicy::default()
        },
        ..GatewayConfig::default()
    };
    Gateway::with_transport(cfg, Arc::new(t)).unwrap()
}

fn refinement(n: u32) -> String {
    format!(
        "Here is the improved prompt.\n[task]\nIdentify the mode, revision {}.\n[knowledge]\nCars cruise on arterials.\n",
        n + 1
    )
}

fn opts(max_rounds: u32) -> OptimizeOptions {
    OptimizeOptions {
        max_rounds,
        ..OptimizeOptions::for_task(TaskKind::Tmi)
    }
}

fn role_and_format(system: &str) -> (String, String) {
    let role = system.split("## Task").next().unwrap().to_string();
    let format = system.split("## Output Format").nth(1).unwrap().to_string();
    (role, format)
}

#[test]
fn immediate_satisfaction_stops_after_round_one() {
    let refinements = Arc::new(AtomicU32::new(0));
    let gw = scripted(|_, _| true, refinement, Default::default(), refinements.clone());
    let initial = builtin(TaskKind::Tmi);
    let (best, trace) = optimize_default(&initial, &seeds(4), &gw, &opts(5)).unwrap();
    assert_eq!(trace.rounds.len(), 1);
    assert_eq!(trace.stop_reason, Some(StopReason::Satisfied));
    assert_eq!(refinements.load(Ordering::SeqCst), 0);
    assert_eq!(best, initial);
    assert_eq!(trace.best_score, 1.0);
}

#[test]
fn never_satisfied_runs_max_rounds_and_returns_best() {
    let systems = Arc::new(Mutex::new(Vec::new()));
    let refinements = Arc::new(AtomicU32::new(0));
    // version 2 gets one seed right, versions 1 and 3 none
    let gw = scripted(
        |v, s| v == 2 && s == 0,
        refinement,
        systems.clone(),
        refinements.clone(),
    );
    let initial = builtin(TaskKind::Tmi);
    let (best, trace) = optimize_default(&initial, &seeds(3), &gw, &opts(3)).unwrap();
    assert_eq!(trace.rounds.len(), 3);
    assert_eq!(trace.stop_reason, Some(StopReason::MaxRounds));
    let versions: Vec<u32> = trace.rounds.iter().map(|r| r.version).collect();
    assert_eq!(versions, vec![1, 2, 3]);
    assert_eq!(best.version, 2);
    assert_eq!(trace.best_version, 2);
    assert!((trace.best_score - 1.0 / 3.0).abs() < 1e-12);
    // no refinement after the last round
    assert_eq!(refinements.load(Ordering::SeqCst), 2);
    assert!(trace.rounds[2].feedback.is_none());
    assert!(trace.rounds[0]
        .feedback
        .as_deref()
        .unwrap()
        .contains("True label: mode:car"));
    // role and format are byte-stable across every version sent
    let systems = systems.lock().unwrap();
    assert_eq!(systems.len(), 9);
    let first = role_and_format(&systems[0]);
    assert!(systems.iter().all(|s| role_and_format(s) == first));
    assert_eq!(best.role, initial.role);
    assert_eq!(best.format, initial.format);
    assert_eq!(best.example, initial.example);
}

#[test]
fn refinement_that_fixes_a_seed_is_kept() {
    let gw = scripted(
        |v, s| s == 0 || (v >= 2 && s == 1),
        refinement,
        Default::default(),
        Default::default(),
    );
    let (best, trace) = optimize_default(&builtin(TaskKind::Tmi), &seeds(3), &gw, &opts(2)).unwrap();
    assert_eq!(best.version, 2);
    assert!(best.task.contains("revision 2"));
    let scores: Vec<f64> = trace.rounds.iter().map(|r| r.score).collect();
    assert!(scores[1] > scores[0]);
}

#[test]
fn unusable_refinements_keep_the_prior_version() {
    let refinements = Arc::new(AtomicU32::new(0));
    let gw = scripted(
        |_, _| false,
        |_| "I would rather not.".to_string(),
        Default::default(),
        refinements.clone(),
    );
    let initial = builtin(TaskKind::Tmi);
    let (best, trace) = optimize_default(&initial, &seeds(2), &gw, &opts(4)).unwrap();
    assert_eq!(trace.stop_reason, Some(StopReason::RefinementRejected));
    assert_eq!(trace.rounds.len(), 1);
    assert_eq!(trace.rounds[0].rejected.len(), 2);
    assert_eq!(refinements.load(Ordering::SeqCst), 2);
    assert_eq!(best, initial);
}

#[test]
fn refinement_cannot_touch_fixed_sections() {
    let p = builtin(TaskKind::Tmi);
    assert!(apply_refinement(&p, "[task]\nx\n[knowledge]\ny\n[format]\nz").is_err());
    assert!(apply_refinement(&p, "[task]\nx\n[knowledge]\nIn {{city}}").is_err());
    assert!(apply_refinement(&p, "[task]\nx").is_err());
    let ok = apply_refinement(&p, "[task]\nx\n[knowledge]\ny").unwrap();
    assert_eq!((ok.version, ok.task.as_str(), ok.knowledge.as_str()), (2, "x", "y"));
}

#[test]
fn gateway_failure_returns_trace_so_far() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let t = FnTransport::new(move |req: &ChatRequest| {
        if req.system == REFINER_SYSTEM {
            return Err(TransportError::Status {
                status: 400,
                message: "bad".into(),
            });
        }
        c.fetch_add(1, Ordering::SeqCst);
        reply("Final Answer:\nwalk")
    });
    let gw = Gateway::with_transport(GatewayConfig::default(), Arc::new(t)).unwrap();
    match optimize_default(&builtin(TaskKind::Tmi), &seeds(2), &gw, &opts(3)) {
        Err(OptimizeError::Gateway { round, trace, .. }) => {
            assert_eq!(round, 1);
            assert_eq!(trace.rounds.len(), 1);
        }
        other => panic!("expected gateway error, got {other:?}"),
    }
}

#[test]
fn seed_set_contracts() {
    assert!(SeedSet::new(TaskKind::Tmi, vec![]).is_err());
    let bad = vec![Seed {
        trajectory_id: "x".into(),
        content: vec![],
        text_only: String::new(),
        start_time: None,
        truth: Label::Anomaly(true),
    }];
    assert!(SeedSet::new(TaskKind::Tmi, bad).is_err());
    assert!(SeedSet::new(TaskKind::Tmi, raw_seeds(11)).is_err());
}

#[test]
fn trace_is_written_as_jsonl() {
    let gw = scripted(|_, _| false, refinement, Default::default(), Default::default());
    let (_, trace) = optimize_default(&builtin(TaskKind::Tmi), &seeds(2), &gw, &opts(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    trace.write_jsonl(&path).unwrap();
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["type"], "round");
    assert_eq!(lines[2]["type"], "summary");
    assert_eq!(lines[2]["stop_reason"], "max_rounds");
}

//! Seed-driven prompt refinement.
//!
//! Each round evaluates every seed with the current prompt. If the seed
//! score reaches the target the loop stops; otherwise the disagreements and
//! their true labels go back to the model, which proposes a new task
//! description and domain knowledge. Role, format and example never change.
//! The best-scoring version seen is returned.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::thread;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use trajlens_core::labels::Label;
use trajlens_core::tasks::{score, TaskKind, TaskResult};
use trajlens_gateway::{Gateway, GatewayError, Part};

use crate::template::{placeholders_in, split_sections, PromptError, TaskPrompt};

pub const MAX_SEEDS: usize = 10;

#[derive(Debug, Clone)]
pub struct Seed {
    pub trajectory_id: String,
    /// User message for this seed.
    pub content: Vec<Part>,
    /// Text tokens only; used in feedback so images stay out of it.
    pub text_only: String,
    pub start_time: Option<i64>,
    pub truth: Label,
}

#[derive(Debug, Clone)]
pub struct SeedSet {
    task: TaskKind,
    seeds: Vec<Seed>,
}

fn label_matches(task: TaskKind, l: &Label) -> bool {
    matches!(
        (task, l),
        (TaskKind::Tte, Label::TravelTime(_))
            | (TaskKind::Ad, Label::Anomaly(_))
            | (TaskKind::Mp, Label::Region(_))
            | (TaskKind::Tmi, Label::Mode(_))
    )
}

impl SeedSet {
    pub fn new(task: TaskKind, seeds: Vec<Seed>) -> Result<Self, OptimizeError> {
        if seeds.is_empty() || seeds.len() > MAX_SEEDS {
            return Err(OptimizeError::Invalid(format!(
                "seed set must hold 1 to {MAX_SEEDS} trajectories (got {})",
                seeds.len()
            )));
        }
        if let Some(s) = seeds.iter().find(|s| !label_matches(task, &s.truth)) {
            return Err(OptimizeError::Invalid(format!(
                "seed {} has label {} which does not fit task {task}",
                s.trajectory_id, s.truth
            )));
        }
        Ok(Self { task, seeds })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn seeds(&self) -> &[Seed] {
        &self.seeds
    }
}

/// Higher is better. TTE scores `100 - MAPE` (floored at 0); the other
/// tasks score top-1 accuracy.
pub fn seed_score(task: TaskKind, results: &[TaskResult]) -> f64 {
    let r = score(task, results);
    let v = match task {
        TaskKind::Tte => r.get("mape").map(|m| 100.0 - m),
        TaskKind::Ad | TaskKind::Tmi => r.get("accuracy"),
        TaskKind::Mp => r.get("acc@1"),
    };
    v.unwrap_or(0.0).max(0.0)
}

/// Default satisfaction threshold: MAPE at most 20% for TTE, every seed
/// correct otherwise.
pub fn default_target(task: TaskKind) -> f64 {
    match task {
        TaskKind::Tte => 80.0,
        _ => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub target: f64,
    pub max_rounds: u32,
    /// Relative error under which a TTE answer counts as agreeing.
    pub tte_tolerance: f64,
}

impl OptimizeOptions {
    pub fn for_task(task: TaskKind) -> Self {
        Self {
            target: default_target(task),
            max_rounds: 3,
            tte_tolerance: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Satisfied,
    MaxRounds,
    /// Two refinements in a row failed the self-check; the prior version
    /// is kept.
    RefinementRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub trajectory_id: String,
    pub output: String,
    pub parse_ok: bool,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub round: u32,
    pub version: u32,
    pub score: f64,
    pub outcomes: Vec<SeedOutcome>,
    /// Disagreement report sent back for refinement, if any.
    pub feedback: Option<String>,
    /// Refinement replies that failed the self-check, with the reason.
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub task: TaskKind,
    pub rounds: Vec<Round>,
    pub stop_reason: Option<StopReason>,
    pub best_version: u32,
    pub best_score: f64,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine<'a> {
    Round(&'a Round),
    Summary {
        task: TaskKind,
        rounds: usize,
        stop_reason: Option<StopReason>,
        best_version: u32,
        best_score: f64,
    },
}

impl OptimizationTrace {
    /// One line per round, then a summary line.
    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.rounds {
            writeln!(w, "{}", serde_json::to_string(&TraceLine::Round(r))?)?;
        }
        let summary = TraceLine::Summary {
            task: self.task,
            rounds: self.rounds.len(),
            stop_reason: self.stop_reason,
            best_version: self.best_version,
            best_score: self.best_score,
        };
        writeln!(w, "{}", serde_json::to_string(&summary)?)?;
        w.flush()
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("gateway failure in round {round}: {source}")]
    Gateway {
        round: u32,
        #[source]
        source: GatewayError,
        trace: Box<OptimizationTrace>,
    },
}

pub const REFINER_SYSTEM: &str = "You improve system prompts for a multimodal model that analyses GPS trajectories. \
You receive the current task description and domain knowledge, followed by cases where the model's answer disagreed \
with the true label. Rewrite the task description and the domain knowledge so that the model would answer these cases \
correctly without overfitting to them. Do not change the role or the output format. Reply with exactly two sections, \
each starting with its header on its own line:\n[task]\n<new task description>\n[knowledge]\n<new domain knowledge>";

fn feedback_message(prompt: &TaskPrompt, seeds: &[Seed], outcomes: &[SeedOutcome]) -> String {
    let mut out = format!(
        "Current task description:\n{}\n\nCurrent domain knowledge:\n{}\n\nDisagreements:\n",
        prompt.task, prompt.knowledge
    );
    for (seed, o) in seeds.iter().zip(outcomes).filter(|(_, o)| !o.agrees) {
        out.push_str(&format!(
            "\n### Trajectory {}\nTrue label: {}\nModel answer:\n{}\nSegment descriptions:\n{}\n",
            seed.trajectory_id,
            seed.truth,
            o.output.trim(),
            seed.text_only
        ));
    }
    out
}

/// Parses a refinement reply into a new version, keeping the fixed parts.
pub fn apply_refinement(current: &TaskPrompt, reply: &str) -> Result<TaskPrompt, String> {
    let (_, sections) = split_sections(reply, 1).map_err(|e| e.to_string())?;
    let get = |name: &str| {
        sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.clone())
            .filter(|b| !b.is_empty())
            .ok_or_else(|| format!("reply has no non-empty [{name}] section"))
    };
    let task = get("task")?;
    let knowledge = get("knowledge")?;
    if let Some(name) = sections
        .iter()
        .map(|(n, _)| n.as_str())
        .find(|n| !matches!(*n, "task" | "knowledge"))
    {
        return Err(format!("reply tries to change the fixed [{name}] section"));
    }
    if let Some(p) = placeholders_in(&task)
        .into_iter()
        .chain(placeholders_in(&knowledge))
        .next()
    {
        return Err(format!("reply leaves placeholder {{{{{p}}}}} unbound"));
    }
    let candidate = TaskPrompt {
        version: current.version + 1,
        task,
        knowledge,
        ..current.clone()
    };
    candidate.self_check().map_err(|e| e.to_string())?;
    Ok(candidate)
}

fn evaluate(
    gateway: &Gateway,
    prompt: &TaskPrompt,
    seeds: &SeedSet,
) -> Result<Vec<Result<TaskResult, GatewayError>>, PromptError> {
    let system = prompt.system_text()?;
    let task = seeds.task();
    Ok(thread::scope(|s| {
        let handles: Vec<_> = seeds
            .seeds()
            .iter()
            .map(|seed| {
                let req = gateway.request(system.clone(), seed.content.clone());
                s.spawn(move || {
                    gateway.send(&req).map(|resp| {
                        TaskResult::new(
                            &seed.trajectory_id,
                            task,
                            &resp.text,
                            seed.start_time,
                            Some(seed.truth.clone()),
                        )
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    }))
}

/// Runs the refinement loop. `scorer` maps seed results to a score where
/// higher is better; see [`seed_score`].
pub fn optimize(
    initial: &TaskPrompt,
    seeds: &SeedSet,
    gateway: &Gateway,
    scorer: &dyn Fn(&[TaskResult]) -> f64,
    opts: &OptimizeOptions,
) -> Result<(TaskPrompt, OptimizationTrace), OptimizeError> {
    if opts.max_rounds < 1 {
        return Err(OptimizeError::Invalid("max_rounds must be >= 1".into()));
    }
    if initial.kind != seeds.task() {
        return Err(OptimizeError::Invalid(format!(
            "prompt is for {} but seeds are for {}",
            initial.kind,
            seeds.task()
        )));
    }
    // fail early on an unbound prompt
    initial.system_text()?;
    let mut trace = OptimizationTrace {
        task: seeds.task(),
        rounds: Vec::new(),
        stop_reason: None,
        best_version: initial.version,
        best_score: f64::NEG_INFINITY,
    };
    let mut best = initial.clone();
    let mut current = initial.clone();
    for round in 1..=opts.max_rounds {
        let mut results = Vec::with_capacity(seeds.seeds().len());
        for r in evaluate(gateway, &current, seeds)? {
            match r {
                Ok(r) => results.push(r),
                Err(source) => {
                    return Err(OptimizeError::Gateway {
                        round,
                        source,
                        trace: Box::new(trace),
                    })
                }
            }
        }
        let score = scorer(&results);
        let outcomes: Vec<SeedOutcome> = results
            .iter()
            .map(|r| SeedOutcome {
                trajectory_id: r.trajectory_id.clone(),
                output: r.raw.clone(),
                parse_ok: r.parse_ok,
                agrees: r.agrees(opts.tte_tolerance),
            })
            .collect();
        info!("round {round}: version {} scores {score:.4}", current.version);
        if score > trace.best_score {
            trace.best_score = score;
            trace.best_version = current.version;
            best = current.clone();
        }
        let mut record = Round {
            round,
            version: current.version,
            score,
            outcomes,
            feedback: None,
            rejected: Vec::new(),
        };
        if score >= opts.target {
            trace.rounds.push(record);
            trace.stop_reason = Some(StopReason::Satisfied);
            break;
        }
        if round == opts.max_rounds {
            trace.rounds.push(record);
            trace.stop_reason = Some(StopReason::MaxRounds);
            break;
        }
        let feedback = feedback_message(&current, seeds.seeds(), &record.outcomes);
        let mut next = None;
        for attempt in 1..=2 {
            let mut text = feedback.clone();
            if let Some(reason) = record.rejected.last() {
                text.push_str(&format!(
                    "\nYour previous reply could not be used: {reason}. Follow the reply format exactly.\n"
                ));
            }
            let req = gateway.request(REFINER_SYSTEM, vec![Part::text(text)]);
            let reply = match gateway.send(&req) {
                Ok(r) => r.text,
                Err(source) => {
                    record.feedback = Some(feedback);
                    trace.rounds.push(record);
                    return Err(OptimizeError::Gateway {
                        round,
                        source,
                        trace: Box::new(trace),
                    });
                }
            };
            match apply_refinement(&current, &reply) {
                Ok(p) => {
                    next = Some(p);
                    break;
                }
                Err(reason) => {
                    warn!("refinement attempt {attempt} rejected: {reason}");
                    record.rejected.push(reason);
                }
            }
        }
        record.feedback = Some(feedback);
        trace.rounds.push(record);
        match next {
            Some(p) => current = p,
            None => {
                trace.stop_reason = Some(StopReason::RefinementRejected);
                break;
            }
        }
    }
    Ok((best, trace))
}

/// [`optimize`] with the default scorer for the seeds' task.
pub fn optimize_default(
    initial: &TaskPrompt,
    seeds: &SeedSet,
    gateway: &Gateway,
    opts: &OptimizeOptions,
) -> Result<(TaskPrompt, OptimizationTrace), OptimizeError> {
    let task = seeds.task();
    optimize(initial, seeds, gateway, &|r| seed_score(task, r), opts)
}

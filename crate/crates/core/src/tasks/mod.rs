//! Downstream tasks: what each task lets the model see, how its answers are
//! parsed, how anomaly benchmarks are synthesised and how results are scored.

pub mod anomaly;
pub mod answer;
pub mod metrics;
pub mod regions;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tokenize::FeatureMask;

pub use anomaly::{build_ad_benchmark, inject_detour, inject_switch, AdBenchmark, AnomalyError, AnomalyParams};
pub use answer::{parse_answer, Answer, TaskResult};
pub use metrics::{score, MetricsReport};
pub use regions::{mp_split, RegionGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Travel-time estimation.
    Tte,
    /// Anomaly detection.
    Ad,
    /// Mobility (destination region) prediction.
    Mp,
    /// Transportation-mode identification.
    Tmi,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::Tte, TaskKind::Ad, TaskKind::Mp, TaskKind::Tmi];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Tte => "tte",
            TaskKind::Ad => "ad",
            TaskKind::Mp => "mp",
            TaskKind::Tmi => "tmi",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown task {s:?} (expected tte, ad, mp or tmi)"))
    }
}

/// Fraction of trailing points withheld from mobility-prediction inputs.
pub const MP_DROP_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskKind,
    pub mask: FeatureMask,
    /// Fraction of trailing points cut before tokenisation (0 for none).
    pub truncate_fraction: f64,
    pub grammar: &'static str,
}

impl TaskSpec {
    pub fn new(task: TaskKind) -> Self {
        let (mask, truncate_fraction, grammar) = match task {
            TaskKind::Tte => (FeatureMask::travel_time(), 0.0, "final-answer:duration|datetime"),
            TaskKind::Ad => (FeatureMask::none(), 0.0, "final-judgment:normal|anomaly[+confidence]"),
            TaskKind::Mp => (FeatureMask::none(), MP_DROP_FRACTION, "final-answer:region*5"),
            TaskKind::Tmi => (FeatureMask::none(), 0.0, "final-answer:mode"),
        };
        Self {
            task,
            mask,
            truncate_fraction,
            grammar,
        }
    }
}

/// `ceil(x)` that ignores floating-point noise just above an integer, so
/// `ceil_count(0.3 * 100.0)` is 30 rather than 31.
pub fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

//! Answer grammars.
//!
//! * TTE: `Final Answer:` followed by an arrival time
//!   (`YYYY-MM-DD HH:MM:SS`, converted against the trip start) or a duration
//!   (`845`, `845 seconds`, `14.1 minutes`).
//! * AD: `Final Judgment:` followed by `Normal` or `Anomaly`; an optional
//!   `Confidence:` line holds a value in [0, 1] or a percentage.
//! * MP: `Final Answer:` followed by up to five region ids (`R03C17`), best
//!   first.
//! * TMI: `Final Answer:` followed by a single mode name.
//!
//! Markdown emphasis around the markers is ignored. Unparseable text is a
//! failed result, never an error.

use std::sync::LazyLock;

use chrono::NaiveDateTime;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::TaskKind;
use crate::labels::{Label, RegionId, TransportMode};

pub const MAX_REGIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Answer {
    TravelTime { seconds: f64 },
    Anomaly { anomalous: bool, confidence: Option<f64> },
    Regions { ranked: Vec<RegionId> },
    Mode { mode: TransportMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub trajectory_id: String,
    pub task: TaskKind,
    pub raw: String,
    pub answer: Option<Answer>,
    pub parse_ok: bool,
    pub truth: Option<Label>,
}

impl TaskResult {
    pub fn new(trajectory_id: &str, task: TaskKind, raw: &str, start_time: Option<i64>, truth: Option<Label>) -> Self {
        let answer = parse_answer(task, raw, start_time);
        Self {
            trajectory_id: trajectory_id.to_string(),
            task,
            raw: raw.to_string(),
            parse_ok: answer.is_some(),
            answer,
            truth,
        }
    }

    /// Whether the parsed answer agrees with the truth label. Travel times
    /// agree within `tte_tolerance` relative error.
    pub fn agrees(&self, tte_tolerance: f64) -> bool {
        match (&self.answer, &self.truth) {
            (Some(Answer::TravelTime { seconds }), Some(Label::TravelTime(t))) => {
                *t > 0.0 && (seconds - t).abs() / t <= tte_tolerance
            }
            (Some(Answer::Anomaly { anomalous, .. }), Some(Label::Anomaly(t))) => anomalous == t,
            (Some(Answer::Regions { ranked }), Some(Label::Region(r))) => ranked.first() == Some(r),
            (Some(Answer::Mode { mode }), Some(Label::Mode(m))) => mode == m,
            _ => false,
        }
    }
}

static EMPHASIS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[*_`#]+").unwrap());
static FINAL_ANSWER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)final\s+answer\s*[:：]").unwrap());
static FINAL_JUDGMENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)final\s+judge?ment\s*[:：]\s*(anomal(?:y|ous)|abnormal|normal)\b").unwrap());
static CONFIDENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)confidence\s*(?:score)?\s*[:：]\s*([0-9]*\.?[0-9]+)\s*(%)?").unwrap());
static DATETIME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4}-\d{2}-\d{2})[ T](\d{2}:\d{2}:\d{2})").unwrap());
static DURATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:approximately\s+|about\s+|~\s*)?([0-9]+(?:\.[0-9]+)?)\s*(seconds|second|secs|sec|s|minutes|minute|mins|min)?\b").unwrap()
});
static REGION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[Rr](\d{1,3})[Cc](\d{1,3})\b").unwrap());
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z]+").unwrap());

fn clean(text: &str) -> String {
    EMPHASIS.replace_all(text, "").into_owned()
}

/// Text after the last `Final Answer:` marker, starting at its first
/// non-blank line.
fn after_final_answer(text: &str) -> Option<String> {
    let m = FINAL_ANSWER.find_iter(text).last()?;
    let rest = text[m.end()..].trim_start();
    (!rest.is_empty()).then(|| rest.to_string())
}

fn parse_tte(text: &str, start_time: Option<i64>) -> Option<Answer> {
    let rest = after_final_answer(text)?;
    let line = rest.lines().next()?.trim();
    if let Some(c) = DATETIME.captures(line) {
        let arrival = NaiveDateTime::parse_from_str(&format!("{} {}", &c[1], &c[2]), "%Y-%m-%d %H:%M:%S")
            .ok()?
            .and_utc()
            .timestamp();
        let secs = arrival - start_time?;
        return (secs >= 0).then_some(Answer::TravelTime { seconds: secs as f64 });
    }
    let c = DURATION.captures(line)?;
    let v: f64 = c[1].parse().ok()?;
    let scale = match c.get(2).map(|u| u.as_str().to_ascii_lowercase()) {
        Some(u) if u.starts_with('m') => 60.0,
        _ => 1.0,
    };
    let seconds = v * scale;
    seconds.is_finite().then_some(Answer::TravelTime { seconds })
}

fn parse_ad(text: &str) -> Option<Answer> {
    let c = FINAL_JUDGMENT.captures_iter(text).last()?;
    let word = c[1].to_ascii_lowercase();
    let anomalous = word != "normal";
    let confidence = CONFIDENCE.captures(text).and_then(|m| {
        let v: f64 = m[1].parse().ok()?;
        let v = if m.get(2).is_some() { v / 100.0 } else { v };
        (0.0..=1.0).contains(&v).then_some(v)
    });
    Some(Answer::Anomaly { anomalous, confidence })
}

fn parse_mp(text: &str) -> Option<Answer> {
    let rest = after_final_answer(text)?;
    let mut ranked: Vec<RegionId> = Vec::new();
    for c in REGION.captures_iter(&rest) {
        let r = RegionId {
            row: c[1].parse().ok()?,
            col: c[2].parse().ok()?,
        };
        if !ranked.contains(&r) {
            ranked.push(r);
        }
        if ranked.len() == MAX_REGIONS {
            break;
        }
    }
    (!ranked.is_empty()).then_some(Answer::Regions { ranked })
}

fn mode_word(w: &str) -> Option<TransportMode> {
    let w = w.to_ascii_lowercase();
    let alias = match w.as_str() {
        "walking" | "foot" | "pedestrian" => "walk",
        "running" => "run",
        "bicycle" | "cycling" | "biking" => "bike",
        "driving" | "automobile" => "car",
        "metro" | "underground" => "subway",
        "plane" | "flight" => "airplane",
        "rail" | "railway" => "train",
        other => other,
    };
    alias.parse().ok()
}

fn parse_tmi(text: &str) -> Option<Answer> {
    let rest = after_final_answer(text)?;
    let line = rest.lines().next()?;
    let first = WORD.find(line)?;
    mode_word(first.as_str()).map(|mode| Answer::Mode { mode })
}

/// Parses `text` under the grammar of `task`. `start_time` converts
/// arrival-time answers into durations.
pub fn parse_answer(task: TaskKind, text: &str, start_time: Option<i64>) -> Option<Answer> {
    let text = clean(text);
    match task {
        TaskKind::Tte => parse_tte(&text, start_time),
        TaskKind::Ad => parse_ad(&text),
        TaskKind::Mp => parse_mp(&text),
        TaskKind::Tmi => parse_tmi(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tmi_mode_name() {
        assert_eq!(
            parse_answer(TaskKind::Tmi, "Reasoning...\nFinal Answer:\ntrain", None),
            Some(Answer::Mode {
                mode: TransportMode::Train
            })
        );
        assert_eq!(parse_answer(TaskKind::Tmi, "Final Answer: spaceship", None), None);
    }

    #[test]
    fn ad_judgment_and_confidence() {
        let a = parse_answer(
            TaskKind::Ad,
            "**Final Judgment: Anomaly**\nConfidence: 0.8\nReasoning:\n1. Overall Assessment ...",
            None,
        );
        assert_eq!(
            a,
            Some(Answer::Anomaly {
                anomalous: true,
                confidence: Some(0.8)
            })
        );
        let a = parse_answer(TaskKind::Ad, "Final Judgment: Normal (confidence: 70%)", None);
        assert_eq!(
            a,
            Some(Answer::Anomaly {
                anomalous: false,
                confidence: Some(0.7)
            })
        );
    }

    #[test]
    fn tte_forms() {
        let start = 1_478_181_600; // 2016-11-03 14:00:00
        let a = parse_answer(TaskKind::Tte, "Final Answer: 2016-11-03 14:14:05", Some(start));
        assert_eq!(a, Some(Answer::TravelTime { seconds: 845.0 }));
        let a = parse_answer(TaskKind::Tte, "Final Answer:\n845 seconds", None);
        assert_eq!(a, Some(Answer::TravelTime { seconds: 845.0 }));
        let a = parse_answer(TaskKind::Tte, "Final Answer: 2.5 minutes", None);
        assert_eq!(a, Some(Answer::TravelTime { seconds: 150.0 }));
        assert_eq!(
            parse_answer(TaskKind::Tte, "Final Answer: 2016-11-03 14:14:05", None),
            None
        );
    }

    #[test]
    fn mp_ranked_regions() {
        let a = parse_answer(
            TaskKind::Mp,
            "Final Answer: R03C17, R03C18, R03C17, R04C17, R02C17, R03C16, R01C01",
            None,
        );
        let Some(Answer::Regions { ranked }) = a else {
            panic!("{a:?}")
        };
        assert_eq!(ranked.len(), 5);
        assert_eq!(ranked[0].to_string(), "R03C17");
        assert_eq!(ranked[4].to_string(), "R03C16");
    }

    #[test]
    fn garbage_fails_every_grammar() {
        for t in TaskKind::ALL {
            assert_eq!(parse_answer(t, "lorem ipsum", Some(0)), None);
        }
    }
}

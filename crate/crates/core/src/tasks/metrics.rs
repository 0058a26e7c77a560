//! Task metrics and the scored report.
//!
//! Unparsed answers are never dropped. For travel time they count as the
//! worst prediction seen (at least the true duration itself); for the
//! classification tasks they count as wrong.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::answer::{Answer, TaskResult};
use super::TaskKind;
use crate::labels::{Label, TransportMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub mae: f64,
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
}

/// MAE, RMSE and MAPE (percent) of paired predictions. Truths must be
/// non-zero for MAPE.
pub fn regression(pred: &[f64], truth: &[f64]) -> Regression {
    assert_eq!(pred.len(), truth.len());
    assert!(!pred.is_empty(), "regression metrics of nothing");
    let n = pred.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut pct = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        let e = p - t;
        abs += e.abs();
        sq += e * e;
        pct += e.abs() / t.abs();
    }
    Regression {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mape: pct / n * 100.0,
    }
}

/// Area under the precision-recall curve.
///
/// Items are ranked by descending score, ties kept in input order, and one
/// threshold is placed after every item. The curve starts at
/// (recall 0, precision 1) and is integrated with the trapezoid rule.
/// `None` when there are no positives.
pub fn pr_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let total_pos = positive.iter().filter(|p| **p).count();
    if total_pos == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_r, mut prev_p) = (0.0, 1.0);
    let mut area = 0.0;
    for i in idx {
        if positive[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let r = tp as f64 / total_pos as f64;
        let p = tp as f64 / (tp + fp) as f64;
        area += (r - prev_r) * (p + prev_p) / 2.0;
        prev_r = r;
        prev_p = p;
    }
    Some(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Binary metrics with `true` as the positive class; empty ratios are 0.
pub fn binary(pred: &[bool], truth: &[bool]) -> Binary {
    assert_eq!(pred.len(), truth.len());
    let mut c = [[0usize; 2]; 2];
    for (p, t) in pred.iter().zip(truth) {
        c[usize::from(*t)][usize::from(*p)] += 1;
    }
    let (tp, fp, fn_) = (c[1][1] as f64, c[0][1] as f64, c[1][0] as f64);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Binary {
        accuracy: ratio((c[0][0] + c[1][1]) as f64, pred.len() as f64),
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiclass {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

/// Accuracy and F1 averages over the classes present in `truth` or in the
/// (non-missing) predictions. `None` predictions are wrong.
pub fn multiclass<C: Ord + Copy>(pred: &[Option<C>], truth: &[C]) -> Multiclass {
    assert_eq!(pred.len(), truth.len());
    assert!(!truth.is_empty(), "classification metrics of nothing");
    let classes: BTreeSet<C> = truth.iter().copied().chain(pred.iter().flatten().copied()).collect();
    let n = truth.len() as f64;
    let correct = pred.iter().zip(truth).filter(|(p, t)| **p == Some(**t)).count();
    let (mut macro_sum, mut weighted_sum) = (0.0, 0.0);
    for c in &classes {
        let tp = pred
            .iter()
            .zip(truth)
            .filter(|(p, t)| **p == Some(*c) && *t == c)
            .count() as f64;
        let predicted = pred.iter().filter(|p| **p == Some(*c)).count() as f64;
        let support = truth.iter().filter(|t| *t == c).count() as f64;
        let prec = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let rec = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if prec + rec > 0.0 {
            2.0 * prec * rec / (prec + rec)
        } else {
            0.0
        };
        macro_sum += f1;
        weighted_sum += f1 * support;
    }
    Multiclass {
        accuracy: correct as f64 / n,
        macro_f1: macro_sum / classes.len() as f64,
        weighted_f1: weighted_sum / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub total: usize,
    pub parsed: usize,
    pub parse_failures: usize,
    /// Results whose truth label was missing or of the wrong type.
    pub unlabeled: usize,
    /// Fraction of results that parsed.
    pub coverage: f64,
    /// `None` marks a metric that is undefined for this result set.
    pub metrics: BTreeMap<String, Option<f64>>,
}

impl MetricsReport {
    pub fn is_defined(&self) -> bool {
        self.metrics.values().all(Option::is_some)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied().flatten()
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task      {}", self.task);
        let _ = writeln!(s, "results   {}", self.total);
        let _ = writeln!(s, "parsed    {} ({:.1}%)", self.parsed, self.coverage * 100.0);
        let _ = writeln!(s, "failures  {}", self.parse_failures);
        if self.unlabeled > 0 {
            let _ = writeln!(s, "unlabeled {}", self.unlabeled);
        }
        for (k, v) in &self.metrics {
            match v {
                Some(v) => {
                    let _ = writeln!(s, "{k:<12} {v:.4}");
                }
                None => {
                    let _ = writeln!(s, "{k:<12} undefined");
                }
            }
        }
        s
    }
}

fn metric_names(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::Tte => &["mae", "rmse", "mape"],
        TaskKind::Ad => &["pr_auc", "accuracy", "precision", "recall", "f1"],
        TaskKind::Mp => &["acc@1", "acc@5"],
        TaskKind::Tmi => &["accuracy", "macro_f1", "weighted_f1"],
    }
}

/// Ranking score for an AD answer: confidence that the trajectory is
/// anomalous.
pub fn anomaly_score(anomalous: bool, confidence: Option<f64>) -> f64 {
    let c = confidence.unwrap_or(1.0);
    if anomalous {
        c
    } else {
        1.0 - c
    }
}

/// Scores `results` for `task`. Results of another task are ignored.
pub fn score(task: TaskKind, results: &[TaskResult]) -> MetricsReport {
    let results: Vec<&TaskResult> = results.iter().filter(|r| r.task == task).collect();
    let labeled: Vec<&TaskResult> = results
        .iter()
        .copied()
        .filter(|r| {
            matches!(
                (task, &r.truth),
                (TaskKind::Tte, Some(Label::TravelTime(_)))
                    | (TaskKind::Ad, Some(Label::Anomaly(_)))
                    | (TaskKind::Mp, Some(Label::Region(_)))
                    | (TaskKind::Tmi, Some(Label::Mode(_)))
            )
        })
        .collect();
    let parsed = results.iter().filter(|r| r.parse_ok).count();
    let mut metrics: BTreeMap<String, Option<f64>> = metric_names(task).iter().map(|k| (k.to_string(), None)).collect();
    let report = |metrics| MetricsReport {
        task,
        total: results.len(),
        parsed,
        parse_failures: results.len() - parsed,
        unlabeled: results.len() - labeled.len(),
        coverage: if results.is_empty() {
            0.0
        } else {
            parsed as f64 / results.len() as f64
        },
        metrics,
    };
    if labeled.iter().all(|r| !r.parse_ok) {
        return report(metrics);
    }
    let mut set = |k: &str, v: Option<f64>| {
        metrics.insert(k.to_string(), v.filter(|x| x.is_finite()));
    };
    match task {
        TaskKind::Tte => {
            let truth: Vec<f64> = labeled
                .iter()
                .map(|r| match r.truth {
                    Some(Label::TravelTime(t)) => t,
                    _ => unreachable!(),
                })
                .collect();
            let parsed_pred = |r: &TaskResult| match r.answer {
                Some(Answer::TravelTime { seconds }) => Some(seconds),
                _ => None,
            };
            let worst = labeled
                .iter()
                .zip(&truth)
                .filter_map(|(r, t)| parsed_pred(r).map(|p| (p - t).abs()))
                .fold(0.0, f64::max);
            // a failed answer is placed on the far side of the truth by the
            // larger of the worst parsed error and the truth itself
            let pred: Vec<f64> = labeled
                .iter()
                .zip(&truth)
                .map(|(r, t)| parsed_pred(r).unwrap_or(t + worst.max(t.abs())))
                .collect();
            let m = regression(&pred, &truth);
            set("mae", Some(m.mae));
            set("rmse", Some(m.rmse));
            // percentage error is undefined against a zero duration
            set("mape", truth.iter().all(|t| *t != 0.0).then_some(m.mape));
        }
        TaskKind::Ad => {
            let truth: Vec<bool> = labeled
                .iter()
                .map(|r| matches!(r.truth, Some(Label::Anomaly(true))))
                .collect();
            let (pred, scores): (Vec<bool>, Vec<f64>) = labeled
                .iter()
                .zip(&truth)
                .map(|(r, t)| match r.answer {
                    Some(Answer::Anomaly { anomalous, confidence }) => {
                        (anomalous, anomaly_score(anomalous, confidence))
                    }
                    // wrong, and ranked as confidently wrong
                    _ => (!t, if *t { 0.0 } else { 1.0 }),
                })
                .unzip();
            let b = binary(&pred, &truth);
            set("pr_auc", pr_auc(&scores, &truth));
            set("accuracy", Some(b.accuracy));
            set("precision", Some(b.precision));
            set("recall", Some(b.recall));
            set("f1", Some(b.f1));
        }
        TaskKind::Mp => {
            let n = labeled.len() as f64;
            let (mut top1, mut top5) = (0usize, 0usize);
            for r in &labeled {
                let (Some(Label::Region(t)), Some(Answer::Regions { ranked })) = (&r.truth, &r.answer) else {
                    continue;
                };
                top1 += usize::from(ranked.first() == Some(t));
                top5 += usize::from(ranked.iter().take(5).any(|x| x == t));
            }
            set("acc@1", Some(top1 as f64 / n));
            set("acc@5", Some(top5 as f64 / n));
        }
        TaskKind::Tmi => {
            let truth: Vec<TransportMode> = labeled
                .iter()
                .map(|r| match r.truth {
                    Some(Label::Mode(m)) => m,
                    _ => unreachable!(),
                })
                .collect();
            let pred: Vec<Option<TransportMode>> = labeled
                .iter()
                .map(|r| match r.answer {
                    Some(Answer::Mode { mode }) => Some(mode),
                    _ => None,
                })
                .collect();
            let m = multiclass(&pred, &truth);
            set("accuracy", Some(m.accuracy));
            set("macro_f1", Some(m.macro_f1));
            set("weighted_f1", Some(m.weighted_f1));
        }
    }
    report(metrics)
}

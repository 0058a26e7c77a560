//! Text token: a fixed template describing one sub-trajectory.
//!
//! ```text
//! --- Sub-trajectory Segment Description ---
//! Start Time: 2024-11-01 13:08:36
//! End Time: 2024-11-01 13:09:42
//! Duration (seconds): 66
//! Total Distance (meters): 410.8
//! Average Speed (m/s): 6.22
//! Maximum Speed (m/s): 8.51
//! Minimum Speed (m/s): 1.15
//! ----------------------------------------
//! ```
//!
//! Distances carry one decimal, speeds two. Masked fields read `[withheld]`
//! and undefined speeds read `[n/a]`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::kinematics;
use crate::traj::TrajPoint;

pub const HEADER: &str = "--- Sub-trajectory Segment Description ---";
pub const FOOTER: &str = "----------------------------------------";
pub const WITHHELD: &str = "[withheld]";
pub const NOT_AVAILABLE: &str = "[n/a]";
const TIME_FMT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    StartTime,
    EndTime,
    Duration,
    Distance,
    AvgSpeed,
    MaxSpeed,
    MinSpeed,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::StartTime,
        Feature::EndTime,
        Feature::Duration,
        Feature::Distance,
        Feature::AvgSpeed,
        Feature::MaxSpeed,
        Feature::MinSpeed,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Feature::StartTime => "Start Time",
            Feature::EndTime => "End Time",
            Feature::Duration => "Duration (seconds)",
            Feature::Distance => "Total Distance (meters)",
            Feature::AvgSpeed => "Average Speed (m/s)",
            Feature::MaxSpeed => "Maximum Speed (m/s)",
            Feature::MinSpeed => "Minimum Speed (m/s)",
        }
    }
}

/// Set of features hidden from the model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMask(BTreeSet<Feature>);

impl FeatureMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn of(features: &[Feature]) -> Self {
        Self(features.iter().copied().collect())
    }

    /// Everything that would reveal the arrival time.
    pub fn travel_time() -> Self {
        Self::of(&[
            Feature::EndTime,
            Feature::Duration,
            Feature::AvgSpeed,
            Feature::MaxSpeed,
            Feature::MinSpeed,
        ])
    }

    pub fn hides(&self, f: Feature) -> bool {
        self.0.contains(&f)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Feature> + '_ {
        self.0.iter().copied()
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (x * k).round() / k
}

/// Features of one sub-trajectory, quantised to display precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatures {
    pub start_time: i64,
    pub end_time: i64,
    pub duration_s: i64,
    pub distance_m: f64,
    pub avg_speed: Option<f64>,
    pub max_speed: Option<f64>,
    pub min_speed: Option<f64>,
}

impl SegmentFeatures {
    /// Panics on an empty slice.
    pub fn from_points(points: &[TrajPoint]) -> Self {
        let first = points.first().expect("non-empty sub-trajectory");
        let last = points.last().expect("non-empty sub-trajectory");
        let k = kinematics(points);
        Self {
            start_time: first.t,
            end_time: last.t,
            duration_s: k.duration_s,
            distance_m: round_to(k.total_distance, 1),
            avg_speed: k.avg_speed().map(|v| round_to(v, 2)),
            max_speed: k.max_speed().map(|v| round_to(v, 2)),
            min_speed: k.min_nonzero_speed().map(|v| round_to(v, 2)),
        }
    }

    fn value(&self, f: Feature) -> String {
        let speed = |v: Option<f64>| v.map_or_else(|| NOT_AVAILABLE.to_string(), |s| format!("{s:.2}"));
        match f {
            Feature::StartTime => format_time(self.start_time),
            Feature::EndTime => format_time(self.end_time),
            Feature::Duration => self.duration_s.to_string(),
            Feature::Distance => format!("{:.1}", self.distance_m),
            Feature::AvgSpeed => speed(self.avg_speed),
            Feature::MaxSpeed => speed(self.max_speed),
            Feature::MinSpeed => speed(self.min_speed),
        }
    }

    pub fn render(&self, mask: &FeatureMask) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        for f in Feature::ALL {
            let v = if mask.hides(f) {
                WITHHELD.to_string()
            } else {
                self.value(f)
            };
            let _ = writeln!(out, "{}: {}", f.label(), v);
        }
        out.push_str(FOOTER);
        out
    }
}

pub fn format_time(t: i64) -> String {
    DateTime::from_timestamp(t, 0).map_or_else(|| t.to_string(), |d| d.format(TIME_FMT).to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextToken {
    pub rendered: String,
    pub features: SegmentFeatures,
    pub mask: FeatureMask,
}

impl TextToken {
    /// Whether `rendered` is exactly what the template produces from
    /// `features` under `mask`.
    pub fn is_consistent(&self) -> bool {
        self.rendered == self.features.render(&self.mask)
    }
}

pub fn text_token(points: &[TrajPoint], mask: &FeatureMask) -> TextToken {
    let features = SegmentFeatures::from_points(points);
    TextToken {
        rendered: features.render(mask),
        features,
        mask: mask.clone(),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TextParseError {
    #[error("line {line}: expected {expected:?}")]
    Layout { line: usize, expected: String },
    #[error("field {0:?} is withheld")]
    Withheld(&'static str),
    #[error("field {field:?}: cannot parse {value:?}")]
    Value { field: &'static str, value: String },
}

/// Recovers the features from an unmasked rendered block.
pub fn parse_text(rendered: &str) -> Result<SegmentFeatures, TextParseError> {
    let lines: Vec<&str> = rendered.lines().collect();
    let expect = |i: usize, want: &str| -> Result<(), TextParseError> {
        if lines.get(i) == Some(&want) {
            Ok(())
        } else {
            Err(TextParseError::Layout {
                line: i + 1,
                expected: want.to_string(),
            })
        }
    };
    expect(0, HEADER)?;
    expect(Feature::ALL.len() + 1, FOOTER)?;
    let mut values = Vec::with_capacity(Feature::ALL.len());
    for (i, f) in Feature::ALL.iter().enumerate() {
        let prefix = format!("{}: ", f.label());
        let v = lines[i + 1].strip_prefix(&prefix).ok_or(TextParseError::Layout {
            line: i + 2,
            expected: prefix.clone(),
        })?;
        if v == WITHHELD {
            return Err(TextParseError::Withheld(f.label()));
        }
        values.push((f.label(), v));
    }
    let bad = |(field, value): (&'static str, &str)| TextParseError::Value {
        field,
        value: value.to_string(),
    };
    let time = |kv: (&'static str, &str)| {
        NaiveDateTime::parse_from_str(kv.1, TIME_FMT)
            .map(|d| d.and_utc().timestamp())
            .map_err(|_| bad(kv))
    };
    let speed = |kv: (&'static str, &str)| {
        if kv.1 == NOT_AVAILABLE {
            Ok(None)
        } else {
            kv.1.parse::<f64>().map(Some).map_err(|_| bad(kv))
        }
    };
    Ok(SegmentFeatures {
        start_time: time(values[0])?,
        end_time: time(values[1])?,
        duration_s: values[2].1.parse().map_err(|_| bad(values[2]))?,
        distance_m: values[3].1.parse().map_err(|_| bad(values[3]))?,
        avg_speed: speed(values[4])?,
        max_speed: speed(values[5])?,
        min_speed: speed(values[6])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> SegmentFeatures {
        SegmentFeatures {
            start_time: 1_730_466_516,
            end_time: 1_730_466_582,
            duration_s: 66,
            distance_m: 410.8,
            avg_speed: Some(round_to(410.8 / 66.0, 2)),
            max_speed: Some(8.51),
            min_speed: Some(1.15),
        }
    }

    #[test]
    fn renders_reference_block() {
        let want = "--- Sub-trajectory Segment Description ---\n\
Start Time: 2024-11-01 13:08:36\n\
End Time: 2024-11-01 13:09:42\n\
Duration (seconds): 66\n\
Total Distance (meters): 410.8\n\
Average Speed (m/s): 6.22\n\
Maximum Speed (m/s): 8.51\n\
Minimum Speed (m/s): 1.15\n\
----------------------------------------";
        assert_eq!(example().render(&FeatureMask::none()), want);
        assert_eq!(parse_text(want).unwrap(), example());
    }

    #[test]
    fn single_point_is_degenerate() {
        let tok = text_token(&[TrajPoint::new(1.0, 2.0, 100)], &FeatureMask::none());
        assert!(tok.rendered.contains("Duration (seconds): 0"));
        assert!(tok.rendered.contains("Total Distance (meters): 0.0"));
        assert!(tok.rendered.contains("Average Speed (m/s): [n/a]"));
        assert!(tok.rendered.contains("Minimum Speed (m/s): [n/a]"));
        assert!(tok.is_consistent());
    }

    #[test]
    fn travel_time_mask() {
        let r = example().render(&FeatureMask::travel_time());
        assert!(r.contains("Start Time: 2024-11-01 13:08:36"));
        assert!(r.contains("End Time: [withheld]"));
        assert!(r.contains("Duration (seconds): [withheld]"));
        assert!(r.contains("Total Distance (meters): 410.8"));
        assert!(r.contains("Maximum Speed (m/s): [withheld]"));
        assert!(!r.contains("13:09:42"));
        assert_eq!(parse_text(&r), Err(TextParseError::Withheld("End Time")));
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(
            parse_text("hello"),
            Err(TextParseError::Layout { line: 1, .. })
        ));
    }
}

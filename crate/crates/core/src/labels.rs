//! Task ground-truth labels and their compact text form (`kind:value`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    Walk,
    Run,
    Bike,
    Bus,
    Car,
    Taxi,
    Motorcycle,
    Train,
    Subway,
    Boat,
    Airplane,
}

impl TransportMode {
    pub const ALL: [TransportMode; 11] = [
        TransportMode::Walk,
        TransportMode::Run,
        TransportMode::Bike,
        TransportMode::Bus,
        TransportMode::Car,
        TransportMode::Taxi,
        TransportMode::Motorcycle,
        TransportMode::Train,
        TransportMode::Subway,
        TransportMode::Boat,
        TransportMode::Airplane,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TransportMode::Walk => "walk",
            TransportMode::Run => "run",
            TransportMode::Bike => "bike",
            TransportMode::Bus => "bus",
            TransportMode::Car => "car",
            TransportMode::Taxi => "taxi",
            TransportMode::Motorcycle => "motorcycle",
            TransportMode::Train => "train",
            TransportMode::Subway => "subway",
            TransportMode::Boat => "boat",
            TransportMode::Airplane => "airplane",
        }
    }
}

impl fmt::Display for TransportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransportMode {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        TransportMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or(LabelError::UnknownMode(s))
    }
}

/// A cell of the mobility-prediction region grid, written `R{row}C{col}`
/// with two-digit zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId {
    pub row: u16,
    pub col: u16,
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{:02}C{:02}", self.row, self.col)
    }
}

impl FromStr for RegionId {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LabelError::BadRegion(s.to_string());
        let rest = s.trim().strip_prefix(['R', 'r']).ok_or_else(bad)?;
        let (row, col) = rest.split_once(['C', 'c']).ok_or_else(bad)?;
        Ok(RegionId {
            row: row.parse().map_err(|_| bad())?,
            col: col.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("unknown transport mode {0:?}")]
    UnknownMode(String),
    #[error("malformed region id {0:?}")]
    BadRegion(String),
    #[error("malformed label {0:?} (expected kind:value)")]
    Malformed(String),
}

/// Ground truth attached to a trajectory, typed per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Label {
    /// Travel time in seconds.
    TravelTime(f64),
    Anomaly(bool),
    Region(RegionId),
    Mode(TransportMode),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::TravelTime(s) => write!(f, "duration:{s}"),
            Label::Anomaly(a) => write!(f, "anomaly:{a}"),
            Label::Region(r) => write!(f, "region:{r}"),
            Label::Mode(m) => write!(f, "mode:{m}"),
        }
    }
}

impl FromStr for Label {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || LabelError::Malformed(s.to_string());
        let (kind, value) = s.trim().split_once(':').ok_or_else(malformed)?;
        match kind {
            "duration" => value.parse().map(Label::TravelTime).map_err(|_| malformed()),
            "anomaly" => match value {
                "true" | "1" => Ok(Label::Anomaly(true)),
                "false" | "0" => Ok(Label::Anomaly(false)),
                _ => Err(malformed()),
            },
            "region" => value.parse().map(Label::Region),
            "mode" => value.parse().map(Label::Mode),
            _ => Err(malformed()),
        }
    }
}

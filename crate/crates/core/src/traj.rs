use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::LonLat;
use crate::labels::Label;

/// A single GPS fix. `t` is UTC epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub lon: f64,
    pub lat: f64,
    pub t: i64,
}

impl TrajPoint {
    pub fn new(lon: f64, lat: f64, t: i64) -> Self {
        Self { lon, lat, t }
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }

    pub fn pos(&self) -> LonLat {
        LonLat::new(self.lon, self.lat)
    }

    fn same_fix(&self, other: &TrajPoint) -> bool {
        self.t == other.t && self.lon.to_bits() == other.lon.to_bits() && self.lat.to_bits() == other.lat.to_bits()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajError {
    #[error("trajectory {id:?} has no points")]
    Empty { id: String },
    #[error("trajectory {id:?}: point {index} has out-of-range coordinate (lon {lon}, lat {lat})")]
    OutOfRange {
        id: String,
        index: usize,
        lon: f64,
        lat: f64,
    },
}

/// An ordered, validated sequence of GPS fixes.
///
/// Construction sorts points by time (stable) and drops exact duplicates, so
/// a `Trajectory` always has at least one point, non-decreasing timestamps and
/// no repeated `(lon, lat, t)` fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    id: String,
    points: Vec<TrajPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, mut points: Vec<TrajPoint>) -> Result<Self, TrajError> {
        let id = id.into();
        if points.is_empty() {
            return Err(TrajError::Empty { id });
        }
        if let Some((index, p)) = points.iter().enumerate().find(|(_, p)| !p.is_valid()) {
            return Err(TrajError::OutOfRange {
                id,
                index,
                lon: p.lon,
                lat: p.lat,
            });
        }
        points.sort_by_key(|p| p.t);
        let mut kept: Vec<TrajPoint> = Vec::with_capacity(points.len());
        let mut run_start = 0;
        for p in points {
            if kept.last().is_some_and(|last| last.t != p.t) {
                run_start = kept.len();
            }
            // duplicates can only share a timestamp, so only the current run is checked
            if !kept[run_start..].iter().any(|q| q.same_fix(&p)) {
                kept.push(p);
            }
        }
        Ok(Self {
            id,
            points: kept,
            label: None,
        })
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[TrajPoint] {
        &self.points
    }

    pub fn label(&self) -> Option<&Label> {
        self.label.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for the `len`/`is_empty` pairing lint.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> &TrajPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrajPoint {
        &self.points[self.points.len() - 1]
    }

    pub fn duration_s(&self) -> i64 {
        self.last().t - self.first().t
    }

    /// A new trajectory made of the first `n` points (at least one).
    pub fn prefix(&self, n: usize) -> Trajectory {
        let n = n.clamp(1, self.points.len());
        Trajectory {
            id: self.id.clone(),
            points: self.points[..n].to_vec(),
            label: self.label.clone(),
        }
    }

    pub fn renamed(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

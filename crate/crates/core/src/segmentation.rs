//! Optimal partition of a trajectory into sub-trajectories.
//!
//! A segment `[a, b]` costs the weighted sum of three factors:
//!
//! * `f_speed`: population variance of the step speeds inside the segment,
//! * `f_road`: number of changes of nearest road between consecutive points,
//! * `f_len`: `1 / (b - a + 1)`, which discourages tiny segments.
//!
//! Each factor is divided by its maximum over every admissible segment of the
//! trajectory before weighting, so the three have comparable scale. The
//! dynamic program `DP[h] = min_d DP[d] + cost(d, h - 1)` then finds the
//! minimum-cost partition, with ties broken toward the smallest split `d`.

use serde::{Deserialize, Serialize};

use crate::context::ContextDb;
use crate::kinematics::kinematics;
use crate::traj::{TrajPoint, Trajectory};

/// Inclusive, 0-based point range of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn slice<'a>(&self, points: &'a [TrajPoint]) -> &'a [TrajPoint] {
        &points[self.range()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub speed: f64,
    pub road: f64,
    pub len: f64,
    /// Longest admissible segment in points; `None` searches all O(L^2)
    /// segments.
    pub max_seg_points: Option<usize>,
    /// Search radius for the nearest-road sequence behind `f_road`.
    pub road_radius_m: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            speed: 1.0,
            road: 1.0,
            len: 1.0,
            max_seg_points: Some(256),
            road_radius_m: 200.0,
        }
    }
}

impl CostWeights {
    /// Default weights without the segment length cap.
    pub fn exact() -> Self {
        Self {
            max_seg_points: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ws = [self.speed, self.road, self.len];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err("cost weights must be finite and >= 0".into());
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err("at least one cost weight must be > 0".into());
        }
        if self.max_seg_points == Some(0) {
            return Err("max_seg_points must be >= 1".into());
        }
        if !(self.road_radius_m.is_finite() && self.road_radius_m > 0.0) {
            return Err("road_radius_m must be > 0".into());
        }
        Ok(())
    }

    fn cap(&self, n: usize) -> usize {
        self.max_seg_points.unwrap_or(n).clamp(1, n.max(1))
    }
}

/// Population variance of step speeds within `[a, b]`; 0 below two steps.
pub fn f_speed(points: &[TrajPoint], a: usize, b: usize) -> f64 {
    let speeds = kinematics(&points[a..=b]).step_speeds;
    if speeds.len() < 2 {
        return 0.0;
    }
    let n = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / n;
    speeds.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n
}

/// Nearest road (index into `db.roads()`) of every point; `None` where no
/// road lies within `radius_m`.
pub fn nearest_road_sequence(points: &[TrajPoint], db: &ContextDb, radius_m: f64) -> Vec<Option<usize>> {
    points
        .iter()
        .map(|p| db.nearest_road(p.pos(), radius_m).map(|(r, _)| r))
        .collect()
}

/// Road changes between consecutive points of `[a, b]`.
pub fn f_road(roads: &[Option<usize>], a: usize, b: usize) -> f64 {
    roads[a..=b].windows(2).filter(|w| w[0] != w[1]).count() as f64
}

pub fn f_len(a: usize, b: usize) -> f64 {
    1.0 / (b - a + 1) as f64
}

/// Raw (unnormalised) factor values of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    pub speed: f64,
    pub road: f64,
    pub len: f64,
}

/// Constant-time segment cost over precomputed prefix sums.
#[derive(Debug, Clone)]
pub struct SegmentCost {
    weights: CostWeights,
    n: usize,
    cap: usize,
    // prefix sums of shifted step speeds s_i - shift and their squares
    s1: Vec<f64>,
    s2: Vec<f64>,
    transitions: Vec<u32>,
    norm: Factors,
}

impl SegmentCost {
    pub fn new(points: &[TrajPoint], roads: &[Option<usize>], weights: CostWeights) -> Self {
        assert_eq!(points.len(), roads.len(), "one road entry per point");
        let n = points.len();
        let speeds = kinematics(points).step_speeds;
        let shift = if speeds.is_empty() {
            0.0
        } else {
            speeds.iter().sum::<f64>() / speeds.len() as f64
        };
        let mut s1 = vec![0.0; speeds.len() + 1];
        let mut s2 = vec![0.0; speeds.len() + 1];
        for (i, s) in speeds.iter().enumerate() {
            let x = s - shift;
            s1[i + 1] = s1[i] + x;
            s2[i + 1] = s2[i] + x * x;
        }
        let mut transitions = vec![0u32; n];
        for i in 1..n {
            transitions[i] = transitions[i - 1] + u32::from(roads[i - 1] != roads[i]);
        }
        let mut cost = Self {
            weights,
            n,
            cap: weights.cap(n),
            s1,
            s2,
            transitions,
            norm: Factors {
                speed: 1.0,
                road: 1.0,
                len: 1.0,
            },
        };
        let mut max = Factors {
            speed: 0.0,
            road: 0.0,
            len: 0.0,
        };
        for b in 0..n {
            for a in b + 1 - cost.cap.min(b + 1)..=b {
                let f = cost.factors(a, b);
                max.speed = max.speed.max(f.speed);
                max.road = max.road.max(f.road);
                max.len = max.len.max(f.len);
            }
        }
        let guard = |m: f64| if m > 0.0 { m } else { 1.0 };
        cost.norm = Factors {
            speed: guard(max.speed),
            road: guard(max.road),
            len: guard(max.len),
        };
        cost
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Longest admissible segment in points.
    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn normalisers(&self) -> Factors {
        self.norm
    }

    pub fn factors(&self, a: usize, b: usize) -> Factors {
        let steps = b - a;
        let speed = if steps < 2 {
            0.0
        } else {
            let k = steps as f64;
            let m1 = (self.s1[b] - self.s1[a]) / k;
            let m2 = (self.s2[b] - self.s2[a]) / k;
            (m2 - m1 * m1).max(0.0)
        };
        Factors {
            speed,
            road: f64::from(self.transitions[b] - self.transitions[a]),
            len: f_len(a, b),
        }
    }

    /// Weighted, normalised cost of segment `[a, b]`.
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        let f = self.factors(a, b);
        let w = &self.weights;
        w.speed * (f.speed / self.norm.speed) + w.road * (f.road / self.norm.road) + w.len * (f.len / self.norm.len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub trajectory_id: String,
    pub spans: Vec<Span>,
    pub segment_costs: Vec<f64>,
    pub total_cost: f64,
}

impl Segmentation {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Whether the spans are contiguous, non-empty and cover `0..n`.
    pub fn covers(&self, n: usize) -> bool {
        let mut next = 0;
        for s in &self.spans {
            if s.start != next || s.end < s.start {
                return false;
            }
            next = s.end + 1;
        }
        next == n && n > 0
    }
}

/// Runs the dynamic program over a precomputed cost table.
pub fn segment_with_cost(id: &str, cost: &SegmentCost) -> Segmentation {
    let n = cost.len();
    assert!(n > 0, "cannot segment an empty trajectory");
    let cap = cost.cap();
    let mut dp = vec![f64::INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    dp[0] = 0.0;
    for h in 1..=n {
        for d in h.saturating_sub(cap)..h {
            let v = dp[d] + cost.cost(d, h - 1);
            if v < dp[h] {
                dp[h] = v;
                back[h] = d;
            }
        }
    }
    let mut spans = Vec::new();
    let mut h = n;
    while h > 0 {
        let d = back[h];
        spans.push(Span::new(d, h - 1));
        h = d;
    }
    spans.reverse();
    let segment_costs = spans.iter().map(|s| cost.cost(s.start, s.end)).collect();
    Segmentation {
        trajectory_id: id.to_string(),
        spans,
        segment_costs,
        total_cost: dp[n],
    }
}

/// Minimum-cost segmentation of `traj`.
pub fn segment(traj: &Trajectory, db: &ContextDb, w: &CostWeights) -> Segmentation {
    let roads = nearest_road_sequence(traj.points(), db, w.road_radius_m);
    let cost = SegmentCost::new(traj.points(), &roads, *w);
    segment_with_cost(traj.id(), &cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::METERS_PER_DEG_LAT;

    fn line(speeds_m: &[f64]) -> Vec<TrajPoint> {
        let mut lat = 0.0;
        let mut pts = vec![TrajPoint::new(0.0, 0.0, 0)];
        for (i, d) in speeds_m.iter().enumerate() {
            lat += d / METERS_PER_DEG_LAT;
            pts.push(TrajPoint::new(0.0, lat, i as i64 + 1));
        }
        pts
    }

    #[test]
    fn factor_examples() {
        let pts = line(&[5.0, 5.0, 5.0]);
        assert!(f_speed(&pts, 0, 3) < 1e-18);
        let pts = line(&[0.0, 10.0]);
        assert!((f_speed(&pts, 0, 2) - 25.0).abs() < 1e-9);
        let roads = [Some(0), Some(0), Some(1), Some(1), Some(0)];
        assert_eq!(f_road(&roads, 0, 4), 2.0);
        assert_eq!(f_road(&[None, None, Some(0)], 0, 1), 0.0);
        assert_eq!(f_road(&[None, Some(0)], 0, 1), 1.0);
        assert_eq!(f_len(3, 3), 1.0);
        assert!((f_len(0, 9) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn prefix_factors_match_direct() {
        let pts = line(&[1.0, 4.0, 2.0, 8.0, 3.0, 3.0]);
        let roads = vec![Some(0), Some(0), Some(1), None, None, Some(1), Some(1)];
        let c = SegmentCost::new(&pts, &roads, CostWeights::exact());
        for a in 0..pts.len() {
            for b in a..pts.len() {
                let f = c.factors(a, b);
                assert!((f.speed - f_speed(&pts, a, b)).abs() < 1e-9);
                assert_eq!(f.road, f_road(&roads, a, b));
            }
        }
    }

    #[test]
    fn single_point() {
        let t = Trajectory::new("x", vec![TrajPoint::new(1.0, 1.0, 0)]).unwrap();
        let s = segment(&t, &ContextDb::empty(), &CostWeights::default());
        assert_eq!(s.spans, vec![Span::new(0, 0)]);
        assert!(s.covers(1));
    }

    #[test]
    fn cap_limits_segment_length() {
        let pts = line(&[3.0; 12]);
        let roads = vec![None; pts.len()];
        let w = CostWeights {
            max_seg_points: Some(4),
            ..CostWeights::default()
        };
        let s = segment_with_cost("c", &SegmentCost::new(&pts, &roads, w));
        assert!(s.covers(pts.len()));
        assert!(s.spans.iter().all(|sp| sp.len() <= 4));
    }
}

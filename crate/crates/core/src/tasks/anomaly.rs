//! Synthetic anomalies for the anomaly-detection benchmark.
//!
//! * Detour: a contiguous run of `ceil(alpha * L)` interior points is pushed
//!   sideways, perpendicular to the local heading, by `d * grid_cell_m`.
//! * Switch: the first `ceil(mu * L)` points are kept and the rest of the
//!   route is taken from a donor trajectory with a similar origin and
//!   destination.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ceil_count;
use crate::geodesy::{bearing_rad, destination, distance_m};
use crate::labels::Label;
use crate::traj::{TrajPoint, Trajectory};

/// Donor origin and destination must each lie within this distance.
pub const DONOR_RADIUS_M: f64 = 1_000.0;
pub const MIN_POINTS: usize = 5;
pub const MIN_POOL: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyParams {
    /// Fraction of points displaced by a detour.
    pub alpha: f64,
    /// Detour offset in grid units.
    pub d: u32,
    /// Fraction of the route kept before a switch.
    pub mu: f64,
    pub inject_ratio: f64,
    pub grid_cell_m: f64,
}

impl Default for AnomalyParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            d: 3,
            mu: 0.3,
            inject_ratio: 0.05,
            grid_cell_m: 50.0,
        }
    }
}

impl AnomalyParams {
    /// Detour severity presets: low, medium, high.
    pub fn preset(level: &str) -> Option<Self> {
        let (alpha, d) = match level.to_ascii_lowercase().as_str() {
            "low" => (0.05, 2),
            "medium" => (0.1, 3),
            "high" => (0.2, 5),
            _ => return None,
        };
        Some(Self {
            alpha,
            d,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            errs.push(format!("alpha must be in (0, 1] (got {})", self.alpha));
        }
        if self.d == 0 {
            errs.push("d must be a positive integer".to_string());
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            errs.push(format!("mu must be in (0, 1) (got {})", self.mu));
        }
        if !(self.inject_ratio > 0.0 && self.inject_ratio <= 1.0) {
            errs.push(format!("inject_ratio must be in (0, 1] (got {})", self.inject_ratio));
        }
        if !(self.grid_cell_m.is_finite() && self.grid_cell_m > 0.0) {
            errs.push(format!("grid_cell_m must be > 0 (got {})", self.grid_cell_m));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }

    pub fn detour_m(&self) -> f64 {
        f64::from(self.d) * self.grid_cell_m
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AnomalyError {
    #[error("trajectory {id:?} has {len} points; at least {MIN_POINTS} are needed")]
    TooShort { id: String, len: usize },
    #[error("donor {donor:?} does not share origin and destination with {target:?} within 1 km")]
    IncompatibleDonor { target: String, donor: String },
    #[error("no compatible donor for {0:?}; supply a larger donor pool")]
    NoDonor(String),
    #[error("pool has {0} trajectories; at least {MIN_POOL} are needed")]
    PoolTooSmall(usize),
    #[error("invalid anomaly parameters: {0}")]
    Params(String),
}

fn check_len(t: &Trajectory) -> Result<(), AnomalyError> {
    if t.len() < MIN_POINTS {
        Err(AnomalyError::TooShort {
            id: t.id().to_string(),
            len: t.len(),
        })
    } else {
        Ok(())
    }
}

/// What a detour changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetourInfo {
    pub start: usize,
    pub count: usize,
    pub offset_m: f64,
    /// +1 to the right of the heading, -1 to the left.
    pub side: i8,
}

pub fn inject_detour_with_info(
    traj: &Trajectory,
    params: &AnomalyParams,
    seed: u64,
) -> Result<(Trajectory, DetourInfo), AnomalyError> {
    check_len(traj)?;
    let pts = traj.points();
    let l = pts.len();
    let count = ceil_count(params.alpha * l as f64).clamp(1, l - 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(1..=l - 1 - count);
    let side: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
    let offset_m = params.detour_m();
    let mut out = pts.to_vec();
    for i in start..start + count {
        let heading = bearing_rad(pts[i - 1].pos(), pts[i + 1].pos());
        let q = destination(
            pts[i].pos(),
            heading + f64::from(side) * std::f64::consts::FRAC_PI_2,
            offset_m,
        );
        out[i] = TrajPoint::new(q.lon, q.lat, pts[i].t);
    }
    let t = Trajectory::new(traj.id(), out)
        .expect("displaced points stay valid")
        .with_label(Some(Label::Anomaly(true)));
    Ok((
        t,
        DetourInfo {
            start,
            count,
            offset_m,
            side,
        },
    ))
}

pub fn inject_detour(traj: &Trajectory, params: &AnomalyParams, seed: u64) -> Result<Trajectory, AnomalyError> {
    inject_detour_with_info(traj, params, seed).map(|(t, _)| t)
}

pub fn compatible_donor(target: &Trajectory, donor: &Trajectory) -> bool {
    distance_m(target.first().pos(), donor.first().pos()) <= DONOR_RADIUS_M
        && distance_m(target.last().pos(), donor.last().pos()) <= DONOR_RADIUS_M
}

/// What a switch changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchInfo {
    pub kept: usize,
    pub donor_id: String,
    pub donor_start: usize,
    pub suffix_len: usize,
}

pub fn inject_switch_with_info(
    traj: &Trajectory,
    donor: &Trajectory,
    mu: f64,
) -> Result<(Trajectory, SwitchInfo), AnomalyError> {
    check_len(traj)?;
    check_len(donor)?;
    if !compatible_donor(traj, donor) {
        return Err(AnomalyError::IncompatibleDonor {
            target: traj.id().to_string(),
            donor: donor.id().to_string(),
        });
    }
    let pts = traj.points();
    let kept = ceil_count(mu * pts.len() as f64).clamp(1, pts.len() - 1);
    let anchor = pts[kept - 1];
    let dpts = donor.points();
    let mut j = 0;
    let mut best = f64::INFINITY;
    for (i, p) in dpts.iter().enumerate() {
        let d = distance_m(anchor.pos(), p.pos());
        if d < best {
            best = d;
            j = i;
        }
    }
    let gap = if j > 0 { (dpts[j].t - dpts[j - 1].t).max(1) } else { 1 };
    let shift = anchor.t + gap - dpts[j].t;
    let mut out = pts[..kept].to_vec();
    out.extend(dpts[j..].iter().map(|p| TrajPoint::new(p.lon, p.lat, p.t + shift)));
    let t = Trajectory::new(traj.id(), out)
        .expect("spliced points stay valid")
        .with_label(Some(Label::Anomaly(true)));
    Ok((
        t,
        SwitchInfo {
            kept,
            donor_id: donor.id().to_string(),
            donor_start: j,
            suffix_len: dpts.len() - j,
        },
    ))
}

/// Keeps the first `ceil(mu * L)` points of `traj` and continues along
/// `donor` from its point nearest the last kept one, time-shifted so the
/// timeline stays monotone.
pub fn inject_switch(traj: &Trajectory, donor: &Trajectory, mu: f64) -> Result<Trajectory, AnomalyError> {
    inject_switch_with_info(traj, donor, mu).map(|(t, _)| t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "anomaly", rename_all = "lowercase")]
pub enum InjectionKind {
    Detour(DetourInfo),
    Switch(SwitchInfo),
}

/// One line of the benchmark manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub trajectory_id: String,
    pub pool_index: usize,
    #[serde(flatten)]
    pub kind: InjectionKind,
    pub params: AnomalyParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdBenchmark {
    /// The pool in its original order, anomalies substituted in place; every
    /// trajectory carries an anomaly label.
    pub trajectories: Vec<Trajectory>,
    pub manifest: Vec<InjectionRecord>,
}

impl AdBenchmark {
    pub fn anomalies(&self) -> usize {
        self.manifest.len()
    }
}

/// Replaces `ceil(inject_ratio * |pool|)` trajectories with anomalies, half
/// detours and half switches (an odd one goes to detours).
pub fn build_ad_benchmark(pool: &[Trajectory], params: &AnomalyParams, seed: u64) -> Result<AdBenchmark, AnomalyError> {
    params.validate().map_err(AnomalyError::Params)?;
    if pool.len() < MIN_POOL {
        return Err(AnomalyError::PoolTooSmall(pool.len()));
    }
    let total = ceil_count(params.inject_ratio * pool.len() as f64).min(pool.len());
    let n_detour = total.div_ceil(2);
    let n_switch = total - n_detour;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);

    let mut out: Vec<Trajectory> = pool
        .iter()
        .map(|t| t.clone().with_label(Some(Label::Anomaly(false))))
        .collect();
    let mut manifest = Vec::with_capacity(total);
    let mut used = vec![false; pool.len()];
    let mut cursor = order.iter();

    while manifest.len() < n_detour {
        let &i = cursor
            .find(|&&i| pool[i].len() >= MIN_POINTS)
            .ok_or(AnomalyError::TooShort {
                id: "pool".into(),
                len: 0,
            })?;
        let s = rng.random::<u64>();
        let (t, info) = inject_detour_with_info(&pool[i], params, s)?;
        out[i] = t;
        used[i] = true;
        manifest.push(InjectionRecord {
            trajectory_id: pool[i].id().to_string(),
            pool_index: i,
            kind: InjectionKind::Detour(info),
            params: *params,
            seed: s,
        });
    }
    let mut switched = 0;
    while switched < n_switch {
        let next = cursor.find(|&&i| pool[i].len() >= MIN_POINTS && !used[i]);
        let Some(&i) = next else {
            return Err(AnomalyError::NoDonor("benchmark pool".into()));
        };
        let donors: Vec<usize> = (0..pool.len())
            .filter(|&j| j != i && pool[j].len() >= MIN_POINTS && compatible_donor(&pool[i], &pool[j]))
            .collect();
        let Some(&j) = donors.get(rng.random_range(0..donors.len().max(1))) else {
            continue;
        };
        let (t, info) = inject_switch_with_info(&pool[i], &pool[j], params.mu)?;
        out[i] = t;
        used[i] = true;
        switched += 1;
        manifest.push(InjectionRecord {
            trajectory_id: pool[i].id().to_string(),
            pool_index: i,
            kind: InjectionKind::Switch(info),
            params: *params,
            seed,
        });
    }
    manifest.sort_by_key(|r| r.pool_index);
    Ok(AdBenchmark {
        trajectories: out,
        manifest,
    })
}

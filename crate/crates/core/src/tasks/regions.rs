//! Region vocabulary for mobility prediction: a uniform grid over the
//! dataset's bounding box.

use serde::{Deserialize, Serialize};

use super::ceil_count;
use crate::geodesy::{meters_per_deg_lon, LonLat, METERS_PER_DEG_LAT};
use crate::labels::RegionId;
use crate::traj::{TrajPoint, Trajectory};

pub const DEFAULT_GRID: u16 = 32;

/// `rows` x `cols` cells; row 0 is the northern edge, column 0 the western.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
    pub rows: u16,
    pub cols: u16,
}

impl RegionGrid {
    /// Grid over every point of `pool`. Degenerate extents are widened
    /// slightly so every cell has a positive size.
    pub fn covering(pool: &[Trajectory], rows: u16, cols: u16) -> Option<Self> {
        assert!(rows > 0 && cols > 0, "grid needs at least one cell");
        let mut it = pool.iter().flat_map(|t| t.points().iter());
        let first = it.next()?;
        let mut g = Self {
            min_lon: first.lon,
            min_lat: first.lat,
            max_lon: first.lon,
            max_lat: first.lat,
            rows,
            cols,
        };
        for p in it {
            g.min_lon = g.min_lon.min(p.lon);
            g.max_lon = g.max_lon.max(p.lon);
            g.min_lat = g.min_lat.min(p.lat);
            g.max_lat = g.max_lat.max(p.lat);
        }
        const EPS: f64 = 1e-6;
        if g.max_lon - g.min_lon < EPS {
            g.min_lon -= EPS;
            g.max_lon += EPS;
        }
        if g.max_lat - g.min_lat < EPS {
            g.min_lat -= EPS;
            g.max_lat += EPS;
        }
        Some(g)
    }

    /// Cell containing `p`; points outside the box snap to the nearest cell.
    pub fn region_of(&self, p: LonLat) -> RegionId {
        let fx = (p.lon - self.min_lon) / (self.max_lon - self.min_lon);
        let fy = (self.max_lat - p.lat) / (self.max_lat - self.min_lat);
        let idx = |f: f64, n: u16| ((f * f64::from(n)).floor().max(0.0) as u64).min(u64::from(n) - 1) as u16;
        RegionId {
            row: idx(fy, self.rows),
            col: idx(fx, self.cols),
        }
    }

    pub fn contains_id(&self, r: RegionId) -> bool {
        r.row < self.rows && r.col < self.cols
    }

    /// Plain-language description of the grid for the prompt.
    pub fn describe(&self) -> String {
        let mid_lat = (self.min_lat + self.max_lat) / 2.0;
        let cell_w = (self.max_lon - self.min_lon) / f64::from(self.cols) * meters_per_deg_lon(mid_lat);
        let cell_h = (self.max_lat - self.min_lat) / f64::from(self.rows) * METERS_PER_DEG_LAT;
        format!(
            "The area is split into a {rows} x {cols} grid of regions covering longitude {:.5} to {:.5} \
and latitude {:.5} to {:.5}. Region ids have the form RxxCyy: row xx counts from 00 at the northern \
edge to {:02} at the southern edge, column yy from 00 at the western edge to {:02} at the eastern edge. \
Each region is about {:.0} m wide and {:.0} m tall.",
            self.min_lon,
            self.max_lon,
            self.min_lat,
            self.max_lat,
            self.rows - 1,
            self.cols - 1,
            cell_w,
            cell_h,
            rows = self.rows,
            cols = self.cols,
        )
    }
}

/// Splits `traj` into the visible prefix and the withheld trailing
/// `drop_fraction` of its points (at least one point stays visible).
pub fn mp_split(traj: &Trajectory, drop_fraction: f64) -> (Trajectory, Vec<TrajPoint>) {
    let l = traj.len();
    let drop = ceil_count(drop_fraction * l as f64).min(l - 1);
    let keep = l - drop;
    (traj.prefix(keep), traj.points()[keep..].to_vec())
}

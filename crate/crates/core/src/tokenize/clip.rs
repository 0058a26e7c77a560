use serde::{Deserialize, Serialize};

use crate::geodesy::{meters_per_deg_lon, LonLat, METERS_PER_DEG_LAT};
use crate::traj::TrajPoint;

/// Smallest extent of a clip box along either axis, in meters.
pub const MIN_CLIP_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl ClipBox {
    pub fn contains(&self, p: LonLat) -> bool {
        (self.min_lon..=self.max_lon).contains(&p.lon) && (self.min_lat..=self.max_lat).contains(&p.lat)
    }

    pub fn center(&self) -> LonLat {
        LonLat::new((self.min_lon + self.max_lon) / 2.0, (self.min_lat + self.max_lat) / 2.0)
    }

    pub fn width_m(&self) -> f64 {
        (self.max_lon - self.min_lon) * meters_per_deg_lon(self.center().lat)
    }

    pub fn height_m(&self) -> f64 {
        (self.max_lat - self.min_lat) * METERS_PER_DEG_LAT
    }
}

/// Bounding box of `points` grown by `delta` times its span on every side.
///
/// An axis shorter than [`MIN_CLIP_M`] after padding is widened around its
/// centre to that length, so a single point still gets a usable map.
pub fn clip_box(points: &[TrajPoint], delta: f64) -> ClipBox {
    assert!(!points.is_empty(), "clip box of an empty slice");
    assert!(delta >= 0.0, "padding must be >= 0");
    let (mut min_lon, mut min_lat) = (f64::INFINITY, f64::INFINITY);
    let (mut max_lon, mut max_lat) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_lon = min_lon.min(p.lon);
        max_lon = max_lon.max(p.lon);
        min_lat = min_lat.min(p.lat);
        max_lat = max_lat.max(p.lat);
    }
    let pad_lon = (max_lon - min_lon) * delta;
    let pad_lat = (max_lat - min_lat) * delta;
    let mut b = ClipBox {
        min_lon: min_lon - pad_lon,
        min_lat: min_lat - pad_lat,
        max_lon: max_lon + pad_lon,
        max_lat: max_lat + pad_lat,
    };
    // tiny slack so the measured extent is never a rounding error below the floor
    let floor = MIN_CLIP_M * (1.0 + 1e-9);
    let c = b.center();
    let want_lat = floor / METERS_PER_DEG_LAT;
    if b.max_lat - b.min_lat < want_lat {
        b.min_lat = c.lat - want_lat / 2.0;
        b.max_lat = c.lat + want_lat / 2.0;
    }
    let want_lon = floor / meters_per_deg_lon(b.center().lat).max(1e-6);
    if b.max_lon - b.min_lon < want_lon {
        b.min_lon = c.lon - want_lon / 2.0;
        b.max_lon = c.lon + want_lon / 2.0;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_by_fraction_of_span() {
        let pts = [TrajPoint::new(0.0, 0.0, 0), TrajPoint::new(1.0, 1.0, 1)];
        let b = clip_box(&pts, 0.15);
        for (got, want) in [
            (b.min_lon, -0.15),
            (b.min_lat, -0.15),
            (b.max_lon, 1.15),
            (b.max_lat, 1.15),
        ] {
            assert!((got - want).abs() < 1e-12);
        }
        let b = clip_box(&pts, 0.0);
        assert_eq!((b.min_lon, b.min_lat, b.max_lon, b.max_lat), (0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn single_point_gets_floor() {
        let p = TrajPoint::new(104.07, 30.66, 0);
        let b = clip_box(&[p], 0.15);
        assert!(b.width_m() >= 100.0 && b.height_m() >= 100.0);
        assert!((b.center().lon - p.lon).abs() < 1e-12);
        assert!((b.center().lat - p.lat).abs() < 1e-12);
        assert!(b.contains(p.pos()));
    }
}

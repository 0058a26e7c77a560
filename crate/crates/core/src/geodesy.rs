//! Great-circle distances on a spherical Earth and the small amount of local
//! planar geometry needed for point-to-polyline queries.

use serde::{Deserialize, Serialize};

use crate::traj::TrajPoint;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Length of one degree of latitude on the sphere, in meters.
pub const METERS_PER_DEG_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

impl From<TrajPoint> for LonLat {
    fn from(p: TrajPoint) -> Self {
        p.pos()
    }
}

impl From<&TrajPoint> for LonLat {
    fn from(p: &TrajPoint) -> Self {
        p.pos()
    }
}

/// Haversine distance between two trajectory points in meters.
pub fn haversine(a: &TrajPoint, b: &TrajPoint) -> f64 {
    distance_m(a.pos(), b.pos())
}

/// Haversine distance between two coordinates in meters.
///
/// Absolute differences keep the result bit-for-bit symmetric.
pub fn distance_m(a: LonLat, b: LonLat) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).abs().to_radians();
    let dlambda = (b.lon - a.lon).abs().to_radians();
    let s_phi = (dphi / 2.0).sin();
    let s_lambda = (dlambda / 2.0).sin();
    let h = s_phi * s_phi + phi1.cos() * phi2.cos() * s_lambda * s_lambda;
    2.0 * EARTH_RADIUS_M * h.min(1.0).sqrt().asin()
}

/// Initial bearing from `a` to `b` in radians, clockwise from north.
pub fn bearing_rad(a: LonLat, b: LonLat) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dl = (b.lon - a.lon).to_radians();
    let y = dl.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dl.cos();
    y.atan2(x)
}

/// Point reached by travelling `dist_m` along the great circle leaving
/// `from` at `bearing` (radians).
pub fn destination(from: LonLat, bearing: f64, dist_m: f64) -> LonLat {
    let delta = dist_m / EARTH_RADIUS_M;
    let phi1 = from.lat.to_radians();
    let lambda1 = from.lon.to_radians();
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * bearing.cos()).asin();
    let lambda2 = lambda1 + (bearing.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    let mut lon = lambda2.to_degrees();
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    LonLat::new(lon, phi2.to_degrees())
}

/// Meters per degree of longitude at latitude `lat` (degrees).
pub fn meters_per_deg_lon(lat: f64) -> f64 {
    METERS_PER_DEG_LAT * lat.to_radians().cos()
}

/// Closest point to `q` on segment `a`-`b`, found in an equirectangular plane
/// centred on `q`. The plane is affine in (lon, lat), so the result is a
/// convex combination of the endpoints.
pub fn closest_on_segment(q: LonLat, a: LonLat, b: LonLat) -> LonLat {
    let k = q.lat.to_radians().cos();
    let ax = (a.lon - q.lon) * k;
    let ay = a.lat - q.lat;
    let dx = (b.lon - a.lon) * k;
    let dy = b.lat - a.lat;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0);
    LonLat::new(a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat))
}

pub fn point_segment_distance(q: LonLat, a: LonLat, b: LonLat) -> f64 {
    distance_m(q, closest_on_segment(q, a, b))
}

fn segments_intersect(a: LonLat, b: LonLat, c: LonLat, d: LonLat) -> bool {
    let k = ((a.lat + b.lat + c.lat + d.lat) / 4.0).to_radians().cos();
    let p = |v: LonLat| (v.lon * k, v.lat);
    let (a, b, c, d) = (p(a), p(b), p(c), p(d));
    let orient = |o: (f64, f64), u: (f64, f64), v: (f64, f64)| -> i8 {
        let cross = (u.0 - o.0) * (v.1 - o.1) - (u.1 - o.1) * (v.0 - o.0);
        if cross > 0.0 {
            1
        } else if cross < 0.0 {
            -1
        } else {
            0
        }
    };
    // v lies within the bounding box of o-u (used for collinear cases)
    let within = |o: (f64, f64), u: (f64, f64), v: (f64, f64)| {
        v.0 >= o.0.min(u.0) && v.0 <= o.0.max(u.0) && v.1 >= o.1.min(u.1) && v.1 <= o.1.max(u.1)
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && within(c, d, a))
        || (d2 == 0 && within(c, d, b))
        || (d3 == 0 && within(a, b, c))
        || (d4 == 0 && within(a, b, d))
}

/// Minimum distance between segments `a`-`b` and `c`-`d`: zero when they
/// cross, otherwise the best endpoint-to-segment distance.
pub fn segment_segment_distance(a: LonLat, b: LonLat, c: LonLat, d: LonLat) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Distance from `q` to a polyline; a single-vertex polyline is a point.
pub fn point_polyline_distance(q: LonLat, line: &[LonLat]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => distance_m(q, *only),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(q, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Minimum distance between two polylines.
pub fn polyline_polyline_distance(a: &[LonLat], b: &[LonLat]) -> f64 {
    match (a, b) {
        ([], _) | (_, []) => f64::INFINITY,
        ([p], _) => point_polyline_distance(*p, b),
        (_, [p]) => point_polyline_distance(*p, a),
        _ => {
            let mut best = f64::INFINITY;
            for e in a.windows(2) {
                for f in b.windows(2) {
                    best = best.min(segment_segment_distance(e[0], e[1], f[0], f[1]));
                    if best == 0.0 {
                        return 0.0;
                    }
                }
            }
            best
        }
    }
}

/// Degree half-widths `(dlon, dlat)` of a box guaranteed to contain every
/// point within `radius_m` of any point whose |latitude| is at most
/// `max_abs_lat`. `dlon >= 180` means the full longitude range.
pub fn degree_margins(radius_m: f64, max_abs_lat: f64) -> (f64, f64) {
    const SLACK: f64 = 1e-9;
    let ang = radius_m / EARTH_RADIUS_M;
    let dlat = ang.to_degrees() * (1.0 + 1e-9) + SLACK;
    let lat = max_abs_lat.abs().min(90.0);
    let cos_lat = lat.to_radians().cos();
    let dlon = if ang >= std::f64::consts::FRAC_PI_2 || cos_lat <= 0.0 {
        360.0
    } else {
        let s = ang.sin() / cos_lat;
        if s >= 1.0 {
            360.0
        } else {
            s.asin().to_degrees() * (1.0 + 1e-9) + SLACK
        }
    };
    (dlon, dlat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_meridian_degree() {
        let a = TrajPoint::new(116.3, 39.9, 0);
        assert_eq!(haversine(&a, &a), 0.0);
        let d = distance_m(LonLat::new(0.0, 0.0), LonLat::new(0.0, 1.0));
        assert!((d - 111_194.9).abs() < 0.1, "{d}");
    }

    #[test]
    fn destination_lands_at_requested_distance() {
        let from = LonLat::new(104.06, 30.67);
        for bearing in [0.0, 0.7, 1.9, 3.1, 4.4, 5.9] {
            let to = destination(from, bearing, 150.0);
            assert!((distance_m(from, to) - 150.0).abs() < 1e-6);
        }
    }

    #[test]
    fn closest_point_projects_onto_interior() {
        let a = LonLat::new(0.0, 0.0);
        let b = LonLat::new(0.01, 0.0);
        let q = LonLat::new(0.005, 0.001);
        let c = closest_on_segment(q, a, b);
        assert!((c.lon - 0.005).abs() < 1e-12 && c.lat == 0.0);
        let d = point_segment_distance(q, a, b);
        assert!((d - 0.001 * METERS_PER_DEG_LAT).abs() < 1e-6);
        // beyond the endpoint the vertex is closest
        let q2 = LonLat::new(0.02, 0.0);
        assert_eq!(closest_on_segment(q2, a, b), b);
    }

    #[test]
    fn crossing_segments_have_zero_distance() {
        let d = segment_segment_distance(
            LonLat::new(0.0, -0.01),
            LonLat::new(0.0, 0.01),
            LonLat::new(-0.01, 0.0),
            LonLat::new(0.01, 0.0),
        );
        assert_eq!(d, 0.0);
        let apart = segment_segment_distance(
            LonLat::new(0.0, 0.0),
            LonLat::new(0.01, 0.0),
            LonLat::new(0.0, 0.001),
            LonLat::new(0.01, 0.001),
        );
        assert!((apart - 0.001 * METERS_PER_DEG_LAT).abs() < 1e-3);
    }

    #[test]
    fn margins_contain_the_cap() {
        let q = LonLat::new(10.0, 60.0);
        let (dlon, dlat) = degree_margins(500.0, 60.0);
        for i in 0..360 {
            let p = destination(q, (i as f64).to_radians(), 500.0);
            assert!((p.lon - q.lon).abs() <= dlon);
            assert!((p.lat - q.lat).abs() <= dlat);
        }
        assert_eq!(degree_margins(500.0, 90.0).0, 360.0);
    }
}

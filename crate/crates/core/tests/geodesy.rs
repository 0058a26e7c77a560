use proptest::prelude::*;
use trajlens_core::geodesy::{destination, distance_m, LonLat};
use trajlens_core::{haversine, TrajPoint, EARTH_RADIUS_M};

/// Great-circle distance by the atan2 (Vincenty, sphere) formula.
fn vincenty_sphere(a: LonLat, b: LonLat) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let y = ((p2.cos() * dl.sin()).powi(2) + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2)).sqrt();
    let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    EARTH_RADIUS_M * y.atan2(x)
}

fn coord() -> impl Strategy<Value = LonLat> {
    (-180.0f64..=180.0, -90.0f64..=90.0).prop_map(|(lon, lat)| LonLat::new(lon, lat))
}

#[test]
fn one_degree_of_meridian() {
    let d = haversine(&TrajPoint::new(0.0, 0.0, 0), &TrajPoint::new(0.0, 1.0, 0));
    assert!((d - 111_194.9).abs() <= 0.1, "{d}");
}

#[test]
fn antipodes_are_half_a_circumference_apart() {
    let d = distance_m(LonLat::new(0.0, 0.0), LonLat::new(180.0, 0.0));
    assert!((d - std::f64::consts::PI * EARTH_RADIUS_M).abs() < 1e-6);
}

proptest! {
    #[test]
    fn identity_and_symmetry(a in coord(), b in coord()) {
        prop_assert_eq!(distance_m(a, a), 0.0);
        prop_assert_eq!(distance_m(a, b), distance_m(b, a));
        prop_assert!(distance_m(a, b) >= 0.0);
    }

    #[test]
    fn agrees_with_vincenty(a in coord(), b in coord()) {
        let h = distance_m(a, b);
        let v = vincenty_sphere(a, b);
        prop_assert!((h - v).abs() <= 1e-6 * v.max(1.0) + 1e-3, "{} vs {}", h, v);
    }

    #[test]
    fn triangle_inequality(a in coord(), b in coord(), c in coord()) {
        prop_assert!(distance_m(a, c) <= distance_m(a, b) + distance_m(b, c) + 1e-6);
    }

    #[test]
    fn destination_lands_at_requested_distance(
        lon in -170.0f64..170.0,
        lat in -70.0f64..70.0,
        bearing in 0.0f64..std::f64::consts::TAU,
        d in 1.0f64..5_000.0,
    ) {
        let from = LonLat::new(lon, lat);
        let to = destination(from, bearing, d);
        prop_assert!((distance_m(from, to) - d).abs() < 1e-6 * d + 1e-6);
    }
}

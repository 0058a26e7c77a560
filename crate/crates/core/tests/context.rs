use std::collections::BTreeSet;

use proptest::prelude::*;
use trajlens_core::context::{Poi, RoadClass, RoadSegment, TrafficLight};
use trajlens_core::geodesy::LonLat;
use trajlens_core::{ContextDb, ContextKind, FilterPolicy};

const BASE: LonLat = LonLat { lon: 116.3, lat: 39.9 };

fn near() -> impl Strategy<Value = LonLat> {
    (-0.01f64..0.01, -0.01f64..0.01).prop_map(|(x, y)| LonLat::new(BASE.lon + x, BASE.lat + y))
}

fn db() -> impl Strategy<Value = ContextDb> {
    (
        prop::collection::vec(prop::collection::vec(near(), 1..5), 0..8),
        prop::collection::vec(near(), 0..20),
        prop::collection::vec(near(), 0..10),
        prop_oneof![Just(40.0), Just(250.0), Just(1000.0)],
    )
        .prop_map(|(roads, pois, lights, cell)| {
            let roads = roads
                .into_iter()
                .enumerate()
                .map(|(i, polyline)| RoadSegment {
                    id: format!("r{i}"),
                    polyline,
                    road_class: RoadClass::Primary,
                    name: None,
                })
                .collect();
            let pois = pois
                .into_iter()
                .enumerate()
                .map(|(i, pos)| Poi {
                    id: format!("p{i}"),
                    pos,
                    category: "shop".into(),
                    name: None,
                })
                .collect();
            let lights = lights
                .into_iter()
                .enumerate()
                .map(|(i, pos)| TrafficLight {
                    id: format!("l{i}"),
                    pos,
                })
                .collect();
            ContextDb::with_cell_size(roads, pois, lights, cell)
        })
}

fn brute(db: &ContextDb, view: &[LonLat], kind: ContextKind, theta: f64) -> BTreeSet<usize> {
    (0..db.len(kind))
        .filter(|&i| db.element_distance(kind, i, view) <= theta)
        .collect()
}

fn kept(db: &ContextDb, view: &[LonLat], kind: ContextKind, theta: f64) -> BTreeSet<usize> {
    db.filter(view, kind, &FilterPolicy::uniform(theta))
        .into_iter()
        .map(|r| r.index)
        .collect()
}

proptest! {
    #[test]
    fn index_filter_equals_brute_force(
        db in db(),
        view in prop::collection::vec(near(), 1..6),
        theta in 1.0f64..600.0,
    ) {
        for kind in ContextKind::ALL {
            prop_assert_eq!(kept(&db, &view, kind, theta), brute(&db, &view, kind, theta));
        }
    }

    #[test]
    fn retained_set_grows_with_theta(
        db in db(),
        view in prop::collection::vec(near(), 1..6),
        a in 1.0f64..400.0,
        b in 1.0f64..400.0,
    ) {
        let (lo, hi) = (a.min(b), a.max(b));
        for kind in ContextKind::ALL {
            prop_assert!(kept(&db, &view, kind, lo).is_subset(&kept(&db, &view, kind, hi)));
        }
    }

    #[test]
    fn element_at_exactly_theta_is_kept(db in db(), view in prop::collection::vec(near(), 1..6)) {
        for kind in ContextKind::ALL {
            for i in 0..db.len(kind) {
                let d = db.element_distance(kind, i, &view);
                if d > 0.0 {
                    prop_assert!(kept(&db, &view, kind, d).contains(&i));
                }
            }
        }
    }
}

#[test]
fn filtered_distances_are_reported() {
    let db = ContextDb::new(
        Vec::new(),
        vec![Poi {
            id: "p".into(),
            pos: LonLat::new(BASE.lon, BASE.lat + 0.0005),
            category: "bank".into(),
            name: None,
        }],
        Vec::new(),
    );
    let view = [BASE, LonLat::new(BASE.lon + 0.001, BASE.lat)];
    let r = db.filter(&view, ContextKind::Poi, &FilterPolicy::uniform(100.0));
    assert_eq!(r.len(), 1);
    assert!((r[0].distance_m - 55.6).abs() < 0.1, "{}", r[0].distance_m);
    assert!(db
        .filter(&view, ContextKind::Poi, &FilterPolicy::uniform(50.0))
        .is_empty());
}

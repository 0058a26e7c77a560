use proptest::prelude::*;
use trajlens_core::geodesy::METERS_PER_DEG_LAT;
use trajlens_core::tokenize::text::{format_time, parse_text, text_token, Feature, FeatureMask, SegmentFeatures};
use trajlens_core::tokenize::{clip_box, Checkerboard, StyleSheet};
use trajlens_core::tokenize::{render, TileSource};
use trajlens_core::{ContextDb, ContextKind, FilterPolicy, TrajPoint};

/// 2024-11-01 13:08:36 UTC.
const START: i64 = 1_730_466_516;

/// Points along a meridian: `(meters, seconds)` per step.
fn walk(steps: &[(f64, i64)]) -> Vec<TrajPoint> {
    let (mut lat, mut t) = (30.65, START);
    let mut pts = vec![TrajPoint::new(104.06, lat, t)];
    for (d, dt) in steps {
        lat += d / METERS_PER_DEG_LAT;
        t += dt;
        pts.push(TrajPoint::new(104.06, lat, t));
    }
    pts
}

#[test]
fn template_reproduces_worked_example() {
    // 23 m in 20 s, 255.3 m in 30 s, 132.5 m in 16 s
    let pts = walk(&[(23.0, 20), (255.3, 30), (132.5, 16)]);
    let tok = text_token(&pts, &FeatureMask::none());
    let expected = "--- Sub-trajectory Segment Description ---\n\
        Start Time: 2024-11-01 13:08:36\n\
        End Time: 2024-11-01 13:09:42\n\
        Duration (seconds): 66\n\
        Total Distance (meters): 410.8\n\
        Average Speed (m/s): 6.22\n\
        Maximum Speed (m/s): 8.51\n\
        Minimum Speed (m/s): 1.15\n\
        ----------------------------------------";
    assert_eq!(tok.rendered, expected);
    assert!(tok.is_consistent());
}

#[test]
fn masked_and_degenerate_fields() {
    let pts = walk(&[(10.0, 5), (0.0, 5)]);
    let tok = text_token(&pts, &FeatureMask::travel_time());
    assert!(tok.rendered.contains("Start Time: 2024-11-01 13:08:36\n"));
    assert!(tok.rendered.contains("Duration (seconds): [withheld]\n"));
    assert!(tok.rendered.contains("Total Distance (meters): 10.0\n"));
    let single = text_token(&pts[..1], &FeatureMask::none());
    assert!(single.rendered.contains("Average Speed (m/s): [n/a]\n"));
    assert!(single.rendered.contains("Minimum Speed (m/s): [n/a]\n"));
    assert_eq!(parse_text(&single.rendered).unwrap(), single.features);
}

proptest! {
    #[test]
    fn rendered_text_parses_back(steps in prop::collection::vec((0.0f64..300.0, 1i64..120), 0..20)) {
        let pts = walk(&steps);
        let f = SegmentFeatures::from_points(&pts);
        prop_assert_eq!(parse_text(&f.render(&FeatureMask::none())).unwrap(), f);
        prop_assert_eq!(f.end_time - f.start_time, f.duration_s);
        if let (Some(lo), Some(hi)) = (f.min_speed, f.max_speed) {
            prop_assert!(lo <= hi);
        }
    }

    #[test]
    fn masks_hide_only_their_fields(hidden in prop::collection::btree_set(0usize..7, 0..7)) {
        let features: Vec<Feature> = hidden.iter().map(|&i| Feature::ALL[i]).collect();
        let mask = FeatureMask::of(&features);
        let text = text_token(&walk(&[(50.0, 10)]), &mask).rendered;
        for f in Feature::ALL {
            let line = text.lines().find(|l| l.starts_with(f.label())).unwrap();
            prop_assert_eq!(line.ends_with("[withheld]"), mask.hides(f));
        }
    }

    #[test]
    fn clip_box_contains_its_points(steps in prop::collection::vec((0.0f64..500.0, 1i64..60), 0..15), delta in 0.0f64..0.5) {
        let pts = walk(&steps);
        let c = clip_box(&pts, delta);
        prop_assert!(pts.iter().all(|p| c.contains(p.pos())));
        prop_assert!(c.width_m() >= 99.9 && c.height_m() >= 99.9);
    }
}

#[test]
fn render_is_deterministic_and_in_bounds() {
    let pts = walk(&[(80.0, 10), (120.0, 12), (60.0, 9)]);
    let clip = clip_box(&pts, 0.15);
    let style = StyleSheet {
        image_px: 128,
        ..StyleSheet::default()
    };
    let tiles: &dyn TileSource = &Checkerboard::default();
    let db = ContextDb::empty();
    let a = render(
        &pts,
        &clip,
        ContextKind::Road,
        &db,
        &FilterPolicy::default(),
        &style,
        tiles,
    );
    let b = render(
        &pts,
        &clip,
        ContextKind::Road,
        &db,
        &FilterPolicy::default(),
        &style,
        tiles,
    );
    assert_eq!(a, b);
    assert_eq!((a.width, a.height), (128, 128));
    assert_eq!(a.report.out_of_bounds_points, 0);
    assert!(a.image.starts_with(b"\x89PNG"));
    assert_eq!(format_time(START), "2024-11-01 13:08:36");
}

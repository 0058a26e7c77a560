use proptest::prelude::*;
use trajlens_core::geodesy::METERS_PER_DEG_LAT;
use trajlens_core::segmentation::{segment_with_cost, SegmentCost};
use trajlens_core::{CostWeights, TrajPoint};

/// Minimum over every one of the 2^(L-1) partitions, segment costs summed
/// left to right.
fn brute_force(cost: &SegmentCost) -> f64 {
    let n = cost.len();
    let mut best = f64::INFINITY;
    for cuts in 0u32..(1 << (n - 1)) {
        let mut total = 0.0;
        let mut start = 0;
        for i in 0..n - 1 {
            if cuts >> i & 1 == 1 {
                total += cost.cost(start, i);
                start = i + 1;
            }
        }
        total += cost.cost(start, n - 1);
        best = best.min(total);
    }
    best
}

fn scene() -> impl Strategy<Value = (Vec<TrajPoint>, Vec<Option<usize>>)> {
    prop::collection::vec((0.0f64..40.0, 1i64..15, prop::option::weighted(0.8, 0usize..3)), 1..=12).prop_map(|steps| {
        let mut lat = 30.0;
        let mut t = 0;
        let mut pts = Vec::new();
        let mut roads = Vec::new();
        for (d, dt, r) in steps {
            pts.push(TrajPoint::new(104.0, lat, t));
            roads.push(r);
            lat += d / METERS_PER_DEG_LAT;
            t += dt;
        }
        (pts, roads)
    })
}

fn weights() -> impl Strategy<Value = CostWeights> {
    (0.0f64..3.0, 0.0f64..3.0, 0.01f64..3.0).prop_map(|(speed, road, len)| CostWeights {
        speed,
        road,
        len,
        ..CostWeights::exact()
    })
}

proptest! {
    #[test]
    fn dp_matches_exhaustive((pts, roads) in scene(), w in weights()) {
        let cost = SegmentCost::new(&pts, &roads, w);
        let seg = segment_with_cost("p", &cost);
        prop_assert_eq!(seg.total_cost, brute_force(&cost));
        prop_assert!(seg.covers(pts.len()));
        let resummed = seg.segment_costs.iter().fold(0.0, |acc, c| acc + c);
        prop_assert_eq!(resummed, seg.total_cost);
    }

    #[test]
    fn capped_segments_respect_cap((pts, roads) in scene(), cap in 1usize..6) {
        let w = CostWeights { max_seg_points: Some(cap), ..CostWeights::default() };
        let seg = segment_with_cost("p", &SegmentCost::new(&pts, &roads, w));
        prop_assert!(seg.covers(pts.len()));
        prop_assert!(seg.spans.iter().all(|s| s.len() <= cap));
    }

    #[test]
    fn normalised_factors_stay_in_unit_range((pts, roads) in scene()) {
        let cost = SegmentCost::new(&pts, &roads, CostWeights::exact());
        let norm = cost.normalisers();
        for b in 0..pts.len() {
            for a in 0..=b {
                let f = cost.factors(a, b);
                prop_assert!(f.speed / norm.speed <= 1.0 + 1e-12);
                prop_assert!(f.road / norm.road <= 1.0);
                prop_assert!(f.len / norm.len <= 1.0);
            }
        }
    }
}

use proptest::prelude::*;
use trajlens_core::geodesy::{distance_m, METERS_PER_DEG_LAT};
use trajlens_core::tasks::anomaly::{inject_detour_with_info, inject_switch_with_info, InjectionKind};
use trajlens_core::tasks::metrics::{multiclass, pr_auc, regression};
use trajlens_core::tasks::{build_ad_benchmark, parse_answer, score, AnomalyParams, Answer, TaskKind, TaskResult};
use trajlens_core::{Label, TrajPoint, Trajectory, TransportMode};

/// Straight northbound trip of `n` points, 20 m apart, offset `east_m`.
fn line(id: &str, n: usize, east_m: f64) -> Trajectory {
    let pts = (0..n)
        .map(|i| {
            TrajPoint::new(
                104.0 + east_m / 95_800.0,
                30.6 + 20.0 * i as f64 / METERS_PER_DEG_LAT,
                10 * i as i64,
            )
        })
        .collect();
    Trajectory::new(id, pts).unwrap()
}

#[test]
fn detour_displaces_alpha_fraction_by_d_cells() {
    let t = line("t", 100, 0.0);
    for seed in 0..20 {
        let (out, info) = inject_detour_with_info(&t, &AnomalyParams::default(), seed).unwrap();
        assert_eq!(info.count, 10);
        let moved: Vec<f64> = t
            .points()
            .iter()
            .zip(out.points())
            .map(|(a, b)| distance_m(a.pos(), b.pos()))
            .filter(|d| *d > 0.0)
            .collect();
        assert_eq!(moved.len(), 10);
        assert!(moved.iter().all(|d| (d - 150.0).abs() <= 1.0), "{moved:?}");
        assert_eq!(out.first(), t.first());
        assert_eq!(out.last(), t.last());
        assert_eq!(out.label(), Some(&Label::Anomaly(true)));
    }
}

#[test]
fn switch_keeps_prefix_then_follows_donor() {
    let t = line("t", 100, 0.0);
    let donor = line("d", 80, 300.0);
    let (out, info) = inject_switch_with_info(&t, &donor, 0.3).unwrap();
    assert_eq!(info.kept, 30);
    assert_eq!(&out.points()[..30], &t.points()[..30]);
    assert!(out.points().windows(2).all(|w| w[0].t < w[1].t));
    assert_eq!(out.last().pos(), donor.last().pos());
    let far = line("f", 80, 5_000.0);
    assert!(inject_switch_with_info(&t, &far, 0.3).is_err());
}

#[test]
fn benchmark_composition() {
    let pool: Vec<Trajectory> = (0..100)
        .map(|i| line(&format!("p{i:03}"), 60, (i % 7) as f64 * 50.0))
        .collect();
    let b = build_ad_benchmark(&pool, &AnomalyParams::default(), 11).unwrap();
    assert_eq!(b.trajectories.len(), 100);
    let detours = b
        .manifest
        .iter()
        .filter(|r| matches!(r.kind, InjectionKind::Detour(_)))
        .count();
    let switches = b
        .manifest
        .iter()
        .filter(|r| matches!(r.kind, InjectionKind::Switch(_)))
        .count();
    assert_eq!((detours, switches), (3, 2));
    let flagged = b
        .trajectories
        .iter()
        .filter(|t| t.label() == Some(&Label::Anomaly(true)))
        .count();
    assert_eq!(flagged, 5);
    assert_eq!(b, build_ad_benchmark(&pool, &AnomalyParams::default(), 11).unwrap());
    assert!(build_ad_benchmark(&pool[..39], &AnomalyParams::default(), 11).is_err());
}

#[test]
fn regression_hand_values() {
    let r = regression(&[1.0, 2.0], &[2.0, 4.0]);
    assert!((r.mae - 1.5).abs() < 1e-9);
    assert!((r.rmse - 2.5f64.sqrt()).abs() < 1e-9);
    assert!((r.mape - 50.0).abs() < 1e-9);
}

#[test]
fn balanced_confusion_gives_equal_f1_averages() {
    use TransportMode::*;
    let truth = [Walk, Walk, Bike, Bike, Car, Car];
    let pred = [Some(Walk), Some(Bike), Some(Bike), Some(Car), Some(Car), None];
    let m = multiclass(&pred, &truth);
    assert!((m.macro_f1 - m.weighted_f1).abs() < 1e-12);
    assert!((m.accuracy - 0.5).abs() < 1e-12);
}

/// Area under the trapezoid curve through one point per distinct threshold.
fn pr_auc_oracle(scores: &[f64], positive: &[bool]) -> f64 {
    let total = positive.iter().filter(|p| **p).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    let mut curve = vec![(0.0, 1.0)];
    for th in thresholds {
        let tp = scores.iter().zip(positive).filter(|(s, p)| **s >= th && **p).count() as f64;
        let sel = scores.iter().filter(|s| **s >= th).count() as f64;
        curve.push((tp / total, tp / sel));
    }
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

proptest! {
    #[test]
    fn pr_auc_matches_threshold_sweep(items in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..30)) {
        let scores: Vec<f64> = items.iter().map(|i| i.0).collect();
        let pos: Vec<bool> = items.iter().map(|i| i.1).collect();
        let mut s = scores.clone();
        s.sort_by(f64::total_cmp);
        prop_assume!(s.windows(2).all(|w| w[0] < w[1]));
        match pr_auc(&scores, &pos) {
            None => prop_assert!(!pos.contains(&true)),
            Some(a) => prop_assert!((a - pr_auc_oracle(&scores, &pos)).abs() < 1e-9),
        }
    }

    #[test]
    fn acc_at_5_dominates_acc_at_1(
        cases in prop::collection::vec((prop::collection::vec((0u16..4, 0u16..4), 1..6), 0u16..4, 0u16..4), 1..20),
    ) {
        let results: Vec<TaskResult> = cases
            .iter()
            .enumerate()
            .map(|(i, (ranked, r, c))| {
                let ids: Vec<String> = ranked.iter().map(|(r, c)| format!("R{r:02}C{c:02}")).collect();
                let raw = format!("Final Answer: {}", ids.join(", "));
                let truth: Label = format!("region:R{r:02}C{c:02}").parse().unwrap();
                TaskResult::new(&format!("t{i}"), TaskKind::Mp, &raw, None, Some(truth))
            })
            .collect();
        let rep = score(TaskKind::Mp, &results);
        prop_assert!(rep.get("acc@5").unwrap() >= rep.get("acc@1").unwrap());
    }

    #[test]
    fn duration_answers_parse(n in 1u32..100_000) {
        let a = parse_answer(TaskKind::Tte, &format!("reasoning\nFinal Answer: {n} seconds"), Some(0));
        prop_assert_eq!(a, Some(Answer::TravelTime { seconds: f64::from(n) }));
    }
}

#[test]
fn unparsed_travel_times_are_scored_not_dropped() {
    let ok = TaskResult::new(
        "a",
        TaskKind::Tte,
        "Final Answer: 110 seconds",
        Some(0),
        Some(Label::TravelTime(100.0)),
    );
    let bad = TaskResult::new("b", TaskKind::Tte, "no idea", Some(0), Some(Label::TravelTime(200.0)));
    let rep = score(TaskKind::Tte, &[ok, bad]);
    assert_eq!((rep.total, rep.parsed, rep.parse_failures), (2, 1, 1));
    assert!(rep.get("mae").unwrap() > 5.0);
}

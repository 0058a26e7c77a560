//! Synthetic city and taxi-like trips for the shipped sample and tests.
//!
//! The city is a square street grid with arterials every fourth street,
//! traffic lights where two major streets cross and POIs scattered between
//! the blocks. Trips drive along the grid with class-dependent speeds, wait
//! at some lights and carry a few meters of GPS noise. Everything is a pure
//! function of the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajlens_core::context::{ContextDb, Poi, RoadClass, RoadSegment, TrafficLight};
use trajlens_core::geodesy::{distance_m, meters_per_deg_lon, LonLat, METERS_PER_DEG_LAT};
use trajlens_core::traj::{TrajPoint, Trajectory};

pub const POI_CATEGORIES: [&str; 8] = [
    "restaurant",
    "school",
    "hospital",
    "mall",
    "bank",
    "hotel",
    "park",
    "station",
];

/// 2024-11-01 00:00:00 UTC.
pub const SAMPLE_EPOCH: i64 = 1_730_419_200;

#[derive(Debug, Clone)]
pub struct City {
    pub origin: LonLat,
    pub n: usize,
    pub spacing_m: f64,
    pub db: ContextDb,
}

fn street_class(k: usize) -> RoadClass {
    if k.is_multiple_of(4) {
        RoadClass::Primary
    } else if k.is_multiple_of(2) {
        RoadClass::Secondary
    } else {
        RoadClass::Residential
    }
}

fn cruise_speed(class: RoadClass) -> f64 {
    match class {
        RoadClass::Motorway => 20.0,
        RoadClass::Primary => 12.0,
        RoadClass::Secondary => 9.0,
        _ => 6.0,
    }
}

impl City {
    /// `n` x `n` intersections `spacing_m` apart, south-west corner at
    /// `origin`.
    pub fn new(origin: LonLat, n: usize, spacing_m: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut city = City {
            origin,
            n,
            spacing_m,
            db: ContextDb::empty(),
        };
        let mut roads = Vec::new();
        for j in 0..n {
            roads.push(RoadSegment {
                id: format!("ew{j}"),
                polyline: (0..n).map(|i| city.node(i, j)).collect(),
                road_class: street_class(j),
                name: Some(format!("East-West Street {j}")),
            });
        }
        for i in 0..n {
            roads.push(RoadSegment {
                id: format!("ns{i}"),
                polyline: (0..n).map(|j| city.node(i, j)).collect(),
                road_class: street_class(i),
                name: Some(format!("North-South Street {i}")),
            });
        }
        let mut lights = Vec::new();
        for i in (0..n).step_by(2) {
            for j in (0..n).step_by(2) {
                lights.push(TrafficLight {
                    id: format!("tl{i}_{j}"),
                    pos: city.node(i, j),
                });
            }
        }
        let extent = (n - 1) as f64;
        let pois = (0..6 * n)
            .map(|k| {
                // keep POIs inside blocks, off the street centre lines
                let bx = rng.random_range(0..n - 1) as f64 + rng.random_range(0.2..0.8);
                let by = rng.random_range(0..n - 1) as f64 + rng.random_range(0.2..0.8);
                Poi {
                    id: format!("poi{k}"),
                    pos: city.at(bx.min(extent), by.min(extent)),
                    category: POI_CATEGORIES[k % POI_CATEGORIES.len()].to_string(),
                    name: None,
                }
            })
            .collect();
        city.db = ContextDb::new(roads, pois, lights);
        city
    }

    /// The default sample city: 9 x 9 intersections 400 m apart in Chengdu.
    pub fn sample() -> Self {
        City::new(LonLat::new(104.04, 30.64), 9, 400.0, 7)
    }

    /// Position at fractional grid coordinates.
    pub fn at(&self, gx: f64, gy: f64) -> LonLat {
        LonLat::new(
            self.origin.lon + gx * self.spacing_m / meters_per_deg_lon(self.origin.lat),
            self.origin.lat + gy * self.spacing_m / METERS_PER_DEG_LAT,
        )
    }

    pub fn node(&self, i: usize, j: usize) -> LonLat {
        self.at(i as f64, j as f64)
    }

    fn has_light(&self, i: usize, j: usize) -> bool {
        i.is_multiple_of(2) && j.is_multiple_of(2)
    }

    /// A trip of `edges` grid edges sampled every `interval_s` seconds.
    pub fn trip(&self, id: &str, edges: usize, interval_s: i64, start_t: i64, rng: &mut ChaCha8Rng) -> Trajectory {
        let n = self.n as i64;
        let (mut i, mut j) = (rng.random_range(0..n), rng.random_range(0..n));
        let dirs = [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)];
        let mut dir = rng.random_range(0..4usize);
        let mut nodes = vec![(i, j)];
        for _ in 0..edges {
            let mut options: Vec<usize> = (0..4)
                .filter(|&d| d != (dir + 2) % 4)
                .filter(|&d| {
                    let (ni, nj) = (i + dirs[d].0, j + dirs[d].1);
                    (0..n).contains(&ni) && (0..n).contains(&nj)
                })
                .collect();
            if options.is_empty() {
                options.push((dir + 2) % 4);
            }
            // mostly keep going straight
            dir = if options.contains(&dir) && rng.random_bool(0.65) {
                dir
            } else {
                options[rng.random_range(0..options.len())]
            };
            i += dirs[dir].0;
            j += dirs[dir].1;
            nodes.push((i, j));
        }
        // (position, time) knots along the route, including light stops
        let mut knots: Vec<(LonLat, f64)> = vec![(self.node(nodes[0].0 as usize, nodes[0].1 as usize), 0.0)];
        let mut t = 0.0;
        for w in nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            let class = if a.1 == b.1 {
                street_class(a.1 as usize)
            } else {
                street_class(a.0 as usize)
            };
            let speed = (cruise_speed(class) * rng.random_range(0.75..1.2)).max(2.0);
            let pa = self.node(a.0 as usize, a.1 as usize);
            let pb = self.node(b.0 as usize, b.1 as usize);
            t += distance_m(pa, pb) / speed;
            knots.push((pb, t));
            if self.has_light(b.0 as usize, b.1 as usize) && rng.random_bool(0.4) {
                t += rng.random_range(10.0..40.0);
                knots.push((pb, t));
            }
        }
        let total = t;
        let mut points = Vec::new();
        let mut k = 0;
        let mut s = 0.0;
        loop {
            while k + 1 < knots.len() && knots[k + 1].1 < s {
                k += 1;
            }
            let (p, q) = if k + 1 < knots.len() {
                (knots[k], knots[k + 1])
            } else {
                (knots[k], knots[k])
            };
            let f = if q.1 > p.1 {
                ((s - p.1) / (q.1 - p.1)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let lon = p.0.lon + f * (q.0.lon - p.0.lon);
            let lat = p.0.lat + f * (q.0.lat - p.0.lat);
            let noise = 4.0;
            let dlon = rng.random_range(-noise..noise) / meters_per_deg_lon(lat);
            let dlat = rng.random_range(-noise..noise) / METERS_PER_DEG_LAT;
            points.push(TrajPoint::new(lon + dlon, lat + dlat, start_t + s.round() as i64));
            if s >= total {
                break;
            }
            s = (s + interval_s as f64).min(total);
        }
        Trajectory::new(id, points).expect("synthetic trip is valid")
    }

    /// `count` trips with ids `<prefix>NNN`, starting on different hours of
    /// one day.
    pub fn trips(&self, prefix: &str, count: usize, seed: u64) -> Vec<Trajectory> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|k| {
                let edges = rng.random_range(5..12);
                let start = SAMPLE_EPOCH + rng.random_range(6..23) * 3600 + rng.random_range(0..3600);
                self.trip(&format!("{prefix}{k:03}"), edges, 10, start, &mut rng)
            })
            .collect()
    }
}

//! Region context: roads, POIs and traffic lights behind a grid index.
//!
//! A context file is a GeoJSON `FeatureCollection`. Every feature carries a
//! `kind` property:
//!
//! | kind            | geometry     | properties                              |
//! |-----------------|--------------|-----------------------------------------|
//! | `road`          | `LineString` | `id`, `road_class`, `name` (optional)   |
//! | `poi`           | `Point`      | `id`, `category`, `name` (optional)     |
//! | `traffic_light` | `Point`      | `id` (optional)                         |
//!
//! Unknown road classes load as [`RoadClass::Other`]. Missing ids default to
//! `{kind}-{feature index}`.

mod index;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geodesy::{distance_m, point_polyline_distance, point_segment_distance, polyline_polyline_distance, LonLat};
pub use index::{DegBox, ElementRef, GridIndex, DEFAULT_CELL_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Motorway,
    Primary,
    Secondary,
    Tertiary,
    Residential,
    Service,
    Other,
}

impl RoadClass {
    pub fn parse_lenient(s: &str) -> RoadClass {
        match s.trim().to_ascii_lowercase().as_str() {
            "motorway" | "trunk" => RoadClass::Motorway,
            "primary" => RoadClass::Primary,
            "secondary" => RoadClass::Secondary,
            "tertiary" => RoadClass::Tertiary,
            "residential" => RoadClass::Residential,
            "service" => RoadClass::Service,
            _ => RoadClass::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub id: String,
    pub polyline: Vec<LonLat>,
    pub road_class: RoadClass,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub pos: LonLat,
    pub category: String,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficLight {
    pub id: String,
    pub pos: LonLat,
}

/// A contextual view: one map layer rendered over a spatial partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    Poi,
    Road,
    TrafficLight,
}

impl ContextKind {
    pub const ALL: [ContextKind; 3] = [ContextKind::Poi, ContextKind::Road, ContextKind::TrafficLight];

    pub fn label(&self) -> &'static str {
        match self {
            ContextKind::Poi => "POI",
            ContextKind::Road => "road",
            ContextKind::TrafficLight => "traffic light",
        }
    }

    pub fn slug(&self) -> &'static str {
        match self {
            ContextKind::Poi => "poi",
            ContextKind::Road => "road",
            ContextKind::TrafficLight => "traffic_light",
        }
    }
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ContextKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poi" => Ok(ContextKind::Poi),
            "road" => Ok(ContextKind::Road),
            "traffic_light" | "light" | "lights" => Ok(ContextKind::TrafficLight),
            other => Err(format!("unknown contextual view {other:?}")),
        }
    }
}

/// Per-layer distance thresholds (meters) for context filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub theta_poi: f64,
    pub theta_road: f64,
    pub theta_light: f64,
}

impl FilterPolicy {
    pub fn uniform(theta: f64) -> Self {
        Self {
            theta_poi: theta,
            theta_road: theta,
            theta_light: theta,
        }
    }

    /// Threshold presets for the cities in the public benchmarks: Porto's
    /// dense street grid uses 50 m, the others 100 m.
    pub fn for_region(region: &str) -> Option<Self> {
        match region.to_ascii_lowercase().as_str() {
            "xian" | "xi'an" | "chengdu" | "geolife" | "beijing" => Some(Self::uniform(100.0)),
            "porto" => Some(Self::uniform(50.0)),
            _ => None,
        }
    }

    pub fn theta(&self, kind: ContextKind) -> f64 {
        match kind {
            ContextKind::Poi => self.theta_poi,
            ContextKind::Road => self.theta_road,
            ContextKind::TrafficLight => self.theta_light,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for kind in ContextKind::ALL {
            let t = self.theta(kind);
            if !(t.is_finite() && t > 0.0) {
                return Err(format!("theta for {kind} must be > 0 (got {t})"));
            }
        }
        Ok(())
    }
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self::uniform(100.0)
    }
}

/// An element kept by [`ContextDb::filter`], with its distance to the view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Retained {
    pub index: usize,
    pub distance_m: f64,
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid GeoJSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("feature {feature}: {message}")]
    Feature { feature: usize, message: String },
}

#[derive(Debug, Clone)]
pub struct ContextDb {
    roads: Vec<RoadSegment>,
    pois: Vec<Poi>,
    lights: Vec<TrafficLight>,
    index: GridIndex,
}

impl ContextDb {
    pub fn new(roads: Vec<RoadSegment>, pois: Vec<Poi>, lights: Vec<TrafficLight>) -> Self {
        Self::with_cell_size(roads, pois, lights, DEFAULT_CELL_M)
    }

    pub fn with_cell_size(roads: Vec<RoadSegment>, pois: Vec<Poi>, lights: Vec<TrafficLight>, cell_m: f64) -> Self {
        let lats: Vec<f64> = roads
            .iter()
            .flat_map(|r| r.polyline.iter().map(|p| p.lat))
            .chain(pois.iter().map(|p| p.pos.lat))
            .chain(lights.iter().map(|l| l.pos.lat))
            .collect();
        let ref_lat = if lats.is_empty() {
            0.0
        } else {
            lats.iter().sum::<f64>() / lats.len() as f64
        };
        let mut index = GridIndex::new(cell_m, ref_lat);
        for (r, road) in roads.iter().enumerate() {
            if let [only] = road.polyline.as_slice() {
                index.insert(
                    DegBox::of_point(*only),
                    ElementRef::RoadEdge {
                        road: r as u32,
                        edge: 0,
                    },
                );
            }
            for (e, w) in road.polyline.windows(2).enumerate() {
                index.insert(
                    DegBox::of_segment(w[0], w[1]),
                    ElementRef::RoadEdge {
                        road: r as u32,
                        edge: e as u32,
                    },
                );
            }
        }
        for (i, p) in pois.iter().enumerate() {
            index.insert(DegBox::of_point(p.pos), ElementRef::Poi(i as u32));
        }
        for (i, l) in lights.iter().enumerate() {
            index.insert(DegBox::of_point(l.pos), ElementRef::Light(i as u32));
        }
        Self {
            roads,
            pois,
            lights,
            index,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), Vec::new())
    }

    pub fn load(path: &Path) -> Result<Self, ContextError> {
        let text = std::fs::read_to_string(path).map_err(|source| ContextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_geojson(&text)
    }

    pub fn from_geojson(text: &str) -> Result<Self, ContextError> {
        let root: Value = serde_json::from_str(text)?;
        let features = root
            .get("features")
            .and_then(Value::as_array)
            .ok_or(ContextError::Feature {
                feature: 0,
                message: "expected a FeatureCollection".into(),
            })?;
        let mut roads = Vec::new();
        let mut pois = Vec::new();
        let mut lights = Vec::new();
        for (i, f) in features.iter().enumerate() {
            let err = |message: String| ContextError::Feature { feature: i, message };
            let props = f.get("properties").unwrap_or(&Value::Null);
            let kind = props
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| err("missing `kind` tag".into()))?;
            let str_prop = |key: &str| props.get(key).and_then(Value::as_str).map(str::to_string);
            let id = match props.get("id") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => format!("{kind}-{i}"),
            };
            let geom = f.get("geometry").unwrap_or(&Value::Null);
            match kind {
                "road" => {
                    let polyline = line_coords(geom).map_err(err)?;
                    if polyline.len() < 2 {
                        return Err(err("road polyline needs at least 2 points".into()));
                    }
                    roads.push(RoadSegment {
                        id,
                        polyline,
                        road_class: RoadClass::parse_lenient(&str_prop("road_class").unwrap_or_default()),
                        name: str_prop("name"),
                    });
                }
                "poi" => {
                    let pos = point_coords(geom).map_err(err)?;
                    let category = str_prop("category")
                        .filter(|c| !c.trim().is_empty())
                        .ok_or_else(|| err("poi needs a non-empty `category`".into()))?;
                    pois.push(Poi {
                        id,
                        pos,
                        category,
                        name: str_prop("name"),
                    });
                }
                "traffic_light" => {
                    let pos = point_coords(geom).map_err(err)?;
                    lights.push(TrafficLight { id, pos });
                }
                other => return Err(err(format!("unknown kind {other:?}"))),
            }
        }
        Ok(Self::new(roads, pois, lights))
    }

    pub fn roads(&self) -> &[RoadSegment] {
        &self.roads
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn lights(&self) -> &[TrafficLight] {
        &self.lights
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.roads.len(), self.pois.len(), self.lights.len())
    }

    pub fn len(&self, kind: ContextKind) -> usize {
        match kind {
            ContextKind::Poi => self.pois.len(),
            ContextKind::Road => self.roads.len(),
            ContextKind::TrafficLight => self.lights.len(),
        }
    }

    /// Elements whose index cells include the cell containing `p`.
    pub fn elements_at(&self, p: LonLat) -> Vec<ElementRef> {
        self.index.cell(self.index.cell_of(p)).to_vec()
    }

    /// Distance from element `index` of layer `kind` to a polyline view.
    pub fn element_distance(&self, kind: ContextKind, index: usize, view: &[LonLat]) -> f64 {
        match kind {
            ContextKind::Poi => point_polyline_distance(self.pois[index].pos, view),
            ContextKind::TrafficLight => point_polyline_distance(self.lights[index].pos, view),
            ContextKind::Road => polyline_polyline_distance(&self.roads[index].polyline, view),
        }
    }

    fn candidates_near(&self, view: &[LonLat], radius_m: f64, kind: ContextKind) -> BTreeSet<usize> {
        let mut boxes: Vec<DegBox> = match view {
            [] => Vec::new(),
            [only] => vec![DegBox::of_point(*only)],
            _ => view.windows(2).map(|w| DegBox::of_segment(w[0], w[1])).collect(),
        };
        for b in &mut boxes {
            *b = b.expanded_m(radius_m);
        }
        let mut out = BTreeSet::new();
        for b in &boxes {
            for e in self.index.candidates(b) {
                match (kind, e) {
                    (ContextKind::Road, ElementRef::RoadEdge { road, .. }) => {
                        out.insert(road as usize);
                    }
                    (ContextKind::Poi, ElementRef::Poi(i)) | (ContextKind::TrafficLight, ElementRef::Light(i)) => {
                        out.insert(i as usize);
                    }
                    _ => {}
                }
            }
        }
        out
    }

    /// Elements of layer `kind` within `policy.theta(kind)` of `view`
    /// (boundary included), sorted by element index.
    pub fn filter(&self, view: &[LonLat], kind: ContextKind, policy: &FilterPolicy) -> Vec<Retained> {
        let theta = policy.theta(kind);
        self.candidates_near(view, theta, kind)
            .into_iter()
            .filter_map(|index| {
                let distance_m = self.element_distance(kind, index, view);
                (distance_m <= theta).then_some(Retained { index, distance_m })
            })
            .collect()
    }

    /// Nearest road within `radius_m` of `p`; ties go to the smaller id.
    pub fn nearest_road(&self, p: LonLat, radius_m: f64) -> Option<(usize, f64)> {
        let bbox = DegBox::of_point(p).expanded_m(radius_m);
        let mut best: Option<(usize, f64)> = None;
        let mut seen = BTreeSet::new();
        for e in self.index.candidates(&bbox) {
            let ElementRef::RoadEdge { road, .. } = e else {
                continue;
            };
            let road = road as usize;
            if !seen.insert(road) {
                continue;
            }
            let d = point_polyline_distance(p, &self.roads[road].polyline);
            if d > radius_m {
                continue;
            }
            best = match best {
                None => Some((road, d)),
                Some((b, bd)) => {
                    if d < bd || (d == bd && self.roads[road].id < self.roads[b].id) {
                        Some((road, d))
                    } else {
                        Some((b, bd))
                    }
                }
            };
        }
        best
    }

    /// Edge distance helper used by tests and rendering.
    pub fn road_edge_distance(&self, road: usize, edge: usize, p: LonLat) -> f64 {
        let line = &self.roads[road].polyline;
        if line.len() == 1 {
            return distance_m(p, line[0]);
        }
        point_segment_distance(p, line[edge], line[edge + 1])
    }
}

fn parse_pair(v: &Value) -> Option<LonLat> {
    let a = v.as_array()?;
    let p = LonLat::new(a.first()?.as_f64()?, a.get(1)?.as_f64()?);
    p.is_valid().then_some(p)
}

fn point_coords(geom: &Value) -> Result<LonLat, String> {
    if geom.get("type").and_then(Value::as_str) != Some("Point") {
        return Err("geometry must be a Point".into());
    }
    geom.get("coordinates")
        .and_then(parse_pair)
        .ok_or_else(|| "point coordinates missing or out of range".into())
}

fn line_coords(geom: &Value) -> Result<Vec<LonLat>, String> {
    if geom.get("type").and_then(Value::as_str) != Some("LineString") {
        return Err("geometry must be a LineString".into());
    }
    geom.get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| "missing coordinates".to_string())?
        .iter()
        .enumerate()
        .map(|(i, c)| parse_pair(c).ok_or_else(|| format!("coordinate {i} missing or out of range")))
        .collect()
}

/// Serialises a context database back to the GeoJSON schema above.
pub fn to_geojson(db: &ContextDb) -> Value {
    let coords = |p: &LonLat| serde_json::json!([p.lon, p.lat]);
    let mut features = Vec::new();
    for r in db.roads() {
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": r.polyline.iter().map(coords).collect::<Vec<_>>()},
            "properties": {"kind": "road", "id": r.id, "road_class": r.road_class, "name": r.name},
        }));
    }
    for p in db.pois() {
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": coords(&p.pos)},
            "properties": {"kind": "poi", "id": p.id, "category": p.category, "name": p.name},
        }));
    }
    for l in db.lights() {
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": coords(&l.pos)},
            "properties": {"kind": "traffic_light", "id": l.id},
        }));
    }
    serde_json::json!({"type": "FeatureCollection", "features": features})
}

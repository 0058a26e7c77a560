//! Trajectory file ingestion (CSV, GeoJSON) and the canonical CSV writer.
//!
//! CSV: header `id,lon,lat,t` with an optional trailing `label` column. Rows
//! of one trajectory need not be contiguous; trajectories are returned in the
//! order their id first appears. `t` is epoch seconds or an ISO-8601 UTC time.
//!
//! GeoJSON: a `FeatureCollection` of `LineString` features whose properties
//! carry `id`, a parallel `timestamps` array and an optional `label`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde_json::Value;
use thiserror::Error;

use crate::labels::Label;
use crate::traj::{TrajError, TrajPoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Geojson,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "geojson" | "json" => Some(Format::Geojson),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: trajectory {id:?} point {index} out of range (lon {lon}, lat {lat})")]
    OutOfRange {
        line: u64,
        id: String,
        index: usize,
        lon: f64,
        lat: f64,
    },
    #[error("feature {feature}: {message}")]
    Feature { feature: usize, message: String },
    #[error("feature {feature}: point {index} out of range (lon {lon}, lat {lat})")]
    FeatureOutOfRange {
        feature: usize,
        index: usize,
        lon: f64,
        lat: f64,
    },
    #[error("invalid GeoJSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trajectory(#[from] TrajError),
    #[error("csv write failed: {0}")]
    Write(#[from] csv::Error),
}

pub fn ingest(path: &Path, format: Format) -> Result<Vec<Trajectory>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        Format::Csv => read_csv(file),
        Format::Geojson => {
            let mut text = String::new();
            std::io::BufReader::new(file)
                .read_to_string(&mut text)
                .map_err(|source| IngestError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            read_geojson(&text)
        }
    }
}

/// Parses epoch seconds or an ISO-8601 / `YYYY-MM-DD HH:MM:SS` UTC time.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(secs) = raw.parse::<f64>() {
        return secs.is_finite().then_some(secs.floor() as i64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

struct Pending {
    points: Vec<TrajPoint>,
    label: Option<Label>,
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Trajectory>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        // a zero-byte file has no header either
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(csv_error(e)),
        Err(e) => return Err(csv_error(e)),
    };
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(c_id), Some(c_lon), Some(c_lat), Some(c_t)) = (col("id"), col("lon"), col("lat"), col("t")) else {
        return Err(IngestError::Malformed {
            line: 1,
            message: format!("header must contain id,lon,lat,t (got {:?})", headers),
        });
    };
    let c_label = col("label");

    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize, what: &str| {
            field(i).parse::<f64>().map_err(|_| IngestError::Malformed {
                line,
                message: format!("{what} {:?} is not a number", field(i)),
            })
        };
        let id = field(c_id).to_string();
        if id.is_empty() {
            return Err(IngestError::Malformed {
                line,
                message: "empty id".into(),
            });
        }
        let lon = num(c_lon, "lon")?;
        let lat = num(c_lat, "lat")?;
        let t = parse_timestamp(field(c_t)).ok_or_else(|| IngestError::Malformed {
            line,
            message: format!("unparseable timestamp {:?}", field(c_t)),
        })?;
        let label = match c_label.map(field).filter(|s| !s.is_empty()) {
            Some(raw) => Some(raw.parse::<Label>().map_err(|e| IngestError::Malformed {
                line,
                message: e.to_string(),
            })?),
            None => None,
        };
        let entry = pending.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Pending {
                points: Vec::new(),
                label: None,
            }
        });
        let point = TrajPoint::new(lon, lat, t);
        if !point.is_valid() {
            return Err(IngestError::OutOfRange {
                line,
                id,
                index: entry.points.len(),
                lon,
                lat,
            });
        }
        entry.points.push(point);
        if label.is_some() {
            entry.label = label;
        }
    }

    order
        .into_iter()
        .map(|id| {
            let p = pending.remove(&id).expect("id recorded on insert");
            Ok(Trajectory::new(id, p.points)?.with_label(p.label))
        })
        .collect()
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Malformed {
        line,
        message: e.to_string(),
    }
}

pub fn read_geojson(text: &str) -> Result<Vec<Trajectory>, IngestError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let root: Value = serde_json::from_str(text)?;
    let features = match root.get("features") {
        Some(Value::Array(f)) => f.as_slice(),
        _ if root.get("type").and_then(Value::as_str) == Some("Feature") => std::slice::from_ref(&root),
        _ => {
            return Err(IngestError::Feature {
                feature: 0,
                message: "expected a FeatureCollection".into(),
            })
        }
    };
    features
        .iter()
        .enumerate()
        .map(|(i, f)| trajectory_from_feature(i, f))
        .collect()
}

fn trajectory_from_feature(feature: usize, f: &Value) -> Result<Trajectory, IngestError> {
    let err = |message: String| IngestError::Feature { feature, message };
    let geom = f.get("geometry").ok_or_else(|| err("missing geometry".into()))?;
    if geom.get("type").and_then(Value::as_str) != Some("LineString") {
        return Err(err("geometry must be a LineString".into()));
    }
    let coords = geom
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| err("missing coordinates".into()))?;
    let props = f.get("properties").cloned().unwrap_or(Value::Null);
    let id = match props.get("id").or_else(|| f.get("id")) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("feature-{feature}"),
    };
    let stamps = props
        .get("timestamps")
        .and_then(Value::as_array)
        .ok_or_else(|| err("missing timestamps property".into()))?;
    if stamps.len() != coords.len() {
        return Err(err(format!(
            "{} coordinates but {} timestamps",
            coords.len(),
            stamps.len()
        )));
    }
    let mut points = Vec::with_capacity(coords.len());
    for (index, (c, ts)) in coords.iter().zip(stamps).enumerate() {
        let pair = c
            .as_array()
            .filter(|a| a.len() >= 2)
            .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
            .ok_or_else(|| err(format!("coordinate {index} is not [lon, lat]")))?;
        let t = match ts {
            Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|v| v.floor() as i64)),
            Value::String(s) => parse_timestamp(s),
            _ => None,
        }
        .ok_or_else(|| err(format!("timestamp {index} unparseable")))?;
        let p = TrajPoint::new(pair.0, pair.1, t);
        if !p.is_valid() {
            return Err(IngestError::FeatureOutOfRange {
                feature,
                index,
                lon: pair.0,
                lat: pair.1,
            });
        }
        points.push(p);
    }
    let label = match props.get("label").and_then(Value::as_str) {
        Some(raw) => Some(raw.parse::<Label>().map_err(|e| err(e.to_string()))?),
        None => None,
    };
    Ok(Trajectory::new(id, points)?.with_label(label))
}

/// Writes trajectories as canonical CSV. Coordinates use the shortest
/// round-tripping decimal form, so reading the output back is lossless.
pub fn write_csv<W: Write>(trajectories: &[Trajectory], writer: W) -> Result<(), IngestError> {
    let labelled = trajectories.iter().any(|t| t.label().is_some());
    let mut w = csv::Writer::from_writer(writer);
    if labelled {
        w.write_record(["id", "lon", "lat", "t", "label"])?;
    } else {
        w.write_record(["id", "lon", "lat", "t"])?;
    }
    for traj in trajectories {
        let label = traj.label().map(|l| l.to_string()).unwrap_or_default();
        for p in traj.points() {
            let mut row = vec![
                traj.id().to_string(),
                p.lon.to_string(),
                p.lat.to_string(),
                p.t.to_string(),
            ];
            if labelled {
                row.push(label.clone());
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| IngestError::Write(e.into()))?;
    Ok(())
}

pub fn to_csv_string(trajectories: &[Trajectory]) -> String {
    let mut buf = Vec::new();
    write_csv(trajectories, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_csv() {
        let csv = "id,lon,lat,t\na,104.0,30.6,100\na,104.001,30.6,110\na,104.002,30.6,120\n";
        let trajs = read_csv(csv.as_bytes()).unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].len(), 3);
        assert_eq!(trajs[0].id(), "a");
    }

    #[test]
    fn out_of_range_names_the_row() {
        let csv = "id,lon,lat,t\na,104.0,30.6,100\na,104.0,95.0,110\n";
        match read_csv(csv.as_bytes()).unwrap_err() {
            IngestError::OutOfRange { line, index, .. } => {
                assert_eq!(line, 3);
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_number_names_the_row() {
        let csv = "id,lon,lat,t\na,104.0,30.6,100\na,abc,30.6,110\n";
        let e = read_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(e, IngestError::Malformed { line: 3, .. }), "{e}");
    }

    #[test]
    fn empty_inputs_are_empty_lists() {
        assert!(read_csv("".as_bytes()).unwrap().is_empty());
        assert!(read_csv("id,lon,lat,t\n".as_bytes()).unwrap().is_empty());
        assert!(read_geojson("").unwrap().is_empty());
        assert!(read_geojson(r#"{"type":"FeatureCollection","features":[]}"#)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn iso_and_epoch_timestamps() {
        assert_eq!(parse_timestamp("0"), Some(0));
        assert_eq!(parse_timestamp("2016-11-03 22:29:01"), Some(1_478_212_141));
        assert_eq!(parse_timestamp("2016-11-03T22:29:01Z"), Some(1_478_212_141));
        assert_eq!(parse_timestamp("2016-11-03T23:29:01+01:00"), Some(1_478_212_141));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn unsorted_rows_and_duplicates() {
        let csv = "id,lon,lat,t\nb,1,1,20\nb,1,1,10\nb,1,1,20\n";
        let t = &read_csv(csv.as_bytes()).unwrap()[0];
        assert_eq!(t.points().iter().map(|p| p.t).collect::<Vec<_>>(), vec![10, 20]);
    }

    #[test]
    fn geojson_feature_collection() {
        let text = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","geometry":{"type":"LineString","coordinates":[[1,2],[1.001,2]]},
           "properties":{"id":"x","timestamps":["2016-11-03 22:29:01", 1478212151],"label":"mode:bus"}}]}"#;
        let t = read_geojson(text).unwrap();
        assert_eq!(t[0].id(), "x");
        assert_eq!(t[0].len(), 2);
        assert_eq!(t[0].label(), Some(&Label::Mode(crate::TransportMode::Bus)));
        let bad = text.replace("[1.001,2]", "[1.001,200]");
        assert!(matches!(
            read_geojson(&bad).unwrap_err(),
            IngestError::FeatureOutOfRange { index: 1, .. }
        ));
    }
}

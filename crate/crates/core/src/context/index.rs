//! Uniform lon/lat grid over context elements.
//!
//! Points live in one cell; polyline edges are registered in every cell their
//! bounding box overlaps. Queries probe the cells covering a conservative
//! degree box, so every element within the query radius is a candidate and the
//! exact distance test afterwards decides membership.

use std::collections::{BTreeSet, HashMap};

use crate::geodesy::{degree_margins, LonLat, METERS_PER_DEG_LAT};

pub const DEFAULT_CELL_M: f64 = 250.0;

/// Reference from the index back into a [`ContextDb`](super::ContextDb) list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    RoadEdge { road: u32, edge: u32 },
    Poi(u32),
    Light(u32),
}

/// Axis-aligned box in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl DegBox {
    pub fn of_point(p: LonLat) -> Self {
        Self {
            min_lon: p.lon,
            min_lat: p.lat,
            max_lon: p.lon,
            max_lat: p.lat,
        }
    }

    pub fn of_segment(a: LonLat, b: LonLat) -> Self {
        Self {
            min_lon: a.lon.min(b.lon),
            min_lat: a.lat.min(b.lat),
            max_lon: a.lon.max(b.lon),
            max_lat: a.lat.max(b.lat),
        }
    }

    /// Grows the box so it contains every point within `radius_m` of it.
    pub fn expanded_m(&self, radius_m: f64) -> Self {
        let max_abs_lat = self.min_lat.abs().max(self.max_lat.abs());
        let (dlon, dlat) = degree_margins(radius_m, max_abs_lat);
        if dlon >= 180.0 {
            return Self {
                min_lon: -180.0,
                min_lat: (self.min_lat - dlat).max(-90.0),
                max_lon: 180.0,
                max_lat: (self.max_lat + dlat).min(90.0),
            };
        }
        Self {
            min_lon: self.min_lon - dlon,
            min_lat: (self.min_lat - dlat).max(-90.0),
            max_lon: self.max_lon + dlon,
            max_lat: (self.max_lat + dlat).min(90.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_lon: f64,
    cell_lat: f64,
    cells: HashMap<(i64, i64), Vec<ElementRef>>,
}

impl GridIndex {
    /// `ref_lat` sets the longitude cell width so cells are roughly square.
    pub fn new(cell_m: f64, ref_lat: f64) -> Self {
        assert!(cell_m > 0.0, "grid cell size must be positive");
        let cell_lat = cell_m / METERS_PER_DEG_LAT;
        let cos = ref_lat.to_radians().cos().max(0.01);
        Self {
            cell_lon: cell_lat / cos,
            cell_lat,
            cells: HashMap::new(),
        }
    }

    pub fn cell_of(&self, p: LonLat) -> (i64, i64) {
        (
            (p.lon / self.cell_lon).floor() as i64,
            (p.lat / self.cell_lat).floor() as i64,
        )
    }

    fn cell_range(&self, b: &DegBox) -> ((i64, i64), (i64, i64)) {
        let lo = self.cell_of(LonLat::new(b.min_lon, b.min_lat));
        let hi = self.cell_of(LonLat::new(b.max_lon, b.max_lat));
        (lo, hi)
    }

    pub fn insert(&mut self, bbox: DegBox, element: ElementRef) {
        let ((x0, y0), (x1, y1)) = self.cell_range(&bbox);
        for x in x0..=x1 {
            for y in y0..=y1 {
                self.cells.entry((x, y)).or_default().push(element);
            }
        }
    }

    /// Elements registered in `cell`.
    pub fn cell(&self, cell: (i64, i64)) -> &[ElementRef] {
        self.cells.get(&cell).map_or(&[], Vec::as_slice)
    }

    /// Every element registered in a cell overlapping `bbox`, sorted and
    /// deduplicated.
    pub fn candidates(&self, bbox: &DegBox) -> BTreeSet<ElementRef> {
        let ((x0, y0), (x1, y1)) = self.cell_range(bbox);
        let span = (x1 - x0 + 1).saturating_mul(y1 - y0 + 1);
        let mut out = BTreeSet::new();
        if span as usize > self.cells.len() {
            // sparse grid: walking occupied cells is cheaper than probing
            for (&(x, y), elems) in &self.cells {
                if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
                    out.extend(elems.iter().copied());
                }
            }
        } else {
            for x in x0..=x1 {
                for y in y0..=y1 {
                    if let Some(elems) = self.cells.get(&(x, y)) {
                        out.extend(elems.iter().copied());
                    }
                }
            }
        }
        out
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }
}

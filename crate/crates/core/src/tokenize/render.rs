//! Visual token: a basemap composited with context overlays and the
//! sub-trajectory, in Web-Mercator pixel space.

use std::f64::consts::PI;
use std::io::Cursor;

use base64::Engine as _;
use image::{ImageFormat, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use super::clip::ClipBox;
use super::raster::{arrow_head, fill_disc, fill_triangle, stroke_polyline, Px};
use super::style::StyleSheet;
use super::tiles::{TileSource, TILE_PX};
use crate::context::{ContextDb, ContextKind, FilterPolicy};
use crate::geodesy::LonLat;
use crate::traj::TrajPoint;

pub const MAX_ZOOM: u8 = 18;
/// Latitude limit of the square Web-Mercator world.
pub const MAX_MERCATOR_LAT: f64 = 85.051_128_779_806_59;

/// World pixel coordinates of `p` at zoom `z` (256 px tiles).
pub fn world_px(p: LonLat, z: u8) -> Px {
    let size = f64::from(TILE_PX) * 2f64.powi(i32::from(z));
    let lat = p.lat.clamp(-MAX_MERCATOR_LAT, MAX_MERCATOR_LAT).to_radians();
    let x = (p.lon + 180.0) / 360.0 * size;
    let y = (1.0 - (lat.tan() + 1.0 / lat.cos()).ln() / PI) / 2.0 * size;
    (x, y)
}

/// Sphere radius that defines the Web-Mercator tile grid.
pub const MERCATOR_RADIUS_M: f64 = 6_378_137.0;

/// Ground resolution at latitude `lat` and zoom `z`.
pub fn meters_per_pixel(lat: f64, z: u8) -> f64 {
    2.0 * PI * MERCATOR_RADIUS_M * lat.to_radians().cos() / (f64::from(TILE_PX) * 2f64.powi(i32::from(z)))
}

fn clip_extent_px(clip: &ClipBox, z: u8) -> (f64, f64) {
    let lo = world_px(LonLat::new(clip.min_lon, clip.max_lat), z);
    let hi = world_px(LonLat::new(clip.max_lon, clip.min_lat), z);
    (hi.0 - lo.0, hi.1 - lo.1)
}

/// Largest zoom (at most [`MAX_ZOOM`]) at which `clip` fits in `target_px`
/// pixels on both axes; 0 when nothing fits.
pub fn choose_zoom(clip: &ClipBox, target_px: u32) -> u8 {
    assert!(target_px > 0, "target_px must be positive");
    let t = f64::from(target_px);
    (0..=MAX_ZOOM)
        .rev()
        .find(|&z| {
            let (w, h) = clip_extent_px(clip, z);
            w <= t && h <= t
        })
        .unwrap_or(0)
}

/// A `width` x `height` window centred on a world-pixel position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub zoom: u8,
    pub origin: Px,
    pub width: u32,
    pub height: u32,
}

impl Viewport {
    pub fn for_clip(clip: &ClipBox, px: u32) -> Self {
        let zoom = choose_zoom(clip, px);
        let lo = world_px(LonLat::new(clip.min_lon, clip.max_lat), zoom);
        let hi = world_px(LonLat::new(clip.max_lon, clip.min_lat), zoom);
        let (cx, cy) = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
        let half = f64::from(px) / 2.0;
        Self {
            zoom,
            origin: (cx - half, cy - half),
            width: px,
            height: px,
        }
    }

    pub fn project(&self, p: LonLat) -> Px {
        let (x, y) = world_px(p, self.zoom);
        (x - self.origin.0, y - self.origin.1)
    }

    pub fn inside(&self, q: Px) -> bool {
        (0.0..=f64::from(self.width)).contains(&q.0) && (0.0..=f64::from(self.height)).contains(&q.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderReport {
    pub overlay_elements: usize,
    pub overlay_ids: Vec<String>,
    pub tiles_requested: usize,
    pub tiles_missing: usize,
    pub out_of_bounds_points: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualToken {
    pub image: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub clip: ClipBox,
    pub zoom: u8,
    pub layer: ContextKind,
    pub encoded: String,
    pub report: RenderReport,
}

impl VisualToken {
    pub fn has_warning(&self) -> bool {
        !self.report.warnings.is_empty()
    }
}

pub fn encode_base64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn decode_base64(s: &str) -> Result<Vec<u8>, base64::DecodeError> {
    base64::engine::general_purpose::STANDARD.decode(s)
}

fn fill(img: &mut RgbaImage, x0: i64, y0: i64, tile: &RgbaImage) {
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    for (tx, ty, px) in tile.enumerate_pixels() {
        let (x, y) = (x0 + i64::from(tx), y0 + i64::from(ty));
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, *px);
        }
    }
}

fn basemap(vp: &Viewport, style: &StyleSheet, tiles: &dyn TileSource, report: &mut RenderReport) -> RgbaImage {
    let [r, g, b] = style.placeholder.0;
    let gray = Rgba([r, g, b, 255]);
    let mut img = RgbaImage::from_pixel(vp.width, vp.height, gray);
    let n = 1i64 << vp.zoom;
    let ts = f64::from(TILE_PX);
    let x0 = (vp.origin.0 / ts).floor() as i64;
    let x1 = ((vp.origin.0 + f64::from(vp.width)) / ts).floor() as i64;
    let y0 = ((vp.origin.1 / ts).floor() as i64).max(0);
    let y1 = (((vp.origin.1 + f64::from(vp.height)) / ts).floor() as i64).min(n - 1);
    let placeholder = RgbaImage::from_pixel(TILE_PX, TILE_PX, gray);
    for ty in y0..=y1 {
        for tx in x0..=x1 {
            let wrapped = tx.rem_euclid(n) as u32;
            report.tiles_requested += 1;
            let decoded = tiles
                .tile(vp.zoom, wrapped, ty as u32)
                .map_err(|e| e.to_string())
                .and_then(|bytes| image::load_from_memory(&bytes).map_err(|e| e.to_string()))
                .map(|i| i.to_rgba8())
                .and_then(|i| {
                    if i.dimensions() == (TILE_PX, TILE_PX) {
                        Ok(i)
                    } else {
                        Err(format!("tile has size {:?}", i.dimensions()))
                    }
                });
            let tile = match decoded {
                Ok(t) => t,
                Err(e) => {
                    report.tiles_missing += 1;
                    let msg = format!("tile {}/{}/{} unavailable: {e}", vp.zoom, wrapped, ty);
                    log::warn!("{msg}");
                    report.warnings.push(msg);
                    placeholder.clone()
                }
            };
            let ox = (tx as f64 * ts - vp.origin.0).round() as i64;
            let oy = (ty as f64 * ts - vp.origin.1).round() as i64;
            fill(&mut img, ox, oy, &tile);
        }
    }
    img
}

/// Renders one layer of one view.
pub fn render(
    sub: &[TrajPoint],
    clip: &ClipBox,
    layer: ContextKind,
    db: &ContextDb,
    policy: &FilterPolicy,
    style: &StyleSheet,
    tiles: &dyn TileSource,
) -> VisualToken {
    assert!(!sub.is_empty(), "render of an empty slice");
    let vp = Viewport::for_clip(clip, style.image_px);
    let mut report = RenderReport {
        overlay_elements: 0,
        overlay_ids: Vec::new(),
        tiles_requested: 0,
        tiles_missing: 0,
        out_of_bounds_points: 0,
        warnings: Vec::new(),
    };
    let mut img = basemap(&vp, style, tiles, &mut report);

    let view: Vec<LonLat> = sub.iter().map(TrajPoint::pos).collect();
    let kept = db.filter(&view, layer, policy);
    for r in &kept {
        match layer {
            ContextKind::Poi => {
                let p = &db.pois()[r.index];
                fill_disc(&mut img, vp.project(p.pos), style.poi_radius_px, style.poi_fill);
                report.overlay_ids.push(p.id.clone());
            }
            ContextKind::TrafficLight => {
                let l = &db.lights()[r.index];
                fill_disc(&mut img, vp.project(l.pos), style.light_radius_px, style.light_fill);
                report.overlay_ids.push(l.id.clone());
            }
            ContextKind::Road => {
                let road = &db.roads()[r.index];
                let pts: Vec<Px> = road.polyline.iter().map(|p| vp.project(*p)).collect();
                stroke_polyline(&mut img, &pts, style.road_px, style.road_fill);
                report.overlay_ids.push(road.id.clone());
            }
        }
    }
    report.overlay_elements = kept.len();

    let path: Vec<Px> = view.iter().map(|p| vp.project(*p)).collect();
    report.out_of_bounds_points = path.iter().filter(|q| !vp.inside(**q)).count();
    stroke_polyline(&mut img, &path, style.stroke_px, style.stroke(layer));
    let start = path[0];
    let end = path[path.len() - 1];
    fill_disc(&mut img, start, style.marker_radius_px, style.start_marker);
    let dir = path
        .iter()
        .rev()
        .find(|q| **q != end)
        .map_or((0.0, -1.0), |prev| (end.0 - prev.0, end.1 - prev.1));
    fill_triangle(
        &mut img,
        arrow_head(end, dir, style.marker_radius_px * 1.2),
        style.end_marker,
    );

    let mut png = Cursor::new(Vec::new());
    img.write_to(&mut png, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    let image = png.into_inner();
    VisualToken {
        encoded: encode_base64(&image),
        image,
        width: vp.width,
        height: vp.height,
        clip: *clip,
        zoom: vp.zoom,
        layer,
        report,
    }
}

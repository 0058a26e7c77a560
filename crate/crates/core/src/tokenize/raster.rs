//! Minimal opaque rasterisation: thick polylines, discs and triangles.
//!
//! A pixel is painted when its centre lies inside the shape. No blending, so
//! output depends only on the input geometry.

use image::{Rgba, RgbaImage};

use super::style::Rgb;

pub type Px = (f64, f64);

fn rgba(c: Rgb) -> Rgba<u8> {
    Rgba([c.0[0], c.0[1], c.0[2], 255])
}

/// Integer pixel range whose centres may fall in `[lo, hi]`, clipped to `0..n`.
fn span(lo: f64, hi: f64, n: u32) -> std::ops::Range<u32> {
    let a = (lo - 0.5).ceil().max(0.0);
    let b = ((hi - 0.5).floor() + 1.0).min(n as f64);
    if b <= a {
        0..0
    } else {
        a as u32..b as u32
    }
}

fn dist2_to_segment(p: Px, a: Px, b: Px) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    cx * cx + cy * cy
}

/// Segment with round caps, `width` pixels wide.
pub fn stroke_segment(img: &mut RgbaImage, a: Px, b: Px, width: f64, color: Rgb) -> usize {
    let r = width / 2.0;
    let (w, h) = img.dimensions();
    let c = rgba(color);
    let mut painted = 0;
    for y in span(a.1.min(b.1) - r, a.1.max(b.1) + r, h) {
        for x in span(a.0.min(b.0) - r, a.0.max(b.0) + r, w) {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            if dist2_to_segment(p, a, b) <= r * r {
                img.put_pixel(x, y, c);
                painted += 1;
            }
        }
    }
    painted
}

pub fn stroke_polyline(img: &mut RgbaImage, pts: &[Px], width: f64, color: Rgb) -> usize {
    match pts {
        [] => 0,
        [p] => fill_disc(img, *p, width / 2.0, color),
        _ => pts
            .windows(2)
            .map(|s| stroke_segment(img, s[0], s[1], width, color))
            .sum(),
    }
}

pub fn fill_disc(img: &mut RgbaImage, c: Px, r: f64, color: Rgb) -> usize {
    stroke_segment(img, c, c, 2.0 * r, color)
}

pub fn fill_triangle(img: &mut RgbaImage, v: [Px; 3], color: Rgb) -> usize {
    let (w, h) = img.dimensions();
    let edge = |a: Px, b: Px, p: Px| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let area = edge(v[0], v[1], v[2]);
    if area == 0.0 {
        return 0;
    }
    let c = rgba(color);
    let (min_x, max_x) = (v[0].0.min(v[1].0).min(v[2].0), v[0].0.max(v[1].0).max(v[2].0));
    let (min_y, max_y) = (v[0].1.min(v[1].1).min(v[2].1), v[0].1.max(v[1].1).max(v[2].1));
    let mut painted = 0;
    for y in span(min_y, max_y, h) {
        for x in span(min_x, max_x, w) {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let e = [edge(v[0], v[1], p), edge(v[1], v[2], p), edge(v[2], v[0], p)];
            let inside = if area > 0.0 {
                e.iter().all(|&s| s >= 0.0)
            } else {
                e.iter().all(|&s| s <= 0.0)
            };
            if inside {
                img.put_pixel(x, y, c);
                painted += 1;
            }
        }
    }
    painted
}

/// Triangle centred on `c` pointing along `dir` (need not be normalised).
pub fn arrow_head(c: Px, dir: Px, size: f64) -> [Px; 3] {
    let n = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
    let (ux, uy) = if n > 0.0 { (dir.0 / n, dir.1 / n) } else { (0.0, -1.0) };
    let (px, py) = (-uy, ux);
    [
        (c.0 + ux * size, c.1 + uy * size),
        (
            c.0 - ux * size * 0.6 + px * size * 0.8,
            c.1 - uy * size * 0.6 + py * size * 0.8,
        ),
        (
            c.0 - ux * size * 0.6 - px * size * 0.8,
            c.1 - uy * size * 0.6 - py * size * 0.8,
        ),
    ]
}

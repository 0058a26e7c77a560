use serde::{Deserialize, Serialize};

use crate::context::ContextKind;

/// An sRGB colour written as `#RRGGBB` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub fn parse(s: &str) -> Option<Rgb> {
        let hex = s.strip_prefix('#')?;
        if hex.len() != 6 {
            return None;
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
        Some(Rgb([byte(0)?, byte(2)?, byte(4)?]))
    }
}

impl std::fmt::Display for Rgb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02X}{g:02X}{b:02X}")
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Rgb::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid colour {s:?}, expected #RRGGBB")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleSheet {
    /// Output images are `image_px` x `image_px`.
    pub image_px: u32,
    pub stroke_px: f64,
    pub poi_stroke: Rgb,
    pub road_stroke: Rgb,
    pub light_stroke: Rgb,
    pub start_marker: Rgb,
    pub end_marker: Rgb,
    pub marker_radius_px: f64,
    pub poi_fill: Rgb,
    pub poi_radius_px: f64,
    pub road_fill: Rgb,
    pub road_px: f64,
    pub light_fill: Rgb,
    pub light_radius_px: f64,
    pub placeholder: Rgb,
}

impl Default for StyleSheet {
    fn default() -> Self {
        Self {
            image_px: 1024,
            stroke_px: 6.0,
            poi_stroke: Rgb([0xE0, 0x30, 0x30]),
            road_stroke: Rgb([0x2E, 0x8B, 0x57]),
            light_stroke: Rgb([0x1E, 0x60, 0xD0]),
            start_marker: Rgb([0x15, 0x65, 0xC0]),
            end_marker: Rgb([0x21, 0x21, 0x21]),
            marker_radius_px: 10.0,
            poi_fill: Rgb([0x8E, 0x24, 0xAA]),
            poi_radius_px: 6.0,
            road_fill: Rgb([0x60, 0x60, 0x60]),
            road_px: 4.0,
            light_fill: Rgb([0xF5, 0x9E, 0x0B]),
            light_radius_px: 5.0,
            placeholder: Rgb([0xC8, 0xC8, 0xC8]),
        }
    }
}

impl StyleSheet {
    /// Trajectory colour for a contextual layer.
    pub fn stroke(&self, layer: ContextKind) -> Rgb {
        match layer {
            ContextKind::Poi => self.poi_stroke,
            ContextKind::Road => self.road_stroke,
            ContextKind::TrafficLight => self.light_stroke,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(64..=4096).contains(&self.image_px) {
            return Err(format!("image_px must be in 64..=4096 (got {})", self.image_px));
        }
        for (name, v) in [
            ("stroke_px", self.stroke_px),
            ("marker_radius_px", self.marker_radius_px),
            ("poi_radius_px", self.poi_radius_px),
            ("road_px", self.road_px),
            ("light_radius_px", self.light_radius_px),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be > 0 (got {v})"));
            }
        }
        Ok(())
    }
}

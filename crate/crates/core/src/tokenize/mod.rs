//! Text and visual tokens for a sub-trajectory.

pub mod clip;
pub mod raster;
pub mod render;
pub mod style;
pub mod text;
pub mod tiles;

pub use clip::{clip_box, ClipBox};
pub use render::{choose_zoom, render, RenderReport, Viewport, VisualToken};
pub use style::{Rgb, StyleSheet};
pub use text::{parse_text, text_token, Feature, FeatureMask, SegmentFeatures, TextToken};
pub use tiles::{Checkerboard, DirTiles, HttpTiles, TileSource};

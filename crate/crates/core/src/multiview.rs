//! Spatial views crossed with contextual layers, emitted as one ordered
//! image-text sequence.
//!
//! Items are ordered by view (global, then local), then partition in time
//! order, then layer in the configured order, so a trajectory with `N`
//! segments and `Z` layers yields `(1 + N) * Z` pairs.
//!
//! On disk a sequence is a directory holding one PNG per pair, `pairs.jsonl`
//! with one record per pair in order, and `manifest.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextDb, ContextKind, FilterPolicy};
use crate::segmentation::{Segmentation, Span};
use crate::tokenize::render::{encode_base64, render, RenderReport, VisualToken};
use crate::tokenize::text::{text_token, FeatureMask, TextToken};
use crate::tokenize::{clip_box, ClipBox, StyleSheet, TileSource};
use crate::traj::Trajectory;

pub const IMAGE_PLACEHOLDER: &str = "<image>";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialKind {
    Global,
    Local,
}

impl SpatialKind {
    pub fn label(&self) -> &'static str {
        match self {
            SpatialKind::Global => "Global",
            SpatialKind::Local => "Local",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialView {
    pub kind: SpatialKind,
    pub partitions: Vec<Span>,
}

#[derive(Debug, Error)]
pub enum MultiviewError {
    #[error("at least one contextual layer is required")]
    NoLayers,
    #[error("layer {0} listed twice")]
    DuplicateLayer(ContextKind),
    #[error("segmentation of {seg:?} does not partition trajectory {traj:?} of {len} points")]
    Mismatch { traj: String, seg: String, len: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MultiviewError + '_ {
    move |source| MultiviewError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// The global view (whole trajectory) followed by the local view (one
/// partition per segment).
pub fn build_views(traj: &Trajectory, seg: &Segmentation) -> Result<Vec<SpatialView>, MultiviewError> {
    if !seg.covers(traj.len()) {
        return Err(MultiviewError::Mismatch {
            traj: traj.id().to_string(),
            seg: seg.trajectory_id.clone(),
            len: traj.len(),
        });
    }
    Ok(vec![
        SpatialView {
            kind: SpatialKind::Global,
            partitions: vec![Span::new(0, traj.len() - 1)],
        },
        SpatialView {
            kind: SpatialKind::Local,
            partitions: seg.spans.clone(),
        },
    ])
}

/// Text linking an image to its description, e.g.
/// `Global view, POI image of segment 1: <image>`.
pub fn anchor(view: SpatialKind, layer: ContextKind, partition: usize) -> String {
    format!(
        "{} view, {} image of segment {}: {IMAGE_PLACEHOLDER}",
        view.label(),
        layer.label(),
        partition + 1
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalPair {
    pub order: usize,
    pub view: SpatialKind,
    pub partition: usize,
    pub layer: ContextKind,
    pub span: Span,
    pub anchor: String,
    pub image: VisualToken,
    pub text: TextToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub trajectory_id: String,
    pub views: Vec<SpatialKind>,
    pub partitions_per_view: Vec<usize>,
    pub layers: Vec<ContextKind>,
    pub items: usize,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterleavedSequence {
    pub items: Vec<MultimodalPair>,
    pub manifest: SequenceManifest,
}

pub struct AssembleOptions<'a> {
    pub db: &'a ContextDb,
    pub policy: FilterPolicy,
    pub style: StyleSheet,
    pub tiles: &'a dyn TileSource,
    pub layers: Vec<ContextKind>,
    pub mask: FeatureMask,
    pub delta: f64,
}

pub const DEFAULT_DELTA: f64 = 0.15;

/// Multiview assembly; pairs render in parallel and are joined in canonical
/// order. Missing tiles are flagged on the affected items, never fatal.
pub fn assemble(
    traj: &Trajectory,
    seg: &Segmentation,
    opts: &AssembleOptions<'_>,
) -> Result<InterleavedSequence, MultiviewError> {
    if opts.layers.is_empty() {
        return Err(MultiviewError::NoLayers);
    }
    for (i, l) in opts.layers.iter().enumerate() {
        if opts.layers[..i].contains(l) {
            return Err(MultiviewError::DuplicateLayer(*l));
        }
    }
    let views = build_views(traj, seg)?;
    let mut jobs = Vec::new();
    for v in &views {
        for (i, span) in v.partitions.iter().enumerate() {
            for layer in &opts.layers {
                jobs.push((v.kind, i, *span, *layer));
            }
        }
    }
    let points = traj.points();
    let items: Vec<MultimodalPair> = jobs
        .par_iter()
        .enumerate()
        .map(|(order, &(view, partition, span, layer))| {
            let sub = span.slice(points);
            let clip = clip_box(sub, opts.delta);
            let image = render(sub, &clip, layer, opts.db, &opts.policy, &opts.style, opts.tiles);
            MultimodalPair {
                order,
                view,
                partition,
                layer,
                span,
                anchor: anchor(view, layer, partition),
                image,
                text: text_token(sub, &opts.mask),
            }
        })
        .collect();
    let manifest = SequenceManifest {
        trajectory_id: traj.id().to_string(),
        views: views.iter().map(|v| v.kind).collect(),
        partitions_per_view: views.iter().map(|v| v.partitions.len()).collect(),
        layers: opts.layers.clone(),
        items: items.len(),
        warnings: items.iter().filter(|p| p.image.has_warning()).count(),
    };
    Ok(InterleavedSequence { items, manifest })
}

/// One line of `pairs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub order: usize,
    pub view: SpatialKind,
    pub partition: usize,
    pub layer: ContextKind,
    pub span: Span,
    pub anchor: String,
    pub image_path: String,
    pub width: u32,
    pub height: u32,
    pub zoom: u8,
    pub clip: ClipBox,
    pub report: RenderReport,
    pub text: TextToken,
}

pub fn image_file_name(p: &MultimodalPair) -> String {
    format!(
        "{:03}_{}_{:03}_{}.png",
        p.order,
        match p.view {
            SpatialKind::Global => "global",
            SpatialKind::Local => "local",
        },
        p.partition,
        p.layer.slug()
    )
}

/// Writes the sequence under `dir` and returns the manifest path.
pub fn write_sequence(seq: &InterleavedSequence, dir: &Path) -> Result<PathBuf, MultiviewError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let pairs_path = dir.join(PAIRS_FILE);
    let mut pairs = BufWriter::new(File::create(&pairs_path).map_err(io_err(&pairs_path))?);
    for p in &seq.items {
        let name = image_file_name(p);
        let img_path = dir.join(&name);
        fs::write(&img_path, &p.image.image).map_err(io_err(&img_path))?;
        let rec = PairRecord {
            order: p.order,
            view: p.view,
            partition: p.partition,
            layer: p.layer,
            span: p.span,
            anchor: p.anchor.clone(),
            image_path: name,
            width: p.image.width,
            height: p.image.height,
            zoom: p.image.zoom,
            clip: p.image.clip,
            report: p.image.report.clone(),
            text: p.text.clone(),
        };
        let line = serde_json::to_string(&rec).map_err(|source| MultiviewError::Json {
            path: pairs_path.display().to_string(),
            source,
        })?;
        writeln!(pairs, "{line}").map_err(io_err(&pairs_path))?;
    }
    pairs.flush().map_err(io_err(&pairs_path))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&seq.manifest).map_err(|source| MultiviewError::Json {
        path: manifest_path.display().to_string(),
        source,
    })?;
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest_path)
}

pub fn read_sequence(dir: &Path) -> Result<InterleavedSequence, MultiviewError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: SequenceManifest = serde_json::from_str(&text).map_err(|source| MultiviewError::Json {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let pairs_path = dir.join(PAIRS_FILE);
    let reader = BufReader::new(File::open(&pairs_path).map_err(io_err(&pairs_path))?);
    let mut items = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(io_err(&pairs_path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(&line).map_err(|source| MultiviewError::Json {
            path: pairs_path.display().to_string(),
            source,
        })?;
        let img_path = dir.join(&rec.image_path);
        let image = fs::read(&img_path).map_err(io_err(&img_path))?;
        items.push(MultimodalPair {
            order: rec.order,
            view: rec.view,
            partition: rec.partition,
            layer: rec.layer,
            span: rec.span,
            anchor: rec.anchor,
            image: VisualToken {
                encoded: encode_base64(&image),
                image,
                width: rec.width,
                height: rec.height,
                clip: rec.clip,
                zoom: rec.zoom,
                layer: rec.layer,
                report: rec.report,
            },
            text: rec.text,
        });
    }
    Ok(InterleavedSequence { items, manifest })
}

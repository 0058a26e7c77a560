//! Core of the trajlens pipeline.
//!
//! Raw GPS trajectories go through three stages before reaching a multimodal
//! model:
//!
//! 1. [`segmentation`] splits a trajectory into sub-trajectories with a
//!    dynamic program over map-anchored cost factors.
//! 2. [`tokenize`] turns each sub-trajectory into a text description and a
//!    composited raster map image.
//! 3. [`multiview`] crosses spatial views (global, local) with contextual map
//!    layers and emits the ordered image-text sequence.
//!
//! [`tasks`] holds the downstream task definitions, answer parsing, anomaly
//! benchmark synthesis and metrics.

pub mod context;
pub mod geodesy;
pub mod ingest;
pub mod kinematics;
pub mod labels;
pub mod multiview;
pub mod segmentation;
pub mod tasks;
pub mod tokenize;
pub mod traj;

pub use context::{ContextDb, ContextKind, FilterPolicy};
pub use geodesy::{haversine, LonLat, EARTH_RADIUS_M};
pub use kinematics::{kinematics, Kinematics};
pub use labels::{Label, RegionId, TransportMode};
pub use segmentation::{segment, CostWeights, Segmentation, Span};
pub use traj::{TrajError, TrajPoint, Trajectory};

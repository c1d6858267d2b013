//! Synthesis of language-annotated human–scene interaction data.
//!
//! Captured motion clips (per-frame body vertex clouds in a canonical,
//! gravity-aligned frame) are placed into semantically labeled indoor scene
//! point clouds by rejection sampling a translation and a yaw rotation
//! subject to collision and per-action contact constraints. Every accepted
//! placement is annotated with a templated description that uniquely refers
//! to the interacted object, and corpora can be scored with goal-distance,
//! diversity and collision-depth metrics.
//!
//! The pipeline, bottom-up:
//!
//! - [`io`]: PLY / JSON scene loaders, the motion clip format, record files.
//! - [`index`]: exact static k-d tree over scene points.
//! - [`scene`]: object instances, floor detection, surface and floor sampling.
//! - [`body`]: rigid placements, body regions, marker extraction.
//! - [`alignment`]: constraint checks and the placement sampler.
//! - [`language`]: spatial relations and referring descriptions.
//! - [`metrics`]: goal distance, APD, collision distance, MPJPE / MPVPE.
//! - [`manifest`]: corpus synthesis, statistics and validation.
//! - [`verify`]: brute-force re-verification of emitted records.
//!
//! Units are meters with z up everywhere.

pub mod alignment;
pub mod body;
pub mod cloud;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod index;
pub mod io;
pub mod language;
pub mod manifest;
pub mod metrics;
pub mod motion;
pub mod policy;
pub mod record;
pub mod scene;
pub mod seed;
pub mod verify;

pub use alignment::{align, AlignmentConfig, ConstraintReport, SceneContext};
pub use body::{apply_placement, Frame, RigidPlacement};
pub use cloud::{ScenePoint, ScenePointCloud};
pub use config::ForgeConfig;
pub use error::{Error, Result};
pub use index::SceneIndex;
pub use language::{Description, RelationKind};
pub use manifest::Manifest;
pub use motion::{Action, MotionClip};
pub use record::DatasetRecord;
pub use scene::{FloorModel, ObjectInstance};

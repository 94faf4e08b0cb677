//! Open-vocabulary 3D instance proposals from posed RGB-D frames.
//!
//! Per-frame 2D instance masks are lifted onto superpoints of a point
//! cloud, merged across frames, fused with external 3D proposals, and
//! labeled by pooling per-point vision-language features against text
//! embeddings. Neural inputs arrive as files; see [`scene`] for formats.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod projection;
pub mod proposal2d;
pub mod proposal3d;
pub mod scene;
pub mod superpoints;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};

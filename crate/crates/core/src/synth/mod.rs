//! Deterministic synthetic scenes: primitives, a camera ring, splatted depth
//! and perfect 2D instance masks, plus the feature files the pipeline reads.

mod clip;
mod generate;
mod render;

pub use clip::{synthesize_view_features, SEMANTICS_FILE};
pub use generate::{generate_scene, look_at, CameraRing, Primitive, Room, SceneSpec, Shape, SyntheticScene};
pub use render::{render_depth, render_gt_masks, splat_points, Splat};

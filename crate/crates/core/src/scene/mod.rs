//! In-memory scene data and the on-disk bundle formats shared by every stage.

mod bitmask;
mod bundle;
pub mod depth;
pub mod matrix;
pub mod ply;
mod proposals;
pub mod rle;

pub use bitmask::{iou, BitMask};
pub use bundle::{
    frame_file_name, load_scene_bundle, mask_file_name, read_json, write_json, write_scene_bundle, FrameRecord,
    Manifest, MaskFile, MaskRecord, Scene, BUNDLE_VERSION,
};
pub use depth::{quantize_depth, read_depth_png, write_depth_png, DepthMap};
pub use matrix::{load_matrix, save_matrix, Matrix};
pub use ply::{read_ply, write_ply};
pub use proposals::{load_proposals, save_proposals, ProposalFile, ProposalRecord, ProposalSet, ProposalSource};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    /// RGB in [0, 1].
    pub colors: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::validation("PointCloud", "positions", "at least one point is required"));
        }
        if self.colors.len() != self.positions.len() {
            return Err(Error::validation(
                "PointCloud",
                "colors",
                format!("{} colors for {} points", self.colors.len(), self.positions.len()),
            ));
        }
        if let Some(i) = self.positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::validation("PointCloud", "positions", format!("point {i} is not finite")));
        }
        if let Some(i) = self
            .colors
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::validation("PointCloud", "colors", format!("color {i} outside [0,1]")));
        }
        Ok(())
    }
}

/// One posed RGB-D view. `extrinsics` maps world to camera coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraFrame {
    pub frame_id: u32,
    pub intrinsics: [[f64; 3]; 3],
    pub extrinsics: [[f64; 4]; 3],
    pub depth: DepthMap,
    pub width: usize,
    pub height: usize,
    pub rgb_path: Option<String>,
}

impl CameraFrame {
    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if k.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("CameraFrame", "intrinsics", "non-finite entry"));
        }
        if (k[2][2] - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "CameraFrame",
                "intrinsics",
                format!("K[2][2] must be 1, found {}", k[2][2]),
            ));
        }
        let e = &self.extrinsics;
        if e.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("CameraFrame", "extrinsics", "non-finite entry"));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|c| e[i][c] * e[j][c]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > 1e-6 {
                    return Err(Error::validation(
                        "CameraFrame",
                        "extrinsics",
                        format!("rotation block is not orthonormal (row {i}·row {j} = {dot})"),
                    ));
                }
            }
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("CameraFrame", "image_size", "width and height must be positive"));
        }
        if self.depth.width != self.width || self.depth.height != self.height {
            return Err(Error::validation(
                "CameraFrame",
                "depth",
                format!(
                    "depth map is {}x{} but image size is {}x{}",
                    self.depth.width, self.depth.height, self.width, self.height
                ),
            ));
        }
        if self.depth.data.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::validation("CameraFrame", "depth", "depth values must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn camera_center(&self) -> [f64; 3] {
        let e = &self.extrinsics;
        let mut c = [0.0; 3];
        for (j, cj) in c.iter_mut().enumerate() {
            *cj = -(0..3).map(|i| e[i][j] * e[i][3]).sum::<f64>();
        }
        c
    }
}

/// A binary instance mask in one frame, row-major over `width * height`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask2D {
    pub mask_id: u32,
    pub frame_id: u32,
    pub width: usize,
    pub height: usize,
    pub bits: BitMask,
    pub label_hint: Option<String>,
    pub score: Option<f64>,
}

impl Mask2D {
    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bits.get(y * self.width + x)
    }

    pub fn validate(&self, frame: &CameraFrame) -> Result<()> {
        if self.width != frame.width || self.height != frame.height {
            return Err(Error::validation(
                "Mask2D",
                "bits",
                format!(
                    "mask {} is {}x{} but frame {} is {}x{}",
                    self.mask_id, self.width, self.height, frame.frame_id, frame.width, frame.height
                ),
            ));
        }
        if self.bits.len() != self.width * self.height {
            return Err(Error::validation("Mask2D", "bits", "bit count does not match dimensions"));
        }
        if self.bits.none() {
            return Err(Error::validation("Mask2D", "bits", format!("mask {} has no set bit", self.mask_id)));
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::validation("Mask2D", "score", format!("{s} outside [0,1]")));
            }
        }
        Ok(())
    }
}

//! Pinhole projection of the cloud into posed frames, depth-based
//! visibility, and superpoint-to-2D-mask overlap.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::rle::{decode_mask, encode_mask};
use crate::scene::{read_json, write_json, BitMask, CameraFrame, Mask2D, PointCloud};
use crate::superpoints::SuperpointPartition;

/// Camera-space depth at or below this is treated as behind the camera.
pub const NEAR_PLANE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub frame_id: u32,
    /// Pre-floor pixel coordinates.
    pub pixels: Vec<[f64; 2]>,
    pub depth: Vec<f64>,
    pub in_bounds: Vec<bool>,
    width: usize,
}

impl Projection {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Integer pixel of an in-bounds point.
    #[inline]
    pub fn pixel(&self, i: usize) -> (usize, usize) {
        let [x, y] = self.pixels[i];
        (x.floor() as usize, y.floor() as usize)
    }

    #[inline]
    pub fn pixel_index(&self, i: usize) -> usize {
        let (x, y) = self.pixel(i);
        y * self.width + x
    }
}

/// Applies `K · [R|c]` to one world point, returning `(x, y, z)` with pixel
/// coordinates already divided by `z`.
#[inline]
pub fn project_point(frame: &CameraFrame, p: &[f64; 3]) -> (f64, f64, f64) {
    let e = &frame.extrinsics;
    let cam: [f64; 3] = std::array::from_fn(|r| e[r][0] * p[0] + e[r][1] * p[1] + e[r][2] * p[2] + e[r][3]);
    let k = &frame.intrinsics;
    let h: [f64; 3] = std::array::from_fn(|r| k[r][0] * cam[0] + k[r][1] * cam[1] + k[r][2] * cam[2]);
    (h[0] / h[2], h[1] / h[2], h[2])
}

/// Inverse of [`project_point`] for a known projected depth.
pub fn unproject_pixel(frame: &CameraFrame, x: f64, y: f64, z: f64) -> [f64; 3] {
    let k = nalgebra::Matrix3::from_fn(|r, c| frame.intrinsics[r][c]);
    let kinv = k.try_inverse().expect("intrinsics must be invertible");
    let cam = kinv * nalgebra::Vector3::new(x * z, y * z, z);
    let e = &frame.extrinsics;
    let d = [cam[0] - e[0][3], cam[1] - e[1][3], cam[2] - e[2][3]];
    std::array::from_fn(|c| (0..3).map(|r| e[r][c] * d[r]).sum())
}

pub fn project_points(cloud: &PointCloud, frame: &CameraFrame) -> Projection {
    let n = cloud.len();
    let mut pixels = Vec::with_capacity(n);
    let mut depth = Vec::with_capacity(n);
    let mut in_bounds = Vec::with_capacity(n);
    let (w, h) = (frame.width as f64, frame.height as f64);
    for p in &cloud.positions {
        let (x, y, z) = project_point(frame, p);
        let ok = z > NEAR_PLANE && x.is_finite() && y.is_finite() && {
            let (fx, fy) = (x.floor(), y.floor());
            fx >= 0.0 && fx <= w - 1.0 && fy >= 0.0 && fy <= h - 1.0
        };
        pixels.push([x, y]);
        depth.push(z);
        in_bounds.push(ok);
    }
    Projection {
        frame_id: frame.frame_id,
        pixels,
        depth,
        in_bounds,
        width: frame.width,
    }
}

/// Per-point visibility flags for one frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityMap {
    pub frame_id: u32,
    pub visible: BitMask,
}

/// A point is visible when it projects in bounds onto a pixel with measured
/// depth and `|z - D| <= tau_depth`.
pub fn visibility(projection: &Projection, frame: &CameraFrame, tau_depth: f64) -> VisibilityMap {
    let mut visible = BitMask::zeros(projection.len());
    for i in 0..projection.len() {
        if !projection.in_bounds[i] {
            continue;
        }
        let (x, y) = projection.pixel(i);
        let measured = frame.depth.at(x, y) as f64;
        if measured > 0.0 && (projection.depth[i] - measured).abs() <= tau_depth {
            visible.set(i);
        }
    }
    VisibilityMap {
        frame_id: frame.frame_id,
        visible,
    }
}

/// Fraction of each superpoint's visible points whose pixel lies inside the
/// mask; zero for superpoints with no visible point.
pub fn superpoint_mask_overlap(
    partition: &SuperpointPartition,
    projection: &Projection,
    visibility: &VisibilityMap,
    mask: &Mask2D,
) -> Vec<f64> {
    let u = partition.num_superpoints();
    let mut visible = vec![0u32; u];
    let mut inside = vec![0u32; u];
    for i in visibility.visible.ones() {
        let l = partition.labels[i] as usize;
        visible[l] += 1;
        if mask.bits.get(projection.pixel_index(i)) {
            inside[l] += 1;
        }
    }
    visible
        .iter()
        .zip(&inside)
        .map(|(&v, &m)| if v == 0 { 0.0 } else { m as f64 / v as f64 })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFile {
    pub frame_id: u32,
    pub num_points: usize,
    pub tau_depth: f64,
    pub rle: Vec<u32>,
}

pub fn visibility_file_name(frame_id: u32) -> String {
    format!("frame_{frame_id:06}.json")
}

pub fn save_visibility(path: impl AsRef<Path>, vis: &VisibilityMap, tau_depth: f64) -> Result<()> {
    write_json(
        path,
        &VisibilityFile {
            frame_id: vis.frame_id,
            num_points: vis.visible.len(),
            tau_depth,
            rle: encode_mask(&vis.visible)?,
        },
    )
}

pub fn load_visibility(path: impl AsRef<Path>) -> Result<VisibilityMap> {
    let file: VisibilityFile = read_json(path)?;
    let visible = decode_mask(&file.rle, file.num_points)
        .map_err(|e| Error::validation("VisibilityMap", "rle", e.to_string()))?;
    Ok(VisibilityMap {
        frame_id: file.frame_id,
        visible,
    })
}

//! Point-splat rendering with a one-pixel footprint.

use crate::projection::{project_point, NEAR_PLANE};
use crate::scene::{BitMask, CameraFrame, DepthMap, Mask2D};

/// Per-pixel nearest splat: depth (0 where empty) and the owning point.
#[derive(Clone, Debug, PartialEq)]
pub struct Splat {
    pub depth: DepthMap,
    pub owner: Vec<Option<u32>>,
}

/// Splats every point into its floor pixel, keeping the nearest; equal
/// depths keep the lower point index.
pub fn splat_points(positions: &[[f64; 3]], frame: &CameraFrame) -> Splat {
    let (w, h) = (frame.width, frame.height);
    let mut best = vec![f64::INFINITY; w * h];
    let mut owner = vec![None; w * h];
    for (i, p) in positions.iter().enumerate() {
        let (x, y, z) = project_point(frame, p);
        if !(z > NEAR_PLANE) || !x.is_finite() || !y.is_finite() {
            continue;
        }
        let (fx, fy) = (x.floor(), y.floor());
        if fx < 0.0 || fy < 0.0 || fx > (w - 1) as f64 || fy > (h - 1) as f64 {
            continue;
        }
        let idx = fy as usize * w + fx as usize;
        if z < best[idx] {
            best[idx] = z;
            owner[idx] = Some(i as u32);
        }
    }
    let data = best
        .iter()
        .map(|&z| if z.is_finite() { z as f32 } else { 0.0 })
        .collect();
    Splat {
        depth: DepthMap {
            width: w,
            height: h,
            data,
        },
        owner,
    }
}

/// Depth map of the nearest splat per pixel; empty pixels are 0.
pub fn render_depth(positions: &[[f64; 3]], frame: &CameraFrame) -> DepthMap {
    splat_points(positions, frame).depth
}

/// One mask per instance owning at least `min_pixels` pixels. `instance_of`
/// maps points to instance indices (`None` for background). Mask ids start
/// at `first_mask_id` and follow instance order.
pub fn render_gt_masks(
    splat: &Splat,
    instance_of: &[Option<u32>],
    labels: &[String],
    frame: &CameraFrame,
    min_pixels: usize,
    first_mask_id: u32,
) -> Vec<Mask2D> {
    let (w, h) = (frame.width, frame.height);
    let mut bits: Vec<BitMask> = vec![BitMask::zeros(w * h); labels.len()];
    for (px, o) in splat.owner.iter().enumerate() {
        if let Some(inst) = o.and_then(|p| instance_of[p as usize]) {
            bits[inst as usize].set(px);
        }
    }
    let mut next_id = first_mask_id;
    let mut masks = Vec::new();
    for (inst, b) in bits.into_iter().enumerate() {
        if b.count() < min_pixels.max(1) {
            continue;
        }
        masks.push(Mask2D {
            mask_id: next_id,
            frame_id: frame.frame_id,
            width: w,
            height: h,
            bits: b,
            label_hint: Some(labels[inst].clone()),
            score: Some(1.0),
        });
        next_id += 1;
    }
    masks
}

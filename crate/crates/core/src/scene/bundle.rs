//! Scene bundle directory: `manifest.json`, `cloud.ply`, per-frame camera
//! records with 16-bit depth PNGs, and per-frame RLE mask files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::depth::{read_depth_png, write_depth_png};
use super::ply::{read_ply, write_ply};
use super::rle::{decode_mask, encode_mask};
use super::{CameraFrame, Mask2D, PointCloud};

pub const BUNDLE_VERSION: u32 = 1;

fn default_depth_scale() -> f64 {
    1000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub num_points: usize,
    pub num_frames: usize,
    pub cloud: String,
    #[serde(default = "default_depth_scale")]
    pub depth_scale: f64,
    /// Frame record paths relative to the bundle root.
    pub frames: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u32,
    pub width: usize,
    pub height: usize,
    /// Row-major 3x3.
    pub intrinsics: Vec<f64>,
    /// Row-major 3x4 world-to-camera `[R|c]`.
    pub extrinsics: Vec<f64>,
    pub depth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rgb: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub mask_id: u32,
    /// Zeros-first runs over the row-major `width * height` grid.
    pub rle: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskFile {
    pub frame_id: u32,
    pub width: usize,
    pub height: usize,
    pub masks: Vec<MaskRecord>,
}

pub fn frame_file_name(frame_id: u32) -> String {
    format!("frames/frame_{frame_id:06}.json")
}

pub fn mask_file_name(frame_id: u32) -> String {
    format!("masks/frame_{frame_id:06}.json")
}

fn depth_file_name(frame_id: u32) -> String {
    format!("frames/depth_{frame_id:06}.png")
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A fully validated scene. Frames are sorted by `frame_id`; `masks[i]`
/// belongs to `frames[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub root: PathBuf,
    pub depth_scale: f64,
    pub cloud: PointCloud,
    pub frames: Vec<CameraFrame>,
    pub masks: Vec<Vec<Mask2D>>,
}

impl Scene {
    pub fn num_points(&self) -> usize {
        self.cloud.len()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn frame_index(&self, frame_id: u32) -> Option<usize> {
        self.frames.binary_search_by_key(&frame_id, |f| f.frame_id).ok()
    }

    pub fn validate(&self) -> Result<()> {
        self.cloud.validate()?;
        if self.frames.is_empty() {
            return Err(Error::validation("Scene", "frames", "at least one frame is required"));
        }
        if self.masks.len() != self.frames.len() {
            return Err(Error::validation("Scene", "masks", "one mask list per frame is required"));
        }
        let mut mask_ids = HashSet::new();
        for (i, (frame, masks)) in self.frames.iter().zip(&self.masks).enumerate() {
            frame.validate()?;
            if i > 0 && self.frames[i - 1].frame_id >= frame.frame_id {
                return Err(Error::validation("Scene", "frames", "frame ids must be unique and sorted"));
            }
            for m in masks {
                if m.frame_id != frame.frame_id {
                    return Err(Error::validation("Mask2D", "frame_id", "mask listed under another frame"));
                }
                m.validate(frame)?;
                if !mask_ids.insert(m.mask_id) {
                    return Err(Error::validation(
                        "Mask2D",
                        "mask_id",
                        format!("mask id {} is not unique across frames", m.mask_id),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn matrix3(values: &[f64], field: &'static str) -> Result<[[f64; 3]; 3]> {
    if values.len() != 9 {
        return Err(Error::validation("CameraFrame", field, format!("expected 9 values, found {}", values.len())));
    }
    Ok(std::array::from_fn(|r| std::array::from_fn(|c| values[r * 3 + c])))
}

fn matrix34(values: &[f64], field: &'static str) -> Result<[[f64; 4]; 3]> {
    if values.len() != 12 {
        return Err(Error::validation("CameraFrame", field, format!("expected 12 values, found {}", values.len())));
    }
    Ok(std::array::from_fn(|r| std::array::from_fn(|c| values[r * 4 + c])))
}

fn read_mask_file(path: &Path, frame: &CameraFrame) -> Result<Vec<Mask2D>> {
    let file: MaskFile = read_json(path)?;
    if file.frame_id != frame.frame_id {
        return Err(Error::validation(
            "Mask2D",
            "frame_id",
            format!("{} declares frame {} but belongs to frame {}", path.display(), file.frame_id, frame.frame_id),
        ));
    }
    let pixels = file.width * file.height;
    file.masks
        .into_iter()
        .map(|rec| {
            let bits = decode_mask(&rec.rle, pixels)
                .map_err(|e| Error::validation("Mask2D", "bits", format!("mask {}: {e}", rec.mask_id)))?;
            Ok(Mask2D {
                mask_id: rec.mask_id,
                frame_id: file.frame_id,
                width: file.width,
                height: file.height,
                bits,
                label_hint: rec.label,
                score: rec.score,
            })
        })
        .collect()
}

pub fn load_scene_bundle(dir: impl AsRef<Path>) -> Result<Scene> {
    let root = dir.as_ref().to_path_buf();
    let manifest: Manifest = read_json(root.join("manifest.json"))?;
    if manifest.version != BUNDLE_VERSION {
        return Err(Error::validation(
            "Manifest",
            "version",
            format!("unsupported bundle version {}", manifest.version),
        ));
    }
    if !(manifest.depth_scale > 0.0 && manifest.depth_scale.is_finite()) {
        return Err(Error::validation("Manifest", "depth_scale", "must be positive"));
    }
    let cloud = read_ply(root.join(&manifest.cloud))?;
    cloud.validate()?;
    if cloud.len() != manifest.num_points {
        return Err(Error::validation(
            "Manifest",
            "num_points",
            format!("manifest declares {} points but the cloud holds {}", manifest.num_points, cloud.len()),
        ));
    }
    if manifest.frames.len() != manifest.num_frames {
        return Err(Error::validation(
            "Manifest",
            "num_frames",
            format!("manifest declares {} frames but lists {}", manifest.num_frames, manifest.frames.len()),
        ));
    }

    let mut frames = Vec::with_capacity(manifest.frames.len());
    for rel in &manifest.frames {
        let rec: FrameRecord = read_json(root.join(rel))?;
        let scale = rec.depth_scale.unwrap_or(manifest.depth_scale);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::validation("CameraFrame", "depth_scale", "must be positive"));
        }
        let depth = read_depth_png(root.join(&rec.depth), scale)?;
        let frame = CameraFrame {
            frame_id: rec.frame_id,
            intrinsics: matrix3(&rec.intrinsics, "intrinsics")?,
            extrinsics: matrix34(&rec.extrinsics, "extrinsics")?,
            depth,
            width: rec.width,
            height: rec.height,
            rgb_path: rec.rgb.clone(),
        };
        frame.validate()?;
        let mask_path = match &rec.masks {
            Some(p) => Some(root.join(p)),
            None => Some(root.join(mask_file_name(rec.frame_id))).filter(|p| p.exists()),
        };
        let masks = match mask_path {
            Some(p) => read_mask_file(&p, &frame)?,
            None => Vec::new(),
        };
        frames.push((frame, masks));
    }
    frames.sort_by_key(|(f, _)| f.frame_id);
    let (frames, masks): (Vec<_>, Vec<_>) = frames.into_iter().unzip();

    let scene = Scene {
        root,
        depth_scale: manifest.depth_scale,
        cloud,
        frames,
        masks,
    };
    scene.validate()?;
    Ok(scene)
}

/// Writes the core bundle files. Optional artifacts (features, proposals,
/// embeddings) are written separately by their producers.
pub fn write_scene_bundle(dir: impl AsRef<Path>, scene: &Scene) -> Result<()> {
    let root = dir.as_ref();
    scene.validate()?;
    for sub in ["frames", "masks"] {
        let p = root.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    write_ply(root.join("cloud.ply"), &scene.cloud)?;
    let mut frame_paths = Vec::with_capacity(scene.frames.len());
    for (frame, masks) in scene.frames.iter().zip(&scene.masks) {
        let id = frame.frame_id;
        let rec = FrameRecord {
            frame_id: id,
            width: frame.width,
            height: frame.height,
            intrinsics: frame.intrinsics.iter().flatten().copied().collect(),
            extrinsics: frame.extrinsics.iter().flatten().copied().collect(),
            depth: depth_file_name(id),
            depth_scale: None,
            masks: Some(mask_file_name(id)),
            rgb: frame.rgb_path.clone(),
        };
        write_depth_png(root.join(&rec.depth), &frame.depth, scene.depth_scale)?;
        let mask_file = MaskFile {
            frame_id: id,
            width: frame.width,
            height: frame.height,
            masks: masks
                .iter()
                .map(|m| {
                    Ok(MaskRecord {
                        mask_id: m.mask_id,
                        rle: encode_mask(&m.bits)?,
                        label: m.label_hint.clone(),
                        score: m.score,
                    })
                })
                .collect::<Result<_>>()?,
        };
        write_json(root.join(mask_file_name(id)), &mask_file)?;
        write_json(root.join(frame_file_name(id)), &rec)?;
        frame_paths.push(frame_file_name(id));
    }
    let manifest = Manifest {
        version: BUNDLE_VERSION,
        num_points: scene.cloud.len(),
        num_frames: scene.frames.len(),
        cloud: "cloud.ply".into(),
        depth_scale: scene.depth_scale,
        frames: frame_paths,
    };
    write_json(root.join("manifest.json"), &manifest)
}

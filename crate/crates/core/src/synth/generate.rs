use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clip::SEMANTICS_FILE;
use super::render::{render_gt_masks, splat_points};
use crate::error::{Error, Result};
use crate::eval::{save_ground_truth, ClassGroups, GroundTruthInstance};
use crate::features::{PromptEntry, QueryEmbedding};
use crate::scene::depth::quantize_depth;
use crate::scene::{
    save_matrix, save_proposals, write_json, write_scene_bundle, BitMask, CameraFrame, Matrix, PointCloud,
    ProposalSet, ProposalSource, Scene,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Box,
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub center: [f64; 3],
    /// Half-extents of a box; a sphere uses `extents[0]` as its radius.
    pub extents: [f64; 3],
    pub color: [f64; 3],
    pub class_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Primitive {
    pub fn half_extents(&self) -> [f64; 3] {
        match self.shape {
            Shape::Box => self.extents,
            Shape::Sphere => [self.extents[0]; 3],
        }
    }

    fn bottom(&self) -> f64 {
        self.center[2] - self.half_extents()[2]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Cameras evenly spaced on a horizontal circle, all looking at `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRing {
    pub radius: f64,
    /// Camera heights, cycled around the ring.
    pub heights: Vec<f64>,
    pub target: [f64; 3],
    pub width: usize,
    pub height: usize,
    pub focal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub objects: Vec<Primitive>,
    pub room: Room,
    pub num_frames: usize,
    pub points_per_object: usize,
    /// Unlabeled points on the room floor; 0 disables the floor.
    #[serde(default)]
    pub floor_points: usize,
    #[serde(default = "default_floor_color")]
    pub floor_color: [f64; 3],
    /// Position jitter std in meters.
    #[serde(default)]
    pub noise_std: f64,
    /// Uniform per-channel color jitter half-width.
    #[serde(default)]
    pub color_jitter: f64,
    pub camera: CameraRing,
    #[serde(default = "default_min_pixels")]
    pub min_mask_pixels: usize,
    #[serde(default = "default_depth_scale")]
    pub depth_scale: f64,
    #[serde(default = "default_feature_noise")]
    pub feature_noise: f64,
    /// Emit `proposals_3d.json` imitating an external segmenter.
    #[serde(default = "default_true")]
    pub external_proposals: bool,
}

fn default_floor_color() -> [f64; 3] {
    [0.55, 0.55, 0.55]
}
fn default_min_pixels() -> usize {
    16
}
fn default_depth_scale() -> f64 {
    1000.0
}
fn default_feature_noise() -> f64 {
    0.01
}
fn default_true() -> bool {
    true
}

const PALETTE: [[f64; 3]; 10] = [
    [0.90, 0.10, 0.10],
    [0.10, 0.80, 0.20],
    [0.10, 0.20, 0.90],
    [0.95, 0.85, 0.10],
    [0.85, 0.10, 0.80],
    [0.10, 0.85, 0.85],
    [1.00, 0.50, 0.00],
    [0.45, 0.10, 0.60],
    [0.45, 0.25, 0.05],
    [0.00, 0.40, 0.10],
];

const NAMES: [&str; 10] = [
    "chair", "table", "lamp", "sofa", "shelf", "bed", "desk", "cabinet", "plant", "monitor",
];

impl SceneSpec {
    /// A room with `num_objects` primitives resting on a floor and a ring of
    /// `num_frames` cameras. About two objects share each class.
    pub fn random(seed: u64, num_objects: usize, num_frames: usize) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a70_u64);
        let side = ((num_objects as f64).sqrt().ceil() as usize).max(3);
        let half = (side as f64 * 0.75).max(3.0);
        let cell = 2.0 * half / side as f64;
        let mut cells: Vec<usize> = (0..side * side).collect();
        cells.shuffle(&mut rng);
        let num_classes = num_objects.div_ceil(2).max(1);
        let max_half = (cell * 0.3).min(0.4);
        let objects = (0..num_objects)
            .map(|i| {
                let (cx, cy) = (cells[i] % side, cells[i] / side);
                let x = -half + (cx as f64 + 0.5) * cell + rng.random_range(-0.1..0.1) * cell;
                let y = -half + (cy as f64 + 0.5) * cell + rng.random_range(-0.1..0.1) * cell;
                let class_id = (i % num_classes) as u32;
                let (shape, extents) = if rng.random_bool(0.5) {
                    let e = [
                        rng.random_range(0.5..1.0) * max_half,
                        rng.random_range(0.5..1.0) * max_half,
                        rng.random_range(0.5..1.2) * max_half,
                    ];
                    (Shape::Box, e)
                } else {
                    let r = rng.random_range(0.6..1.0) * max_half;
                    (Shape::Sphere, [r, r, r])
                };
                Primitive {
                    shape,
                    center: [x, y, extents[if shape == Shape::Box { 2 } else { 0 }]],
                    extents,
                    color: PALETTE[i % PALETTE.len()],
                    class_id,
                    label: Some(class_name(class_id)),
                }
            })
            .collect();
        SceneSpec {
            seed,
            objects,
            room: Room {
                min: [-half, -half, 0.0],
                max: [half, half, 2.5],
            },
            num_frames,
            points_per_object: 1500,
            floor_points: 5000,
            floor_color: default_floor_color(),
            noise_std: 0.002,
            color_jitter: 0.03,
            camera: CameraRing {
                radius: half * 1.4,
                heights: vec![2.2 * half / 3.0],
                target: [0.0, 0.0, 0.3],
                width: 160,
                height: 120,
                focal: 120.0,
            },
            min_mask_pixels: default_min_pixels(),
            depth_scale: default_depth_scale(),
            feature_noise: default_feature_noise(),
            external_proposals: true,
        }
    }

    /// Removes the floor and lifts every object off the ground, with cameras
    /// alternating above and below the objects from farther out and at double
    /// resolution, so every surface is seen.
    pub fn floating(mut self) -> SceneSpec {
        self.floor_points = 0;
        let lift = 1.0;
        for o in &mut self.objects {
            o.center[2] += lift;
        }
        self.room.max[2] += lift;
        let t = 0.3 + lift;
        self.camera.target[2] = t;
        self.camera.radius *= 1.6;
        self.camera.width *= 2;
        self.camera.height *= 2;
        self.camera.focal *= 2.0;
        let dz = self.camera.radius * 25f64.to_radians().tan();
        self.camera.heights = vec![t + dz, t - dz];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::validation("SceneSpec", field, reason));
        if self.objects.is_empty() {
            return bad("objects", "at least one object is required".into());
        }
        if self.num_frames == 0 {
            return bad("num_frames", "at least one camera is required".into());
        }
        if self.points_per_object == 0 {
            return bad("points_per_object", "must be positive".into());
        }
        if (0..3).any(|a| !(self.room.min[a] < self.room.max[a])) {
            return bad("room", "min must be below max on every axis".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            let h = o.half_extents();
            if h.iter().any(|&e| !(e > 0.0)) {
                return bad("objects", format!("object {i} has non-positive extents"));
            }
            if o.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return bad("objects", format!("object {i} color outside [0,1]"));
            }
            let inside =
                (0..3).all(|a| o.center[a] - h[a] >= self.room.min[a] - 1e-9 && o.center[a] + h[a] <= self.room.max[a] + 1e-9);
            if !inside {
                return bad("objects", format!("object {i} extends outside the room"));
            }
        }
        if !(self.noise_std >= 0.0) || !(self.color_jitter >= 0.0) || !(self.feature_noise >= 0.0) {
            return bad("noise_std", "noise levels must be >= 0".into());
        }
        let c = &self.camera;
        if c.width == 0 || c.height == 0 || !(c.focal > 0.0) || !(c.radius > 0.0) || c.heights.is_empty() {
            return bad("camera", "image size, focal, radius must be positive and heights non-empty".into());
        }
        if !(self.depth_scale > 0.0) {
            return bad("depth_scale", "must be positive".into());
        }
        Ok(())
    }

    /// Distinct class ids in ascending order.
    pub fn class_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.class_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn class_label(&self, class_id: u32) -> String {
        self.objects
            .iter()
            .find(|o| o.class_id == class_id)
            .and_then(|o| o.label.clone())
            .unwrap_or_else(|| class_name(class_id))
    }
}

fn class_name(class_id: u32) -> String {
    match NAMES.get(class_id as usize) {
        Some(n) => n.to_string(),
        None => format!("class_{class_id}"),
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// World-to-camera extrinsics for a camera at `eye` looking at `target`
/// with world +z up (camera x right, y down, z forward).
pub fn look_at(eye: [f64; 3], target: [f64; 3]) -> [[f64; 4]; 3] {
    let f = normalize([target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]]);
    let r = normalize(cross(f, [0.0, 0.0, 1.0]));
    let d = cross(f, r);
    let mut e = [[0.0; 4]; 3];
    for (row, axis) in e.iter_mut().zip([r, d, f]) {
        row[..3].copy_from_slice(&axis);
        row[3] = -(axis[0] * eye[0] + axis[1] * eye[1] + axis[2] * eye[2]);
    }
    e
}

fn quantize_color(c: f64) -> f64 {
    (c.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn sample_surface(o: &Primitive, skip_bottom: bool, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let c = o.center;
    match o.shape {
        Shape::Sphere => {
            let v: [f64; 3] = [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ];
            let u = normalize(v);
            let r = o.extents[0];
            [c[0] + r * u[0], c[1] + r * u[1], c[2] + r * u[2]]
        }
        Shape::Box => {
            let h = o.extents;
            // Faces as (normal axis, sign); area is the product of the other two extents.
            let faces: Vec<(usize, f64, f64)> = (0..3)
                .flat_map(|a| [(a, 1.0), (a, -1.0)])
                .filter(|&(a, s)| !(skip_bottom && a == 2 && s < 0.0))
                .map(|(a, s)| (a, s, h[(a + 1) % 3] * h[(a + 2) % 3]))
                .collect();
            let total: f64 = faces.iter().map(|f| f.2).sum();
            let mut pick = rng.random_range(0.0..total);
            let mut face = faces[faces.len() - 1];
            for f in &faces {
                if pick < f.2 {
                    face = *f;
                    break;
                }
                pick -= f.2;
            }
            let (a, s, _) = face;
            let mut p = [0.0; 3];
            for (k, pk) in p.iter_mut().enumerate() {
                *pk = if k == a {
                    c[k] + s * h[k]
                } else {
                    c[k] + rng.random_range(-h[k]..=h[k])
                };
            }
            p
        }
    }
}

/// Everything the generator produces, in memory.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub scene: Scene,
    /// Object index per point; `None` for floor points.
    pub instance_of: Vec<Option<u32>>,
    pub ground_truth: Vec<GroundTruthInstance>,
    pub groups: ClassGroups,
    /// N×(objects+1) basis-vector features.
    pub point_features: Matrix,
    /// N×(classes+1) class basis vectors, source of the synthetic view features.
    pub semantics: Matrix,
    pub queries: Vec<QueryEmbedding>,
    pub external: Option<ProposalSet>,
}

impl SyntheticScene {
    pub fn build(spec: &SceneSpec, root: impl Into<PathBuf>) -> Result<SyntheticScene> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let jitter = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let floor_z = spec.room.min[2];
        let has_floor = spec.floor_points > 0;

        let mut positions = Vec::new();
        let mut colors = Vec::new();
        let mut instance_of = Vec::new();
        let color_sample = |base: [f64; 3], rng: &mut ChaCha8Rng| -> [f64; 3] {
            let mut c = base;
            for ch in &mut c {
                if spec.color_jitter > 0.0 {
                    *ch += rng.random_range(-spec.color_jitter..=spec.color_jitter);
                }
                *ch = quantize_color(*ch);
            }
            c
        };
        for (i, o) in spec.objects.iter().enumerate() {
            let resting = has_floor && (o.bottom() - floor_z).abs() < 1e-9;
            for _ in 0..spec.points_per_object {
                let mut p = sample_surface(o, resting, &mut rng);
                for v in &mut p {
                    *v = (*v + jitter.sample(&mut rng)) as f32 as f64;
                }
                positions.push(p);
                colors.push(color_sample(o.color, &mut rng));
                instance_of.push(Some(i as u32));
            }
        }
        let covered = |x: f64, y: f64| {
            spec.objects.iter().any(|o| {
                if (o.bottom() - floor_z).abs() > 1e-9 {
                    return false;
                }
                let h = o.half_extents();
                let (dx, dy) = (x - o.center[0], y - o.center[1]);
                match o.shape {
                    Shape::Box => dx.abs() <= h[0] && dy.abs() <= h[1],
                    Shape::Sphere => dx * dx + dy * dy <= (0.5 * h[0]).powi(2),
                }
            })
        };
        let mut attempts = 0usize;
        let mut placed = 0usize;
        while placed < spec.floor_points {
            attempts += 1;
            if attempts > 100 * spec.floor_points {
                return Err(Error::validation("SceneSpec", "floor_points", "objects cover the floor"));
            }
            let x = rng.random_range(spec.room.min[0]..spec.room.max[0]);
            let y = rng.random_range(spec.room.min[1]..spec.room.max[1]);
            if covered(x, y) {
                continue;
            }
            let z = floor_z + jitter.sample(&mut rng);
            positions.push([x as f32 as f64, y as f32 as f64, z as f32 as f64]);
            colors.push(color_sample(spec.floor_color, &mut rng));
            instance_of.push(None);
            placed += 1;
        }
        let n = positions.len();

        let num_obj = spec.objects.len();
        let class_ids = spec.class_ids();
        let slot: BTreeMap<u32, usize> = class_ids.iter().enumerate().map(|(s, &c)| (c, s)).collect();
        let feat_noise = Normal::new(0.0, spec.feature_noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let d3 = num_obj + 1;
        let mut feats = vec![0.0f32; n * d3];
        let dc = class_ids.len() + 1;
        let mut sem = vec![0.0f32; n * dc];
        for p in 0..n {
            let (axis, cls) = match instance_of[p] {
                Some(i) => (i as usize, slot[&spec.objects[i as usize].class_id]),
                None => (num_obj, class_ids.len()),
            };
            for (j, f) in feats[p * d3..(p + 1) * d3].iter_mut().enumerate() {
                let base = if j == axis { 1.0 } else { 0.0 };
                *f = (base + feat_noise.sample(&mut rng)) as f32;
            }
            sem[p * dc + cls] = 1.0;
        }
        let point_features = Matrix::from_vec(n, d3, feats)?;
        let semantics = Matrix::from_vec(n, dc, sem)?;

        let cam = &spec.camera;
        let intrinsics = [
            [cam.focal, 0.0, cam.width as f64 / 2.0],
            [0.0, cam.focal, cam.height as f64 / 2.0],
            [0.0, 0.0, 1.0],
        ];
        let frames: Vec<(CameraFrame, super::render::Splat)> = (0..spec.num_frames)
            .into_par_iter()
            .map(|t| {
                let theta = TAU * t as f64 / spec.num_frames as f64;
                let eye = [
                    cam.target[0] + cam.radius * theta.cos(),
                    cam.target[1] + cam.radius * theta.sin(),
                    cam.heights[t % cam.heights.len()],
                ];
                let mut frame = CameraFrame {
                    frame_id: t as u32,
                    intrinsics,
                    extrinsics: look_at(eye, cam.target),
                    depth: crate::scene::DepthMap::zeros(cam.width, cam.height),
                    width: cam.width,
                    height: cam.height,
                    rgb_path: None,
                };
                let mut splat = splat_points(&positions, &frame);
                quantize_depth(&mut splat.depth, spec.depth_scale);
                frame.depth = splat.depth.clone();
                (frame, splat)
            })
            .collect();
        let labels: Vec<String> = spec.objects.iter().map(|o| spec.class_label(o.class_id)).collect();
        let mut next_id = 0u32;
        let mut masks = Vec::with_capacity(frames.len());
        for (frame, splat) in &frames {
            let m = render_gt_masks(splat, &instance_of, &labels, frame, spec.min_mask_pixels, next_id);
            next_id += m.len() as u32;
            masks.push(m);
        }

        let scene = Scene {
            root: root.into(),
            depth_scale: spec.depth_scale,
            cloud: PointCloud { positions, colors },
            frames: frames.into_iter().map(|(f, _)| f).collect(),
            masks,
        };
        scene.validate()?;

        let ground_truth: Vec<GroundTruthInstance> = (0..num_obj)
            .map(|i| GroundTruthInstance {
                mask: BitMask::from_indices(n, (0..n).filter(|&p| instance_of[p] == Some(i as u32))),
                class_id: spec.objects[i].class_id,
            })
            .collect();

        let mut groups = ClassGroups::new();
        let third = class_ids.len().div_ceil(3);
        for (g, chunk) in ["head", "common", "tail"].iter().zip(class_ids.chunks(third.max(1))) {
            groups.insert(g.to_string(), chunk.to_vec());
        }

        let queries = class_ids
            .iter()
            .enumerate()
            .map(|(s, &c)| {
                let mut e = vec![0.0f32; dc];
                e[s] = 1.0;
                QueryEmbedding {
                    prompt: spec.class_label(c),
                    class_id: c,
                    embedding: e,
                }
            })
            .collect();

        let external = spec
            .external_proposals
            .then(|| synthetic_external(&ground_truth, &instance_of, n, &mut rng));

        Ok(SyntheticScene {
            spec: spec.clone(),
            scene,
            instance_of,
            ground_truth,
            groups,
            point_features,
            semantics,
            queries,
            external,
        })
    }

    /// Writes the bundle and every auxiliary file under the scene root.
    pub fn write(&self) -> Result<()> {
        let s = &self.scene;
        write_scene_bundle(&s.root, s)?;
        save_ground_truth(s.path("gt_instances.json"), &self.ground_truth, s.num_points())?;
        write_json(s.path("groups.json"), &self.groups)?;
        write_json(s.path("synth/spec.json"), &self.spec)?;
        save_matrix(s.path("features/point_features.o3df"), &self.point_features)?;
        save_matrix(s.path(SEMANTICS_FILE), &self.semantics)?;
        let prompts: Vec<PromptEntry> = self
            .queries
            .iter()
            .map(|q| PromptEntry::Labeled {
                text: q.prompt.clone(),
                class_id: Some(q.class_id),
            })
            .collect();
        write_json(s.path("queries/prompts.json"), &prompts)?;
        let rows: Vec<&[f32]> = self.queries.iter().map(|q| q.embedding.as_slice()).collect();
        save_matrix(s.path("queries/text_embeddings.o3df"), &Matrix::from_rows(&rows)?)?;
        if let Some(ext) = &self.external {
            save_proposals(s.path("proposals_3d.json"), ext)?;
        }
        Ok(())
    }
}

/// Noisy copies of two thirds of the objects (every third object is missed),
/// plus low-score and undersized junk that the external filters remove.
fn synthetic_external(
    gts: &[GroundTruthInstance],
    instance_of: &[Option<u32>],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> ProposalSet {
    let mut set = ProposalSet::empty(n);
    for (i, g) in gts.iter().enumerate() {
        if i % 3 == 2 {
            continue;
        }
        let kept: Vec<usize> = g.mask.ones().filter(|_| rng.random_bool(0.9)).collect();
        set.push(BitMask::from_indices(n, kept), rng.random_range(0.5..1.0), ProposalSource::External3d);
    }
    let floor: Vec<usize> = (0..n).filter(|&p| instance_of[p].is_none()).collect();
    for (i, g) in gts.iter().enumerate().filter(|(i, _)| i % 4 == 0) {
        let mut pts: Vec<usize> = g.mask.ones().collect();
        pts.extend(floor.iter().copied().filter(|_| rng.random_bool(0.05)));
        set.push(BitMask::from_indices(n, pts), rng.random_range(0.05..0.15), ProposalSource::External3d);
        let frag: Vec<usize> = g.mask.ones().take(20 + i).collect();
        set.push(BitMask::from_indices(n, frag), rng.random_range(0.6..0.9), ProposalSource::External3d);
    }
    set
}

/// Builds the scene rooted at `out` and writes it there.
pub fn generate_scene(spec: &SceneSpec, out: impl AsRef<Path>) -> Result<SyntheticScene> {
    let synth = SyntheticScene::build(spec, out.as_ref())?;
    synth.write()?;
    Ok(synth)
}

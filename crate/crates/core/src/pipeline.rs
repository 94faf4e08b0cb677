//! Stage drivers. Each stage reads its inputs from the scene bundle or the
//! work directory and writes its output back to the work directory, so a
//! full run is exactly the composition of the individual stages.

use std::collections::BTreeMap;
use std::fs;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{benchmark_suite, label_accuracy, load_ground_truth, ClassGroups, LabelAccuracy, MetricsReport, Prediction};
use crate::features::{
    accumulate_pointwise, classify, load_queries, load_view_features, rank_proposals, LabelsFile, PointwiseClipFeatures,
};
use crate::projection::{
    load_visibility, project_points, save_visibility, superpoint_mask_overlap, visibility, visibility_file_name,
    VisibilityMap,
};
use crate::proposal2d::{hierarchical_traverse, per_frame_regions, regions_to_proposals, SuperpointTable, TraverseOutcome};
use crate::proposal3d::{combine_nms, filter_external};
use crate::scene::ply::write_ply;
use crate::scene::{
    load_matrix, load_proposals, load_scene_bundle, read_json, save_matrix, save_proposals, write_json, Matrix,
    PointCloud, ProposalSet, ProposalSource, Scene,
};
use crate::superpoints::{
    build_knn_graph, fallback_point_features, felzenszwalb_segment, load_partition, mean_superpoint_features,
    save_partition, superpoint_adjacency, SuperpointFeatures, SuperpointPartition,
};
use crate::synth::{synthesize_view_features, SEMANTICS_FILE};

pub const SUPERPOINTS_FILE: &str = "superpoints.json";
pub const VIS_DIR: &str = "vis";
pub const PROPOSALS_2D_FILE: &str = "proposals_2d.json";
pub const PROPOSALS_FINAL_FILE: &str = "proposals_final.json";
pub const POINT_CLIP_FILE: &str = "features/point_clip.o3df";
pub const LABELS_FILE: &str = "labels.json";
pub const REPORT_FILE: &str = "report.json";

pub const EXTERNAL_PROPOSALS_FILE: &str = "proposals_3d.json";
pub const POINT_FEATURES_FILE: &str = "features/point_features.o3df";
pub const VIEW_FEATURES_FILE: &str = "clip/view_features.o3df";
pub const VIEW_INDEX_FILE: &str = "clip/view_index.json";
/// Where view features synthesized from point semantics are written, apart
/// from the adapter's location so a rerun still takes the synthetic path.
pub const SYNTH_VIEW_FEATURES_FILE: &str = "synth/view_features.o3df";
pub const SYNTH_VIEW_INDEX_FILE: &str = "synth/view_index.json";
pub const QUERIES_DIR: &str = "queries";
pub const GT_FILE: &str = "gt_instances.json";
pub const GROUPS_FILE: &str = "groups.json";

/// A scene bundle plus the directory stage outputs go to.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub scene_dir: PathBuf,
    pub work_dir: PathBuf,
}

impl Workspace {
    /// `work` defaults to the scene directory.
    pub fn new(scene: impl Into<PathBuf>, work: Option<PathBuf>) -> Workspace {
        let scene_dir = scene.into();
        let work_dir = work.unwrap_or_else(|| scene_dir.clone());
        Workspace { scene_dir, work_dir }
    }

    pub fn scene_path(&self, rel: &str) -> PathBuf {
        self.scene_dir.join(rel)
    }

    pub fn work_path(&self, rel: &str) -> PathBuf {
        self.work_dir.join(rel)
    }

    pub fn vis_path(&self, frame_id: u32) -> PathBuf {
        self.work_dir.join(VIS_DIR).join(visibility_file_name(frame_id))
    }

    pub fn load_scene(&self) -> Result<Scene> {
        require(self.scene_path("manifest.json"), "synth or a dataset converter")?;
        load_scene_bundle(&self.scene_dir)
    }
}

fn require(path: PathBuf, producer: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingInput { path, producer })
    }
}

/// Runs `f` on a pool with the configured worker count.
pub fn with_workers<T: Send>(config: &PipelineConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.effective_workers())
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Every `subsample`-th frame index, starting from the first.
pub fn select_frames(num_frames: usize, subsample: usize) -> Vec<usize> {
    (0..num_frames).step_by(subsample.max(1)).collect()
}

pub fn run_superpoints(ws: &Workspace, config: &PipelineConfig) -> Result<SuperpointPartition> {
    let scene = ws.load_scene()?;
    let graph = build_knn_graph(&scene.cloud, &config.knn_params())?;
    let partition = felzenszwalb_segment(&graph, &config.segment_params())?;
    save_partition(ws.work_path(SUPERPOINTS_FILE), &partition)?;
    log::info!(
        "superpoints: {} points -> {} superpoints",
        partition.num_points(),
        partition.num_superpoints()
    );
    Ok(partition)
}

pub fn project_frames(scene: &Scene, frames: &[usize], tau_depth: f64) -> Vec<VisibilityMap> {
    frames
        .par_iter()
        .map(|&f| {
            let frame = &scene.frames[f];
            visibility(&project_points(&scene.cloud, frame), frame, tau_depth)
        })
        .collect()
}

pub fn run_project(ws: &Workspace, config: &PipelineConfig) -> Result<Vec<VisibilityMap>> {
    let scene = ws.load_scene()?;
    let frames = select_frames(scene.frames.len(), config.frame_subsample);
    let vis = project_frames(&scene, &frames, config.tau_depth);
    // Drop maps left by an earlier run with another frame selection.
    let keep: Vec<String> = vis.iter().map(|v| visibility_file_name(v.frame_id)).collect();
    if let Ok(entries) = fs::read_dir(ws.work_path(VIS_DIR)) {
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if name.starts_with("frame_") && name.ends_with(".json") && !keep.contains(&name) {
                fs::remove_file(e.path()).map_err(|err| Error::io(e.path(), err))?;
            }
        }
    }
    for v in &vis {
        save_visibility(ws.vis_path(v.frame_id), v, config.tau_depth)?;
    }
    log::info!("project: {} of {} frames", vis.len(), scene.frames.len());
    Ok(vis)
}

fn load_selected_visibility(ws: &Workspace, scene: &Scene, frames: &[usize]) -> Result<Vec<VisibilityMap>> {
    frames
        .iter()
        .map(|&f| {
            let id = scene.frames[f].frame_id;
            let v = load_visibility(require(ws.vis_path(id), "project")?)?;
            if v.frame_id != id || v.visible.len() != scene.num_points() {
                return Err(Error::validation(
                    "VisibilityMap",
                    "frame_id",
                    format!("stale visibility file for frame {id}; rerun project"),
                ));
            }
            Ok(v)
        })
        .collect()
}

/// Point features from the bundle, or color plus normal when the bundle has none.
pub fn point_features(ws: &Workspace, scene: &Scene, config: &PipelineConfig) -> Result<Matrix> {
    let path = ws.scene_path(POINT_FEATURES_FILE);
    if path.exists() {
        let m = load_matrix(&path)?;
        if m.rows() != scene.num_points() {
            return Err(Error::DimensionMismatch {
                context: "point feature rows",
                expected: scene.num_points(),
                found: m.rows(),
            });
        }
        Ok(m)
    } else {
        log::info!("no {POINT_FEATURES_FILE}; using color and normal features");
        Ok(fallback_point_features(&scene.cloud, config.knn_k.min(scene.num_points().saturating_sub(1)).max(1)))
    }
}

/// In-memory inputs of the 2D-guided stage.
pub struct GuidedInputs {
    pub partition: SuperpointPartition,
    pub adjacency: Vec<Vec<u32>>,
    pub features: SuperpointFeatures,
}

impl GuidedInputs {
    pub fn prepare(scene: &Scene, partition: SuperpointPartition, features: &Matrix, config: &PipelineConfig) -> Result<Self> {
        let graph = build_knn_graph(&scene.cloud, &config.knn_params())?;
        let adjacency = superpoint_adjacency(&partition, &graph);
        let features = mean_superpoint_features(&partition, features)?;
        Ok(GuidedInputs {
            partition,
            adjacency,
            features,
        })
    }
}

/// Grows per-frame regions from every mask of the selected frames, then
/// merges across frames. `visibilities` is aligned with `frames`.
pub fn lift_masks(
    scene: &Scene,
    frames: &[usize],
    visibilities: &[VisibilityMap],
    inputs: &GuidedInputs,
    config: &PipelineConfig,
) -> TraverseOutcome {
    let table = SuperpointTable::new(&inputs.partition.sizes, &inputs.features);
    let th = config.thresholds();
    let per_frame: Vec<_> = frames
        .par_iter()
        .zip(visibilities)
        .map(|(&f, vis)| {
            let frame = &scene.frames[f];
            let proj = project_points(&scene.cloud, frame);
            let overlaps: Vec<Vec<f64>> = scene.masks[f]
                .iter()
                .map(|m| superpoint_mask_overlap(&inputs.partition, &proj, vis, m))
                .collect();
            per_frame_regions(&overlaps, &inputs.adjacency, &table, &th, frame.frame_id)
        })
        .collect();
    hierarchical_traverse(per_frame, &table, &th, config.merge_order)
}

pub fn run_propose2d(ws: &Workspace, config: &PipelineConfig) -> Result<ProposalSet> {
    let scene = ws.load_scene()?;
    let partition = load_partition(require(ws.work_path(SUPERPOINTS_FILE), "superpoints")?)?;
    if partition.num_points() != scene.num_points() {
        return Err(Error::DimensionMismatch {
            context: "superpoint labels",
            expected: scene.num_points(),
            found: partition.num_points(),
        });
    }
    let frames = select_frames(scene.frames.len(), config.frame_subsample);
    let vis = load_selected_visibility(ws, &scene, &frames)?;
    let feats = point_features(ws, &scene, config)?;
    let inputs = GuidedInputs::prepare(&scene, partition, &feats, config)?;
    let outcome = lift_masks(&scene, &frames, &vis, &inputs, config);
    let set = regions_to_proposals(&outcome.regions, &inputs.partition, config.min_points);
    save_proposals(ws.work_path(PROPOSALS_2D_FILE), &set)?;
    log::info!(
        "propose2d: {} regions after {} merge calls, {} proposals",
        outcome.regions.len(),
        outcome.steps.len(),
        set.len()
    );
    Ok(set)
}

/// Which proposal sources feed the fused set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProposalMode {
    #[default]
    Both,
    Only2d,
    Only3d,
}

impl ProposalMode {
    pub fn uses_2d(self) -> bool {
        self != ProposalMode::Only3d
    }

    pub fn uses_3d(self) -> bool {
        self != ProposalMode::Only2d
    }
}

pub fn run_combine(ws: &Workspace, config: &PipelineConfig, mode: ProposalMode) -> Result<ProposalSet> {
    let m1 = if mode.uses_2d() {
        Some(load_proposals(require(ws.work_path(PROPOSALS_2D_FILE), "propose2d")?, ProposalSource::Guided2d)?)
    } else {
        None
    };
    let ext_path = ws.scene_path(EXTERNAL_PROPOSALS_FILE);
    let m2 = if !mode.uses_3d() {
        None
    } else if ext_path.exists() || mode == ProposalMode::Only3d {
        let raw = load_proposals(require(ext_path, "an external 3D segmenter")?, ProposalSource::External3d)?;
        let partition = match config.snap_fraction {
            Some(_) => Some(load_partition(require(ws.work_path(SUPERPOINTS_FILE), "superpoints")?)?),
            None => None,
        };
        Some(filter_external(&raw, partition.as_ref(), &config.external_filter())?)
    } else {
        log::info!("no {EXTERNAL_PROPOSALS_FILE}; fusing 2D-guided proposals only");
        None
    };
    let n = match (&m1, &m2) {
        (Some(a), _) => a.num_points,
        (None, Some(b)) => b.num_points,
        (None, None) => unreachable!("a proposal mode always enables one source"),
    };
    let m1 = m1.unwrap_or_else(|| ProposalSet::empty(n));
    let m2 = m2.unwrap_or_else(|| ProposalSet::empty(n));
    let fused = combine_nms(&m1, &m2, config.tau_dup)?;
    save_proposals(ws.work_path(PROPOSALS_FINAL_FILE), &fused)?;
    log::info!("combine: {} + {} -> {} proposals", m1.len(), m2.len(), fused.len());
    Ok(fused)
}

pub fn run_features(ws: &Workspace, config: &PipelineConfig) -> Result<PointwiseClipFeatures> {
    let scene = ws.load_scene()?;
    let proposals = load_proposals(require(ws.work_path(PROPOSALS_FINAL_FILE), "combine")?, ProposalSource::Guided2d)?;
    let frames = select_frames(scene.frames.len(), config.frame_subsample);
    let vis = load_selected_visibility(ws, &scene, &frames)?;
    let index = ws.scene_path(VIEW_INDEX_FILE);
    let views = if index.exists() {
        load_view_features(&index, require(ws.scene_path(VIEW_FEATURES_FILE), "the CLIP view-feature adapter")?)?
    } else if ws.scene_path(SEMANTICS_FILE).exists() {
        let semantics = load_matrix(ws.scene_path(SEMANTICS_FILE))?;
        let (matrix, idx) = synthesize_view_features(&semantics, &proposals, &vis, config.lambda)?;
        let (mpath, ipath) = (ws.work_path(SYNTH_VIEW_FEATURES_FILE), ws.work_path(SYNTH_VIEW_INDEX_FILE));
        save_matrix(&mpath, &matrix)?;
        write_json(&ipath, &idx)?;
        load_view_features(&ipath, &mpath)?
    } else {
        return Err(Error::MissingInput {
            path: index,
            producer: "the CLIP view-feature adapter",
        });
    };
    let feats = accumulate_pointwise(&proposals, &views, &vis, config.lambda)?;
    save_matrix(ws.work_path(POINT_CLIP_FILE), &feats.0)?;
    Ok(feats)
}

pub fn run_query(ws: &Workspace, queries_dir: Option<&Path>, topk: usize) -> Result<LabelsFile> {
    let proposals = load_proposals(require(ws.work_path(PROPOSALS_FINAL_FILE), "combine")?, ProposalSource::Guided2d)?;
    let feats = PointwiseClipFeatures(load_matrix(require(ws.work_path(POINT_CLIP_FILE), "features")?)?);
    let dir = queries_dir.map_or_else(|| ws.scene_path(QUERIES_DIR), Path::to_path_buf);
    let prompts = require(dir.join("prompts.json"), "the text-embedding adapter")?;
    let embeddings = require(dir.join("text_embeddings.o3df"), "the text-embedding adapter")?;
    let queries = load_queries(prompts, embeddings)?;
    let labels = classify(&proposals, &feats, &queries)?;
    let rankings = rank_proposals(&proposals, &feats, &queries, &labels, topk)?;
    let file = LabelsFile {
        proposals: labels,
        rankings,
    };
    write_json(ws.work_path(LABELS_FILE), &file)?;
    Ok(file)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub num_proposals: usize,
    /// True when predictions carry class labels from the query stage.
    pub labeled: bool,
    pub metrics: MetricsReport,
    pub labels_at_50: LabelAccuracy,
}

/// Input and output paths of the evaluation stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluateInputs {
    pub predictions: PathBuf,
    /// Class labels from the query stage; without them only class-agnostic metrics are meaningful.
    pub labels: Option<PathBuf>,
    pub ground_truth: PathBuf,
    pub groups: Option<PathBuf>,
    pub report: PathBuf,
}

impl EvaluateInputs {
    /// Standard locations; labels and groups are used when present.
    pub fn standard(ws: &Workspace) -> EvaluateInputs {
        let labels = ws.work_path(LABELS_FILE);
        let groups = ws.scene_path(GROUPS_FILE);
        EvaluateInputs {
            predictions: ws.work_path(PROPOSALS_FINAL_FILE),
            labels: labels.exists().then_some(labels),
            ground_truth: ws.scene_path(GT_FILE),
            groups: groups.exists().then_some(groups),
            report: ws.work_path(REPORT_FILE),
        }
    }
}

pub fn run_evaluate(ws: &Workspace) -> Result<EvaluationReport> {
    evaluate_files(&EvaluateInputs::standard(ws))
}

pub fn evaluate_files(inputs: &EvaluateInputs) -> Result<EvaluationReport> {
    let gts = load_ground_truth(require(inputs.ground_truth.clone(), "synth or a dataset converter")?)?;
    let proposals = load_proposals(require(inputs.predictions.clone(), "combine")?, ProposalSource::Guided2d)?;
    let labels: Option<LabelsFile> = match &inputs.labels {
        Some(p) => Some(read_json(require(p.clone(), "query")?)?),
        None => {
            log::warn!("no class labels; evaluating without them");
            None
        }
    };
    let mut confidence = vec![1.0; proposals.len()];
    let mut class_of = vec![None; proposals.len()];
    if let Some(l) = &labels {
        for c in &l.proposals {
            if c.proposal_id >= proposals.len() {
                return Err(Error::validation("Classification", "proposal_id", "labels do not match proposals; rerun query"));
            }
            confidence[c.proposal_id] = c.confidence;
            class_of[c.proposal_id] = c.class_id;
        }
    }
    let preds: Vec<Prediction> = proposals
        .masks
        .into_iter()
        .enumerate()
        .map(|(k, mask)| Prediction {
            mask,
            class_id: class_of[k],
            score: confidence[k],
        })
        .collect();
    let groups: Option<ClassGroups> = match &inputs.groups {
        Some(p) => Some(read_json(require(p.clone(), "synth or a dataset converter")?)?),
        None => None,
    };
    let metrics = benchmark_suite(&preds, &gts, groups.as_ref())?;
    let report = EvaluationReport {
        num_proposals: preds.len(),
        labeled: labels.is_some(),
        labels_at_50: label_accuracy(&preds, &gts, 0.5),
        metrics,
    };
    write_json(&inputs.report, &report)?;
    Ok(report)
}

fn instance_color(k: usize) -> [f64; 3] {
    // Golden-angle hue walk, full saturation and value.
    let h = (k as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r, g, b]
}

/// Writes the cloud with each point colored by the first proposal covering
/// it; uncovered points are gray.
pub fn export_ply(ws: &Workspace, proposals: Option<&Path>, out: &Path) -> Result<()> {
    let scene = ws.load_scene()?;
    let path = match proposals {
        Some(p) => p.to_path_buf(),
        None => require(ws.work_path(PROPOSALS_FINAL_FILE), "combine")?,
    };
    let set = load_proposals(path, ProposalSource::Guided2d)?;
    if set.num_points != scene.num_points() {
        return Err(Error::DimensionMismatch {
            context: "proposal masks",
            expected: scene.num_points(),
            found: set.num_points,
        });
    }
    let mut colors = vec![[0.5; 3]; scene.num_points()];
    let mut painted = vec![false; scene.num_points()];
    for (k, m) in set.masks.iter().enumerate() {
        let c = instance_color(k);
        for p in m.ones() {
            if !painted[p] {
                colors[p] = c;
                painted[p] = true;
            }
        }
    }
    write_ply(
        out,
        &PointCloud {
            positions: scene.cloud.positions,
            colors,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: ProposalMode,
    pub topk: usize,
    /// Recompute stages even when their cached outputs are current.
    pub force: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: ProposalMode::Both,
            topk: 10,
            force: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub executed: Vec<&'static str>,
    pub cached: Vec<&'static str>,
    pub skipped: Vec<&'static str>,
    pub report: Option<EvaluationReport>,
}

const CACHE_DIR: &str = ".cache";

fn hash_file(h: &mut DefaultHasher, path: &Path) -> Result<()> {
    match fs::read(path) {
        Ok(bytes) => {
            path.file_name().hash(h);
            bytes.hash(h);
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            0u8.hash(h);
            Ok(())
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

fn hash_dir(h: &mut DefaultHasher, dir: &Path) -> Result<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths.iter().filter(|p| p.is_file()) {
        hash_file(h, p)?;
    }
    Ok(())
}

struct StageCache<'a> {
    ws: &'a Workspace,
    force: bool,
}

impl StageCache<'_> {
    fn key_path(&self, stage: &str) -> PathBuf {
        self.ws.work_path(CACHE_DIR).join(format!("{stage}.key"))
    }

    fn fresh(&self, stage: &str, key: u64, outputs: &[PathBuf]) -> bool {
        !self.force
            && outputs.iter().all(|p| p.exists())
            && fs::read_to_string(self.key_path(stage)).is_ok_and(|s| s.trim() == format!("{key:016x}"))
    }

    fn store(&self, stage: &str, key: u64) -> Result<()> {
        let path = self.key_path(stage);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, format!("{key:016x}\n")).map_err(|e| Error::io(&path, e))
    }
}

/// superpoints → project → propose2d → combine → features → query →
/// evaluate. Stages whose inputs and parameters are unchanged since the last
/// run are skipped; feature, query and evaluation stages are skipped when
/// the bundle lacks their inputs.
pub fn run_pipeline(ws: &Workspace, config: &PipelineConfig, options: &RunOptions) -> Result<RunSummary> {
    config.validate()?;
    with_workers(config, || run_stages(ws, config, options))?
}

fn run_stages(ws: &Workspace, config: &PipelineConfig, options: &RunOptions) -> Result<RunSummary> {
    let scene = ws.load_scene()?;
    let cache = StageCache {
        ws,
        force: options.force,
    };
    let mut summary = RunSummary::default();

    let mut h = DefaultHasher::new();
    for f in ["manifest.json", "cloud.ply"] {
        hash_file(&mut h, &ws.scene_path(f))?;
    }
    hash_dir(&mut h, &ws.scene_path("frames"))?;
    hash_dir(&mut h, &ws.scene_path("masks"))?;
    let scene_key = h.finish();
    let frames = select_frames(scene.frames.len(), config.frame_subsample);
    drop(scene);

    let key_of = |parts: &dyn Fn(&mut DefaultHasher) -> Result<()>| -> Result<u64> {
        let mut h = DefaultHasher::new();
        parts(&mut h)?;
        Ok(h.finish())
    };
    let mut step = |name: &'static str, key: u64, outputs: Vec<PathBuf>, f: &mut dyn FnMut() -> Result<()>| {
        if cache.fresh(name, key, &outputs) {
            log::info!("{name}: cached");
            summary.cached.push(name);
            return Ok::<_, Error>(());
        }
        f()?;
        cache.store(name, key)?;
        summary.executed.push(name);
        Ok(())
    };

    let sp_key = key_of(&|h| {
        (scene_key, config.knn_k, config.fz_k.to_bits(), config.min_size).hash(h);
        (config.w_color.to_bits(), config.w_pos.to_bits(), config.r_norm.to_bits()).hash(h);
        Ok(())
    })?;
    step("superpoints", sp_key, vec![ws.work_path(SUPERPOINTS_FILE)], &mut || {
        run_superpoints(ws, config).map(drop)
    })?;

    let vis_key = key_of(&|h| {
        (scene_key, config.tau_depth.to_bits(), config.frame_subsample).hash(h);
        Ok(())
    })?;
    let scene = ws.load_scene()?;
    let vis_outputs = frames.iter().map(|&f| ws.vis_path(scene.frames[f].frame_id)).collect();
    drop(scene);
    step("project", vis_key, vis_outputs, &mut || run_project(ws, config).map(drop))?;

    let p2_key = key_of(&|h| {
        (sp_key, vis_key, config.tau_iou.to_bits(), config.tau_sim.to_bits()).hash(h);
        (config.merge_order.to_string(), config.min_points).hash(h);
        hash_file(h, &ws.scene_path(POINT_FEATURES_FILE))
    })?;
    if options.mode.uses_2d() {
        step("propose2d", p2_key, vec![ws.work_path(PROPOSALS_2D_FILE)], &mut || {
            run_propose2d(ws, config).map(drop)
        })?;
    }

    let mode_tag = match options.mode {
        ProposalMode::Both => 0u8,
        ProposalMode::Only2d => 1,
        ProposalMode::Only3d => 2,
    };
    let fused_key = key_of(&|h| {
        (mode_tag, sp_key, config.tau_dup.to_bits(), config.score_min.to_bits(), config.min_points).hash(h);
        config.snap_fraction.map(f64::to_bits).hash(h);
        if options.mode.uses_2d() {
            p2_key.hash(h);
        }
        hash_file(h, &ws.scene_path(EXTERNAL_PROPOSALS_FILE))
    })?;
    step("combine", fused_key, vec![ws.work_path(PROPOSALS_FINAL_FILE)], &mut || {
        run_combine(ws, config, options.mode).map(drop)
    })?;

    let has_views = ws.scene_path(VIEW_INDEX_FILE).exists() || ws.scene_path(SEMANTICS_FILE).exists();
    let has_queries = ws.scene_path(QUERIES_DIR).join("prompts.json").exists();
    let feat_key = key_of(&|h| {
        (fused_key, vis_key, config.lambda).hash(h);
        for f in [VIEW_INDEX_FILE, VIEW_FEATURES_FILE, SEMANTICS_FILE] {
            hash_file(h, &ws.scene_path(f))?;
        }
        Ok(())
    })?;
    let query_key = key_of(&|h| {
        (feat_key, options.topk).hash(h);
        hash_dir(h, &ws.scene_path(QUERIES_DIR))
    })?;
    if has_views && has_queries {
        step("features", feat_key, vec![ws.work_path(POINT_CLIP_FILE)], &mut || {
            run_features(ws, config).map(drop)
        })?;
        step("query", query_key, vec![ws.work_path(LABELS_FILE)], &mut || {
            run_query(ws, None, options.topk).map(drop)
        })?;
    } else {
        log::warn!("no view features or prompts in the bundle; skipping features and query");
        summary.skipped.extend(["features", "query"]);
        let stale = ws.work_path(LABELS_FILE);
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        }
    }

    if ws.scene_path(GT_FILE).exists() {
        let eval_key = key_of(&|h| {
            (query_key, fused_key, has_views && has_queries).hash(h);
            hash_file(h, &ws.scene_path(GT_FILE))?;
            hash_file(h, &ws.scene_path(GROUPS_FILE))
        })?;
        let mut report = None;
        step("evaluate", eval_key, vec![ws.work_path(REPORT_FILE)], &mut || {
            report = Some(run_evaluate(ws)?);
            Ok(())
        })?;
        summary.report = match report {
            Some(r) => Some(r),
            None => Some(read_json(ws.work_path(REPORT_FILE))?),
        };
    } else {
        summary.skipped.push("evaluate");
    }
    Ok(summary)
}

/// Standard artifact paths relative to the work directory, for comparisons.
pub fn artifact_paths(ws: &Workspace) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for rel in [
        SUPERPOINTS_FILE,
        PROPOSALS_2D_FILE,
        PROPOSALS_FINAL_FILE,
        POINT_CLIP_FILE,
        LABELS_FILE,
        REPORT_FILE,
        SYNTH_VIEW_FEATURES_FILE,
        SYNTH_VIEW_INDEX_FILE,
    ] {
        let p = ws.work_path(rel);
        if p.exists() {
            out.insert(rel.to_string(), p);
        }
    }
    if let Ok(entries) = fs::read_dir(ws.work_path(VIS_DIR)) {
        for e in entries.flatten() {
            let name = format!("{VIS_DIR}/{}", e.file_name().to_string_lossy());
            out.insert(name, e.path());
        }
    }
    Ok(out)
}

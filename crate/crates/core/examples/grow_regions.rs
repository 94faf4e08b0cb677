//! Grows one region per 2D mask in a single frame.

use masklift::pipeline::GuidedInputs;
use masklift::projection::{project_points, superpoint_mask_overlap, visibility};
use masklift::proposal2d::{grow_region, SuperpointTable};
use masklift::superpoints::{build_knn_graph, felzenszwalb_segment};
use masklift::synth::{SceneSpec, SyntheticScene};
use masklift::PipelineConfig;

fn main() -> masklift::Result<()> {
    let s = SyntheticScene::build(&SceneSpec::random(7, 10, 4), std::env::temp_dir().join("masklift-grow"))?;
    let config = PipelineConfig::default();
    let graph = build_knn_graph(&s.scene.cloud, &config.knn_params())?;
    let partition = felzenszwalb_segment(&graph, &config.segment_params())?;
    let inputs = GuidedInputs::prepare(&s.scene, partition, &s.point_features, &config)?;
    let table = SuperpointTable::new(&inputs.partition.sizes, &inputs.features);

    let frame = &s.scene.frames[1];
    let proj = project_points(&s.scene.cloud, frame);
    let vis = visibility(&proj, frame, config.tau_depth);
    for m in &s.scene.masks[1] {
        let o = superpoint_mask_overlap(&inputs.partition, &proj, &vis, m);
        let seeds = o.iter().filter(|&&x| x > config.tau_iou).count();
        match grow_region(&o, &inputs.adjacency, &table, &config.thresholds(), frame.frame_id) {
            Some(r) => println!(
                "{:?}: {seeds} candidates -> {} superpoints, {} points",
                m.label_hint,
                r.superpoints.len(),
                r.point_count
            ),
            None => println!("{:?}: no superpoint passes tau_iou", m.label_hint),
        }
    }
    Ok(())
}

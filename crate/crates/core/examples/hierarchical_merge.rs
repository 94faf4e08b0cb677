//! Lifts every frame's masks and merges them across frames, comparing the
//! hierarchical and sequential orders.

use masklift::pipeline::{lift_masks, project_frames, select_frames, GuidedInputs};
use masklift::proposal2d::MergeOrder;
use masklift::superpoints::{build_knn_graph, felzenszwalb_segment};
use masklift::synth::{SceneSpec, SyntheticScene};
use masklift::PipelineConfig;

fn main() -> masklift::Result<()> {
    let s = SyntheticScene::build(&SceneSpec::random(7, 10, 8), std::env::temp_dir().join("masklift-merge"))?;
    let mut config = PipelineConfig {
        frame_subsample: 1,
        ..PipelineConfig::default()
    };
    let graph = build_knn_graph(&s.scene.cloud, &config.knn_params())?;
    let partition = felzenszwalb_segment(&graph, &config.segment_params())?;
    let inputs = GuidedInputs::prepare(&s.scene, partition, &s.point_features, &config)?;
    let frames = select_frames(s.scene.frames.len(), config.frame_subsample);
    let vis = project_frames(&s.scene, &frames, config.tau_depth);

    for order in [MergeOrder::Hierarchical, MergeOrder::Sequential] {
        config.merge_order = order;
        let out = lift_masks(&s.scene, &frames, &vis, &inputs, &config);
        println!("{order}: {} regions after {} merge calls", out.regions.len(), out.steps.len());
        for step in &out.steps {
            println!("  frames {:?} + {:?}", step.left, step.right);
        }
    }
    Ok(())
}

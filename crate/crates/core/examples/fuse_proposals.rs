//! Filters the synthetic external 3D proposals and fuses them with the
//! 2D-guided set by non-maximum suppression.

use masklift::pipeline::{self, ProposalMode, Workspace};
use masklift::proposal3d::{combine_nms, filter_external};
use masklift::scene::{load_proposals, ProposalSource};
use masklift::superpoints::load_partition;
use masklift::synth::{generate_scene, SceneSpec};
use masklift::PipelineConfig;

fn main() -> masklift::Result<()> {
    let dir = std::env::temp_dir().join("masklift-fuse");
    let s = generate_scene(&SceneSpec::random(7, 10, 8), &dir)?;
    let ws = Workspace::new(&dir, None);
    let config = PipelineConfig {
        frame_subsample: 1,
        ..PipelineConfig::default()
    };
    pipeline::run_superpoints(&ws, &config)?;
    pipeline::run_project(&ws, &config)?;
    let guided = pipeline::run_propose2d(&ws, &config)?;

    let partition = load_partition(ws.work_path(pipeline::SUPERPOINTS_FILE))?;
    let external = load_proposals(ws.scene_path(pipeline::EXTERNAL_PROPOSALS_FILE), ProposalSource::External3d)?;
    let kept = filter_external(&external, Some(&partition), &config.external_filter())?;
    println!("{} guided, {} external ({} after filtering)", guided.len(), external.len(), kept.len());
    for tau in [0.25, 0.5, 0.75] {
        let fused = combine_nms(&guided, &kept, tau)?;
        let lifted = fused.sources.iter().filter(|&&x| x == ProposalSource::Guided2d).count();
        println!("  tau_dup {tau}: {} fused ({lifted} lifted)", fused.len());
    }
    let both = pipeline::run_combine(&ws, &config, ProposalMode::Both)?;
    println!("{} ground-truth objects, {} final proposals", s.ground_truth.len(), both.len());
    Ok(())
}

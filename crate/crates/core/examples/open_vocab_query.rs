//! Pools per-point features from view features of each proposal, then
//! labels proposals against text embeddings.

use masklift::features::{accumulate_pointwise, classify, rank_proposals};
use masklift::pipeline::{project_frames, select_frames};
use masklift::scene::{ProposalSet, ProposalSource};
use masklift::synth::{synthesize_view_features, SceneSpec, SyntheticScene};

fn main() -> masklift::Result<()> {
    let s = SyntheticScene::build(&SceneSpec::random(7, 10, 16), std::env::temp_dir().join("masklift-query"))?;
    // Ground-truth masks stand in for proposals here.
    let mut proposals = ProposalSet::empty(s.scene.num_points());
    for g in &s.ground_truth {
        proposals.push(g.mask.clone(), 1.0, ProposalSource::Guided2d);
    }
    let lambda = 5;
    let vis = project_frames(&s.scene, &select_frames(s.scene.frames.len(), 1), 0.1);
    let (matrix, index) = synthesize_view_features(&s.semantics, &proposals, &vis, lambda)?;
    let mut views = masklift::features::ProposalViewFeatures::new(matrix.cols());
    for e in &index.entries {
        views.insert(e.proposal_id, e.frame_id, matrix.row(e.row).to_vec())?;
    }
    let features = accumulate_pointwise(&proposals, &views, &vis, lambda)?;
    let labels = classify(&proposals, &features, &s.queries)?;
    for (c, g) in labels.iter().zip(&s.ground_truth) {
        println!("proposal {}: {:?} (truth class {}) score {:.3}", c.proposal_id, c.prompt, g.class_id, c.score.unwrap_or(0.0));
    }
    for r in rank_proposals(&proposals, &features, &s.queries, &labels, 2)? {
        println!("\"{}\" -> {:?}", r.prompt, r.top.iter().map(|t| t.proposal_id).collect::<Vec<_>>());
    }
    Ok(())
}

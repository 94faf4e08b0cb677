//! Projects the cloud into one frame and shows how the depth tolerance
//! controls visibility.

use masklift::projection::{project_points, superpoint_mask_overlap, visibility};
use masklift::scene::PointCloud;
use masklift::superpoints::SuperpointPartition;
use masklift::synth::{SceneSpec, SyntheticScene};

fn main() -> masklift::Result<()> {
    let s = SyntheticScene::build(&SceneSpec::random(7, 10, 4), std::env::temp_dir().join("masklift-proj"))?;
    let cloud: &PointCloud = &s.scene.cloud;
    let frame = &s.scene.frames[0];
    let proj = project_points(cloud, frame);
    let in_bounds = proj.in_bounds.iter().filter(|&&b| b).count();
    println!("frame {}: {in_bounds} of {} points in bounds", frame.frame_id, cloud.len());
    for tau in [0.0, 0.01, 0.05, 0.1, 0.5] {
        println!("  tau_depth {tau:<4}: {} visible", visibility(&proj, frame, tau).visible.count());
    }

    // Treat each object as one superpoint and measure its overlap with every mask.
    let raw: Vec<u32> = s.instance_of.iter().map(|o| o.map_or(0, |i| i + 1)).collect();
    let partition = SuperpointPartition::from_raw_labels(&raw);
    let vis = visibility(&proj, frame, 0.1);
    for m in &s.scene.masks[0] {
        let o = superpoint_mask_overlap(&partition, &proj, &vis, m);
        let (best, ratio) = o.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        println!("  mask {} ({:?}): best superpoint {best} at {ratio:.3}", m.mask_id, m.label_hint);
    }
    Ok(())
}

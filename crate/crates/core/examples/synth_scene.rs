//! Generates the seed-7 synthetic room and summarizes it.

use masklift::synth::{generate_scene, SceneSpec};

fn main() -> masklift::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("masklift-synth7"), Into::into);
    let s = generate_scene(&SceneSpec::random(7, 10, 16), &out)?;
    println!("{} points, {} frames, written to {}", s.scene.num_points(), s.scene.frames.len(), out.display());
    for (i, o) in s.spec.objects.iter().enumerate() {
        let views = s.scene.masks.iter().filter(|ms| ms.iter().any(|m| m.label_hint == o.label)).count();
        println!("  object {i}: {:?} {:?} class {} seen in {views} frames", o.shape, o.label, o.class_id);
    }
    let external = s.external.as_ref().map_or(0, |e| e.len());
    println!("{} ground-truth instances, {external} external proposals", s.ground_truth.len());
    Ok(())
}

//! Every stage on a synthetic bundle, then a cached rerun.

use masklift::pipeline::{run_pipeline, RunOptions, Workspace};
use masklift::synth::{generate_scene, SceneSpec};
use masklift::PipelineConfig;

fn main() -> masklift::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("masklift-full"), Into::into);
    generate_scene(&SceneSpec::random(7, 10, 16), &dir)?;
    let ws = Workspace::new(&dir, None);
    let config = PipelineConfig {
        frame_subsample: 1,
        ..PipelineConfig::default()
    };
    let first = run_pipeline(&ws, &config, &RunOptions::default())?;
    println!("ran {:?}", first.executed);
    if let Some(r) = &first.report {
        let a = &r.metrics.class_agnostic;
        println!("AP50 {:.3}, class-agnostic recall@50 {:.3}, AR {:.3}", r.metrics.ap50, a.recall50, a.ar);
        println!("labels {}/{} correct", r.labels_at_50.correct, r.labels_at_50.matched);
    }
    let second = run_pipeline(&ws, &config, &RunOptions::default())?;
    println!("rerun cached {:?}", second.cached);
    Ok(())
}

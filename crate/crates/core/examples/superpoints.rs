//! Segments a synthetic cloud into superpoints and reports how well they
//! respect object boundaries.

use masklift::eval::region_purity;
use masklift::superpoints::{build_knn_graph, felzenszwalb_segment, superpoint_adjacency};
use masklift::synth::{SceneSpec, SyntheticScene};
use masklift::PipelineConfig;

fn main() -> masklift::Result<()> {
    let s = SyntheticScene::build(&SceneSpec::random(7, 10, 2), std::env::temp_dir().join("masklift-sp"))?;
    let config = PipelineConfig::default();
    let graph = build_knn_graph(&s.scene.cloud, &config.knn_params())?;
    let partition = felzenszwalb_segment(&graph, &config.segment_params())?;
    let adjacency = superpoint_adjacency(&partition, &graph);
    let sizes = &partition.sizes;
    println!(
        "{} points -> {} superpoints (sizes {}..={})",
        partition.num_points(),
        partition.num_superpoints(),
        sizes.iter().min().unwrap(),
        sizes.iter().max().unwrap()
    );
    let degree = adjacency.iter().map(Vec::len).sum::<usize>() as f64 / adjacency.len() as f64;
    println!("mean superpoint degree {degree:.2}");
    let masks: Vec<_> = (0..partition.num_superpoints() as u32).map(|u| partition.expand(&[u])).collect();
    println!("mean purity {:.4}", region_purity(&masks, &s.instance_of).unwrap_or(0.0));
    Ok(())
}

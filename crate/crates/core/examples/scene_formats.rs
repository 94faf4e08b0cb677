//! Writes a two-point scene bundle by hand, reloads it, and shows the RLE
//! and matrix encodings used by the other artifacts.

use masklift::scene::rle::{encode_labels, encode_mask};
use masklift::scene::{
    load_matrix, load_scene_bundle, save_matrix, write_scene_bundle, BitMask, CameraFrame, DepthMap, Mask2D, Matrix,
    PointCloud, Scene,
};

fn main() -> masklift::Result<()> {
    let dir = std::env::temp_dir().join("masklift-scene-formats");
    let (w, h) = (8, 6);
    let mut depth = DepthMap::zeros(w, h);
    depth.set(4, 3, 2.0);
    let scene = Scene {
        root: dir.clone(),
        depth_scale: 1000.0,
        cloud: PointCloud {
            positions: vec![[0.0, 0.0, 2.0], [0.5, 0.0, 2.0]],
            colors: vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        },
        frames: vec![CameraFrame {
            frame_id: 0,
            intrinsics: [[4.0, 0.0, 4.0], [0.0, 4.0, 3.0], [0.0, 0.0, 1.0]],
            extrinsics: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
            depth,
            width: w,
            height: h,
            rgb_path: None,
        }],
        masks: vec![vec![Mask2D {
            mask_id: 0,
            frame_id: 0,
            width: w,
            height: h,
            bits: BitMask::from_indices(w * h, [3 * w + 4]),
            label_hint: Some("cup".into()),
            score: None,
        }]],
    };
    write_scene_bundle(&dir, &scene)?;
    let loaded = load_scene_bundle(&dir)?;
    println!("bundle at {} reloads equal: {}", dir.display(), loaded == scene);

    let mask = BitMask::from_indices(10, [2, 3, 4, 8]);
    println!("mask runs (zeros first): {:?}", encode_mask(&mask)?);
    println!("label runs: {:?}", encode_labels(&[0, 0, 0, 1, 1, 0]));

    let m = Matrix::from_rows(&[vec![1.0f32, 0.0], vec![0.6, 0.8]])?;
    let path = dir.join("example.o3df");
    save_matrix(&path, &m)?;
    println!("matrix {}x{} round trips: {}", m.rows(), m.cols(), load_matrix(&path)? == m);
    Ok(())
}

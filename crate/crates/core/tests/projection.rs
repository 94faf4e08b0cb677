mod common;

use masklift::projection::{project_point, project_points, superpoint_mask_overlap, unproject_pixel, visibility};
use masklift::scene::{BitMask, CameraFrame, DepthMap, Mask2D, PointCloud};
use masklift::superpoints::SuperpointPartition;
use masklift::synth::render_depth;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const W: usize = 64;
const H: usize = 48;

fn random_frame(r: &mut ChaCha8Rng) -> CameraFrame {
    let f = r.random_range(40.0..120.0);
    CameraFrame {
        frame_id: 0,
        intrinsics: [[f, 0.0, W as f64 / 2.0], [0.0, f * r.random_range(0.9..1.1), H as f64 / 2.0], [0.0, 0.0, 1.0]],
        extrinsics: common::random_pose(r),
        depth: DepthMap::zeros(W, H),
        width: W,
        height: H,
        rgb_path: None,
    }
}

/// Points in front of the camera, a depth map near their depths, a mask and
/// a superpoint labelling.
fn random_view(seed: u64, n: usize) -> (PointCloud, CameraFrame, Mask2D, SuperpointPartition) {
    let mut r = common::rng(seed);
    let mut frame = random_frame(&mut r);
    let positions: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            if r.random_bool(0.1) {
                std::array::from_fn(|_| r.random_range(-5.0..5.0))
            } else {
                let x = r.random_range(0.0..W as f64);
                let y = r.random_range(0.0..H as f64);
                unproject_pixel(&frame, x, y, r.random_range(0.5..4.0))
            }
        })
        .collect();
    for v in frame.depth.data.iter_mut() {
        *v = if r.random_bool(0.1) { 0.0 } else { r.random_range(0.5f32..4.0) };
    }
    // Put some measured depths right at projected points so visibility is common.
    for p in &positions {
        let (x, y, z) = project_point(&frame, p);
        if z > 0.0 && x >= 0.0 && y >= 0.0 && x < W as f64 && y < H as f64 && r.random_bool(0.6) {
            frame.depth.set(x as usize, y as usize, (z + r.random_range(-0.15..0.15)) as f32);
        }
    }
    let cloud = PointCloud {
        positions,
        colors: vec![[0.5; 3]; n],
    };
    let bits: Vec<bool> = (0..W * H).map(|i| (i % W) < W / 2 || r.random_bool(0.2)).collect();
    let mask = Mask2D {
        mask_id: 0,
        frame_id: 0,
        width: W,
        height: H,
        bits: BitMask::from_bools(&bits),
        label_hint: None,
        score: None,
    };
    let raw: Vec<u32> = (0..n).map(|_| r.random_range(0..12)).collect();
    (cloud, frame, mask, SuperpointPartition::from_raw_labels(&raw))
}

#[test]
fn projection_round_trip() {
    let mut r = common::rng(10);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let frame = random_frame(&mut r);
        let p: [f64; 3] = std::array::from_fn(|_| r.random_range(-3.0..3.0));
        let (x, y, z) = project_point(&frame, &p);
        if z <= 0.05 {
            continue;
        }
        let q = unproject_pixel(&frame, x, y, z);
        worst = worst.max(common::dist2(&p, &q).sqrt());
    }
    assert!(worst < 1e-4, "max round-trip error {worst}");
}

#[test]
fn overlap_matches_per_point_loop() {
    for seed in 0..20 {
        let (cloud, frame, mask, part) = random_view(seed, 600);
        let proj = project_points(&cloud, &frame);
        let vis = visibility(&proj, &frame, 0.1);
        let got = superpoint_mask_overlap(&part, &proj, &vis, &mask);
        let expected = common::naive_overlap_ratios(
            &cloud.positions,
            &part.labels,
            &frame.intrinsics,
            &frame.extrinsics,
            &frame.depth.data,
            W,
            H,
            0.1,
            &mask.bits.to_bools(),
        );
        assert_eq!(got, expected, "seed {seed}");
        assert!(got.iter().all(|o| (0.0..=1.0).contains(o)));
        assert!(got.iter().any(|&o| o > 0.0 && o < 1.0), "degenerate view");
    }
}

#[test]
fn overlap_is_invariant_to_point_order() {
    let (cloud, frame, mask, part) = random_view(99, 500);
    let n = cloud.len();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let permuted = PointCloud {
        positions: perm.iter().map(|&i| cloud.positions[i]).collect(),
        colors: perm.iter().map(|&i| cloud.colors[i]).collect(),
    };
    let labels: Vec<u32> = perm.iter().map(|&i| part.labels[i]).collect();
    // Rebuild the partition without relabeling so superpoint ids stay comparable.
    let part_p = SuperpointPartition {
        labels,
        sizes: part.sizes.clone(),
    };
    let a = {
        let proj = project_points(&cloud, &frame);
        superpoint_mask_overlap(&part, &proj, &visibility(&proj, &frame, 0.1), &mask)
    };
    let b = {
        let proj = project_points(&permuted, &frame);
        superpoint_mask_overlap(&part_p, &proj, &visibility(&proj, &frame, 0.1), &mask)
    };
    assert_eq!(a, b);
}

#[test]
fn rendered_depth_makes_every_owner_visible() {
    let (cloud, frame, _, _) = random_view(5, 800);
    let mut frame = frame;
    frame.depth = render_depth(&cloud.positions, &frame);
    let splat = masklift::synth::splat_points(&cloud.positions, &frame);
    let proj = project_points(&cloud, &frame);
    let vis = visibility(&proj, &frame, 0.01);
    let owners: Vec<u32> = splat.owner.iter().flatten().copied().collect();
    assert!(!owners.is_empty());
    for o in owners {
        assert!(vis.visible.get(o as usize), "point {o} owns a pixel but is not visible");
    }
}

#[test]
fn points_behind_the_camera_are_never_visible() {
    let (cloud, frame, _, _) = random_view(6, 400);
    let proj = project_points(&cloud, &frame);
    let vis = visibility(&proj, &frame, 100.0);
    for i in vis.visible.ones() {
        assert!(proj.depth[i] > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn visibility_is_monotone_in_tau(seed in any::<u64>(), a in 0.001f64..0.5, b in 0.001f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (cloud, frame, _, _) = random_view(seed, 300);
        let proj = project_points(&cloud, &frame);
        let small = visibility(&proj, &frame, lo);
        let large = visibility(&proj, &frame, hi);
        prop_assert_eq!(small.visible.intersection_count(&large.visible), small.visible.count());
    }

    #[test]
    fn round_trip_proptest(seed in any::<u64>(), x in 0.0f64..64.0, y in 0.0f64..48.0, z in 0.01f64..50.0) {
        let mut r = common::rng(seed);
        let frame = random_frame(&mut r);
        let p = unproject_pixel(&frame, x, y, z);
        let (px, py, pz) = project_point(&frame, &p);
        prop_assert!((px - x).abs() < 1e-6 && (py - y).abs() < 1e-6 && (pz - z).abs() < 1e-9 * z.max(1.0));
    }
}

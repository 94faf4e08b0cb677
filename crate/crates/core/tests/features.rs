mod common;

use masklift::features::{accumulate_pointwise, classify, query_score, top_views, PointwiseClipFeatures, QueryEmbedding};
use masklift::scene::{BitMask, Matrix, ProposalSet, ProposalSource};
use proptest::prelude::*;
use rand::Rng;

fn unit(v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn pooling_matches_double_loop() {
    let mut r = common::rng(30);
    for case in 0..100 {
        let c = common::random_pooling_case(&mut r);
        let (set, views, vis) = c.library_inputs();
        let got = accumulate_pointwise(&set, &views, &vis, c.lambda).unwrap();
        let expected = common::naive_pointwise(&c.masks, &c.views, &c.vis, c.lambda, c.dim);
        for (p, row) in expected.iter().enumerate() {
            for (a, b) in got.row(p).iter().zip(row) {
                assert!((*a as f64 - b).abs() < 1e-6, "case {case} point {p}");
            }
            let norm = got.row(p).iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-5);
        }
        for (k, m) in c.masks.iter().enumerate() {
            assert_eq!(top_views(&set.masks[k], &vis, c.lambda), common::naive_top_views(m, &c.vis, c.lambda));
        }
    }
}

#[test]
fn top_views_break_ties_by_frame_id() {
    let n = 4;
    let mask = BitMask::from_indices(n, [0, 1]);
    let vis = |f: u32, ones: &[usize]| masklift::projection::VisibilityMap {
        frame_id: f,
        visible: BitMask::from_indices(n, ones.iter().copied()),
    };
    let maps = vec![vis(9, &[0]), vis(2, &[1]), vis(5, &[0, 1]), vis(1, &[2, 3])];
    assert_eq!(top_views(&mask, &maps, 5), vec![5, 2, 9]);
    assert_eq!(top_views(&mask, &maps, 2), vec![5, 2]);
}

#[test]
fn scaling_view_features_changes_nothing() {
    let mut r = common::rng(31);
    for _ in 0..20 {
        let c = common::random_pooling_case(&mut r);
        let (set, views, vis) = c.library_inputs();
        let mut scaled = views.clone();
        for v in scaled.entries.values_mut() {
            for x in v.iter_mut() {
                *x *= 8.0;
            }
        }
        let a = accumulate_pointwise(&set, &views, &vis, c.lambda).unwrap();
        let b = accumulate_pointwise(&set, &scaled, &vis, c.lambda).unwrap();
        for (x, y) in a.0.data().iter().zip(b.0.data()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn two_class_scene_is_classified() {
    // Points 0..50 see class A features, 50..100 class B.
    let n = 100;
    let e_a = unit(vec![1.0, 0.1, 0.0]);
    let e_b = unit(vec![0.0, 0.2, 1.0]);
    let mut r = common::rng(32);
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|i| {
            let base = if i < 50 { &e_a } else { &e_b };
            unit(base.iter().map(|v| v + r.random_range(-0.1f32..0.1)).collect())
        })
        .collect();
    let feats = PointwiseClipFeatures(Matrix::from_rows(&rows).unwrap());
    let mut set = ProposalSet::empty(n);
    set.push(BitMask::from_indices(n, 0..50), 1.0, ProposalSource::Guided2d);
    set.push(BitMask::from_indices(n, 50..100), 1.0, ProposalSource::Guided2d);
    set.push(BitMask::from_indices(n, 10..40), 1.0, ProposalSource::External3d);
    let prompts = vec![
        QueryEmbedding { prompt: "a".into(), class_id: 4, embedding: e_a.clone() },
        QueryEmbedding { prompt: "b".into(), class_id: 9, embedding: e_b.clone() },
    ];
    let labels = classify(&set, &feats, &prompts).unwrap();
    let ids: Vec<Option<u32>> = labels.iter().map(|c| c.class_id).collect();
    assert_eq!(ids, vec![Some(4), Some(9), Some(4)]);

    let rowsf: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let e: Vec<f64> = e_a.iter().map(|&v| v as f64).collect();
    let s = query_score(&feats, &set.masks[0], &prompts[0]).unwrap();
    assert!((s - common::naive_query(&rowsf, &set.masks[0].to_bools(), &e)).abs() < 1e-9);
}

#[test]
fn unfeatured_proposals_stay_unlabeled() {
    let n = 6;
    let feats = PointwiseClipFeatures(Matrix::zeros(n, 2));
    let mut set = ProposalSet::empty(n);
    set.push(BitMask::from_indices(n, [0, 1]), 1.0, ProposalSource::Guided2d);
    let prompts = vec![QueryEmbedding { prompt: "x".into(), class_id: 0, embedding: vec![1.0, 0.0] }];
    let labels = classify(&set, &feats, &prompts).unwrap();
    assert_eq!(labels[0].label, None);
    assert_eq!(labels[0].confidence, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn query_score_is_a_bounded_mean(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let c = common::random_pooling_case(&mut r);
        let (set, views, vis) = c.library_inputs();
        let f = accumulate_pointwise(&set, &views, &vis, c.lambda).unwrap();
        let e = unit((0..c.dim).map(|_| r.random_range(-1.0f32..1.0)).collect());
        let q = QueryEmbedding { prompt: "q".into(), class_id: 0, embedding: e.clone() };
        let rows: Vec<Vec<f64>> = (0..f.num_points()).map(|p| f.row(p).iter().map(|&v| v as f64).collect()).collect();
        let e64: Vec<f64> = e.iter().map(|&v| v as f64).collect();
        for m in &set.masks {
            if m.none() {
                continue;
            }
            let s = query_score(&f, m, &q).unwrap();
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&s));
            prop_assert!((s - common::naive_query(&rows, &m.to_bools(), &e64)).abs() < 1e-9);
        }
    }

    #[test]
    fn more_aligned_points_raise_the_score(k in 1usize..20, extra in 1usize..20) {
        // A mask of aligned and orthogonal points scores higher with more aligned ones.
        let n = 40;
        let rows: Vec<Vec<f32>> = (0..n).map(|i| if i < 20 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
        let f = PointwiseClipFeatures(Matrix::from_rows(&rows).unwrap());
        let q = QueryEmbedding { prompt: "q".into(), class_id: 0, embedding: vec![1.0, 0.0] };
        let base = BitMask::from_indices(n, (0..k).chain(20..20 + extra));
        let more = BitMask::from_indices(n, (0..(k + 1).min(20)).chain(20..20 + extra));
        let a = query_score(&f, &base, &q).unwrap();
        let b = query_score(&f, &more, &q).unwrap();
        prop_assert!(b >= a);
    }
}

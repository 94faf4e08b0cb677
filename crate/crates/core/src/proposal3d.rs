//! External class-agnostic 3D proposals: superpoint snapping, quality
//! filters, and duplicate suppression when fusing with lifted proposals.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scene::{iou, BitMask, ProposalSet, ProposalSource};
use crate::superpoints::SuperpointPartition;

/// Union of the superpoints whose inclusion ratio in `mask` is at least
/// `fraction`. The result may be empty.
pub fn snap_to_superpoints(mask: &BitMask, partition: &SuperpointPartition, fraction: f64) -> BitMask {
    let mut inside = vec![0usize; partition.num_superpoints()];
    for i in mask.ones() {
        inside[partition.labels[i] as usize] += 1;
    }
    let keep: Vec<bool> = inside
        .iter()
        .zip(&partition.sizes)
        .map(|(&m, &s)| m as f64 >= fraction * s as f64)
        .collect();
    BitMask::from_indices(
        partition.num_points(),
        partition
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| keep[l as usize] && inside[l as usize] > 0)
            .map(|(i, _)| i),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExternalFilter {
    pub score_min: f64,
    pub min_points: usize,
    /// Superpoint inclusion ratio for snapping; `None` skips snapping.
    pub snap_fraction: Option<f64>,
}

impl Default for ExternalFilter {
    fn default() -> Self {
        ExternalFilter {
            score_min: 0.2,
            min_points: 50,
            snap_fraction: Some(0.5),
        }
    }
}

/// Snaps (when a partition is given), then keeps proposals with
/// `score >= score_min` and at least `min_points` points.
pub fn filter_external(
    proposals: &ProposalSet,
    partition: Option<&SuperpointPartition>,
    filter: &ExternalFilter,
) -> Result<ProposalSet> {
    if let Some(f) = filter.snap_fraction {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidArgument(format!("snap fraction must be in (0,1], got {f}")));
        }
    }
    if let Some(p) = partition {
        if p.num_points() != proposals.num_points {
            return Err(Error::DimensionMismatch {
                context: "external proposals vs superpoints",
                expected: p.num_points(),
                found: proposals.num_points,
            });
        }
    }
    let mut out = ProposalSet::empty(proposals.num_points);
    for k in 0..proposals.len() {
        let score = proposals.scores[k];
        if score < filter.score_min {
            continue;
        }
        let mask = match (partition, filter.snap_fraction) {
            (Some(p), Some(f)) => snap_to_superpoints(&proposals.masks[k], p, f),
            _ => proposals.masks[k].clone(),
        };
        if mask.count() < filter.min_points || mask.none() {
            continue;
        }
        out.push(mask, score, proposals.sources[k]);
    }
    Ok(out)
}

/// Appends `m2` to `m1` and greedily keeps proposals in priority order
/// (score desc, size desc, lifted before external, index), suppressing any
/// candidate whose IoU with a kept mask exceeds `tau_dup`.
pub fn combine_nms(m1: &ProposalSet, m2: &ProposalSet, tau_dup: f64) -> Result<ProposalSet> {
    if m1.num_points != m2.num_points {
        return Err(Error::DimensionMismatch {
            context: "proposal sets",
            expected: m1.num_points,
            found: m2.num_points,
        });
    }
    struct Cand<'a> {
        mask: &'a BitMask,
        score: f64,
        size: usize,
        set: u8,
        index: usize,
        source: ProposalSource,
    }
    let mut cands: Vec<Cand> = [(m1, 0u8), (m2, 1u8)]
        .iter()
        .flat_map(|&(set, tag)| {
            (0..set.len()).map(move |k| Cand {
                mask: &set.masks[k],
                score: set.scores[k],
                size: set.masks[k].count(),
                set: tag,
                index: k,
                source: set.sources[k],
            })
        })
        .collect();
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.size.cmp(&a.size))
            .then(a.set.cmp(&b.set))
            .then(a.index.cmp(&b.index))
    });

    let mut kept: Vec<&Cand> = Vec::new();
    for c in &cands {
        let duplicate = kept
            .par_iter()
            .any(|k| iou(k.mask, c.mask).unwrap_or(0.0).partial_cmp(&tau_dup) == Some(Ordering::Greater));
        if !duplicate {
            kept.push(c);
        }
    }
    let mut out = ProposalSet::empty(m1.num_points);
    for c in kept {
        out.push(c.mask.clone(), c.score, c.source);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(masks: Vec<BitMask>, scores: Vec<f64>, source: ProposalSource) -> ProposalSet {
        let n = masks[0].len();
        let mut s = ProposalSet::empty(n);
        for (m, sc) in masks.into_iter().zip(scores) {
            s.push(m, sc, source);
        }
        s
    }

    #[test]
    fn snap_examples() {
        let p = SuperpointPartition::from_raw_labels(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        let exact = BitMask::from_indices(10, 0..5);
        assert_eq!(snap_to_superpoints(&exact, &p, 0.5), exact);
        let partial = BitMask::from_indices(10, [5, 6]);
        assert!(snap_to_superpoints(&partial, &p, 0.5).none());
        let mixed = BitMask::from_indices(10, [0, 1, 2, 5]);
        assert_eq!(snap_to_superpoints(&mixed, &p, 0.5), exact);
    }

    #[test]
    fn filter_thresholds() {
        let n = 600;
        let big = BitMask::from_indices(n, 0..500);
        let small = BitMask::from_indices(n, 500..549);
        let s = set(vec![big.clone(), big.clone(), small], vec![0.19, 0.9, 0.9], ProposalSource::External3d);
        let out = filter_external(&s, None, &ExternalFilter::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.scores, vec![0.9]);
        assert_eq!(out.masks[0], big);
    }

    #[test]
    fn nms_examples() {
        let a = BitMask::from_indices(20, 0..10);
        let m1 = set(vec![a.clone(), a.clone()], vec![1.0, 1.0], ProposalSource::Guided2d);
        assert_eq!(combine_nms(&m1, &ProposalSet::empty(20), 0.5).unwrap().len(), 1);

        let b = BitMask::from_indices(20, 10..20);
        let m1 = set(vec![a.clone(), b], vec![1.0, 1.0], ProposalSource::Guided2d);
        assert_eq!(combine_nms(&m1, &ProposalSet::empty(20), 0.5).unwrap().len(), 2);
    }

    #[test]
    fn nested_and_disjoint() {
        let a = BitMask::from_indices(30, 0..10);
        let b = BitMask::from_indices(30, 0..6);
        let c = BitMask::from_indices(30, 20..25);
        let m1 = set(vec![a.clone()], vec![1.0], ProposalSource::Guided2d);
        let m2 = set(vec![b, c.clone()], vec![1.0, 1.0], ProposalSource::External3d);
        let out = combine_nms(&m1, &m2, 0.5).unwrap();
        assert_eq!(out.masks, vec![a, c]);
        assert_eq!(out.sources, vec![ProposalSource::Guided2d, ProposalSource::External3d]);
    }

    #[test]
    fn size_mismatch() {
        assert!(combine_nms(&ProposalSet::empty(3), &ProposalSet::empty(4), 0.5).is_err());
    }
}

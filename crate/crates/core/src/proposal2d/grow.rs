//! Per-frame region growing from one 2D mask over the superpoint graph.

use super::region::{cosine, MergeThresholds, Region3D, SuperpointTable};

/// Grows a region for one mask.
///
/// Candidates are superpoints with overlap `o > tau_iou`. The region starts
/// at the best-overlapping candidate and absorbs every candidate that is
/// adjacent to some member and whose best cosine against the members exceeds
/// `tau_sim`, until a fixed point. Both conditions only become easier as the
/// region grows, so the closure does not depend on visiting order.
pub fn grow_region(
    overlaps: &[f64],
    adjacency: &[Vec<u32>],
    table: &SuperpointTable<'_>,
    th: &MergeThresholds,
    frame_id: u32,
) -> Option<Region3D> {
    let candidates: Vec<u32> = (0..overlaps.len() as u32)
        .filter(|&u| overlaps[u as usize] > th.tau_iou)
        .collect();
    let mut seed = *candidates.first()?;
    for &u in &candidates {
        if overlaps[u as usize] > overlaps[seed as usize] {
            seed = u;
        }
    }

    let slot: std::collections::HashMap<u32, usize> = candidates.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let c = candidates.len();
    let mut member = vec![false; c];
    let mut touches = vec![false; c];
    let mut best_cos = vec![f64::NEG_INFINITY; c];
    let mut members = Vec::new();

    let mut pending = vec![slot[&seed]];
    while !pending.is_empty() {
        for &s in &pending {
            member[s] = true;
            members.push(candidates[s]);
        }
        for &s in &pending {
            let v = candidates[s];
            for &w in &adjacency[v as usize] {
                if let Some(&t) = slot.get(&w) {
                    touches[t] = true;
                }
            }
            let fv = table.feature(v);
            for t in 0..c {
                if !member[t] {
                    let cs = cosine(fv, table.feature(candidates[t]));
                    if cs > best_cos[t] {
                        best_cos[t] = cs;
                    }
                }
            }
        }
        pending = (0..c)
            .filter(|&t| !member[t] && touches[t] && best_cos[t] > th.tau_sim)
            .collect();
    }
    Some(Region3D::new(members, vec![frame_id], table))
}

/// One growth attempt per mask of a frame, masks without candidates dropped.
pub fn per_frame_regions(
    mask_overlaps: &[Vec<f64>],
    adjacency: &[Vec<u32>],
    table: &SuperpointTable<'_>,
    th: &MergeThresholds,
    frame_id: u32,
) -> Vec<Region3D> {
    mask_overlaps
        .iter()
        .filter_map(|o| grow_region(o, adjacency, table, th, frame_id))
        .collect()
}

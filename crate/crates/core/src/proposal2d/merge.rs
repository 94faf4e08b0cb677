//! Agglomerative merging of an active region set under the binary
//! compatibility gate.

use super::region::{compatible, region_overlap, region_similarity, MergeThresholds, Region3D, SuperpointTable};

/// Repeatedly merges the compatible pair with the highest similarity (then
/// higher overlap, then lowest index pair) until no compatible pair remains.
/// The union takes the lower index; the higher index is removed, so output
/// order is deterministic.
pub fn agglomerative_merge(mut regions: Vec<Region3D>, table: &SuperpointTable<'_>, th: &MergeThresholds) -> Vec<Region3D> {
    let n = regions.len();
    if n < 2 {
        return regions;
    }
    // Upper-triangle caches of (overlap, similarity), indexed by live position.
    let mut ov = vec![vec![0.0f64; n]; n];
    let mut sim = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            ov[i][j] = region_overlap(&regions[i], &regions[j], table.sizes);
            sim[i][j] = region_similarity(&regions[i], &regions[j]);
        }
    }

    loop {
        let m = regions.len();
        let mut best: Option<(usize, usize)> = None;
        for i in 0..m {
            for j in i + 1..m {
                if !compatible(ov[i][j], sim[i][j], th) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj)) => {
                        sim[i][j] > sim[bi][bj] || (sim[i][j] == sim[bi][bj] && ov[i][j] > ov[bi][bj])
                    }
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        let Some((i, j)) = best else { break };

        let merged = regions[i].union(&regions[j], table);
        regions[i] = merged;
        regions.remove(j);
        for row in ov.iter_mut().chain(sim.iter_mut()) {
            row.remove(j);
        }
        ov.remove(j);
        sim.remove(j);

        for k in 0..regions.len() {
            if k == i {
                continue;
            }
            let (a, b) = if k < i { (k, i) } else { (i, k) };
            ov[a][b] = region_overlap(&regions[a], &regions[b], table.sizes);
            sim[a][b] = region_similarity(&regions[a], &regions[b]);
        }
    }
    regions
}

//! 2D-guided 3D proposals: per-frame region growing from 2D masks over
//! superpoints, then cross-frame agglomerative merging.

mod grow;
mod merge;
mod region;
mod traverse;

pub use grow::{grow_region, per_frame_regions};
pub use merge::agglomerative_merge;
pub use region::{
    compatibility_matrix, cosine, region_overlap, region_similarity, CompatibilityMatrix, MergeThresholds, Region3D,
    SuperpointTable,
};
pub use traverse::{hierarchical_traverse, MergeOrder, MergeStep, TraverseOutcome};

use crate::scene::{ProposalSet, ProposalSource};
use crate::superpoints::SuperpointPartition;

/// Expands regions to point masks, dropping those under `min_points`.
pub fn regions_to_proposals(regions: &[Region3D], partition: &SuperpointPartition, min_points: usize) -> ProposalSet {
    let mut set = ProposalSet::empty(partition.num_points());
    for r in regions {
        if r.point_count < min_points || r.point_count == 0 {
            continue;
        }
        set.push(partition.expand(&r.superpoints), 1.0, ProposalSource::Guided2d);
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superpoints::SuperpointFeatures;

    #[test]
    fn min_points_filter() {
        let mut raw = vec![0u32; 60];
        raw.extend(vec![1u32; 40]);
        let p = SuperpointPartition::from_raw_labels(&raw);
        let f = SuperpointFeatures {
            dim: 1,
            data: vec![1.0, 1.0],
        };
        let t = SuperpointTable::new(&p.sizes, &f);
        let regions = vec![Region3D::new(vec![0], vec![0], &t), Region3D::new(vec![1], vec![0], &t)];
        let set = regions_to_proposals(&regions, &p, 50);
        assert_eq!(set.len(), 1);
        assert_eq!(set.masks[0].count(), 60);
        assert_eq!(set.scores, vec![1.0]);
        assert_eq!(set.sources, vec![ProposalSource::Guided2d]);
    }
}

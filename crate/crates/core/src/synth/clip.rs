//! Stand-in for the CLIP image adapter on synthetic scenes: each view feature
//! is the normalized sum of the per-point semantic vectors the view sees.

use crate::error::{Error, Result};
use crate::features::{top_views, ViewIndexEntry, ViewIndexFile};
use crate::projection::VisibilityMap;
use crate::scene::{Matrix, ProposalSet};

/// Per-point semantic vectors written by the generator, relative to the scene root.
pub const SEMANTICS_FILE: &str = "synth/point_semantics.o3df";

pub fn synthesize_view_features(
    semantics: &Matrix,
    proposals: &ProposalSet,
    visibilities: &[VisibilityMap],
    lambda: usize,
) -> Result<(Matrix, ViewIndexFile)> {
    if semantics.rows() != proposals.num_points {
        return Err(Error::DimensionMismatch {
            context: "point semantics rows",
            expected: proposals.num_points,
            found: semantics.rows(),
        });
    }
    let dim = semantics.cols();
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (k, mask) in proposals.masks.iter().enumerate() {
        for f in top_views(mask, visibilities, lambda) {
            let vis = &visibilities.iter().find(|v| v.frame_id == f).expect("frame from top_views").visible;
            let mut acc = vec![0.0f64; dim];
            for p in mask.ones().filter(|&p| vis.get(p)) {
                for (a, &s) in acc.iter_mut().zip(semantics.row(p)) {
                    *a += s as f64;
                }
            }
            let norm = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            entries.push(ViewIndexEntry {
                proposal_id: k,
                frame_id: f,
                row: rows.len(),
            });
            rows.push(acc.iter().map(|a| (a / norm) as f32).collect::<Vec<_>>());
        }
    }
    let matrix = if rows.is_empty() {
        Matrix::zeros(0, dim)
    } else {
        Matrix::from_rows(&rows)?
    };
    Ok((matrix, ViewIndexFile { entries }))
}

//! Cross-frame merge orders: balanced binary-tree recursion over the frame
//! sequence, or a left fold for comparison.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::merge::agglomerative_merge;
use super::region::{MergeThresholds, Region3D, SuperpointTable};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MergeOrder {
    #[default]
    Hierarchical,
    Sequential,
}

impl fmt::Display for MergeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergeOrder::Hierarchical => "hierarchical",
            MergeOrder::Sequential => "sequential",
        })
    }
}

impl FromStr for MergeOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(MergeOrder::Hierarchical),
            "sequential" => Ok(MergeOrder::Sequential),
            other => Err(Error::InvalidArgument(format!(
                "merge order must be hierarchical or sequential, got {other:?}"
            ))),
        }
    }
}

/// One agglomerative call and the frame-set spans (inclusive, 0-based) it joined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MergeStep {
    pub left: (usize, usize),
    pub right: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraverseOutcome {
    pub regions: Vec<Region3D>,
    /// Merge calls in completion order.
    pub steps: Vec<MergeStep>,
}

pub fn hierarchical_traverse(
    per_frame: Vec<Vec<Region3D>>,
    table: &SuperpointTable<'_>,
    th: &MergeThresholds,
    order: MergeOrder,
) -> TraverseOutcome {
    if per_frame.is_empty() {
        return TraverseOutcome {
            regions: Vec::new(),
            steps: Vec::new(),
        };
    }
    match order {
        MergeOrder::Hierarchical => {
            let mut slots: Vec<Option<Vec<Region3D>>> = per_frame.into_iter().map(Some).collect();
            let last = slots.len() - 1;
            recurse(&mut slots, 0, last, table, th)
        }
        MergeOrder::Sequential => {
            let mut sets = per_frame.into_iter();
            let mut acc = sets.next().unwrap();
            let mut steps = Vec::new();
            for (t, next) in sets.enumerate() {
                acc.extend(next);
                acc = agglomerative_merge(acc, table, th);
                steps.push(MergeStep {
                    left: (0, t),
                    right: (t + 1, t + 1),
                });
            }
            TraverseOutcome { regions: acc, steps }
        }
    }
}

fn recurse(
    slots: &mut [Option<Vec<Region3D>>],
    start: usize,
    end: usize,
    table: &SuperpointTable<'_>,
    th: &MergeThresholds,
) -> TraverseOutcome {
    if start == end {
        return TraverseOutcome {
            regions: slots[0].take().expect("each leaf is visited once"),
            steps: Vec::new(),
        };
    }
    let mid = (start + end) / 2;
    let (left_slots, right_slots) = slots.split_at_mut(mid - start + 1);
    let (left, right) = rayon::join(
        || recurse(left_slots, start, mid, table, th),
        || recurse(right_slots, mid + 1, end, table, th),
    );
    let mut regions = left.regions;
    regions.extend(right.regions);
    let mut steps = left.steps;
    steps.extend(right.steps);
    steps.push(MergeStep {
        left: (start, mid),
        right: (mid + 1, end),
    });
    TraverseOutcome {
        regions: agglomerative_merge(regions, table, th),
        steps,
    }
}

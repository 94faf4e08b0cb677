//! Instance-segmentation metrics: AP at fixed IoU thresholds, mAP over
//! 0.50:0.95, recall, class-agnostic AP/AR and per-group breakdowns.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::rle::{decode_mask, encode_mask};
use crate::scene::{iou, read_json, write_json, BitMask};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn map_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthInstance {
    pub mask: BitMask,
    pub class_id: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub mask: BitMask,
    /// `None` for unlabeled proposals, which only enter class-agnostic metrics.
    pub class_id: Option<u32>,
    pub score: f64,
}

pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "mask IoU",
            expected: a.len(),
            found: b.len(),
        });
    }
    iou(a, b).ok_or_else(|| Error::InvalidArgument("IoU of two empty masks is undefined".into()))
}

/// Prediction order: score desc, larger mask first, then index.
fn ranked(preds: &[Prediction], members: &[usize]) -> Vec<usize> {
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .total_cmp(&preds[a].score)
            .then(preds[b].mask.count().cmp(&preds[a].mask.count()))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy matching in rank order; each prediction takes the unmatched GT
/// with the highest IoU at or above the threshold (lowest GT index on ties).
/// Returns the TP flag per ranked prediction and the matched GT count.
fn greedy_match(ranked_preds: &[usize], gts: &[usize], ious: &[Vec<f64>], threshold: f64) -> (Vec<bool>, usize) {
    let mut taken = vec![false; gts.len()];
    let mut flags = Vec::with_capacity(ranked_preds.len());
    let mut matched = 0;
    for &p in ranked_preds {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &g) in gts.iter().enumerate() {
            let v = ious[p][g];
            if taken[slot] || v < threshold {
                continue;
            }
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((slot, v));
            }
        }
        match best {
            Some((slot, _)) => {
                taken[slot] = true;
                matched += 1;
                flags.push(true);
            }
            None => flags.push(false),
        }
    }
    (flags, matched)
}

/// Area under the monotone precision envelope.
fn ap_from_flags(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (i, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for i in 0..flags.len() {
        if flags[i] {
            ap += (recall[i] - prev) * precision[i];
            prev = recall[i];
        }
    }
    ap
}

fn iou_table(preds: &[Prediction], gts: &[GroundTruthInstance]) -> Vec<Vec<f64>> {
    preds
        .par_iter()
        .map(|p| gts.iter().map(|g| iou(&p.mask, &g.mask).unwrap_or(0.0)).collect())
        .collect()
}

/// AP of `preds` against `gts` at one IoU threshold. Labeled predictions only
/// match GT of the same class; unlabeled predictions match any GT.
pub fn average_precision(preds: &[Prediction], gts: &[GroundTruthInstance], threshold: f64) -> f64 {
    let ious = iou_table(preds, gts);
    let classes: BTreeSet<u32> = gts.iter().map(|g| g.class_id).collect();
    if preds.iter().all(|p| p.class_id.is_none()) {
        let order = ranked(preds, &(0..preds.len()).collect::<Vec<_>>());
        let (flags, _) = greedy_match(&order, &(0..gts.len()).collect::<Vec<_>>(), &ious, threshold);
        return ap_from_flags(&flags, gts.len());
    }
    let mut flags_all: Vec<(usize, bool)> = Vec::new();
    for c in classes {
        let members: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class_id == Some(c)).collect();
        let gt_c: Vec<usize> = (0..gts.len()).filter(|&g| gts[g].class_id == c).collect();
        let order = ranked(preds, &members);
        let (flags, _) = greedy_match(&order, &gt_c, &ious, threshold);
        flags_all.extend(order.into_iter().zip(flags));
    }
    // Re-rank the per-class decisions into one list; predictions of classes
    // absent from GT are false positives.
    let decided: BTreeMap<usize, bool> = flags_all.into_iter().collect();
    let order = ranked(preds, &(0..preds.len()).collect::<Vec<_>>());
    let flags: Vec<bool> = order.iter().map(|i| decided.get(i).copied().unwrap_or(false)).collect();
    ap_from_flags(&flags, gts.len())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ApTriple {
    /// Mean over IoU 0.50:0.95:0.05.
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub recall50: f64,
    pub num_classes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgnosticMetrics {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    /// Mean recall over IoU 0.50:0.95:0.05.
    pub ar: f64,
    pub recall50: f64,
    pub recall25: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub recall50: f64,
    pub num_gt: usize,
    pub num_predictions: usize,
    pub per_class: BTreeMap<u32, ApTriple>,
    pub groups: BTreeMap<String, GroupMetrics>,
    pub class_agnostic: AgnosticMetrics,
}

/// Named class-id groups (e.g. head/common/tail).
pub type ClassGroups = BTreeMap<String, Vec<u32>>;

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

struct ClassEval {
    ap_at: Vec<f64>,
    ap25: f64,
    matched50: usize,
    num_gt: usize,
}

pub fn benchmark_suite(
    preds: &[Prediction],
    gts: &[GroundTruthInstance],
    groups: Option<&ClassGroups>,
) -> Result<MetricsReport> {
    let gt_classes: BTreeSet<u32> = gts.iter().map(|g| g.class_id).collect();
    if let Some(groups) = groups {
        let mut owner: BTreeMap<u32, &str> = BTreeMap::new();
        for (name, ids) in groups {
            for &id in ids {
                if let Some(prev) = owner.insert(id, name) {
                    return Err(Error::validation(
                        "ClassGroups",
                        "groups",
                        format!("class {id} belongs to both {prev} and {name}"),
                    ));
                }
            }
        }
        if let Some(missing) = gt_classes.iter().find(|c| !owner.contains_key(c)) {
            return Err(Error::validation(
                "ClassGroups",
                "groups",
                format!("ground-truth class {missing} is not in any group"),
            ));
        }
    }

    let ious = iou_table(preds, gts);
    let thresholds = map_thresholds();

    let per_class_eval: BTreeMap<u32, ClassEval> = gt_classes
        .par_iter()
        .map(|&c| {
            let members: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class_id == Some(c)).collect();
            let gt_c: Vec<usize> = (0..gts.len()).filter(|&g| gts[g].class_id == c).collect();
            let order = ranked(preds, &members);
            let ap_at: Vec<f64> = thresholds
                .iter()
                .map(|&t| ap_from_flags(&greedy_match(&order, &gt_c, &ious, t).0, gt_c.len()))
                .collect();
            let ap25 = ap_from_flags(&greedy_match(&order, &gt_c, &ious, 0.25).0, gt_c.len());
            let matched50 = greedy_match(&order, &gt_c, &ious, 0.5).1;
            (
                c,
                ClassEval {
                    ap_at,
                    ap25,
                    matched50,
                    num_gt: gt_c.len(),
                },
            )
        })
        .collect();

    let per_class: BTreeMap<u32, ApTriple> = per_class_eval
        .iter()
        .map(|(&c, e)| {
            (
                c,
                ApTriple {
                    ap: mean(e.ap_at.iter().copied()),
                    ap50: e.ap_at[0],
                    ap25: e.ap25,
                },
            )
        })
        .collect();

    let recall_of = |classes: &[u32]| {
        let (m, n) = classes
            .iter()
            .filter_map(|c| per_class_eval.get(c))
            .fold((0usize, 0usize), |(m, n), e| (m + e.matched50, n + e.num_gt));
        if n == 0 {
            0.0
        } else {
            m as f64 / n as f64
        }
    };

    let mut group_metrics = BTreeMap::new();
    if let Some(groups) = groups {
        for (name, ids) in groups {
            let present: Vec<u32> = ids.iter().copied().filter(|c| per_class.contains_key(c)).collect();
            if present.is_empty() {
                continue;
            }
            group_metrics.insert(
                name.clone(),
                GroupMetrics {
                    ap: mean(present.iter().map(|c| per_class[c].ap)),
                    ap50: mean(present.iter().map(|c| per_class[c].ap50)),
                    ap25: mean(present.iter().map(|c| per_class[c].ap25)),
                    recall50: recall_of(&present),
                    num_classes: present.len(),
                },
            );
        }
    }

    // Class-agnostic: every prediction against every GT.
    let all_preds: Vec<usize> = (0..preds.len()).collect();
    let all_gts: Vec<usize> = (0..gts.len()).collect();
    let order = ranked(preds, &all_preds);
    let agn_at: Vec<(f64, usize)> = thresholds
        .iter()
        .chain(std::iter::once(&0.25))
        .map(|&t| {
            let (flags, matched) = greedy_match(&order, &all_gts, &ious, t);
            (ap_from_flags(&flags, gts.len()), matched)
        })
        .collect();
    let recall = |m: usize| if gts.is_empty() { 0.0 } else { m as f64 / gts.len() as f64 };
    let class_agnostic = AgnosticMetrics {
        ap: mean(agn_at[..10].iter().map(|x| x.0)),
        ap50: agn_at[0].0,
        ap25: agn_at[10].0,
        ar: mean(agn_at[..10].iter().map(|x| recall(x.1))),
        recall50: recall(agn_at[0].1),
        recall25: recall(agn_at[10].1),
    };

    let classes: Vec<u32> = gt_classes.iter().copied().collect();
    Ok(MetricsReport {
        ap: mean(per_class.values().map(|t| t.ap)),
        ap50: mean(per_class.values().map(|t| t.ap50)),
        ap25: mean(per_class.values().map(|t| t.ap25)),
        recall50: recall_of(&classes),
        num_gt: gts.len(),
        num_predictions: preds.len(),
        per_class,
        groups: group_metrics,
        class_agnostic,
    })
}

/// GT instances whose best-overlapping prediction reaches `threshold`, and
/// how many of those carry the GT class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelAccuracy {
    pub num_gt: usize,
    pub matched: usize,
    pub correct: usize,
}

impl LabelAccuracy {
    /// `correct / matched`, or `None` when nothing matched.
    pub fn accuracy(&self) -> Option<f64> {
        (self.matched > 0).then(|| self.correct as f64 / self.matched as f64)
    }
}

pub fn label_accuracy(preds: &[Prediction], gts: &[GroundTruthInstance], threshold: f64) -> LabelAccuracy {
    let ious = iou_table(preds, gts);
    let mut acc = LabelAccuracy {
        num_gt: gts.len(),
        ..Default::default()
    };
    for (g, gt) in gts.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (p, row) in ious.iter().enumerate() {
            if best.is_none_or(|(_, b)| row[g] > b) {
                best = Some((p, row[g]));
            }
        }
        if let Some((p, _)) = best.filter(|&(_, iou)| iou >= threshold) {
            acc.matched += 1;
            if preds[p].class_id == Some(gt.class_id) {
                acc.correct += 1;
            }
        }
    }
    acc
}

/// Mean over masks of the share of points carrying the mask's most common
/// label (`None` counts as its own label). Empty masks are skipped.
pub fn region_purity(masks: &[BitMask], labels: &[Option<u32>]) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for m in masks {
        let mut hist: BTreeMap<Option<u32>, usize> = BTreeMap::new();
        for p in m.ones() {
            *hist.entry(labels[p]).or_default() += 1;
        }
        let size: usize = hist.values().sum();
        if let Some(&top) = hist.values().max() {
            total += top as f64 / size as f64;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub rle: Vec<u32>,
    pub class_id: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtFile {
    pub num_points: usize,
    pub instances: Vec<GtRecord>,
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthInstance>> {
    let file: GtFile = read_json(path)?;
    file.instances
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let mask = decode_mask(&r.rle, file.num_points)
                .map_err(|e| Error::validation("GroundTruthInstance", "mask", format!("instance {i}: {e}")))?;
            if mask.none() {
                return Err(Error::validation("GroundTruthInstance", "mask", format!("instance {i} is empty")));
            }
            Ok(GroundTruthInstance {
                mask,
                class_id: r.class_id,
            })
        })
        .collect()
}

pub fn save_ground_truth(path: impl AsRef<Path>, gts: &[GroundTruthInstance], num_points: usize) -> Result<()> {
    let file = GtFile {
        num_points,
        instances: gts
            .iter()
            .map(|g| {
                Ok(GtRecord {
                    rle: encode_mask(&g.mask)?,
                    class_id: g.class_id,
                })
            })
            .collect::<Result<_>>()?,
    };
    write_json(path, &file)
}

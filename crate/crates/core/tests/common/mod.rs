//! Naive reference implementations and random instance generators shared by
//! the integration tests and the acceptance harness. Each oracle favors the
//! most literal reading over speed and shares no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Exhaustive k nearest neighbors, ties by index.
pub fn brute_knn(points: &[[f64; 3]], k: usize) -> Vec<Vec<u32>> {
    (0..points.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (dist2(&points[i], &points[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j as u32).collect()
        })
        .collect()
}

/// Renumbers labels by order of first appearance.
pub fn canonical(labels: &[u32]) -> Vec<u32> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Graph segmentation with relabel-by-scan merging.
pub fn naive_felzenszwalb(n: usize, edges: &[(u32, u32, f64)], k: f64, min_size: usize) -> Vec<u32> {
    let mut label: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut internal = vec![0.0f64; n];
    let mut sorted: Vec<(u32, u32, f64)> = edges.iter().map(|&(a, b, w)| (a.min(b), a.max(b), w)).collect();
    sorted.sort_by(|x, y| x.2.total_cmp(&y.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));

    let merge = |label: &mut Vec<usize>, size: &mut Vec<usize>, internal: &mut Vec<f64>, la: usize, lb: usize, w: f64| {
        for l in label.iter_mut() {
            if *l == lb {
                *l = la;
            }
        }
        size[la] += size[lb];
        internal[la] = internal[la].max(internal[lb]).max(w);
    };

    for &(a, b, w) in &sorted {
        let (la, lb) = (label[a as usize], label[b as usize]);
        if la == lb {
            continue;
        }
        let ta = internal[la] + k / size[la] as f64;
        let tb = internal[lb] + k / size[lb] as f64;
        if w <= ta.min(tb) {
            merge(&mut label, &mut size, &mut internal, la, lb, w);
        }
    }
    for &(a, b, w) in &sorted {
        let (la, lb) = (label[a as usize], label[b as usize]);
        if la != lb && (size[la] < min_size || size[lb] < min_size) {
            merge(&mut label, &mut size, &mut internal, la, lb, w);
        }
    }
    canonical(&label.iter().map(|&l| l as u32).collect::<Vec<_>>())
}

/// Random graph over `n` points: a spanning path plus extra random edges,
/// weights on a 0.05 grid so ties occur.
pub fn random_graph(r: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<(u32, u32, f64)> {
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    let mut add = |a: u32, b: u32, w: f64, edges: &mut Vec<(u32, u32, f64)>| {
        let key = (a.min(b), a.max(b));
        if a != b && seen.insert(key) {
            edges.push((key.0, key.1, w));
        }
    };
    for i in 1..n as u32 {
        let w = r.random_range(0..40) as f64 * 0.05;
        add(i - 1, i, w, &mut edges);
    }
    for _ in 0..extra {
        let a = r.random_range(0..n as u32);
        let b = r.random_range(0..n as u32);
        let w = r.random_range(0..40) as f64 * 0.05;
        add(a, b, w, &mut edges);
    }
    edges
}

pub fn naive_adjacency(labels: &[u32], edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let u = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut sets = vec![BTreeSet::new(); u];
    for &(a, b) in edges {
        let (la, lb) = (labels[a as usize], labels[b as usize]);
        if la != lb {
            sets[la as usize].insert(lb);
            sets[lb as usize].insert(la);
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

pub fn naive_mean_features(labels: &[u32], rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let u = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let d = rows.first().map_or(0, Vec::len);
    (0..u as u32)
        .map(|l| {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == l).collect();
            (0..d)
                .map(|j| members.iter().map(|&i| rows[i][j]).sum::<f64>() / members.len() as f64)
                .collect()
        })
        .collect()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Region growing by repeated full rescans, adding one superpoint at a time.
pub fn naive_grow(
    overlaps: &[f64],
    adjacency: &[Vec<u32>],
    features: &[Vec<f64>],
    tau_iou: f64,
    tau_sim: f64,
) -> Option<Vec<u32>> {
    let cands: Vec<u32> = (0..overlaps.len() as u32).filter(|&u| overlaps[u as usize] > tau_iou).collect();
    let best = cands.iter().map(|&u| overlaps[u as usize]).fold(f64::NEG_INFINITY, f64::max);
    let seed = *cands.iter().find(|&&u| overlaps[u as usize] == best)?;
    let mut region: BTreeSet<u32> = BTreeSet::from([seed]);
    loop {
        let mut added = false;
        for &u in &cands {
            if region.contains(&u) {
                continue;
            }
            let adjacent = region
                .iter()
                .any(|&v| adjacency[v as usize].contains(&u) || adjacency[u as usize].contains(&v));
            let max_cos = region
                .iter()
                .map(|&v| cos(&features[v as usize], &features[u as usize]))
                .fold(f64::NEG_INFINITY, f64::max);
            if adjacent && max_cos > tau_sim {
                region.insert(u);
                added = true;
            }
        }
        if !added {
            return Some(region.into_iter().collect());
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NaiveRegion {
    pub superpoints: BTreeSet<u32>,
    pub frames: BTreeSet<u32>,
}

pub fn naive_feature(r: &NaiveRegion, sizes: &[usize], features: &[Vec<f64>]) -> Vec<f64> {
    let d = features.first().map_or(0, Vec::len);
    let total: usize = r.superpoints.iter().map(|&u| sizes[u as usize]).sum();
    (0..d)
        .map(|j| {
            r.superpoints
                .iter()
                .map(|&u| sizes[u as usize] as f64 * features[u as usize][j])
                .sum::<f64>()
                / total as f64
        })
        .collect()
}

pub fn naive_overlap(a: &NaiveRegion, b: &NaiveRegion, sizes: &[usize]) -> f64 {
    let inter: usize = a.superpoints.intersection(&b.superpoints).map(|&u| sizes[u as usize]).sum();
    let union: usize = a.superpoints.union(&b.superpoints).map(|&u| sizes[u as usize]).sum();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Agglomerative merging that rebuilds every pairwise score each round.
pub fn naive_agglomerative(
    mut regions: Vec<NaiveRegion>,
    sizes: &[usize],
    features: &[Vec<f64>],
    tau_iou: f64,
    tau_sim: f64,
) -> Vec<NaiveRegion> {
    loop {
        let feats: Vec<Vec<f64>> = regions.iter().map(|r| naive_feature(r, sizes, features)).collect();
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                let o = naive_overlap(&regions[i], &regions[j], sizes);
                let s = cos(&feats[i], &feats[j]);
                if !(o > tau_iou && s > tau_sim) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bs, bo, _, _)) => s > bs || (s == bs && o > bo),
                };
                if better {
                    best = Some((s, o, i, j));
                }
            }
        }
        let Some((_, _, i, j)) = best else {
            return regions;
        };
        let b = regions.remove(j);
        let a = &mut regions[i];
        a.superpoints.extend(b.superpoints);
        a.frames.extend(b.frames);
    }
}

/// Random superpoint table with clustered features so that many pairs clear
/// high similarity thresholds.
pub fn random_table(r: &mut ChaCha8Rng, u: usize, dim: usize, clusters: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let sizes = (0..u).map(|_| r.random_range(1..60)).collect();
    let feats = (0..u)
        .map(|_| {
            let c = &centers[r.random_range(0..clusters)];
            c.iter().map(|v| v + r.random_range(-0.15..0.15)).collect()
        })
        .collect();
    (sizes, feats)
}

/// Regions drawn as perturbed copies of a few base superpoint groups.
pub fn random_regions(r: &mut ChaCha8Rng, u: usize, count: usize) -> Vec<NaiveRegion> {
    let bases: Vec<BTreeSet<u32>> = (0..3)
        .map(|_| {
            let len = r.random_range(1..=u.min(6));
            (0..len).map(|_| r.random_range(0..u as u32)).collect()
        })
        .collect();
    (0..count)
        .map(|i| {
            let mut s = bases[r.random_range(0..bases.len())].clone();
            if r.random_bool(0.4) {
                s.insert(r.random_range(0..u as u32));
            }
            if s.len() > 1 && r.random_bool(0.3) {
                let drop = *s.iter().nth(r.random_range(0..s.len())).unwrap();
                s.remove(&drop);
            }
            NaiveRegion {
                superpoints: s,
                frames: BTreeSet::from([i as u32 / 2]),
            }
        })
        .collect()
}

/// Frames ranked by visible mask points (descending, ties by frame id).
pub fn naive_top_views(mask: &[bool], vis: &[(u32, Vec<bool>)], lambda: usize) -> Vec<u32> {
    let mut counts: Vec<(usize, u32)> = vis
        .iter()
        .map(|(f, v)| ((0..mask.len()).filter(|&i| mask[i] && v[i]).count(), *f))
        .filter(|c| c.0 > 0)
        .collect();
    counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    counts.truncate(lambda);
    counts.into_iter().map(|c| c.1).collect()
}

/// Per-point double loop over proposals and their top views, then row normalization.
pub fn naive_pointwise(
    masks: &[Vec<bool>],
    views: &BTreeMap<(usize, u32), Vec<f32>>,
    vis: &[(u32, Vec<bool>)],
    lambda: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    let n = vis.first().map_or(0, |v| v.1.len());
    let tops: Vec<Vec<u32>> = masks.iter().map(|m| naive_top_views(m, vis, lambda)).collect();
    (0..n)
        .map(|p| {
            let mut acc = vec![0.0f64; dim];
            for (k, m) in masks.iter().enumerate() {
                if !m[p] {
                    continue;
                }
                for f in &tops[k] {
                    let visible = vis.iter().find(|v| v.0 == *f).unwrap().1[p];
                    if let (true, Some(feat)) = (visible, views.get(&(k, *f))) {
                        for j in 0..dim {
                            acc[j] += feat[j] as f64;
                        }
                    }
                }
            }
            let norm = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                acc.iter().map(|a| a / norm).collect()
            } else {
                acc
            }
        })
        .collect()
}

pub fn naive_query(rows: &[Vec<f64>], mask: &[bool], e: &[f64]) -> f64 {
    let pts: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    pts.iter().map(|&p| cos(&rows[p], e)).sum::<f64>() / pts.len() as f64
}

pub fn bool_iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Clone, Debug)]
pub struct NaivePred {
    pub mask: Vec<bool>,
    pub class_id: Option<u32>,
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct NaiveGt {
    pub mask: Vec<bool>,
    pub class_id: u32,
}

pub const MAP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// (TP flags in rank order, matched count) for the given predictions and GT.
fn naive_match(preds: &[&NaivePred], gts: &[&NaiveGt], threshold: f64) -> (Vec<bool>, usize) {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    let size = |p: &NaivePred| p.mask.iter().filter(|&&b| b).count();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap()
            .then(size(preds[b]).cmp(&size(preds[a])))
            .then(a.cmp(&b))
    });
    let mut used = vec![false; gts.len()];
    let mut flags = Vec::new();
    for &p in &order {
        let mut pick: Option<usize> = None;
        let mut pick_iou = -1.0;
        for g in 0..gts.len() {
            let v = bool_iou(&preds[p].mask, &gts[g].mask);
            if !used[g] && v >= threshold && v > pick_iou {
                pick = Some(g);
                pick_iou = v;
            }
        }
        if let Some(g) = pick {
            used[g] = true;
        }
        flags.push(pick.is_some());
    }
    let matched = used.iter().filter(|&&u| u).count();
    (flags, matched)
}

/// Area under the interpolated PR curve: sum over distinct recall levels of
/// the recall step times the best precision at or beyond that level.
pub fn naive_ap_flags(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut curve = Vec::new();
    let mut tp = 0;
    for (i, &f) in flags.iter().enumerate() {
        tp += f as usize;
        curve.push((tp as f64 / num_gt as f64, tp as f64 / (i + 1) as f64));
    }
    let mut levels: Vec<f64> = curve.iter().map(|c| c.0).collect();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut ap = 0.0;
    for w in levels.windows(2) {
        let p = curve
            .iter()
            .filter(|c| c.0 >= w[1])
            .map(|c| c.1)
            .fold(0.0, f64::max);
        ap += (w[1] - w[0]) * p;
    }
    ap
}

#[derive(Clone, Debug, Default)]
pub struct NaiveReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub recall50: f64,
    pub per_class: BTreeMap<u32, (f64, f64, f64)>,
    pub groups: BTreeMap<String, (f64, f64, f64, f64)>,
    pub agnostic: (f64, f64, f64, f64, f64, f64),
}

pub fn naive_benchmark(preds: &[NaivePred], gts: &[NaiveGt], groups: Option<&BTreeMap<String, Vec<u32>>>) -> NaiveReport {
    let classes: BTreeSet<u32> = gts.iter().map(|g| g.class_id).collect();
    let mut per_class = BTreeMap::new();
    let mut matched = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for &c in &classes {
        let ps: Vec<&NaivePred> = preds.iter().filter(|p| p.class_id == Some(c)).collect();
        let gs: Vec<&NaiveGt> = gts.iter().filter(|g| g.class_id == c).collect();
        let at = |t: f64| naive_ap_flags(&naive_match(&ps, &gs, t).0, gs.len());
        let ap = MAP_THRESHOLDS.iter().map(|&t| at(t)).sum::<f64>() / 10.0;
        per_class.insert(c, (ap, at(0.5), at(0.25)));
        matched.insert(c, naive_match(&ps, &gs, 0.5).1);
        counts.insert(c, gs.len());
    }
    let avg = |v: Vec<f64>| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let recall_of = |cs: &[u32]| {
        let m: usize = cs.iter().map(|c| matched[c]).sum();
        let n: usize = cs.iter().map(|c| counts[c]).sum();
        if n == 0 {
            0.0
        } else {
            m as f64 / n as f64
        }
    };
    let mut group_out = BTreeMap::new();
    if let Some(groups) = groups {
        for (name, ids) in groups {
            let present: Vec<u32> = ids.iter().copied().filter(|c| classes.contains(c)).collect();
            if present.is_empty() {
                continue;
            }
            group_out.insert(
                name.clone(),
                (
                    avg(present.iter().map(|c| per_class[c].0).collect()),
                    avg(present.iter().map(|c| per_class[c].1).collect()),
                    avg(present.iter().map(|c| per_class[c].2).collect()),
                    recall_of(&present),
                ),
            );
        }
    }
    let all_p: Vec<&NaivePred> = preds.iter().collect();
    let all_g: Vec<&NaiveGt> = gts.iter().collect();
    let rec = |m: usize| if gts.is_empty() { 0.0 } else { m as f64 / gts.len() as f64 };
    let agn = |t: f64| {
        let (f, m) = naive_match(&all_p, &all_g, t);
        (naive_ap_flags(&f, gts.len()), rec(m))
    };
    let agnostic = (
        MAP_THRESHOLDS.iter().map(|&t| agn(t).0).sum::<f64>() / 10.0,
        agn(0.5).0,
        agn(0.25).0,
        MAP_THRESHOLDS.iter().map(|&t| agn(t).1).sum::<f64>() / 10.0,
        agn(0.5).1,
        agn(0.25).1,
    );
    let cls: Vec<u32> = classes.iter().copied().collect();
    NaiveReport {
        ap: avg(per_class.values().map(|v| v.0).collect()),
        ap50: avg(per_class.values().map(|v| v.1).collect()),
        ap25: avg(per_class.values().map(|v| v.2).collect()),
        recall50: recall_of(&cls),
        per_class,
        groups: group_out,
        agnostic,
    }
}

/// Random GT instances and predictions; predictions are noisy copies of GT
/// masks, random blobs, and duplicates.
pub fn random_eval_set(r: &mut ChaCha8Rng, n: usize) -> (Vec<NaivePred>, Vec<NaiveGt>) {
    let num_classes = r.random_range(1..=5u32);
    let num_gt = r.random_range(1..=10);
    let gts: Vec<NaiveGt> = (0..num_gt)
        .map(|_| {
            let start = r.random_range(0..n - 10);
            let len = r.random_range(5..(n - start).min(40));
            let mut mask = vec![false; n];
            for m in mask.iter_mut().skip(start).take(len) {
                *m = true;
            }
            NaiveGt {
                mask,
                class_id: r.random_range(0..num_classes),
            }
        })
        .collect();
    let num_pred = r.random_range(0..=12);
    let preds = (0..num_pred)
        .map(|_| {
            let mask: Vec<bool> = if r.random_bool(0.7) {
                let g = &gts[r.random_range(0..gts.len())];
                g.mask.iter().map(|&b| if r.random_bool(0.15) { !b } else { b }).collect()
            } else {
                (0..n).map(|_| r.random_bool(0.1)).collect()
            };
            let mask = if mask.iter().any(|&b| b) {
                mask
            } else {
                let mut m = mask;
                m[0] = true;
                m
            };
            let class_id = if r.random_bool(0.1) { None } else { Some(r.random_range(0..num_classes)) };
            // Coarse scores so ties occur.
            let score = r.random_range(0..5) as f64 / 4.0;
            NaivePred { mask, class_id, score }
        })
        .collect();
    (preds, gts)
}

/// Naive o_{u,m}: per-point loop with an independent projection.
pub fn naive_overlap_ratios(
    positions: &[[f64; 3]],
    labels: &[u32],
    k: &[[f64; 3]; 3],
    e: &[[f64; 4]; 3],
    depth: &[f32],
    width: usize,
    height: usize,
    tau: f64,
    mask: &[bool],
) -> Vec<f64> {
    let u = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut vis = vec![0usize; u];
    let mut inside = vec![0usize; u];
    for (i, p) in positions.iter().enumerate() {
        let c: Vec<f64> = (0..3).map(|r| e[r][0] * p[0] + e[r][1] * p[1] + e[r][2] * p[2] + e[r][3]).collect();
        if c[2] <= 1e-6 {
            continue;
        }
        let x = (k[0][0] * c[0] + k[0][1] * c[1] + k[0][2] * c[2]) / c[2];
        let y = (k[1][0] * c[0] + k[1][1] * c[1] + k[1][2] * c[2]) / c[2];
        let (fx, fy) = (x.floor(), y.floor());
        if fx < 0.0 || fy < 0.0 || fx >= width as f64 || fy >= height as f64 {
            continue;
        }
        let px = fy as usize * width + fx as usize;
        let d = depth[px] as f64;
        if d <= 0.0 || (c[2] - d).abs() > tau {
            continue;
        }
        let l = labels[i] as usize;
        vis[l] += 1;
        if mask[px] {
            inside[l] += 1;
        }
    }
    (0..u)
        .map(|l| if vis[l] == 0 { 0.0 } else { inside[l] as f64 / vis[l] as f64 })
        .collect()
}

/// Random rotation (via a random unit quaternion) and translation as [R|t].
pub fn random_pose(r: &mut ChaCha8Rng) -> [[f64; 4]; 3] {
    let q: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let rot = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let mut e = [[0.0; 4]; 3];
    for i in 0..3 {
        e[i][..3].copy_from_slice(&rot[i]);
        e[i][3] = r.random_range(-2.0..2.0);
    }
    e
}

pub struct PoolingCase {
    pub masks: Vec<Vec<bool>>,
    pub views: BTreeMap<(usize, u32), Vec<f32>>,
    pub vis: Vec<(u32, Vec<bool>)>,
    pub lambda: usize,
    pub dim: usize,
}

/// Random proposals, per-frame visibility and per-(proposal, frame) view
/// features; a few view features are left out on purpose.
pub fn random_pooling_case(r: &mut ChaCha8Rng) -> PoolingCase {
    let n = r.random_range(20..=200);
    let k = r.random_range(1..8);
    let frames = r.random_range(1..9u32);
    let dim = r.random_range(1..=16);
    let masks: Vec<Vec<bool>> = (0..k)
        .map(|_| {
            let p = r.random_range(0.05..0.5);
            (0..n).map(|_| r.random_bool(p)).collect()
        })
        .collect();
    let vis: Vec<(u32, Vec<bool>)> = (0..frames)
        .map(|f| {
            let p = r.random_range(0.0..0.9);
            (f * 3 + 1, (0..n).map(|_| r.random_bool(p)).collect())
        })
        .collect();
    let mut views = BTreeMap::new();
    for kk in 0..k {
        for (f, _) in &vis {
            if r.random_bool(0.9) {
                let v: Vec<f32> = (0..dim).map(|_| r.random_range(-1.0f32..1.0)).collect();
                views.insert((kk, *f), v);
            }
        }
    }
    PoolingCase {
        masks,
        views,
        vis,
        lambda: r.random_range(1..6),
        dim,
    }
}

impl PoolingCase {
    pub fn library_inputs(
        &self,
    ) -> (
        masklift::scene::ProposalSet,
        masklift::features::ProposalViewFeatures,
        Vec<masklift::projection::VisibilityMap>,
    ) {
        use masklift::scene::{BitMask, ProposalSet, ProposalSource};
        let n = self.vis[0].1.len();
        let mut set = ProposalSet::empty(n);
        for m in &self.masks {
            set.push(BitMask::from_bools(m), 1.0, ProposalSource::Guided2d);
        }
        let mut views = masklift::features::ProposalViewFeatures::new(self.dim);
        for ((k, f), v) in &self.views {
            views.insert(*k, *f, v.clone()).unwrap();
        }
        let vis = self
            .vis
            .iter()
            .map(|(f, v)| masklift::projection::VisibilityMap {
                frame_id: *f,
                visible: BitMask::from_bools(v),
            })
            .collect();
        (set, views, vis)
    }
}

pub fn library_eval(
    preds: &[NaivePred],
    gts: &[NaiveGt],
) -> (Vec<masklift::eval::Prediction>, Vec<masklift::eval::GroundTruthInstance>) {
    use masklift::scene::BitMask;
    (
        preds
            .iter()
            .map(|p| masklift::eval::Prediction {
                mask: BitMask::from_bools(&p.mask),
                class_id: p.class_id,
                score: p.score,
            })
            .collect(),
        gts.iter()
            .map(|g| masklift::eval::GroundTruthInstance {
                mask: BitMask::from_bools(&g.mask),
                class_id: g.class_id,
            })
            .collect(),
    )
}

/// Splits the GT classes into up to three random groups, plus one group
/// naming a class that never occurs.
pub fn random_groups(r: &mut ChaCha8Rng, gts: &[NaiveGt]) -> BTreeMap<String, Vec<u32>> {
    let classes: BTreeSet<u32> = gts.iter().map(|g| g.class_id).collect();
    let mut groups: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for c in classes {
        let name = ["head", "common", "tail"][r.random_range(0..3)];
        groups.entry(name.to_string()).or_default().push(c);
    }
    groups.insert("absent".into(), vec![1000]);
    groups
}

/// Field-by-field comparison of a library report against the oracle.
pub fn report_diff(got: &masklift::eval::MetricsReport, want: &NaiveReport) -> f64 {
    let mut d: f64 = 0.0;
    let mut upd = |a: f64, b: f64| d = d.max((a - b).abs());
    upd(got.ap, want.ap);
    upd(got.ap50, want.ap50);
    upd(got.ap25, want.ap25);
    upd(got.recall50, want.recall50);
    if got.per_class.len() != want.per_class.len() || got.groups.len() != want.groups.len() {
        return f64::INFINITY;
    }
    for (c, (ap, ap50, ap25)) in &want.per_class {
        let Some(t) = got.per_class.get(c) else { return f64::INFINITY };
        upd(t.ap, *ap);
        upd(t.ap50, *ap50);
        upd(t.ap25, *ap25);
    }
    for (name, (ap, ap50, ap25, rec)) in &want.groups {
        let Some(g) = got.groups.get(name) else { return f64::INFINITY };
        upd(g.ap, *ap);
        upd(g.ap50, *ap50);
        upd(g.ap25, *ap25);
        upd(g.recall50, *rec);
    }
    let a = &got.class_agnostic;
    let w = want.agnostic;
    upd(a.ap, w.0);
    upd(a.ap50, w.1);
    upd(a.ap25, w.2);
    upd(a.ar, w.3);
    upd(a.recall50, w.4);
    upd(a.recall25, w.5);
    d
}

/// Removes points claimed by earlier instances so the GT masks partition a
/// subset of the cloud, as real instance labels do. Emptied instances are dropped.
pub fn make_disjoint(gts: Vec<NaiveGt>) -> Vec<NaiveGt> {
    let n = gts.first().map_or(0, |g| g.mask.len());
    let mut claimed = vec![false; n];
    let mut out = Vec::new();
    for mut g in gts {
        for i in 0..n {
            if claimed[i] {
                g.mask[i] = false;
            }
        }
        if g.mask.iter().any(|&b| b) {
            for i in 0..n {
                claimed[i] |= g.mask[i];
            }
            out.push(g);
        }
    }
    out
}

pub fn random_proposal_set(
    r: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    source: masklift::scene::ProposalSource,
) -> masklift::scene::ProposalSet {
    use masklift::scene::{BitMask, ProposalSet};
    let mut s = ProposalSet::empty(n);
    for _ in 0..k {
        let start = r.random_range(0..n - 1);
        let len = r.random_range(1..=(n - start).min(30));
        let mut bits: Vec<bool> = (0..n).map(|i| i >= start && i < start + len).collect();
        for b in bits.iter_mut() {
            if r.random_bool(0.05) {
                *b = !*b;
            }
        }
        bits[start] = true;
        // Coarse scores exercise the size and source tie-breaks.
        s.push(BitMask::from_bools(&bits), r.random_range(0..4) as f64 / 4.0, source);
    }
    s
}

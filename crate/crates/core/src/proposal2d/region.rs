use crate::superpoints::SuperpointFeatures;

/// Superpoint sizes and mean features shared by every region of a scene.
#[derive(Clone, Copy, Debug)]
pub struct SuperpointTable<'a> {
    pub sizes: &'a [usize],
    pub features: &'a SuperpointFeatures,
}

impl<'a> SuperpointTable<'a> {
    pub fn new(sizes: &'a [usize], features: &'a SuperpointFeatures) -> Self {
        assert_eq!(sizes.len(), features.len(), "one feature row per superpoint");
        SuperpointTable { sizes, features }
    }

    pub fn feature(&self, u: u32) -> &[f64] {
        self.features.row(u as usize)
    }

    /// Point-count-weighted mean feature of a superpoint set.
    pub fn weighted_mean(&self, superpoints: &[u32]) -> Vec<f64> {
        let mut acc = vec![0.0; self.features.dim];
        let mut total = 0usize;
        for &u in superpoints {
            let w = self.sizes[u as usize];
            total += w;
            for (a, &f) in acc.iter_mut().zip(self.feature(u)) {
                *a += w as f64 * f;
            }
        }
        if total > 0 {
            for a in &mut acc {
                *a /= total as f64;
            }
        }
        acc
    }
}

/// A hypothesized object: a set of superpoints plus its aggregated feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Region3D {
    /// Sorted, unique.
    pub superpoints: Vec<u32>,
    pub point_count: usize,
    pub feature: Vec<f64>,
    /// Sorted, unique.
    pub source_frames: Vec<u32>,
}

impl Region3D {
    pub fn new(mut superpoints: Vec<u32>, mut source_frames: Vec<u32>, table: &SuperpointTable<'_>) -> Self {
        superpoints.sort_unstable();
        superpoints.dedup();
        source_frames.sort_unstable();
        source_frames.dedup();
        let point_count = superpoints.iter().map(|&u| table.sizes[u as usize]).sum();
        let feature = table.weighted_mean(&superpoints);
        Region3D {
            superpoints,
            point_count,
            feature,
            source_frames,
        }
    }

    /// Superpoint-set union with a freshly recomputed weighted feature.
    pub fn union(&self, other: &Region3D, table: &SuperpointTable<'_>) -> Region3D {
        let superpoints = merge_sorted(&self.superpoints, &other.superpoints);
        let frames = merge_sorted(&self.source_frames, &other.source_frames);
        Region3D::new(superpoints, frames, table)
    }
}

fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn intersection_points(a: &[u32], b: &[u32], sizes: &[usize]) -> usize {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                total += sizes[a[i] as usize];
                i += 1;
                j += 1;
            }
        }
    }
    total
}

/// Point-weighted IoU of the two superpoint sets.
pub fn region_overlap(a: &Region3D, b: &Region3D, sizes: &[usize]) -> f64 {
    let inter = intersection_points(&a.superpoints, &b.superpoints, sizes);
    let union = a.point_count + b.point_count - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Cosine similarity of region features; 0 when either is the zero vector.
pub fn region_similarity(a: &Region3D, b: &Region3D) -> f64 {
    cosine(&a.feature, &b.feature)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeThresholds {
    pub tau_iou: f64,
    pub tau_sim: f64,
}

impl Default for MergeThresholds {
    fn default() -> Self {
        MergeThresholds {
            tau_iou: 0.9,
            tau_sim: 0.9,
        }
    }
}

/// Square binary matrix over an active region set; symmetric, zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatibilityMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl CompatibilityMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    pub fn any(&self) -> bool {
        self.cells.iter().any(|&c| c)
    }
}

#[inline]
pub(crate) fn compatible(o: f64, s: f64, th: &MergeThresholds) -> bool {
    o > th.tau_iou && s > th.tau_sim
}

pub fn compatibility_matrix(regions: &[Region3D], sizes: &[usize], th: &MergeThresholds) -> CompatibilityMatrix {
    let n = regions.len();
    let mut cells = vec![false; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = compatible(
                region_overlap(&regions[i], &regions[j], sizes),
                region_similarity(&regions[i], &regions[j]),
                th,
            );
            cells[i * n + j] = c;
            cells[j * n + i] = c;
        }
    }
    CompatibilityMatrix { n, cells }
}

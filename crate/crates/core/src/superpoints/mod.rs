//! Superpoints: geometrically homogeneous point groups that serve as the
//! atomic unit of region growing and merging.

mod knn;
mod segment;

pub use knn::{build_knn_graph, edge_weight, Edge, KdTree, KnnParams, NeighborGraph};
pub use segment::{felzenszwalb_segment, SegmentParams};

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::rle::{decode_labels, encode_labels};
use crate::scene::{read_json, write_json, BitMask, Matrix, PointCloud};

/// Labels in `[0, U)` with no empty superpoint, numbered by first occurrence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperpointPartition {
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl SuperpointPartition {
    /// Renumbers arbitrary labels by order of first appearance.
    pub fn from_raw_labels(raw: &[u32]) -> Self {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut sizes = Vec::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len() as u32;
                let l = *map.entry(*r).or_insert(next);
                if l as usize == sizes.len() {
                    sizes.push(0);
                }
                sizes[l as usize] += 1;
                l
            })
            .collect();
        SuperpointPartition { labels, sizes }
    }

    pub fn num_points(&self) -> usize {
        self.labels.len()
    }

    pub fn num_superpoints(&self) -> usize {
        self.sizes.len()
    }

    /// Point indices of every superpoint, ascending.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut members: Vec<Vec<u32>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            members[l as usize].push(i as u32);
        }
        members
    }

    /// Point mask covering the given superpoints.
    pub fn expand(&self, superpoints: &[u32]) -> BitMask {
        let mut include = vec![false; self.num_superpoints()];
        for &u in superpoints {
            include[u as usize] = true;
        }
        BitMask::from_indices(
            self.num_points(),
            self.labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| include[l as usize])
                .map(|(i, _)| i),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let u = self.sizes.len();
        let mut counts = vec![0usize; u];
        for &l in &self.labels {
            if l as usize >= u {
                return Err(Error::validation("SuperpointPartition", "labels", format!("label {l} >= U={u}")));
            }
            counts[l as usize] += 1;
        }
        if counts != self.sizes {
            return Err(Error::validation("SuperpointPartition", "sizes", "sizes disagree with labels"));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::validation("SuperpointPartition", "labels", "empty superpoint"));
        }
        Ok(())
    }
}

/// Superpoints `u`, `v` are adjacent iff some graph edge joins a point of
/// `u` to a point of `v`. Lists are sorted and exclude `u` itself.
pub fn superpoint_adjacency(partition: &SuperpointPartition, graph: &NeighborGraph) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); partition.num_superpoints()];
    for e in &graph.edges {
        let la = partition.labels[e.a as usize];
        let lb = partition.labels[e.b as usize];
        if la != lb {
            adj[la as usize].push(lb);
            adj[lb as usize].push(la);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Row-major U×D superpoint feature table.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperpointFeatures {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SuperpointFeatures {
    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

pub fn mean_superpoint_features(partition: &SuperpointPartition, features: &Matrix) -> Result<SuperpointFeatures> {
    if features.rows() != partition.num_points() {
        return Err(Error::DimensionMismatch {
            context: "point feature rows",
            expected: partition.num_points(),
            found: features.rows(),
        });
    }
    let dim = features.cols();
    let mut data = vec![0.0f64; partition.num_superpoints() * dim];
    for (i, &l) in partition.labels.iter().enumerate() {
        let dst = &mut data[l as usize * dim..(l as usize + 1) * dim];
        for (d, &v) in dst.iter_mut().zip(features.row(i)) {
            *d += v as f64;
        }
    }
    for (u, &size) in partition.sizes.iter().enumerate() {
        for d in &mut data[u * dim..(u + 1) * dim] {
            *d /= size as f64;
        }
    }
    Ok(SuperpointFeatures { dim, data })
}

/// Geometry-only point features for scenes without a learned feature map:
/// RGB followed by a unit PCA normal over the `k` nearest neighbors,
/// oriented away from the cloud centroid.
pub fn fallback_point_features(cloud: &PointCloud, k: usize) -> Matrix {
    let n = cloud.len();
    let tree = KdTree::build(&cloud.positions);
    let mut centroid = [0.0; 3];
    for p in &cloud.positions {
        for a in 0..3 {
            centroid[a] += p[a] / n as f64;
        }
    }
    let rows: Vec<[f32; 6]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.positions[i];
            let nbrs = tree.nearest(&p, k.min(n), None);
            let mut normal = [0.0, 0.0, 1.0];
            if nbrs.len() >= 3 {
                let mut mean = [0.0; 3];
                for &(_, j) in &nbrs {
                    for a in 0..3 {
                        mean[a] += cloud.positions[j as usize][a] / nbrs.len() as f64;
                    }
                }
                let mut cov = Matrix3::<f64>::zeros();
                for &(_, j) in &nbrs {
                    let q = cloud.positions[j as usize];
                    let d = nalgebra::Vector3::new(q[0] - mean[0], q[1] - mean[1], q[2] - mean[2]);
                    cov += d * d.transpose();
                }
                let eig = SymmetricEigen::new(cov);
                let imin = eig.eigenvalues.imin();
                let v = eig.eigenvectors.column(imin);
                if v.norm() > 0.0 {
                    normal = [v[0], v[1], v[2]];
                }
            }
            let outward: f64 = (0..3).map(|a| normal[a] * (p[a] - centroid[a])).sum();
            if outward < 0.0 {
                normal = normal.map(|c| -c);
            }
            let c = cloud.colors[i];
            [
                c[0] as f32,
                c[1] as f32,
                c[2] as f32,
                normal[0] as f32,
                normal[1] as f32,
                normal[2] as f32,
            ]
        })
        .collect();
    Matrix::from_rows(&rows).expect("fixed-width rows")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpointFile {
    pub num_points: usize,
    pub num_superpoints: usize,
    /// `[label, run length]` pairs in point order.
    pub labels: Vec<[u32; 2]>,
}

pub fn save_partition(path: impl AsRef<Path>, partition: &SuperpointPartition) -> Result<()> {
    write_json(
        path,
        &SuperpointFile {
            num_points: partition.num_points(),
            num_superpoints: partition.num_superpoints(),
            labels: encode_labels(&partition.labels),
        },
    )
}

pub fn load_partition(path: impl AsRef<Path>) -> Result<SuperpointPartition> {
    let file: SuperpointFile = read_json(path)?;
    let labels = decode_labels(&file.labels, file.num_points)
        .map_err(|e| Error::validation("SuperpointPartition", "labels", e.to_string()))?;
    let mut sizes = vec![0usize; file.num_superpoints];
    for &l in &labels {
        if l as usize >= sizes.len() {
            return Err(Error::validation("SuperpointPartition", "labels", format!("label {l} out of range")));
        }
        sizes[l as usize] += 1;
    }
    let partition = SuperpointPartition { labels, sizes };
    partition.validate()?;
    Ok(partition)
}

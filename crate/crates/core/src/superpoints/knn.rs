//! Exact k-nearest-neighbor search over a static point set and the
//! symmetrized neighbor graph built from it.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scene::PointCloud;

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Median-split k-d tree. Neighbor order is by (squared distance, index), so
/// results are exact and reproducible under ties.
pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[inline]
fn closer(a: (f64, u32), b: (f64, u32)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.1 < b.1,
    }
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [[f64; 3]]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points[i as usize][axis]
                .total_cmp(&points[j as usize][axis])
                .then(i.cmp(&j))
        });
        let value = points[self.order[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// The `k` nearest points to `query`, skipping index `exclude`.
    pub fn nearest(&self, query: &[f64; 3], k: usize, exclude: Option<u32>) -> Vec<(f64, u32)> {
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, k, exclude, &mut best);
        }
        best
    }

    fn search(&self, node: usize, q: &[f64; 3], k: usize, exclude: Option<u32>, best: &mut Vec<(f64, u32)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = (dist2(q, &self.points[i as usize]), i);
                    if best.len() == k && !closer(cand, best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|&b| closer(b, cand));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, exclude, best);
                if best.len() < k || diff * diff <= best[k - 1].0 {
                    self.search(far, q, k, exclude, best);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnParams {
    pub k: usize,
    pub color_weight: f64,
    pub position_weight: f64,
    /// Distance normalizer for the position term, in meters.
    pub position_scale: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 16,
            color_weight: 1.0,
            position_weight: 0.0,
            position_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
}

/// kNN lists per point plus the deduplicated undirected edge set (`a < b`,
/// sorted by endpoints).
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    pub num_points: usize,
    pub neighbors: Vec<Vec<u32>>,
    pub edges: Vec<Edge>,
}

impl NeighborGraph {
    /// Builds a graph from explicit undirected edges; used for non-kNN inputs.
    pub fn from_edges(num_points: usize, edges: impl IntoIterator<Item = (u32, u32, f64)>) -> Result<Self> {
        let mut list: Vec<Edge> = Vec::new();
        for (a, b, weight) in edges {
            if a == b {
                return Err(Error::validation("NeighborGraph", "edges", format!("self edge at {a}")));
            }
            if a as usize >= num_points || b as usize >= num_points {
                return Err(Error::validation("NeighborGraph", "edges", "endpoint out of range"));
            }
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(Error::validation("NeighborGraph", "edges", "weights must be finite and >= 0"));
            }
            list.push(Edge {
                a: a.min(b),
                b: a.max(b),
                weight,
            });
        }
        list.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)));
        list.dedup_by(|x, y| x.a == y.a && x.b == y.b);
        let mut neighbors = vec![Vec::new(); num_points];
        for e in &list {
            neighbors[e.a as usize].push(e.b);
            neighbors[e.b as usize].push(e.a);
        }
        Ok(NeighborGraph {
            num_points,
            neighbors,
            edges: list,
        })
    }

    /// Symmetric adjacency lists derived from the edge set.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.num_points];
        for e in &self.edges {
            adj[e.a as usize].push(e.b);
            adj[e.b as usize].push(e.a);
        }
        adj
    }
}

pub fn edge_weight(cloud: &PointCloud, a: usize, b: usize, params: &KnnParams) -> f64 {
    let color = dist2(&cloud.colors[a], &cloud.colors[b]).sqrt();
    let mut w = params.color_weight * color;
    if params.position_weight != 0.0 {
        w += params.position_weight * dist2(&cloud.positions[a], &cloud.positions[b]).sqrt() / params.position_scale;
    }
    w
}

pub fn build_knn_graph(cloud: &PointCloud, params: &KnnParams) -> Result<NeighborGraph> {
    let n = cloud.len();
    if params.k == 0 || params.k >= n {
        return Err(Error::InvalidArgument(format!(
            "kNN requires 1 <= k < N, got k={} with N={n}",
            params.k
        )));
    }
    if !(params.position_scale > 0.0) {
        return Err(Error::InvalidArgument("position scale must be positive".into()));
    }
    let tree = KdTree::build(&cloud.positions);
    let neighbors: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            tree.nearest(&cloud.positions[i], params.k, Some(i as u32))
                .into_iter()
                .map(|(_, j)| j)
                .collect()
        })
        .collect();

    let mut pairs: Vec<(u32, u32)> = neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, ns)| ns.iter().map(move |&j| ((i as u32).min(j), (i as u32).max(j))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let edges = pairs
        .into_par_iter()
        .map(|(a, b)| Edge {
            a,
            b,
            weight: edge_weight(cloud, a as usize, b as usize, params),
        })
        .collect();
    Ok(NeighborGraph {
        num_points: n,
        neighbors,
        edges,
    })
}

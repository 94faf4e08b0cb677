//! Felzenszwalb–Huttenlocher graph segmentation over a neighbor graph.

use crate::error::{Error, Result};

use super::{Edge, NeighborGraph, SuperpointPartition};

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
    internal: Vec<f64>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Joins two roots; the merged component's internal difference becomes `weight`.
    fn union(&mut self, a: u32, b: u32, weight: f64) {
        let (big, small) = if self.size[a as usize] >= self.size[b as usize] { (a, b) } else { (b, a) };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.internal[big as usize] = weight;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentParams {
    /// Scale constant: larger values favor larger segments.
    pub k: f64,
    pub min_size: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams { k: 0.5, min_size: 20 }
    }
}

/// Edges ascending by (weight, smaller endpoint, larger endpoint).
pub(crate) fn sorted_edges(graph: &NeighborGraph) -> Vec<Edge> {
    let mut edges = graph.edges.clone();
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight).then((x.a, x.b).cmp(&(y.a, y.b))));
    edges
}

pub fn felzenszwalb_segment(graph: &NeighborGraph, params: &SegmentParams) -> Result<SuperpointPartition> {
    if !(params.k > 0.0 && params.k.is_finite()) {
        return Err(Error::InvalidArgument(format!("segmentation scale must be > 0, got {}", params.k)));
    }
    if params.min_size == 0 {
        return Err(Error::InvalidArgument("min_size must be >= 1".into()));
    }
    let n = graph.num_points;
    let edges = sorted_edges(graph);
    let mut sets = DisjointSet::new(n);

    for e in &edges {
        let ra = sets.find(e.a);
        let rb = sets.find(e.b);
        if ra == rb {
            continue;
        }
        let ta = sets.internal[ra as usize] + params.k / sets.size[ra as usize] as f64;
        let tb = sets.internal[rb as usize] + params.k / sets.size[rb as usize] as f64;
        if e.weight <= ta.min(tb) {
            sets.union(ra, rb, e.weight);
        }
    }

    // Small components join the neighbor behind their cheapest outgoing edge.
    for e in &edges {
        let ra = sets.find(e.a);
        let rb = sets.find(e.b);
        if ra != rb
            && ((sets.size[ra as usize] as usize) < params.min_size
                || (sets.size[rb as usize] as usize) < params.min_size)
        {
            sets.union(ra, rb, e.weight);
        }
    }

    let roots: Vec<u32> = (0..n as u32).map(|i| sets.find(i)).collect();
    Ok(SuperpointPartition::from_raw_labels(&roots))
}

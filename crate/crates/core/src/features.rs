//! Pointwise open-vocabulary features pooled from per-(proposal, view)
//! image embeddings, and text-query scoring over proposal masks.
//!
//! For every proposal `k` and each of its top-λ views, the view's embedding
//! is added to every point that lies in the proposal and is visible in that
//! view. Rows are then L2-normalized; points never covered stay zero.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::VisibilityMap;
use crate::scene::{load_matrix, read_json, BitMask, Matrix, ProposalSet};

/// Embedding `f[k, view]` per proposal and frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProposalViewFeatures {
    pub dim: usize,
    pub entries: BTreeMap<(usize, u32), Vec<f32>>,
}

impl ProposalViewFeatures {
    pub fn new(dim: usize) -> Self {
        ProposalViewFeatures {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, proposal: usize, frame_id: u32, feature: Vec<f32>) -> Result<()> {
        if feature.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "view feature",
                expected: self.dim,
                found: feature.len(),
            });
        }
        if feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("ProposalViewFeatures", "entries", "non-finite value"));
        }
        self.entries.insert((proposal, frame_id), feature);
        Ok(())
    }

    pub fn get(&self, proposal: usize, frame_id: u32) -> Option<&[f32]> {
        self.entries.get(&(proposal, frame_id)).map(Vec::as_slice)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewIndexEntry {
    pub proposal_id: usize,
    pub frame_id: u32,
    pub row: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewIndexFile {
    pub entries: Vec<ViewIndexEntry>,
}

pub fn load_view_features(index_path: impl AsRef<Path>, matrix_path: impl AsRef<Path>) -> Result<ProposalViewFeatures> {
    let index: ViewIndexFile = read_json(index_path)?;
    let matrix = load_matrix(matrix_path)?;
    let mut pvf = ProposalViewFeatures::new(matrix.cols());
    for e in index.entries {
        if e.row >= matrix.rows() {
            return Err(Error::validation(
                "ProposalViewFeatures",
                "entries",
                format!("index row {} beyond the {} matrix rows", e.row, matrix.rows()),
            ));
        }
        pvf.insert(e.proposal_id, e.frame_id, matrix.row(e.row).to_vec())?;
    }
    Ok(pvf)
}

/// Frames where the mask has the most visible points, descending by count
/// with ascending frame id on ties; frames seeing none of it are skipped.
pub fn top_views(mask: &BitMask, visibilities: &[VisibilityMap], lambda: usize) -> Vec<u32> {
    let mut counts: Vec<(usize, u32)> = visibilities
        .iter()
        .map(|v| (mask.intersection_count(&v.visible), v.frame_id))
        .filter(|&(c, _)| c > 0)
        .collect();
    counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    counts.into_iter().take(lambda).map(|(_, f)| f).collect()
}

/// N×D row-normalized point features, stored at f32 precision.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseClipFeatures(pub Matrix);

impl PointwiseClipFeatures {
    pub fn num_points(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, n: usize) -> &[f32] {
        self.0.row(n)
    }
}

pub fn accumulate_pointwise(
    proposals: &ProposalSet,
    views: &ProposalViewFeatures,
    visibilities: &[VisibilityMap],
    lambda: usize,
) -> Result<PointwiseClipFeatures> {
    if lambda == 0 {
        return Err(Error::InvalidArgument("lambda must be >= 1".into()));
    }
    let n = proposals.num_points;
    if let Some(v) = visibilities.iter().find(|v| v.visible.len() != n) {
        return Err(Error::DimensionMismatch {
            context: "visibility map",
            expected: n,
            found: v.visible.len(),
        });
    }
    let dim = views.dim;
    let frame_slot: BTreeMap<u32, usize> = visibilities.iter().enumerate().map(|(i, v)| (v.frame_id, i)).collect();

    // Per proposal: (visibility slot, embedding) for each selected view.
    let selected: Vec<Vec<(usize, &[f32])>> = (0..proposals.len())
        .into_par_iter()
        .map(|k| {
            top_views(&proposals.masks[k], visibilities, lambda)
                .into_iter()
                .filter_map(|f| match views.get(k, f) {
                    Some(feat) => Some((frame_slot[&f], feat)),
                    None => {
                        log::warn!("no view feature for proposal {k} in frame {f}; view contributes zero");
                        None
                    }
                })
                .collect()
        })
        .collect();

    let mut covering: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (k, m) in proposals.masks.iter().enumerate() {
        for p in m.ones() {
            covering[p].push(k as u32);
        }
    }

    let mut data = vec![0.0f32; n * dim];
    if dim > 0 {
        data.par_chunks_mut(dim).enumerate().for_each(|(p, out)| {
            let mut acc = vec![0.0f64; dim];
            for &k in &covering[p] {
                for &(slot, feat) in &selected[k as usize] {
                    if visibilities[slot].visible.get(p) {
                        for (a, &f) in acc.iter_mut().zip(feat) {
                            *a += f as f64;
                        }
                    }
                }
            }
            let norm = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (o, a) in out.iter_mut().zip(&acc) {
                    *o = (a / norm) as f32;
                }
            }
        });
    }
    Ok(PointwiseClipFeatures(Matrix::from_vec(n, dim, data)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryEmbedding {
    pub prompt: String,
    pub class_id: u32,
    pub embedding: Vec<f32>,
}

impl QueryEmbedding {
    pub fn validate(&self) -> Result<()> {
        let norm = self.embedding.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-5 {
            return Err(Error::validation(
                "QueryEmbedding",
                "embedding",
                format!("prompt {:?} has norm {norm}, expected 1", self.prompt),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptEntry {
    Text(String),
    Labeled { text: String, class_id: Option<u32> },
}

/// Loads `prompts.json` (strings or `{text, class_id}` objects; class id
/// defaults to the prompt index) with the aligned embedding matrix.
pub fn load_queries(prompts_path: impl AsRef<Path>, embeddings_path: impl AsRef<Path>) -> Result<Vec<QueryEmbedding>> {
    let prompts: Vec<PromptEntry> = read_json(prompts_path)?;
    let matrix = load_matrix(embeddings_path)?;
    if matrix.rows() != prompts.len() {
        return Err(Error::DimensionMismatch {
            context: "text embedding rows vs prompts",
            expected: prompts.len(),
            found: matrix.rows(),
        });
    }
    prompts
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let (prompt, class_id) = match p {
                PromptEntry::Text(t) => (t, i as u32),
                PromptEntry::Labeled { text, class_id } => (text, class_id.unwrap_or(i as u32)),
            };
            let q = QueryEmbedding {
                prompt,
                class_id,
                embedding: matrix.row(i).to_vec(),
            };
            q.validate()?;
            Ok(q)
        })
        .collect()
}

fn cosine32(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Mean over mask points of the cosine between the point row and the query;
/// zero rows contribute 0.
pub fn query_score(features: &PointwiseClipFeatures, mask: &BitMask, query: &QueryEmbedding) -> Result<f64> {
    if query.embedding.len() != features.dim() {
        return Err(Error::DimensionMismatch {
            context: "query embedding",
            expected: features.dim(),
            found: query.embedding.len(),
        });
    }
    if mask.len() != features.num_points() {
        return Err(Error::DimensionMismatch {
            context: "query mask",
            expected: features.num_points(),
            found: mask.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for n in mask.ones() {
        total += cosine32(features.row(n), &query.embedding);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("cannot score an empty mask".into()));
    }
    Ok(total / count as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub proposal_id: usize,
    /// Index of the winning prompt; `None` when the proposal has no features.
    pub label: Option<usize>,
    pub prompt: Option<String>,
    pub class_id: Option<u32>,
    pub score: Option<f64>,
    /// Reported detection confidence, fixed at 1.0.
    pub confidence: f64,
}

/// Assigns each proposal its best-scoring prompt (lowest index on ties).
/// Proposals whose masked rows are all zero come back as unscored.
pub fn classify(
    proposals: &ProposalSet,
    features: &PointwiseClipFeatures,
    prompts: &[QueryEmbedding],
) -> Result<Vec<Classification>> {
    if prompts.is_empty() {
        return Err(Error::InvalidArgument("at least one prompt is required".into()));
    }
    (0..proposals.len())
        .into_par_iter()
        .map(|k| {
            let mask = &proposals.masks[k];
            let featured = mask.ones().any(|n| features.row(n).iter().any(|&v| v != 0.0));
            if !featured {
                return Ok(Classification {
                    proposal_id: k,
                    label: None,
                    prompt: None,
                    class_id: None,
                    score: None,
                    confidence: 1.0,
                });
            }
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, q) in prompts.iter().enumerate() {
                let s = query_score(features, mask, q)?;
                if s > best.1 {
                    best = (i, s);
                }
            }
            Ok(Classification {
                proposal_id: k,
                label: Some(best.0),
                prompt: Some(prompts[best.0].prompt.clone()),
                class_id: Some(prompts[best.0].class_id),
                score: Some(best.1),
                confidence: 1.0,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedProposal {
    pub proposal_id: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptRanking {
    pub prompt: String,
    pub class_id: u32,
    pub top: Vec<RankedProposal>,
}

/// Per prompt, the `topk` featured proposals by query score (ties by id).
pub fn rank_proposals(
    proposals: &ProposalSet,
    features: &PointwiseClipFeatures,
    prompts: &[QueryEmbedding],
    labels: &[Classification],
    topk: usize,
) -> Result<Vec<PromptRanking>> {
    prompts
        .iter()
        .map(|q| {
            let mut scored = labels
                .iter()
                .filter(|c| c.label.is_some())
                .map(|c| {
                    Ok(RankedProposal {
                        proposal_id: c.proposal_id,
                        score: query_score(features, &proposals.masks[c.proposal_id], q)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.proposal_id.cmp(&b.proposal_id)));
            scored.truncate(topk);
            Ok(PromptRanking {
                prompt: q.prompt.clone(),
                class_id: q.class_id,
                top: scored,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub proposals: Vec<Classification>,
    pub rankings: Vec<PromptRanking>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ProposalSource;

    fn vis(frame_id: u32, n: usize, ones: &[usize]) -> VisibilityMap {
        VisibilityMap {
            frame_id,
            visible: BitMask::from_indices(n, ones.iter().copied()),
        }
    }

    fn one_proposal(n: usize, ones: &[usize]) -> ProposalSet {
        let mut s = ProposalSet::empty(n);
        s.push(BitMask::from_indices(n, ones.iter().copied()), 1.0, ProposalSource::Guided2d);
        s
    }

    fn e(dim: usize, i: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn top_views_limits_and_ties() {
        let mask = BitMask::from_indices(20, 0..20);
        let v = vec![
            vis(0, 20, &(0..10).collect::<Vec<_>>()),
            vis(1, 20, &(0..7).collect::<Vec<_>>()),
            vis(2, 20, &(5..12).collect::<Vec<_>>()),
            vis(3, 20, &[0]),
        ];
        assert_eq!(top_views(&mask, &v, 2), vec![0, 1]);
        let sparse = vec![vis(0, 20, &[1]), vis(1, 20, &[]), vis(2, 20, &[2, 3]), vis(4, 20, &[4])];
        assert_eq!(top_views(&mask, &sparse, 5), vec![2, 0, 4]);
    }

    #[test]
    fn single_view_rows() {
        let props = one_proposal(4, &[0, 1]);
        let mut pvf = ProposalViewFeatures::new(3);
        pvf.insert(0, 0, e(3, 0)).unwrap();
        let f = accumulate_pointwise(&props, &pvf, &[vis(0, 4, &[0, 1, 2, 3])], 5).unwrap();
        assert_eq!(f.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(f.row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(f.row(2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_views_normalize_symmetrically() {
        let props = one_proposal(3, &[0, 1]);
        let mut pvf = ProposalViewFeatures::new(3);
        pvf.insert(0, 0, e(3, 0)).unwrap();
        pvf.insert(0, 1, e(3, 1)).unwrap();
        let v = vec![vis(0, 3, &[0, 1]), vis(1, 3, &[0])];
        let f = accumulate_pointwise(&props, &pvf, &v, 5).unwrap();
        let h = std::f32::consts::FRAC_1_SQRT_2;
        assert!((f.row(0)[0] - h).abs() < 1e-7 && (f.row(0)[1] - h).abs() < 1e-7);
        assert_eq!(f.row(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_view_contributes_zero() {
        let props = one_proposal(2, &[0, 1]);
        let pvf = ProposalViewFeatures::new(2);
        let f = accumulate_pointwise(&props, &pvf, &[vis(0, 2, &[0, 1])], 5).unwrap();
        assert!(f.0.data().iter().all(|&v| v == 0.0));
    }

    fn query(dim: usize, i: usize) -> QueryEmbedding {
        QueryEmbedding {
            prompt: format!("q{i}"),
            class_id: i as u32,
            embedding: e(dim, i),
        }
    }

    #[test]
    fn query_score_examples() {
        let rows = Matrix::from_rows(&[e(2, 0), e(2, 0), vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let f = PointwiseClipFeatures(rows);
        let q = query(2, 0);
        assert_eq!(query_score(&f, &BitMask::from_indices(4, [0, 1]), &q).unwrap(), 1.0);
        assert_eq!(query_score(&f, &BitMask::from_indices(4, [3]), &q).unwrap(), 0.0);
        assert_eq!(query_score(&f, &BitMask::from_indices(4, [0, 2]), &q).unwrap(), 0.5);
        assert!(query_score(&f, &BitMask::zeros(4), &q).is_err());
    }

    #[test]
    fn classify_examples() {
        let f = PointwiseClipFeatures(Matrix::from_rows(&[e(2, 1), e(2, 1), vec![0.0, 0.0]]).unwrap());
        let mut props = one_proposal(3, &[0, 1]);
        props.push(BitMask::from_indices(3, [2]), 1.0, ProposalSource::External3d);
        let out = classify(&props, &f, &[query(2, 0), query(2, 1)]).unwrap();
        assert_eq!(out[0].label, Some(1));
        assert_eq!(out[0].score, Some(1.0));
        assert_eq!(out[0].confidence, 1.0);
        assert_eq!(out[1].label, None);

        let single = classify(&props, &f, &[query(2, 0)]).unwrap();
        assert_eq!(single[0].label, Some(0));
        assert!(classify(&props, &f, &[]).is_err());
    }
}

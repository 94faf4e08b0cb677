use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::bundle::{read_json, write_json};
use super::rle::{decode_mask, encode_mask};
use super::BitMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalSource {
    /// Lifted from 2D masks over superpoints.
    Guided2d,
    /// Produced by an external class-agnostic 3D segmenter.
    External3d,
}

impl fmt::Display for ProposalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProposalSource::Guided2d => "guided2d",
            ProposalSource::External3d => "external3d",
        })
    }
}

impl FromStr for ProposalSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "guided2d" => Ok(ProposalSource::Guided2d),
            "external3d" => Ok(ProposalSource::External3d),
            other => Err(Error::validation("ProposalSet", "source_tags", format!("unknown source {other:?}"))),
        }
    }
}

/// K point-level instance masks over one cloud of N points.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalSet {
    pub num_points: usize,
    pub masks: Vec<BitMask>,
    pub scores: Vec<f64>,
    pub sources: Vec<ProposalSource>,
}

impl ProposalSet {
    pub fn empty(num_points: usize) -> Self {
        ProposalSet {
            num_points,
            masks: Vec::new(),
            scores: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn push(&mut self, mask: BitMask, score: f64, source: ProposalSource) {
        self.masks.push(mask);
        self.scores.push(score);
        self.sources.push(source);
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() != self.masks.len() || self.sources.len() != self.masks.len() {
            return Err(Error::validation("ProposalSet", "scores", "scores and tags must align with masks"));
        }
        for (k, (m, s)) in self.masks.iter().zip(&self.scores).enumerate() {
            if m.len() != self.num_points {
                return Err(Error::validation(
                    "ProposalSet",
                    "masks",
                    format!("mask {k} covers {} points, expected {}", m.len(), self.num_points),
                ));
            }
            if m.none() {
                return Err(Error::validation("ProposalSet", "masks", format!("mask {k} is empty")));
            }
            if !(0.0..=1.0).contains(s) {
                return Err(Error::validation("ProposalSet", "scores", format!("score {s} of mask {k} outside [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub rle: Vec<u32>,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ProposalSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalFile {
    pub num_points: usize,
    pub proposals: Vec<ProposalRecord>,
}

/// Loads a proposal file. Records without a `source` tag are treated as
/// `default_source`.
pub fn load_proposals(path: impl AsRef<Path>, default_source: ProposalSource) -> Result<ProposalSet> {
    let path = path.as_ref();
    let file: ProposalFile = read_json(path)?;
    let mut set = ProposalSet::empty(file.num_points);
    for (k, rec) in file.proposals.into_iter().enumerate() {
        let mask = decode_mask(&rec.rle, file.num_points)
            .map_err(|e| Error::validation("ProposalSet", "masks", format!("proposal {k}: {e}")))?;
        if !rec.score.is_finite() {
            return Err(Error::validation("ProposalSet", "scores", format!("proposal {k} has a non-finite score")));
        }
        set.push(mask, rec.score, rec.source.unwrap_or(default_source));
    }
    set.validate()?;
    Ok(set)
}

pub fn save_proposals(path: impl AsRef<Path>, set: &ProposalSet) -> Result<()> {
    set.validate()?;
    let file = ProposalFile {
        num_points: set.num_points,
        proposals: set
            .masks
            .iter()
            .zip(&set.scores)
            .zip(&set.sources)
            .map(|((m, &score), &source)| {
                Ok(ProposalRecord {
                    rle: encode_mask(m)?,
                    score,
                    source: Some(source),
                })
            })
            .collect::<Result<_>>()?,
    };
    write_json(path, &file)
}

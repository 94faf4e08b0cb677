//! Pipeline thresholds and a flat `key = value` config file.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::proposal2d::{MergeOrder, MergeThresholds};
use crate::proposal3d::ExternalFilter;
use crate::superpoints::{KnnParams, SegmentParams};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub tau_iou: f64,
    pub tau_sim: f64,
    /// Meters.
    pub tau_depth: f64,
    pub tau_dup: f64,
    pub lambda: usize,
    pub min_points: usize,
    pub score_min: f64,
    pub frame_subsample: usize,
    pub merge_order: MergeOrder,
    pub knn_k: usize,
    pub fz_k: f64,
    pub min_size: usize,
    pub w_color: f64,
    pub w_pos: f64,
    pub r_norm: f64,
    /// Snap external masks to superpoints covered at least this much; `None` keeps them as given.
    pub snap_fraction: Option<f64>,
    /// 0 means available parallelism.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau_iou: 0.9,
            tau_sim: 0.9,
            tau_depth: 0.1,
            tau_dup: 0.5,
            lambda: 5,
            min_points: 50,
            score_min: 0.2,
            frame_subsample: 10,
            merge_order: MergeOrder::Hierarchical,
            knn_k: 16,
            fz_k: 0.5,
            min_size: 20,
            w_color: 1.0,
            w_pos: 0.0,
            r_norm: 1.0,
            snap_fraction: Some(0.5),
            workers: 0,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::validation("PipelineConfig", field, reason)
}

fn parse_num<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse {value:?}")))
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 17] = [
        "tau_iou",
        "tau_sim",
        "tau_depth",
        "tau_dup",
        "lambda",
        "min_points",
        "score_min",
        "frame_subsample",
        "merge_order",
        "knn_k",
        "fz_k",
        "min_size",
        "w_color",
        "w_pos",
        "r_norm",
        "snap_fraction",
        "workers",
    ];

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "tau_iou" => self.tau_iou = parse_num("tau_iou", v)?,
            "tau_sim" => self.tau_sim = parse_num("tau_sim", v)?,
            "tau_depth" => self.tau_depth = parse_num("tau_depth", v)?,
            "tau_dup" => self.tau_dup = parse_num("tau_dup", v)?,
            "lambda" => self.lambda = parse_num("lambda", v)?,
            "min_points" => self.min_points = parse_num("min_points", v)?,
            "score_min" => self.score_min = parse_num("score_min", v)?,
            "frame_subsample" => self.frame_subsample = parse_num("frame_subsample", v)?,
            "merge_order" => self.merge_order = v.parse()?,
            "knn_k" => self.knn_k = parse_num("knn_k", v)?,
            "fz_k" => self.fz_k = parse_num("fz_k", v)?,
            "min_size" => self.min_size = parse_num("min_size", v)?,
            "w_color" => self.w_color = parse_num("w_color", v)?,
            "w_pos" => self.w_pos = parse_num("w_pos", v)?,
            "r_norm" => self.r_norm = parse_num("r_norm", v)?,
            "snap_fraction" => {
                self.snap_fraction = match v {
                    "none" | "off" => None,
                    _ => Some(parse_num("snap_fraction", v)?),
                }
            }
            "workers" => self.workers = parse_num("workers", v)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Overlays the assignments in `text` onto `self`. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        // `{:?}` on f64 prints the shortest string that parses back to the same value.
        let _ = writeln!(s, "tau_iou = {:?}", self.tau_iou);
        let _ = writeln!(s, "tau_sim = {:?}", self.tau_sim);
        let _ = writeln!(s, "tau_depth = {:?}", self.tau_depth);
        let _ = writeln!(s, "tau_dup = {:?}", self.tau_dup);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "min_points = {}", self.min_points);
        let _ = writeln!(s, "score_min = {:?}", self.score_min);
        let _ = writeln!(s, "frame_subsample = {}", self.frame_subsample);
        let _ = writeln!(s, "merge_order = {}", self.merge_order);
        let _ = writeln!(s, "knn_k = {}", self.knn_k);
        let _ = writeln!(s, "fz_k = {:?}", self.fz_k);
        let _ = writeln!(s, "min_size = {}", self.min_size);
        let _ = writeln!(s, "w_color = {:?}", self.w_color);
        let _ = writeln!(s, "w_pos = {:?}", self.w_pos);
        let _ = writeln!(s, "r_norm = {:?}", self.r_norm);
        match self.snap_fraction {
            Some(f) => {
                let _ = writeln!(s, "snap_fraction = {f:?}");
            }
            None => s.push_str("snap_fraction = none\n"),
        }
        let _ = writeln!(s, "workers = {}", self.workers);
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |f: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(f, format!("{v} outside [0, 1]")))
            }
        };
        unit("tau_iou", self.tau_iou)?;
        // -1 disables the similarity gate.
        if !(-1.0..=1.0).contains(&self.tau_sim) {
            return Err(invalid("tau_sim", format!("{} outside [-1, 1]", self.tau_sim)));
        }
        if !(self.tau_depth > 0.0) || !self.tau_depth.is_finite() {
            return Err(invalid("tau_depth", "must be a positive number of meters"));
        }
        unit("tau_dup", self.tau_dup)?;
        unit("score_min", self.score_min)?;
        if self.lambda < 1 {
            return Err(invalid("lambda", "must be >= 1"));
        }
        if self.frame_subsample < 1 {
            return Err(invalid("frame_subsample", "must be >= 1"));
        }
        if self.knn_k < 1 {
            return Err(invalid("knn_k", "must be >= 1"));
        }
        if !(self.fz_k > 0.0) || !self.fz_k.is_finite() {
            return Err(invalid("fz_k", "must be positive"));
        }
        if self.min_size < 1 {
            return Err(invalid("min_size", "must be >= 1"));
        }
        if !(self.w_color >= 0.0) || !(self.w_pos >= 0.0) || !(self.r_norm > 0.0) {
            return Err(invalid("w_color", "edge weights must be >= 0 and r_norm > 0"));
        }
        if let Some(f) = self.snap_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(invalid("snap_fraction", format!("{f} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn thresholds(&self) -> MergeThresholds {
        MergeThresholds {
            tau_iou: self.tau_iou,
            tau_sim: self.tau_sim,
        }
    }

    pub fn knn_params(&self) -> KnnParams {
        KnnParams {
            k: self.knn_k,
            color_weight: self.w_color,
            position_weight: self.w_pos,
            position_scale: self.r_norm,
        }
    }

    pub fn segment_params(&self) -> SegmentParams {
        SegmentParams {
            k: self.fz_k,
            min_size: self.min_size,
        }
    }

    pub fn external_filter(&self) -> ExternalFilter {
        ExternalFilter {
            score_min: self.score_min,
            min_points: self.min_points,
            snap_fraction: self.snap_fraction,
        }
    }

    pub fn effective_workers(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

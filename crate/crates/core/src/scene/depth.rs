//! 16-bit grayscale PNG depth maps.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major depth image in meters; 0 marks a missing measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }
}

fn to_raw(d: f32, scale: f64) -> u16 {
    (d as f64 * scale).round().clamp(0.0, u16::MAX as f64) as u16
}

fn from_raw(raw: u16, scale: f64) -> f32 {
    (raw as f64 / scale) as f32
}

/// Rounds every sample to the grid a PNG written at `scale` would store, so
/// an in-memory map equals its reloaded copy.
pub fn quantize_depth(depth: &mut DepthMap, scale: f64) {
    for d in &mut depth.data {
        *d = from_raw(to_raw(*d, scale), scale);
    }
}

/// Reads raw 16-bit samples and divides them by `scale`.
pub fn read_depth_png(path: impl AsRef<Path>, scale: f64) -> Result<DepthMap> {
    let path = path.as_ref();
    let fmt = |reason: String| Error::Format {
        path: path.to_owned(),
        reason,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| fmt(e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(fmt(format!(
            "expected 16-bit grayscale depth, found {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| fmt("image too large".into()))?];
    let frame = reader.next_frame(&mut buf).map_err(|e| fmt(e.to_string()))?;
    let bytes = &buf[..frame.buffer_size()];
    let data = bytes
        .chunks_exact(2)
        .map(|c| from_raw(u16::from_be_bytes([c[0], c[1]]), scale))
        .collect::<Vec<_>>();
    Ok(DepthMap { width, height, data })
}

/// Writes depth as `round(depth * scale)` clamped to the u16 range.
pub fn write_depth_png(path: impl AsRef<Path>, depth: &DepthMap, scale: f64) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), depth.width as u32, depth.height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let fmt = |e: png::EncodingError| Error::Format {
        path: path.to_owned(),
        reason: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(fmt)?;
    let mut bytes = Vec::with_capacity(depth.data.len() * 2);
    for &d in &depth.data {
        bytes.extend_from_slice(&to_raw(d, scale).to_be_bytes());
    }
    writer.write_image_data(&bytes).map_err(fmt)?;
    writer.finish().map_err(fmt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn millimeter_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let mut d = DepthMap::zeros(3, 2);
        d.set(1, 1, 2.0);
        write_depth_png(&path, &d, 1000.0).unwrap();
        let back = read_depth_png(&path, 1000.0).unwrap();
        assert_eq!(back.width, 3);
        assert_eq!(back.at(1, 1), 2.0);
        assert_eq!(back.at(0, 0), 0.0);
    }
}

//! Frame serialization: 8-bit RGB PNG, 16-bit instance PNG, raw float dumps.
//!
//! Raw dumps are `b"SGFB"`, then little-endian `u32` version (1), width,
//! height and channel count, followed by `width*height*channels` `f32`
//! values in row-major interleaved order.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};

use super::RenderedFrame;
use crate::metrics::MetricError;

const RAW_MAGIC: &[u8; 4] = b"SGFB";
const RAW_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RawBuffer {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

pub fn write_raw_buffer(buf: &RawBuffer, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(20 + buf.data.len() * 4);
    out.extend_from_slice(RAW_MAGIC);
    for v in [RAW_VERSION, buf.width, buf.height, buf.channels] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &buf.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)
}

pub fn read_raw_buffer(path: impl AsRef<Path>) -> std::io::Result<RawBuffer> {
    use std::io::{Error, ErrorKind};
    let bytes = fs::read(path)?;
    let bad = |m: &str| Error::new(ErrorKind::InvalidData, m.to_string());
    if bytes.len() < 20 || &bytes[..4] != RAW_MAGIC {
        return Err(bad("not a raw float buffer"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    if word(0) != RAW_VERSION {
        return Err(bad("unsupported raw buffer version"));
    }
    let (width, height, channels) = (word(1), word(2), word(3));
    let n = width as usize * height as usize * channels as usize;
    if bytes.len() != 20 + 4 * n {
        return Err(bad("raw buffer size does not match header"));
    }
    let data = bytes[20..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(RawBuffer {
        width,
        height,
        channels,
        data,
    })
}

impl RenderedFrame {
    pub fn save_rgb_png(&self, path: impl AsRef<Path>) -> Result<(), MetricError> {
        self.image().save_png(path)
    }

    /// Instance ids as a 16-bit grayscale PNG (65535 = none).
    pub fn save_instance_png(&self, path: impl AsRef<Path>) -> Result<(), MetricError> {
        let path = path.as_ref();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.instance.clone())
                .expect("instance raster size");
        img.save(path).map_err(|e| MetricError::image(path, e))
    }

    pub fn rgb_buffer(&self) -> RawBuffer {
        self.buffer(3, &self.rgb)
    }

    pub fn alpha_buffer(&self) -> RawBuffer {
        self.buffer(1, &self.alpha)
    }

    pub fn depth_buffer(&self) -> RawBuffer {
        self.buffer(1, &self.depth)
    }

    fn buffer(&self, channels: u32, values: &[f64]) -> RawBuffer {
        RawBuffer {
            width: self.width as u32,
            height: self.height as u32,
            channels,
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.raw");
        let buf = RawBuffer {
            width: 3,
            height: 2,
            channels: 1,
            data: vec![0.0, 1.5, -2.0, f32::MAX, 1e-20, 7.0],
        };
        write_raw_buffer(&buf, &path).unwrap();
        assert_eq!(read_raw_buffer(&path).unwrap(), buf);
        std::fs::write(&path, b"SGFB\x01\0\0\0").unwrap();
        assert!(read_raw_buffer(&path).is_err());
    }
}

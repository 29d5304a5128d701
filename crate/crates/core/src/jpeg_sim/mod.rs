//! Minimal self-contained baseline JPEG encoder/decoder plus an area
//! (box-filter) resizer.
//!
//! The module exists to synthesize upload → recompress (→ resize) provider
//! pipelines for fixtures and desk-scale experiments. The encoder logs the
//! quantized luminance DC plane it produces, which makes it an independent
//! oracle for [`crate::jpeg_parse`]: coefficients recorded at quantization
//! time must match coefficients re-read from the emitted bitstream.

mod dct;
mod decoder;
mod encoder;
mod resize;

pub use decoder::decode;
pub use encoder::encode;
pub use resize::resize_area;

use crate::error::{Error, Result};
use crate::jpeg::{BASE_QUANT_CHROMA, BASE_QUANT_LUMA};

/// An uncompressed image: 1 (luma) or 3 (RGB) interleaved channels of
/// 8-bit samples, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelImage {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub samples: Vec<u8>,
}

impl PixelImage {
    pub fn new(width: u32, height: u32, channels: u8, samples: Vec<u8>) -> Result<Self> {
        if !(channels == 1 || channels == 3) {
            return Err(Error::InvalidParams(format!(
                "{channels} channels (must be 1 or 3)"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if samples.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for {width}x{height}x{channels}",
                samples.len()
            )));
        }
        Ok(PixelImage {
            width,
            height,
            channels,
            samples,
        })
    }

    /// Constant grayscale image.
    pub fn gray(width: u32, height: u32, value: u8) -> Self {
        PixelImage {
            width,
            height,
            channels: 1,
            samples: vec![value; width as usize * height as usize],
        }
    }

    /// Grayscale image from a per-pixel function.
    pub fn gray_from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        PixelImage {
            width,
            height,
            channels: 1,
            samples,
        }
    }

    /// RGB image from a per-pixel function.
    pub fn rgb_from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Self {
        let mut samples = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                samples.extend_from_slice(&f(x, y));
            }
        }
        PixelImage {
            width,
            height,
            channels: 3,
            samples,
        }
    }
}

/// Chroma subsampling of the emitted stream. Ignored for grayscale input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// No subsampling (1x1 luminance factors).
    S444,
    /// Horizontal halving (2x1).
    S422,
    /// Horizontal and vertical halving (2x2).
    S420,
}

impl Sampling {
    /// Luminance (h, v) sampling factors; chroma is always 1x1.
    pub fn luma_factors(self) -> (u8, u8) {
        match self {
            Sampling::S444 => (1, 1),
            Sampling::S422 => (2, 1),
            Sampling::S420 => (2, 2),
        }
    }
}

/// Quantization tables derived from a quality factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantTables {
    pub luma: [u16; 64],
    pub chroma: [u16; 64],
    pub qf: u8,
}

/// Scales the Annex-K base tables by the conventional quality-factor rule:
/// `scale = 5000/qf` below 50, `200 - 2*qf` otherwise, each entry
/// `clamp(floor((base*scale + 50) / 100), 1, 255)`.
pub fn scale_tables(qf: u8) -> Result<QuantTables> {
    if !(1..=100).contains(&qf) {
        return Err(Error::QfOutOfRange(qf));
    }
    let scale: u32 = if qf < 50 {
        5000 / qf as u32
    } else {
        200 - 2 * qf as u32
    };
    let scale_one = |base: u16| -> u16 {
        let v = (base as u32 * scale + 50) / 100;
        v.clamp(1, 255) as u16
    };
    let mut luma = [0u16; 64];
    let mut chroma = [0u16; 64];
    for i in 0..64 {
        luma[i] = scale_one(BASE_QUANT_LUMA[i]);
        chroma[i] = scale_one(BASE_QUANT_CHROMA[i]);
    }
    Ok(QuantTables { luma, chroma, qf })
}

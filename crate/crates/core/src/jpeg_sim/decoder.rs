//! Baseline JPEG decoding to pixels: dequantize, inverse DCT, level
//! unshift, clamp. Chroma is upsampled by sample replication.

use super::dct;
use super::PixelImage;
use crate::error::{Error, Result};
use crate::jpeg::scan::{decode_bitstream, CoeffSink, FrameInfo};
use crate::num::round_half_away;

struct CoeffPlane {
    blocks_x: u32,
    blocks_y: u32,
    data: Vec<i32>,
}

struct FullSink {
    comps: Vec<CoeffPlane>,
}

impl FullSink {
    fn new(frame: &FrameInfo) -> Self {
        FullSink {
            comps: frame
                .comps
                .iter()
                .map(|c| CoeffPlane {
                    blocks_x: c.blocks_x,
                    blocks_y: c.blocks_y,
                    data: vec![0; c.blocks_x as usize * c.blocks_y as usize * 64],
                })
                .collect(),
        }
    }
}

impl CoeffSink for FullSink {
    fn block(&mut self, comp: usize, bx: u32, by: u32, coeffs: &[i32; 64]) {
        let plane = &mut self.comps[comp];
        let at = (by * plane.blocks_x + bx) as usize * 64;
        plane.data[at..at + 64].copy_from_slice(coeffs);
    }
}

struct SamplePlane {
    width: u32,
    data: Vec<u8>,
}

impl SamplePlane {
    fn at(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }
}

fn reconstruct(plane: &CoeffPlane, quant: &[u16; 64]) -> SamplePlane {
    let width = plane.blocks_x * 8;
    let height = plane.blocks_y * 8;
    let mut data = vec![0u8; width as usize * height as usize];
    let mut deq = [0.0f64; 64];
    for by in 0..plane.blocks_y {
        for bx in 0..plane.blocks_x {
            let at = (by * plane.blocks_x + bx) as usize * 64;
            for n in 0..64 {
                deq[n] = (plane.data[at + n] * quant[n] as i32) as f64;
            }
            let samples = dct::inverse(&deq);
            for (n, &s) in samples.iter().enumerate() {
                let x = bx * 8 + (n % 8) as u32;
                let y = by * 8 + (n / 8) as u32;
                let v = round_half_away(s + 128.0) as i32;
                data[(y * width + x) as usize] = v.clamp(0, 255) as u8;
            }
        }
    }
    SamplePlane { width, data }
}

fn clamp_u8(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

/// Decodes a baseline JPEG produced by [`super::encode`] (or any supported
/// baseline stream) back to pixels.
pub fn decode(bytes: &[u8]) -> Result<PixelImage> {
    let (frame, sink) = decode_bitstream(bytes, FullSink::new)?;
    if frame.comps.len() == 2 {
        return Err(Error::UnsupportedFormat(
            "two-component color stream".into(),
        ));
    }
    let planes: Vec<SamplePlane> = frame
        .comps
        .iter()
        .zip(sink.comps.iter())
        .map(|(c, p)| reconstruct(p, &frame.qtables[c.tq].expect("checked before scan decode")))
        .collect();

    let (w, h) = (frame.width as u32, frame.height as u32);
    if frame.comps.len() == 1 {
        let mut samples = Vec::with_capacity(w as usize * h as usize);
        for y in 0..h {
            for x in 0..w {
                samples.push(planes[0].at(x, y));
            }
        }
        return PixelImage::new(w, h, 1, samples);
    }

    // Replication upsample: source sample floor(x * h_c / hmax).
    let mut samples = Vec::with_capacity(w as usize * h as usize * 3);
    let (hmax, vmax) = (frame.hmax as u32, frame.vmax as u32);
    for y in 0..h {
        for x in 0..w {
            let mut ycc = [0i32; 3];
            for (ci, comp) in frame.comps.iter().enumerate() {
                let sx = x * comp.h as u32 / hmax;
                let sy = y * comp.v as u32 / vmax;
                ycc[ci] = planes[ci].at(sx, sy) as i32;
            }
            let (yy, cb, cr) = (ycc[0], ycc[1] - 128, ycc[2] - 128);
            samples.push(clamp_u8(yy + ((91881 * cr + 32768) >> 16)));
            samples.push(clamp_u8(yy - ((22554 * cb + 46802 * cr + 32768) >> 16)));
            samples.push(clamp_u8(yy + ((116130 * cb + 32768) >> 16)));
        }
    }
    PixelImage::new(w, h, 3, samples)
}

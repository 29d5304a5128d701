//! Baseline JPEG encoder with fixed standard Huffman tables.
//!
//! Besides the bitstream, `encode` returns the quantized luminance DC plane
//! it produced, recorded at quantization time. The DC path is integer-exact:
//! the block sum is quantized as `round(sum / (8 * q_dc))` half away from
//! zero, which is the same value the DCT-and-divide route yields.

use super::dct;
use super::{scale_tables, PixelImage, Sampling};
use crate::error::{Error, Result};
use crate::jpeg::huffman::{magnitude_bits, EncodeTable};
use crate::jpeg::{
    marker, HuffmanSpec, STD_AC_CHROMA, STD_AC_LUMA, STD_DC_CHROMA, STD_DC_LUMA, UNZIGZAG,
};
use crate::jpeg_parse::DcPlane;
use crate::num::{ceil_div, div_round_half_away, round_half_away};

struct Plane {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Plane {
    fn at(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    /// Grows the plane to `(w, h)` by replicating the last column and row.
    fn pad_to(&self, w: u32, h: u32) -> Plane {
        if w == self.width && h == self.height {
            return Plane {
                width: w,
                height: h,
                data: self.data.clone(),
            };
        }
        let mut data = Vec::with_capacity(w as usize * h as usize);
        for y in 0..h {
            let sy = y.min(self.height - 1);
            for x in 0..w {
                data.push(self.at(x.min(self.width - 1), sy));
            }
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }
}

fn clamp_u8(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

/// Integer full-range BT.601 transform, one output plane per call.
fn rgb_to_ycbcr(img: &PixelImage) -> [Plane; 3] {
    let n = img.width as usize * img.height as usize;
    let mut y = Vec::with_capacity(n);
    let mut cb = Vec::with_capacity(n);
    let mut cr = Vec::with_capacity(n);
    for px in img.samples.chunks_exact(3) {
        let (r, g, b) = (px[0] as i32, px[1] as i32, px[2] as i32);
        y.push(clamp_u8((19595 * r + 38470 * g + 7471 * b + 32768) >> 16));
        cb.push(clamp_u8(((-11059 * r - 21709 * g + 32768 * b + 32768) >> 16) + 128));
        cr.push(clamp_u8(((32768 * r - 27439 * g - 5329 * b + 32768) >> 16) + 128));
    }
    let plane = |data| Plane {
        width: img.width,
        height: img.height,
        data,
    };
    [plane(y), plane(cb), plane(cr)]
}

/// Box-averages `src` down by integer factors `(fx, fy)`, clamping the box
/// at the right/bottom edges.
fn subsample(src: &Plane, fx: u32, fy: u32) -> Plane {
    if fx == 1 && fy == 1 {
        return Plane {
            width: src.width,
            height: src.height,
            data: src.data.clone(),
        };
    }
    let w = ceil_div(src.width, fx);
    let h = ceil_div(src.height, fy);
    let mut data = Vec::with_capacity(w as usize * h as usize);
    for oy in 0..h {
        for ox in 0..w {
            let x0 = ox * fx;
            let y0 = oy * fy;
            let x1 = (x0 + fx).min(src.width);
            let y1 = (y0 + fy).min(src.height);
            let mut sum = 0i64;
            for sy in y0..y1 {
                for sx in x0..x1 {
                    sum += src.at(sx, sy) as i64;
                }
            }
            let count = ((x1 - x0) * (y1 - y0)) as i64;
            data.push(div_round_half_away(sum, count) as u8);
        }
    }
    Plane {
        width: w,
        height: h,
        data,
    }
}

/// MSB-first bit accumulator with `FF 00` byte stuffing.
struct BitWriter {
    out: Vec<u8>,
    acc: u64,
    nbits: u32,
}

impl BitWriter {
    fn put(&mut self, bits: u16, len: u8) {
        if len == 0 {
            return;
        }
        debug_assert!(len <= 16 && (len == 16 || bits >> len == 0));
        self.acc = (self.acc << len) | bits as u64;
        self.nbits += len as u32;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    /// Pads the current byte with 1-bits (T.81 B.2.5).
    fn align_ones(&mut self) {
        let rem = self.nbits % 8;
        if rem != 0 {
            let pad = (8 - rem) as u8;
            self.put((1 << pad) - 1, pad);
        }
    }
}

fn push_segment(out: &mut Vec<u8>, m: u8, payload: &[u8]) {
    out.push(0xFF);
    out.push(m);
    let len = (payload.len() + 2) as u16;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(payload);
}

fn dht_payload(specs: &[(u8, u8, &HuffmanSpec)]) -> Vec<u8> {
    let mut p = Vec::new();
    for &(class, id, spec) in specs {
        p.push((class << 4) | id);
        p.extend_from_slice(&spec.bits);
        p.extend_from_slice(spec.values);
    }
    p
}

struct EncComp {
    plane: Plane,
    h: u32,
    v: u32,
    quant: [u16; 64],
    dc_code: EncodeTable,
    ac_code: EncodeTable,
    pred: i32,
}

/// Quantizes and entropy-codes one block starting at `(x0, y0)` of the
/// component plane. Returns the quantized DC value.
fn encode_block(comp: &mut EncComp, x0: u32, y0: u32, writer: &mut BitWriter) -> i32 {
    let mut shifted = [0.0f64; 64];
    let mut sum = 0i32;
    for by in 0..8u32 {
        for bx in 0..8u32 {
            let s = comp.plane.at(x0 + bx, y0 + by) as i32 - 128;
            sum += s;
            shifted[(by * 8 + bx) as usize] = s as f64;
        }
    }
    let coeffs = dct::forward(&shifted);

    // DC through the exact integer route: round(sum / (8 * q)).
    let q_dc = comp.quant[0] as i64;
    let quantized_dc = div_round_half_away(sum as i64, 8 * q_dc) as i32;

    let mut zz = [0i32; 64];
    zz[0] = quantized_dc;
    for k in 1..64 {
        let n = UNZIGZAG[k];
        zz[k] = round_half_away(coeffs[n] / comp.quant[n] as f64) as i32;
    }

    let diff = quantized_dc - comp.pred;
    comp.pred = quantized_dc;
    let (size, bits) = magnitude_bits(diff);
    let (code, len) = comp.dc_code.code(size);
    writer.put(code, len);
    writer.put(bits, size);

    let mut run = 0u32;
    for &v in &zz[1..] {
        if v == 0 {
            run += 1;
            continue;
        }
        while run > 15 {
            let (code, len) = comp.ac_code.code(0xF0);
            writer.put(code, len);
            run -= 16;
        }
        let (size, bits) = magnitude_bits(v);
        let (code, len) = comp.ac_code.code((run << 4) as u8 | size);
        writer.put(code, len);
        writer.put(bits, size);
        run = 0;
    }
    if run > 0 {
        let (code, len) = comp.ac_code.code(0x00);
        writer.put(code, len);
    }
    quantized_dc
}

/// Encodes `img` as a baseline JFIF stream and returns the bytes together
/// with the quantized luminance DC plane recorded during quantization.
pub fn encode(
    img: &PixelImage,
    qf: u8,
    sampling: Sampling,
    restart_interval: u16,
) -> Result<(Vec<u8>, DcPlane)> {
    if img.width == 0 || img.height == 0 || img.width > 65535 || img.height > 65535 {
        return Err(Error::DimensionOverflow {
            width: img.width,
            height: img.height,
        });
    }
    let expected = img.width as usize * img.height as usize * img.channels as usize;
    if img.samples.len() != expected || !(img.channels == 1 || img.channels == 3) {
        return Err(Error::ShapeMismatch(format!(
            "{} samples for {}x{}x{}",
            img.samples.len(),
            img.width,
            img.height,
            img.channels
        )));
    }
    let tables = scale_tables(qf)?;
    let color = img.channels == 3;
    let (luma_h, luma_v) = if color {
        sampling.luma_factors()
    } else {
        (1, 1)
    };
    let (hmax, vmax) = (luma_h as u32, luma_v as u32);

    // Component planes at their coded resolution.
    let mut comps: Vec<EncComp> = Vec::new();
    if color {
        let [y, cb, cr] = rgb_to_ycbcr(img);
        comps.push(EncComp {
            plane: y,
            h: hmax,
            v: vmax,
            quant: tables.luma,
            dc_code: EncodeTable::build(&STD_DC_LUMA.bits, STD_DC_LUMA.values),
            ac_code: EncodeTable::build(&STD_AC_LUMA.bits, STD_AC_LUMA.values),
            pred: 0,
        });
        for chroma in [cb, cr] {
            comps.push(EncComp {
                plane: subsample(&chroma, hmax, vmax),
                h: 1,
                v: 1,
                quant: tables.chroma,
                dc_code: EncodeTable::build(&STD_DC_CHROMA.bits, STD_DC_CHROMA.values),
                ac_code: EncodeTable::build(&STD_AC_CHROMA.bits, STD_AC_CHROMA.values),
                pred: 0,
            });
        }
    } else {
        comps.push(EncComp {
            plane: Plane {
                width: img.width,
                height: img.height,
                data: img.samples.clone(),
            },
            h: 1,
            v: 1,
            quant: tables.luma,
            dc_code: EncodeTable::build(&STD_DC_LUMA.bits, STD_DC_LUMA.values),
            ac_code: EncodeTable::build(&STD_AC_LUMA.bits, STD_AC_LUMA.values),
            pred: 0,
        });
    }

    let mcus_x = ceil_div(img.width, 8 * hmax);
    let mcus_y = ceil_div(img.height, 8 * vmax);
    for comp in comps.iter_mut() {
        comp.plane = comp.plane.pad_to(mcus_x * comp.h * 8, mcus_y * comp.v * 8);
    }

    // Headers.
    let mut out = Vec::new();
    out.extend_from_slice(&[0xFF, marker::SOI]);
    push_segment(
        &mut out,
        marker::APP0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );
    let mut dqt = Vec::new();
    dqt.push(0x00);
    dqt.extend((0..64).map(|k| tables.luma[UNZIGZAG[k]] as u8));
    if color {
        dqt.push(0x01);
        dqt.extend((0..64).map(|k| tables.chroma[UNZIGZAG[k]] as u8));
    }
    push_segment(&mut out, marker::DQT, &dqt);

    let mut sof = vec![
        8,
        (img.height >> 8) as u8,
        img.height as u8,
        (img.width >> 8) as u8,
        img.width as u8,
        comps.len() as u8,
    ];
    for (i, comp) in comps.iter().enumerate() {
        sof.push(i as u8 + 1);
        sof.push(((comp.h as u8) << 4) | comp.v as u8);
        sof.push(if i == 0 { 0 } else { 1 });
    }
    push_segment(&mut out, marker::SOF0, &sof);

    let dht = if color {
        dht_payload(&[
            (0, 0, &STD_DC_LUMA),
            (1, 0, &STD_AC_LUMA),
            (0, 1, &STD_DC_CHROMA),
            (1, 1, &STD_AC_CHROMA),
        ])
    } else {
        dht_payload(&[(0, 0, &STD_DC_LUMA), (1, 0, &STD_AC_LUMA)])
    };
    push_segment(&mut out, marker::DHT, &dht);

    if restart_interval > 0 {
        push_segment(&mut out, marker::DRI, &restart_interval.to_be_bytes());
    }

    let mut sos = vec![comps.len() as u8];
    for (i, _) in comps.iter().enumerate() {
        sos.push(i as u8 + 1);
        sos.push(if i == 0 { 0x00 } else { 0x11 });
    }
    sos.extend_from_slice(&[0, 63, 0]);
    push_segment(&mut out, marker::SOS, &sos);

    // Entropy-coded data.
    let blocks_x = ceil_div(img.width, 8);
    let blocks_y = ceil_div(img.height, 8);
    let mut dc_log = vec![0i32; blocks_x as usize * blocks_y as usize];
    let mut writer = BitWriter {
        out,
        acc: 0,
        nbits: 0,
    };
    let total_mcus = mcus_x as u64 * mcus_y as u64;
    let mut restart_count = 0u64;
    for mcu in 0..total_mcus {
        if restart_interval > 0 && mcu > 0 && mcu % restart_interval as u64 == 0 {
            writer.align_ones();
            writer.out.push(0xFF);
            writer.out.push(marker::RST0 + (restart_count % 8) as u8);
            restart_count += 1;
            for comp in comps.iter_mut() {
                comp.pred = 0;
            }
        }
        let mx = (mcu % mcus_x as u64) as u32;
        let my = (mcu / mcus_x as u64) as u32;
        for (ci, comp) in comps.iter_mut().enumerate() {
            for j in 0..comp.v {
                for i in 0..comp.h {
                    let bx = mx * comp.h + i;
                    let by = my * comp.v + j;
                    let quantized_dc = encode_block(comp, bx * 8, by * 8, &mut writer);
                    if ci == 0 && bx < blocks_x && by < blocks_y {
                        dc_log[(by * blocks_x + bx) as usize] = quantized_dc;
                    }
                }
            }
        }
    }
    writer.align_ones();
    let mut out = writer.out;
    out.extend_from_slice(&[0xFF, marker::EOI]);

    let plane = DcPlane {
        width_px: img.width,
        height_px: img.height,
        q_dc: tables.luma[0],
        dc: dc_log,
    };
    Ok((out, plane))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_midgray_quantizes_to_zero_dc() {
        for sampling in [Sampling::S444, Sampling::S422, Sampling::S420] {
            let img = PixelImage::rgb_from_fn(24, 16, |_, _| [128, 128, 128]);
            let (_, plane) = encode(&img, 85, sampling, 0).unwrap();
            assert!(plane.dc.iter().all(|&dc| dc == 0), "{sampling:?}");
        }
    }

    #[test]
    fn constant_white_hits_the_dc_range_edge() {
        // Level-shifted white: S(0,0) = 8128/8 = 1016; at qf 50 the DC
        // quantizer is 16, and round(1016/16) = round(63.5) = 64 half away.
        let img = PixelImage::gray(16, 16, 255);
        let (_, plane) = encode(&img, 50, Sampling::S444, 0).unwrap();
        assert_eq!(plane.q_dc, 16);
        assert!(plane.dc.iter().all(|&dc| dc == 64));
    }

    #[test]
    fn logged_dc_respects_the_coefficient_range() {
        for qf in [50u8, 71, 95, 100] {
            let img = PixelImage::gray_from_fn(40, 40, |x, y| {
                if (x / 8 + y / 8) % 2 == 0 {
                    0
                } else {
                    255
                }
            });
            let (_, plane) = encode(&img, qf, Sampling::S444, 0).unwrap();
            let bound = 1024u32.div_ceil(plane.q_dc as u32) as i32;
            assert!(plane.dc.iter().all(|&dc| dc.abs() <= bound), "qf={qf}");
        }
    }

    #[test]
    fn dimension_limits_enforced() {
        let img = PixelImage {
            width: 0,
            height: 8,
            channels: 1,
            samples: vec![],
        };
        assert!(matches!(
            encode(&img, 75, Sampling::S444, 0),
            Err(Error::DimensionOverflow { .. })
        ));
        let img = PixelImage {
            width: 70000,
            height: 1,
            channels: 1,
            samples: vec![0; 70000],
        };
        assert!(matches!(
            encode(&img, 75, Sampling::S444, 0),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn stream_is_well_formed_jfif() {
        let img = PixelImage::gray(8, 8, 40);
        let (bytes, _) = encode(&img, 75, Sampling::S444, 0).unwrap();
        assert_eq!(&bytes[0..2], &[0xFF, marker::SOI]);
        assert_eq!(&bytes[2..4], &[0xFF, marker::APP0]);
        assert_eq!(&bytes[6..11], b"JFIF\0");
        assert_eq!(&bytes[bytes.len() - 2..], &[0xFF, marker::EOI]);
    }
}

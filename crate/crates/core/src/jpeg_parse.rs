//! Baseline JPEG bitstream parsing.
//!
//! Extracts the quantized luminance DC coefficient of every 8x8 block, in
//! raster order, straight from the entropy-coded data. There is no inverse
//! DCT and no pixel reconstruction: the feature downstream consumes the
//! quantized values, and re-deriving them from decoded pixels would
//! reintroduce rounding error. AC coefficients and chroma blocks are
//! Huffman-decoded only to advance the bit position, then discarded.

use crate::error::{Error, Result};
use crate::jpeg::scan::{decode_bitstream, CoeffSink, FrameInfo};
use crate::num::ceil_div;

/// Raster-ordered quantized luminance DC coefficients of one JPEG, plus the
/// DC quantizer and pixel dimensions they belong to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcPlane {
    pub width_px: u32,
    pub height_px: u32,
    /// Luminance quantization table entry (0,0), in `1..=255`.
    pub q_dc: u16,
    /// One value per luminance block, row-major over the block grid;
    /// `dc[m]` with `m = by * blocks_x + bx`.
    pub dc: Vec<i32>,
}

impl DcPlane {
    pub fn blocks_x(&self) -> u32 {
        ceil_div(self.width_px, 8)
    }

    pub fn blocks_y(&self) -> u32 {
        ceil_div(self.height_px, 8)
    }

    /// Number of luminance blocks `M`.
    pub fn block_count(&self) -> usize {
        self.blocks_x() as usize * self.blocks_y() as usize
    }
}

/// Stream facts useful for diagnostics; parsing does not depend on them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamInfo {
    pub components: u8,
    /// (h, v) sampling factors of the luminance component.
    pub luma_sampling: (u8, u8),
    pub restart_interval: u16,
}

struct DcSink {
    blocks_x: u32,
    dc: Vec<i32>,
}

impl DcSink {
    fn new(frame: &FrameInfo) -> Self {
        let luma = &frame.comps[0];
        DcSink {
            blocks_x: luma.blocks_x,
            dc: vec![0; luma.blocks_x as usize * luma.blocks_y as usize],
        }
    }
}

impl CoeffSink for DcSink {
    fn block(&mut self, comp: usize, bx: u32, by: u32, coeffs: &[i32; 64]) {
        if comp == 0 {
            self.dc[(by * self.blocks_x + bx) as usize] = coeffs[0];
        }
    }
}

/// Parses a complete baseline JPEG and returns the luminance DC plane.
pub fn parse_jpeg(bytes: &[u8]) -> Result<DcPlane> {
    Ok(parse_jpeg_with_info(bytes)?.0)
}

/// [`parse_jpeg`] plus stream diagnostics for inspection tooling.
pub fn parse_jpeg_with_info(bytes: &[u8]) -> Result<(DcPlane, StreamInfo)> {
    let (frame, sink) = decode_bitstream(bytes, DcSink::new)?;
    let luma = &frame.comps[0];
    let q_dc = frame.qtables[luma.tq].expect("checked before scan decode")[0];

    // A DC coefficient of an 8-bit image lies in [-1024, 1016]; anything a
    // conformant quantizer can produce stays within ceil(1024 / q_dc).
    let bound = ceil_div(1024, q_dc as u32) as i32;
    if let Some(bad) = sink.dc.iter().find(|dc| dc.unsigned_abs() as i32 > bound) {
        return Err(Error::CorruptStream(format!(
            "DC coefficient {bad} outside the admissible range ±{bound} for q_dc={q_dc}"
        )));
    }

    let info = StreamInfo {
        components: frame.comps.len() as u8,
        luma_sampling: (luma.h, luma.v),
        restart_interval: frame.restart_interval,
    };
    let plane = DcPlane {
        width_px: frame.width as u32,
        height_px: frame.height as u32,
        q_dc,
        dc: sink.dc,
    };
    debug_assert_eq!(plane.dc.len(), plane.block_count());
    Ok((plane, info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg_sim::{encode, PixelImage, Sampling};

    fn noise_image(w: u32, h: u32, channels: u8) -> PixelImage {
        let px = |x: u32, y: u32| ((x * 31 + y * 17 + x * y) % 256) as u8;
        if channels == 1 {
            PixelImage::gray_from_fn(w, h, px)
        } else {
            PixelImage::rgb_from_fn(w, h, |x, y| {
                [px(x, y), px(x + 3, y + 5), px(x + 11, y + 1)]
            })
        }
    }

    #[test]
    fn constant_gray_has_all_zero_dc() {
        let img = PixelImage::gray(32, 24, 128);
        let (bytes, _) = encode(&img, 75, Sampling::S444, 0).unwrap();
        let plane = parse_jpeg(&bytes).unwrap();
        assert_eq!(plane.block_count(), 12);
        assert!(plane.dc.iter().all(|&dc| dc == 0));
    }

    #[test]
    fn parse_matches_encoder_log_across_qf_and_sampling() {
        for &qf in &[71u8, 75, 80, 85, 95] {
            for sampling in [Sampling::S444, Sampling::S422, Sampling::S420] {
                for (w, h) in [(20u32, 20u32), (33, 7), (64, 48), (17, 64)] {
                    let img = noise_image(w, h, 3);
                    let (bytes, logged) = encode(&img, qf, sampling, 0).unwrap();
                    let parsed = parse_jpeg(&bytes).unwrap();
                    assert_eq!(parsed, logged, "qf={qf} {sampling:?} {w}x{h}");
                }
            }
        }
    }

    #[test]
    fn grayscale_streams_parse_too() {
        let img = noise_image(41, 23, 1);
        let (bytes, logged) = encode(&img, 80, Sampling::S420, 0).unwrap();
        let (parsed, info) = parse_jpeg_with_info(&bytes).unwrap();
        assert_eq!(parsed, logged);
        assert_eq!(info.components, 1);
        assert_eq!(info.luma_sampling, (1, 1));
    }

    #[test]
    fn padded_mcu_blocks_are_dropped() {
        // 20x20 under 4:2:0: 3x3 block grid but a 2x2 MCU grid carrying
        // 16 luminance blocks; 7 of them are alignment padding.
        let img = noise_image(20, 20, 3);
        let (bytes, _) = encode(&img, 75, Sampling::S420, 0).unwrap();
        let plane = parse_jpeg(&bytes).unwrap();
        assert_eq!((plane.blocks_x(), plane.blocks_y()), (3, 3));
        assert_eq!(plane.dc.len(), 9);
    }

    #[test]
    fn raster_order_is_by_block_rows() {
        // Block (bx, by) constant at a distinct level; under 4:2:0 the MCU
        // interleave must still come back out in raster order.
        let img = PixelImage::gray_from_fn(32, 16, |x, y| {
            let (bx, by) = (x / 8, y / 8);
            100 + (by * 4 + bx) as u8 * 8
        });
        let img3 = PixelImage::rgb_from_fn(32, 16, |x, y| {
            let v = img.samples[(y * 32 + x) as usize];
            [v, v, v]
        });
        let (bytes, _) = encode(&img3, 95, Sampling::S420, 0).unwrap();
        let plane = parse_jpeg(&bytes).unwrap();
        // DC of block m is 8*(level(m) - 128) quantized by q_dc = 2; the
        // levels increase with m, so the parsed DCs must too.
        for m in 1..plane.dc.len() {
            assert!(plane.dc[m] > plane.dc[m - 1], "m={m}: {:?}", plane.dc);
        }
        assert_eq!(plane.dc[0], 8 * (100 - 128) / 2);
    }

    #[test]
    fn restart_markers_do_not_change_the_plane() {
        for sampling in [Sampling::S444, Sampling::S420] {
            let img = noise_image(35, 19, 3);
            let (plain, logged) = encode(&img, 80, sampling, 0).unwrap();
            let (with_rst, logged_rst) = encode(&img, 80, sampling, 1).unwrap();
            assert_ne!(plain, with_rst);
            assert_eq!(logged, logged_rst);
            assert_eq!(parse_jpeg(&plain).unwrap(), parse_jpeg(&with_rst).unwrap());
        }
    }

    #[test]
    fn progressive_stream_rejected() {
        // SOI + minimal SOF2 header.
        let bytes = [
            0xFF, 0xD8, 0xFF, 0xC2, 0x00, 0x0B, 8, 0, 16, 0, 16, 1, 1, 0x11, 0,
        ];
        assert!(matches!(
            parse_jpeg(&bytes),
            Err(Error::UnsupportedFormat(reason)) if reason.contains("progressive")
        ));
    }

    #[test]
    fn arithmetic_stream_rejected() {
        let bytes = [
            0xFF, 0xD8, 0xFF, 0xC9, 0x00, 0x0B, 8, 0, 16, 0, 16, 1, 1, 0x11, 0,
        ];
        assert!(matches!(
            parse_jpeg(&bytes),
            Err(Error::UnsupportedFormat(reason)) if reason.contains("arithmetic")
        ));
    }

    #[test]
    fn twelve_bit_precision_rejected() {
        let bytes = [
            0xFF, 0xD8, 0xFF, 0xC0, 0x00, 0x0B, 12, 0, 16, 0, 16, 1, 1, 0x11, 0,
        ];
        assert!(matches!(
            parse_jpeg(&bytes),
            Err(Error::UnsupportedFormat(reason)) if reason.contains("12-bit")
        ));
    }

    #[test]
    fn four_components_rejected() {
        let mut bytes = vec![0xFF, 0xD8, 0xFF, 0xC0, 0x00, 0x14, 8, 0, 16, 0, 16, 4];
        for id in 1..=4u8 {
            bytes.extend_from_slice(&[id, 0x11, 0]);
        }
        assert!(matches!(
            parse_jpeg(&bytes),
            Err(Error::UnsupportedFormat(reason)) if reason.contains("4 components")
        ));
    }

    #[test]
    fn zero_dimensions_rejected() {
        let bytes = [
            0xFF, 0xD8, 0xFF, 0xC0, 0x00, 0x0B, 8, 0, 0, 0, 16, 1, 1, 0x11, 0,
        ];
        assert!(matches!(
            parse_jpeg(&bytes),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn truncated_entropy_segment_rejected() {
        let img = PixelImage::gray_from_fn(24, 24, |x, y| (x * y % 251) as u8);
        let (bytes, _) = encode(&img, 85, Sampling::S444, 0).unwrap();
        // Chop inside the entropy data (well past the headers).
        let truncated = &bytes[..bytes.len() - 8];
        assert!(matches!(
            parse_jpeg(truncated),
            Err(Error::CorruptStream(_))
        ));
    }

    #[test]
    fn missing_tables_rejected() {
        let img = PixelImage::gray(16, 16, 90);
        let (bytes, _) = encode(&img, 85, Sampling::S444, 0).unwrap();
        // Excising the DHT segment leaves the scan undecodable.
        let dht_at = bytes
            .windows(2)
            .position(|w| w == [0xFF, 0xC4])
            .expect("encoder emits DHT");
        let dht_len = u16::from_be_bytes([bytes[dht_at + 2], bytes[dht_at + 3]]) as usize;
        let mut without_dht = bytes[..dht_at].to_vec();
        without_dht.extend_from_slice(&bytes[dht_at + 2 + dht_len..]);
        assert!(matches!(
            parse_jpeg(&without_dht),
            Err(Error::CorruptStream(reason)) if reason.contains("DHT")
        ));
        // Same for DQT.
        let dqt_at = bytes
            .windows(2)
            .position(|w| w == [0xFF, 0xDB])
            .expect("encoder emits DQT");
        let dqt_len = u16::from_be_bytes([bytes[dqt_at + 2], bytes[dqt_at + 3]]) as usize;
        let mut without_dqt = bytes[..dqt_at].to_vec();
        without_dqt.extend_from_slice(&bytes[dqt_at + 2 + dqt_len..]);
        assert!(matches!(
            parse_jpeg(&without_dqt),
            Err(Error::CorruptStream(reason)) if reason.contains("DQT")
        ));
    }

    #[test]
    fn scan_before_frame_rejected() {
        let bytes = [
            0xFF, 0xD8, 0xFF, 0xDA, 0x00, 0x08, 1, 1, 0x00, 0, 63, 0,
        ];
        assert!(matches!(
            parse_jpeg(&bytes),
            Err(Error::CorruptStream(reason)) if reason.contains("SOF0 before SOS")
        ));
    }

    #[test]
    fn dc_outside_admissible_range_rejected() {
        // Claiming a coarse quantizer in DQT while the entropy data carries
        // finely quantized DCs puts the plane outside |dc| <= ceil(1024/q).
        let img = PixelImage::gray(24, 24, 220);
        let (mut bytes, plane) = encode(&img, 95, Sampling::S444, 0).unwrap();
        assert!(plane.dc[0].abs() > 5); // 8*(220-128)/2 = 368
        let dqt_at = bytes
            .windows(2)
            .position(|w| w == [0xFF, 0xDB])
            .expect("encoder emits DQT");
        bytes[dqt_at + 5] = 255; // first (DC) entry of the table
        assert!(matches!(
            parse_jpeg(&bytes),
            Err(Error::CorruptStream(reason)) if reason.contains("admissible range")
        ));
    }

    #[test]
    fn appn_and_comment_segments_are_skipped() {
        let img = PixelImage::gray(16, 8, 130);
        let (bytes, logged) = encode(&img, 75, Sampling::S444, 0).unwrap();
        // Splice an APP1 (fake metadata) and a COM right after SOI.
        let mut patched = bytes[..2].to_vec();
        patched.extend_from_slice(&[0xFF, 0xE1, 0x00, 0x08, b'E', b'x', b'i', b'f', 0, 0]);
        patched.extend_from_slice(&[0xFF, 0xFE, 0x00, 0x07, b'h', b'e', b'l', b'l', b'o']);
        patched.extend_from_slice(&bytes[2..]);
        assert_eq!(parse_jpeg(&patched).unwrap(), logged);
    }
}

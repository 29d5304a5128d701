//! Exact area (box-filter) downscaling.
//!
//! Each output pixel is the area-weighted mean of the source rectangle it
//! covers, computed in integer arithmetic: with output size `ow x oh`, the
//! source pixel `sx` overlaps output pixel `ox` by
//! `min((ox+1)*W, (sx+1)*ow) - max(ox*W, sx*ow)` in units of `1/ow`, so the
//! mean is an exact rational with denominator `W * H`.

use super::PixelImage;
use crate::error::{Error, Result};
use crate::num::div_round_half_away;

/// Per-output-index overlap weights along one axis.
fn axis_weights(src: u32, dst: u32) -> Vec<(u32, Vec<i64>)> {
    let (src, dst) = (src as u64, dst as u64);
    (0..dst)
        .map(|o| {
            let lo = o * src;
            let hi = (o + 1) * src;
            let first = (lo / dst) as u32;
            let mut weights = Vec::new();
            let mut s = first as u64;
            while s * dst < hi {
                let overlap = hi.min((s + 1) * dst) - lo.max(s * dst);
                weights.push(overlap as i64);
                s += 1;
            }
            (first, weights)
        })
        .collect()
}

/// Downscales with the box filter, rounding half away from zero. Output
/// dimensions must not exceed the input's.
pub fn resize_area(img: &PixelImage, out_w: u32, out_h: u32) -> Result<PixelImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::DimensionOverflow {
            width: out_w,
            height: out_h,
        });
    }
    if out_w > img.width || out_h > img.height {
        return Err(Error::UpscaleUnsupported {
            from_w: img.width,
            from_h: img.height,
            to_w: out_w,
            to_h: out_h,
        });
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }

    let xs = axis_weights(img.width, out_w);
    let ys = axis_weights(img.height, out_h);
    let channels = img.channels as usize;
    let stride = img.width as usize * channels;
    let area = img.width as i64 * img.height as i64;

    let mut samples = Vec::with_capacity(out_w as usize * out_h as usize * channels);
    for (y0, wys) in &ys {
        for (x0, wxs) in &xs {
            for ch in 0..channels {
                let mut acc = 0i64;
                for (dy, &wy) in wys.iter().enumerate() {
                    let row = (*y0 as usize + dy) * stride;
                    for (dx, &wx) in wxs.iter().enumerate() {
                        let at = row + (*x0 as usize + dx) * channels + ch;
                        acc += wy * wx * img.samples[at] as i64;
                    }
                }
                samples.push(div_round_half_away(acc, area) as u8);
            }
        }
    }
    PixelImage::new(out_w, out_h, img.channels, samples)
}

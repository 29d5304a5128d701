//! Maps an enrolled feature onto the block grid of a smaller query image.
//!
//! Downscaling by area averaging acts on block means, so the DC-derived
//! feature of the resized image is a weighted average of the enrolled
//! per-block values: the output block at `(xq, yq)` corresponds to the
//! source window `[xq*dx, (xq+1)*dx) x [yq*dy, (yq+1)*dy)` in enrolled
//! pixel coordinates, with `dx = 8*W_enrolled/W_query`, and each enrolled
//! block is weighted by how many integer pixel coordinates of that block
//! fall inside the window.
//!
//! All positions are rationals with denominator `W_query` (resp.
//! `H_query`), so the pixel counts are computed exactly over scaled
//! integers; no floating-point drift enters the weights. Every output
//! block up to `ceil(query/8)` is produced: trailing windows are clamped
//! to the image and each window is normalized by the pixel count it
//! actually covers, which keeps every output a convex combination of
//! enrolled values.

use crate::dc_feature::FeatureVector;
use crate::error::{Error, Result};
use crate::num::ceil_div;

/// Real-valued estimated feature on the query block grid, raster order.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedFeature {
    pub width_px: u32,
    pub height_px: u32,
    pub d: Vec<f64>,
}

impl EstimatedFeature {
    pub fn blocks_x(&self) -> u32 {
        ceil_div(self.width_px, 8)
    }

    pub fn blocks_y(&self) -> u32 {
        ceil_div(self.height_px, 8)
    }
}

/// Integer pixel-count overlaps along one axis for one output index.
///
/// Positions are scaled by `query_px`: the window is
/// `[8*enrolled_px*out, 8*enrolled_px*(out+1))` and block `b` spans
/// `[8*b*query_px, 8*(b+1)*query_px)`; a pixel coordinate `n` is inside a
/// half-open scaled interval `[lo, hi)` iff `ceil(lo/q) <= n < ceil(hi/q)`.
struct AxisOverlap {
    /// First enrolled block index with nonzero overlap.
    first: u32,
    /// Pixel counts per enrolled block from `first` on.
    counts: Vec<i64>,
    /// Total pixels covered by the (clamped) window.
    total: i64,
}

fn axis_overlaps(enrolled_px: u32, query_px: u32) -> Vec<AxisOverlap> {
    let scale = query_px as i64;
    let window = 8 * enrolled_px as i64; // dx scaled by query_px
    let blocks_out = ceil_div(query_px, 8);
    let blocks_in = ceil_div(enrolled_px, 8) as i64;
    let ceil_scaled = |v: i64| -> i64 { (v + scale - 1).div_euclid(scale) };

    (0..blocks_out as i64)
        .map(|out| {
            let lo = out * window;
            let hi = ((out + 1) * window).min(enrolled_px as i64 * scale);
            let first = lo / (8 * scale); // block containing the window start
            let mut counts = Vec::new();
            let mut total = 0i64;
            let mut b = first;
            while b < blocks_in && b * 8 * scale < hi {
                let blk_lo = b * 8 * scale;
                let blk_hi = (b + 1) * 8 * scale;
                let n = ceil_scaled(hi.min(blk_hi)) - ceil_scaled(lo.max(blk_lo));
                counts.push(n.max(0));
                total += n.max(0);
                b += 1;
            }
            AxisOverlap {
                first: first as u32,
                counts,
                total,
            }
        })
        .collect()
}

/// Exact overlap weights of one output block: `(block_x, block_y,
/// pixel_count)` triples plus the total pixel count. The weight of each
/// listed block is `pixel_count / total` in exact rational arithmetic.
pub type BlockWeights = (Vec<(u32, u32, i64)>, i64);

/// Computes the [`BlockWeights`] of one output block.
pub fn block_weights(
    enrolled: (u32, u32),
    query: (u32, u32),
    out_block: (u32, u32),
) -> Result<BlockWeights> {
    check_dims(enrolled, query)?;
    let (qw, qh) = query;
    if out_block.0 >= ceil_div(qw, 8) || out_block.1 >= ceil_div(qh, 8) {
        return Err(Error::ShapeMismatch(format!(
            "output block {:?} outside the {}x{} query grid",
            out_block,
            ceil_div(qw, 8),
            ceil_div(qh, 8)
        )));
    }
    let xs = axis_overlaps(enrolled.0, qw);
    let ys = axis_overlaps(enrolled.1, qh);
    let x = &xs[out_block.0 as usize];
    let y = &ys[out_block.1 as usize];
    let mut triples = Vec::new();
    for (dy, &cy) in y.counts.iter().enumerate() {
        for (dx, &cx) in x.counts.iter().enumerate() {
            if cx > 0 && cy > 0 {
                triples.push((x.first + dx as u32, y.first + dy as u32, cx * cy));
            }
        }
    }
    Ok((triples, x.total * y.total))
}

fn check_dims(enrolled: (u32, u32), query: (u32, u32)) -> Result<()> {
    if query.0 == 0 || query.1 == 0 {
        return Err(Error::DimensionOverflow {
            width: query.0,
            height: query.1,
        });
    }
    if query.0 > enrolled.0 || query.1 > enrolled.1 {
        return Err(Error::UpscaleUnsupported {
            from_w: enrolled.0,
            from_h: enrolled.1,
            to_w: query.0,
            to_h: query.1,
        });
    }
    Ok(())
}

/// Transforms an enrolled feature to the block grid of `query_w x query_h`.
/// Same-size input returns the enrolled values unchanged as reals.
pub fn estimate(enrolled: &FeatureVector, query_w: u32, query_h: u32) -> Result<EstimatedFeature> {
    check_dims(
        (enrolled.width_px, enrolled.height_px),
        (query_w, query_h),
    )?;
    let bx = enrolled.blocks_x() as usize;
    let by = enrolled.blocks_y() as usize;
    if enrolled.v.len() != bx * by {
        return Err(Error::ShapeMismatch(format!(
            "feature has {} components but the {}x{} grid needs {}",
            enrolled.v.len(),
            bx,
            by,
            bx * by
        )));
    }

    let xs = axis_overlaps(enrolled.width_px, query_w);
    let ys = axis_overlaps(enrolled.height_px, query_h);
    let mut d = Vec::with_capacity(xs.len() * ys.len());
    for y in &ys {
        for x in &xs {
            let mut acc = 0i64;
            for (dy, &cy) in y.counts.iter().enumerate() {
                let row = (y.first as usize + dy) * bx;
                for (dx, &cx) in x.counts.iter().enumerate() {
                    let u = enrolled.v[row + x.first as usize + dx] as i64;
                    acc += cy * cx * u;
                }
            }
            d.push(acc as f64 / (x.total * y.total) as f64);
        }
    }
    Ok(EstimatedFeature {
        width_px: query_w,
        height_px: query_h,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc_feature::FeatureParams;

    fn feature(w: u32, h: u32, v: Vec<i32>) -> FeatureVector {
        FeatureVector {
            params: FeatureParams::default(),
            width_px: w,
            height_px: h,
            v,
        }
    }

    #[test]
    fn halving_uses_quarter_weights() {
        let (w, total) = block_weights((16, 16), (8, 8), (0, 0)).unwrap();
        assert_eq!(total, 256);
        assert_eq!(
            w,
            vec![(0, 0, 64), (1, 0, 64), (0, 1, 64), (1, 1, 64)] // each 64/256 = 1/4
        );
    }

    #[test]
    fn five_fourths_matches_the_64_16_16_4_split() {
        // 10x10 enrolled, 8x8 query: dx = dy = 10.
        let (w, total) = block_weights((10, 10), (8, 8), (0, 0)).unwrap();
        assert_eq!(total, 100);
        assert_eq!(
            w,
            vec![(0, 0, 64), (1, 0, 16), (0, 1, 16), (1, 1, 4)]
        );
    }

    #[test]
    fn same_size_is_identity() {
        let f = feature(24, 16, (0..6).map(|i| i * 3 - 7).collect());
        let est = estimate(&f, 24, 16).unwrap();
        let expected: Vec<f64> = f.v.iter().map(|&x| x as f64).collect();
        assert_eq!(est.d, expected);
    }

    #[test]
    fn constant_feature_stays_constant() {
        let f = feature(64, 64, vec![3; 64]);
        let est = estimate(&f, 40, 24).unwrap();
        for &d in &est.d {
            assert_eq!(d, 3.0);
        }
    }

    #[test]
    fn weights_are_convex_per_output_block() {
        for (ew, eh, qw, qh) in [(100u32, 60u32, 50u32, 30u32), (23, 41, 17, 9), (64, 64, 63, 1)] {
            for yq in 0..qh.div_ceil(8) {
                for xq in 0..qw.div_ceil(8) {
                    let (w, total) =
                        block_weights((ew, eh), (qw, qh), (xq, yq)).unwrap();
                    let sum: i64 = w.iter().map(|&(_, _, c)| c).sum();
                    assert_eq!(sum, total, "window {xq},{yq} of {ew}x{eh}->{qw}x{qh}");
                    assert!(total > 0);
                    assert!(w.iter().all(|&(_, _, c)| c > 0));
                }
            }
        }
    }

    #[test]
    fn upscale_and_shape_errors() {
        let f = feature(16, 16, vec![0; 4]);
        assert!(matches!(
            estimate(&f, 17, 8),
            Err(Error::UpscaleUnsupported { .. })
        ));
        let broken = feature(16, 16, vec![0; 3]);
        assert!(matches!(
            estimate(&broken, 8, 8),
            Err(Error::ShapeMismatch(_))
        ));
    }
}

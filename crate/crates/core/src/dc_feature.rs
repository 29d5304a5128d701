//! The per-block identification feature and its parameter calibration.
//!
//! A quantized luminance DC value `dc[m]` with quantizer `q_dc` maps to
//!
//! ```text
//! v[m] = 0                                        if -th <= dc[m] <= th
//!        round(q_dc * dc[m] / delta) + sgn(dc[m]) otherwise
//! ```
//!
//! The dead zone `th` absorbs the sign instability that double compression
//! induces in small coefficients; `delta` re-quantizes the dequantized DC
//! value so databases built at different quality factors stay comparable.
//! The same formula serves enrollment and querying.
//!
//! The dead-zone test deliberately uses the *quantized* value: the cut-off
//! in dequantized units is `th * q_dc`, which is what makes a single `th`
//! work across quality factors.

use crate::error::{Error, Result};
use crate::jpeg_parse::DcPlane;
use crate::num::{ceil_div, div_round_half_away, sgn_i};

/// Feature-extraction parameters. Defaults are the calibrated values
/// `th = 14`, `delta = 50`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureParams {
    /// Dead-zone threshold on the quantized DC value, `>= 0`.
    pub th: u16,
    /// Re-quantization step for dequantized DC values, `> 0`.
    pub delta: u32,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams { th: 14, delta: 50 }
    }
}

impl FeatureParams {
    pub fn new(th: u16, delta: u32) -> Result<Self> {
        if delta == 0 {
            return Err(Error::InvalidParams("delta must be positive".into()));
        }
        Ok(FeatureParams { th, delta })
    }
}

/// Per-block integer feature of one image, raster order, together with the
/// parameters and pixel dimensions it was extracted under.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVector {
    pub params: FeatureParams,
    pub width_px: u32,
    pub height_px: u32,
    pub v: Vec<i32>,
}

impl FeatureVector {
    pub fn blocks_x(&self) -> u32 {
        ceil_div(self.width_px, 8)
    }

    pub fn blocks_y(&self) -> u32 {
        ceil_div(self.height_px, 8)
    }

    pub fn block_count(&self) -> usize {
        self.blocks_x() as usize * self.blocks_y() as usize
    }

    /// The components as reals, the form the matcher consumes.
    pub fn to_reals(&self) -> Vec<f64> {
        self.v.iter().map(|&x| x as f64).collect()
    }
}

/// Single-component form of the mapping.
pub fn feature_component(dc: i32, q_dc: u16, params: FeatureParams) -> i32 {
    if -(params.th as i32) <= dc && dc <= params.th as i32 {
        return 0;
    }
    let dequantized = q_dc as i64 * dc as i64;
    (div_round_half_away(dequantized, params.delta as i64) + sgn_i(dc as i64) as i64) as i32
}

/// Extracts the feature vector of a DC plane.
pub fn extract(plane: &DcPlane, params: FeatureParams) -> FeatureVector {
    let v = plane
        .dc
        .iter()
        .map(|&dc| feature_component(dc, plane.q_dc, params))
        .collect();
    FeatureVector {
        params,
        width_px: plane.width_px,
        height_px: plane.height_px,
        v,
    }
}

/// Which difference the `delta` calibration records. The feature divides
/// the *dequantized* DC by `delta`, so `Dequantized` is the default; the
/// quantized variant is kept selectable rather than silently guessed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeltaDiffMode {
    #[default]
    Dequantized,
    Quantized,
}

fn check_pair_shapes(pairs: &[(DcPlane, DcPlane)]) -> Result<()> {
    for (i, (a, b)) in pairs.iter().enumerate() {
        if a.dc.len() != b.dc.len() {
            return Err(Error::ShapeMismatch(format!(
                "pair {i}: {} vs {} blocks",
                a.dc.len(),
                b.dc.len()
            )));
        }
    }
    Ok(())
}

/// Calibrates the dead-zone threshold from (single-compressed,
/// double-compressed) plane pairs: over all block positions where both DC
/// values are nonzero with strictly opposite signs, the largest absolute
/// value observed. Returns 0 when no position qualifies.
pub fn calibrate_th(pairs: &[(DcPlane, DcPlane)]) -> Result<u16> {
    check_pair_shapes(pairs)?;
    let mut th = 0i32;
    for (single, double) in pairs {
        for (&a, &b) in single.dc.iter().zip(double.dc.iter()) {
            if a != 0 && b != 0 && (a < 0) != (b < 0) {
                th = th.max(a.abs().max(b.abs()));
            }
        }
    }
    Ok(th as u16)
}

/// Calibrates `delta` given a threshold: over all positions where both DC
/// values share a sign and both exceed `th` in magnitude, the largest
/// absolute difference (dequantized by default). Returns 0 when no
/// position qualifies.
pub fn calibrate_delta(pairs: &[(DcPlane, DcPlane)], th: u16) -> Result<u32> {
    calibrate_delta_with(pairs, th, DeltaDiffMode::default())
}

/// [`calibrate_delta`] with an explicit difference mode.
pub fn calibrate_delta_with(
    pairs: &[(DcPlane, DcPlane)],
    th: u16,
    mode: DeltaDiffMode,
) -> Result<u32> {
    check_pair_shapes(pairs)?;
    let th = th as i64;
    let mut delta = 0i64;
    for (single, double) in pairs {
        let (qa, qb) = (single.q_dc as i64, double.q_dc as i64);
        for (&a, &b) in single.dc.iter().zip(double.dc.iter()) {
            let (a, b) = (a as i64, b as i64);
            if a.signum() == b.signum() && a.abs() > th && b.abs() > th {
                let diff = match mode {
                    DeltaDiffMode::Dequantized => (qa * a - qb * b).abs(),
                    DeltaDiffMode::Quantized => (a - b).abs(),
                };
                delta = delta.max(diff);
            }
        }
    }
    Ok(delta as u32)
}

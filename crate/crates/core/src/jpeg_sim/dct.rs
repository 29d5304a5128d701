//! Separable floating-point 8x8 DCT-II and its inverse, with orthonormal
//! scaling so the (0,0) output equals one eighth of the block sum.

use std::sync::LazyLock;

/// `COS[u][x] = cos((2x + 1) * u * PI / 16)`.
static COS: LazyLock<[[f64; 8]; 8]> = LazyLock::new(|| {
    let mut t = [[0.0; 8]; 8];
    for (u, row) in t.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    t
});

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn scale(u: usize) -> f64 {
    if u == 0 {
        0.5 * INV_SQRT2
    } else {
        0.5
    }
}

/// Forward DCT of a level-shifted 8x8 block (row-major).
pub fn forward(block: &[f64; 64]) -> [f64; 64] {
    let cos = &*COS;
    let mut rows = [0.0f64; 64];
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += block[y * 8 + x] * cos[u][x];
            }
            rows[y * 8 + u] = acc * scale(u);
        }
    }
    let mut out = [0.0f64; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += rows[y * 8 + u] * cos[v][y];
            }
            out[v * 8 + u] = acc * scale(v);
        }
    }
    out
}

/// Inverse DCT back to level-shifted samples (row-major).
pub fn inverse(coeffs: &[f64; 64]) -> [f64; 64] {
    let cos = &*COS;
    let mut cols = [0.0f64; 64];
    for u in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += scale(v) * coeffs[v * 8 + u] * cos[v][y];
            }
            cols[y * 8 + u] = acc;
        }
    }
    let mut out = [0.0f64; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += scale(u) * cols[y * 8 + u] * cos[u][x];
            }
            out[y * 8 + x] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_is_eighth_of_block_sum() {
        let mut block = [0.0f64; 64];
        for (i, v) in block.iter_mut().enumerate() {
            *v = (i as f64 * 7.3).sin() * 100.0;
        }
        let sum: f64 = block.iter().sum();
        let out = forward(&block);
        assert!((out[0] - sum / 8.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_undoes_forward() {
        let mut block = [0.0f64; 64];
        for (i, v) in block.iter_mut().enumerate() {
            *v = ((i * 37 + 11) % 256) as f64 - 128.0;
        }
        let back = inverse(&forward(&block));
        for (a, b) in block.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_block_has_dc_only() {
        let block = [-13.0f64; 64];
        let out = forward(&block);
        assert!((out[0] - (-13.0 * 8.0)).abs() < 1e-9);
        for &c in &out[1..] {
            assert!(c.abs() < 1e-9);
        }
    }
}

//! Shared rounding conventions.
//!
//! Every place the scheme says "round" — quantization, feature extraction,
//! the area resizer — means round-half-away-from-zero. Keeping the helpers
//! in one module keeps the whole repo on the same convention.

/// Rounds the exact rational `num / den` half away from zero. `den` must be
/// positive; `num` may be negative.
pub fn div_round_half_away(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0, "denominator must be positive");
    if num >= 0 {
        (num + den / 2) / den
    } else {
        -((-num + den / 2) / den)
    }
}

/// Round-half-away-from-zero for reals. `f64::round` already implements the
/// convention; the alias exists so call sites name the repo-wide rule.
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Sign of an integer in {-1, 0, 1}.
pub fn sgn_i(value: i64) -> i32 {
    value.signum() as i32
}

/// Sign of a real in {-1, 0, 1}; both zeroes map to 0.
pub fn sgn_f(value: f64) -> i32 {
    if value > 0.0 {
        1
    } else if value < 0.0 {
        -1
    } else {
        0
    }
}

/// Ceiling of `a / b` for positive integers.
pub fn ceil_div(a: u32, b: u32) -> u32 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}

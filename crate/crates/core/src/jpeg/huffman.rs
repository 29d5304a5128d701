//! Canonical Huffman code handling for baseline JPEG (T.81 Annex C and
//! F.2.2.3): code assignment for encoding and the MINCODE/MAXCODE/VALPTR
//! decode procedure.

use crate::error::{Error, Result};

/// Encoder-side table: code word and length per symbol value.
pub struct EncodeTable {
    /// Indexed by symbol; `(code, len)` with `len == 0` meaning "no code".
    codes: [(u16, u8); 256],
}

impl EncodeTable {
    /// Assigns canonical codes from the 16 length counts and the symbol list
    /// in code order (T.81 C.2).
    pub fn build(bits: &[u8; 16], values: &[u8]) -> Self {
        let mut codes = [(0u16, 0u8); 256];
        let mut code = 0u32;
        let mut k = 0usize;
        for (len_minus_1, &count) in bits.iter().enumerate() {
            for _ in 0..count {
                codes[values[k] as usize] = (code as u16, len_minus_1 as u8 + 1);
                code += 1;
                k += 1;
            }
            code <<= 1;
        }
        EncodeTable { codes }
    }

    pub fn code(&self, symbol: u8) -> (u16, u8) {
        let entry = self.codes[symbol as usize];
        debug_assert!(entry.1 > 0, "symbol {symbol:#04x} has no code");
        entry
    }
}

/// Decoder-side table following F.2.2.3.
pub struct DecodeTable {
    mincode: [i32; 17],
    /// `-1` at lengths with no codes.
    maxcode: [i32; 17],
    valptr: [usize; 17],
    values: Vec<u8>,
}

impl DecodeTable {
    /// Builds the decode tables from a DHT payload. Rejects length counts
    /// that overflow the code space or the 256-symbol limit.
    pub fn build(bits: &[u8; 16], values: Vec<u8>) -> Result<Self> {
        let total: usize = bits.iter().map(|&b| b as usize).sum();
        if total == 0 || total > 256 || total != values.len() {
            return Err(Error::CorruptStream(format!(
                "huffman table declares {total} codes but carries {}",
                values.len()
            )));
        }
        let mut mincode = [0i32; 17];
        let mut maxcode = [-1i32; 17];
        let mut valptr = [0usize; 17];
        let mut code = 0i64;
        let mut k = 0usize;
        for len in 1..=16usize {
            let count = bits[len - 1] as i64;
            if count > 0 {
                valptr[len] = k;
                mincode[len] = code as i32;
                code += count;
                if code > (1i64 << len) {
                    return Err(Error::CorruptStream(
                        "huffman table overflows its code space".into(),
                    ));
                }
                maxcode[len] = (code - 1) as i32;
                k += count as usize;
            }
            code <<= 1;
        }
        Ok(DecodeTable {
            mincode,
            maxcode,
            valptr,
            values,
        })
    }

    /// Decodes one symbol, pulling bits via `next_bit`.
    pub fn decode(&self, mut next_bit: impl FnMut() -> Result<u32>) -> Result<u8> {
        let mut code = 0i32;
        for len in 1..=16usize {
            code = (code << 1) | next_bit()? as i32;
            if self.maxcode[len] >= 0 && code <= self.maxcode[len] && code >= self.mincode[len] {
                let idx = self.valptr[len] + (code - self.mincode[len]) as usize;
                return Ok(self.values[idx]);
            }
        }
        Err(Error::CorruptStream(
            "huffman code with no table entry".into(),
        ))
    }
}

/// Sign-extends the `size`-bit magnitude bits of a coefficient
/// (T.81 F.2.2.1 EXTEND).
pub fn extend(value: u32, size: u8) -> i32 {
    debug_assert!(size > 0 && size < 16);
    if (value as i32) < (1 << (size - 1)) {
        value as i32 - (1 << size) + 1
    } else {
        value as i32
    }
}

/// Category (bit size) of a DPCM difference or AC value, and the raw bits
/// that encode it (T.81 F.1.2.1.1, F.1.4.1).
pub fn magnitude_bits(value: i32) -> (u8, u16) {
    if value == 0 {
        return (0, 0);
    }
    let abs = value.unsigned_abs();
    let size = 32 - abs.leading_zeros() as u8;
    let bits = if value < 0 {
        // one's complement of the magnitude
        (value - 1) as u16 & ((1u32 << size) - 1) as u16
    } else {
        value as u16
    };
    (size, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::{STD_AC_LUMA, STD_DC_LUMA};

    #[test]
    fn canonical_codes_match_t81_examples() {
        // First DC luminance codes: symbol 0 -> 00 (2 bits), 1 -> 010, ...
        let table = EncodeTable::build(&STD_DC_LUMA.bits, STD_DC_LUMA.values);
        assert_eq!(table.code(0), (0b00, 2));
        assert_eq!(table.code(1), (0b010, 3));
        assert_eq!(table.code(5), (0b110, 3));
        assert_eq!(table.code(6), (0b1110, 4));
        assert_eq!(table.code(11), (0b111111110, 9));
    }

    #[test]
    fn decode_inverts_encode() {
        let enc = EncodeTable::build(&STD_AC_LUMA.bits, STD_AC_LUMA.values);
        let dec = DecodeTable::build(&STD_AC_LUMA.bits, STD_AC_LUMA.values.to_vec()).unwrap();
        for &symbol in STD_AC_LUMA.values {
            let (code, len) = enc.code(symbol);
            let mut remaining = len;
            let decoded = dec
                .decode(|| {
                    remaining -= 1;
                    Ok((code >> remaining) as u32 & 1)
                })
                .unwrap();
            assert_eq!(decoded, symbol);
            assert_eq!(remaining, 0);
        }
    }

    #[test]
    fn extend_matches_magnitude_bits() {
        for value in -2047i32..=2047 {
            if value == 0 {
                continue;
            }
            let (size, bits) = magnitude_bits(value);
            assert_eq!(extend(bits as u32, size), value, "value {value}");
        }
    }

    #[test]
    fn overfull_table_rejected() {
        let mut bits = [0u8; 16];
        bits[0] = 3; // three 1-bit codes cannot exist
        assert!(DecodeTable::build(&bits, vec![0, 1, 2]).is_err());
    }
}

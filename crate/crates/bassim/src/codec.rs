//! Fixed-width finite-bit approximation of coefficient estimates.
//!
//! A codeword is `sign bit + big-endian magnitude` at fixed-point scale
//! `2^e`, `e = ceil(D log2 N)`, truncated toward zero. Width is always
//! `ceil((D + 1/2) log2 N) + 1` bits, so a message is a plain concatenation
//! with no length prefixes. Estimates larger than `sqrt(N)` in magnitude are
//! replaced by the all-zeros codeword; receivers cannot (and need not)
//! distinguish that sentinel from a true zero.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("cannot encode non-finite value")]
    NonFinite,
    #[error("codeword width {got} does not match expected width {want}")]
    WidthMismatch { want: u32, got: u32 },
    #[error("message exhausted: needed {want} bits, {got} remain")]
    OutOfBits { want: u32, got: usize },
}

/// One fixed-width codeword. `width` counts the sign bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Codeword {
    non_negative: bool,
    magnitude: u64,
    width: u32,
}

impl Codeword {
    /// The canonical zero / truncation-sentinel codeword: every bit clear.
    pub fn zero(width: u32) -> Self {
        Self {
            non_negative: false,
            magnitude: 0,
            width,
        }
    }

    pub fn is_all_zeros(&self) -> bool {
        !self.non_negative && self.magnitude == 0
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Wire bits, most significant first: bit 0 is the sign (1 =
    /// non-negative), bits `1..width` the big-endian magnitude.
    pub fn bits(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.width as usize);
        out.push(self.non_negative);
        for i in (0..self.width - 1).rev() {
            out.push(self.magnitude >> i & 1 == 1);
        }
        out
    }
}

/// Codeword width in bits for sample size `total` and precision exponent `d`.
pub fn codeword_width(total: u64, d: f64) -> u32 {
    assert!(total >= 4 && d > 0.0);
    let width = ((d + 0.5) * (total as f64).log2()).ceil() as u32 + 1;
    assert!(width <= 63, "codeword width {width} exceeds u64 magnitude");
    width
}

/// Fixed-point scale exponent `e = ceil(d log2 total)`.
pub fn scale_exponent(total: u64, d: f64) -> u32 {
    (d * (total as f64).log2()).ceil() as u32
}

/// Encode `x` for a network of `total` samples at precision exponent `d`.
///
/// `|x| > sqrt(total)` yields the all-zeros sentinel. Otherwise the magnitude
/// is `floor(|x| * 2^e)`, saturated at the width's largest representable
/// integer. When `log2(total)` is an even integer and `d = 1/2` (every size
/// the protocol transmits under), the layout is exact: saturation can only
/// trigger at `|x| = sqrt(total)` itself and the decode error stays within
/// `total^{-d}`. Other `(total, d)` combinations may clip values near the
/// top of the range because the spec'd width cannot hold both the integer
/// and fractional parts there.
pub fn encode(x: f64, total: u64, d: f64) -> Result<Codeword, CodecError> {
    if !x.is_finite() {
        return Err(CodecError::NonFinite);
    }
    let width = codeword_width(total, d);
    if x.abs() > (total as f64).sqrt() {
        return Ok(Codeword::zero(width));
    }
    let scale = 2f64.powi(scale_exponent(total, d) as i32);
    let max_magnitude = (1u64 << (width - 1)) - 1;
    let magnitude = ((x.abs() * scale).floor() as u64).min(max_magnitude);
    if magnitude == 0 {
        // Canonical zero: covers x = -0.0 and every |x| below one grid step.
        return Ok(Codeword::zero(width));
    }
    Ok(Codeword {
        non_negative: x >= 0.0,
        magnitude,
        width,
    })
}

/// Decode a codeword produced for the same `(total, d)` parameters.
pub fn decode(cw: &Codeword, total: u64, d: f64) -> Result<f64, CodecError> {
    let want = codeword_width(total, d);
    if cw.width != want {
        return Err(CodecError::WidthMismatch {
            want,
            got: cw.width,
        });
    }
    if cw.is_all_zeros() {
        return Ok(0.0);
    }
    let scale = 2f64.powi(scale_exponent(total, d) as i32);
    let value = cw.magnitude as f64 / scale;
    Ok(if cw.non_negative { value } else { -value })
}

/// Bit sink for message framing: bits are packed most-significant-first into
/// bytes; the final byte is zero-padded only at the message boundary.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bit(&mut self, bit: bool) {
        let offset = self.bit_len % 8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 1 << (7 - offset);
        }
        self.bit_len += 1;
    }

    pub fn push_codeword(&mut self, cw: &Codeword) {
        for bit in cw.bits() {
            self.push_bit(bit);
        }
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn into_parts(self) -> (Vec<u8>, usize) {
        (self.bytes, self.bit_len)
    }
}

/// Mirror of [`BitWriter`] for reading codewords back out of a message.
#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: usize,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], bit_len: usize) -> Self {
        Self {
            bytes,
            bit_len,
            pos: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.bit_len - self.pos
    }

    fn read_bit(&mut self) -> Option<bool> {
        if self.pos >= self.bit_len {
            return None;
        }
        let byte = self.bytes[self.pos / 8];
        let bit = byte >> (7 - self.pos % 8) & 1 == 1;
        self.pos += 1;
        Some(bit)
    }

    pub fn read_codeword(&mut self, width: u32) -> Result<Codeword, CodecError> {
        if self.remaining() < width as usize {
            return Err(CodecError::OutOfBits {
                want: width,
                got: self.remaining(),
            });
        }
        let non_negative = self.read_bit().unwrap();
        let mut magnitude = 0u64;
        for _ in 0..width - 1 {
            magnitude = magnitude << 1 | u64::from(self.read_bit().unwrap());
        }
        Ok(Codeword {
            non_negative,
            magnitude,
            width,
        })
    }
}

//! Base-k text codec: every byte becomes a fixed-width group of base-k
//! digits, most significant first.

use crate::{QsdcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageCodec {
    base: usize,
    digits_per_byte: usize,
}

/// Smallest `d` with `k^d ≥ 256`. For `k = 8` this is the familiar
/// three-digit octal code.
pub fn digits_per_byte(k: usize) -> Result<usize> {
    if k < 2 {
        return Err(QsdcError::ParameterDomain {
            name: "k",
            value: k as f64,
            expected: "k >= 2",
        });
    }
    let mut d = 0;
    let mut span = 1usize;
    while span < 256 {
        span *= k;
        d += 1;
    }
    Ok(d)
}

impl MessageCodec {
    pub fn new(base: usize) -> Result<Self> {
        Ok(Self {
            base,
            digits_per_byte: digits_per_byte(base)?,
        })
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn digits_per_byte(&self) -> usize {
        self.digits_per_byte
    }

    pub fn encode(&self, bytes: &[u8]) -> Vec<usize> {
        let mut out = Vec::with_capacity(bytes.len() * self.digits_per_byte);
        for &b in bytes {
            let start = out.len();
            let mut v = b as usize;
            for _ in 0..self.digits_per_byte {
                out.push(v % self.base);
                v /= self.base;
            }
            out[start..].reverse();
        }
        out
    }

    pub fn decode(&self, digits: &[usize]) -> Result<Vec<u8>> {
        if !digits.len().is_multiple_of(self.digits_per_byte) {
            return Err(QsdcError::Shape {
                expected: digits.len().div_ceil(self.digits_per_byte) * self.digits_per_byte,
                actual: digits.len(),
            });
        }
        digits
            .chunks(self.digits_per_byte)
            .map(|group| {
                let mut v = 0usize;
                for &d in group {
                    if d >= self.base {
                        return Err(QsdcError::Domain(format!(
                            "digit {d} is not a base-{} digit",
                            self.base
                        )));
                    }
                    v = v * self.base + d;
                }
                u8::try_from(v)
                    .map_err(|_| QsdcError::Domain(format!("digit group decodes to {v} > 255")))
            })
            .collect()
    }

    /// Number of digits needed for `bytes` bytes.
    pub fn encoded_len(&self, bytes: usize) -> usize {
        bytes * self.digits_per_byte
    }
}

pub fn encode_message_text(text: &[u8], k: usize) -> Result<Vec<usize>> {
    Ok(MessageCodec::new(k)?.encode(text))
}

pub fn decode_message_text(digits: &[usize], k: usize) -> Result<Vec<u8>> {
    MessageCodec::new(k)?.decode(digits)
}

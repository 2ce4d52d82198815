//! Bit-level payload representation.
//!
//! Everything in this crate that speaks "bits" uses MSB-first byte order:
//! bit 0 of a [`BitString`] built from bytes is the most significant bit of
//! the first byte.

use std::fmt;

/// An ordered sequence of bits.
///
/// Backed by one `bool` per bit; payloads here are hundreds of bits, so
/// compactness is irrelevant and indexing clarity wins.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    /// Creates an empty bit string.
    pub fn new() -> Self {
        Self { bits: Vec::new() }
    }

    /// Creates a bit string of `len` zero bits.
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    /// Unpacks bytes MSB-first: `0xA0` becomes `10100000`.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for &byte in bytes {
            for shift in (0..8).rev() {
                bits.push((byte >> shift) & 1 == 1);
            }
        }
        Self { bits }
    }

    /// Parses a string of `'0'`/`'1'` characters; any other character is an error.
    pub fn from_01_str(s: &str) -> Result<Self, char> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => return Err(other),
            }
        }
        Ok(Self { bits })
    }

    /// Packs back into bytes MSB-first, zero-padding a trailing partial byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.bits.len().div_ceil(8));
        for chunk in self.bits.chunks(8) {
            let mut byte = 0u8;
            for (i, &bit) in chunk.iter().enumerate() {
                if bit {
                    byte |= 1 << (7 - i);
                }
            }
            out.push(byte);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends all bits of `other`.
    pub fn extend_from(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    /// Pads with zero bits until `len` is a multiple of `n`. No-op if it already is.
    pub fn pad_to_multiple_of(&mut self, n: usize) {
        while !self.bits.len().is_multiple_of(n) {
            self.bits.push(false);
        }
    }

    pub fn get(&self, idx: usize) -> Option<bool> {
        self.bits.get(idx).copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    /// Sub-range copy; panics if out of bounds like slice indexing does.
    pub fn slice(&self, range: std::ops::Range<usize>) -> BitString {
        Self { bits: self.bits[range].to_vec() }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// Number of positions where `self` and `other` differ over the shorter length.
    pub fn hamming_prefix(&self, other: &BitString) -> usize {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for BitString {
    type Output = bool;

    fn index(&self, idx: usize) -> &bool {
        &self.bits[idx]
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        Self { bits: iter.into_iter().collect() }
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self { bits }
    }
}

//! Explicit-width bit strings.
//!
//! Protocol fields are concatenated at bit granularity (big-endian, most
//! significant bit first) and XOR operands of different widths are
//! normalized by zero-extending on the left. [`BitString`] records its length
//! exactly and never truncates implicitly.

use std::fmt;
use std::ops::Range;

use bitvec::prelude::*;

type Bits = BitVec<u8, Msb0>;

/// An arbitrary-length bit sequence with an exact recorded width.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString(Bits);

impl BitString {
    pub fn new() -> Self {
        Self(Bits::new())
    }

    pub fn zeros(len: usize) -> Self {
        Self(bitvec![u8, Msb0; 0; len])
    }

    /// Every byte contributes eight bits, most significant first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self(Bits::from_slice(bytes))
    }

    /// The low `width` bits of `value`, most significant first.
    ///
    /// Panics if `width > 64` or `value` does not fit in `width` bits.
    pub fn from_uint(value: u64, width: usize) -> Self {
        assert!(width <= 64, "width {width} exceeds 64 bits");
        assert!(
            width == 64 || value >> width == 0,
            "value {value:#x} does not fit in {width} bits"
        );
        let mut bits = Bits::with_capacity(width);
        for i in (0..width).rev() {
            bits.push((value >> i) & 1 == 1);
        }
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn flip(&mut self, index: usize) {
        let current = self.0[index];
        self.0.set(index, !current);
    }

    pub fn is_zero(&self) -> bool {
        self.0.not_any()
    }

    pub fn append(&mut self, other: &BitString) {
        self.0.extend_from_bitslice(&other.0);
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> Self {
        let mut out = Self::new();
        for part in parts {
            out.append(part);
        }
        out
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        Self(self.0[range].to_bitvec())
    }

    /// Reads `range` as an unsigned big-endian integer. The range must be at
    /// most 64 bits wide.
    pub fn read_uint(&self, range: Range<usize>) -> u64 {
        assert!(range.len() <= 64);
        self.0[range]
            .iter()
            .fold(0u64, |acc, bit| (acc << 1) | u64::from(*bit))
    }

    /// Zero-extends on the left to `width`. Widths smaller than the current
    /// length are rejected rather than truncated.
    pub fn zero_extend(&self, width: usize) -> Self {
        assert!(width >= self.len(), "zero_extend would truncate");
        let mut out = Self::zeros(width - self.len());
        out.append(self);
        out
    }

    /// Zero-pads on the right to `width`.
    pub fn pad_right(&self, width: usize) -> Self {
        assert!(width >= self.len(), "pad_right would truncate");
        let mut out = self.clone();
        out.0.resize(width, false);
        out
    }

    /// Byte view after left zero-padding to a multiple of eight bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let padded = self.zero_extend(self.len().div_ceil(8) * 8);
        padded.0.into_vec()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().by_vals()
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({} bits, 0x{})", self.len(), self.to_hex())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Sequential field reader over a bit string.
#[derive(Debug)]
pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    /// Returns `None` when fewer than `width` bits remain.
    pub fn take(&mut self, width: usize) -> Option<BitString> {
        if self.remaining() < width {
            return None;
        }
        let out = self.bits.slice(self.pos..self.pos + width);
        self.pos += width;
        Some(out)
    }

    pub fn take_uint(&mut self, width: usize) -> Option<u64> {
        if self.remaining() < width {
            return None;
        }
        let out = self.bits.read_uint(self.pos..self.pos + width);
        self.pos += width;
        Some(out)
    }

    pub fn take_bytes<const N: usize>(&mut self) -> Option<[u8; N]> {
        let bits = self.take(N * 8)?;
        let mut out = [0u8; N];
        out.copy_from_slice(&bits.to_bytes());
        Some(out)
    }
}

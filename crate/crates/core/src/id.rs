//! Fixed-width identifiers and the XOR metric.
//!
//! Ids are stored as four little-endian 64-bit limbs, which covers every
//! bit-length up to 256. The bit-length travels with the value so that ids of
//! different widths can never be silently compared.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::IdError;

/// Largest supported identifier width.
pub const MAX_BITS: u32 = 256;

const LIMBS: usize = 4;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Bits {
    limbs: [u64; LIMBS],
}

impl Bits {
    const ZERO: Bits = Bits { limbs: [0; LIMBS] };

    fn cmp_value(&self, other: &Bits) -> Ordering {
        let [a0, a1, a2, a3] = self.limbs;
        let [b0, b1, b2, b3] = other.limbs;
        (a3, a2, a1, a0).cmp(&(b3, b2, b1, b0))
    }

    fn xor(&self, other: &Bits) -> Bits {
        let mut limbs = [0u64; LIMBS];
        for (i, limb) in limbs.iter_mut().enumerate() {
            *limb = self.limbs[i] ^ other.limbs[i];
        }
        Bits { limbs }
    }

    /// Index of the highest set bit, or `None` for zero.
    fn highest_bit(&self) -> Option<u32> {
        for i in (0..LIMBS).rev() {
            if self.limbs[i] != 0 {
                return Some(i as u32 * 64 + 63 - self.limbs[i].leading_zeros());
            }
        }
        None
    }

    fn bit(&self, i: u32) -> bool {
        (self.limbs[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    fn set_bit(&mut self, i: u32) {
        self.limbs[(i / 64) as usize] |= 1 << (i % 64);
    }

    /// Keeps bits `0..width` and clears the rest.
    fn mask(&mut self, width: u32) {
        for (i, limb) in self.limbs.iter_mut().enumerate() {
            let lo = i as u32 * 64;
            if width <= lo {
                *limb = 0;
            } else if width < lo + 64 {
                *limb &= (1u64 << (width - lo)) - 1;
            }
        }
    }

    fn random<R: Rng + ?Sized>(rng: &mut R, width: u32) -> Bits {
        let mut limbs = [0u64; LIMBS];
        let used = width.div_ceil(64) as usize;
        for limb in limbs.iter_mut().take(used) {
            *limb = rng.gen();
        }
        let mut bits = Bits { limbs };
        bits.mask(width);
        bits
    }
}

fn check_width(bits: u32) -> Result<(), IdError> {
    if bits == 0 || bits > MAX_BITS {
        return Err(IdError::UnsupportedWidth(bits));
    }
    Ok(())
}

/// A node or data-object identifier of exactly `bits` bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    value: Bits,
    bits: u16,
}

/// XOR distance between two ids of the same width.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Distance {
    value: Bits,
    bits: u16,
}

impl NodeId {
    pub fn zero(bits: u32) -> Result<NodeId, IdError> {
        check_width(bits)?;
        Ok(NodeId { value: Bits::ZERO, bits: bits as u16 })
    }

    /// Builds an id from a small integer; fails if it does not fit in `bits`.
    pub fn from_u64(value: u64, bits: u32) -> Result<NodeId, IdError> {
        NodeId::from_u128(value as u128, bits)
    }

    pub fn from_u128(value: u128, bits: u32) -> Result<NodeId, IdError> {
        check_width(bits)?;
        let mut v = Bits { limbs: [value as u64, (value >> 64) as u64, 0, 0] };
        let before = v;
        v.mask(bits);
        if v != before {
            return Err(IdError::OutOfRange { bits });
        }
        Ok(NodeId { value: v, bits: bits as u16 })
    }

    /// Little-endian limbs; bits above the width must be clear.
    pub fn from_limbs(limbs: [u64; 4], bits: u32) -> Result<NodeId, IdError> {
        check_width(bits)?;
        let mut v = Bits { limbs };
        v.mask(bits);
        if v.limbs != limbs {
            return Err(IdError::OutOfRange { bits });
        }
        Ok(NodeId { value: v, bits: bits as u16 })
    }

    pub fn limbs(&self) -> [u64; 4] {
        self.value.limbs
    }

    pub fn bits(&self) -> u32 {
        self.bits as u32
    }

    /// Low 64 bits of the value.
    pub fn low_u64(&self) -> u64 {
        self.value.limbs[0]
    }

    /// Uniform draw over `[0, 2^bits)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, bits: u32) -> Result<NodeId, IdError> {
        check_width(bits)?;
        Ok(NodeId { value: Bits::random(rng, bits), bits: bits as u16 })
    }

    /// Uniform draw from the range of bucket `index` as seen from `self`,
    /// i.e. every result satisfies `2^index <= dist(self, id) < 2^(index+1)`.
    pub fn random_in_bucket<R: Rng + ?Sized>(
        &self,
        index: u32,
        rng: &mut R,
    ) -> Result<NodeId, IdError> {
        if index >= self.bits() {
            return Err(IdError::BucketOutOfRange { index, bits: self.bits() });
        }
        let mut offset = Bits::random(rng, index);
        offset.set_bit(index);
        Ok(NodeId { value: self.value.xor(&offset), bits: self.bits })
    }

    pub fn distance(&self, other: &NodeId) -> Result<Distance, IdError> {
        if self.bits != other.bits {
            return Err(IdError::WidthMismatch { left: self.bits(), right: other.bits() });
        }
        Ok(self.distance_unchecked(other))
    }

    /// Distance without the width check. Callers guarantee equal widths.
    #[inline]
    pub(crate) fn distance_unchecked(&self, other: &NodeId) -> Distance {
        debug_assert_eq!(self.bits, other.bits);
        Distance { value: self.value.xor(&other.value), bits: self.bits }
    }

    /// The id at distance `d` from `self`.
    #[inline]
    pub(crate) fn offset(&self, d: &Distance) -> NodeId {
        debug_assert_eq!(self.bits, d.bits);
        NodeId { value: self.value.xor(&d.value), bits: self.bits }
    }

    /// Index of the k-bucket that `other` falls into from `self`'s point of view.
    pub fn bucket_index(&self, other: &NodeId) -> Result<u32, IdError> {
        let dist = self.distance(other)?;
        dist.bucket().ok_or(IdError::SameId)
    }

    pub fn bit(&self, i: u32) -> bool {
        i < self.bits() && self.value.bit(i)
    }

    /// Lowercase hexadecimal, zero-padded to `ceil(bits / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.bits().div_ceil(4) as usize;
        let mut out = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let limb = self.value.limbs[d / 16];
            let nibble = (limb >> ((d % 16) * 4)) & 0xf;
            out.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        out
    }

    /// Parses the padded hex form produced by [`NodeId::to_hex`].
    pub fn from_hex(text: &str, bits: u32) -> Result<NodeId, IdError> {
        check_width(bits)?;
        let digits = bits.div_ceil(4) as usize;
        if text.len() != digits {
            return Err(IdError::BadHex(text.to_string()));
        }
        let mut limbs = [0u64; LIMBS];
        for (pos, ch) in text.chars().rev().enumerate() {
            let nibble = ch
                .to_digit(16)
                .filter(|_| !ch.is_ascii_uppercase())
                .ok_or_else(|| IdError::BadHex(text.to_string()))?;
            limbs[pos / 16] |= (nibble as u64) << ((pos % 16) * 4);
        }
        NodeId::from_limbs(limbs, bits).map_err(|_| IdError::BadHex(text.to_string()))
    }
}

impl Distance {
    pub fn bits(&self) -> u32 {
        self.bits as u32
    }

    pub fn is_zero(&self) -> bool {
        self.value == Bits::ZERO
    }

    /// `floor(log2(self))`, or `None` for a zero distance.
    pub fn bucket(&self) -> Option<u32> {
        self.value.highest_bit()
    }

    pub fn low_u64(&self) -> u64 {
        self.value.limbs[0]
    }

    pub fn limbs(&self) -> [u64; 4] {
        self.value.limbs
    }

    pub fn bit(&self, i: u32) -> bool {
        i < self.bits() && self.value.bit(i)
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bits.cmp(&other.bits).then_with(|| self.value.cmp_value(&other.value))
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Distance {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bits.cmp(&other.bits).then_with(|| self.value.cmp_value(&other.value))
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", self.to_hex())
    }
}

impl fmt::Debug for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = NodeId { value: self.value, bits: self.bits };
        write!(f, "Distance({})", id.to_hex())
    }
}

impl FromStr for NodeId {
    type Err = IdError;

    /// Infers the width from the digit count (4 bits per digit).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeId::from_hex(s, s.len() as u32 * 4)
    }
}

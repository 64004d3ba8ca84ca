//! Fixed-width bit strings over `{0,1}^p`.
//!
//! A [`BitPattern`] holds one flag per Bob. Bob 1 is the most significant
//! bit, so the numeric value reads the same as the rendered string
//! (`"10"` is Bob 1 set, value 2) and ascending numeric order is ascending
//! lexicographic order of the strings.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, ScadError};

/// Largest party count for which the `2^p` enumeration is supported.
pub const MAX_PARTIES: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitPattern {
    value: u32,
    width: u8,
}

impl BitPattern {
    pub fn new(value: u32, width: usize) -> Result<Self> {
        check_width(width)?;
        if u64::from(value) >= 1u64 << width {
            return Err(ScadError::Domain {
                what: "pattern value",
                value: value as f64,
                range: "[0, 2^p)",
            });
        }
        Ok(Self {
            value,
            width: width as u8,
        })
    }

    pub fn zero(width: usize) -> Self {
        debug_assert!((1..=MAX_PARTIES).contains(&width));
        Self {
            value: 0,
            width: width as u8,
        }
    }

    pub fn ones(width: usize) -> Self {
        debug_assert!((1..=MAX_PARTIES).contains(&width));
        Self {
            value: full_mask(width),
            width: width as u8,
        }
    }

    /// Pattern with only Bob `bob` (zero based) set.
    pub fn single(bob: usize, width: usize) -> Result<Self> {
        check_width(width)?;
        if bob >= width {
            return Err(ScadError::Index {
                index: bob,
                len: width,
            });
        }
        Ok(Self {
            value: 1 << (width - 1 - bob),
            width: width as u8,
        })
    }

    #[inline]
    pub fn value(self) -> u32 {
        self.value
    }

    #[inline]
    pub fn width(self) -> usize {
        self.width as usize
    }

    /// Flag of Bob `bob` (zero based, Bob 1 is index 0).
    #[inline]
    pub fn bit(self, bob: usize) -> bool {
        debug_assert!(bob < self.width());
        (self.value >> (self.width() - 1 - bob)) & 1 == 1
    }

    pub fn with_bit(self, bob: usize, on: bool) -> Self {
        let m = 1 << (self.width() - 1 - bob);
        let value = if on { self.value | m } else { self.value & !m };
        Self { value, ..self }
    }

    #[inline]
    pub fn popcount(self) -> u32 {
        self.value.count_ones()
    }

    #[inline]
    pub fn complement(self) -> Self {
        Self {
            value: !self.value & full_mask(self.width()),
            ..self
        }
    }

    #[inline]
    pub fn xor(self, other: Self) -> Self {
        debug_assert_eq!(self.width, other.width);
        Self {
            value: self.value ^ other.value,
            ..self
        }
    }

    #[inline]
    pub fn and(self, other: Self) -> Self {
        debug_assert_eq!(self.width, other.width);
        Self {
            value: self.value & other.value,
            ..self
        }
    }

    /// Moves the flag of Bob `i` to position `perm[i]`.
    pub fn permute(self, perm: &[usize]) -> Self {
        debug_assert_eq!(perm.len(), self.width());
        perm.iter()
            .enumerate()
            .fold(Self::zero(self.width()), |acc, (i, &dst)| {
                acc.with_bit(dst, self.bit(i))
            })
    }

    /// Reads a bit string with Bob 1 leftmost.
    pub fn parse(s: &str, width: usize) -> Result<Self> {
        let s = s.trim();
        if s.len() != width || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(ScadError::BitString(s.to_string()));
        }
        let value = u32::from_str_radix(s, 2).map_err(|_| ScadError::BitString(s.to_string()))?;
        Self::new(value, width)
    }
}

impl FromStr for BitPattern {
    type Err = ScadError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::parse(s, s.len())
    }
}

impl fmt::Display for BitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.value, width = self.width())
    }
}

impl fmt::Debug for BitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitPattern({self})")
    }
}

#[inline]
fn full_mask(width: usize) -> u32 {
    ((1u64 << width) - 1) as u32
}

/// Party counts from 1 to [`MAX_PARTIES`].
pub fn check_width(width: usize) -> Result<()> {
    if (1..=MAX_PARTIES).contains(&width) {
        Ok(())
    } else {
        Err(ScadError::PartyCount(width))
    }
}

/// All `2^p` patterns in ascending numeric order.
pub fn enumerate_patterns(p: usize) -> Result<impl ExactSizeIterator<Item = BitPattern>> {
    check_width(p)?;
    Ok((0..(1u32 << p)).map(move |value| BitPattern {
        value,
        width: p as u8,
    }))
}

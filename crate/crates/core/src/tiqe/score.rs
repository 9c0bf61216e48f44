//! Fixed-point quality scores.
//!
//! Scores live in [0, 1] at a decimal scale of 10^-8, so every score the
//! protocol quotes (rubric steps of 0.25, confusion rates, thresholds,
//! configured alphas like 0.8) is represented exactly and score arithmetic
//! is pure integer work. Serialized as an 8-decimal string.

use crate::amount::{round_half_down, Ratio};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Raw units per 1.0.
pub const SCORE_SCALE: u64 = 100_000_000;

/// Normalized quality score in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct QualityScore {
    raw: u64,
}

impl QualityScore {
    pub const ZERO: Self = Self { raw: 0 };
    pub const ONE: Self = Self { raw: SCORE_SCALE };

    /// Clamps to [0, 1].
    pub fn from_raw(raw: u64) -> Self {
        Self {
            raw: raw.min(SCORE_SCALE),
        }
    }

    pub fn raw(self) -> u64 {
        self.raw
    }

    /// `num / den` rounded half-down into score units, clamped to 1.
    pub fn from_fraction(num: u64, den: u64) -> Self {
        assert!(den > 0, "fraction denominator must be positive");
        let raw = round_half_down(num as u128 * SCORE_SCALE as u128, den as u128);
        Self::from_raw(raw.min(SCORE_SCALE as u128) as u64)
    }

    /// Parse a decimal in [0, 1] (config boundary). Exact for at most eight
    /// decimal places.
    pub fn from_decimal_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return None;
        }
        Some(Self {
            raw: (value * SCORE_SCALE as f64).round() as u64,
        })
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / SCORE_SCALE as f64
    }

    pub fn abs_diff(self, other: Self) -> Self {
        Self {
            raw: self.raw.abs_diff(other.raw),
        }
    }

    pub fn saturating_add(self, other: Self) -> Self {
        Self::from_raw(self.raw.saturating_add(other.raw))
    }

    pub fn saturating_sub(self, other: Self) -> Self {
        Self {
            raw: self.raw.saturating_sub(other.raw),
        }
    }

    /// Convex blend `lambda * self + (1 - lambda) * other` in one division.
    pub fn blend(self, lambda: Ratio, other: Self) -> Self {
        debug_assert!(lambda.is_fraction());
        let num = self.raw as u128 * lambda.num as u128
            + other.raw as u128 * lambda.complement_num() as u128;
        Self::from_raw(round_half_down(num, lambda.den as u128) as u64)
    }

    /// Mean of two scores, ties rounded down.
    pub fn midpoint(self, other: Self) -> Self {
        Self::from_raw(round_half_down(self.raw as u128 + other.raw as u128, 2) as u64)
    }
}

impl fmt::Display for QualityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:08}", self.raw / SCORE_SCALE, self.raw % SCORE_SCALE)
    }
}

impl Serialize for QualityScore {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QualityScore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let (int_part, frac_part) = text
            .split_once('.')
            .ok_or_else(|| D::Error::custom("expected a decimal score"))?;
        if frac_part.len() != 8 || frac_part.bytes().any(|b| !b.is_ascii_digit()) {
            return Err(D::Error::custom("expected eight fractional digits"));
        }
        let whole: u64 = int_part.parse().map_err(D::Error::custom)?;
        let frac: u64 = frac_part.parse().map_err(D::Error::custom)?;
        let raw = whole
            .checked_mul(SCORE_SCALE)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(|| D::Error::custom("score out of range"))?;
        if raw > SCORE_SCALE {
            return Err(D::Error::custom("score exceeds 1.0"));
        }
        Ok(Self { raw })
    }
}

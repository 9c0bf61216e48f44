//! Fixed-point token arithmetic.
//!
//! All economic quantities are unsigned base units, 1 token = 10^6 units.
//! Rational scale factors are applied as numerator-multiply then
//! denominator-divide in 128-bit intermediates; economic rounding is
//! round-half-down, slashing rounds toward zero (floor).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::iter::Sum;
use thiserror::Error;

/// Base units per whole token.
pub const UNITS_PER_TOKEN: u64 = 1_000_000;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AmountError {
    #[error("token amount underflow")]
    Underflow,
    #[error("token amount overflow")]
    Overflow,
}

/// Unsigned fixed-point token amount in base units.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TokenAmount {
    units: u64,
}

impl TokenAmount {
    pub const ZERO: Self = Self { units: 0 };

    pub const fn from_units(units: u64) -> Self {
        Self { units }
    }

    pub const fn from_tokens(tokens: u64) -> Self {
        Self {
            units: tokens * UNITS_PER_TOKEN,
        }
    }

    /// Parse a decimal token count (config boundary only). Exact for values
    /// with at most six decimal places; rejects negatives and non-finite.
    pub fn from_decimal_tokens(tokens: f64) -> Result<Self, AmountError> {
        if !tokens.is_finite() || tokens < 0.0 {
            return Err(AmountError::Overflow);
        }
        let units = (tokens * UNITS_PER_TOKEN as f64).round();
        if units > u64::MAX as f64 {
            return Err(AmountError::Overflow);
        }
        Ok(Self {
            units: units as u64,
        })
    }

    pub const fn units(self) -> u64 {
        self.units
    }

    pub const fn is_zero(self) -> bool {
        self.units == 0
    }

    pub fn checked_add(self, other: Self) -> Result<Self, AmountError> {
        self.units
            .checked_add(other.units)
            .map(Self::from_units)
            .ok_or(AmountError::Overflow)
    }

    pub fn checked_sub(self, other: Self) -> Result<Self, AmountError> {
        self.units
            .checked_sub(other.units)
            .map(Self::from_units)
            .ok_or(AmountError::Underflow)
    }

    pub fn saturating_sub(self, other: Self) -> Self {
        Self::from_units(self.units.saturating_sub(other.units))
    }

    pub fn min(self, other: Self) -> Self {
        Self::from_units(self.units.min(other.units))
    }

    /// `self * num / den` with round-half-down, erroring on 128-bit overflow.
    pub fn mul_div_half_down(self, num: u128, den: u128) -> Result<Self, AmountError> {
        let n = (self.units as u128)
            .checked_mul(num)
            .ok_or(AmountError::Overflow)?;
        let q = round_half_down(n, den);
        u64::try_from(q)
            .map(Self::from_units)
            .map_err(|_| AmountError::Overflow)
    }

    /// `self * num / den` rounded toward zero. Slashing uses this rule.
    pub fn mul_div_floor(self, num: u128, den: u128) -> Result<Self, AmountError> {
        let n = (self.units as u128)
            .checked_mul(num)
            .ok_or(AmountError::Overflow)?;
        u64::try_from(n / den)
            .map(Self::from_units)
            .map_err(|_| AmountError::Overflow)
    }

    /// Decimal token rendering, always six fractional digits.
    pub fn display_tokens(self) -> String {
        format!(
            "{}.{:06}",
            self.units / UNITS_PER_TOKEN,
            self.units % UNITS_PER_TOKEN
        )
    }
}

impl fmt::Display for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_tokens())
    }
}

impl Sum<TokenAmount> for u128 {
    fn sum<I: Iterator<Item = TokenAmount>>(iter: I) -> u128 {
        iter.map(|a| a.units as u128).sum()
    }
}

/// `num / den` with ties rounded down.
pub fn round_half_down(num: u128, den: u128) -> u128 {
    debug_assert!(den > 0);
    let q = num / den;
    let r = num % den;
    if r * 2 > den {
        q + 1
    } else {
        q
    }
}

/// Exact non-negative rational, used for protocol parameters (δ, θ, β, γ, λ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const ONE: Self = Self { num: 1, den: 1 };
    pub const ZERO: Self = Self { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Option<Self> {
        if den == 0 {
            None
        } else {
            Some(Self { num, den })
        }
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// True for ratios within the unit interval.
    pub fn is_fraction(self) -> bool {
        self.num <= self.den
    }

    /// Complement `1 - self`; caller guarantees `is_fraction`.
    pub fn complement_num(self) -> u64 {
        self.den - self.num
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

//! Fixed-point quantities.
//!
//! Every length and capacity is an integer count of a base unit. An instance
//! declares how many base units make up one input unit (`unit_scale`, a power
//! of ten), and all decimal text is converted to and from base units exactly.

use std::fmt;

use thiserror::Error;

/// A non-negative length in base units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Length(u64);

impl Length {
    pub const ZERO: Length = Length(0);

    #[inline]
    pub const fn from_base_units(units: u64) -> Self {
        Length(units)
    }

    #[inline]
    pub const fn base_units(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn checked_add(self, other: Length) -> Option<Length> {
        self.0.checked_add(other.0).map(Length)
    }

    #[inline]
    pub fn checked_sub(self, other: Length) -> Option<Length> {
        self.0.checked_sub(other.0).map(Length)
    }

    #[inline]
    pub fn checked_mul(self, count: u64) -> Option<Length> {
        self.0.checked_mul(count).map(Length)
    }

    /// Renders the length as an exact decimal in input units.
    pub fn to_decimal(self, scale: UnitScale) -> String {
        format_fixed(i128::from(self.0), scale)
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}u", self.0)
    }
}

/// Base units per input unit. Always a power of ten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitScale {
    factor: u64,
    digits: u32,
}

impl UnitScale {
    pub const DEFAULT: UnitScale = UnitScale { factor: 1000, digits: 3 };

    pub fn new(factor: u64) -> Result<Self, DecimalError> {
        let mut digits = 0;
        let mut rest = factor;
        while rest > 1 && rest.is_multiple_of(10) {
            rest /= 10;
            digits += 1;
        }
        if rest != 1 || digits > 12 {
            return Err(DecimalError::BadScale(factor));
        }
        Ok(UnitScale { factor, digits })
    }

    #[inline]
    pub fn factor(self) -> u64 {
        self.factor
    }

    /// Number of fractional digits an input decimal may carry.
    #[inline]
    pub fn digits(self) -> u32 {
        self.digits
    }
}

impl Default for UnitScale {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("unit_scale must be a power of ten between 1 and 10^12, got {0}")]
    BadScale(u64),
    #[error("'{0}' is not a plain decimal number")]
    Malformed(String),
    #[error("'{0}' is negative")]
    Negative(String),
    #[error("'{text}' has more fractional digits than unit_scale {scale} permits")]
    TooPrecise { text: String, scale: u64 },
    #[error("'{0}' is too large")]
    Overflow(String),
}

/// Parses a non-negative decimal literal into base units without rounding.
///
/// Trailing fractional zeros beyond the scale are accepted since they do not
/// change the value.
pub fn parse_decimal(text: &str, scale: UnitScale) -> Result<u64, DecimalError> {
    let cleaned: String = text.trim().chars().filter(|&c| c != '_').collect();
    let body = match cleaned.strip_prefix('+') {
        Some(rest) => rest,
        None if cleaned.starts_with('-') => {
            // "-0" and "-0.0" are still zero.
            let rest = &cleaned[1..];
            if !rest.is_empty() && rest.chars().all(|c| c == '0' || c == '.') && rest.contains('0') {
                rest
            } else {
                return Err(DecimalError::Negative(text.trim().to_string()));
            }
        }
        None => cleaned.as_str(),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if int_part.is_empty() || !digits_ok(int_part) || !digits_ok(frac_part) || (body.contains('.') && frac_part.is_empty()) {
        return Err(DecimalError::Malformed(text.trim().to_string()));
    }
    let significant = frac_part.trim_end_matches('0');
    if significant.len() > scale.digits() as usize {
        return Err(DecimalError::TooPrecise { text: text.trim().to_string(), scale: scale.factor() });
    }
    let overflow = || DecimalError::Overflow(text.trim().to_string());
    let whole: u64 = int_part.parse().map_err(|_| overflow())?;
    let mut frac: u64 = 0;
    for (pos, ch) in significant.chars().enumerate() {
        let digit = u64::from(ch as u8 - b'0');
        frac += digit * 10u64.pow(scale.digits() - 1 - pos as u32);
    }
    whole
        .checked_mul(scale.factor())
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(overflow)
}

/// Formats a base-unit quantity as an exact decimal: no exponent, no
/// trailing fractional zeros.
pub fn format_fixed(value: i128, scale: UnitScale) -> String {
    let factor = i128::from(scale.factor());
    let sign = if value < 0 { "-" } else { "" };
    let magnitude = value.unsigned_abs();
    let whole = magnitude / factor as u128;
    let frac = magnitude % factor as u128;
    if frac == 0 {
        return format!("{sign}{whole}");
    }
    let mut frac_text = format!("{:0width$}", frac, width = scale.digits() as usize);
    while frac_text.ends_with('0') {
        frac_text.pop();
    }
    format!("{sign}{whole}.{frac_text}")
}

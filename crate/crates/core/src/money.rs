//! Exact money amounts.
//!
//! Amounts are held as an integer count of milli-cents (1/1000 of a cent,
//! i.e. 10^-5 dollars). Rates and fractions are carried as exact rationals
//! and only collapse to milli-cents at the very end of a computation.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rational::{format_scaled, parse_rational, ParseRationalError, Rational};

/// Milli-cents per cent.
pub const MILLI_CENTS_PER_CENT: i128 = 1_000;
/// Milli-cents per dollar.
pub const MILLI_CENTS_PER_DOLLAR: i128 = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money {
    milli_cents: i128,
}

impl Money {
    pub const ZERO: Money = Money { milli_cents: 0 };

    pub const fn from_milli_cents(milli_cents: i128) -> Self {
        Money { milli_cents }
    }

    pub const fn from_cents(cents: i128) -> Self {
        Money {
            milli_cents: cents * MILLI_CENTS_PER_CENT,
        }
    }

    pub const fn from_dollars(dollars: i128) -> Self {
        Money {
            milli_cents: dollars * MILLI_CENTS_PER_DOLLAR,
        }
    }

    pub const fn milli_cents(self) -> i128 {
        self.milli_cents
    }

    /// The amount in milli-cents as an exact rational.
    pub fn to_rational(self) -> Rational {
        Ratio::from_integer(self.milli_cents)
    }

    /// Exact amount in dollars.
    pub fn to_dollars(self) -> Rational {
        Ratio::new(self.milli_cents, MILLI_CENTS_PER_DOLLAR)
    }

    /// Collapses a rational milli-cent amount, rounding half away from zero.
    ///
    /// Every computation on whole-cent rates and decimal fractions lands on
    /// an integer already; rounding only happens for exotic inputs.
    pub fn from_rational_milli_cents(value: Rational) -> Self {
        Money {
            milli_cents: value.round().to_integer(),
        }
    }

    /// Converts an exact dollar amount, failing if it is not a whole number
    /// of milli-cents.
    pub fn try_from_dollars(dollars: Rational) -> Result<Self, MoneyError> {
        let mc = dollars * Ratio::from_integer(MILLI_CENTS_PER_DOLLAR);
        if !mc.is_integer() {
            return Err(MoneyError::SubMilliCent(crate::rational::format_exact(
                &dollars,
            )));
        }
        Ok(Money::from_milli_cents(mc.to_integer()))
    }

    /// Converts an exact cent amount, failing below milli-cent precision.
    pub fn try_from_cents(cents: Rational) -> Result<Self, MoneyError> {
        let mc = cents * Ratio::from_integer(MILLI_CENTS_PER_CENT);
        if !mc.is_integer() {
            return Err(MoneyError::SubMilliCent(crate::rational::format_exact(
                &cents,
            )));
        }
        Ok(Money::from_milli_cents(mc.to_integer()))
    }

    /// Exact amount in cents.
    pub fn to_cents(self) -> Rational {
        Ratio::new(self.milli_cents, MILLI_CENTS_PER_CENT)
    }

    pub fn is_negative(self) -> bool {
        self.milli_cents < 0
    }

    /// Scales by an exact rational, rounding to the nearest milli-cent.
    pub fn scale(self, factor: Rational) -> Money {
        Money::from_rational_milli_cents(self.to_rational() * factor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MoneyError {
    #[error(transparent)]
    Parse(#[from] ParseRationalError),
    #[error("amount {0} is finer than one milli-cent")]
    SubMilliCent(String),
}

impl fmt::Display for Money {
    /// Dollars with up to five decimals (one milli-cent), trailing zeros
    /// trimmed: `100214.4`, `0.876`, `-3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format_scaled(self.milli_cents, 5))
    }
}

impl FromStr for Money {
    type Err = MoneyError;

    /// Parses a dollar amount written as a decimal, e.g. `"33901.2"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let s = s.strip_prefix('$').unwrap_or(s);
        Money::try_from_dollars(parse_rational(&s.replace(',', ""))?)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money::from_milli_cents(self.milli_cents + rhs.milli_cents)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.milli_cents += rhs.milli_cents;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money::from_milli_cents(self.milli_cents - rhs.milli_cents)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money::from_milli_cents(-self.milli_cents)
    }
}

impl Mul<i128> for Money {
    type Output = Money;
    fn mul(self, rhs: i128) -> Money {
        Money::from_milli_cents(self.milli_cents * rhs)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

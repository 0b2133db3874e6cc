//! Exact rational helpers shared by the money, scenario and report code.

use num_rational::Ratio;
use thiserror::Error;

/// Exact rational number used for fractions, hours and percentages.
pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty number")]
    Empty,
    #[error("`{0}` is not a decimal or fraction")]
    Malformed(String),
    #[error("`{0}` has a zero denominator")]
    ZeroDenominator(String),
    #[error("`{0}` is out of range")]
    Overflow(String),
}

/// Parses `"12"`, `"-0.125"` or `"3/8"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_int(num.trim(), s)?;
        let d = parse_int(den.trim(), s)?;
        if d == 0 {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(Ratio::new(n, d));
    }
    parse_decimal(s)
}

fn parse_int(part: &str, whole: &str) -> Result<i128, ParseRationalError> {
    let digits = part.strip_prefix(['+', '-']).unwrap_or(part);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRationalError::Malformed(whole.to_string()));
    }
    part.parse::<i128>()
        .map_err(|_| ParseRationalError::Overflow(whole.to_string()))
}

/// Parses a plain decimal (optionally with an exponent, as produced by the
/// shortest float formatting) without going through binary floating point.
fn parse_decimal(s: &str) -> Result<Rational, ParseRationalError> {
    let malformed = || ParseRationalError::Malformed(s.to_string());
    let overflow = || ParseRationalError::Overflow(s.to_string());

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let exp = s[i + 1..].parse::<i32>().map_err(|_| malformed())?;
            (&s[..i], exp)
        }
        None => (s, 0),
    };
    let (negative, body) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(malformed());
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(malformed());
    }

    let mut numer: i128 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        numer = numer
            .checked_mul(10)
            .and_then(|v| v.checked_add(i128::from(b - b'0')))
            .ok_or_else(overflow)?;
    }
    let scale = exponent - frac_part.len() as i32;
    let pow = 10i128
        .checked_pow(scale.unsigned_abs())
        .ok_or_else(overflow)?;
    let mut value = if scale >= 0 {
        Ratio::from_integer(numer.checked_mul(pow).ok_or_else(overflow)?)
    } else {
        Ratio::new(numer, pow)
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// True when `value` has a finite decimal expansion.
pub fn is_terminating(value: &Rational) -> bool {
    let mut d = *value.denom();
    while d % 2 == 0 {
        d /= 2;
    }
    while d % 5 == 0 {
        d /= 5;
    }
    d == 1
}

/// Formats a rational exactly: a trimmed decimal when the expansion
/// terminates, `p/q` otherwise.
pub fn format_exact(value: &Rational) -> String {
    if !is_terminating(value) {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let mut places = 0u32;
    let mut scaled = *value;
    while !scaled.is_integer() {
        scaled *= Ratio::from_integer(10);
        places += 1;
    }
    format_scaled(scaled.to_integer(), places)
}

/// Formats a rational rounded (half away from zero) to at most `places`
/// decimals, trailing zeros trimmed.
pub fn format_rounded(value: &Rational, places: u32) -> String {
    let pow = 10i128.pow(places);
    let scaled = (*value * Ratio::from_integer(pow)).round().to_integer();
    format_scaled(scaled, places)
}

/// Renders `units / 10^places` with trailing fractional zeros removed.
pub(crate) fn format_scaled(units: i128, places: u32) -> String {
    let pow = 10i128.pow(places);
    let sign = if units.is_negative() { "-" } else { "" };
    let abs = units.unsigned_abs();
    let int = abs / pow as u128;
    let frac = abs % pow as u128;
    if frac == 0 {
        return format!("{sign}{int}");
    }
    let digits = format!("{:0width$}", frac, width = places as usize);
    format!("{sign}{int}.{}", digits.trim_end_matches('0'))
}

/// Serde adapter writing rationals as exact strings (`"0.5"`, `"1/3"`).
pub mod serde_exact {
    use super::{format_exact, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&format_exact(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::super::{format_exact, parse_rational, Rational};
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(
            value: &Option<Rational>,
            serializer: S,
        ) -> Result<S::Ok, S::Error> {
            match value {
                Some(v) => serializer.collect_str(&format_exact(v)),
                None => serializer.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            deserializer: D,
        ) -> Result<Option<Rational>, D::Error> {
            Option::<String>::deserialize(deserializer)?
                .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rational("12").unwrap(), r(12, 1));
        assert_eq!(parse_rational("0.1").unwrap(), r(1, 10));
        assert_eq!(parse_rational("-2.50").unwrap(), r(-5, 2));
        assert_eq!(parse_rational(".5").unwrap(), r(1, 2));
        assert_eq!(parse_rational("3/8").unwrap(), r(3, 8));
        assert_eq!(parse_rational("1e-2").unwrap(), r(1, 100));
        assert_eq!(parse_rational("1.5E3").unwrap(), r(1500, 1));
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_rational(""), Err(ParseRationalError::Empty)));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2.3").is_err());
        assert!(parse_rational(".").is_err());
        assert!(matches!(
            parse_rational("1/0"),
            Err(ParseRationalError::ZeroDenominator(_))
        ));
    }

    #[test]
    fn formats_exactly() {
        assert_eq!(format_exact(&r(75, 4)), "18.75");
        assert_eq!(format_exact(&r(43, 1)), "43");
        assert_eq!(format_exact(&r(-1, 8)), "-0.125");
        assert_eq!(format_exact(&r(1, 3)), "1/3");
        assert_eq!(format_rounded(&r(1, 3), 4), "0.3333");
        assert_eq!(format_rounded(&r(1, 2), 0), "1");
    }
}

//! Numeral normalization for text-extracted statement cells.
//!
//! Handles thousands separators (`,` `，` thin space), full-width digits,
//! accounting negatives (`(12)`, `△12`, `−12`, `-12`) and dash-only
//! placeholders. The result is scaled into base currency units.

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Power-of-ten multiplier applied to a reported figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct UnitScale(u32);

impl UnitScale {
    pub const ONE: UnitScale = UnitScale(0);
    pub const THOUSANDS: UnitScale = UnitScale(3);
    pub const TEN_THOUSANDS: UnitScale = UnitScale(4);
    pub const MILLIONS: UnitScale = UnitScale(6);

    /// Largest exponent accepted; keeps products inside `Decimal` range.
    pub const MAX_EXPONENT: u32 = 12;

    pub fn from_exponent(exponent: u32) -> Option<Self> {
        (exponent <= Self::MAX_EXPONENT).then_some(UnitScale(exponent))
    }

    pub fn exponent(self) -> u32 {
        self.0
    }

    pub fn multiplier(self) -> Decimal {
        Decimal::from_i128_with_scale(10i128.pow(self.0), 0)
    }

    /// Maps a `#UNITS` directive token to its scale.
    pub fn from_token(token: &str) -> Option<Self> {
        let token = token.trim();
        let known = match token {
            "元" | "円" | "in units" | "units" => Some(Self::ONE),
            "千円" | "千元" | "in thousands" | "thousands" => Some(Self::THOUSANDS),
            "万元" | "万円" => Some(Self::TEN_THOUSANDS),
            "百万円" | "百万元" | "in millions" | "millions" => Some(Self::MILLIONS),
            "亿元" => Some(UnitScale(8)),
            _ => None,
        };
        known.or_else(|| {
            token
                .strip_prefix("1e")
                .and_then(|e| e.parse::<u32>().ok())
                .and_then(Self::from_exponent)
        })
    }
}

impl fmt::Display for UnitScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1e{}", self.0)
    }
}

impl Serialize for UnitScale {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u32(self.0)
    }
}

impl<'de> Deserialize<'de> for UnitScale {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let exp = u32::deserialize(deserializer)?;
        UnitScale::from_exponent(exp)
            .ok_or_else(|| serde::de::Error::custom(format!("unit scale exponent {exp} too large")))
    }
}

/// Outcome of normalizing one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "value", rename_all = "snake_case")]
pub enum NumericCell {
    Value(Decimal),
    Absent,
    ParseError,
}

impl NumericCell {
    pub fn value(&self) -> Option<Decimal> {
        match self {
            NumericCell::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(self, NumericCell::Value(_))
    }
}

fn is_dash(c: char) -> bool {
    matches!(c, '—' | '–' | '-' | '－' | '−' | '―')
}

fn is_separator(c: char) -> bool {
    matches!(c, ',' | '，' | '\u{2009}' | '\u{202F}')
}

fn fold_width(c: char) -> char {
    match c {
        '０'..='９' => char::from_u32(c as u32 - '０' as u32 + '0' as u32).unwrap_or(c),
        '．' => '.',
        '（' => '(',
        '）' => ')',
        '＋' => '+',
        _ => c,
    }
}

/// Normalizes a raw cell into a scaled decimal, an absence, or a parse
/// error. Never fails.
pub fn normalize_number(cell: &str, unit_scale: UnitScale) -> NumericCell {
    let trimmed = cell.trim_matches(|c: char| c.is_whitespace());
    if trimmed.is_empty() || trimmed.chars().all(is_dash) {
        return NumericCell::Absent;
    }

    let folded: String = trimmed.chars().map(fold_width).filter(|c| !is_separator(*c)).collect();

    let mut body = folded.as_str();
    let mut negative = false;
    if body.len() >= 2 && body.starts_with('(') && body.ends_with(')') {
        negative = true;
        body = body[1..body.len() - 1].trim();
    }
    if let Some(first) = body.chars().next() {
        if matches!(first, '△' | '▲' | '−' | '-' | '－') {
            if negative {
                // "(-5)" is ambiguous
                return NumericCell::ParseError;
            }
            negative = true;
            body = body[first.len_utf8()..].trim_start();
        } else if first == '+' && !negative {
            body = &body[1..];
        }
    }

    if !is_plain_unsigned(body) {
        return NumericCell::ParseError;
    }
    let Ok(magnitude) = Decimal::from_str(body) else {
        return NumericCell::ParseError;
    };
    let Some(scaled) = magnitude.checked_mul(unit_scale.multiplier()) else {
        return NumericCell::ParseError;
    };
    let scaled = scaled.normalize();
    NumericCell::Value(if negative { -scaled } else { scaled })
}

// digits, optionally followed by '.' and more digits
fn is_plain_unsigned(s: &str) -> bool {
    let mut parts = s.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits)
}

/// Numeric-looking tokens inside free text (used to check quoted evidence).
pub fn numeric_tokens(text: &str) -> Vec<&str> {
    static PATTERN: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let re = PATTERN.get_or_init(|| {
        regex::Regex::new(r"[(（]?[△▲−\-－]?[0-9０-９](?:[0-9０-９,，\u{2009}\u{202F}．.]*[0-9０-９])?[)）]?")
            .expect("valid token pattern")
    });
    re.find_iter(text).map(|m| m.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    #[test]
    fn strips_separators() {
        assert_eq!(
            normalize_number("1,234", UnitScale::ONE),
            NumericCell::Value(dec!(1234))
        );
        assert_eq!(
            normalize_number("1，234", UnitScale::ONE),
            NumericCell::Value(dec!(1234))
        );
        assert_eq!(
            normalize_number("1\u{2009}234", UnitScale::ONE),
            NumericCell::Value(dec!(1234))
        );
    }

    #[test]
    fn parentheses_negate_and_scale() {
        assert_eq!(
            normalize_number("(56.7)", UnitScale::MILLIONS),
            NumericCell::Value(dec!(-56700000))
        );
        assert_eq!(
            normalize_number("（12）", UnitScale::ONE),
            NumericCell::Value(dec!(-12))
        );
    }

    #[test]
    fn full_width_digits() {
        assert_eq!(
            normalize_number("１２３", UnitScale::ONE),
            NumericCell::Value(dec!(123))
        );
        assert_eq!(
            normalize_number("１，２３４．５", UnitScale::ONE),
            NumericCell::Value(dec!(1234.5))
        );
    }

    #[test]
    fn leading_negation_marks() {
        for cell in ["△500", "▲500", "−500", "-500", "－500"] {
            assert_eq!(
                normalize_number(cell, UnitScale::ONE),
                NumericCell::Value(dec!(-500)),
                "{cell}"
            );
        }
        assert_eq!(normalize_number("+7", UnitScale::ONE), NumericCell::Value(dec!(7)));
    }

    #[test]
    fn dashes_and_empty_are_absent() {
        for cell in ["", "   ", "—", "–", "-", "——", "－"] {
            assert_eq!(normalize_number(cell, UnitScale::ONE), NumericCell::Absent, "{cell:?}");
        }
    }

    #[test]
    fn garbage_is_parse_error() {
        for cell in ["n/a", "abc", "12.3.4", "1e5", "(-5)", "#REF!", "12%", "()"] {
            assert_eq!(
                normalize_number(cell, UnitScale::ONE),
                NumericCell::ParseError,
                "{cell:?}"
            );
        }
    }

    #[test]
    fn unit_tokens() {
        assert_eq!(UnitScale::from_token("千円"), Some(UnitScale::THOUSANDS));
        assert_eq!(UnitScale::from_token("百万円"), Some(UnitScale::MILLIONS));
        assert_eq!(UnitScale::from_token("万元"), Some(UnitScale::TEN_THOUSANDS));
        assert_eq!(UnitScale::from_token("元"), Some(UnitScale::ONE));
        assert_eq!(UnitScale::from_token("in thousands"), Some(UnitScale::THOUSANDS));
        assert_eq!(UnitScale::from_token("in millions"), Some(UnitScale::MILLIONS));
        assert_eq!(UnitScale::from_token("furlongs"), None);
    }

    #[test]
    fn finds_numeric_tokens_in_quotes() {
        assert_eq!(numeric_tokens("营业收入 1,234"), vec!["1,234"]);
        assert_eq!(numeric_tokens("Net (56.7) and △３"), vec!["(56.7)", "△３"]);
        assert_eq!(numeric_tokens("revenue 2023: 100, 200"), vec!["2023", "100", "200"]);
    }
}

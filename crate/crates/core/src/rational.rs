//! Exact rational helpers: parsing, canonical `p/q` rendering, decimal
//! rendering, integer powers and certified natural-log enclosures.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

pub type Rational = BigRational;

/// `n/d` as an exact rational. Panics on `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, a bare integer, or a finite decimal such as `-0.35`.
pub fn parse_rational(text: &str) -> Result<Rational, Error> {
    let s = text.trim();
    let bad = || Error::ParseRational(text.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() && whole_digits.is_empty() {
            return Err(bad());
        }
        if !whole_digits.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{whole_digits}{frac}");
        let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        let value = Rational::new(numer, denom);
        return Ok(if negative { -value } else { value });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Canonical `p/q` form (always with a denominator, always reduced).
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Decimal rendering rounded half away from zero to `places` digits.
pub fn to_decimal(value: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = value.abs() * Rational::from_integer(scale.clone());
    let (q, r) = scaled.numer().div_rem(scaled.denom());
    let twice = r * 2u32;
    let rounded = if &twice >= scaled.denom() { q + 1u32 } else { q };
    let negative = value.is_negative() && !rounded.is_zero();
    let (int_part, frac_part) = rounded.div_rem(&scale);
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if places > 0 {
        let frac = frac_part.to_string();
        out.push('.');
        out.push_str(&"0".repeat(places - frac.len()));
        out.push_str(&frac);
    }
    out
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// `base^exp` for any integer exponent (negative exponents invert).
pub fn pow(base: &Rational, exp: i32) -> Rational {
    if exp >= 0 {
        num_traits::pow(base.clone(), exp as usize)
    } else {
        num_traits::pow(base.recip(), exp.unsigned_abs() as usize)
    }
}

pub fn ceil_u64(value: &Rational) -> Option<u64> {
    value.ceil().to_integer().to_u64()
}

pub fn floor_i64(value: &Rational) -> Option<i64> {
    value.floor().to_integer().to_i64()
}

pub fn min(a: &Rational, b: &Rational) -> Rational {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn max(a: &Rational, b: &Rational) -> Rational {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// If `value = base^k` for a positive integer `k` and a rational `base`, returns
/// the largest such `k` together with `base`. Used to reduce `(count, 1/ratio)`
/// pairs to a primitive exponent form.
pub fn integer_root(value: &Rational, k: u32) -> Option<Rational> {
    if k == 1 {
        return Some(value.clone());
    }
    if value.is_negative() {
        return None;
    }
    let n = value.numer().nth_root(k);
    let d = value.denom().nth_root(k);
    let candidate = Rational::new(n, d);
    if &num_traits::pow(candidate.clone(), k as usize) == value {
        Some(candidate)
    } else {
        None
    }
}

/// Closed enclosure `[lo, hi]` of `ln(x)` for rational `x > 0`.
///
/// `x = 2^k m` with `m` in `[1, 2)`, then `ln m = 2 atanh((m-1)/(m+1))`
/// summed for `terms` terms with the geometric tail bound. Partial sums are
/// rounded outward to multiples of `2^-bits` to keep denominators small.
pub fn ln_enclosure(x: &Rational, terms: usize, bits: u32) -> (Rational, Rational) {
    assert!(x.is_positive(), "ln of non-positive rational");
    let two = int(2);
    let mut k: i64 = 0;
    let mut m = x.clone();
    while m >= two {
        m /= &two;
        k += 1;
    }
    while m < Rational::one() {
        m *= &two;
        k -= 1;
    }
    let (m_lo, m_hi) = atanh_twice(&((&m - Rational::one()) / (&m + Rational::one())), terms, bits);
    if k == 0 {
        return (m_lo, m_hi);
    }
    let (l2_lo, l2_hi) = atanh_twice(&rat(1, 3), terms, bits);
    let kk = int(k);
    if k > 0 {
        (m_lo + &kk * l2_lo, m_hi + &kk * l2_hi)
    } else {
        (m_lo + &kk * l2_hi, m_hi + &kk * l2_lo)
    }
}

/// Enclosure of `2 atanh(z)` for `0 <= z <= 1/3`.
fn atanh_twice(z: &Rational, terms: usize, bits: u32) -> (Rational, Rational) {
    let grid = num_traits::pow(BigInt::from(2), bits as usize);
    let down = |v: &Rational| Rational::new((v * Rational::from_integer(grid.clone())).floor().to_integer(), grid.clone());
    let up = |v: &Rational| Rational::new((v * Rational::from_integer(grid.clone())).ceil().to_integer(), grid.clone());
    let z2 = z * z;
    let mut p_lo = z.clone();
    let mut p_hi = z.clone();
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    for j in 0..terms {
        let odd = int(2 * j as i64 + 1);
        lo = down(&(&lo + &p_lo / &odd));
        hi = up(&(&hi + &p_hi / &odd));
        p_lo = down(&(&p_lo * &z2));
        p_hi = up(&(&p_hi * &z2));
    }
    // tail: sum_{j >= terms} z^(2j+1)/(2j+1) <= z^(2 terms + 1) / ((2 terms + 1)(1 - z^2))
    let tail = &p_hi / (int(2 * terms as i64 + 1) * (Rational::one() - &z2));
    hi = up(&(hi + tail));
    (lo * int(2), hi * int(2))
}

pub fn sign_of(value: &Rational) -> Sign {
    value.numer().sign()
}

/// serde adapters: rationals travel as canonical `p/q` strings.
pub mod serde_str {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(values.len()))?;
            for v in values {
                seq.serialize_element(&format_rational(v))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            let texts = Vec::<String>::deserialize(d)?;
            texts.iter().map(|t| parse_rational(t).map_err(D::Error::custom)).collect()
        }
    }

    pub mod pair {
        use super::*;
        use serde::ser::SerializeTuple;

        pub fn serialize<S: Serializer>(value: &(Rational, Rational), s: S) -> Result<S::Ok, S::Error> {
            let mut t = s.serialize_tuple(2)?;
            t.serialize_element(&format_rational(&value.0))?;
            t.serialize_element(&format_rational(&value.1))?;
            t.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(Rational, Rational), D::Error> {
            let (a, b) = <(String, String)>::deserialize(d)?;
            Ok((parse_rational(&a).map_err(D::Error::custom)?, parse_rational(&b).map_err(D::Error::custom)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("2/6").unwrap(), rat(1, 3));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert_eq!(parse_rational("0.35").unwrap(), rat(7, 20));
        assert_eq!(parse_rational("-.5").unwrap(), rat(-1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn canonical_format() {
        assert_eq!(format_rational(&rat(2, 4)), "1/2");
        assert_eq!(format_rational(&int(3)), "3/1");
        assert_eq!(format_rational(&rat(-7, 30)), "-7/30");
    }

    #[test]
    fn decimals_round_half_away() {
        assert_eq!(to_decimal(&rat(2, 3), 6), "0.666667");
        assert_eq!(to_decimal(&rat(-1, 8), 2), "-0.13");
        assert_eq!(to_decimal(&rat(-1, 1000), 2), "0.00");
        assert_eq!(to_decimal(&int(5), 0), "5");
    }

    #[test]
    fn ln_enclosure_brackets_f64() {
        for (n, d) in [(1, 3), (10, 3), (5, 2), (1, 1), (7, 20), (1000, 1)] {
            let x = rat(n, d);
            let (lo, hi) = ln_enclosure(&x, 30, 80);
            let f = (n as f64 / d as f64).ln();
            assert!(to_f64(&lo) <= f + 1e-15 && f - 1e-15 <= to_f64(&hi), "{n}/{d}");
            assert!(to_f64(&(hi - lo)) < 1e-12);
        }
    }

    #[test]
    fn integer_roots() {
        assert_eq!(integer_root(&rat(4, 9), 2), Some(rat(2, 3)));
        assert_eq!(integer_root(&rat(2, 9), 2), None);
        assert_eq!(integer_root(&int(81), 4), Some(int(3)));
    }
}

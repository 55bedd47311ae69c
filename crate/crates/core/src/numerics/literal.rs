use rug::{Integer, Rational};

use crate::error::{HkError, Result};

/// Parses `p/q`, integers and decimal literals (with optional exponent)
/// into an exact rational. `"0.1"` is exactly one tenth.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let err = || HkError::Parse(format!("not a number: `{text}`"));
    if s.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: Integer = p.trim().parse().map_err(|_| err())?;
        let q: Integer = q.trim().parse().map_err(|_| err())?;
        if q == 0 {
            return Err(HkError::Parse(format!("zero denominator in `{text}`")));
        }
        return Ok(Rational::from((p, q)));
    }

    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => {
            let e: i64 = s[k + 1..].parse().map_err(|_| err())?;
            (&s[..k], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let all = format!("{int_part}{frac_part}");
    let mut num: Integer = all.parse().map_err(|_| err())?;
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i64;
    if scale.unsigned_abs() > 100_000 {
        return Err(HkError::Parse(format!("exponent out of range in `{text}`")));
    }
    let pow = Integer::from(Integer::u_pow_u(10, scale.unsigned_abs() as u32));
    Ok(if scale >= 0 {
        Rational::from(num * pow)
    } else {
        Rational::from((num, pow))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        assert_eq!(parse_rational("0.1").unwrap(), Rational::from((1, 10)));
        assert_eq!(parse_rational("-3/6").unwrap(), Rational::from((-1, 2)));
        assert_eq!(parse_rational("5").unwrap(), Rational::from(5));
        assert_eq!(parse_rational("2.5e-3").unwrap(), Rational::from((1, 400)));
        assert_eq!(parse_rational("1E2").unwrap(), Rational::from(100));
        assert_eq!(parse_rational(".5").unwrap(), Rational::from((1, 2)));
        for bad in ["", "abc", "1/0", "1.2.3", "--1", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }
}

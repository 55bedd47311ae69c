use rug::Rational;

use crate::error::{domain, Result};

/// One-update regularity and continuity constants: a profile whose slopes
/// lie in `[m, M]` maps to one with slopes in `[m/(2M^2), 2M^2/m]`, and the
/// update is Lipschitz with factor `17M/m` in the sup norm.
pub fn theory_constants(m: &Rational, big_m: &Rational) -> Result<(Rational, Rational, Rational)> {
    if *m <= 0 {
        return Err(domain("m must be positive"));
    }
    if m > big_m {
        return Err(domain("need m <= M"));
    }
    let sq = Rational::from(big_m * big_m);
    let m_next = Rational::from(m / &sq) / 2u32;
    let big_next = Rational::from(&sq * 2u32) / m;
    let k = Rational::from(big_m * 17u32) / m;
    Ok((m_next, big_next, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> Rational {
        Rational::from((p, d))
    }

    #[test]
    fn substitution() {
        assert_eq!(
            theory_constants(&q(1, 1), &q(1, 1)).unwrap(),
            (q(1, 2), q(2, 1), q(17, 1))
        );
        assert_eq!(
            theory_constants(&q(1, 4), &q(2, 1)).unwrap(),
            (q(1, 32), q(32, 1), q(136, 1))
        );
        assert!(theory_constants(&q(0, 1), &q(1, 1)).is_err());
        assert!(theory_constants(&q(-1, 1), &q(1, 1)).is_err());
        assert!(theory_constants(&q(2, 1), &q(1, 1)).is_err());
    }

    #[test]
    fn ratio_grows_super_exponentially() {
        let (mut m, mut big) = (q(1, 1), q(1, 1));
        let mut ratios = Vec::new();
        for _ in 0..3 {
            let (a, b, _) = theory_constants(&m, &big).unwrap();
            ratios.push(Rational::from(&b / &a));
            m = a;
            big = b;
        }
        // M_3/m_3 > (M_2/m_2)^2
        assert!(ratios[2] > Rational::from(&ratios[1] * &ratios[1]));
    }
}

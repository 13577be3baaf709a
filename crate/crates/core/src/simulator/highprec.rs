//! Wide binary floating point for reference orbits, backed by `astro-float`.

use astro_float::{BigFloat, RoundingMode, Sign};

use crate::extension::Arithmetic;
use crate::model::Coefficient;

const RM: RoundingMode = RoundingMode::ToEven;

/// Round-to-nearest-even arithmetic with `bits` of mantissa.
#[derive(Debug, Clone, Copy)]
pub struct HighPrecision {
    bits: usize,
}

impl HighPrecision {
    pub fn new(bits: usize) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Exact conversion from binary64.
    pub fn lift(&self, x: f64) -> BigFloat {
        lift(x, self.bits)
    }
}

impl Arithmetic for HighPrecision {
    type Value = BigFloat;

    /// Coefficients enter as their binary64 value, so the reference follows
    /// the same model the binary64 plans evaluate.
    fn coefficient(&self, c: &Coefficient) -> BigFloat {
        self.lift(c.value())
    }

    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.bits, RM)
    }

    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.bits, RM)
    }
}

/// `BigFloat::from_f64` halves subnormal inputs, so those are scaled into
/// the normal range first and scaled back exactly.
pub fn lift(x: f64, bits: usize) -> BigFloat {
    if x != 0.0 && x.abs() < f64::MIN_POSITIVE {
        let scaled = BigFloat::from_f64(libm::ldexp(x, 64), bits);
        scaled.mul(&BigFloat::from_f64(libm::ldexp(1.0, -64), bits), bits, RM)
    } else {
        BigFloat::from_f64(x, bits)
    }
}

pub fn is_finite(x: &BigFloat) -> bool {
    !x.is_nan() && !x.is_inf()
}

/// Correctly rounded (nearest-even) conversion to binary64, including the
/// subnormal range.
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf() {
        return if x.is_inf_neg() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    let Some((words, _, sign, exponent, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    let negative = matches!(sign, Sign::Neg);
    let Some((&top, lower)) = words.split_last() else {
        return if negative { -0.0 } else { 0.0 };
    };
    if top == 0 {
        return if negative { -0.0 } else { 0.0 };
    }
    // value = 0.top lower... * 2^exponent, top has its MSB set
    let e = i64::from(exponent);
    let p = (e + 1074).clamp(0, 53) as u32;
    let lower_nonzero = lower.iter().any(|&w| w != 0);
    let (mut mant, round, sticky) = if p == 0 {
        // the leading bit is the round bit only when it sits at 2^-1075
        (0u64, e == -1074, (top << 1) != 0 || lower_nonzero)
    } else {
        let shift = 64 - p;
        let mant = top >> shift;
        let round = (top >> (shift - 1)) & 1 == 1;
        let below = if shift >= 2 { top & ((1u64 << (shift - 1)) - 1) } else { 0 };
        (mant, round, below != 0 || lower_nonzero)
    };
    if round && (sticky || mant & 1 == 1) {
        mant += 1;
    }
    let magnitude = if e > 1100 {
        f64::INFINITY
    } else {
        libm::ldexp(mant as f64, (e - i64::from(p)) as i32)
    };
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

/// True when `|x - y| < 2^-k * max(|x|, |y|)`, or both are equal.
pub fn agree_to_bits(x: &BigFloat, y: &BigFloat, k: usize) -> bool {
    let wide = x.precision().unwrap_or(64).max(y.precision().unwrap_or(64)) * 2;
    let diff = x.sub(y, wide, RM).abs();
    if diff.is_zero() {
        return true;
    }
    let (ax, ay) = (x.abs(), y.abs());
    let scale = if ax.cmp(&ay).unwrap_or(0) >= 0 { ax } else { ay };
    let threshold = scale.mul(&BigFloat::from_f64(libm::ldexp(1.0, -(k as i32)), 64), wide, RM);
    diff.cmp(&threshold).map(|c| c < 0).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn specials() {
        assert_eq!(to_f64(&lift(0.0, 128)), 0.0);
        assert_eq!(to_f64(&lift(5e-324, 128)), 5e-324);
        assert_eq!(to_f64(&lift(-1.5, 128)), -1.5);
        let hp = HighPrecision::new(128);
        // 2^-1075 ties to even (zero); just above it rounds up
        let half_min = hp.mul(&lift(5e-324, 128), &lift(0.5, 128));
        assert_eq!(to_f64(&half_min), 0.0);
        let above = hp.mul(&lift(5e-324, 128), &lift(0.75, 128));
        assert_eq!(to_f64(&above), 5e-324);
    }

    #[test]
    fn rounding_ties_to_even() {
        let hp = HighPrecision::new(128);
        let one = hp.lift(1.0);
        // 1 + 2^-53 is a tie between 1 and 1 + 2^-52
        let tie = hp.add(&one, &hp.lift(libm::ldexp(1.0, -53)));
        assert_eq!(to_f64(&tie), 1.0);
        let above = hp.add(&tie, &hp.lift(libm::ldexp(1.0, -80)));
        assert_eq!(to_f64(&above), 1.0 + f64::EPSILON);
        let odd = hp.lift(1.0 + f64::EPSILON);
        let tie_up = hp.add(&odd, &hp.lift(libm::ldexp(1.0, -53)));
        assert_eq!(to_f64(&tie_up), 1.0 + 2.0 * f64::EPSILON);
    }

    #[test]
    fn agreement() {
        let hp = HighPrecision::new(256);
        let a = hp.lift(1.0);
        let b = hp.add(&a, &hp.lift(libm::ldexp(1.0, -100)));
        assert!(agree_to_bits(&a, &b, 99));
        assert!(!agree_to_bits(&a, &b, 101));
        assert!(agree_to_bits(&hp.lift(0.0), &hp.lift(0.0), 200));
    }

    proptest! {
        #[test]
        fn binary64_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(to_f64(&lift(x, 128)).to_bits(), x.to_bits());
        }

        #[test]
        fn sums_round_like_binary64(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            // binary64 addition is correctly rounded, so rounding the exact
            // wide sum must give the same double
            let hp = HighPrecision::new(256);
            let s = hp.add(&hp.lift(a), &hp.lift(b));
            prop_assert_eq!(to_f64(&s).to_bits(), (a + b).to_bits());
            let p = hp.mul(&hp.lift(a), &hp.lift(b));
            prop_assert_eq!(to_f64(&p).to_bits(), (a * b).to_bits());
        }
    }
}

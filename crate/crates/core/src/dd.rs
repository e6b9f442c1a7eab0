//! Double-double helpers on top of `twofloat`.
//!
//! `TwoFloat / TwoFloat` and `f64 / TwoFloat` in twofloat 0.8 only reach
//! double precision (the reciprocal correction `1 − hi·(1/hi)` is formed
//! without a fused multiply-add and rounds to zero), so quotients go through
//! [`div`]. Division by a plain `f64` is accurate and used directly.

use twofloat::TwoFloat;

pub(crate) type Dd = TwoFloat;

/// `a / b` by three steps of long division.
pub(crate) fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    Dd::new_add(q1, q2) + q3
}

pub(crate) fn recip(b: Dd) -> Dd {
    div(Dd::from(1.0), b)
}

/// Natural logarithm: a Newton step on `exp(y) = z` from the double-precision estimate.
pub(crate) fn ln(z: Dd) -> Dd {
    let y = Dd::from(z.hi().ln());
    y + (z * exp(-y) - 1.0)
}

/// `exp` for moderate arguments: reduction by `ln 2`, then `exp(r / 2¹⁰)` by
/// Taylor series and ten squarings.
pub(crate) fn exp(y: Dd) -> Dd {
    const LN2: (f64, f64) = (6.931_471_805_599_453e-1, 2.319_046_813_846_299_6e-17);
    let ln2 = Dd::new_add(LN2.0, LN2.1);
    let k = (y.hi() / LN2.0).round();
    let r = (y - ln2 * k) / 1024.0;
    let mut term = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for i in 1..=20 {
        term = term * r / i as f64;
        sum += term;
        if term.hi().abs() < 1e-34 {
            break;
        }
    }
    for _ in 0..10 {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

pub(crate) fn to_f64(v: Dd) -> f64 {
    v.hi() + v.lo()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_is_double_double_accurate() {
        let third = recip(Dd::from(3.0));
        assert!(((third * 3.0) - 1.0).hi().abs() < 1e-31);
        let b = Dd::new_add(3.0, 1e-17);
        let q = div(Dd::new_add(7.0, 2e-16), b);
        assert!(((q * b) - Dd::new_add(7.0, 2e-16)).hi().abs() < 1e-30);
    }

    #[test]
    fn log_and_exp() {
        for &z in &[0.3, 1.7, 2.5e-5, 123.456, 0.9999, 7.0e8] {
            let l = ln(Dd::from(z));
            let rel = ((exp(l) - z) / z).hi().abs();
            assert!(rel < 1e-28, "z = {z}: {rel:e}");
        }
        // 60-digit reference for ln 1.7.
        let l = ln(Dd::from(1.7));
        assert_eq!(l.hi(), 0.530_628_251_062_170_4);
        assert!((l.lo() - -5.076_541_175_216_476e-18).abs() < 1e-29);
    }
}

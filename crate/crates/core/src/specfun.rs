//! Sine integral `Si(x) = ∫₀ˣ sin(u)/u du`.
//!
//! Two regimes: the Maclaurin series for `|x| <= SERIES_LIMIT`, and the
//! continued fraction for `E₁(ix)` above it, which yields the auxiliary
//! functions `f(x)`, `g(x)` of `Si(x) = π/2 − f(x) cos x − g(x) sin x`
//! without the truncation floor of their divergent asymptotic series.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 4.0;
const MAX_ITERATIONS: usize = 10_000;

/// Sine integral of a finite real argument.
pub fn sine_integral(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("sine integral of non-finite argument {x}")));
    }
    Ok(si(x))
}

/// Unchecked evaluation for callers that have already validated `x`.
pub(crate) fn si(x: f64) -> f64 {
    let ax = x.abs();
    let value = if ax <= SERIES_LIMIT {
        si_series(ax)
    } else {
        si_continued_fraction(ax)
    };
    value.copysign(x)
}

pub(crate) fn si_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for k in 1..MAX_ITERATIONS {
        let k = k as f64;
        term *= -x2 / ((2.0 * k) * (2.0 * k + 1.0));
        let contribution = term / (2.0 * k + 1.0);
        sum += contribution;
        if contribution.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Lentz evaluation of `E₁(ix) = e^{-ix} / (1 + ix − 1²/(3 + ix − 2²/(5 + ix − …)))`,
/// then `Si(x) = π/2 + Im E₁(ix)`. Valid for `x > 0`; converges quickly for `x ≳ 2`.
pub(crate) fn si_continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..MAX_ITERATIONS {
        let a = -((i - 1) as f64).powi(2);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    let phase = Complex64::new(x.cos(), -x.sin());
    FRAC_PI_2 + (phase * h).im
}

/// Leading terms of the divergent asymptotic expansion; only good for large `x`.
#[cfg(test)]
pub(crate) fn si_asymptotic(x: f64, terms: usize) -> f64 {
    let inv2 = 1.0 / (x * x);
    let (mut f, mut g) = (0.0, 0.0);
    let (mut tf, mut tg) = (1.0 / x, inv2);
    for k in 0..terms {
        f += tf;
        g += tg;
        let k = k as f64;
        tf *= -(2.0 * k + 1.0) * (2.0 * k + 2.0) * inv2;
        tg *= -(2.0 * k + 2.0) * (2.0 * k + 3.0) * inv2;
    }
    FRAC_PI_2 - f * x.cos() - g * x.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_and_pi() {
        assert_eq!(sine_integral(0.0).unwrap(), 0.0);
        // reference from a 30-digit Maclaurin summation
        assert_relative_eq!(sine_integral(PI).unwrap(), 1.851_937_051_982_466_2, max_relative = 1e-14);
    }

    #[test]
    fn reference_values() {
        // 30-digit values (mpmath.si)
        let cases = [
            (0.5, 0.493_107_418_043_066_7),
            (4.0, 1.758_203_138_949_053_1),
            (10.0, 1.658_347_594_218_874_0),
            (100.0, 1.562_225_466_889_056_3),
            (1.0e6, 1.570_795_390_043_119_1),
        ];
        for (x, want) in cases {
            assert_relative_eq!(si(x), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(sine_integral(f64::NAN).is_err());
        assert!(sine_integral(f64::INFINITY).is_err());
    }

    #[test]
    fn large_argument_envelope() {
        let x = 1e4;
        let v = si(x);
        assert!((v - FRAC_PI_2).abs() <= 1e-4);
        assert_relative_eq!(v, si_asymptotic(x, 6), max_relative = 1e-14);
    }

    #[test]
    fn branches_agree_in_overlap() {
        let mut x = 2.0;
        while x <= 8.0 {
            assert_relative_eq!(si_series(x), si_continued_fraction(x), max_relative = 1e-10);
            x += 0.05;
        }
        let mut x = 30.0;
        while x <= 100.0 {
            assert_relative_eq!(si_asymptotic(x, 12), si_continued_fraction(x), max_relative = 1e-10);
            x += 0.37;
        }
    }

    #[test]
    fn odd_symmetry_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x: f64 = rng.random_range(-1e4..1e4);
            assert!((si(-x) + si(x)).abs() <= 1e-14);
        }
    }

    proptest! {
        #[test]
        fn derivative_is_sinc(x in 0.1f64..200.0) {
            let h = 1e-4;
            let numeric = (si(x + h) - si(x - h)) / (2.0 * h);
            prop_assert!((numeric - x.sin() / x).abs() <= 1e-8);
        }
    }
}

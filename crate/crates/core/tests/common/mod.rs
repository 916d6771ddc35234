#![allow(dead_code)]

use std::f64::consts::PI;

/// Elementary (non sine-integral) terms of the exact radial integral for the
/// phase kernel, obtained by integrating
/// `(2α/3π) ∫₀^κ q (qt − sin qt)(2j₀(qr) + P j₂(qr)) dq` term by term.
/// The exact integral equals the sine-integral closed form plus this remainder.
pub fn phase_oscillatory_remainder(t: f64, r: f64, theta: f64, alpha: f64, kappa: f64) -> f64 {
    let p = 3.0 * theta.cos().powi(2) - 1.0;
    let c = 2.0 * alpha / (3.0 * PI);
    let x = kappa * r;
    let (a, b) = (r - t, r + t);
    let sinc_over = |s: f64| if s == 0.0 { kappa } else { (kappa * s).sin() / s };
    let i0 = 0.5 * (sinc_over(a) - sinc_over(b));
    c * ((t / r.powi(3)) * ((2.0 - 4.0 * p) * x.sin() + (p - 2.0) * x * x.cos())
        + (p - 2.0) / r * i0
        + 3.0 * p / (2.0 * kappa * r.powi(3)) * ((kappa * a).cos() - (kappa * b).cos()))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

//! Bath-induced pair kernels.
//!
//! All quantities are dimensionless: lengths in dipole lengths `d`, times in
//! `d/c`, wave numbers in `1/d`. Two kernels enter the metric tensor: the
//! dephasing kernel `f(t, r, θ)` (direct decoherence) and the accumulated
//! phase `φ(t, r, θ)` of the bath-mediated dipole interaction (indirect
//! decoherence).
//!
//! In the continuum limit both reduce to one radial integral over the mode
//! wave number `q ∈ [0, κ]`:
//!
//! ```text
//! K(t, r, θ) = α/(3π) ∫₀^κ q · T(q, t) · W(q r, θ) dq
//! W(x, θ)    = 2 j₀(x) + (3cos²θ − 1) j₂(x)
//! ```
//!
//! where `W` is the polarization sum `1 − (û·k̂)²` averaged over mode directions
//! against `cos(k·R)`, and `T = (1 − cos qt)·coth(βq/2)` for `f` or
//! `T = 2(qt − sin qt)` for `φ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::specfun::si;

/// Fine-structure constant, the default coupling `α`.
pub const FINE_STRUCTURE: f64 = 1.0 / 137.036;

/// `arccos(1/√3)`, where `3cos²θ − 1` vanishes.
pub const MAGIC_ANGLE: f64 = 0.955_316_618_124_509_3;

/// Default absolute tolerance of the radial quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    pub alpha: f64,
    pub kappa: f64,
    /// `None` is zero temperature.
    pub inv_temperature: Option<f64>,
}

impl BathParams {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
        }
        Ok(BathParams { alpha, kappa, inv_temperature: None })
    }

    pub fn with_inv_temperature(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::domain(format!("inverse temperature must be positive, got {beta}")));
        }
        self.inv_temperature = Some(beta);
        Ok(self)
    }

    /// Advisory only: the dipole approximation needs `κ ≪ 1`.
    pub fn dipole_approximation_questionable(&self) -> bool {
        self.kappa >= 1.0
    }
}

/// Separation of a pair in dipole lengths and its angle to the common dipole axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub r: f64,
    pub theta: f64,
}

impl PairGeometry {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("separation must be finite and non-negative, got {r}")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain(format!("angle must lie in [0, π], got {theta}")));
        }
        Ok(PairGeometry { r, theta })
    }

    /// `3cos²θ − 1`.
    pub fn angular_factor(&self) -> f64 {
        let c = self.theta.cos();
        3.0 * c * c - 1.0
    }
}

/// Which time factor the radial quadrature integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKernel {
    /// `(1 − cos qt)·coth(βq/2)`, giving `f`.
    Dephasing,
    /// `2(qt − sin qt)`, giving `φ`.
    Phase,
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time must be finite and non-negative, got {t}")))
    }
}

/// Diagonal dephasing kernel at zero temperature,
/// `(2α/3π)(κ²/2 + (1 − cos κt − κt sin κt)/t²)`.
pub fn f_diag(t: f64, bath: &BathParams) -> Result<f64> {
    check_time(t)?;
    if bath.inv_temperature.is_some() {
        return Err(Error::domain("closed-form f_diag is zero temperature only; use reduced_quadrature"));
    }
    let kappa = bath.kappa;
    let x = kappa * t;
    let bracket = if x < 0.5 {
        // κ²·Σ_{k≥2} (−1)^k (2k−1) x^{2k−2}/(2k)!; the κ²/2 cancels exactly
        let x2 = x * x;
        let mut power = x2;
        let mut factorial = 24.0;
        let mut sum = 0.0;
        for k in 2..20 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * (2 * k - 1) as f64 * power / factorial;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            power *= x2;
            factorial *= ((2 * k + 1) * (2 * k + 2)) as f64;
        }
        kappa * kappa * sum
    } else {
        kappa * kappa / 2.0 + (1.0 - x.cos() - x * x.sin()) / (t * t)
    };
    Ok(2.0 * bath.alpha / (3.0 * PI) * bracket)
}

/// Closed-form accumulated phase built from sine integrals. The rapidly
/// oscillating `sin κr`, `cos κr`, `κr cos κr`-type terms are dropped; they
/// average out under Gaussian position spread `δr` by `exp(−(κδr)²/2)`.
pub fn phi_closed(t: f64, geom: &PairGeometry, bath: &BathParams) -> Result<f64> {
    check_time(t)?;
    if !(geom.r > 0.0) {
        return Err(Error::domain("phi_closed needs a positive separation"));
    }
    let r = geom.r;
    let kappa = bath.kappa;
    let p = geom.angular_factor();
    // (1 + 3cos2θ)/4 = p/2 and (3sin²θ − 2)/2 = −p/2
    let si_plus = si((r + t) * kappa);
    let si_minus = si((r - t) * kappa);
    let near = si_plus - si_minus;
    let far = ((r + t) * si_plus - (r - t) * si_minus - 2.0 * t * si(kappa * r)) / r;
    Ok(2.0 * bath.alpha / (PI * r * r) * 0.5 * p * (near - far))
}

/// Far-field phase `α (t/r³)(3cos²θ − 1) Θ(t/r − 1)`, with `Θ(0) = 1`.
pub fn phi_farfield(t: f64, geom: &PairGeometry, bath: &BathParams) -> Result<f64> {
    check_time(t)?;
    if !(geom.r > 0.0) {
        return Err(Error::domain("phi_farfield needs a positive separation"));
    }
    let r = geom.r;
    if t < r {
        return Ok(0.0);
    }
    Ok(bath.alpha * t / (r * r * r) * geom.angular_factor())
}

fn bessel_j0(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn bessel_j2(x: f64) -> f64 {
    if x < 1.0 {
        // x² Σ (−x²/2)^k / (k! (2k+5)!!)
        let y = -0.5 * x * x;
        let mut term = 1.0 / 15.0;
        let mut sum = term;
        for k in 1..30 {
            term *= y / (k as f64 * (2 * k + 5) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        x * x * sum
    } else {
        let (s, c) = x.sin_cos();
        (3.0 / (x * x * x) - 1.0 / x) * s - 3.0 * c / (x * x)
    }
}

/// Direction- and polarization-averaged weight `2 j₀(x) + (3cos²θ − 1) j₂(x)`.
pub fn geometric_weight(x: f64, angular_factor: f64) -> f64 {
    2.0 * bessel_j0(x) + angular_factor * bessel_j2(x)
}

fn time_factor(kernel: TimeKernel, q: f64, t: f64, beta: Option<f64>) -> f64 {
    let qt = q * t;
    match kernel {
        TimeKernel::Dephasing => {
            let s = (0.5 * qt).sin();
            let base = 2.0 * s * s;
            match beta {
                Some(b) => base / (0.5 * b * q).tanh(),
                None => base,
            }
        }
        TimeKernel::Phase => {
            if qt < 1e-2 {
                let y = qt * qt;
                2.0 * qt * y * (1.0 / 6.0 - y / 120.0 + y * y / 5040.0)
            } else {
                2.0 * (qt - qt.sin())
            }
        }
    }
}

/// Continuum limit of the mode sum as a single radial quadrature over
/// `q ∈ [0, κ]`, to absolute error `tol`. Includes every oscillatory term.
pub fn reduced_quadrature(
    t: f64,
    geom: &PairGeometry,
    bath: &BathParams,
    kernel: TimeKernel,
    tol: f64,
) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let r = geom.r;
    let p = geom.angular_factor();
    let beta = bath.inv_temperature;
    let integrand = |q: f64| q * time_factor(kernel, q, t, beta) * geometric_weight(q * r, p);
    let period = 2.0 * PI / (r + t);
    let prefactor = bath.alpha / (3.0 * PI);
    let result = quadrature::integrate(integrand, 0.0, bath.kappa, Some(period), tol / prefactor)
        .map_err(|e| match e {
            Error::Quadrature { estimate, .. } => Error::Quadrature { estimate: estimate * prefactor, tolerance: tol },
            other => other,
        })?;
    Ok(prefactor * result.value)
}

/// Off-diagonal dephasing kernel by quadrature; reduces to `f_diag` at `r = 0`.
pub fn f_offdiag(t: f64, geom: &PairGeometry, bath: &BathParams, tol: f64) -> Result<f64> {
    reduced_quadrature(t, geom, bath, TimeKernel::Dephasing, tol)
}

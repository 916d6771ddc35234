//! Monte Carlo gas average of the indirect term `Φ₀₀(t) = Σ_k φ²(t, r_k, θ_k)`.
//!
//! Samples are independent. Sample `i` draws from ChaCha8 seeded with the
//! user seed on stream `i`, so results do not depend on thread count or
//! evaluation order.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{pair_geometry, sample_gas_with, CountMode, GasSpec};
use crate::kernels::BathParams;
use crate::metric::KernelPolicy;

pub const GENERATOR: &str = "ChaCha8 (rand_chacha), stream = sample index";

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub generator: &'static str,
}

impl McResult {
    pub const CSV_HEADER: &'static str = "t,mean,std_error,n_samples,seed";

    pub fn write_csv_row<W: Write>(&self, t: f64, mut out: W) -> io::Result<()> {
        writeln!(out, "{},{},{},{},{}", t, self.mean, self.std_error, self.n_samples, self.seed)
    }
}

/// Poisson-count gas average; see [`average_phi00_with`].
pub fn average_phi00(spec: &GasSpec, bath: &BathParams, t: f64, n_samples: usize, policy: KernelPolicy) -> Result<McResult> {
    average_phi00_with(spec, bath, t, n_samples, policy, CountMode::Poisson)
}

pub fn average_phi00_with(
    spec: &GasSpec,
    bath: &BathParams,
    t: f64,
    n_samples: usize,
    policy: KernelPolicy,
    mode: CountMode,
) -> Result<McResult> {
    spec.validate()?;
    if !(t >= 0.0 && t <= spec.horizon) {
        return Err(Error::domain(format!("time {t} must lie in [0, horizon = {}]", spec.horizon)));
    }
    if n_samples < 2 {
        return Err(Error::domain("need at least two samples for an error bar"));
    }
    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let (config, mask) = sample_gas_with(spec, mode, &mut rng)?;
            let s = mask.selected()[0];
            let mut sum = 0.0;
            for &k in mask.unobserved() {
                let geom = pair_geometry(&config, s, k).map_err(|e| e.at_pair(s, k))?;
                let phi = policy.phase(t, &geom, bath, 1e-10)?;
                sum += phi * phi;
            }
            Ok(sum)
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McResult { mean, std_error: (var / n).sqrt(), n_samples, seed: spec.seed, generator: GENERATOR })
}

/// Exact far-field average over a uniform gas outside the exclusion ball,
/// `(16π/15) ρ α² t² (l⁻³ − t⁻³)`.
pub fn analytic_phi00_avg(spec: &GasSpec, bath: &BathParams, t: f64) -> Result<f64> {
    let l = spec.exclusion_radius;
    if !(t >= l) {
        return Err(Error::domain(format!("time {t} is inside the exclusion radius {l}")));
    }
    let alpha = bath.alpha;
    Ok(16.0 * PI / 15.0 * spec.density * alpha * alpha * t * t * (l.powi(-3) - t.powi(-3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::gas_scales;
    use crate::kernels::FINE_STRUCTURE;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;

    fn bath() -> BathParams {
        BathParams::new(FINE_STRUCTURE, 10.0).unwrap()
    }

    /// density giving `atoms` expected atoms between `l` and `t`
    fn density_for(atoms: f64, l: f64, t: f64) -> f64 {
        atoms / (4.0 / 3.0 * PI * (t.powi(3) - l.powi(3)))
    }

    #[test]
    fn angular_integral() {
        let r = integrate(|u| (3.0 * u * u - 1.0).powi(2), -1.0, 1.0, None, 1e-15).unwrap();
        assert!((r.value - 8.0 / 5.0).abs() <= 1e-12);
    }

    #[test]
    fn analytic_edges() {
        let spec = GasSpec { density: 1e-3, exclusion_radius: 10.0, horizon: 1e3, seed: 0 };
        assert_eq!(analytic_phi00_avg(&spec, &bath(), 10.0).unwrap(), 0.0);
        assert!(analytic_phi00_avg(&spec, &bath(), 9.0).is_err());
        let t = 100.0;
        let g = gas_scales(spec.density, spec.exclusion_radius, &bath()).unwrap();
        assert_relative_eq!(analytic_phi00_avg(&spec, &bath(), t).unwrap(), (g.gamma_g * t).powi(2), max_relative = 1.001e-3);
    }

    #[test]
    fn empty_light_cone() {
        let spec = GasSpec { density: 1e-3, exclusion_radius: 10.0, horizon: 50.0, seed: 3 };
        let r = average_phi00(&spec, &bath(), 9.5, 50, KernelPolicy::FarField).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn dilute_limit() {
        let spec = GasSpec { density: 1e-3 / (4.0 / 3.0 * PI * 1e6), exclusion_radius: 10.0, horizon: 100.0, seed: 3 };
        assert!(spec.expected_count() < 1e-3);
        let r = average_phi00(&spec, &bath(), 100.0, 200, KernelPolicy::FarField).unwrap();
        // a single atom in 200 samples would put the mean near 5e-3 atoms' worth
        let per_expected_atom = analytic_phi00_avg(&spec, &bath(), 100.0).unwrap() / spec.expected_count();
        assert!(r.mean <= 1e-2 * per_expected_atom);
    }

    #[test]
    fn far_field_mean_matches_analytic() {
        let (l, t) = (10.0, 40.0);
        let spec = GasSpec { density: density_for(50.0, l, t), exclusion_radius: l, horizon: t, seed: 21 };
        let r = average_phi00(&spec, &bath(), t, 1000, KernelPolicy::FarField).unwrap();
        let exact = analytic_phi00_avg(&spec, &bath(), t).unwrap();
        assert!((r.mean - exact).abs() <= 3.0 * r.std_error, "{} ± {} vs {exact}", r.mean, r.std_error);
    }

    #[test]
    fn fixed_count_mode() {
        let (l, t) = (10.0, 30.0);
        let spec = GasSpec { density: density_for(40.0, l, t), exclusion_radius: l, horizon: t, seed: 5 };
        let r = average_phi00_with(&spec, &bath(), t, 1000, KernelPolicy::FarField, CountMode::Fixed(40)).unwrap();
        let exact = analytic_phi00_avg(&spec, &bath(), t).unwrap();
        assert!((r.mean - exact).abs() <= 3.0 * r.std_error);
    }

    #[test]
    fn closed_form_and_far_field_agree() {
        let (l, t) = (10.0, 40.0);
        assert!(bath().kappa * l >= 50.0);
        let spec = GasSpec { density: density_for(50.0, l, t), exclusion_radius: l, horizon: t, seed: 8 };
        let far = average_phi00(&spec, &bath(), t, 400, KernelPolicy::FarField).unwrap();
        let closed = average_phi00(&spec, &bath(), t, 400, KernelPolicy::ClosedForm).unwrap();
        assert!(((closed.mean - far.mean) / far.mean).abs() <= 0.05);
    }

    #[test]
    fn seed_determinism() {
        let spec = GasSpec { density: 1e-3, exclusion_radius: 5.0, horizon: 30.0, seed: 99 };
        let a = average_phi00(&spec, &bath(), 25.0, 64, KernelPolicy::ClosedForm).unwrap();
        let b = average_phi00(&spec, &bath(), 25.0, 64, KernelPolicy::ClosedForm).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv_row(25.0, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with(",64,99\n"));
    }

    #[test]
    fn preconditions() {
        let spec = GasSpec { density: 1e-3, exclusion_radius: 5.0, horizon: 30.0, seed: 1 };
        assert!(average_phi00(&spec, &bath(), 31.0, 10, KernelPolicy::FarField).is_err());
        assert!(average_phi00(&spec, &bath(), 10.0, 1, KernelPolicy::FarField).is_err());
    }
}

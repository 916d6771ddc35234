//! Order-of-magnitude scales: crossover times, critical spacing and density.
//!
//! The formulas carry the displayed prefactors of relations that only hold up
//! to factors of order one; compare against numerics with loose tolerances.
//! Unit restoration (eV, metres, atoms/m³) lives here only.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{pair_geometry, AtomConfig, SelectionMask};
use crate::kernels::BathParams;

/// `ħc` in eV·m.
pub const HBAR_C_EV_M: f64 = 197.326_980_4e-9;

/// Effective neighbor number of a single selected atom.
///
/// Normalization: `n_nn = Σ_k (a/r_k)⁶ (3cos²θ_k − 1)²`, so that once every
/// unobserved atom is inside the light cone the far-field indirect term is
/// exactly `Φ₀₀ = n_nn (αt/a³)²`. The reference length `a` is the distance to
/// the nearest unobserved atom unless given explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSum {
    pub n_nn: f64,
    pub reference_length: f64,
}

pub fn effective_neighbors(config: &AtomConfig, mask: &SelectionMask) -> Result<NeighborSum> {
    let nearest = neighbor_geometries(config, mask)?
        .iter()
        .map(|g| g.0)
        .fold(f64::INFINITY, f64::min);
    if !nearest.is_finite() {
        return Ok(NeighborSum { n_nn: 0.0, reference_length: f64::NAN });
    }
    effective_neighbors_at(config, mask, nearest)
}

pub fn effective_neighbors_at(config: &AtomConfig, mask: &SelectionMask, spacing: f64) -> Result<NeighborSum> {
    if !(spacing > 0.0) {
        return Err(Error::domain(format!("reference spacing must be positive, got {spacing}")));
    }
    let n_nn = neighbor_geometries(config, mask)?
        .iter()
        .map(|&(r, p)| (spacing / r).powi(6) * p * p)
        .sum();
    Ok(NeighborSum { n_nn, reference_length: spacing })
}

fn neighbor_geometries(config: &AtomConfig, mask: &SelectionMask) -> Result<Vec<(f64, f64)>> {
    if mask.n() != 1 {
        return Err(Error::domain(format!("effective neighbor number needs one selected atom, got {}", mask.n())));
    }
    let s = mask.selected()[0];
    mask.unobserved()
        .iter()
        .map(|&k| {
            let g = pair_geometry(config, s, k).map_err(|e| e.at_pair(s, k))?;
            Ok((g.r, g.angular_factor()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeScales {
    pub n_nn: f64,
    /// Time after which indirect decoherence dominates; `None` without neighbors.
    pub t1: Option<f64>,
    /// Spacing below which indirect decoherence dominates from the start.
    pub a_c: f64,
    /// Short-time direct rate, `f ≈ γ²t²`.
    pub gamma: f64,
}

pub fn lattice_scales(spacing: f64, bath: &BathParams, n_nn: f64) -> LatticeScales {
    let (alpha, kappa) = (bath.alpha, bath.kappa);
    let t1 = (n_nn > 0.0).then(|| kappa * spacing.powi(3) / (3.0 * PI * alpha * n_nn).sqrt());
    LatticeScales {
        n_nn,
        t1,
        a_c: (12.0 * PI * alpha * n_nn).powf(1.0 / 6.0) / kappa.powf(2.0 / 3.0),
        gamma: short_time_rate(bath),
    }
}

/// `γ = √(α/12π) κ²`.
pub fn short_time_rate(bath: &BathParams) -> f64 {
    (bath.alpha / (12.0 * PI)).sqrt() * bath.kappa * bath.kappa
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasScales {
    /// `⟨Φ₀₀⟩ ≈ γ_G² t²`.
    pub gamma_g: f64,
    /// Crossover time; `None` at zero density.
    pub t2: Option<f64>,
    /// Critical density in atoms per cubic dipole length.
    pub rho_crit: f64,
}

pub fn gas_scales(density: f64, exclusion_radius: f64, bath: &BathParams) -> Result<GasScales> {
    if !(density >= 0.0 && density.is_finite()) {
        return Err(Error::domain(format!("density must be non-negative, got {density}")));
    }
    if !(exclusion_radius > 0.0) {
        return Err(Error::domain(format!("exclusion radius must be positive, got {exclusion_radius}")));
    }
    let l3 = exclusion_radius.powi(3);
    Ok(GasScales {
        gamma_g: bath.alpha * (16.0 * PI * density / (15.0 * l3)).sqrt(),
        t2: (density > 0.0).then(|| bath.kappa * (l3 / density).sqrt()),
        rho_crit: bath.kappa.powi(4) * l3,
    })
}

/// Saturation value of the direct kernel, `ακ²/(3π)`.
pub fn f_diag_limit(bath: &BathParams) -> f64 {
    bath.alpha * bath.kappa * bath.kappa / (3.0 * PI)
}

/// `κ = k_max d` for a cutoff photon energy `ħω_max` (eV) and dipole length `d` (m).
pub fn kappa_from_cutoff(cutoff_ev: f64, dipole_length_m: f64) -> f64 {
    cutoff_ev / HBAR_C_EV_M * dipole_length_m
}

/// Converts a density per cubic dipole length to atoms per m³.
pub fn density_per_m3(density: f64, dipole_length_m: f64) -> f64 {
    density / dipole_length_m.powi(3)
}

/// Critical gas density in atoms/m³ for a cutoff energy (eV), dipole length (m)
/// and scattering length in dipole lengths.
pub fn critical_density_per_m3(cutoff_ev: f64, dipole_length_m: f64, exclusion_radius: f64) -> Result<f64> {
    let kappa = kappa_from_cutoff(cutoff_ev, dipole_length_m);
    let bath = BathParams::new(crate::kernels::FINE_STRUCTURE, kappa)?;
    let scales = gas_scales(0.0, exclusion_radius, &bath)?;
    Ok(density_per_m3(scales.rho_crit, dipole_length_m))
}

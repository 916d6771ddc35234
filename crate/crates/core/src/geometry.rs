//! Atom configurations and pair geometry.
//!
//! Positions are in dipole lengths. All atoms share one dipole axis `û`.
//!
//! Plain-text format (one atom per line, `#` header lines):
//!
//! ```text
//! # dmt-config v1
//! # label: square-lattice 3x3 a=1
//! # units: dipole_length
//! # dipole: 0 0 1
//! # selected: 4
//! -1 -1 0
//! ...
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::kernels::PairGeometry;

pub type Position = Vector3<f64>;

/// Upper bound on atoms in one gas sample.
pub const MAX_GAS_ATOMS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomConfig {
    positions: Vec<Position>,
    dipole: Position,
    pub label: String,
}

impl AtomConfig {
    /// `dipole` is normalized; it must be non-zero and finite.
    pub fn new(positions: Vec<Position>, dipole: Position, label: impl Into<String>) -> Result<Self> {
        let norm = dipole.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::domain("dipole direction must be a finite non-zero vector"));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::domain(format!("atom {i} has a non-finite position")));
        }
        Ok(AtomConfig { positions, dipole: dipole / norm, label: label.into() })
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn dipole(&self) -> &Position {
        &self.dipole
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn to_text(&self, mask: Option<&SelectionMask>) -> String {
        let mut out = String::new();
        let d = &self.dipole;
        writeln!(out, "# dmt-config v1").unwrap();
        writeln!(out, "# label: {}", self.label).unwrap();
        writeln!(out, "# units: dipole_length").unwrap();
        writeln!(out, "# dipole: {} {} {}", d.x, d.y, d.z).unwrap();
        if let Some(mask) = mask {
            let sel: Vec<String> = mask.selected().iter().map(|i| i.to_string()).collect();
            writeln!(out, "# selected: {}", sel.join(" ")).unwrap();
        }
        for p in &self.positions {
            writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
        }
        out
    }

    /// Parses the text format; returns the selection when a `selected` header is present.
    pub fn from_text(text: &str) -> Result<(Self, Option<SelectionMask>)> {
        let mut label = String::new();
        let mut dipole = None;
        let mut selected = None;
        let mut positions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                if let Some(v) = header.strip_prefix("label:") {
                    label = v.trim().to_string();
                } else if let Some(v) = header.strip_prefix("dipole:") {
                    let xs = parse_floats(v, lineno)?;
                    if xs.len() != 3 {
                        return Err(Error::domain(format!("line {}: dipole needs 3 components", lineno + 1)));
                    }
                    dipole = Some(Position::new(xs[0], xs[1], xs[2]));
                } else if let Some(v) = header.strip_prefix("selected:") {
                    let idx = v
                        .split_whitespace()
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::domain(format!("line {}: {e}", lineno + 1)))?;
                    selected = Some(idx);
                }
                continue;
            }
            let xs = parse_floats(line, lineno)?;
            if xs.len() != 3 {
                return Err(Error::domain(format!("line {}: expected `x y z`", lineno + 1)));
            }
            positions.push(Position::new(xs[0], xs[1], xs[2]));
        }
        let dipole = dipole.ok_or_else(|| Error::domain("missing `# dipole:` header"))?;
        let config = AtomConfig::new(positions, dipole, label)?;
        let mask = match selected {
            Some(sel) => Some(SelectionMask::new(sel, config.len())?),
            None => None,
        };
        Ok((config, mask))
    }
}

fn parse_floats(s: &str, lineno: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|w| w.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::domain(format!("line {}: {e}", lineno + 1)))
}

/// Partition of the atoms into observed (`selected`) and traced-out atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    selected: Vec<usize>,
    unobserved: Vec<usize>,
}

impl SelectionMask {
    pub fn new(selected: Vec<usize>, n_atoms: usize) -> Result<Self> {
        if selected.is_empty() {
            return Err(Error::domain("at least one atom must be selected"));
        }
        let mut seen = vec![false; n_atoms];
        for &i in &selected {
            if i >= n_atoms {
                return Err(Error::domain(format!("selected index {i} out of range for {n_atoms} atoms")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::domain(format!("atom {i} selected twice")));
            }
        }
        let unobserved = (0..n_atoms).filter(|&i| !seen[i]).collect();
        Ok(SelectionMask { selected, unobserved })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn unobserved(&self) -> &[usize] {
        &self.unobserved
    }

    pub fn n(&self) -> usize {
        self.selected.len()
    }
}

/// Dipole axis in the x–z plane at `tilt` from the x axis; `tilt = π/2` is
/// perpendicular to a lattice in the z = 0 plane.
pub fn tilted_dipole(tilt: f64) -> Position {
    Position::new(tilt.cos(), 0.0, tilt.sin())
}

/// `side × side` square lattice in the z = 0 plane, centered on the origin,
/// with the center atom selected.
pub fn square_lattice_2d(side: usize, spacing: f64, dipole: Position) -> Result<(AtomConfig, SelectionMask)> {
    if side % 2 == 0 {
        return Err(Error::domain(format!("lattice side must be odd, got {side}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::domain(format!("lattice spacing must be positive, got {spacing}")));
    }
    let half = (side / 2) as i64;
    let mut positions = Vec::with_capacity(side * side);
    for iy in -half..=half {
        for ix in -half..=half {
            positions.push(Position::new(ix as f64 * spacing, iy as f64 * spacing, 0.0));
        }
    }
    let center = side * side / 2;
    let config = AtomConfig::new(positions, dipole, format!("square-lattice {side}x{side} a={spacing}"))?;
    let mask = SelectionMask::new(vec![center], config.len())?;
    Ok((config, mask))
}

/// Collinear atoms along x with the dipole at `dipole_angle` to the chain axis;
/// the middle atom (lower middle for even counts) is selected.
pub fn chain_1d(count: usize, spacing: f64, dipole_angle: f64) -> Result<(AtomConfig, SelectionMask)> {
    if count == 0 {
        return Err(Error::domain("chain needs at least one atom"));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::domain(format!("chain spacing must be positive, got {spacing}")));
    }
    let center = (count - 1) / 2;
    let positions = (0..count)
        .map(|i| Position::new((i as f64 - center as f64) * spacing, 0.0, 0.0))
        .collect();
    let config = AtomConfig::new(positions, tilted_dipole(dipole_angle), format!("chain n={count} a={spacing}"))?;
    let mask = SelectionMask::new(vec![center], config.len())?;
    Ok((config, mask))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasSpec {
    /// Atoms per cubic dipole length.
    pub density: f64,
    /// Minimum approach to the selected atom (scattering length).
    pub exclusion_radius: f64,
    /// Radius of the sampling ball.
    pub horizon: f64,
    pub seed: u64,
}

impl GasSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::domain(format!("gas density must be positive, got {}", self.density)));
        }
        if !(self.exclusion_radius > 0.0) {
            return Err(Error::domain("exclusion radius must be positive"));
        }
        if !(self.horizon > self.exclusion_radius && self.horizon.is_finite()) {
            return Err(Error::domain("horizon must exceed the exclusion radius"));
        }
        Ok(())
    }

    /// Expected atom count in the shell between exclusion radius and horizon.
    pub fn expected_count(&self) -> f64 {
        4.0 / 3.0 * PI * self.density * (self.horizon.powi(3) - self.exclusion_radius.powi(3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountMode {
    /// Poisson count with mean `density × shell volume`.
    #[default]
    Poisson,
    Fixed(usize),
}

/// Cold-gas sample: selected atom at the origin, the rest uniform in the
/// ball of radius `horizon` with points inside `exclusion_radius` redrawn.
/// Dipoles along z.
pub fn sample_gas(spec: &GasSpec, mode: CountMode) -> Result<(AtomConfig, SelectionMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_gas_with(spec, mode, &mut rng)
}

pub fn sample_gas_with<R: RngCore>(spec: &GasSpec, mode: CountMode, rng: &mut R) -> Result<(AtomConfig, SelectionMask)> {
    spec.validate()?;
    let count = match mode {
        CountMode::Fixed(n) => n,
        CountMode::Poisson => {
            let mean = spec.expected_count();
            if mean > MAX_GAS_ATOMS as f64 {
                return Err(Error::Sampling(format!("expected {mean:.3e} atoms exceeds limit {MAX_GAS_ATOMS}")));
            }
            if mean <= 0.0 {
                0
            } else {
                let poisson = Poisson::new(mean).map_err(|e| Error::Sampling(e.to_string()))?;
                poisson.sample(rng) as usize
            }
        }
    };
    if count > MAX_GAS_ATOMS {
        return Err(Error::Sampling(format!("{count} atoms exceeds limit {MAX_GAS_ATOMS}")));
    }
    let budget = 64 * count + 1024;
    let mut attempts = 0usize;
    let mut positions = Vec::with_capacity(count + 1);
    positions.push(Position::zeros());
    let l = spec.exclusion_radius;
    while positions.len() <= count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Sampling(format!(
                "rejection budget of {budget} draws exhausted after placing {} atoms",
                positions.len() - 1
            )));
        }
        let radius = spec.horizon * rng.random::<f64>().cbrt();
        if radius < l {
            continue;
        }
        let cos_t: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        positions.push(Position::new(radius * sin_t * phi.cos(), radius * sin_t * phi.sin(), radius * cos_t));
    }
    let config = AtomConfig::new(positions, Position::z(), format!("gas rho={} l={}", spec.density, l))?;
    let mask = SelectionMask::new(vec![0], config.len())?;
    Ok((config, mask))
}

/// Separation and angle to the dipole axis for atoms `i`, `j`.
pub fn pair_geometry(config: &AtomConfig, i: usize, j: usize) -> Result<PairGeometry> {
    let n = config.len();
    if i >= n || j >= n {
        return Err(Error::domain(format!("pair ({i}, {j}) out of range for {n} atoms")));
    }
    if i == j {
        return Err(Error::domain("pair geometry needs two distinct atoms"));
    }
    let sep = config.positions[i] - config.positions[j];
    let r = sep.norm();
    if r == 0.0 {
        return Err(Error::domain(format!("atoms {i} and {j} coincide")));
    }
    let cos = (config.dipole.dot(&sep) / r).clamp(-1.0, 1.0);
    PairGeometry::new(r, cos.acos())
}

/// Displace every atom by an isotropic Gaussian of per-axis spread `sigma`.
pub fn apply_jitter(config: &AtomConfig, sigma: f64, seed: u64) -> Result<AtomConfig> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("jitter spread must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(config.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Sampling(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = config
        .positions
        .iter()
        .map(|p| p + Position::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    Ok(AtomConfig { positions, dipole: config.dipole, label: format!("{} jitter={sigma}", config.label) })
}

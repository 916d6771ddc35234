//! Decoherence metric tensor `M(t) = 4f(t) + 2Φ(t)` over the selected atoms,
//! codeword distances and the pseudo-metric property checks.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{pair_geometry, AtomConfig, SelectionMask};
use crate::kernels::{self, BathParams, PairGeometry, TimeKernel};

/// Relative numerical floor: quadratic forms of unit vectors may dip to
/// `-EPS_REL × trace(M)` before they count as violations.
pub const EPS_REL: f64 = 1e-10;

/// Default `max |M_ij|` below which the small-tensor prediction is trusted.
pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 0.1;

/// Largest selection searched exhaustively by [`find_null_pairs`].
pub const NULL_SEARCH_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelPolicy {
    #[default]
    ClosedForm,
    FarField,
    Quadrature,
}

impl KernelPolicy {
    /// Phase kernel `φ(t, r, θ)` under this policy.
    pub fn phase(&self, t: f64, geom: &PairGeometry, bath: &BathParams, quad_rel_tol: f64) -> Result<f64> {
        match self {
            KernelPolicy::ClosedForm => kernels::phi_closed(t, geom, bath),
            KernelPolicy::FarField => kernels::phi_farfield(t, geom, bath),
            KernelPolicy::Quadrature => {
                let r = geom.r;
                let scale = bath.alpha * t.max(1.0 / bath.kappa) / (r * r * r);
                kernels::reduced_quadrature(t, geom, bath, TimeKernel::Phase, quad_rel_tol * scale)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub policy: KernelPolicy,
    /// Quadrature tolerance relative to the natural kernel scale
    /// (`f_diag(t)` for the dephasing kernel, `α max(t, 1/κ)/r³` for the phase).
    pub quad_rel_tol: f64,
    pub validity_threshold: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            policy: KernelPolicy::ClosedForm,
            quad_rel_tol: 1e-12,
            validity_threshold: DEFAULT_VALIDITY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub time: f64,
    /// The `4f_ij` term.
    pub direct: DMatrix<f64>,
    /// The `2Φ_ij` term.
    pub indirect: DMatrix<f64>,
    pub validity_threshold: f64,
    pub valid: bool,
}

impl MetricTensor {
    pub fn from_parts(time: f64, direct: DMatrix<f64>, indirect: DMatrix<f64>, validity_threshold: f64) -> Result<Self> {
        let n = direct.nrows();
        for (m, name) in [(&direct, "direct"), (&indirect, "indirect")] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension { expected: n, found: m.ncols().max(m.nrows()) });
            }
            for i in 0..n {
                for j in 0..i {
                    if m[(i, j)] != m[(j, i)] {
                        return Err(Error::domain(format!("{name} part is not symmetric at ({i}, {j})")));
                    }
                }
            }
        }
        let max = (&direct + &indirect).amax();
        Ok(MetricTensor { time, direct, indirect, validity_threshold, valid: max < validity_threshold })
    }

    pub fn n(&self) -> usize {
        self.direct.nrows()
    }

    pub fn total(&self) -> DMatrix<f64> {
        &self.direct + &self.indirect
    }

    pub fn trace(&self) -> f64 {
        self.direct.trace() + self.indirect.trace()
    }

    /// Numerical floor for quadratic forms of unit vectors.
    pub fn eps_num(&self) -> f64 {
        EPS_REL * self.trace()
    }

    /// Row-major CSV with a `t,valid,n` header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,valid,n")?;
        writeln!(out, "{},{},{}", self.time, self.valid, self.n())?;
        let total = self.total();
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n()).map(|j| total[(i, j)].to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Pointer-basis label: a string of `±1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword(Vec<i8>);

impl Codeword {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(Error::domain(format!("codeword entries must be ±1, got {b}")));
        }
        Ok(Codeword(bits))
    }

    pub fn uniform(n: usize, bit: i8) -> Result<Self> {
        Codeword::new(vec![bit; n])
    }

    /// Codeword for the bit pattern of `index` (bit k set → −1).
    pub fn from_index(index: u64, n: usize) -> Self {
        Codeword((0..n).map(|k| if index >> k & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn complement(&self) -> Self {
        Codeword(self.0.iter().map(|b| -b).collect())
    }
}

impl std::fmt::Display for Codeword {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            f.write_str(if *b > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Assemble `M(t)` for the selected atoms.
pub fn build_metric(
    config: &AtomConfig,
    mask: &SelectionMask,
    bath: &BathParams,
    t: f64,
    options: &MetricOptions,
) -> Result<MetricTensor> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be finite and non-negative, got {t}")));
    }
    if mask.selected().len() + mask.unobserved().len() != config.len() {
        return Err(Error::Dimension { expected: config.len(), found: mask.selected().len() + mask.unobserved().len() });
    }
    let sel = mask.selected();
    let unobs = mask.unobserved();
    let n = sel.len();

    let diag = match bath.inv_temperature {
        None => kernels::f_diag(t, bath)?,
        Some(_) => {
            let origin = PairGeometry { r: 0.0, theta: 0.0 };
            let scale = bath.alpha * bath.kappa * bath.kappa;
            kernels::f_offdiag(t, &origin, bath, options.quad_rel_tol * scale)?
        }
    };
    let off_tol = options.quad_rel_tol * diag.max(f64::MIN_POSITIVE);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..a).map(move |b| (a, b))).collect();
    let off: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (i, j) = (sel[a], sel[b]);
            let geom = pair_geometry(config, i, j).map_err(|e| e.at_pair(i, j))?;
            if t == 0.0 {
                return Ok(0.0);
            }
            kernels::f_offdiag(t, &geom, bath, off_tol).map_err(|e| e.at_pair(i, j))
        })
        .collect::<Result<_>>()?;
    let mut direct = DMatrix::from_diagonal_element(n, n, 4.0 * diag);
    for (&(a, b), &v) in pairs.iter().zip(&off) {
        direct[(a, b)] = 4.0 * v;
        direct[(b, a)] = 4.0 * v;
    }

    // phases[a * m + k] = φ(selected a, unobserved k)
    let m = unobs.len();
    let phases: Vec<f64> = (0..n * m)
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (sel[idx / m], unobs[idx % m]);
            let geom = pair_geometry(config, i, k).map_err(|e| e.at_pair(i, k))?;
            options.policy.phase(t, &geom, bath, options.quad_rel_tol).map_err(|e| e.at_pair(i, k))
        })
        .collect::<Result<_>>()?;
    let mut indirect = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let row_a = &phases[a * m..(a + 1) * m];
            let row_b = &phases[b * m..(b + 1) * m];
            let sum: f64 = row_a.iter().zip(row_b).map(|(x, y)| x * y).sum();
            indirect[(a, b)] = 2.0 * sum;
            indirect[(b, a)] = 2.0 * sum;
        }
    }
    MetricTensor::from_parts(t, direct, indirect, options.validity_threshold)
}

fn difference(metric: &MetricTensor, s: &Codeword, s2: &Codeword) -> Result<DVector<f64>> {
    let n = metric.n();
    for c in [s, s2] {
        if c.len() != n {
            return Err(Error::Dimension { expected: n, found: c.len() });
        }
    }
    Ok(DVector::from_iterator(n, s.0.iter().zip(&s2.0).map(|(a, b)| f64::from(a - b))))
}

fn clamp_form(value: f64, floor: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -floor {
        Ok(0.0)
    } else {
        Err(Error::NegativeQuadraticForm { value, floor })
    }
}

fn form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// Squared distance `¼ ΔᵀMΔ` restricted to one part of the tensor.
fn squared_distance_of(m: &DMatrix<f64>, metric: &MetricTensor, s: &Codeword, s2: &Codeword) -> Result<f64> {
    let delta = difference(metric, s, s2)?;
    let floor = metric.eps_num() * delta.norm_squared();
    Ok(0.25 * clamp_form(form(m, &delta), floor)?)
}

/// `½ √(ΔᵀMΔ)` with `Δ = s − s2`.
pub fn distance(metric: &MetricTensor, s: &Codeword, s2: &Codeword) -> Result<f64> {
    Ok(squared_distance_of(&metric.total(), metric, s, s2)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoherence {
    pub value: f64,
    pub valid: bool,
}

/// Small-tensor prediction `d ≈ ‖s − s2‖²_M`.
pub fn decoherence(metric: &MetricTensor, s: &Codeword, s2: &Codeword) -> Result<Decoherence> {
    let d = distance(metric, s, s2)?;
    Ok(Decoherence { value: d * d, valid: metric.valid })
}

/// Direct and indirect contributions to the decoherence; they add to the total.
pub fn decoherence_split(metric: &MetricTensor, s: &Codeword, s2: &Codeword) -> Result<(f64, f64)> {
    Ok((
        squared_distance_of(&metric.direct, metric, s, s2)?,
        squared_distance_of(&metric.indirect, metric, s, s2)?,
    ))
}

pub fn hamming(s: &Codeword, s2: &Codeword) -> Result<usize> {
    if s.len() != s2.len() {
        return Err(Error::Dimension { expected: s.len(), found: s2.len() });
    }
    Ok(s.0.iter().zip(&s2.0).filter(|(a, b)| a != b).count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonNegativityReport {
    pub trials: usize,
    pub violations: usize,
    pub direct_violations: usize,
    pub indirect_violations: usize,
    /// Smallest `xᵀMx / trace` over the unit test vectors.
    pub min_normalized_form: f64,
    /// Smallest eigenvalue of the indirect (Gram) part relative to its largest.
    pub indirect_min_eigen_ratio: f64,
}

impl NonNegativityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.direct_violations == 0 && self.indirect_violations == 0
    }
}

/// Random unit vectors `x` must give `xᵀMx ≥ −ε_num`, for the total tensor
/// and for the direct and indirect parts separately.
pub fn check_nonnegative(metric: &MetricTensor, trials: usize, seed: u64) -> NonNegativityReport {
    let n = metric.n();
    let total = metric.total();
    let floor = metric.eps_num();
    let trace = metric.trace();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = NonNegativityReport {
        trials,
        violations: 0,
        direct_violations: 0,
        indirect_violations: 0,
        min_normalized_form: f64::INFINITY,
        indirect_min_eigen_ratio: gram_eigen_ratio(&metric.indirect),
    };
    for _ in 0..trials {
        let mut x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = x.norm();
        if norm == 0.0 {
            continue;
        }
        x /= norm;
        let q = form(&total, &x);
        if q < -floor {
            report.violations += 1;
        }
        if form(&metric.direct, &x) < -floor {
            report.direct_violations += 1;
        }
        if form(&metric.indirect, &x) < -floor {
            report.indirect_violations += 1;
        }
        if trace > 0.0 {
            report.min_normalized_form = report.min_normalized_form.min(q / trace);
        }
    }
    report
}

fn gram_eigen_ratio(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.max();
    if max <= 0.0 {
        0.0
    } else {
        eig.min() / max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleReport {
    pub triples: usize,
    pub violations: usize,
    /// Smallest `‖s−s'‖ + ‖s'−s''‖ − ‖s−s''‖` seen.
    pub min_slack: f64,
}

impl TriangleReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Triangle inequality on random codeword triples, with slack `√ε_num`
/// (the distance-scale counterpart of the quadratic-form floor).
pub fn check_triangle(metric: &MetricTensor, triples: usize, seed: u64) -> Result<TriangleReport> {
    let n = metric.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = metric.eps_num().max(0.0).sqrt();
    let random_word = |rng: &mut ChaCha8Rng| {
        Codeword((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    };
    let mut report = TriangleReport { triples, violations: 0, min_slack: f64::INFINITY };
    for _ in 0..triples {
        let a = random_word(&mut rng);
        let b = random_word(&mut rng);
        let c = random_word(&mut rng);
        let gap = distance(metric, &a, &b)? + distance(metric, &b, &c)? - distance(metric, &a, &c)?;
        report.min_slack = report.min_slack.min(gap);
        if gap < -slack {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// All codeword pairs `s ≠ s'` at distance `≤ 1e-8·√trace`: directions of a
/// decoherence-free subspace. Each unordered pair is listed once.
pub fn find_null_pairs(metric: &MetricTensor, max_n: usize) -> Result<Vec<(Codeword, Codeword)>> {
    let n = metric.n();
    let limit = max_n.min(NULL_SEARCH_LIMIT);
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    let threshold = 1e-8 * metric.trace().max(0.0).sqrt();
    let words: Vec<Codeword> = (0..1u64 << n).map(|i| Codeword::from_index(i, n)).collect();
    let mut out = Vec::new();
    for (i, a) in words.iter().enumerate() {
        for b in &words[i + 1..] {
            if distance(metric, a, b)? <= threshold {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    Ok(out)
}

//! Evaluation of a scenario and the files it produces.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dmt_core::asymptotics::{effective_neighbors, f_diag_limit, gas_scales, lattice_scales, GasScales, LatticeScales};
use dmt_core::ensemble::{average_phi00_with, McResult};
use dmt_core::geometry::{chain_1d, square_lattice_2d, tilted_dipole, AtomConfig, CountMode, GasSpec, SelectionMask};
use dmt_core::kernels::{self, BathParams, PairGeometry};
use dmt_core::metric::{
    build_metric, check_nonnegative, check_triangle, decoherence_split, Codeword, KernelPolicy, MetricOptions, MetricTensor,
};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::curve::{self, crossing_count, crossover_detect, initial_exponent, plateau, regrowth_exponent, CurvePoint};
use crate::scenario::{parse_codeword, GeometrySection, PolicyName, Scenario, SweepParameter};
use crate::CliError;

/// Command-line overrides of scenario settings.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed_override: Option<u64>,
    pub policy: Option<PolicyName>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scales {
    Lattice(LatticeScales),
    Gas(GasScales),
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySummary {
    pub time_points: usize,
    pub trials: usize,
    pub violations: usize,
    pub min_normalized_form: f64,
    pub min_gram_ratio: f64,
    pub triples: usize,
    pub triangle_violations: usize,
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    /// `parameter=value` for sweeps, empty otherwise.
    pub label: String,
    pub sweep_value: Option<f64>,
    pub bath: BathParams,
    pub curve: Vec<CurvePoint>,
    /// `Φ₀₀` of the first selected atom at each grid time.
    pub phi00: Vec<f64>,
    pub scales: Scales,
    pub properties: Option<PropertySummary>,
    pub ensemble: Option<Vec<(f64, McResult)>>,
    pub n_selected: usize,
    pub n_unobserved: usize,
}

#[derive(Debug)]
pub struct RunOutput {
    pub cases: Vec<CaseResult>,
    pub files: Vec<PathBuf>,
}

fn cfg_err(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.into(), message: message.into() }
}

fn core_error(key: &str, context: &str, e: dmt_core::Error) -> CliError {
    if e.is_numerical() {
        CliError::Numerical(format!("{context}: {e}"))
    } else {
        cfg_err(key, format!("{context}: {e}"))
    }
}

/// Evaluate every sweep value of the scenario without writing anything.
pub fn evaluate(s: &Scenario, opts: &RunOptions) -> Result<Vec<CaseResult>, CliError> {
    let cases: Vec<(String, Option<f64>, BathParams, GeometrySection)> = match &s.sweep {
        None => vec![(String::new(), None, bath_of(s)?, s.geometry.clone())],
        Some(sw) => sw
            .values
            .iter()
            .map(|&v| {
                let mut bath = bath_of(s)?;
                let mut geometry = s.geometry.clone();
                apply_sweep(sw.parameter, v, &mut bath, &mut geometry)?;
                Ok((format!("{}={v}", sw.parameter.name()), Some(v), bath, geometry))
            })
            .collect::<Result<_, CliError>>()?,
    };
    cases
        .into_par_iter()
        .map(|(label, value, bath, geometry)| {
            let mut r = match geometry {
                GeometrySection::Gas { density, exclusion_radius, horizon, count, samples } => {
                    let spec = GasSpec { density, exclusion_radius, horizon, seed: seed_of(s, opts) };
                    let mode = count.map_or(CountMode::Poisson, CountMode::Fixed);
                    evaluate_gas(s, opts, &bath, &spec, mode, samples)?
                }
                other => {
                    let (config, mask) = build_geometry(s, &other)?;
                    evaluate_fixed(s, opts, &bath, &config, &mask)?
                }
            };
            r.label = label;
            r.sweep_value = value;
            Ok(r)
        })
        .collect()
}

fn seed_of(s: &Scenario, opts: &RunOptions) -> u64 {
    opts.seed_override.unwrap_or(s.run.seed)
}

fn policy_of(s: &Scenario, opts: &RunOptions) -> KernelPolicy {
    opts.policy.unwrap_or(s.run.policy).into()
}

fn bath_of(s: &Scenario) -> Result<BathParams, CliError> {
    let bath = BathParams::new(s.bath.alpha, s.bath.kappa).map_err(|e| cfg_err("bath", e.to_string()))?;
    match s.bath.inv_temperature {
        Some(beta) => bath.with_inv_temperature(beta).map_err(|e| cfg_err("bath.inv_temperature", e.to_string())),
        None => Ok(bath),
    }
}

fn apply_sweep(p: SweepParameter, v: f64, bath: &mut BathParams, g: &mut GeometrySection) -> Result<(), CliError> {
    let target = match (p, g) {
        (SweepParameter::Kappa, _) => &mut bath.kappa,
        (SweepParameter::Spacing, GeometrySection::Lattice { spacing, .. } | GeometrySection::Chain { spacing, .. }) => spacing,
        (SweepParameter::DipoleTilt, GeometrySection::Lattice { tilt, .. } | GeometrySection::Chain { tilt, .. }) => tilt,
        (SweepParameter::Density, GeometrySection::Gas { density, .. }) => density,
        (SweepParameter::ExclusionRadius, GeometrySection::Gas { exclusion_radius, .. }) => exclusion_radius,
        _ => return Err(cfg_err("sweep.parameter", format!("{} does not apply to this geometry", p.name()))),
    };
    *target = v;
    Ok(())
}

fn build_geometry(s: &Scenario, g: &GeometrySection) -> Result<(AtomConfig, SelectionMask), CliError> {
    let (config, default_mask) = match g {
        GeometrySection::Lattice { side, spacing, tilt } => {
            let (c, m) = square_lattice_2d(*side, *spacing, tilted_dipole(tilt.to_radians()))
                .map_err(|e| cfg_err("geometry", e.to_string()))?;
            (c, Some(m))
        }
        GeometrySection::Chain { count, spacing, tilt } => {
            let (c, m) = chain_1d(*count, *spacing, tilt.to_radians()).map_err(|e| cfg_err("geometry", e.to_string()))?;
            (c, Some(m))
        }
        GeometrySection::File { path } => {
            let text = fs::read_to_string(path).map_err(|e| cfg_err("geometry.path", format!("{}: {e}", path.display())))?;
            AtomConfig::from_text(&text).map_err(|e| cfg_err("geometry.path", e.to_string()))?
        }
        GeometrySection::Gas { .. } => unreachable!("gas scenarios are sampled per time point"),
    };
    let mask = match (&s.selection.indices, default_mask) {
        (Some(idx), _) => SelectionMask::new(idx.clone(), config.len()).map_err(|e| cfg_err("selection.indices", e.to_string()))?,
        (None, Some(m)) => m,
        (None, None) => return Err(cfg_err("selection.indices", "the configuration file selects no atoms")),
    };
    Ok((config, mask))
}

fn codewords(s: &Scenario, n: usize) -> Result<(Codeword, Codeword), CliError> {
    let word = |key: &str, text: &Option<String>| -> Result<Option<Codeword>, CliError> {
        let Some(text) = text else { return Ok(None) };
        let bits = parse_codeword(text).map_err(|m| cfg_err(key, m))?;
        if bits.len() != n {
            return Err(cfg_err(key, format!("length {} does not match {n} selected atoms", bits.len())));
        }
        Codeword::new(bits).map(Some).map_err(|e| cfg_err(key, e.to_string()))
    };
    let a = match word("selection.codeword", &s.selection.codeword)? {
        Some(w) => w,
        None => Codeword::uniform(n, 1).map_err(|e| cfg_err("selection", e.to_string()))?,
    };
    let b = word("selection.codeword_prime", &s.selection.codeword_prime)?.unwrap_or_else(|| a.complement());
    Ok((a, b))
}

struct TimePoint {
    point: CurvePoint,
    phi00: f64,
    trials: usize,
    violations: usize,
    min_form: f64,
    gram_ratio: f64,
    triangle_violations: usize,
    min_slack: f64,
}

fn evaluate_fixed(
    s: &Scenario,
    opts: &RunOptions,
    bath: &BathParams,
    config: &AtomConfig,
    mask: &SelectionMask,
) -> Result<CaseResult, CliError> {
    let (a, b) = codewords(s, mask.n())?;
    let options = MetricOptions {
        policy: policy_of(s, opts),
        validity_threshold: s.run.validity_threshold,
        ..MetricOptions::default()
    };
    let seed = seed_of(s, opts);
    let run = &s.run;
    let points: Vec<TimePoint> = s
        .time
        .grid()
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let ctx = format!("t = {t:e}");
            let m = build_metric(config, mask, bath, t, &options).map_err(|e| core_error("geometry", &ctx, e))?;
            let (dir, ind) = decoherence_split(&m, &a, &b).map_err(|e| core_error("selection", &ctx, e))?;
            let nn = check_nonnegative(&m, run.property_trials, seed.wrapping_add(i as u64));
            let tri = check_triangle(&m, run.triangle_triples, seed.wrapping_add(i as u64))
                .map_err(|e| core_error("selection", &ctx, e))?;
            if !nn.passed() {
                return Err(CliError::Numerical(format!(
                    "{ctx}: metric tensor failed the non-negativity check ({} of {} trials, min xᵀMx/trace = {:e})",
                    nn.violations + nn.direct_violations + nn.indirect_violations,
                    nn.trials,
                    nn.min_normalized_form
                )));
            }
            Ok(TimePoint {
                point: CurvePoint::new(t, dir, ind, m.valid),
                phi00: 0.5 * m.indirect[(0, 0)],
                trials: nn.trials,
                violations: nn.violations,
                min_form: nn.min_normalized_form,
                gram_ratio: nn.indirect_min_eigen_ratio,
                triangle_violations: tri.violations,
                min_slack: tri.min_slack,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let scales = if mask.n() != 1 {
        Scales::Unavailable(format!("scales need a single selected atom, have {}", mask.n()))
    } else {
        let nb = effective_neighbors(config, mask).map_err(|e| cfg_err("selection", e.to_string()))?;
        if nb.n_nn > 0.0 {
            Scales::Lattice(lattice_scales(nb.reference_length, bath, nb.n_nn))
        } else {
            Scales::Unavailable("no unobserved atom off the magic cone".into())
        }
    };
    let properties = PropertySummary {
        time_points: points.len(),
        trials: points.iter().map(|p| p.trials).sum(),
        violations: points.iter().map(|p| p.violations).sum(),
        min_normalized_form: points.iter().map(|p| p.min_form).fold(f64::INFINITY, f64::min),
        min_gram_ratio: points.iter().map(|p| p.gram_ratio).fold(f64::INFINITY, f64::min),
        triples: run.triangle_triples * points.len(),
        triangle_violations: points.iter().map(|p| p.triangle_violations).sum(),
        min_slack: points.iter().map(|p| p.min_slack).fold(f64::INFINITY, f64::min),
    };
    Ok(CaseResult {
        label: String::new(),
        sweep_value: None,
        bath: *bath,
        curve: points.iter().map(|p| p.point).collect(),
        phi00: points.iter().map(|p| p.phi00).collect(),
        scales,
        properties: Some(properties),
        ensemble: None,
        n_selected: mask.n(),
        n_unobserved: mask.unobserved().len(),
    })
}

/// Self term of the dephasing kernel, by quadrature at finite temperature.
fn direct_kernel(t: f64, bath: &BathParams) -> dmt_core::Result<f64> {
    match bath.inv_temperature {
        None => kernels::f_diag(t, bath),
        Some(_) => {
            let tol = 1e-12 * bath.alpha * bath.kappa * bath.kappa;
            kernels::f_offdiag(t, &PairGeometry { r: 0.0, theta: 0.0 }, bath, tol)
        }
    }
}

fn evaluate_gas(
    s: &Scenario,
    opts: &RunOptions,
    bath: &BathParams,
    spec: &GasSpec,
    mode: CountMode,
    samples: usize,
) -> Result<CaseResult, CliError> {
    let policy = policy_of(s, opts);
    let mut curve = Vec::new();
    let mut phi00 = Vec::new();
    let mut ensemble = Vec::new();
    for t in s.time.grid() {
        let ctx = format!("t = {t:e}");
        let f = direct_kernel(t, bath).map_err(|e| core_error("bath", &ctx, e))?;
        let mc = average_phi00_with(spec, bath, t, samples, policy, mode).map_err(|e| core_error("geometry", &ctx, e))?;
        let m = MetricTensor::from_parts(
            t,
            DMatrix::from_element(1, 1, 4.0 * f),
            DMatrix::from_element(1, 1, 2.0 * mc.mean),
            s.run.validity_threshold,
        )
        .map_err(|e| core_error("geometry", &ctx, e))?;
        curve.push(CurvePoint::new(t, 4.0 * f, 2.0 * mc.mean, m.valid));
        phi00.push(mc.mean);
        ensemble.push((t, mc));
    }
    let scales = gas_scales(spec.density, spec.exclusion_radius, bath).map_err(|e| cfg_err("geometry", e.to_string()))?;
    Ok(CaseResult {
        label: String::new(),
        sweep_value: None,
        bath: *bath,
        curve,
        phi00,
        scales: Scales::Gas(scales),
        properties: None,
        ensemble: Some(ensemble),
        n_selected: 1,
        n_unobserved: spec.expected_count().round() as usize,
    })
}

fn stem(prefix: &str, label: &str) -> String {
    if label.is_empty() {
        prefix.to_string()
    } else {
        format!("{prefix}_{}", label.replace('=', "_"))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| cfg_err("output.dir", format!("cannot create {}: {e}", path.display())))
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| cfg_err("output.dir", format!("cannot write {}: {e}", path.display()))
}

/// `(tilt, Φ₀₀ at the last grid time)` for dipole-tilt sweeps.
pub fn tilt_curve(s: &Scenario, cases: &[CaseResult]) -> Option<Vec<(f64, f64, f64)>> {
    let sw = s.sweep.as_ref()?;
    if sw.parameter != SweepParameter::DipoleTilt {
        return None;
    }
    Some(
        cases
            .iter()
            .filter_map(|c| Some((c.sweep_value?, c.curve.last()?.t, *c.phi00.last()?)))
            .collect(),
    )
}

/// Evaluate the scenario and write curves, ensemble tables and the report.
pub fn run(s: &Scenario, opts: &RunOptions) -> Result<RunOutput, CliError> {
    let cases = evaluate(s, opts)?;
    let dir = opts.out_dir.clone().unwrap_or_else(|| s.output.dir.clone());
    fs::create_dir_all(&dir).map_err(|e| cfg_err("output.dir", format!("cannot create {}: {e}", dir.display())))?;
    let prefix = s.prefix();
    let mut files = Vec::new();
    for c in &cases {
        let path = dir.join(format!("{}.csv", stem(prefix, &c.label)));
        let mut w = create(&path)?;
        curve::write_csv(&c.curve, &mut w).and_then(|_| w.flush()).map_err(io_error(&path))?;
        files.push(path);
        if let Some(rows) = &c.ensemble {
            let path = dir.join(format!("{}_ensemble.csv", stem(prefix, &c.label)));
            let mut w = create(&path)?;
            let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
                writeln!(w, "{}", McResult::CSV_HEADER)?;
                for (t, mc) in rows {
                    mc.write_csv_row(*t, &mut *w)?;
                }
                w.flush()
            };
            write(&mut w).map_err(io_error(&path))?;
            files.push(path);
        }
    }
    if let Some(tilts) = tilt_curve(s, &cases) {
        let path = dir.join(format!("{prefix}_tilt_sweep.csv"));
        let mut w = create(&path)?;
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "tilt_deg,t,phi00")?;
            for (tilt, t, phi) in &tilts {
                writeln!(w, "{tilt:e},{t:e},{phi:e}")?;
            }
            w.flush()
        };
        write(&mut w).map_err(io_error(&path))?;
        files.push(path);
    }
    let path = dir.join(format!("{prefix}_report.txt"));
    let mut w = create(&path)?;
    w.write_all(report(s, opts, &cases).as_bytes()).and_then(|_| w.flush()).map_err(io_error(&path))?;
    files.push(path);
    Ok(RunOutput { cases, files })
}

fn g6(x: f64) -> String {
    format!("{x:.5e}")
}

fn opt6(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), g6)
}

/// Plain-text summary with six significant digits.
pub fn report(s: &Scenario, opts: &RunOptions, cases: &[CaseResult]) -> String {
    let mut r = String::new();
    let grid = &s.time;
    let _ = writeln!(r, "scenario: {}", s.prefix());
    let _ = writeln!(r, "policy: {:?}", policy_of(s, opts));
    let _ = writeln!(r, "seed: {}", seed_of(s, opts));
    let _ = writeln!(r, "time grid: {} points from {} to {} ({:?})", grid.points, g6(grid.start), g6(grid.end), grid.spacing);
    for c in cases {
        let _ = writeln!(r);
        let _ = writeln!(r, "[{}]", if c.label.is_empty() { "run" } else { &c.label });
        let _ = writeln!(r, "alpha = {}, kappa = {}", g6(c.bath.alpha), g6(c.bath.kappa));
        if c.bath.dipole_approximation_questionable() {
            let _ = writeln!(r, "note: kappa >= 1, the dipole approximation is questionable");
        }
        let _ = writeln!(r, "selected atoms: {}, unobserved atoms: {}", c.n_selected, c.n_unobserved);
        let limit = 4.0 * f_diag_limit(&c.bath);
        let t_scale = match &c.scales {
            Scales::Lattice(l) => {
                let _ = writeln!(
                    r,
                    "lattice scales: N_nn = {}, t1 = {}, a_c = {}, gamma = {}",
                    g6(l.n_nn),
                    opt6(l.t1),
                    g6(l.a_c),
                    g6(l.gamma)
                );
                l.t1
            }
            Scales::Gas(g) => {
                let _ = writeln!(r, "gas scales: gamma_G = {}, t2 = {}, rho_crit = {}", g6(g.gamma_g), opt6(g.t2), g6(g.rho_crit));
                g.t2
            }
            Scales::Unavailable(why) => {
                let _ = writeln!(r, "scales: unavailable ({why})");
                None
            }
        };
        let _ = writeln!(r, "direct plateau 4*alpha*kappa^2/(3*pi) = {}", g6(limit));
        if c.n_selected == 1 {
            match plateau(&c.curve, c.bath.kappa) {
                Some(p) => {
                    let _ = writeln!(r, "measured plateau (median over 100/kappa..1e4/kappa) = {}, relative deviation {}", g6(p), g6(p / limit - 1.0));
                }
                None => {
                    let _ = writeln!(r, "measured plateau: n/a (grid does not cover 100/kappa..1e4/kappa before regrowth)");
                }
            }
        }
        let cross = crossover_detect(&c.curve);
        let _ = writeln!(r, "crossover t_cross = {}, sign changes on grid = {}", opt6(cross), crossing_count(&c.curve));
        if let (Some(tc), Some(ts)) = (cross, t_scale) {
            let _ = writeln!(r, "t_cross / predicted crossover time = {}", g6(tc / ts));
        }
        let _ = writeln!(
            r,
            "growth exponents: initial = {}, regrowth = {}",
            opt6(initial_exponent(&c.curve)),
            opt6(regrowth_exponent(&c.curve))
        );
        if let Some(p) = &c.properties {
            let _ = writeln!(
                r,
                "non-negativity: {} trials over {} time points, {} violations, min x'Mx/trace = {}, min Gram eigenvalue ratio = {}",
                p.trials,
                p.time_points,
                p.violations,
                g6(p.min_normalized_form),
                g6(p.min_gram_ratio)
            );
            let _ = writeln!(r, "triangle: {} triples, {} violations, min slack = {}", p.triples, p.triangle_violations, g6(p.min_slack));
        }
        if let Some(rows) = &c.ensemble {
            if let Some((_, mc)) = rows.first() {
                let _ = writeln!(r, "ensemble: {} samples per time, generator {}", mc.n_samples, mc.generator);
            }
        }
        if let Some(last) = c.curve.last() {
            let _ = writeln!(r, "final: t = {}, d_total = {}, valid = {}", g6(last.t), g6(last.d_total), last.valid);
        }
    }
    if let Some(tilts) = tilt_curve(s, cases) {
        let _ = writeln!(r);
        let _ = writeln!(r, "[dipole_tilt sweep]");
        for (tilt, t, phi) in &tilts {
            let _ = writeln!(r, "tilt = {} deg, t = {}, Phi00 = {}", g6(*tilt), g6(*t), g6(*phi));
        }
        if let Some((tilt, _, phi)) = tilts.iter().min_by(|a, b| a.2.total_cmp(&b.2)) {
            let _ = writeln!(r, "minimizer: tilt = {} deg, Phi00 = {}", g6(*tilt), g6(*phi));
        }
    }
    r
}

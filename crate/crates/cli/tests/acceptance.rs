//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use dmt_cli::curve::{crossing_count, crossover_detect, initial_exponent, loglog_slope, plateau, regrowth_exponent};
use dmt_cli::run::{evaluate, tilt_curve, CaseResult, RunOptions, Scales};
use dmt_cli::scenario::Scenario;
use dmt_core::asymptotics::{critical_density_per_m3, f_diag_limit};
use dmt_core::ensemble::{analytic_phi00_avg, average_phi00};
use dmt_core::geometry::{chain_1d, sample_gas, square_lattice_2d, tilted_dipole, CountMode, GasSpec, SelectionMask};
use dmt_core::kernels::{f_diag, phi_closed, reduced_quadrature, BathParams, PairGeometry, TimeKernel, FINE_STRUCTURE};
use dmt_core::metric::{build_metric, check_nonnegative, check_triangle, decoherence, Codeword, KernelPolicy, MetricOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn bath(kappa: f64) -> BathParams {
    BathParams::new(FINE_STRUCTURE, kappa).unwrap()
}

fn fig1() -> Vec<CaseResult> {
    evaluate(&scenario("fig1_lattice.toml"), &RunOptions::default()).expect("lattice scenario runs")
}

fn criterion_1(cases: &[CaseResult], seconds: f64) -> Outcome {
    let mut pass = seconds < 60.0;
    let mut detail = format!("{seconds:.1}s;");
    let mut plateaus = Vec::new();
    for c in cases {
        let kappa = c.bath.kappa;
        let limit = 4.0 * f_diag_limit(&c.bath);
        let early = initial_exponent(&c.curve).unwrap_or(f64::NAN);
        let late = regrowth_exponent(&c.curve).unwrap_or(f64::NAN);
        let median = plateau(&c.curve, kappa).unwrap_or(f64::NAN);
        let at_onset = c
            .curve
            .iter()
            .min_by(|a, b| (a.t * kappa / 100.0).ln().abs().total_cmp(&(b.t * kappa / 100.0).ln().abs()))
            .map_or(f64::NAN, |p| p.d_direct);
        let ok = (early - 2.0).abs() <= 0.1
            && (late - 2.0).abs() <= 0.1
            && (median / limit - 1.0).abs() <= 0.02
            && (at_onset / limit - 1.0).abs() <= 0.02
            && c.curve.iter().any(|p| p.d_total >= 1.0);
        pass &= ok;
        plateaus.push(median);
        detail += &format!(
            " kappa={kappa}: rise {early:.4}, plateau {median:.4e} vs {limit:.4e} (at 100/kappa {:+.2}%), regrowth {late:.4};",
            100.0 * (at_onset / limit - 1.0)
        );
    }
    let ordered = plateaus.windows(2).all(|w| w[0] < w[1]);
    pass &= ordered && cases.len() == 3;
    detail += &format!(" plateaus ordered in kappa: {ordered}");
    outcome(pass, detail)
}

fn criterion_2(cases: &[CaseResult]) -> Outcome {
    let mut pass = true;
    let mut detail = String::new();
    for c in cases.iter().filter(|c| c.bath.kappa < 0.5) {
        let t1 = match &c.scales {
            Scales::Lattice(l) => l.t1.unwrap_or(f64::NAN),
            _ => f64::NAN,
        };
        let tc = crossover_detect(&c.curve).unwrap_or(f64::NAN);
        let unique = crossing_count(&c.curve) == 1;
        let ratio = tc / t1;
        pass &= (1.0 / 3.0..=3.0).contains(&ratio) && unique;
        detail += &format!(" kappa={}: t_cross {tc:.4e}, t1 {t1:.4e}, ratio {ratio:.3}, unique {unique};", c.bath.kappa);
    }
    outcome(pass, detail)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut configs, mut psd_bad, mut tri_bad, mut errors) = (0, 0, 0, 0);
    let mut min_form = f64::INFINITY;
    for k in 0..200u64 {
        let b = bath(10f64.powf(rng.random_range(-2.0..0.0)));
        let (config, selected, scale) = match k % 3 {
            0 => {
                let a = 10f64.powf(rng.random_range(0.0..4.0));
                let tilt = rng.random_range(0.0..PI);
                let (c, _) = square_lattice_2d(7, a, tilted_dipole(tilt)).unwrap();
                let n = rng.random_range(2..=6);
                (c, n, a)
            }
            1 => {
                let a = 10f64.powf(rng.random_range(0.0..4.0));
                let (c, _) = chain_1d(15, a, rng.random_range(0.0..PI)).unwrap();
                let n = rng.random_range(2..=6);
                (c, n, a)
            }
            _ => {
                let l = 10f64.powf(rng.random_range(0.0..3.0));
                let spec = GasSpec { density: 1e-2 / l.powi(3), exclusion_radius: l, horizon: 8.0 * l, seed: k };
                let (c, _) = sample_gas(&spec, CountMode::Fixed(30)).unwrap();
                (c, rng.random_range(2..=6), l)
            }
        };
        let mut idx: Vec<usize> = (0..config.len()).collect();
        for i in 0..selected {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(selected);
        let mask = SelectionMask::new(idx, config.len()).unwrap();
        let t = scale * 10f64.powf(rng.random_range(-2.0..3.0));
        let m = match build_metric(&config, &mask, &b, t, &MetricOptions::default()) {
            Ok(m) => m,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        configs += 1;
        let nn = check_nonnegative(&m, 1000, k);
        if !nn.passed() {
            psd_bad += 1;
        }
        min_form = min_form.min(nn.min_normalized_form);
        match check_triangle(&m, 10_000, k) {
            Ok(tr) if tr.passed() => {}
            _ => tri_bad += 1,
        }
    }
    outcome(
        configs == 200 && psd_bad == 0 && tri_bad == 0,
        format!(
            "{configs} configurations ({errors} failed to build), non-negativity failures {psd_bad}, triangle failures {tri_bad}, min x'Mx/trace {min_form:.3e}"
        ),
    )
}

fn criterion_4a() -> Outcome {
    let mut worst: f64 = 0.0;
    for kappa in [0.01, 0.1, 1.0] {
        let b = bath(kappa);
        let origin = PairGeometry::new(0.0, 0.0).unwrap();
        for i in 0..=24 {
            let t = 10f64.powf(-2.0 + i as f64 * 0.25) / kappa;
            let q = reduced_quadrature(t, &origin, &b, TimeKernel::Dephasing, 1e-12).unwrap();
            worst = worst.max((q - f_diag(t, &b).unwrap()).abs());
        }
    }
    outcome(worst <= 1e-8, format!("dephasing kernel at r = 0 vs closed form: max abs error {worst:.3e} (tolerance 1e-8)"))
}

fn criterion_4b() -> Outcome {
    let b = bath(0.1);
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for kr in [10.0, 100.0] {
        let r = kr / b.kappa;
        for theta in [0.0, PI / 4.0, PI / 2.0] {
            let g = PairGeometry::new(r, theta).unwrap();
            for ratio in [0.5, 1.0, 2.0, 10.0] {
                let t = ratio * r;
                let closed = phi_closed(t, &g, &b).unwrap();
                let tol = 1e-12 * b.alpha * t / r.powi(3);
                let q = reduced_quadrature(t, &g, &b, TimeKernel::Phase, tol).unwrap();
                let rel = ((q - closed) / closed).abs();
                if rel > worst {
                    worst = rel;
                    at = format!("kappa*r = {kr}, t/r = {ratio}, theta = {theta:.3}");
                }
            }
        }
    }
    outcome(
        worst <= 1e-3,
        format!("phase kernel quadrature vs closed form: max relative error {worst:.3e} at {at} (tolerance 1e-3)"),
    )
}

fn criterion_5() -> Outcome {
    let b = bath(10.0);
    let mut pass = true;
    let mut detail = String::new();
    for (i, (l, t)) in [(10.0, 40.0), (5.0, 15.0), (20.0, 60.0)].into_iter().enumerate() {
        let shell = 4.0 / 3.0 * PI * (f64::powi(t, 3) - f64::powi(l, 3));
        let spec = GasSpec { density: 50.0 / shell, exclusion_radius: l, horizon: t, seed: 100 + i as u64 };
        let mc = average_phi00(&spec, &b, t, 1000, KernelPolicy::FarField).unwrap();
        let exact = analytic_phi00_avg(&spec, &b, t).unwrap();
        let z = (mc.mean - exact) / mc.std_error;
        pass &= z.abs() <= 3.0;
        detail += &format!(" (rho {:.3e}, l {l}, t {t}): {:.4e} vs {exact:.4e}, z = {z:+.2};", spec.density, mc.mean);
    }
    let spec = GasSpec { density: 50.0 / (4.0 / 3.0 * PI * (64e3 - 1e3)), exclusion_radius: 10.0, horizon: 40.0, seed: 7 };
    let se: Vec<(f64, f64)> = [100usize, 1000, 10_000]
        .iter()
        .map(|&n| (n as f64, average_phi00(&spec, &b, 40.0, n, KernelPolicy::FarField).unwrap().std_error))
        .collect();
    let slope = loglog_slope(se).unwrap_or(f64::NAN);
    pass &= (slope + 0.5).abs() <= 0.1;
    detail += &format!(" standard-error slope {slope:.3}");
    outcome(pass, detail)
}

fn criterion_6() -> Outcome {
    let chain = evaluate(&scenario("chain_magic_angle.toml"), &RunOptions::default()).unwrap();
    let magic = chain
        .iter()
        .find(|c| (c.sweep_value.unwrap() - 54.735610317245346).abs() < 1e-9)
        .expect("magic angle in sweep");
    let worst = magic.curve.iter().map(|p| p.d_indirect / p.d_direct).fold(0.0, f64::max);
    let s = scenario("lattice_tilt.toml");
    let lattice = evaluate(&s, &RunOptions::default()).unwrap();
    let tilts = tilt_curve(&s, &lattice).unwrap_or_default();
    let min = tilts.iter().min_by(|a, b| a.2.total_cmp(&b.2));
    let emitted = tilts.len() == s.sweep.as_ref().unwrap().values.len() && tilts.iter().all(|x| x.2.is_finite());
    let (tilt, phi) = min.map_or((f64::NAN, f64::NAN), |m| (m.0, m.2));
    outcome(
        worst <= 1e-12 && emitted,
        format!(
            "chain at the magic angle: max d_indirect/d_direct {worst:.3e} over {} times; lattice tilt sweep of {} values, minimum Phi00 {phi:.4e} at {tilt:.4} deg",
            magic.curve.len(),
            tilts.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let b = bath(0.1);
    let r = 1e4 / b.kappa;
    let (config, _) = chain_1d(2, r, PI / 2.0).unwrap();
    let mask = SelectionMask::new(vec![0, 1], 2).unwrap();
    let up = Codeword::uniform(2, 1).unwrap();
    let one = Codeword::new(vec![-1, 1]).unwrap();
    let mut worst: f64 = 0.0;
    for t in [0.3, 1.0, 10.0, 100.0, 1000.0].map(|x| x / b.kappa) {
        let m = build_metric(&config, &mask, &b, t, &MetricOptions::default()).unwrap();
        let two = decoherence(&m, &up, &up.complement()).unwrap().value;
        let single = decoherence(&m, &up, &one).unwrap().value;
        worst = worst.max((two / single / 2.0 - 1.0).abs());
    }
    outcome(worst <= 0.01, format!("kappa*r = 1e4, t < r: max |d(two flips)/(2 d(one flip)) - 1| = {worst:.3e}"))
}

fn criterion_8() -> Outcome {
    let rho = critical_density_per_m3(1.0, 1e-10, 10.0).unwrap();
    let ratio = rho / 1e20;
    outcome((1.0 / 3.0..=3.0).contains(&ratio), format!("critical density {rho:.3e} m^-3 (1 eV cutoff, 1 A dipole, l = 10 A)"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cases = fig1();
    let fig1_seconds = start.elapsed().as_secs_f64();
    let results = [
        ("1", "lattice curve shape", criterion_1(&cases, fig1_seconds)),
        ("2", "crossover time", criterion_2(&cases)),
        ("3", "metric properties", criterion_3()),
        ("4a", "dephasing kernel quadrature", criterion_4a()),
        ("4b", "phase kernel quadrature", criterion_4b()),
        ("5", "gas Monte Carlo", criterion_5()),
        ("6", "magic-angle suppression", criterion_6()),
        ("7", "Hamming limit", criterion_7()),
        ("8", "critical density", criterion_8()),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail.trim());
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

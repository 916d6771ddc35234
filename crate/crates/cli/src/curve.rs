//! Decoherence curves and the quantities read off them.

use std::io::{self, Write};

pub const CSV_HEADER: &str = "t,d_direct,d_indirect,d_total,valid_flag";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub d_direct: f64,
    pub d_indirect: f64,
    /// `d_direct + d_indirect`.
    pub d_total: f64,
    pub valid: bool,
}

impl CurvePoint {
    pub fn new(t: f64, d_direct: f64, d_indirect: f64, valid: bool) -> Self {
        CurvePoint { t, d_direct, d_indirect, d_total: d_direct + d_indirect, valid }
    }
}

/// Shortest round-trip representation in exponent form.
pub fn write_csv<W: Write>(curve: &[CurvePoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in curve {
        writeln!(out, "{:e},{:e},{:e},{:e},{}", p.t, p.d_direct, p.d_indirect, p.d_total, u8::from(p.valid))?;
    }
    Ok(())
}

pub fn read_csv(text: &str) -> Result<Vec<CurvePoint>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("missing curve header".into());
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("expected 5 columns: {line}"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
            Ok(CurvePoint { t: num(f[0])?, d_direct: num(f[1])?, d_indirect: num(f[2])?, d_total: num(f[3])?, valid: f[4] == "1" })
        })
        .collect()
}

/// First time at which indirect decoherence exceeds direct decoherence,
/// linearly interpolated between the bracketing grid points.
pub fn crossover_detect(curve: &[CurvePoint]) -> Option<f64> {
    let i = curve.iter().position(|p| p.d_indirect > p.d_direct)?;
    if i == 0 {
        return Some(curve[0].t);
    }
    let (a, b) = (&curve[i - 1], &curve[i]);
    let (ga, gb) = (a.d_indirect - a.d_direct, b.d_indirect - b.d_direct);
    Some(a.t + (b.t - a.t) * (-ga) / (gb - ga))
}

/// Number of grid steps where the sign of `d_indirect − d_direct` flips.
pub fn crossing_count(curve: &[CurvePoint]) -> usize {
    curve
        .windows(2)
        .filter(|w| (w[0].d_indirect > w[0].d_direct) != (w[1].d_indirect > w[1].d_direct))
        .count()
}

/// Least-squares slope of `ln y` against `ln x`; points with non-positive
/// coordinates are skipped. Needs two usable points.
pub fn loglog_slope(points: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .into_iter()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Growth exponent of `d_total` over the first decade of the grid.
pub fn initial_exponent(curve: &[CurvePoint]) -> Option<f64> {
    let t0 = curve.first()?.t;
    loglog_slope(curve.iter().filter(|p| p.t <= 10.0 * t0 * (1.0 + 1e-12)).map(|p| (p.t, p.d_total)))
}

/// Growth exponent of `d_indirect` over the decade ending where `d_total`
/// first reaches 1. The fit uses the indirect part alone so the direct
/// plateau does not bend the slope.
pub fn regrowth_exponent(curve: &[CurvePoint]) -> Option<f64> {
    let end = curve.iter().find(|p| p.d_total >= 1.0)?.t;
    loglog_slope(curve.iter().filter(|p| p.t <= end && p.t >= end / 10.0).map(|p| (p.t, p.d_indirect)))
}

/// Median of `d_direct` over `t ∈ [100/κ, 10⁴/κ]` restricted to points where
/// the indirect part is below 1% of the direct part.
pub fn plateau(curve: &[CurvePoint], kappa: f64) -> Option<f64> {
    let mut v: Vec<f64> = curve
        .iter()
        .filter(|p| p.t >= 100.0 / kappa && p.t <= 1e4 / kappa && p.d_indirect <= 0.01 * p.d_direct)
        .map(|p| p.d_direct)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(ts: &[f64], dir: impl Fn(f64) -> f64, ind: impl Fn(f64) -> f64) -> Vec<CurvePoint> {
        ts.iter().map(|&t| CurvePoint::new(t, dir(t), ind(t), true)).collect()
    }

    #[test]
    fn crossover_interpolates() {
        let c = curve(&[1.0, 2.0, 3.0, 4.0], |_| 2.5, |t| t);
        assert_eq!(crossover_detect(&c), Some(2.5));
        assert_eq!(crossing_count(&c), 1);
        let none = curve(&[1.0, 2.0], |_| 1.0, |_| 0.0);
        assert_eq!(crossover_detect(&none), None);
        assert_eq!(crossing_count(&none), 0);
        let immediate = curve(&[1.0, 2.0], |_| 0.0, |_| 1.0);
        assert_eq!(crossover_detect(&immediate), Some(1.0));
    }

    #[test]
    fn exponents_of_power_laws() {
        let ts: Vec<f64> = (0..40).map(|i| 10f64.powf(i as f64 / 4.0 - 3.0)).collect();
        let c = curve(&ts, |t| 1e-4 * t * t / (1.0 + t * t), |t| 1e-8 * t * t);
        assert!((initial_exponent(&c).unwrap() - 2.0).abs() < 1e-3);
        assert!((regrowth_exponent(&c).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(loglog_slope([(1.0, 1.0)]), None);
    }

    #[test]
    fn plateau_median() {
        let ts: Vec<f64> = (0..50).map(|i| 10f64.powf(i as f64 / 5.0)).collect();
        let c = curve(&ts, |t| 3.0 + 1.0 / t, |_| 0.0);
        let p = plateau(&c, 1.0).unwrap();
        assert!(p > 3.0 && p < 3.01);
        assert_eq!(plateau(&c[..5], 1.0), None);
    }

    #[test]
    fn csv_round_trip() {
        let c = vec![CurvePoint::new(1e-3, 0.1 + 0.2, 1.0 / 3.0, true), CurvePoint::new(1e12, 3.097e-5, 0.0, false)];
        let mut buf = Vec::new();
        write_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(read_csv(&text).unwrap(), c);
    }
}

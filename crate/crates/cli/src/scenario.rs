//! Scenario files: TOML with `[bath]`, `[geometry]`, `[selection]`, `[time]`,
//! `[sweep]`, `[output]` and `[run]` sections. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use dmt_core::kernels::FINE_STRUCTURE;
use dmt_core::metric::{KernelPolicy, DEFAULT_VALIDITY_THRESHOLD};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub bath: BathSection,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub selection: SelectionSection,
    pub time: TimeSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub kappa: f64,
    pub inv_temperature: Option<f64>,
}

fn default_alpha() -> f64 {
    FINE_STRUCTURE
}

/// Tilts are in degrees. For a lattice the dipole is `(cos tilt, 0, sin tilt)`,
/// so 90° is perpendicular to the lattice plane; for a chain the tilt is the
/// angle between dipole and chain axis.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometrySection {
    Lattice {
        side: usize,
        spacing: f64,
        #[serde(default = "default_tilt")]
        tilt: f64,
    },
    Chain {
        count: usize,
        spacing: f64,
        #[serde(default = "default_tilt")]
        tilt: f64,
    },
    Gas {
        density: f64,
        exclusion_radius: f64,
        horizon: f64,
        /// Fixed atom count per sample; Poisson counts when absent.
        count: Option<usize>,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Configuration in the `dmt-config v1` text format, relative to the scenario file.
    File { path: PathBuf },
}

fn default_tilt() -> f64 {
    90.0
}

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    /// Selected atom indices; the builder's default (the central atom) when absent.
    pub indices: Option<Vec<usize>>,
    /// Codewords as `+`/`-` strings; all `+` and all `-` by default.
    pub codeword: Option<String>,
    pub codeword_prime: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    #[default]
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub start: f64,
    pub end: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl TimeSection {
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    return self.end;
                }
                let u = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + u * (self.end - self.start),
                    Spacing::Log => self.start * (self.end / self.start).powf(u),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Kappa,
    Spacing,
    DipoleTilt,
    Density,
    ExclusionRadius,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Kappa => "kappa",
            SweepParameter::Spacing => "spacing",
            SweepParameter::DipoleTilt => "dipole_tilt",
            SweepParameter::Density => "density",
            SweepParameter::ExclusionRadius => "exclusion_radius",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File name prefix; the scenario file stem by default.
    pub prefix: Option<String>,
    #[serde(default = "default_format")]
    pub format: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_format() -> String {
    "csv".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), prefix: None, format: default_format() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    #[default]
    Closed,
    Farfield,
    Quadrature,
}

impl From<PolicyName> for KernelPolicy {
    fn from(p: PolicyName) -> Self {
        match p {
            PolicyName::Closed => KernelPolicy::ClosedForm,
            PolicyName::Farfield => KernelPolicy::FarField,
            PolicyName::Quadrature => KernelPolicy::Quadrature,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub policy: PolicyName,
    #[serde(default = "default_validity")]
    pub validity_threshold: f64,
    /// Random unit vectors per time point for the non-negativity check.
    #[serde(default = "default_trials")]
    pub property_trials: usize,
    /// Random codeword triples per time point for the triangle check.
    #[serde(default = "default_triples")]
    pub triangle_triples: usize,
}

fn default_validity() -> f64 {
    DEFAULT_VALIDITY_THRESHOLD
}

fn default_trials() -> usize {
    1000
}

fn default_triples() -> usize {
    10_000
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            policy: PolicyName::default(),
            validity_threshold: default_validity(),
            property_trials: default_trials(),
            triangle_triples: default_triples(),
        }
    }
}

fn config(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.into(), message: message.into() }
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config(key, format!("must be positive and finite, got {v}")))
    }
}

impl Scenario {
    /// Parse and validate. Relative `geometry.path` is resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Scenario, CliError> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| {
            let mut key = e.span().map(|sp| key_at(text, sp.start)).unwrap_or_else(|| "scenario".into());
            // table-level errors point at the table; name the field itself
            let field = ["unknown field `", "missing field `"]
                .iter()
                .find_map(|p| e.message().strip_prefix(p))
                .and_then(|rest| rest.split('`').next());
            if let Some(field) = field {
                if !key.ends_with(field) {
                    key = format!("{key}.{field}");
                }
            }
            config(&key, e.message().to_string())
        })?;
        if let (GeometrySection::File { path }, Some(base)) = (&mut s.geometry, base) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config("scenario", format!("cannot read {}: {e}", path.display())))?;
        let mut s = Scenario::parse(&text, path.parent())?;
        if s.output.prefix.is_none() {
            s.output.prefix = path.file_stem().map(|x| x.to_string_lossy().into_owned());
        }
        Ok(s)
    }

    pub fn prefix(&self) -> &str {
        self.output.prefix.as_deref().unwrap_or("scenario")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("bath.kappa", self.bath.kappa)?;
        positive("bath.alpha", self.bath.alpha)?;
        if let Some(beta) = self.bath.inv_temperature {
            positive("bath.inv_temperature", beta)?;
        }
        match &self.geometry {
            GeometrySection::Lattice { side, spacing, tilt } => {
                if side % 2 == 0 {
                    return Err(config("geometry.side", format!("must be odd so the lattice has a centre, got {side}")));
                }
                positive("geometry.spacing", *spacing)?;
                finite("geometry.tilt", *tilt)?;
            }
            GeometrySection::Chain { count, spacing, tilt } => {
                if *count == 0 {
                    return Err(config("geometry.count", "must be at least 1"));
                }
                positive("geometry.spacing", *spacing)?;
                finite("geometry.tilt", *tilt)?;
            }
            GeometrySection::Gas { density, exclusion_radius, horizon, samples, .. } => {
                positive("geometry.density", *density)?;
                positive("geometry.exclusion_radius", *exclusion_radius)?;
                if !(*horizon > *exclusion_radius && horizon.is_finite()) {
                    return Err(config("geometry.horizon", "must exceed geometry.exclusion_radius"));
                }
                if *samples < 2 {
                    return Err(config("geometry.samples", "need at least 2 samples"));
                }
                if self.time.end > *horizon {
                    return Err(config("time.end", format!("gas light cone must stay inside geometry.horizon = {horizon}")));
                }
                if self.selection.indices.is_some() {
                    return Err(config("selection.indices", "the gas selects its central atom"));
                }
            }
            GeometrySection::File { path } => {
                if !path.exists() {
                    return Err(config("geometry.path", format!("{} does not exist", path.display())));
                }
            }
        }
        let t = &self.time;
        if t.points < 2 {
            return Err(config("time.points", format!("need at least 2 points, got {}", t.points)));
        }
        if !(t.start >= 0.0 && t.start.is_finite()) {
            return Err(config("time.start", format!("must be non-negative, got {}", t.start)));
        }
        if !(t.end > t.start && t.end.is_finite()) {
            return Err(config("time.end", "must be finite and greater than time.start"));
        }
        if t.spacing == Spacing::Log && t.start <= 0.0 {
            return Err(config("time.start", "log spacing needs a positive start"));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(config("sweep.values", "empty value list"));
            }
            let gas = matches!(self.geometry, GeometrySection::Gas { .. });
            let ok = match sw.parameter {
                SweepParameter::Kappa => true,
                SweepParameter::Spacing | SweepParameter::DipoleTilt => {
                    matches!(self.geometry, GeometrySection::Lattice { .. } | GeometrySection::Chain { .. })
                }
                SweepParameter::Density | SweepParameter::ExclusionRadius => gas,
            };
            if !ok {
                return Err(config("sweep.parameter", format!("{} does not apply to this geometry", sw.parameter.name())));
            }
            for &v in &sw.values {
                if sw.parameter == SweepParameter::DipoleTilt {
                    finite("sweep.values", v)?;
                } else {
                    positive("sweep.values", v)?;
                }
                if let (SweepParameter::ExclusionRadius, GeometrySection::Gas { horizon, .. }) = (sw.parameter, &self.geometry) {
                    if v >= *horizon {
                        return Err(config("sweep.values", format!("exclusion radius {v} must be below geometry.horizon")));
                    }
                }
            }
        }
        if self.output.format != "csv" {
            return Err(config("output.format", format!("only \"csv\" is supported, got {:?}", self.output.format)));
        }
        positive("run.validity_threshold", self.run.validity_threshold)?;
        for (key, word) in [("selection.codeword", &self.selection.codeword), ("selection.codeword_prime", &self.selection.codeword_prime)] {
            if let Some(w) = word {
                parse_codeword(w).map_err(|m| config(key, m))?;
            }
        }
        Ok(())
    }
}

fn finite(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(config(key, format!("must be finite, got {v}")))
    }
}

pub(crate) fn parse_codeword(word: &str) -> Result<Vec<i8>, String> {
    word.chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => Err(format!("codeword characters must be '+' or '-', found {other:?}")),
        })
        .collect()
}

/// Dotted `section.key` of the TOML line containing byte offset `pos`.
fn key_at(text: &str, pos: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
        if offset > pos {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => if key.is_empty() { "scenario".into() } else { key },
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[bath]
kappa = 0.1

[geometry]
kind = "lattice"
side = 5
spacing = 10.0

[time]
start = 1.0
end = 100.0
points = 5
"#;

    fn key_of(text: &str) -> String {
        match Scenario::parse(text, None) {
            Err(CliError::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults() {
        let s = Scenario::parse(BASE, None).unwrap();
        assert_eq!(s.bath.alpha, FINE_STRUCTURE);
        assert_eq!(s.time.spacing, Spacing::Log);
        assert_eq!(s.run.policy, PolicyName::Closed);
        assert!(matches!(s.geometry, GeometrySection::Lattice { tilt, .. } if tilt == 90.0));
        let grid = s.time.grid();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 1.0);
        assert_eq!(grid[4], 100.0);
        assert!((grid[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(&BASE.replace("points = 5", "points = 1")), "time.points");
        assert_eq!(key_of(&BASE.replace("kappa = 0.1", "kappa = -1.0")), "bath.kappa");
        assert_eq!(key_of(&BASE.replace("kappa = 0.1", "kappa = 0.1\nkapa = 2.0")), "bath.kapa");
        assert_eq!(key_of(&BASE.replace("side = 5", "side = 4")), "geometry.side");
        assert_eq!(key_of(&BASE.replace("side = 5\n", "")), "geometry.side");
        assert_eq!(key_of(&BASE.replace("side = 5", "side = 5\nsides = 3")), "geometry.sides");
        assert_eq!(key_of(&BASE.replace("start = 1.0", "start = \"one\"")), "time.start");
        assert_eq!(key_of(&format!("{BASE}\n[sweep]\nparameter = \"density\"\nvalues = [1.0]\n")), "sweep.parameter");
        assert_eq!(key_of(&format!("{BASE}\n[output]\nformat = \"json\"\n")), "output.format");
        assert_eq!(key_of(&format!("{BASE}\n[selection]\ncodeword = \"+x\"\n")), "selection.codeword");
    }

    #[test]
    fn gas_time_must_fit_horizon() {
        let gas = BASE.replace(
            "kind = \"lattice\"\nside = 5\nspacing = 10.0",
            "kind = \"gas\"\ndensity = 1e-3\nexclusion_radius = 10.0\nhorizon = 50.0",
        );
        assert_eq!(key_of(&gas), "time.end");
        assert!(Scenario::parse(&gas.replace("end = 100.0", "end = 50.0"), None).is_ok());
    }

    #[test]
    fn linear_grid() {
        let t = TimeSection { start: 0.0, end: 1.0, points: 3, spacing: Spacing::Linear };
        assert_eq!(t.grid(), vec![0.0, 0.5, 1.0]);
    }
}

//! Run configuration: flat `[section]` / `key = value` files.
//!
//! Every key has a default; the resolved configuration (defaults filled in,
//! grid-dependent defaults made explicit) is what the manifest echoes.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shellvk::geometry::Profile;
use shellvk::membrane::default_fourier_order;
use shellvk::{ElasticModuli, Grid, SurfaceChart, SurfaceFamily};

/// A configuration problem, located as precisely as possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// `section.key`, when the problem is tied to one field.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        if let Some(field) = &self.field {
            write!(f, ": [{field}]")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Plate,
    Cylinder,
    Revolution,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub family: Family,
    pub n1: usize,
    pub n2: usize,
    /// Plate: `r = (s₁u₁, s₂u₂, 0)`.
    pub stretch: [f64; 2],
    /// Cylinder and sphere.
    pub radius: f64,
    /// Cylinder length along the axis.
    pub height: f64,
    /// Revolution: polynomial coefficients of `g(s)`, constant term first.
    pub profile: Vec<f64>,
    /// Revolution: axial parameter range.
    pub s_range: [f64; 2],
    /// Explicit parameter domain; plate defaults to `[0,1]²`, sphere to a
    /// polar-trimmed full turn.
    pub domain: Option<[[f64; 2]; 2]>,
    /// Periodic second parameter. Cylinder and revolution are always periodic.
    pub periodic: Option<bool>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            family: Family::Plate,
            n1: 16,
            n2: 16,
            stretch: [1.0, 1.0],
            radius: 1.0,
            height: 1.0,
            profile: vec![1.0],
            s_range: [0.0, 1.0],
            domain: None,
            periodic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModuliConfig {
    pub mu: f64,
    pub lambda: f64,
}

impl Default for ModuliConfig {
    fn default() -> Self {
        ModuliConfig { mu: 1.0, lambda: 1.0 }
    }
}

/// Where the membrane displacement `w` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WRule {
    /// `w = 0`, so `B = 0`.
    Zero,
    /// `sym∇w = (κ/2)(A²)_tan`, solved or projected.
    Membrane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub kappa: f64,
    /// Exponent of `e = h^β` used by `gamma-check` when `κ = 0`.
    pub beta: f64,
    pub w: WRule,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig { kappa: 0.0, beta: 5.0, w: WRule::Membrane }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadPreset {
    None,
    /// `a (cos 2πk s₁ + cos 2πk s₂) n` with `sᵢ` the normalized parameters.
    NormalWave,
    /// `a cos(2u₂) n`: the ovalizing pressure on a closed surface.
    RadialCos2,
    /// Nodal forces from a CSV file with columns `fx, fy, fz`.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadConfig {
    pub preset: LoadPreset,
    pub amplitude: f64,
    pub wave: f64,
    /// Adds the self-balanced in-plane pull `tension·(x − x̄)`.
    pub tension: f64,
    pub path: Option<String>,
    pub remove_mean: bool,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            preset: LoadPreset::None,
            amplitude: 1.0,
            wave: 1.0,
            tension: 0.0,
            path: None,
            remove_mean: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembraneSource {
    /// `B = ½(A²)_tan` of the configured displacement mode.
    ModeStrain,
    /// Uniform hoop strain, `B₂₂ = a·g₂₂`.
    Hoop,
    /// Chart components `b11, b12, b22` per node from a CSV file.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MembraneConfig {
    pub source: MembraneSource,
    pub amplitude: f64,
    pub path: Option<String>,
}

impl Default for MembraneConfig {
    fn default() -> Self {
        MembraneConfig { source: MembraneSource::ModeStrain, amplitude: 1.0, path: None }
    }
}

/// Displacement presets for `energy`, `membrane` and `gamma-check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `V = (0, 0, sin πŝ₁ sin πŝ₂)` over the normalized parameters.
    PlateBending,
    /// `V = cos2θ γ − ½ sin2θ γ'` on a closed surface.
    Ovalization,
    /// The `k`-th softest bending eigenmode of the rigid-free isometry space,
    /// scaled to unit peak.
    Basis(usize),
    Zero,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::PlateBending => write!(f, "plate-bending"),
            Mode::Ovalization => write!(f, "ovalization"),
            Mode::Basis(k) => write!(f, "basis:{k}"),
            Mode::Zero => write!(f, "zero"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plate-bending" => Ok(Mode::PlateBending),
            "ovalization" => Ok(Mode::Ovalization),
            "zero" => Ok(Mode::Zero),
            _ => match s.strip_prefix("basis:").map(str::parse::<usize>) {
                Some(Ok(k)) => Ok(Mode::Basis(k)),
                _ => Err(format!(
                    "unknown mode `{s}`; expected plate-bending, ovalization, zero or basis:K"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Isometry modes requested.
    pub basis_size: usize,
    /// Rayleigh threshold relative to the largest quotient.
    pub threshold: f64,
    pub dictionary_degree: usize,
    /// Defaults to `min(n₂/2 − 1, 32)`.
    pub fourier_order: Option<usize>,
    /// Samples of a degenerate rotation set.
    pub rotation_samples: usize,
    /// Defaults by family: plate-bending on plates, ovalization on cylinders,
    /// basis:0 otherwise.
    pub mode: Option<String>,
    pub amplitude: f64,
    pub h_list: Vec<f64>,
    pub t_quad: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 200,
            restarts: 0,
            seed: 0,
            basis_size: 24,
            threshold: 1e-8,
            dictionary_degree: 4,
            fourier_order: None,
            rotation_samples: 64,
            mode: None,
            amplitude: 1.0,
            h_list: vec![0.1, 0.05, 0.025, 0.0125],
            t_quad: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: "shellvk-out".into(), formats: vec![Format::Json, Format::Csv] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub moduli: ModuliConfig,
    pub scaling: ScalingConfig,
    pub load: LoadConfig,
    pub membrane: MembraneConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

/// 1-based line of `key` inside `[section]`, or of the section header.
fn locate(text: &str, section: &str, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section && header.is_none() {
                header = Some(i + 1);
            }
            continue;
        }
        if current != section {
            continue;
        }
        if let (Some(k), Some((lhs, _))) = (key, line.split_once('=')) {
            if lhs.trim() == k {
                return Some(i + 1);
            }
        }
    }
    header
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl RunConfig {
    /// Parses and validates; grid-dependent defaults are made explicit.
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            ConfigError {
                path: path.to_string(),
                line,
                column,
                field: None,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.resolve();
        cfg.validate().map_err(|(field, message)| {
            let (section, key) = field.split_once('.').unwrap_or((field, ""));
            ConfigError {
                path: path.to_string(),
                line: locate(text, section, (!key.is_empty()).then_some(key)),
                column: None,
                field: Some(field.to_string()),
                message,
            }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: shown.clone(),
            line: None,
            column: None,
            field: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, &shown)
    }

    /// The resolved configuration in the same flat format.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&mut self) {
        if self.solver.fourier_order.is_none() {
            self.solver.fourier_order = Some(default_fourier_order(self.surface.n2));
        }
        if self.solver.mode.is_none() {
            let mode = match self.surface.family {
                Family::Plate => Mode::PlateBending,
                Family::Cylinder => Mode::Ovalization,
                Family::Revolution | Family::Sphere => Mode::Basis(0),
            };
            self.solver.mode = Some(mode.to_string());
        }
        let s = &mut self.surface;
        if s.domain.is_none() {
            s.domain = Some(match s.family {
                Family::Plate => [[0.0, 1.0], [0.0, 1.0]],
                Family::Cylinder => [[0.0, s.height], [0.0, 2.0 * PI]],
                Family::Revolution => [s.s_range, [0.0, 2.0 * PI]],
                Family::Sphere => [[PI / 6.0, 5.0 * PI / 6.0], [0.0, 2.0 * PI]],
            });
        }
        if s.periodic.is_none() {
            s.periodic = Some(!matches!(s.family, Family::Plate));
        }
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        let s = &self.surface;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if s.n1 < 8 {
            return Err(("surface.n1", format!("must be at least 8, got {}", s.n1)));
        }
        if s.n2 < 8 {
            return Err(("surface.n2", format!("must be at least 8, got {}", s.n2)));
        }
        match s.family {
            Family::Plate if !s.stretch.iter().all(|&v| positive(v)) => {
                return Err(("surface.stretch", "stretch factors must be positive".into()))
            }
            Family::Cylinder | Family::Sphere if !positive(s.radius) => {
                return Err(("surface.radius", format!("must be positive, got {}", s.radius)))
            }
            Family::Cylinder if !positive(s.height) => {
                return Err(("surface.height", format!("must be positive, got {}", s.height)))
            }
            Family::Revolution if s.profile.is_empty() => {
                return Err(("surface.profile", "needs at least one coefficient".into()))
            }
            _ => {}
        }
        let domain = s.domain.expect("resolved");
        if domain.iter().any(|[a, b]| !(a.is_finite() && b.is_finite() && b > a)) {
            return Err(("surface.domain", "each side must satisfy a < b".into()));
        }
        let closed = matches!(s.family, Family::Cylinder | Family::Revolution);
        if closed {
            if s.periodic == Some(false) {
                return Err(("surface.periodic", "closed surfaces of revolution are periodic".into()));
            }
            if (domain[1][0]).abs() > 1e-12 || (domain[1][1] - 2.0 * PI).abs() > 1e-12 {
                return Err(("surface.domain", "the angle must cover [0, 2π]".into()));
            }
        }
        if s.family == Family::Sphere && (domain[0][0] <= 0.0 || domain[0][1] >= PI) {
            return Err(("surface.domain", "polar angle must stay inside (0, π)".into()));
        }
        if s.family == Family::Revolution {
            let grid = Grid::new(s.n1, s.n2, domain, true).map_err(|e| ("surface.domain", e.to_string()))?;
            let profile = Profile::polynomial(s.profile.clone());
            for i in 0..grid.n1 {
                let u = grid.coord(i, 0)[0];
                if !(profile.eval(u).0 > 0.0) {
                    return Err(("surface.profile", format!("g(s) must be positive on the range, g({u}) ≤ 0")));
                }
            }
        }
        ElasticModuli::new(self.moduli.mu, self.moduli.lambda).map_err(|e| {
            let field = if positive(self.moduli.mu) { "moduli.lambda" } else { "moduli.mu" };
            (field, e.to_string())
        })?;
        let sc = &self.scaling;
        if !(sc.kappa >= 0.0 && sc.kappa.is_finite()) {
            return Err(("scaling.kappa", format!("must be finite and nonnegative, got {}", sc.kappa)));
        }
        if !(sc.beta > 4.0 && sc.beta.is_finite()) {
            return Err(("scaling.beta", format!("must exceed 4, got {}", sc.beta)));
        }
        let l = &self.load;
        if !(l.amplitude.is_finite() && l.wave.is_finite() && l.tension.is_finite()) {
            return Err(("load.amplitude", "load parameters must be finite".into()));
        }
        if l.preset == LoadPreset::Csv && l.path.is_none() {
            return Err(("load.path", "preset = \"csv\" needs a path".into()));
        }
        if l.preset == LoadPreset::RadialCos2 && !s.periodic.unwrap_or(false) {
            return Err(("load.preset", "radial-cos2 needs a periodic angle".into()));
        }
        let m = &self.membrane;
        if !m.amplitude.is_finite() {
            return Err(("membrane.amplitude", "must be finite".into()));
        }
        if m.source == MembraneSource::Csv && m.path.is_none() {
            return Err(("membrane.path", "source = \"csv\" needs a path".into()));
        }
        let v = &self.solver;
        if !positive(v.tol) {
            return Err(("solver.tol", format!("must be positive, got {}", v.tol)));
        }
        if v.max_iter == 0 {
            return Err(("solver.max_iter", "must be at least 1".into()));
        }
        if v.basis_size == 0 {
            return Err(("solver.basis_size", "must be at least 1".into()));
        }
        if !(positive(v.threshold) && v.threshold < 1.0) {
            return Err(("solver.threshold", format!("must lie in (0, 1), got {}", v.threshold)));
        }
        if v.rotation_samples == 0 {
            return Err(("solver.rotation_samples", "must be at least 1".into()));
        }
        let order = v.fourier_order.expect("resolved");
        if closed && order > (s.n2 - 1) / 2 {
            return Err(("solver.fourier_order", format!("{order} exceeds the resolvable {} for n2 = {}", (s.n2 - 1) / 2, s.n2)));
        }
        let mode = self.mode().map_err(|e| ("solver.mode", e))?;
        if mode == Mode::Ovalization && !closed {
            return Err(("solver.mode", "ovalization needs a cylinder or surface of revolution".into()));
        }
        if !v.amplitude.is_finite() {
            return Err(("solver.amplitude", "must be finite".into()));
        }
        if v.h_list.len() < 4 {
            return Err(("solver.h_list", format!("needs at least 4 thicknesses, got {}", v.h_list.len())));
        }
        if !v.h_list.windows(2).all(|w| w[1] < w[0]) || !v.h_list.iter().all(|&h| h > 0.0 && h <= 0.5) {
            return Err(("solver.h_list", "thicknesses must be strictly decreasing inside (0, 0.5]".into()));
        }
        if !(2..=8).contains(&v.t_quad) {
            return Err(("solver.t_quad", format!("must lie in 2..=8, got {}", v.t_quad)));
        }
        if self.output.formats.is_empty() {
            return Err(("output.formats", "at least one format is required".into()));
        }
        if self.output.directory.is_empty() {
            return Err(("output.directory", "must not be empty".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> Result<Mode, String> {
        self.solver.mode.as_deref().unwrap_or("zero").parse()
    }

    pub fn moduli(&self) -> ElasticModuli {
        ElasticModuli::new(self.moduli.mu, self.moduli.lambda).expect("validated")
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn chart(&self) -> shellvk::Result<SurfaceChart> {
        let s = &self.surface;
        let family = match s.family {
            Family::Plate => SurfaceFamily::Plate { stretch: s.stretch },
            Family::Cylinder => SurfaceFamily::Cylinder { radius: s.radius },
            Family::Revolution => SurfaceFamily::Revolution { profile: Profile::polynomial(s.profile.clone()) },
            Family::Sphere => SurfaceFamily::SpherePatch { radius: s.radius },
        };
        let grid = Grid::new(s.n1, s.n2, s.domain.expect("resolved"), s.periodic.expect("resolved"))?;
        SurfaceChart::build(family, grid)
    }
}

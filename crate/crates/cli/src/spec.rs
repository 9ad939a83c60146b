//! Experiment specification files (TOML).

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vprep::{PotentialConfig, PropagationSetup, SwitchingSchedule, UnitSystem};

/// Experiments a spec can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Poles,
    GroundState,
    IsoCurves,
    DelaySpectrum,
    DecayCurves,
    #[serde(rename = "spectrum-vs-T")]
    SpectrumVsT,
    TScan,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Poles,
        Experiment::GroundState,
        Experiment::IsoCurves,
        Experiment::DelaySpectrum,
        Experiment::DecayCurves,
        Experiment::SpectrumVsT,
        Experiment::TScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Poles => "poles",
            Experiment::GroundState => "ground-state",
            Experiment::IsoCurves => "iso-curves",
            Experiment::DelaySpectrum => "delay-spectrum",
            Experiment::DecayCurves => "decay-curves",
            Experiment::SpectrumVsT => "spectrum-vs-T",
            Experiment::TScan => "t-scan",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strengths {
    /// Well depth, ħ·s⁻¹.
    pub v_well: f64,
    /// Barrier height, ħ·s⁻¹.
    pub v_barrier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    /// Particle mass in atomic mass units.
    #[serde(default = "default_mass")]
    pub mass_amu: f64,
    /// Well width, µm.
    pub d: f64,
    /// Barrier width, µm.
    pub b: f64,
    pub initial: Strengths,
    #[serde(rename = "final")]
    pub target: Strengths,
}

fn default_mass() -> f64 {
    vprep::units::SODIUM_23_AMU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Spatial step near the potential, µm.
    pub dx: f64,
    /// Time step, s.
    pub dt: f64,
    /// Energy cutoff, ħ·s⁻¹.
    pub e_cut: f64,
    /// Residual potential deviation at the projection time, ħ·s⁻¹.
    pub eps_v: f64,
    /// Box length of decay runs, µm.
    pub decay_box: f64,
    /// Samples of every energy distribution.
    pub energy_points: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { dx: 0.05, dt: 2e-4, e_cut: 3000.0, eps_v: 1e-3, decay_box: 150.0, energy_points: 2000 }
    }
}

/// Units of switching-time lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    /// Multiples of the final resonance lifetime.
    #[default]
    Tau,
    /// Seconds.
    S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolesSection {
    /// Upper end of the searched Re k, µm⁻¹.
    pub re_k_max: f64,
    /// Depth of the searched strip below the real axis, µm⁻¹.
    pub im_k_depth: f64,
    /// Largest number of poles listed.
    pub max_count: usize,
}

impl Default for PolesSection {
    fn default() -> Self {
        Self { re_k_max: 1.2, im_k_depth: 0.2, max_count: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsoSection {
    /// Resonance energies to follow, ħ·s⁻¹.
    pub targets: Vec<f64>,
    pub v_well_min: f64,
    pub v_well_max: f64,
    pub samples: usize,
    pub v_barrier_max: f64,
}

impl Default for IsoSection {
    fn default() -> Self {
        Self { targets: vec![53.391, 7.422], v_well_min: 5.0, v_well_max: 350.0, samples: 60, v_barrier_max: 2000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelaySection {
    /// Energy window in units of Γ around the resonance.
    pub half_width_gamma: f64,
    pub points: usize,
}

impl Default for DelaySection {
    fn default() -> Self {
        Self { half_width_gamma: 10.0, points: 801 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySection {
    pub t_switch: Vec<f64>,
    pub t_switch_unit: TimeUnit,
    /// Duration of every run, s.
    pub t_end: f64,
    /// Start of the late-time exponential fit per run, s; a single value applies to all.
    pub fit_t_min: Vec<f64>,
    /// Keep every n-th step in the CSV.
    pub stride: usize,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            t_switch: vec![0.0, 0.058, 0.13, 1.0],
            t_switch_unit: TimeUnit::Tau,
            t_end: 3.5,
            fit_t_min: vec![0.5, 0.5, 0.5, 2.0],
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub t_switch: Vec<f64>,
    pub t_switch_unit: TimeUnit,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { t_switch: vec![0.0, 0.058, 1.0], t_switch_unit: TimeUnit::Tau }
    }
}

/// Objective names accepted by the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveName {
    LorentzianDeviation,
    ExponentialDeviation,
}

impl From<ObjectiveName> for vprep::Objective {
    fn from(o: ObjectiveName) -> Self {
        match o {
            ObjectiveName::LorentzianDeviation => vprep::Objective::LorentzianDeviation,
            ObjectiveName::ExponentialDeviation => vprep::Objective::ExponentialDeviation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub objectives: Vec<ObjectiveName>,
    /// `(lo, hi)` per objective, same unit as `range_unit`.
    pub lorentzian_range: [f64; 2],
    pub exponential_range: [f64; 2],
    pub range_unit: TimeUnit,
    pub points: usize,
    pub relative_precision: f64,
    pub max_refinements: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            objectives: vec![ObjectiveName::LorentzianDeviation, ObjectiveName::ExponentialDeviation],
            lorentzian_range: [0.005, 0.5],
            exponential_range: [0.01, 1.0],
            range_unit: TimeUnit::Tau,
            points: 15,
            relative_precision: 0.05,
            max_refinements: 20,
        }
    }
}

/// Reference values the summary checks against; absent entries are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Expected complex resonance energy `[Re, Im]`, ħ·s⁻¹.
    pub e_res: Option<[f64; 2]>,
    pub e_res_rel_tol: f64,
    /// Expected lifetime, s.
    pub tau: Option<f64>,
    pub tau_rel_tol: f64,
    /// Agreement between fitted decay lifetimes and the pole lifetime.
    pub decay_tau_rel_tol: f64,
    pub iso_rel_tol: f64,
    pub delay_fit_rel_tol: f64,
    pub normalization_tol: f64,
    /// Accepted `t_star` brackets in units of τ.
    pub lorentzian_t_star: Option<[f64; 2]>,
    pub exponential_t_star: Option<[f64; 2]>,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            e_res: None,
            e_res_rel_tol: 1e-3,
            tau: None,
            tau_rel_tol: 3e-3,
            decay_tau_rel_tol: 0.03,
            iso_rel_tol: 1e-3,
            delay_fit_rel_tol: 0.02,
            normalization_tol: 1e-3,
            lorentzian_t_star: None,
            exponential_t_star: None,
        }
    }
}

/// A parsed experiment specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub experiments: Vec<Experiment>,
    /// Output directory; relative paths resolve against the working directory.
    pub output: String,
    pub physics: Physics,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub poles: PolesSection,
    #[serde(default)]
    pub iso_curves: IsoSection,
    #[serde(default)]
    pub delay_spectrum: DelaySection,
    #[serde(default)]
    pub decay_curves: DecaySection,
    #[serde(default)]
    pub spectrum_vs_t: SpectrumSection,
    #[serde(default)]
    pub t_scan: ScanSection,
    #[serde(default)]
    pub checks: Checks,
}

/// The spec shipped as `configs/paper-defaults.toml`.
pub const PAPER_DEFAULTS: &str = include_str!("../../../configs/paper-defaults.toml");

impl ExperimentSpec {
    /// Parses TOML text after applying `key.path=value` overrides.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = toml::from_str(text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let spec: ExperimentSpec = value.try_into()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        // go through the typed parser directly so errors keep line/column
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if overrides.is_empty() {
            Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            Self::parse_with_overrides(&text, overrides).with_context(|| format!("parsing {}", path.display()))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn unit(&self) -> Result<UnitSystem<f64>> {
        Ok(UnitSystem::from_mass_amu(self.physics.mass_amu)?)
    }

    pub fn initial(&self) -> Result<PotentialConfig<f64>> {
        let p = &self.physics;
        Ok(PotentialConfig::new(p.initial.v_well, p.initial.v_barrier, p.d, p.b)?)
    }

    pub fn target(&self) -> Result<PotentialConfig<f64>> {
        let p = &self.physics;
        Ok(PotentialConfig::new(p.target.v_well, p.target.v_barrier, p.d, p.b)?)
    }
}

/// Sets `path = value` in a TOML tree; the value is parsed as TOML and
/// falls back to a plain string.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not of the form key.path=value"))?;
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    let mut cur = root;
    for (i, key) in keys.iter().enumerate() {
        let table = cur.as_table_mut().with_context(|| format!("override `{path}`: `{key}` is not inside a table"))?;
        if i + 1 == keys.len() {
            table.insert((*key).to_string(), parsed);
            return Ok(());
        }
        cur = table.entry((*key).to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Ok(())
}

/// One problem found by [`validate_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All violations in the spec at `path`; empty means runnable. Only an
/// unreadable file is an error.
pub fn validate_spec(path: &Path, overrides: &[String]) -> std::io::Result<Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path)?;
    let parsed = if overrides.is_empty() {
        ExperimentSpec::parse(&text)
    } else {
        ExperimentSpec::parse_with_overrides(&text, overrides)
    };
    Ok(match parsed {
        Ok(spec) => diagnostics(&spec),
        Err(e) => vec![Diagnostic { field: "spec".into(), message: format!("{e:#}") }],
    })
}

/// Checks a parsed spec without running anything.
pub fn diagnostics(spec: &ExperimentSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| out.push(Diagnostic { field: field.into(), message });
    let unit = match spec.unit() {
        Ok(u) => Some(u),
        Err(e) => {
            push("physics.mass_amu", e.to_string());
            None
        }
    };
    let initial = spec.initial().map_err(|e| push("physics.initial", e.to_string())).ok();
    let target = spec.target().map_err(|e| push("physics.final", e.to_string())).ok();
    if spec.experiments.is_empty() {
        push("experiments", "no experiment requested".into());
    }
    if spec.output.trim().is_empty() {
        push("output", "output directory is empty".into());
    }
    let n = &spec.numerics;
    if !(n.eps_v > 0.0) {
        push("numerics.eps_v", format!("must be positive, got {}", n.eps_v));
    }
    if n.energy_points < 1100 {
        push("numerics.energy_points", format!("need at least 1100 samples, got {}", n.energy_points));
    }
    if !(n.decay_box > spec.physics.d + spec.physics.b) {
        push("numerics.decay_box", format!("box {} does not contain the potential", n.decay_box));
    }
    for (name, list) in [("decay_curves.t_switch", &spec.decay_curves.t_switch), ("spectrum_vs_t.t_switch", &spec.spectrum_vs_t.t_switch)]
    {
        for (i, t) in list.iter().enumerate() {
            if !(*t >= 0.0) || !t.is_finite() {
                push(name, format!("entry {i}: switching time must be >= 0, got {t}"));
            }
        }
    }
    let dc = &spec.decay_curves;
    if !(dc.fit_t_min.len() == 1 || dc.fit_t_min.len() == dc.t_switch.len()) {
        push("decay_curves.fit_t_min", "give one value or one per switching time".into());
    }
    if dc.stride == 0 {
        push("decay_curves.stride", "must be at least 1".into());
    }
    let sc = &spec.t_scan;
    for (name, r) in [("t_scan.lorentzian_range", sc.lorentzian_range), ("t_scan.exponential_range", sc.exponential_range)] {
        if !(r[0] > 0.0 && r[1] > r[0]) {
            push(name, format!("need 0 < lo < hi, got {r:?}"));
        }
        if sc.range_unit == TimeUnit::Tau && r[1] > 2.0 {
            push(name, format!("upper end {} exceeds 2τ", r[1]));
        }
    }
    if sc.points < 3 {
        push("t_scan.points", "coarse scan needs at least 3 points".into());
    }
    let iso = &spec.iso_curves;
    if !(iso.v_well_min > 0.0 && iso.v_well_max > iso.v_well_min) {
        push("iso_curves.v_well_min", "need 0 < v_well_min < v_well_max".into());
    }
    if iso.targets.iter().any(|t| !(*t > 0.0)) {
        push("iso_curves.targets", "targets must be positive".into());
    }
    if iso.samples < 2 {
        push("iso_curves.samples", "need at least 2 samples".into());
    }
    if spec.delay_spectrum.points < 10 {
        push("delay_spectrum.points", "need at least 10 points".into());
    }

    if let (Some(unit), Some(initial), Some(target)) = (unit, initial, target) {
        let mut decay = PropagationSetup::decay_profile(SwitchingSchedule::sudden(initial, target), unit);
        decay.grid.dx = n.dx;
        decay.dt = n.dt;
        decay.e_cut = n.e_cut;
        decay.t_end = dc.t_end;
        decay.grid.length = Some(n.decay_box);
        if let vprep::Absorber::ComplexScaling { strength, .. } = decay.absorber {
            decay.absorber = vprep::Absorber::ComplexScaling { width: n.decay_box * 0.25, strength };
        }
        for issue in decay.diagnostics() {
            let field = match issue.field {
                "dx" | "dt" | "e_cut" => format!("numerics.{}", issue.field),
                "t_end" => "decay_curves.t_end".into(),
                "length" | "absorber" => "numerics.decay_box".into(),
                other => other.to_string(),
            };
            push(&field, issue.message);
        }
    }
    out
}

/// Reads the bundled paper-defaults spec.
pub fn paper_defaults() -> ExperimentSpec {
    ExperimentSpec::parse(PAPER_DEFAULTS).expect("bundled spec parses")
}

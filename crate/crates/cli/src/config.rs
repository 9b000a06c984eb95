//! Run configuration: TOML schema, `--override` handling and resolution into
//! angular-unit library parameters.
//!
//! Physical rates (`kappa_*`, `gamma_th`, `g`, `gamma_b`) are read in Hz and
//! multiplied by 2π unless `angular = true`. Times are in seconds.

use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use autoqec_core::code::{Basis, RateOptions};
use autoqec_core::concat::{platform_by_name, CodeKind, NoisePoint, PlatformPreset, Selection};
use autoqec_core::liouville::{NoiseParams, ThermalMode, DEFAULT_BATH_LEVELS};
use autoqec_core::propagate::{EvolveOptions, Method};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GammaGrid,
    ErrorRates,
    DecodedRates,
    CatCompare,
    Concat,
    BathCheck,
    MetrologyQcrb,
    MetrologySnr,
    VerifyAppendixB,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::GammaGrid,
        Experiment::ErrorRates,
        Experiment::DecodedRates,
        Experiment::CatCompare,
        Experiment::Concat,
        Experiment::BathCheck,
        Experiment::MetrologyQcrb,
        Experiment::MetrologySnr,
        Experiment::VerifyAppendixB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GammaGrid => "gamma-grid",
            Experiment::ErrorRates => "error-rates",
            Experiment::DecodedRates => "decoded-rates",
            Experiment::CatCompare => "cat-compare",
            Experiment::Concat => "concat",
            Experiment::BathCheck => "bath-check",
            Experiment::MetrologyQcrb => "metrology-qcrb",
            Experiment::MetrologySnr => "metrology-snr",
            Experiment::VerifyAppendixB => "verify-appendix-b",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::GammaGrid => "no-jump decay rate Γ/κ_R over a (β, ⟨σx⟩) grid",
            Experiment::ErrorRates => "logical bit- and phase-flip rates of the selected code",
            Experiment::DecodedRates => "raw and decoded phase error versus time",
            Experiment::CatCompare => "hybrid code against the two-photon cat code",
            Experiment::Concat => "repetition-code logical error probabilities",
            Experiment::BathCheck => "two-mode bath model against the eliminated dissipator",
            Experiment::MetrologyQcrb => "QCRB after an idle window, recovery on and off",
            Experiment::MetrologySnr => "Ramsey signal-to-noise ratio",
            Experiment::VerifyAppendixB => "jump-action identities and displaced-basis checks",
        }
    }

    /// Sweep axes that make sense for this experiment.
    pub fn axes(self) -> &'static [Axis] {
        use Axis::*;
        const RATES: [Axis; 8] = [Alpha, KappaTh, NTh, GammaTh, KappaN, KappaSx, KappaSz, KappaR];
        match self {
            Experiment::GammaGrid | Experiment::VerifyAppendixB => &[Alpha],
            Experiment::ErrorRates | Experiment::DecodedRates | Experiment::CatCompare => &RATES,
            Experiment::Concat => &[Alpha, KappaTh, NTh, GammaTh, KappaN, KappaSx, KappaSz, KappaR, D, TCorr],
            Experiment::BathCheck => &[Alpha, G, GammaB],
            Experiment::MetrologyQcrb => &[Alpha, KappaTh, NTh, GammaTh, KappaN, KappaSx, KappaSz, KappaR, TWindow],
            Experiment::MetrologySnr => &[Alpha, Beta],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Alpha,
    KappaTh,
    NTh,
    GammaTh,
    KappaN,
    KappaSx,
    KappaSz,
    KappaR,
    G,
    GammaB,
    TWindow,
    Beta,
    D,
    TCorr,
}

impl Axis {
    const ALL: [Axis; 14] = [
        Axis::Alpha,
        Axis::KappaTh,
        Axis::NTh,
        Axis::GammaTh,
        Axis::KappaN,
        Axis::KappaSx,
        Axis::KappaSz,
        Axis::KappaR,
        Axis::G,
        Axis::GammaB,
        Axis::TWindow,
        Axis::Beta,
        Axis::D,
        Axis::TCorr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::KappaTh => "kappa_th",
            Axis::NTh => "n_th",
            Axis::GammaTh => "gamma_th",
            Axis::KappaN => "kappa_n",
            Axis::KappaSx => "kappa_sx",
            Axis::KappaSz => "kappa_sz",
            Axis::KappaR => "kappa_r",
            Axis::G => "g",
            Axis::GammaB => "gamma_b",
            Axis::TWindow => "t_window",
            Axis::Beta => "beta",
            Axis::D => "d",
            Axis::TCorr => "t_corr",
        }
    }

    /// Rate axes are given in Hz unless the config is angular.
    pub fn is_rate(self) -> bool {
        matches!(
            self,
            Axis::KappaTh
                | Axis::GammaTh
                | Axis::KappaN
                | Axis::KappaSx
                | Axis::KappaSz
                | Axis::KappaR
                | Axis::G
                | Axis::GammaB
        )
    }
}

impl FromStr for Axis {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Axis::ALL.into_iter().find(|a| a.name() == s).ok_or(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Rates are already angular (rad/s) rather than Hz.
    #[serde(default)]
    pub angular: bool,
    pub code: CodeSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub concat: ConcatSection,
    #[serde(default)]
    pub bath: BathSection,
    #[serde(default)]
    pub metrology: MetrologySection,
    #[serde(default)]
    pub appendix: AppendixSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_truncation: Option<usize>,
    /// `hybrid` or `cat`.
    #[serde(default = "default_kind")]
    pub kind: String,
}

fn default_kind() -> String {
    "hybrid".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// `ti` / `trapped-ion` or `sc` / `superconducting`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<String>,
    /// `low`, `mid` or `high` inside the platform ranges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_sx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_sz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_b: Option<f64>,
}

/// Per-rate selection overriding `noise.selection`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_n: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_sx: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_sz: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    /// `rk45` or `expm`.
    pub method: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub leakage_check: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let e = EvolveOptions::default();
        IntegratorSection {
            method: "rk45".into(),
            rel_tol: e.rel_tol,
            abs_tol: e.abs_tol,
            max_step: None,
            leakage_check: e.leakage_check,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub target: f64,
    pub floor: f64,
    pub steps_per_level: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    /// `x` or `z`: stop marching once that basis reaches the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_on: Option<String>,
    pub restart_check: bool,
}

impl Default for RatesSection {
    fn default() -> Self {
        let r = RateOptions::default();
        RatesSection {
            target: r.target,
            floor: r.floor,
            steps_per_level: r.steps_per_level,
            h0: None,
            max_time: None,
            stop_on: None,
            restart_check: r.restart_check,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub beta_min: f64,
    pub beta_max: f64,
    pub sx_min: f64,
    pub sx_max: f64,
    pub resolution: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            beta_min: -3.0,
            beta_max: 3.0,
            sx_min: -1.0,
            sx_max: 1.0,
            resolution: 61,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcatSection {
    pub d: i64,
    /// Seconds per correction round; defaults to the platform value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_corr: Option<f64>,
}

impl Default for ConcatSection {
    fn default() -> Self {
        ConcatSection { d: 3, t_corr: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub levels: usize,
    /// Seconds; defaults to `5/κ_R`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub samples: usize,
    /// `plus`, `minus`, `zero`, `one` or `flipped-plus` (σ_z applied to |+⟩_L).
    pub initial: String,
}

impl Default for BathSection {
    fn default() -> Self {
        BathSection {
            levels: DEFAULT_BATH_LEVELS,
            duration: None,
            samples: 10,
            initial: "flipped-plus".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetrologySection {
    /// Idle window in seconds.
    pub t_window: f64,
    /// `on`, `off` or `both`.
    pub recovery: String,
    /// Signal amplitudes for `metrology-snr`.
    pub betas: Vec<f64>,
}

impl Default for MetrologySection {
    fn default() -> Self {
        MetrologySection {
            t_window: 1e-3,
            recovery: "both".into(),
            betas: vec![0.05, 0.1, 0.2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppendixSection {
    pub n_max: usize,
}

impl Default for AppendixSection {
    fn default() -> Self {
        AppendixSection { n_max: 3 }
    }
}

/// One configuration problem, named by its dotted key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Parses `text`, applies `key=value` overrides and deserializes.
pub fn load_str(text: &str, overrides: &[String]) -> Result<RunConfig, Vec<Diagnostic>> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| vec![Diagnostic::new("config", e.message().trim().to_string())])?;
    for ov in overrides {
        apply_override(&mut table, ov).map_err(|d| vec![d])?;
    }
    RunConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| vec![Diagnostic::new("config", e.message().trim().to_string())])
}

pub fn load_file(path: &std::path::Path, overrides: &[String]) -> Result<RunConfig, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Diagnostic::new("config", format!("cannot read {}: {e}", path.display()))])?;
    load_str(&text, overrides)
}

fn apply_override(table: &mut toml::Table, arg: &str) -> Result<(), Diagnostic> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| Diagnostic::new("--override", format!("expected key=value, got `{arg}`")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Diagnostic::new("--override", format!("empty key in `{arg}`")));
    }
    // Bare words that are not valid TOML values are taken as strings.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Diagnostic::new(key, format!("`{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Fully resolved parameters of one sweep point, angular units.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub alpha: f64,
    pub noise: NoiseParams,
    pub g: f64,
    pub gamma_b: f64,
    pub d: usize,
    pub t_corr: f64,
    pub t_window: f64,
    pub betas: Vec<f64>,
}

/// A validated run: base point, sweep and engine options.
#[derive(Clone, Debug)]
pub struct Plan {
    pub experiment: Experiment,
    pub config: RunConfig,
    pub kind: CodeKind,
    pub fock_truncation: Option<usize>,
    pub base: Point,
    pub sweep: Option<(Axis, Vec<f64>)>,
    pub evolve: EvolveOptions,
    pub rates: RateOptions,
    pub recovery: Vec<bool>,
    pub initial: String,
}

impl Plan {
    /// Sweep points in input order.
    pub fn points(&self) -> Vec<Point> {
        match &self.sweep {
            None => vec![self.base.clone()],
            Some((axis, values)) => values.iter().map(|&v| self.at(*axis, v)).collect(),
        }
    }

    fn at(&self, axis: Axis, v: f64) -> Point {
        let mut p = self.base.clone();
        match axis {
            Axis::Alpha => p.alpha = v,
            Axis::KappaTh => p.noise.kappa_th = v,
            Axis::NTh => p.noise.n_th = v,
            Axis::GammaTh => p.noise.gamma_th = v,
            Axis::KappaN => p.noise.kappa_n = v,
            Axis::KappaSx => p.noise.kappa_sx = v,
            Axis::KappaSz => p.noise.kappa_sz = v,
            Axis::KappaR => p.noise.kappa_r = v,
            Axis::G => p.g = v,
            Axis::GammaB => p.gamma_b = v,
            Axis::TWindow => p.t_window = v,
            Axis::Beta => p.betas = vec![v],
            Axis::D => p.d = v as usize,
            Axis::TCorr => p.t_corr = v,
        }
        p
    }

    /// The run as an angular-unit config with every resolved value spelled
    /// out; running it again reproduces the same rows.
    pub fn echo(&self) -> String {
        let mut c = self.config.clone();
        let n = &self.base.noise;
        c.angular = true;
        c.noise.kappa_th = Some(n.kappa_th);
        c.noise.n_th = Some(n.n_th);
        c.noise.gamma_th = Some(n.gamma_th);
        c.noise.kappa_n = Some(n.kappa_n);
        c.noise.kappa_sx = Some(n.kappa_sx);
        c.noise.kappa_sz = Some(n.kappa_sz);
        c.noise.kappa_r = Some(n.kappa_r);
        c.noise.thermal_mode = Some(thermal_mode_name(n.thermal_mode).into());
        c.noise.g = Some(self.base.g);
        c.noise.gamma_b = Some(self.base.gamma_b);
        if self.base.t_corr > 0.0 {
            c.concat.t_corr = Some(self.base.t_corr);
        }
        if let (Some(s), Some((_, values))) = (c.sweep.as_mut(), &self.sweep) {
            s.values = values.clone();
        }
        c.output = None;
        toml::to_string(&c).unwrap_or_default()
    }
}

fn thermal_mode_name(m: ThermalMode) -> &'static str {
    match m {
        ThermalMode::FiniteTemperature => "finite-temperature",
        ThermalMode::ClassicalField => "classical-field",
    }
}

fn parse_thermal_mode(s: &str) -> Option<ThermalMode> {
    match s {
        "finite-temperature" => Some(ThermalMode::FiniteTemperature),
        "classical-field" => Some(ThermalMode::ClassicalField),
        _ => None,
    }
}

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic::new(field, message));
    }

    fn nonneg(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.push(field, format!("must be finite and ≥ 0, got {v}"));
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(field, format!("must be finite and > 0, got {v}"));
        }
    }
}

fn selection(d: &mut Diags, field: &str, s: Option<&String>, fallback: Selection) -> Selection {
    match s {
        None => fallback,
        Some(s) => s.parse().unwrap_or_else(|_| {
            d.push(field, format!("expected low|mid|high, got `{s}`"));
            fallback
        }),
    }
}

fn needs_recovery(e: Experiment) -> bool {
    matches!(
        e,
        Experiment::ErrorRates
            | Experiment::DecodedRates
            | Experiment::CatCompare
            | Experiment::Concat
            | Experiment::MetrologyQcrb
    )
}

/// Every problem with `config`; empty when the run can proceed.
pub fn validate(config: &RunConfig) -> Vec<Diagnostic> {
    match resolve(config) {
        Ok(_) => Vec::new(),
        Err(d) => d,
    }
}

/// Resolves `config` into a [`Plan`], collecting all diagnostics.
pub fn resolve(config: &RunConfig) -> Result<Plan, Vec<Diagnostic>> {
    let mut d = Diags(Vec::new());
    let e = config.experiment;
    let unit = if config.angular { 1.0 } else { TAU };

    let kind = config.code.kind.parse::<CodeKind>().unwrap_or_else(|_| {
        d.push("code.kind", format!("expected hybrid|cat, got `{}`", config.code.kind));
        CodeKind::Hybrid
    });
    if kind == CodeKind::Cat && !matches!(e, Experiment::ErrorRates | Experiment::Concat | Experiment::CatCompare) {
        d.push("code.kind", format!("cat code is not available for {e}"));
    }
    let alpha = config.code.alpha;
    if e == Experiment::MetrologyQcrb {
        d.nonneg("code.alpha", alpha);
    } else {
        d.positive("code.alpha", alpha);
    }
    if let Some(n) = config.code.fock_truncation {
        if n < 2 {
            d.push("code.fock_truncation", format!("need at least 2 levels, got {n}"));
        }
    }

    // Noise: preset first, then explicit values.
    let ns = &config.noise;
    let preset: Option<PlatformPreset> = ns.platform.as_ref().and_then(|p| match platform_by_name(p) {
        Ok(p) => Some(p),
        Err(_) => {
            d.push("noise.platform", format!("unknown platform `{p}` (expected ti|sc)"));
            None
        }
    });
    if preset.is_none() && (ns.selection.is_some() || ns.select.is_some()) && ns.platform.is_none() {
        d.push("noise.selection", "needs noise.platform");
    }
    let all = selection(&mut d, "noise.selection", ns.selection.as_ref(), Selection::Mid);
    let sel = ns.select.clone().unwrap_or_default();
    let point = NoisePoint {
        thermal: selection(&mut d, "noise.select.thermal", sel.thermal.as_ref(), all),
        kappa_n: selection(&mut d, "noise.select.kappa_n", sel.kappa_n.as_ref(), all),
        kappa_sx: selection(&mut d, "noise.select.kappa_sx", sel.kappa_sx.as_ref(), all),
        kappa_sz: selection(&mut d, "noise.select.kappa_sz", sel.kappa_sz.as_ref(), all),
        g: selection(&mut d, "noise.select.g", sel.g.as_ref(), all),
    };
    let mut noise = preset.map(|p| p.noise(&point)).unwrap_or_default();
    fn rate(d: &mut Diags, field: &str, v: Option<f64>, slot: &mut f64, scale: f64) {
        if let Some(v) = v {
            d.nonneg(&format!("noise.{field}"), v);
            *slot = v * scale;
        }
    }
    rate(&mut d, "kappa_th", ns.kappa_th, &mut noise.kappa_th, unit);
    rate(&mut d, "n_th", ns.n_th, &mut noise.n_th, 1.0);
    rate(&mut d, "gamma_th", ns.gamma_th, &mut noise.gamma_th, unit);
    rate(&mut d, "kappa_n", ns.kappa_n, &mut noise.kappa_n, unit);
    rate(&mut d, "kappa_sx", ns.kappa_sx, &mut noise.kappa_sx, unit);
    rate(&mut d, "kappa_sz", ns.kappa_sz, &mut noise.kappa_sz, unit);
    let mut g = preset.map_or(0.0, |p| p.g.select(point.g));
    let mut gamma_b = preset.map_or(0.0, |p| p.gamma_b);
    rate(&mut d, "g", ns.g, &mut g, unit);
    rate(&mut d, "gamma_b", ns.gamma_b, &mut gamma_b, unit);
    if let Some(m) = &ns.thermal_mode {
        match parse_thermal_mode(m) {
            Some(m) => noise.thermal_mode = m,
            None => d.push(
                "noise.thermal_mode",
                format!("expected finite-temperature|classical-field, got `{m}`"),
            ),
        }
    }
    if (ns.g.is_some() || ns.gamma_b.is_some()) && gamma_b > 0.0 {
        noise.kappa_r = 4.0 * g * g / gamma_b;
    }
    rate(&mut d, "kappa_r", ns.kappa_r, &mut noise.kappa_r, unit);

    // Sweep.
    let sweep = config.sweep.as_ref().and_then(|s| {
        let Ok(axis) = s.axis.parse::<Axis>() else {
            d.push("sweep.axis", format!("unknown parameter `{}`", s.axis));
            return None;
        };
        if !e.axes().contains(&axis) {
            d.push("sweep.axis", format!("`{}` cannot be swept in {e}", s.axis));
            return None;
        }
        if s.values.is_empty() {
            d.push("sweep.values", "must not be empty");
        }
        for &v in &s.values {
            match axis {
                Axis::Alpha if e == Experiment::MetrologyQcrb => d.nonneg("sweep.values", v),
                Axis::Alpha | Axis::GammaB | Axis::TCorr => d.positive("sweep.values", v),
                Axis::D if !(v >= 1.0 && v.fract() == 0.0 && v as i64 % 2 == 1) => {
                    d.push("sweep.values", format!("distance must be an odd positive integer, got {v}"))
                }
                Axis::Beta => {
                    if !v.is_finite() {
                        d.push("sweep.values", format!("must be finite, got {v}"));
                    }
                }
                _ => d.nonneg("sweep.values", v),
            }
        }
        let scale = if axis.is_rate() { unit } else { 1.0 };
        Some((axis, s.values.iter().map(|v| v * scale).collect::<Vec<_>>()))
    });
    let swept = |a: Axis| sweep.as_ref().is_some_and(|(x, _)| *x == a);

    if needs_recovery(e) && noise.kappa_r <= 0.0 && !swept(Axis::KappaR) {
        let recovery_off = e == Experiment::MetrologyQcrb && config.metrology.recovery == "off";
        if !recovery_off {
            d.push("noise.kappa_r", "recovery rate must be > 0 (set kappa_r, g and gamma_b, or a platform)");
        }
    }

    // Concatenation.
    let mut dist = 0;
    let mut t_corr = 0.0;
    if e == Experiment::Concat {
        let c = &config.concat;
        if c.d < 1 || c.d % 2 == 0 {
            d.push("concat.d", format!("repetition distance must be odd and ≥ 1, got {}", c.d));
        } else {
            dist = c.d as usize;
        }
        t_corr = c.t_corr.or(preset.map(|p| p.t_corr)).unwrap_or(0.0);
        if c.t_corr.is_some() || preset.is_some() {
            d.positive("concat.t_corr", t_corr);
        } else if !swept(Axis::TCorr) {
            d.push("concat.t_corr", "required without a platform");
        }
    }

    // Bath.
    if e == Experiment::BathCheck {
        let b = &config.bath;
        if b.levels < 2 {
            d.push("bath.levels", format!("need at least 2 levels, got {}", b.levels));
        }
        if b.samples == 0 {
            d.push("bath.samples", "must be ≥ 1");
        }
        if let Some(t) = b.duration {
            d.positive("bath.duration", t);
        }
        if !swept(Axis::G) {
            d.positive("noise.g", g);
        }
        if !swept(Axis::GammaB) {
            d.positive("noise.gamma_b", gamma_b);
        }
        if !["plus", "minus", "zero", "one", "flipped-plus"].contains(&b.initial.as_str()) {
            d.push("bath.initial", format!("expected plus|minus|zero|one|flipped-plus, got `{}`", b.initial));
        }
    }

    // Grid.
    if e == Experiment::GammaGrid {
        let gr = &config.grid;
        if gr.resolution == 0 {
            d.push("grid.resolution", "must be ≥ 1");
        }
        if !(gr.beta_min <= gr.beta_max) {
            d.push("grid.beta_min", "must not exceed grid.beta_max");
        }
        if !(-1.0 <= gr.sx_min && gr.sx_min <= gr.sx_max && gr.sx_max <= 1.0) {
            d.push("grid.sx_min", "need -1 ≤ sx_min ≤ sx_max ≤ 1");
        }
    }

    // Metrology.
    let recovery = match config.metrology.recovery.as_str() {
        "both" => vec![true, false],
        "on" => vec![true],
        "off" => vec![false],
        other => {
            d.push("metrology.recovery", format!("expected on|off|both, got `{other}`"));
            vec![]
        }
    };
    if e == Experiment::MetrologyQcrb {
        d.nonneg("metrology.t_window", config.metrology.t_window);
    }
    if e == Experiment::MetrologySnr && config.metrology.betas.is_empty() && !swept(Axis::Beta) {
        d.push("metrology.betas", "must not be empty");
    }
    if e == Experiment::VerifyAppendixB && config.appendix.n_max > 40 {
        d.push("appendix.n_max", format!("at most 40, got {}", config.appendix.n_max));
    }

    // Engines.
    let i = &config.integrator;
    let method = match i.method.as_str() {
        "rk45" => Method::Rk45,
        "expm" => Method::Expm,
        other => {
            d.push("integrator.method", format!("expected rk45|expm, got `{other}`"));
            Method::Rk45
        }
    };
    let evolve = EvolveOptions {
        rel_tol: i.rel_tol,
        abs_tol: i.abs_tol,
        max_step: i.max_step,
        leakage_check: i.leakage_check,
        method,
        ..Default::default()
    };
    if let Err(err) = evolve.validate() {
        d.push("integrator", err.to_string());
    }
    let r = &config.rates;
    let stop_on = match r.stop_on.as_deref() {
        None => None,
        Some("x") => Some(Basis::X),
        Some("z") => Some(Basis::Z),
        Some(other) => {
            d.push("rates.stop_on", format!("expected x|z, got `{other}`"));
            None
        }
    };
    let rates = RateOptions {
        evolve,
        t_grid: None,
        h0: r.h0,
        target: r.target,
        floor: r.floor,
        steps_per_level: r.steps_per_level,
        max_time: r.max_time,
        stop_on,
        restart_check: r.restart_check,
        ..Default::default()
    };
    if let Err(err) = rates.validate() {
        d.push("rates", err.to_string());
    }
    if let Some(h) = r.h0 {
        d.positive("rates.h0", h);
    }
    if let Some(t) = r.max_time {
        d.positive("rates.max_time", t);
    }

    if !d.0.is_empty() {
        return Err(d.0);
    }
    Ok(Plan {
        experiment: e,
        config: config.clone(),
        kind,
        fock_truncation: config.code.fock_truncation,
        base: Point {
            alpha,
            noise,
            g,
            gamma_b,
            d: dist,
            t_corr,
            t_window: config.metrology.t_window,
            betas: config.metrology.betas.clone(),
        },
        sweep,
        evolve,
        rates,
        recovery,
        initial: config.bath.initial.clone(),
    })
}

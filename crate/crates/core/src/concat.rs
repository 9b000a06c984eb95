//! Repetition-code concatenation of the hybrid (or cat) qubit, with the
//! platform parameter presets.
//!
//! Preset rates are stored in angular units: a tabulated value `f` in Hz is
//! kept as `2π f` per second.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::code::{logical_error_rates, CatCode, HybridCode, LogicalRates, RateOptions};
use crate::liouville::{BathParams, NoiseParams, ThermalMode};
use crate::propagate::ConservationStats;
use crate::{math, Error, Result};

/// Outer repetition code of odd distance `d`, one correction round per `t_corr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepetitionSpec {
    pub d: usize,
    pub t_corr: f64,
}

impl RepetitionSpec {
    pub fn new(d: usize, t_corr: f64) -> Result<Self> {
        check_distance(d)?;
        if !(t_corr.is_finite() && t_corr > 0.0) {
            return Err(Error::param("t_corr", "must be finite and > 0"));
        }
        Ok(RepetitionSpec { d, t_corr })
    }
}

fn check_distance(d: usize) -> Result<()> {
    if d == 0 || d % 2 == 0 {
        return Err(Error::param("d", alloc::format!("must be odd and ≥ 1, got {d}")));
    }
    Ok(())
}

/// Flip probability after one round: `q = (1 − e^{−2γt})/2`.
pub fn rate_to_round_prob(gamma: f64, t_corr: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", "must be finite and ≥ 0"));
    }
    if !(t_corr >= 0.0 && t_corr.is_finite()) {
        return Err(Error::param("t_corr", "must be finite and ≥ 0"));
    }
    Ok(-0.5 * math::expm1(-2.0 * gamma * t_corr))
}

/// Inverse of [`rate_to_round_prob`]: `γ = −ln(1 − 2q)/(2t)`.
pub fn round_prob_to_rate(q: f64, t_corr: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&q) {
        return Err(Error::param("q", "must lie in [0, 0.5)"));
    }
    if !(t_corr > 0.0 && t_corr.is_finite()) {
        return Err(Error::param("t_corr", "must be finite and > 0"));
    }
    Ok(-math::ln1p(-2.0 * q) / (2.0 * t_corr))
}

fn check_prob(name: &'static str, q: f64) -> Result<()> {
    if (0.0..=0.5).contains(&q) {
        Ok(())
    } else {
        Err(Error::param(name, alloc::format!("must lie in [0, 0.5], got {q}")))
    }
}

/// Logical `(P_X, P_Z)` of the distance-`d` repetition code: bit flips are
/// majority-voted, phase flips combine by parity.
pub fn repetition_probs(q_x: f64, q_z: f64, d: usize) -> Result<(f64, f64)> {
    check_prob("q_x", q_x)?;
    check_prob("q_z", q_z)?;
    check_distance(d)?;
    let p_z = -0.5 * math::expm1(d as f64 * math::ln1p(-2.0 * q_z));
    let mut p_x = 0.0;
    for k in d.div_ceil(2)..=d {
        p_x += math::binomial(d as u32, k as u32)
            * math::powi(q_x, k as i32)
            * math::powi(1.0 - q_x, (d - k) as i32);
    }
    Ok((p_x, p_z))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Platform {
    TrappedIon,
    Superconducting,
}

impl Platform {
    pub fn short_name(self) -> &'static str {
        match self {
            Platform::TrappedIon => "TI",
            Platform::Superconducting => "SC",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Platform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ti" | "trapped-ion" | "trapped_ion" => Ok(Platform::TrappedIon),
            "sc" | "superconducting" => Ok(Platform::Superconducting),
            _ => Err(Error::UnknownPlatform(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Selection {
    Low,
    #[default]
    Mid,
    High,
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Selection::Low),
            "mid" => Ok(Selection::Mid),
            "high" => Ok(Selection::High),
            _ => Err(Error::param("selection", alloc::format!("expected low|mid|high, got `{s}`"))),
        }
    }
}

/// Closed range of a rate. Upper-bound-only entries have `low = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRange {
    pub low: f64,
    pub high: f64,
}

impl RateRange {
    fn hz(low: f64, high: f64) -> Self {
        RateRange {
            low: math::TAU * low,
            high: math::TAU * high,
        }
    }

    /// `mid` is the geometric mean, or `high/2` when the range starts at 0.
    pub fn select(&self, s: Selection) -> f64 {
        match s {
            Selection::Low => self.low,
            Selection::High => self.high,
            Selection::Mid if self.low > 0.0 => math::sqrt(self.low * self.high),
            Selection::Mid => 0.5 * self.high,
        }
    }
}

/// Per-rate choice of a point inside the preset ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct NoisePoint {
    pub thermal: Selection,
    pub kappa_n: Selection,
    pub kappa_sx: Selection,
    pub kappa_sz: Selection,
    pub g: Selection,
}

impl NoisePoint {
    pub fn uniform(s: Selection) -> Self {
        NoisePoint {
            thermal: s,
            kappa_n: s,
            kappa_sx: s,
            kappa_sz: s,
            g: s,
        }
    }
}

/// Platform parameter ranges, in angular units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlatformPreset {
    pub platform: Platform,
    /// `γ_th` in classical-field mode, `κ_th` otherwise.
    pub thermal: RateRange,
    pub thermal_mode: ThermalMode,
    pub n_th: f64,
    pub kappa_n: RateRange,
    pub kappa_sx: RateRange,
    pub kappa_sz: RateRange,
    pub g: RateRange,
    pub gamma_b: f64,
    pub t_corr: f64,
}

pub fn platform_table(platform: Platform) -> PlatformPreset {
    match platform {
        Platform::TrappedIon => PlatformPreset {
            platform,
            thermal: RateRange::hz(0.014, 4.7),
            thermal_mode: ThermalMode::ClassicalField,
            n_th: 0.0,
            kappa_n: RateRange::hz(1.6, 4.0),
            kappa_sx: RateRange::hz(0.0, 0.03),
            kappa_sz: RateRange::hz(0.0, 0.27),
            g: RateRange::hz(0.31e3, 0.87e3),
            gamma_b: math::TAU * 13.4e3,
            t_corr: 1e-3,
        },
        Platform::Superconducting => PlatformPreset {
            platform,
            thermal: RateRange::hz(2.1e3, 2.3e3),
            thermal_mode: ThermalMode::FiniteTemperature,
            n_th: 1e-3,
            kappa_n: RateRange::hz(0.37e3, 0.73e3),
            kappa_sx: RateRange::hz(0.25e3, 0.95e3),
            kappa_sz: RateRange::hz(0.08e3, 1.6e3),
            g: RateRange::hz(0.3e6, 60e6),
            gamma_b: math::TAU * 10.7e6,
            t_corr: 1e-6,
        },
    }
}

/// Looks a preset up by name (`TI`, `SC`, case-insensitive).
pub fn platform_by_name(name: &str) -> Result<PlatformPreset> {
    Ok(platform_table(name.parse()?))
}

impl PlatformPreset {
    /// `κ_R = 4g²/γ_b` at the selected coupling.
    pub fn kappa_r(&self, g: Selection) -> f64 {
        let g = self.g.select(g);
        4.0 * g * g / self.gamma_b
    }

    pub fn bath(&self, g: Selection, bath_levels: usize) -> Result<BathParams> {
        BathParams::new(self.g.select(g), self.gamma_b, bath_levels)
    }

    /// Noise model at `point`, with `κ_R` from the selected coupling.
    pub fn noise(&self, point: &NoisePoint) -> NoiseParams {
        let thermal = self.thermal.select(point.thermal);
        let (kappa_th, gamma_th) = match self.thermal_mode {
            ThermalMode::FiniteTemperature => (thermal, 0.0),
            ThermalMode::ClassicalField => (0.0, thermal),
        };
        NoiseParams {
            kappa_th,
            n_th: self.n_th,
            gamma_th,
            kappa_n: self.kappa_n.select(point.kappa_n),
            kappa_sx: self.kappa_sx.select(point.kappa_sx),
            kappa_sz: self.kappa_sz.select(point.kappa_sz),
            kappa_r: self.kappa_r(point.g),
            thermal_mode: self.thermal_mode,
        }
    }

    pub fn repetition(&self, d: usize) -> Result<RepetitionSpec> {
        RepetitionSpec::new(d, self.t_corr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CodeKind {
    #[default]
    Hybrid,
    Cat,
}

impl FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hybrid" => Ok(CodeKind::Hybrid),
            "cat" => Ok(CodeKind::Cat),
            _ => Err(Error::param("code", alloc::format!("expected hybrid|cat, got `{s}`"))),
        }
    }
}

/// Logical rates of the chosen code at amplitude `alpha`.
pub fn code_rates(kind: CodeKind, alpha: f64, noise: &NoiseParams, opts: &RateOptions) -> Result<LogicalRates> {
    match kind {
        CodeKind::Hybrid => logical_error_rates(&HybridCode::new(alpha)?, noise, opts),
        CodeKind::Cat => logical_error_rates(&CatCode::new(alpha)?, noise, opts),
    }
}

/// One row of a concatenation sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcatRow {
    pub alpha: f64,
    pub gamma_x: f64,
    pub gamma_z: f64,
    pub q_x: f64,
    pub q_z: f64,
    pub p_x: f64,
    pub p_z: f64,
    pub conservation: ConservationStats,
}

/// Simulated rates at `alpha`, converted to per-round probabilities and
/// passed through the repetition code.
pub fn concat_point(
    kind: CodeKind,
    alpha: f64,
    noise: &NoiseParams,
    rep: &RepetitionSpec,
    opts: &RateOptions,
) -> Result<ConcatRow> {
    let rates = code_rates(kind, alpha, noise, opts)?;
    concat_from_rates(alpha, rates.gamma_x.gamma, rates.gamma_z.gamma, rep, rates.conservation)
}

pub fn concat_from_rates(
    alpha: f64,
    gamma_x: f64,
    gamma_z: f64,
    rep: &RepetitionSpec,
    conservation: ConservationStats,
) -> Result<ConcatRow> {
    let q_x = rate_to_round_prob(gamma_x, rep.t_corr)?;
    let q_z = rate_to_round_prob(gamma_z, rep.t_corr)?;
    let (p_x, p_z) = repetition_probs(q_x, q_z, rep.d)?;
    Ok(ConcatRow {
        alpha,
        gamma_x,
        gamma_z,
        q_x,
        q_z,
        p_x,
        p_z,
        conservation,
    })
}

/// Sequential sweep over `alphas` at one point of the preset ranges.
pub fn concat_sweep(
    preset: &PlatformPreset,
    alphas: &[f64],
    d: usize,
    point: &NoisePoint,
    kind: CodeKind,
    opts: &RateOptions,
) -> Result<Vec<ConcatRow>> {
    let rep = preset.repetition(d)?;
    let noise = preset.noise(point);
    alphas
        .iter()
        .map(|&a| concat_point(kind, a, &noise, &rep, opts))
        .collect()
}

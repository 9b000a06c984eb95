//! Logical layer of the hybrid qubit: encoding, logical operators,
//! populations and error-rate extraction, plus the cat-code baseline.
//!
//! Logical states follow the hybrid encoding
//! `|±⟩_L = |±⟩_s ⊗ |±α⟩_b`, `|0/1⟩_L = (|+⟩_L ± |−⟩_L)/√2`.
//! Phase flips toggle `|±⟩_L`, so the phase-error rate `γ_Z` is measured on
//! X-basis populations; bit flips toggle `|0/1⟩_L` and `γ_X` is measured on
//! Z-basis populations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::linalg;
use crate::liouville::{
    boson_error_liouvillian, cat_recovery_jump, error_liouvillian, recovery_jump, Liouvillian, NoiseParams,
};
use crate::propagate::{
    evolve, evolve_states, semigroup_deviation, ConservationStats, DoublingMarch, EvolveOptions, Method, TimeSeries,
};
use crate::qspace::{
    coherent_state, default_truncation, displacement, displacement_matrix, fock_state, parity, partial_trace, pauli, spin_minus,
    spin_plus, tensor, DensityMatrix, Operator, PauliAxis, SpaceLabel, StateVector, BOSON, SPIN,
};
use crate::{math, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZForm {
    /// `σ_z ⊗ e^{iπn̂}`.
    Parity,
    /// `|−⟩⟨+| ⊗ D(−2α) + |+⟩⟨−| ⊗ D(2α)`.
    Displacement,
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn spin_projector(psi: &StateVector) -> Operator {
    psi.projector().into_operator()
}

/// Hybrid-qubit code descriptor.
#[derive(Clone, Debug)]
pub struct HybridCode {
    alpha: f64,
    space: SpaceLabel,
    logical_plus: StateVector,
    logical_minus: StateVector,
    u_cd: Operator,
}

impl HybridCode {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_truncation(alpha, default_truncation(alpha))
    }

    pub fn with_truncation(alpha: f64, levels: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        let space = SpaceLabel::spin_boson(levels)?;
        let d_plus = displacement(real(alpha), levels)?;
        let d_minus = displacement(real(-alpha), levels)?;
        let vac = fock_state(levels, 0)?;
        let logical_plus = spin_plus().tensor(&d_plus.apply(&vac)?);
        let logical_minus = spin_minus().tensor(&d_minus.apply(&vac)?);
        let u_cd = tensor(&spin_projector(&spin_plus()), &d_plus)
            .add(&tensor(&spin_projector(&spin_minus()), &d_minus))?;
        Ok(HybridCode {
            alpha,
            space,
            logical_plus,
            logical_minus,
            u_cd,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn levels(&self) -> usize {
        self.space.factors()[1].dim
    }

    pub fn space(&self) -> &SpaceLabel {
        &self.space
    }

    pub fn logical_plus(&self) -> &StateVector {
        &self.logical_plus
    }

    pub fn logical_minus(&self) -> &StateVector {
        &self.logical_minus
    }

    pub fn logical_zero(&self) -> StateVector {
        self.superpose(1.0)
    }

    pub fn logical_one(&self) -> StateVector {
        self.superpose(-1.0)
    }

    fn superpose(&self, sign: f64) -> StateVector {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        self.logical_plus
            .scale(real(h))
            .add(&self.logical_minus.scale(real(sign * h)))
            .expect("same space")
    }

    /// Controlled displacement `U_CD = D(ασ_x)`.
    pub fn u_cd(&self) -> &Operator {
        &self.u_cd
    }

    /// `a|0⟩_L + b|1⟩_L` for a spin state `a|0⟩ + b|1⟩`.
    pub fn logical_state(&self, spin_state: &StateVector) -> Result<StateVector> {
        encode(self, spin_state)
    }

    pub fn recovery_jump(&self) -> Result<Operator> {
        recovery_jump(self.alpha, &self.space)
    }
}

/// Codes whose logical error rates can be extracted by [`logical_error_rates`].
pub trait LogicalQubit {
    fn alpha(&self) -> f64;
    fn space(&self) -> &SpaceLabel;
    /// The two eigenstates `(|ψ₀⟩, |ψ₁⟩)` of the logical observable.
    fn basis_states(&self, basis: Basis) -> (StateVector, StateVector);
    /// Full generator: recovery at `noise.kappa_r` plus the error model.
    fn liouvillian(&self, noise: &NoiseParams) -> Result<Liouvillian>;
    /// Phase error after ideal decoding of a state prepared as `|+⟩_L`, if
    /// the code has a decoder.
    fn decoded_phase_error(&self, _rho: &DensityMatrix) -> Option<Result<f64>> {
        None
    }
}

impl LogicalQubit for HybridCode {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn space(&self) -> &SpaceLabel {
        &self.space
    }

    fn basis_states(&self, basis: Basis) -> (StateVector, StateVector) {
        match basis {
            Basis::X => (self.logical_plus.clone(), self.logical_minus.clone()),
            Basis::Z => (self.logical_zero(), self.logical_one()),
        }
    }

    fn liouvillian(&self, noise: &NoiseParams) -> Result<Liouvillian> {
        Liouvillian::zero(&self.space)
            .with_jump(noise.kappa_r, &self.recovery_jump()?)?
            .add(&error_liouvillian(noise, &self.space)?)
    }

    fn decoded_phase_error(&self, rho: &DensityMatrix) -> Option<Result<f64>> {
        Some(decoded_phase_error(self, rho, &spin_plus()))
    }
}

/// Cat-code baseline: `|μ⟩_cat ∝ |α⟩ + (−1)^μ |−α⟩` on a bare oscillator,
/// stabilized by `D[â² − α²]`.
#[derive(Clone, Debug)]
pub struct CatCode {
    alpha: f64,
    space: SpaceLabel,
    cat0: StateVector,
    cat1: StateVector,
}

impl CatCode {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_truncation(alpha, default_truncation(alpha))
    }

    pub fn with_truncation(alpha: f64, levels: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        let plus = coherent_state(real(alpha), levels)?;
        let minus = coherent_state(real(-alpha), levels)?;
        let cat0 = plus.add(&minus)?.normalized()?;
        let cat1 = plus.sub(&minus)?.normalized()?;
        Ok(CatCode {
            alpha,
            space: plus.space().clone(),
            cat0,
            cat1,
        })
    }

    pub fn cat(&self, mu: usize) -> &StateVector {
        if mu == 0 {
            &self.cat0
        } else {
            &self.cat1
        }
    }
}

impl LogicalQubit for CatCode {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn space(&self) -> &SpaceLabel {
        &self.space
    }

    fn basis_states(&self, basis: Basis) -> (StateVector, StateVector) {
        match basis {
            Basis::Z => (self.cat0.clone(), self.cat1.clone()),
            Basis::X => {
                let h = core::f64::consts::FRAC_1_SQRT_2;
                let p = self.cat0.add(&self.cat1).expect("same space").scale(real(h));
                let m = self.cat0.sub(&self.cat1).expect("same space").scale(real(h));
                (p, m)
            }
        }
    }

    /// Recovery `κ_R D[â² − α²]`, thermal noise and bosonic dephasing; the
    /// spin rates in `noise` have no counterpart here and are ignored.
    fn liouvillian(&self, noise: &NoiseParams) -> Result<Liouvillian> {
        Liouvillian::zero(&self.space)
            .with_jump(noise.kappa_r, &cat_recovery_jump(self.alpha, &self.space)?)?
            .add(&boson_error_liouvillian(noise, &self.space)?)
    }
}

fn require_spin(spin_state: &StateVector) -> Result<()> {
    spin_state.space().require_same(&SpaceLabel::spin(SPIN))
}

/// `U_CD (|ψ⟩_s ⊗ |0⟩_b)`.
pub fn encode(code: &HybridCode, spin_state: &StateVector) -> Result<StateVector> {
    require_spin(spin_state)?;
    let input = spin_state.tensor(&fock_state(code.levels(), 0)?);
    let out = code.u_cd.apply(&input)?;
    out.check_leakage()?;
    Ok(out)
}

/// `U_CD† |ψ⟩`.
pub fn decode(code: &HybridCode, psi: &StateVector) -> Result<StateVector> {
    code.u_cd.adjoint().apply(psi)
}

/// `U_CR = |+⟩⟨+| ⊗ I + |−⟩⟨−| ⊗ e^{iπn̂}`.
pub fn controlled_rotation(code: &HybridCode) -> Result<Operator> {
    let levels = code.levels();
    let id = Operator::identity(&SpaceLabel::fock(BOSON, levels)?);
    tensor(&spin_projector(&spin_plus()), &id).add(&tensor(&spin_projector(&spin_minus()), &parity(levels)?))
}

/// `U_CR (|ψ⟩_s ⊗ |α⟩_b)`.
pub fn controlled_rotation_encode(code: &HybridCode, spin_state: &StateVector) -> Result<StateVector> {
    require_spin(spin_state)?;
    let input = spin_state.tensor(&coherent_state(real(code.alpha), code.levels())?);
    controlled_rotation(code)?.apply(&input)
}

/// `X_L = σ_x ⊗ I`.
pub fn logical_x(code: &HybridCode) -> Result<Operator> {
    pauli(PauliAxis::X).lift(&code.space, SPIN)
}

pub fn logical_z(code: &HybridCode, form: ZForm) -> Result<Operator> {
    let levels = code.levels();
    match form {
        ZForm::Parity => Ok(tensor(&pauli(PauliAxis::Z), &parity(levels)?)),
        ZForm::Displacement => {
            // D(±2α)|0⟩ would trip the leakage guard, but on the code space
            // the operator only moves |∓α⟩ to |±α⟩.
            let boson = SpaceLabel::fock(BOSON, levels)?;
            let fwd = Operator::new(boson.clone(), displacement_matrix(real(2.0 * code.alpha), levels)?)?;
            let bwd = Operator::new(boson, displacement_matrix(real(-2.0 * code.alpha), levels)?)?;
            let (p, m) = (spin_plus(), spin_minus());
            let minus_plus = Operator::new(
                SpaceLabel::spin(SPIN),
                Mat::from_fn(2, 2, |i, j| m.amplitudes()[i] * p.amplitudes()[j].conj()),
            )?;
            tensor(&minus_plus, &bwd).add(&tensor(&minus_plus.adjoint(), &fwd))
        }
    }
}

/// `exp(−i(θ/2) σ_x ⊗ σ_x)` between the spins of two hybrid qubits, on
/// `spin_a ⊗ boson_a ⊗ spin_b ⊗ boson_b`.
pub fn logical_xx_gate(theta: f64, a: &HybridCode, b: &HybridCode) -> Result<Operator> {
    let xa = logical_x(a)?;
    let xb = logical_x(b)?;
    let xx = tensor(&xa, &xb);
    let space = a.space.with_suffix("_a").tensor(&b.space.with_suffix("_b"));
    let mut m = linalg::scaled(xx.matrix(), C64::new(0.0, -math::sin(theta / 2.0)));
    linalg::add_identity(&mut m, math::cos(theta / 2.0));
    Operator::new(space, m)
}

/// Two-qubit product state on the space of [`logical_xx_gate`].
pub fn two_qubit_state(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let space = a.space().with_suffix("_a").tensor(&b.space().with_suffix("_b"));
    StateVector::new(space, a.tensor(b).amplitudes().to_vec())
}

/// `(⟨ψ₀|ρ|ψ₀⟩, ⟨ψ₁|ρ|ψ₁⟩)` for the eigenstates of the chosen logical observable.
pub fn logical_populations<Q: LogicalQubit + ?Sized>(
    code: &Q,
    rho: &DensityMatrix,
    basis: Basis,
) -> Result<(f64, f64)> {
    let (s0, s1) = code.basis_states(basis);
    Ok((rho.overlap(&s0)?, rho.overlap(&s1)?))
}

/// `1 − ⟨ψ|Tr_b(U_CD† ρ U_CD)|ψ⟩` with `ψ` the spin state that was encoded.
pub fn decoded_phase_error(code: &HybridCode, rho: &DensityMatrix, ideal_spin: &StateVector) -> Result<f64> {
    require_spin(ideal_spin)?;
    let decoded = rho.conjugate_by(&code.u_cd.adjoint())?;
    let spin = partial_trace(&decoded, &[SPIN])?;
    Ok((1.0 - spin.overlap(ideal_spin)?).max(0.0))
}

/// Least-squares decay rate of a logical population.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Symmetric transition rate `γ`.
    pub gamma: f64,
    /// Decay rate `2γ` of the logical observable.
    pub lambda: f64,
    pub fit_window: (f64, f64),
    /// RMS residual of `ln(2p₀ − 1) + 2γt`.
    pub residual: f64,
    pub samples: usize,
}

/// Fits `ln(2p₀(t) − 1) = −2γt` through the origin over every sample of
/// the series (column `p0` if present, else the first column).
pub fn extract_rate(series: &TimeSeries) -> Result<RateFit> {
    let p0 = series
        .real_column("p0")
        .or_else(|| series.names().first().and_then(|n| series.real_column(n)))
        .ok_or_else(|| Error::FitWindow("series has no columns".into()))?;
    fit_populations(series.times(), &p0)
}

pub(crate) fn fit_populations(times: &[f64], p0: &[f64]) -> Result<RateFit> {
    if times.is_empty() {
        return Err(Error::FitWindow("no samples".into()));
    }
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut ys = Vec::with_capacity(times.len());
    for (&t, &p) in times.iter().zip(p0) {
        let x = 2.0 * p - 1.0;
        if !(x > 0.0) {
            return Err(Error::FitWindow(format!(
                "population {p:.6} at t = {t:.3e} is not above 1/2"
            )));
        }
        let y = math::ln(x);
        stt += t * t;
        sty += t * y;
        ys.push(y);
    }
    let gamma = if stt > 0.0 { (-sty / (2.0 * stt)).max(0.0) } else { 0.0 };
    let rss: f64 = times
        .iter()
        .zip(&ys)
        .map(|(t, y)| {
            let r = y + 2.0 * gamma * t;
            r * r
        })
        .sum();
    Ok(RateFit {
        gamma,
        lambda: 2.0 * gamma,
        fit_window: (times[0], times[times.len() - 1]),
        residual: math::sqrt(rss / times.len() as f64),
        samples: times.len(),
    })
}

/// How [`logical_error_rates`] samples the evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct RateOptions {
    pub evolve: EvolveOptions,
    /// Explicit sampling times; when absent the step is chosen adaptively.
    pub t_grid: Option<Vec<f64>>,
    /// Initial march step; defaults to `0.005 / Σ noise`.
    pub h0: Option<f64>,
    /// Stop once every basis is below this value of `2p₀ − 1`.
    pub target: f64,
    /// Restart with a smaller step when the first sample is below this value.
    pub floor: f64,
    /// Steps per march level before the step doubles.
    pub steps_per_level: usize,
    /// Hard stop; defaults to `10 / Σ noise`.
    pub max_time: Option<f64>,
    pub max_restarts: usize,
    /// Stop as soon as this basis reaches `target`, leaving the other basis
    /// fitted on whatever was sampled by then.
    pub stop_on: Option<Basis>,
    /// Run the semigroup restart check.
    pub restart_check: bool,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            evolve: EvolveOptions::default(),
            t_grid: None,
            h0: None,
            target: 0.9,
            floor: 0.2,
            steps_per_level: 40,
            max_time: None,
            max_restarts: 8,
            stop_on: None,
            restart_check: true,
        }
    }
}

impl RateOptions {
    pub fn expm() -> Self {
        RateOptions {
            evolve: EvolveOptions::expm(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.evolve.validate()?;
        if !(0.0 < self.floor && self.floor < self.target && self.target < 1.0) {
            return Err(Error::param("target", "need 0 < floor < target < 1"));
        }
        if self.steps_per_level == 0 {
            return Err(Error::param("steps_per_level", "must be ≥ 1"));
        }
        if let Some(g) = &self.t_grid {
            if g.is_empty() || g.iter().any(|t| !(*t > 0.0)) || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param("t_grid", "must be nonempty, positive and strictly increasing"));
            }
        }
        Ok(())
    }
}

/// Semigroup restart check on a short horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestartCheck {
    pub t1: f64,
    pub t2: f64,
    /// Largest entry of `e^{t₂L}ρ₀ − e^{(t₂−t₁)L}e^{t₁L}ρ₀` with the RK engine.
    pub deviation: f64,
    /// Trace distance between the dense and RK engines at `t₂`, when the
    /// dense engine was used for the rates.
    pub engine_agreement: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LogicalRates {
    /// Bit-flip rate, from Z-basis populations.
    pub gamma_x: RateFit,
    /// Phase-flip rate, from X-basis populations.
    pub gamma_z: RateFit,
    /// Phase-flip rate refitted on decoded populations (hybrid code only).
    pub gamma_z_decoded: Option<RateFit>,
    /// Z-basis run: column `p0`.
    pub z_series: TimeSeries,
    /// X-basis run: columns `p0`, `raw_error`, and `decoded_error` when a
    /// decoder exists.
    pub x_series: TimeSeries,
    pub conservation: ConservationStats,
    pub restart: Option<RestartCheck>,
}

fn default_h0(noise: &NoiseParams) -> f64 {
    let total = noise.total_noise();
    if total > 0.0 {
        0.005 / total
    } else if noise.kappa_r > 0.0 {
        1.0 / noise.kappa_r
    } else {
        1.0
    }
}

fn default_max_time(noise: &NoiseParams, h0: f64) -> f64 {
    let total = noise.total_noise();
    if total > 0.0 {
        10.0 / total
    } else {
        40.0 * h0
    }
}

struct Sample {
    t: f64,
    px: f64,
    pz: f64,
    decoded: Option<f64>,
}

fn sample<Q: LogicalQubit + ?Sized>(code: &Q, t: f64, rx: &DensityMatrix, rz: &DensityMatrix) -> Result<Sample> {
    Ok(Sample {
        t,
        px: logical_populations(code, rx, Basis::X)?.0,
        pz: logical_populations(code, rz, Basis::Z)?.0,
        decoded: code.decoded_phase_error(rx).transpose()?,
    })
}

/// Bit and phase error rates of `code` under recovery plus noise.
///
/// Without an explicit grid the evolution is marched with a step that
/// doubles every `steps_per_level` steps, until `2p₀ − 1` drops below
/// `target` in both bases or `max_time` is reached. Both initial states
/// share one propagator.
pub fn logical_error_rates<Q: LogicalQubit + ?Sized>(
    code: &Q,
    noise: &NoiseParams,
    opts: &RateOptions,
) -> Result<LogicalRates> {
    opts.validate()?;
    noise.validate()?;
    let l = code.liouvillian(noise)?;
    let rho_x = code.basis_states(Basis::X).0.projector();
    let rho_z = code.basis_states(Basis::Z).0.projector();
    let mut conservation = ConservationStats::default();

    let samples = match &opts.t_grid {
        Some(grid) => {
            let xs = evolve_states(&l, &rho_x, grid, &opts.evolve)?;
            let zs = evolve_states(&l, &rho_z, grid, &opts.evolve)?;
            let mut out = Vec::with_capacity(grid.len());
            for ((t, rx), rz) in grid.iter().zip(&xs).zip(&zs) {
                conservation.observe(rx)?;
                conservation.observe(rz)?;
                out.push(sample(code, *t, rx, rz)?);
            }
            out
        }
        None => march(code, &l, &rho_x, &rho_z, noise, opts, &mut conservation)?,
    };

    let cut = |f: &dyn Fn(&Sample) -> f64| -> usize {
        samples
            .iter()
            .position(|s| 2.0 * f(s) - 1.0 <= opts.target)
            .map_or(samples.len(), |k| k + 1)
    };
    let nx = if opts.t_grid.is_some() { samples.len() } else { cut(&|s| s.px) };
    let nz = if opts.t_grid.is_some() { samples.len() } else { cut(&|s| s.pz) };

    let mut x_names = vec!["p0", "raw_error"];
    let has_decoder = samples.first().is_some_and(|s| s.decoded.is_some());
    if has_decoder {
        x_names.push("decoded_error");
    }
    let mut x_series = TimeSeries::new(&x_names);
    for s in &samples[..nx] {
        let mut row = vec![real(s.px), real(1.0 - s.px)];
        if let Some(d) = s.decoded {
            row.push(real(d));
        }
        x_series.push(s.t, row)?;
    }
    let mut z_series = TimeSeries::new(&["p0"]);
    for s in &samples[..nz] {
        z_series.push(s.t, vec![real(s.pz)])?;
    }

    let gamma_z = extract_rate(&x_series)?;
    let gamma_x = extract_rate(&z_series)?;
    let gamma_z_decoded = if has_decoder {
        let times = x_series.times().to_vec();
        let p0: Vec<f64> = samples[..nx].iter().map(|s| 1.0 - s.decoded.unwrap_or(0.0)).collect();
        Some(fit_populations(&times, &p0)?)
    } else {
        None
    };

    let restart = if opts.restart_check {
        let t_end = samples.last().map_or(0.0, |s| s.t);
        Some(restart_check(&l, &rho_x, t_end, noise, &opts.evolve)?)
    } else {
        None
    };

    Ok(LogicalRates {
        gamma_x,
        gamma_z,
        gamma_z_decoded,
        z_series,
        x_series,
        conservation,
        restart,
    })
}

fn march<Q: LogicalQubit + ?Sized>(
    code: &Q,
    l: &Liouvillian,
    rho_x: &DensityMatrix,
    rho_z: &DensityMatrix,
    noise: &NoiseParams,
    opts: &RateOptions,
    conservation: &mut ConservationStats,
) -> Result<Vec<Sample>> {
    let mut h = opts.h0.unwrap_or_else(|| default_h0(noise));
    let t_max = opts.max_time.unwrap_or_else(|| default_max_time(noise, h));
    let mut restarts = 0;
    'attempt: loop {
        let mut m = DoublingMarch::new(l, &[rho_x.clone(), rho_z.clone()], h, &opts.evolve)?;
        let mut out: Vec<Sample> = Vec::new();
        let mut at_level = 0;
        loop {
            let states = m.step()?;
            let s = sample(code, m.time(), &states[0], &states[1])?;
            let (yx, yz) = (2.0 * s.px - 1.0, 2.0 * s.pz - 1.0);
            let too_fast = match opts.stop_on {
                None => yx < opts.floor || yz < opts.floor,
                Some(Basis::X) => yx < opts.floor,
                Some(Basis::Z) => yz < opts.floor,
            };
            if out.is_empty() && too_fast && restarts < opts.max_restarts {
                restarts += 1;
                h /= 8.0;
                continue 'attempt;
            }
            let done = match opts.stop_on {
                None => yx <= opts.target && yz <= opts.target,
                Some(Basis::X) => yx <= opts.target,
                Some(Basis::Z) => yz <= opts.target,
            };
            out.push(s);
            if done || m.time() >= t_max {
                conservation.merge(m.stats());
                return Ok(out);
            }
            at_level += 1;
            if at_level == opts.steps_per_level {
                m.double();
                at_level = 0;
            }
        }
    }
}

fn restart_check(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_end: f64,
    noise: &NoiseParams,
    evolve_opts: &EvolveOptions,
) -> Result<RestartCheck> {
    let scale = noise.kappa_r + noise.total_noise();
    let t2 = if scale > 0.0 { t_end.min(5.0 / scale) } else { t_end };
    let t1 = 0.5 * t2;
    let rk = EvolveOptions {
        method: Method::Rk45,
        ..*evolve_opts
    };
    let deviation = semigroup_deviation(l, rho0, t1, t2, &rk)?;
    let engine_agreement = if evolve_opts.method == Method::Expm {
        let a = evolve(l, rho0, t2, evolve_opts)?;
        let b = evolve(l, rho0, t2, &rk)?;
        Some(a.trace_distance(&b)?)
    } else {
        None
    };
    Ok(RestartCheck {
        t1,
        t2,
        deviation,
        engine_agreement,
    })
}

impl DensityMatrix {
    pub(crate) fn into_operator(self) -> Operator {
        let space = self.space().clone();
        Operator::from_parts(space, self.into_matrix())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::dissipator;
    use crate::propagate::evolve_series;
    use crate::qspace::spin_basis;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spin(rng: &mut ChaCha8Rng) -> StateVector {
        let v = vec![
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        ];
        StateVector::new(SpaceLabel::spin(SPIN), v).unwrap().normalized().unwrap()
    }

    #[test]
    fn codewords_are_orthonormal() {
        let code = HybridCode::new(1.2).unwrap();
        assert!(code.logical_plus().inner(code.logical_minus()).unwrap().norm() <= 1e-15);
        assert_abs_diff_eq!(code.logical_plus().norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(code.logical_zero().norm(), 1.0, epsilon = 1e-12);
        assert!(code.logical_zero().inner(&code.logical_one()).unwrap().norm() <= 1e-15);
        assert!(HybridCode::new(0.0).is_err());
    }

    #[test]
    fn encoding_matches_definition() {
        let code = HybridCode::new(1.3).unwrap();
        let plus = encode(&code, &spin_plus()).unwrap();
        assert!(plus.sub(code.logical_plus()).unwrap().norm() < 1e-12);
        let zero = encode(&code, &spin_basis(0).unwrap()).unwrap();
        assert!(zero.sub(&code.logical_zero()).unwrap().norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let s = random_spin(&mut rng);
            let round = decode(&code, &encode(&code, &s).unwrap()).unwrap();
            let want = s.tensor(&fock_state(code.levels(), 0).unwrap());
            assert!(round.fidelity(&want).unwrap() >= 1.0 - 1e-8);
            let cr = controlled_rotation_encode(&code, &s).unwrap();
            assert!(cr.fidelity(&encode(&code, &s).unwrap()).unwrap() >= 1.0 - 1e-8);
        }
        let minus_in = spin_minus();
        let cr = controlled_rotation_encode(&code, &minus_in).unwrap();
        assert!(cr.sub(code.logical_minus()).unwrap().norm() < 1e-10);
    }

    #[test]
    fn logical_operators_on_code_space() {
        let code = HybridCode::new(1.5).unwrap();
        let x = logical_x(&code).unwrap();
        let (p, m) = (code.logical_plus().clone(), code.logical_minus().clone());
        assert!(x.apply(&p).unwrap().sub(&p).unwrap().norm() < 1e-14);
        assert!(x.apply(&m).unwrap().add(&m).unwrap().norm() < 1e-14);
        for form in [ZForm::Parity, ZForm::Displacement] {
            let z = logical_z(&code, form).unwrap();
            assert!(z.apply(&p).unwrap().sub(&m).unwrap().norm() < 1e-8, "{form:?}");
            let zz = z.apply(&z.apply(&code.logical_zero()).unwrap()).unwrap();
            assert!(zz.sub(&code.logical_zero()).unwrap().norm() < 1e-8);
        }
        let zp = logical_z(&code, ZForm::Parity).unwrap();
        let zd = logical_z(&code, ZForm::Displacement).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3 {
            let psi = encode(&code, &random_spin(&mut rng)).unwrap();
            let a = zp.apply(&psi).unwrap();
            let b = zd.apply(&psi).unwrap();
            assert!(a.sub(&b).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn xx_gate() {
        let code = HybridCode::with_truncation(1.0, 16).unwrap();
        let id = logical_xx_gate(0.0, &code, &code).unwrap();
        assert!(id.distance(&Operator::identity(id.space())).unwrap() == 0.0);
        let g = logical_xx_gate(core::f64::consts::FRAC_PI_2, &code, &code).unwrap();
        let pp = two_qubit_state(code.logical_plus(), code.logical_plus()).unwrap();
        let out = g.apply(&pp).unwrap();
        let want = pp.scale(math::cis(-core::f64::consts::FRAC_PI_4));
        assert!(out.sub(&want).unwrap().norm() < 1e-12);
        let xx = Operator::new(g.space().clone(), tensor(&logical_x(&code).unwrap(), &logical_x(&code).unwrap()).into_matrix()).unwrap();
        assert!(g.commutator(&xx).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn populations() {
        let code = HybridCode::new(1.0).unwrap();
        let rho = code.logical_plus().projector();
        let (p0, p1) = logical_populations(&code, &rho, Basis::X).unwrap();
        assert_abs_diff_eq!(p0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p1, 0.0, epsilon = 1e-12);
        let mixed = DensityMatrix::mixture(&[(0.5, &rho), (0.5, &code.logical_minus().projector())]).unwrap();
        for basis in [Basis::X, Basis::Z] {
            let (a, b) = logical_populations(&code, &mixed, basis).unwrap();
            assert_abs_diff_eq!(a, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(b, 0.5, epsilon = 1e-12);
        }
        // a bare σ_z removes all weight from |+⟩_L; the logical flip moves it to |−⟩_L
        let sz = pauli(PauliAxis::Z).lift(code.space(), SPIN).unwrap();
        let flipped = rho.conjugate_by(&sz).unwrap();
        assert!(logical_populations(&code, &flipped, Basis::X).unwrap().0 < 1e-15);
        let zl = logical_z(&code, ZForm::Parity).unwrap();
        let (a, b) = logical_populations(&code, &rho.conjugate_by(&zl).unwrap(), Basis::X).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn synthetic_rate_recovery() {
        let gamma = 0.01;
        let times: Vec<f64> = (1..=30).map(|k| k as f64 * 1.5).collect();
        let p: Vec<f64> = times.iter().map(|t| 0.5 * (1.0 + math::exp(-2.0 * gamma * t))).collect();
        let fit = extract_rate(&TimeSeries::from_real("p0", &times, &p).unwrap()).unwrap();
        assert!((fit.gamma - gamma).abs() <= 1e-6 * gamma);
        assert_eq!(fit.lambda, 2.0 * fit.gamma);
        let flat = vec![1.0; times.len()];
        assert_eq!(extract_rate(&TimeSeries::from_real("p0", &times, &flat).unwrap()).unwrap().gamma, 0.0);
        let mut bad = p.clone();
        bad[10] = 0.5;
        assert!(matches!(
            extract_rate(&TimeSeries::from_real("p0", &times, &bad).unwrap()),
            Err(Error::FitWindow(_))
        ));
    }

    #[test]
    fn dephasing_oracle_rate() {
        let kappa = 0.3;
        let l = dissipator(&pauli(PauliAxis::Z)).scale(kappa).unwrap();
        let rho = spin_plus().projector();
        let proj = spin_plus().projector().into_operator();
        let times: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
        let s = evolve_series(&l, &rho, &times, &[("p0", &proj)], &EvolveOptions::default()).unwrap();
        let fit = extract_rate(&s).unwrap();
        assert!((fit.gamma - kappa).abs() <= 1e-4 * kappa);
    }

    #[test]
    fn recovery_only_has_no_logical_errors() {
        let code = HybridCode::new(1.0).unwrap();
        let noise = NoiseParams::recovery_only(1.0);
        let r = logical_error_rates(&code, &noise, &RateOptions::default()).unwrap();
        assert!(r.gamma_x.gamma <= 1e-8);
        assert!(r.gamma_z.gamma <= 1e-8);
        assert!(r.conservation.within_bounds());
        assert!(r.restart.unwrap().deviation < 1e-7);
    }

    #[test]
    fn qubit_bit_flip_passes_through_unchanged() {
        let code = HybridCode::new(1.0).unwrap();
        let noise = NoiseParams {
            kappa_sx: 0.02,
            kappa_r: 1.0,
            ..Default::default()
        };
        for base in [RateOptions::default(), RateOptions::expm()] {
            let opts = RateOptions {
                max_time: Some(20.0),
                ..base
            };
            let r = logical_error_rates(&code, &noise, &opts).unwrap();
            assert!((r.gamma_x.gamma - 0.02).abs() <= 1e-3 * 0.02, "{:?}", r.gamma_x);
            assert!(r.gamma_z.gamma <= 1e-8);
        }
    }

    #[test]
    fn decoded_error_vanishes_on_gauge_excitations() {
        let code = HybridCode::new(1.0).unwrap();
        assert!(decoded_phase_error(&code, &code.logical_plus().projector(), &spin_plus()).unwrap() < 1e-10);
        for n in [1, 3] {
            let psi = code
                .u_cd()
                .apply(&spin_plus().tensor(&fock_state(code.levels(), n).unwrap()))
                .unwrap();
            assert!(decoded_phase_error(&code, &psi.projector(), &spin_plus()).unwrap() < 1e-10);
        }
    }

    #[test]
    fn cat_code_baseline_runs() {
        let cat = CatCode::new(1.0).unwrap();
        assert!(cat.cat(0).inner(cat.cat(1)).unwrap().norm() < 1e-14);
        let noise = NoiseParams {
            kappa_th: 0.01,
            kappa_r: 1.0,
            ..Default::default()
        };
        let r = logical_error_rates(&cat, &noise, &RateOptions::default()).unwrap();
        assert!(r.gamma_x.gamma > 0.0);
        assert!(r.gamma_z_decoded.is_none());
        assert!(r.conservation.within_bounds());
    }
}

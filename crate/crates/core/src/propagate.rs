//! Time evolution `ρ̇ = L(ρ)` for a fixed generator.
//!
//! Two engines are available. [`Method::Rk45`] (the default) integrates the
//! operator form `Kρ + ρK† + Σ κ LρL†` with an adaptive Dormand–Prince 5(4)
//! pair and sparse factors. [`Method::Expm`] builds the dense propagator
//! `e^{hL}` by Padé approximation; it is meant for stiff generators where
//! the recovery rate exceeds the noise rates by orders of magnitude.
//! The dense path splits the superoperator into parity sectors whenever the
//! generator respects the grading of `σ_z e^{iπn̂}`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::liouville::{code_parity_grading, Liouvillian, Sector, SparseGenerator};
use crate::linalg::{self, ONE, ZERO};
use crate::qspace::{DensityMatrix, Operator};
use crate::{math, Error, Result, C64};

/// Largest sector dimension the dense engine accepts.
pub const EXPM_MAX_SECTOR: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk45,
    Expm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on a single RK step.
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
    /// Abort an RK integration after this many attempted steps.
    pub max_steps: usize,
    /// Replace `ρ` by `(ρ + ρ†)/2` after every accepted step.
    pub rehermitize: bool,
    /// Check the Fock-tail population of every returned state.
    pub leakage_check: bool,
    /// Check trace, Hermiticity and positivity of every returned state.
    pub verify: bool,
    pub method: Method,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: None,
            initial_step: None,
            max_steps: 5_000_000,
            rehermitize: true,
            leakage_check: true,
            verify: true,
            method: Method::Rk45,
        }
    }
}

impl EvolveOptions {
    pub fn expm() -> Self {
        EvolveOptions {
            method: Method::Expm,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::param("rel_tol", "must be > 0"));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::param("abs_tol", "must be > 0"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::param("max_step", "must be > 0"));
            }
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::param("initial_step", "must be > 0"));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// Bounds every evolved state must satisfy.
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-8;
pub const MIN_EIGENVALUE: f64 = -1e-6;

/// Running worst case of the conservation diagnostics over sampled states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservationStats {
    pub samples: usize,
    pub max_trace_deviation: f64,
    pub max_hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Default for ConservationStats {
    fn default() -> Self {
        ConservationStats {
            samples: 0,
            max_trace_deviation: 0.0,
            max_hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl ConservationStats {
    pub fn observe(&mut self, rho: &DensityMatrix) -> Result<()> {
        let d = rho.diagnostics()?;
        self.samples += 1;
        self.max_trace_deviation = self.max_trace_deviation.max(d.trace_deviation);
        self.max_hermiticity = self.max_hermiticity.max(d.hermiticity);
        self.min_eigenvalue = self.min_eigenvalue.min(d.min_eigenvalue);
        Ok(())
    }

    pub fn merge(&mut self, other: &ConservationStats) {
        self.samples += other.samples;
        self.max_trace_deviation = self.max_trace_deviation.max(other.max_trace_deviation);
        self.max_hermiticity = self.max_hermiticity.max(other.max_hermiticity);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    pub fn within_bounds(&self) -> bool {
        self.max_trace_deviation <= TRACE_TOL
            && self.max_hermiticity <= HERMITICITY_TOL
            && self.min_eigenvalue >= MIN_EIGENVALUE
    }
}

fn check_state(rho: &DensityMatrix, opts: &EvolveOptions, stats: Option<&mut ConservationStats>) -> Result<()> {
    if opts.leakage_check {
        rho.check_leakage()?;
    }
    if opts.verify || stats.is_some() {
        let mut local = ConservationStats::default();
        local.observe(rho)?;
        if opts.verify && !local.within_bounds() {
            return Err(Error::Integration(format!(
                "state left the physical set: trace deviation {:.2e}, hermiticity {:.2e}, min eigenvalue {:.2e}",
                local.max_trace_deviation, local.max_hermiticity, local.min_eigenvalue
            )));
        }
        if let Some(s) = stats {
            s.merge(&local);
        }
    }
    Ok(())
}

/// Sampled expectation values, optionally with the sampled states.
#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    times: Vec<f64>,
    names: Vec<String>,
    values: Vec<Vec<C64>>,
    states: Vec<DensityMatrix>,
}

impl TimeSeries {
    pub fn new(names: &[&str]) -> Self {
        TimeSeries {
            names: names.iter().map(|n| n.to_string()).collect(),
            ..Default::default()
        }
    }

    /// Appends one sample; times must increase strictly.
    pub fn push(&mut self, t: f64, values: Vec<C64>) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.names.len(),
                found: values.len(),
            });
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::param("times", "must be strictly increasing"));
            }
        }
        self.times.push(t);
        self.values.push(values);
        Ok(())
    }

    /// Series of one real-valued observable.
    pub fn from_real(name: &str, times: &[f64], values: &[f64]) -> Result<Self> {
        let mut s = TimeSeries::new(&[name]);
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        for (t, v) in times.iter().zip(values) {
            s.push(*t, vec![C64::new(*v, 0.0)])?;
        }
        Ok(s)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<C64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[k]).collect())
    }

    pub fn real_column(&self, name: &str) -> Option<Vec<f64>> {
        Some(self.column(name)?.iter().map(|z| z.re).collect())
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.values[i]
    }

    /// States recorded alongside the samples (empty unless requested).
    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }
}

/// `Tr(ρ O)`.
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    rho.expectation(op)
}

// Dormand–Prince 5(4) tableau; the generator is autonomous, so the nodes
// are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive RK45 stepper holding its own stage buffers and step size.
pub(crate) struct Rk45 {
    gen: SparseGenerator,
    opts: EvolveOptions,
    d: usize,
    k: Vec<Mat<C64>>,
    stage: Mat<C64>,
    fsal_valid: bool,
    h: Option<f64>,
    steps: usize,
}

impl Rk45 {
    pub(crate) fn new(l: &Liouvillian, opts: &EvolveOptions) -> Self {
        let d = l.dim();
        Rk45 {
            gen: l.compile(),
            opts: *opts,
            d,
            k: (0..7).map(|_| linalg::zeros(d, d)).collect(),
            stage: linalg::zeros(d, d),
            fsal_valid: false,
            h: opts.initial_step,
            steps: 0,
        }
    }

    fn error_norm(&self, y: &Mat<C64>, ynew: &Mat<C64>, err: &Mat<C64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.d {
            let (ys, ns, es) = (y.col_as_slice(j), ynew.col_as_slice(j), err.col_as_slice(j));
            for i in 0..self.d {
                let sc = self.opts.abs_tol + self.opts.rel_tol * ys[i].norm().max(ns[i].norm());
                acc += es[i].norm_sqr() / (sc * sc);
            }
        }
        math::sqrt(acc / (self.d * self.d) as f64)
    }

    fn initial_step(&mut self, y: &Mat<C64>, span: f64) -> f64 {
        let d0 = linalg::frobenius(y);
        let d1 = linalg::frobenius(&self.k[0]);
        let h = if d0 > 1e-5 && d1 > 1e-5 { 0.01 * d0 / d1 } else { 1e-6 * span.max(1e-300) };
        h.min(span)
    }

    /// Advances `y` by `span` in place.
    pub(crate) fn advance(&mut self, y: &mut Mat<C64>, span: f64) -> Result<()> {
        if span <= 0.0 {
            return Ok(());
        }
        if !self.fsal_valid {
            self.gen.apply_into(y, &mut self.k[0]);
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(y, span),
        };
        if let Some(m) = self.opts.max_step {
            h = h.min(m);
        }
        let mut t = 0.0;
        let mut ynew = linalg::zeros(self.d, self.d);
        let mut err = linalg::zeros(self.d, self.d);
        while t < span {
            let remaining = span - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(Error::Integration(format!(
                    "exceeded {} RK steps (t = {t:.3e} of {span:.3e})",
                    self.opts.max_steps
                )));
            }
            #[allow(clippy::needless_range_loop)]
            for s in 1..7 {
                self.stage.copy_from(&*y);
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        linalg::axpy(&mut self.stage, C64::new(step * a, 0.0), &self.k[j]);
                    }
                }
                if s == 6 {
                    ynew.copy_from(&self.stage);
                }
                self.gen.apply_into(&self.stage, &mut self.k[s]);
            }
            err.fill(ZERO);
            for (j, e) in E.iter().enumerate() {
                if *e != 0.0 {
                    linalg::axpy(&mut err, C64::new(step * e, 0.0), &self.k[j]);
                }
            }
            let en = self.error_norm(y, &ynew, &err);
            if !en.is_finite() {
                return Err(Error::Integration("non-finite error estimate".into()));
            }
            let factor = if en == 0.0 { 5.0 } else { (0.9 * math::exp(-0.2 * math::ln(en))).clamp(0.2, 5.0) };
            if en <= 1.0 {
                t = if last { span } else { t + step };
                core::mem::swap(y, &mut ynew);
                self.k.swap(0, 6);
                if self.opts.rehermitize {
                    linalg::hermitize(y);
                    linalg::hermitize(&mut self.k[0]);
                }
                if !last || step >= h {
                    h = step * factor;
                }
            } else {
                h = step * factor.min(1.0);
                if h < span * 1e-15 {
                    return Err(Error::Integration(format!("step size underflow at t = {t:.3e}")));
                }
            }
            if let Some(m) = self.opts.max_step {
                h = h.min(m);
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

/// Dense propagator `e^{hL}`, one block per parity sector.
#[derive(Clone, Debug)]
pub struct Propagator {
    d: usize,
    h: f64,
    blocks: Vec<Sector>,
}

impl Propagator {
    pub fn new(l: &Liouvillian, h: f64) -> Result<Self> {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::param("h", "must be finite and ≥ 0"));
        }
        let d = l.dim();
        let sectors = l.sectors(&code_parity_grading(l.space()));
        if let Some(big) = sectors.iter().map(|s| s.indices.len()).max() {
            if big > EXPM_MAX_SECTOR {
                return Err(Error::param(
                    "method",
                    format!("dense propagator sector of size {big} exceeds {EXPM_MAX_SECTOR}; use Rk45"),
                ));
            }
        }
        let blocks = sectors
            .into_iter()
            .map(|s| {
                let scaled = linalg::scaled(&s.matrix, C64::new(h, 0.0));
                Sector {
                    indices: s.indices,
                    matrix: linalg::expm(&scaled),
                }
            })
            .collect();
        Ok(Propagator { d, h, blocks })
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// `e^{2hL}` from `e^{hL}`.
    pub fn square(&mut self) {
        for b in &mut self.blocks {
            b.matrix = linalg::mul(&b.matrix, &b.matrix);
        }
        self.h *= 2.0;
    }

    pub(crate) fn apply(&self, rho: &Mat<C64>) -> Mat<C64> {
        let d = self.d;
        let mut out = linalg::zeros(d, d);
        for b in &self.blocks {
            let n = b.indices.len();
            let x = Mat::from_fn(n, 1, |r, _| {
                let g = b.indices[r];
                rho[(g % d, g / d)]
            });
            let y = linalg::mul(&b.matrix, &x);
            for (r, &g) in b.indices.iter().enumerate() {
                out[(g % d, g / d)] = y[(r, 0)];
            }
        }
        out
    }

    pub fn step(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let mut m = self.apply(rho.matrix());
        linalg::hermitize(&mut m);
        DensityMatrix::new_unchecked(rho.space().clone(), m)
    }
}

fn require_compatible(l: &Liouvillian, rho0: &DensityMatrix, opts: &EvolveOptions) -> Result<()> {
    opts.validate()?;
    l.space().require_same(rho0.space())?;
    Ok(())
}

/// `ρ(t) = e^{tL} ρ₀`.
pub fn evolve(l: &Liouvillian, rho0: &DensityMatrix, t: f64, opts: &EvolveOptions) -> Result<DensityMatrix> {
    let states = evolve_states(l, rho0, &[t], opts)?;
    Ok(states.into_iter().next().expect("one sample requested"))
}

/// States at each of the ascending `times` (all ≥ 0).
pub fn evolve_states(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    require_compatible(l, rho0, opts)?;
    let mut prev = 0.0;
    for &t in times {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::param("times", "must be finite, ≥ 0 and ascending"));
        }
        prev = t;
    }
    let mut out = Vec::with_capacity(times.len());
    if l.is_zero() {
        for _ in times {
            out.push(rho0.clone());
        }
        return Ok(out);
    }
    let mut y = rho0.matrix().clone();
    let mut t_now = 0.0;
    match opts.method {
        Method::Rk45 => {
            let mut rk = Rk45::new(l, opts);
            for &t in times {
                rk.advance(&mut y, t - t_now)?;
                t_now = t;
                let rho = DensityMatrix::new_unchecked(rho0.space().clone(), y.clone())?;
                check_state(&rho, opts, None)?;
                out.push(rho);
            }
        }
        Method::Expm => {
            let mut cache: Option<Propagator> = None;
            for &t in times {
                let dt = t - t_now;
                if dt > 0.0 {
                    let reuse = cache.as_ref().is_some_and(|p| (p.step_size() - dt).abs() <= 1e-14 * dt);
                    if !reuse {
                        cache = Some(Propagator::new(l, dt)?);
                    }
                    y = cache.as_ref().expect("propagator built").apply(&y);
                    if opts.rehermitize {
                        linalg::hermitize(&mut y);
                    }
                }
                t_now = t;
                let rho = DensityMatrix::new_unchecked(rho0.space().clone(), y.clone())?;
                check_state(&rho, opts, None)?;
                out.push(rho);
            }
        }
    }
    Ok(out)
}

/// Expectation values of `observables` at each of `times`.
pub fn evolve_series(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    observables: &[(&str, &Operator)],
    opts: &EvolveOptions,
) -> Result<TimeSeries> {
    for (_, o) in observables {
        rho0.space().require_same(o.space())?;
    }
    let names: Vec<&str> = observables.iter().map(|(n, _)| *n).collect();
    let mut series = TimeSeries::new(&names);
    let states = evolve_states(l, rho0, times, opts)?;
    for (t, rho) in times.iter().zip(&states) {
        let row = observables
            .iter()
            .map(|(_, o)| rho.expectation(o))
            .collect::<Result<Vec<_>>>()?;
        series.push(*t, row)?;
    }
    series.states = states;
    Ok(series)
}

/// Largest entry of `e^{t₂L}ρ₀ − e^{(t₂−t₁)L} e^{t₁L}ρ₀`.
pub fn semigroup_deviation(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t1: f64,
    t2: f64,
    opts: &EvolveOptions,
) -> Result<f64> {
    if !(0.0 <= t1 && t1 <= t2) {
        return Err(Error::param("t1", "must satisfy 0 ≤ t1 ≤ t2"));
    }
    let direct = evolve(l, rho0, t2, opts)?;
    let mid = evolve(l, rho0, t1, opts)?;
    let restarted = evolve(l, &mid, t2 - t1, opts)?;
    let mut diff = direct.matrix().clone();
    linalg::axpy(&mut diff, -ONE, restarted.matrix());
    Ok(linalg::max_abs(&diff))
}

enum Engine {
    Rk(Vec<Rk45>),
    Dense(Propagator),
}

/// Marches several initial states in lockstep with a step that can be
/// doubled, for sampling decays whose time scale is not known in advance.
///
/// With [`Method::Expm`] one propagator serves every state, and doubling
/// squares it. With [`Method::Rk45`] each state keeps its own adaptive
/// integrator and the march step only sets the sampling interval.
pub struct DoublingMarch {
    l: Liouvillian,
    opts: EvolveOptions,
    engine: Engine,
    h: f64,
    t: f64,
    states: Vec<Mat<C64>>,
    stats: ConservationStats,
}

impl DoublingMarch {
    pub fn new(l: &Liouvillian, states: &[DensityMatrix], h0: f64, opts: &EvolveOptions) -> Result<Self> {
        opts.validate()?;
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(Error::param("h0", "must be finite and > 0"));
        }
        for s in states {
            l.space().require_same(s.space())?;
        }
        let engine = match opts.method {
            Method::Rk45 => Engine::Rk(states.iter().map(|_| Rk45::new(l, opts)).collect()),
            Method::Expm => Engine::Dense(Propagator::new(l, h0)?),
        };
        Ok(DoublingMarch {
            l: l.clone(),
            opts: *opts,
            engine,
            h: h0,
            t: 0.0,
            states: states.iter().map(|s| s.matrix().clone()).collect(),
            stats: ConservationStats::default(),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn stats(&self) -> &ConservationStats {
        &self.stats
    }

    /// Advances every state by the current step and validates the results.
    pub fn step(&mut self) -> Result<Vec<DensityMatrix>> {
        match &mut self.engine {
            Engine::Rk(rks) => {
                for (rk, y) in rks.iter_mut().zip(self.states.iter_mut()) {
                    rk.advance(y, self.h)?;
                }
            }
            Engine::Dense(p) => {
                for y in self.states.iter_mut() {
                    *y = p.apply(y);
                    if self.opts.rehermitize {
                        linalg::hermitize(y);
                    }
                }
            }
        }
        self.t += self.h;
        let space = self.l.space().clone();
        let mut out = Vec::with_capacity(self.states.len());
        for y in &self.states {
            let rho = DensityMatrix::new_unchecked(space.clone(), y.clone())?;
            check_state(&rho, &self.opts, Some(&mut self.stats))?;
            out.push(rho);
        }
        Ok(out)
    }

    /// Doubles the step.
    pub fn double(&mut self) {
        if let Engine::Dense(p) = &mut self.engine {
            p.square();
        }
        self.h *= 2.0;
    }

    /// Current states.
    pub fn states(&self) -> Result<Vec<DensityMatrix>> {
        self.states
            .iter()
            .map(|y| DensityMatrix::new_unchecked(self.l.space().clone(), y.clone()))
            .collect()
    }
}

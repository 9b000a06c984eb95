//! Analytic checks on the recovery dynamics: the no-jump decay landscape,
//! the displaced-Fock jump bases and their Markov diagram, steady states,
//! and adiabatic elimination of the bath mode.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::liouville::{dissipator, recovery_jump, two_mode_liouvillian, BathParams, Liouvillian};
use crate::propagate::{evolve_states, ConservationStats, EvolveOptions, TimeSeries};
use crate::qspace::{
    coherent_state, default_truncation, displacement_matrix, fock_create, fock_destroy, fock_state, number,
    partial_trace, pauli, spin_minus, spin_plus, DensityMatrix, Operator, PauliAxis, SpaceLabel, StateVector, BATH,
    BOSON, SPIN,
};
use crate::{linalg, math, Error, Result, C64};

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Product ansatz `|φ⟩_s ⊗ |β⟩_b` with `⟨σ_x⟩_φ = sx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzState {
    pub beta: C64,
    pub sx: f64,
}

impl AnsatzState {
    pub fn new(beta: C64, sx: f64) -> Result<Self> {
        if !(sx.abs() <= 1.0) {
            return Err(Error::param("sx", format!("|sx| must be ≤ 1, got {sx}")));
        }
        Ok(AnsatzState { beta, sx })
    }

    /// Spin part `cos(θ/2)|+⟩ + sin(θ/2)|−⟩` with `cos θ = sx`.
    pub fn spin_state(&self) -> StateVector {
        let c = math::sqrt(0.5 * (1.0 + self.sx));
        let s = math::sqrt(0.5 * (1.0 - self.sx));
        spin_plus()
            .scale(real(c))
            .add(&spin_minus().scale(real(s)))
            .expect("spin space")
    }

    pub fn state(&self, levels: usize) -> Result<StateVector> {
        Ok(self.spin_state().tensor(&coherent_state(self.beta, levels)?))
    }
}

/// `Γ/κ_R = α² − 2αβ_r⟨σ_x⟩ + |β|²`.
pub fn gamma_analytic(alpha: f64, state: &AnsatzState) -> f64 {
    alpha * alpha - 2.0 * alpha * state.beta.re * state.sx + state.beta.norm_sqr()
}

/// `κ_R ⟨ψ|R†R|ψ⟩`, the population decay rate under `−(iκ_R/2)R†R`.
pub fn gamma_numeric(alpha: f64, kappa_r: f64, psi: &StateVector) -> Result<f64> {
    let r = recovery_jump(alpha, psi.space())?;
    let rpsi = r.apply(psi)?;
    let n = rpsi.norm();
    Ok(kappa_r * n * n)
}

/// `Γ/κ_R` on a real-β grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaGrid {
    pub betas: Vec<f64>,
    pub sxs: Vec<f64>,
    /// `values[i][j]` at `(betas[i], sxs[j])`.
    pub values: Vec<Vec<f64>>,
}

impl GammaGrid {
    /// `(β, sx, Γ)` at the smallest grid value.
    pub fn minimum(&self) -> (f64, f64, f64) {
        let mut best = (0.0, 0.0, f64::INFINITY);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < best.2 {
                    best = (self.betas[i], self.sxs[j], v);
                }
            }
        }
        best
    }
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range.0];
    }
    (0..n)
        .map(|k| range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn gamma_grid(alpha: f64, beta_range: (f64, f64), sx_range: (f64, f64), resolution: usize) -> Result<GammaGrid> {
    if resolution == 0 {
        return Err(Error::param("resolution", "must be ≥ 1"));
    }
    if sx_range.0.abs() > 1.0 || sx_range.1.abs() > 1.0 {
        return Err(Error::param("sx_range", "must lie in [-1, 1]"));
    }
    let betas = linspace(beta_range, resolution);
    let sxs = linspace(sx_range, resolution);
    let values = betas
        .iter()
        .map(|&b| {
            sxs.iter()
                .map(|&sx| gamma_analytic(alpha, &AnsatzState { beta: real(b), sx }))
                .collect()
        })
        .collect();
    Ok(GammaGrid { betas, sxs, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `|±,→n⟩ = U_CD |±⟩|n⟩`.
    Forward,
    /// `|±,←n⟩ = U_CD† |±⟩|n⟩`.
    Backward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn spin(self) -> StateVector {
        match self {
            Sign::Plus => spin_plus(),
            Sign::Minus => spin_minus(),
        }
    }
}

/// Truncation that keeps `D(±α)|n⟩` accurate for every `n ≤ n_max + 1`.
pub fn jump_levels(alpha: f64, n_max: usize) -> usize {
    let probe = n_max + 1;
    let mut levels = default_truncation(alpha) + 3 * probe;
    loop {
        let ok = displacement_matrix(real(alpha), levels)
            .map(|d| (levels - 3..levels).map(|k| d[(k, probe)].norm_sqr()).sum::<f64>() <= 1e-22)
            .unwrap_or(false);
        if ok {
            return levels;
        }
        levels += 2;
    }
}

/// Both displaced-Fock bases on `spin ⊗ boson(levels)`.
#[derive(Clone, Debug)]
pub struct JumpBasis {
    alpha: f64,
    levels: usize,
    space: SpaceLabel,
    d_plus: Operator,
    d_minus: Operator,
}

impl JumpBasis {
    pub fn new(alpha: f64, levels: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        let boson = SpaceLabel::fock(BOSON, levels)?;
        Ok(JumpBasis {
            alpha,
            levels,
            space: SpaceLabel::spin_boson(levels)?,
            d_plus: Operator::new(boson.clone(), displacement_matrix(real(alpha), levels)?)?,
            d_minus: Operator::new(boson, displacement_matrix(real(-alpha), levels)?)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn space(&self) -> &SpaceLabel {
        &self.space
    }

    /// `D(sα)|n⟩`, with `s = ±1`.
    fn displaced(&self, s: f64, n: usize) -> Result<StateVector> {
        let d = if s > 0.0 { &self.d_plus } else { &self.d_minus };
        d.apply(&fock_state(self.levels, n)?)
    }

    /// Basis vector without the leakage guard.
    pub fn state_unchecked(&self, dir: Direction, mu: Sign, n: usize) -> Result<StateVector> {
        let s = match dir {
            Direction::Forward => mu.value(),
            Direction::Backward => -mu.value(),
        };
        Ok(mu.spin().tensor(&self.displaced(s, n)?))
    }

    pub fn state(&self, dir: Direction, mu: Sign, n: usize) -> Result<StateVector> {
        let psi = self.state_unchecked(dir, mu, n)?;
        psi.check_leakage()?;
        Ok(psi)
    }

    /// Largest entry of `G − I` for the Gram matrix of one family up to `n_max`.
    pub fn gram_residual(&self, dir: Direction, n_max: usize) -> Result<f64> {
        let mut family = Vec::new();
        for mu in [Sign::Plus, Sign::Minus] {
            for n in 0..=n_max {
                family.push(self.state(dir, mu, n)?);
            }
        }
        let mut worst: f64 = 0.0;
        for (i, a) in family.iter().enumerate() {
            for (j, b) in family.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b)? - real(want)).norm());
            }
        }
        Ok(worst)
    }

    /// Largest entry of `Σ_{μ,n} |μ,n⟩⟨μ,n| − I` over the whole truncated family.
    pub fn completeness_residual(&self, dir: Direction) -> Result<f64> {
        let dim = self.space.dim();
        let mut acc = linalg::zeros(dim, dim);
        for mu in [Sign::Plus, Sign::Minus] {
            for n in 0..self.levels {
                let v = self.state_unchecked(dir, mu, n)?;
                let a = v.amplitudes();
                for i in 0..dim {
                    for j in 0..dim {
                        acc[(i, j)] += a[i] * a[j].conj();
                    }
                }
            }
        }
        linalg::add_identity(&mut acc, -1.0);
        Ok(linalg::max_abs(&acc))
    }
}

/// `|±,→n⟩` or `|±,←n⟩` on `spin ⊗ boson(levels)`.
pub fn jump_basis(alpha: f64, levels: usize, dir: Direction, mu: Sign, n: usize) -> Result<StateVector> {
    JumpBasis::new(alpha, levels)?.state(dir, mu, n)
}

/// Largest entry of `R² − (α² − â²)`.
pub fn r_squared_residual(alpha: f64, levels: usize) -> Result<f64> {
    let space = SpaceLabel::spin_boson(levels)?;
    let r = recovery_jump(alpha, &space)?;
    let a = fock_destroy(levels)?.lift(&space, BOSON)?;
    let mut want = linalg::scaled(&linalg::mul(a.matrix(), a.matrix()), real(-1.0));
    linalg::add_identity(&mut want, alpha * alpha);
    let got = linalg::mul(r.matrix(), r.matrix());
    let mut diff = got;
    linalg::axpy(&mut diff, real(-1.0), &want);
    Ok(linalg::max_abs(&diff))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub sign: Sign,
    pub n: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpActionReport {
    pub alpha: f64,
    pub levels: usize,
    pub checks: Vec<IdentityCheck>,
}

impl JumpActionReport {
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn first_failure(&self, tol: f64) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| !(c.residual <= tol))
    }

    /// Worst residual among checks whose name starts with `prefix`.
    pub fn max_residual_of(&self, prefix: &str) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }
}

fn combo(terms: &[(f64, &StateVector)]) -> Result<StateVector> {
    let mut acc = terms[0].1.scale(real(terms[0].0));
    for (c, v) in &terms[1..] {
        acc = acc.add(&v.scale(real(*c)))?;
    }
    Ok(acc)
}

/// Checks the action of the spin, ladder and recovery operators on the
/// displaced-Fock bases for every `n ≤ n_max`.
///
/// Checks are named `spin:σx`, `spin:σz`, `boson:a`, `boson:a†`, `boson:n`,
/// `R:fwd`, `R:bwd`, `R†:fwd` and `R†:bwd`.
pub fn jump_action_check(alpha: f64, n_max: usize) -> Result<JumpActionReport> {
    let levels = jump_levels(alpha, n_max);
    let basis = JumpBasis::new(alpha, levels)?;
    let space = basis.space().clone();
    let r = recovery_jump(alpha, &space)?;
    let rd = r.adjoint();
    let sx = pauli(PauliAxis::X);
    let sz = pauli(PauliAxis::Z);
    let a = fock_destroy(levels)?;
    let ad = fock_create(levels)?;
    let num = number(levels)?;
    let mut checks = Vec::new();
    let mut push = |name: &str, sign: Sign, n: usize, got: StateVector, want: StateVector| -> Result<()> {
        checks.push(IdentityCheck {
            name: name.into(),
            sign,
            n,
            residual: got.sub(&want)?.norm(),
        });
        Ok(())
    };

    for mu in [Sign::Plus, Sign::Minus] {
        let s = mu.value();
        push("spin:σx", mu, 0, sx.apply(&mu.spin())?, mu.spin().scale(real(s)))?;
        push("spin:σz", mu, 0, sz.apply(&mu.spin())?, mu.flip().spin())?;
        for n in 0..=n_max {
            let sq = math::sqrt(n as f64);
            let sq1 = math::sqrt(n as f64 + 1.0);
            let dn = basis.displaced(s, n)?;
            let dn1 = basis.displaced(s, n + 1)?;
            let lower = if n > 0 { Some(basis.displaced(s, n - 1)?) } else { None };
            let with_lower = |terms: &[(f64, &StateVector)], c: f64| -> Result<StateVector> {
                let base = combo(terms)?;
                match &lower {
                    Some(v) => base.add(&v.scale(real(c))),
                    None => Ok(base),
                }
            };
            push("boson:a", mu, n, a.apply(&dn)?, with_lower(&[(s * alpha, &dn)], sq)?)?;
            push("boson:a†", mu, n, ad.apply(&dn)?, combo(&[(sq1, &dn1), (s * alpha, &dn)])?)?;
            push(
                "boson:n",
                mu,
                n,
                num.apply(&dn)?,
                with_lower(&[(s * alpha * sq1, &dn1), (n as f64 + alpha * alpha, &dn)], s * alpha * sq)?,
            )?;

            let fwd = basis.state_unchecked(Direction::Forward, mu, n)?;
            let bwd = basis.state_unchecked(Direction::Backward, mu, n)?;
            let other = mu.flip();
            let zero = StateVector::new(space.clone(), vec![C64::new(0.0, 0.0); space.dim()])?;

            let want = if n > 0 {
                basis.state_unchecked(Direction::Backward, other, n - 1)?.scale(real(-s * sq))
            } else {
                zero.clone()
            };
            push("R:fwd", mu, n, r.apply(&fwd)?, want)?;

            let mut want = basis.state_unchecked(Direction::Forward, other, n)?.scale(real(2.0 * alpha));
            if n > 0 {
                want = want.add(&basis.state_unchecked(Direction::Forward, other, n - 1)?.scale(real(-s * sq)))?;
            }
            push("R:bwd", mu, n, r.apply(&bwd)?, want)?;

            let want = combo(&[
                (2.0 * alpha, &basis.state_unchecked(Direction::Backward, other, n)?),
                (s * sq1, &basis.state_unchecked(Direction::Backward, other, n + 1)?),
            ])?;
            push("R†:fwd", mu, n, rd.apply(&fwd)?, want)?;

            let want = basis.state_unchecked(Direction::Forward, other, n + 1)?.scale(real(s * sq1));
            push("R†:bwd", mu, n, rd.apply(&bwd)?, want)?;
        }
    }
    Ok(JumpActionReport { alpha, levels, checks })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JumpNode {
    pub sign: Sign,
    pub direction: Direction,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEdge {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

/// Markov diagram of recovery jumps between displaced-Fock states, with
/// coherence between post-jump branches discarded.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpGraph {
    pub nodes: Vec<JumpNode>,
    pub edges: Vec<JumpEdge>,
}

impl JumpGraph {
    pub fn index(&self, node: JumpNode) -> Option<usize> {
        self.nodes.iter().position(|m| *m == node)
    }

    pub fn edges_from(&self, source: usize) -> impl Iterator<Item = &JumpEdge> {
        self.edges.iter().filter(move |e| e.source == source)
    }

    pub fn out_rate(&self, source: usize) -> f64 {
        self.edges_from(source).map(|e| e.rate).sum()
    }
}

/// Edges `κ_R |⟨target|R|source⟩|²`, projected onto the family that
/// contains the post-jump state.
pub fn markov_graph(alpha: f64, kappa_r: f64, n_max: usize) -> Result<JumpGraph> {
    let levels = jump_levels(alpha, n_max);
    let basis = JumpBasis::new(alpha, levels)?;
    let r = recovery_jump(alpha, basis.space())?;
    let mut nodes = Vec::new();
    for direction in [Direction::Forward, Direction::Backward] {
        for sign in [Sign::Plus, Sign::Minus] {
            for n in 0..=n_max {
                nodes.push(JumpNode { sign, direction, n });
            }
        }
    }
    let mut states = Vec::with_capacity(nodes.len());
    for node in &nodes {
        states.push(basis.state_unchecked(node.direction, node.sign, node.n)?);
    }
    let mut edges = Vec::new();
    let cutoff = 1e-12 * kappa_r.max(f64::MIN_POSITIVE);
    for (i, src) in nodes.iter().enumerate() {
        let jumped = r.apply(&states[i])?;
        for (j, dst) in nodes.iter().enumerate() {
            if dst.direction != src.direction.flip() {
                continue;
            }
            let rate = kappa_r * states[j].inner(&jumped)?.norm_sqr();
            if rate > cutoff {
                edges.push(JumpEdge {
                    source: i,
                    target: j,
                    rate,
                });
            }
        }
    }
    Ok(JumpGraph { nodes, edges })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateReport {
    /// `λ = ⟨ψ|R|ψ⟩`.
    pub eigenvalue: C64,
    /// `‖R|ψ⟩ − λ|ψ⟩‖`.
    pub eigen_residual: f64,
    /// Frobenius norm of `D[R](|ψ⟩⟨ψ|)`, in units of `κ_R`.
    pub lindblad_residual: f64,
}

impl SteadyStateReport {
    pub fn is_steady(&self, tol: f64) -> bool {
        self.lindblad_residual <= tol
    }
}

/// Eigenstate and Lindblad residuals of `D[R]` for each pure candidate.
pub fn steady_state_check(alpha: f64, candidates: &[StateVector]) -> Result<Vec<SteadyStateReport>> {
    let mut out = Vec::with_capacity(candidates.len());
    for psi in candidates {
        let psi = psi.normalized()?;
        let r = recovery_jump(alpha, psi.space())?;
        let rpsi = r.apply(&psi)?;
        let lambda = psi.inner(&rpsi)?;
        let eigen_residual = rpsi.sub(&psi.scale(lambda))?.norm();
        let l = dissipator(&r);
        let lindblad_residual = l.apply(&psi.projector())?.frobenius_norm();
        out.push(SteadyStateReport {
            eigenvalue: lambda,
            eigen_residual,
            lindblad_residual,
        });
    }
    Ok(out)
}

/// Result of [`adiabatic_elimination_compare`].
#[derive(Clone, Debug)]
pub struct AdiabaticComparison {
    /// Column `trace_distance` between the reduced two-mode state and the
    /// effective single-mode state.
    pub series: TimeSeries,
    pub max_distance: f64,
    pub kappa_r: f64,
    pub conservation: ConservationStats,
    /// Set when `g/γ_b > 0.1`.
    pub warning: Option<String>,
}

/// Evolves `ρ₀ ⊗ |0⟩⟨0|_bath` under the system-bath model and compares the
/// reduced state with `κ_R D[R]` evolution at `κ_R = 4g²/γ_b`, at
/// `samples` evenly spaced times in `(0, t]`.
pub fn adiabatic_elimination_compare(
    alpha: f64,
    bath: &BathParams,
    rho0: &DensityMatrix,
    t: f64,
    samples: usize,
    opts: &EvolveOptions,
) -> Result<AdiabaticComparison> {
    bath.validate()?;
    if !(t > 0.0 && t.is_finite()) || samples == 0 {
        return Err(Error::param("t", "need t > 0 and at least one sample"));
    }
    let levels = rho0.space().require_spin_boson()?;
    let warning = (bath.ratio() > 0.1).then(|| format!("g/γ_b = {:.3} is outside the adiabatic regime", bath.ratio()));
    let space3 = SpaceLabel::spin_boson_bath(levels, bath.bath_levels)?;
    let vac = fock_state(bath.bath_levels, 0)?;
    let vac = StateVector::new(SpaceLabel::fock(BATH, bath.bath_levels)?, vac.amplitudes().to_vec())?;
    let full0 = DensityMatrix::new_unchecked(space3.clone(), rho0.tensor(&vac.projector()).into_matrix())?;

    let kappa_r = bath.effective_kappa_r();
    let two_mode = two_mode_liouvillian(alpha, bath, &space3)?;
    let effective = if kappa_r > 0.0 {
        Liouvillian::zero(rho0.space()).with_jump(kappa_r, &recovery_jump(alpha, rho0.space())?)?
    } else {
        Liouvillian::zero(rho0.space())
    };
    let times: Vec<f64> = (1..=samples).map(|k| t * k as f64 / samples as f64).collect();
    let full = evolve_states(&two_mode, &full0, &times, opts)?;
    let reduced_eff = evolve_states(&effective, rho0, &times, opts)?;

    let mut conservation = ConservationStats::default();
    let mut series = TimeSeries::new(&["trace_distance"]);
    let mut max_distance: f64 = 0.0;
    for ((tk, f), e) in times.iter().zip(&full).zip(&reduced_eff) {
        conservation.observe(f)?;
        conservation.observe(e)?;
        let reduced = partial_trace(f, &[SPIN, BOSON])?;
        let reduced = DensityMatrix::new_unchecked(rho0.space().clone(), reduced.into_matrix())?;
        let d = reduced.trace_distance(e)?;
        max_distance = max_distance.max(d);
        series.push(*tk, vec![real(d)])?;
    }
    Ok(AdiabaticComparison {
        series,
        max_distance,
        kappa_r,
        conservation,
        warning,
    })
}

//! Lindblad generators: Hamiltonian and dissipative terms, the error model
//! of the hybrid qubit, the recovery jump and the two-mode system–bath model.
//!
//! A [`Liouvillian`] is kept in operator form, as an optional Hamiltonian
//! plus a list of rated jump operators. [`Liouvillian::matrix`] expands it
//! into the `d² × d²` superoperator under column stacking,
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`:
//!
//! ```text
//! −i[H, ·]  ↦  −i (I ⊗ H − Hᵀ ⊗ I)
//! D[L]      ↦  L̄ ⊗ L − ½ I ⊗ L†L − ½ (L†L)ᵀ ⊗ I
//! ```

use alloc::borrow::ToOwned;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::linalg::{self, SparseMat, I, ONE, ZERO};
use crate::qspace::{
    fock_destroy, number, pauli, DensityMatrix, Operator, PauliAxis, SpaceLabel, BATH, BOSON, SPIN,
};
use crate::{Error, Result, C64};

/// Default bath-mode truncation.
pub const DEFAULT_BATH_LEVELS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThermalMode {
    /// `κ_th (n_th + 1) D[â] + κ_th n_th D[â†]`.
    #[default]
    FiniteTemperature,
    /// `γ_th (D[â] + D[â†])`, the infinite-temperature limit with `κ_th n_th = γ_th`.
    ClassicalField,
}

/// Rates of the hybrid-qubit noise model and the recovery rate, all in
/// angular units (1/time).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NoiseParams {
    pub kappa_th: f64,
    pub n_th: f64,
    pub gamma_th: f64,
    pub kappa_n: f64,
    pub kappa_sx: f64,
    pub kappa_sz: f64,
    pub kappa_r: f64,
    pub thermal_mode: ThermalMode,
}

impl NoiseParams {
    /// Recovery only, no noise.
    pub fn recovery_only(kappa_r: f64) -> Self {
        NoiseParams {
            kappa_r,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa_th", self.kappa_th),
            ("n_th", self.n_th),
            ("gamma_th", self.gamma_th),
            ("kappa_n", self.kappa_n),
            ("kappa_sx", self.kappa_sx),
            ("kappa_sz", self.kappa_sz),
            ("kappa_r", self.kappa_r),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, alloc::format!("must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `(down, up)` rates of the thermal channel in the active mode.
    pub fn thermal_rates(&self) -> (f64, f64) {
        match self.thermal_mode {
            ThermalMode::FiniteTemperature => {
                (self.kappa_th * (self.n_th + 1.0), self.kappa_th * self.n_th)
            }
            ThermalMode::ClassicalField => (self.gamma_th, self.gamma_th),
        }
    }

    /// Sum of all error-channel rates (recovery excluded).
    pub fn total_noise(&self) -> f64 {
        let (down, up) = self.thermal_rates();
        down + up + self.kappa_n + self.kappa_sx + self.kappa_sz
    }

    pub fn is_noiseless(&self) -> bool {
        self.total_noise() == 0.0
    }
}

/// Drive and relaxation of the auxiliary bath mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathParams {
    pub g: f64,
    pub gamma_b: f64,
    pub bath_levels: usize,
}

impl BathParams {
    pub fn new(g: f64, gamma_b: f64, bath_levels: usize) -> Result<Self> {
        let b = BathParams {
            g,
            gamma_b,
            bath_levels,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::param("g", "must be finite and ≥ 0"));
        }
        if !(self.gamma_b.is_finite() && self.gamma_b > 0.0) {
            return Err(Error::param("gamma_b", "must be finite and > 0"));
        }
        if self.bath_levels < 2 {
            return Err(Error::InvalidTruncation(self.bath_levels));
        }
        Ok(())
    }

    /// Effective recovery rate `4g²/γ_b` after adiabatic elimination.
    pub fn effective_kappa_r(&self) -> f64 {
        4.0 * self.g * self.g / self.gamma_b
    }

    pub fn ratio(&self) -> f64 {
        self.g / self.gamma_b
    }
}

#[derive(Clone, Debug)]
pub struct JumpTerm {
    pub rate: f64,
    pub operator: Mat<C64>,
}

/// Lindblad generator `−i[H, ·] + Σ κ_k D[L_k]` on a labeled space.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    space: SpaceLabel,
    hamiltonian: Option<Mat<C64>>,
    jumps: Vec<JumpTerm>,
}

impl Liouvillian {
    pub fn zero(space: &SpaceLabel) -> Self {
        Liouvillian {
            space: space.clone(),
            hamiltonian: None,
            jumps: Vec::new(),
        }
    }

    pub fn space(&self) -> &SpaceLabel {
        &self.space
    }

    /// Dimension `d` of the underlying Hilbert space (the superoperator is `d² × d²`).
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn hamiltonian(&self) -> Option<&Mat<C64>> {
        self.hamiltonian.as_ref()
    }

    pub fn jumps(&self) -> &[JumpTerm] {
        &self.jumps
    }

    pub fn is_zero(&self) -> bool {
        self.hamiltonian.is_none() && self.jumps.is_empty()
    }

    /// Adds `rate · D[op]`. Zero rates are dropped.
    pub fn with_jump(mut self, rate: f64, op: &Operator) -> Result<Self> {
        self.space.require_same(op.space())?;
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::param("rate", alloc::format!("must be finite and ≥ 0, got {rate}")));
        }
        if rate > 0.0 {
            self.jumps.push(JumpTerm {
                rate,
                operator: op.matrix().clone(),
            });
        }
        Ok(self)
    }

    /// Adds `−i[H, ·]`.
    pub fn with_hamiltonian(mut self, h: &Operator) -> Result<Self> {
        self.space.require_same(h.space())?;
        let dev = h.hermiticity_deviation();
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        self.hamiltonian = Some(match self.hamiltonian.take() {
            None => h.matrix().clone(),
            Some(mut acc) => {
                linalg::axpy(&mut acc, ONE, h.matrix());
                acc
            }
        });
        Ok(self)
    }

    pub fn add(&self, other: &Liouvillian) -> Result<Liouvillian> {
        self.space.require_same(&other.space)?;
        let mut out = self.clone();
        if let Some(h) = &other.hamiltonian {
            out.hamiltonian = Some(match out.hamiltonian.take() {
                None => h.clone(),
                Some(mut acc) => {
                    linalg::axpy(&mut acc, ONE, h);
                    acc
                }
            });
        }
        out.jumps.extend(other.jumps.iter().cloned());
        Ok(out)
    }

    /// `s · L` for `s ≥ 0`.
    pub fn scale(&self, s: f64) -> Result<Liouvillian> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::param("scale", "must be finite and ≥ 0"));
        }
        if s == 0.0 {
            return Ok(Liouvillian::zero(&self.space));
        }
        Ok(Liouvillian {
            space: self.space.clone(),
            hamiltonian: self
                .hamiltonian
                .as_ref()
                .map(|h| linalg::scaled(h, C64::new(s, 0.0))),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpTerm {
                    rate: j.rate * s,
                    operator: j.operator.clone(),
                })
                .collect(),
        })
    }

    /// Effective non-Hermitian generator `K = −iH − ½ Σ κ L†L`, so that
    /// `L(ρ) = Kρ + ρK† + Σ κ LρL†`.
    pub(crate) fn effective_k(&self) -> Mat<C64> {
        let d = self.dim();
        let mut k = match &self.hamiltonian {
            Some(h) => linalg::scaled(h, -I),
            None => linalg::zeros(d, d),
        };
        for j in &self.jumps {
            let ldl = linalg::mul(&linalg::adjoint(&j.operator), &j.operator);
            linalg::axpy(&mut k, C64::new(-0.5 * j.rate, 0.0), &ldl);
        }
        k
    }

    /// The `d² × d²` superoperator under column stacking.
    pub fn matrix(&self) -> Mat<C64> {
        let d = self.dim();
        let mut out = linalg::zeros(d * d, d * d);
        if self.is_zero() {
            return out;
        }
        let k = self.effective_k();
        let eye = linalg::identity(d);
        // I ⊗ K + K̄ ⊗ I
        add_kron(&mut out, ONE, &eye, &k);
        add_kron(&mut out, ONE, &conj(&k), &eye);
        for j in &self.jumps {
            add_kron(&mut out, C64::new(j.rate, 0.0), &conj(&j.operator), &j.operator);
        }
        out
    }

    /// Superoperator blocks under the `Z₂` grading `odd` of the basis.
    ///
    /// When the Hamiltonian is even and every jump operator is even or odd,
    /// the generator preserves whether `ρ_{ij}` has `odd_i == odd_j`, and
    /// the superoperator splits into two blocks of half size. Otherwise a
    /// single block covering all of `vec(ρ)` is returned.
    pub(crate) fn sectors(&self, odd: &[bool]) -> Vec<Sector> {
        let d = self.dim();
        let graded = odd.len() == d
            && self
                .hamiltonian
                .as_ref()
                .map_or(true, |h| homogeneous(h, odd) == Some(false))
            && self.jumps.iter().all(|j| homogeneous(&j.operator, odd).is_some());
        let groups: Vec<Vec<usize>> = if graded {
            let mut same = Vec::new();
            let mut diff = Vec::new();
            for j in 0..d {
                for i in 0..d {
                    if odd[i] == odd[j] {
                        same.push(i + d * j);
                    } else {
                        diff.push(i + d * j);
                    }
                }
            }
            vec![same, diff]
        } else {
            vec![(0..d * d).collect()]
        };
        let k = self.effective_k();
        let eye = linalg::identity(d);
        let kbar = conj(&k);
        groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|indices| {
                let mut map = vec![usize::MAX; d * d];
                for (local, &r) in indices.iter().enumerate() {
                    map[r] = local;
                }
                let n = indices.len();
                let mut m = linalg::zeros(n, n);
                add_kron_masked(&mut m, ONE, &eye, &k, &map);
                add_kron_masked(&mut m, ONE, &kbar, &eye, &map);
                for j in &self.jumps {
                    add_kron_masked(&mut m, C64::new(j.rate, 0.0), &conj(&j.operator), &j.operator, &map);
                }
                Sector { indices, matrix: m }
            })
            .collect()
    }

    /// `L(ρ)` as an operator, computed in operator form.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<Operator> {
        self.space.require_same(rho.space())?;
        Ok(Operator::from_parts(
            self.space.clone(),
            self.apply_matrix(rho.matrix()),
        ))
    }

    pub(crate) fn apply_matrix(&self, rho: &Mat<C64>) -> Mat<C64> {
        let d = self.dim();
        let mut out = linalg::zeros(d, d);
        self.compile().apply_into(rho, &mut out);
        out
    }

    pub(crate) fn compile(&self) -> SparseGenerator {
        SparseGenerator {
            k: SparseMat::from_dense(&self.effective_k()),
            jumps: self
                .jumps
                .iter()
                .map(|j| (j.rate, SparseMat::from_dense(&j.operator)))
                .collect(),
            scratch_dim: self.dim(),
        }
    }
}

/// Block of the superoperator acting on the `vec(ρ)` entries listed in
/// `indices` (column-stacked positions `i + d·j`).
#[derive(Clone, Debug)]
pub(crate) struct Sector {
    pub indices: Vec<usize>,
    pub matrix: Mat<C64>,
}

/// `Some(false)` for an even operator, `Some(true)` for an odd one, `None`
/// when it mixes both.
fn homogeneous(a: &Mat<C64>, odd: &[bool]) -> Option<bool> {
    let mut kind = None;
    for (i, j, _) in nonzeros(a) {
        let flips = odd[i] != odd[j];
        match kind {
            None => kind = Some(flips),
            Some(k) if k != flips => return None,
            _ => {}
        }
    }
    Some(kind.unwrap_or(false))
}

/// Grading by the parity of `σ_z e^{iπn̂}`: spin index plus photon number
/// of the storage mode, mod 2. Other factors do not contribute.
pub(crate) fn code_parity_grading(space: &SpaceLabel) -> Vec<bool> {
    let positions: Vec<usize> = space
        .factors()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.name == SPIN || f.name == BOSON)
        .map(|(p, _)| p)
        .collect();
    (0..space.dim())
        .map(|i| {
            let digits = space.digits(i);
            positions.iter().map(|&p| digits[p]).sum::<usize>() % 2 == 1
        })
        .collect()
}

/// Operator-form generator with sparse factors, for repeated application.
#[derive(Clone, Debug)]
pub(crate) struct SparseGenerator {
    k: SparseMat,
    jumps: Vec<(f64, SparseMat)>,
    scratch_dim: usize,
}

impl SparseGenerator {
    /// `out = Kρ + ρK† + Σ κ LρL†`.
    pub(crate) fn apply_into(&self, rho: &Mat<C64>, out: &mut Mat<C64>) {
        self.k.mul_dense(rho, out, false);
        self.k.dense_mul_adjoint(rho, out, 1.0);
        if self.jumps.is_empty() {
            return;
        }
        let d = self.scratch_dim;
        let mut tmp = linalg::zeros(d, d);
        for (rate, l) in &self.jumps {
            l.mul_dense(rho, &mut tmp, false);
            l.dense_mul_adjoint(&tmp, out, *rate);
        }
    }
}

fn conj(a: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

fn nonzeros(a: &Mat<C64>) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..a.ncols() {
        for (i, z) in a.col_as_slice(j).iter().enumerate() {
            if *z != ZERO {
                out.push((i, j, *z));
            }
        }
    }
    out
}

/// `out += s · (a ⊗ b)` over the nonzero entries only.
fn add_kron(out: &mut Mat<C64>, s: C64, a: &Mat<C64>, b: &Mat<C64>) {
    let db = b.nrows();
    let nb = nonzeros(b);
    for (ia, ja, za) in nonzeros(a) {
        let w = s * za;
        for &(ib, jb, zb) in &nb {
            out[(ia * db + ib, ja * db + jb)] += w * zb;
        }
    }
}

fn add_kron_masked(out: &mut Mat<C64>, s: C64, a: &Mat<C64>, b: &Mat<C64>, map: &[usize]) {
    let db = b.nrows();
    let nb = nonzeros(b);
    for (ia, ja, za) in nonzeros(a) {
        let w = s * za;
        for &(ib, jb, zb) in &nb {
            let (r, c) = (map[ia * db + ib], map[ja * db + jb]);
            if r != usize::MAX && c != usize::MAX {
                out[(r, c)] += w * zb;
            }
        }
    }
}

/// `D[L]` with unit rate.
pub fn dissipator(l: &Operator) -> Liouvillian {
    Liouvillian {
        space: l.space().clone(),
        hamiltonian: None,
        jumps: vec![JumpTerm {
            rate: 1.0,
            operator: l.matrix().clone(),
        }],
    }
}

/// `−i[H, ·]`; rejects non-Hermitian `H`.
pub fn hamiltonian_liouvillian(h: &Operator) -> Result<Liouvillian> {
    Liouvillian::zero(h.space()).with_hamiltonian(h)
}

/// Standard operators lifted onto a `spin ⊗ boson` space.
pub(crate) struct SpinBosonOps {
    pub a: Operator,
    pub n: Operator,
    pub sx: Operator,
    pub sy: Operator,
    pub sz: Operator,
}

pub(crate) fn spin_boson_ops(space: &SpaceLabel) -> Result<SpinBosonOps> {
    let levels = space.require_spin_boson()?;
    Ok(SpinBosonOps {
        a: fock_destroy(levels)?.lift(space, BOSON)?,
        n: number(levels)?.lift(space, BOSON)?,
        sx: pauli(PauliAxis::X).lift(space, SPIN)?,
        sy: pauli(PauliAxis::Y).lift(space, SPIN)?,
        sz: pauli(PauliAxis::Z).lift(space, SPIN)?,
    })
}

fn thermal_terms(p: &NoiseParams, l: Liouvillian, a: &Operator, n: &Operator) -> Result<Liouvillian> {
    let (down, up) = p.thermal_rates();
    l.with_jump(down, a)?
        .with_jump(up, &a.adjoint())?
        .with_jump(p.kappa_n, n)
}

/// Error generator `L_th + κ_n D[n̂] + κ_σx D[σ_x] + κ_σz D[σ_z]` on
/// `spin ⊗ boson`. The recovery rate in `p` is ignored here.
pub fn error_liouvillian(p: &NoiseParams, space: &SpaceLabel) -> Result<Liouvillian> {
    p.validate()?;
    let ops = spin_boson_ops(space)?;
    thermal_terms(p, Liouvillian::zero(space), &ops.a, &ops.n)?
        .with_jump(p.kappa_sx, &ops.sx)?
        .with_jump(p.kappa_sz, &ops.sz)
}

/// Thermal and bosonic-dephasing part of the error model on a bare
/// oscillator space (used by the cat-code baseline).
pub fn boson_error_liouvillian(p: &NoiseParams, space: &SpaceLabel) -> Result<Liouvillian> {
    p.validate()?;
    let levels = boson_only(space)?;
    let a = fock_destroy(levels)?.lift(space, BOSON)?;
    let n = number(levels)?.lift(space, BOSON)?;
    thermal_terms(p, Liouvillian::zero(space), &a, &n)
}

fn boson_only(space: &SpaceLabel) -> Result<usize> {
    match space.factors() {
        [f] if f.name == BOSON => Ok(f.dim),
        _ => Err(Error::SpaceMismatch {
            expected: "boson(N)".to_owned(),
            found: alloc::string::ToString::to_string(space),
        }),
    }
}

fn require_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", alloc::format!("must be > 0, got {alpha}")))
    }
}

/// Recovery jump `R = σ_z (α − σ_x â) = α σ_z − iσ_y â` on `spin ⊗ boson`.
pub fn recovery_jump(alpha: f64, space: &SpaceLabel) -> Result<Operator> {
    require_alpha(alpha)?;
    let ops = spin_boson_ops(space)?;
    let sy_a = ops.sy.mul(&ops.a)?;
    ops.sz.scale(C64::new(alpha, 0.0)).sub(&sy_a.scale(I))
}

/// `κ_R D[R]`.
pub fn recovery_liouvillian(alpha: f64, kappa_r: f64, space: &SpaceLabel) -> Result<Liouvillian> {
    Liouvillian::zero(space).with_jump(kappa_r, &recovery_jump(alpha, space)?)
}

/// Two-photon stabilizer `â² − α²` on the bosonic factor of `space`.
pub fn cat_recovery_jump(alpha: f64, space: &SpaceLabel) -> Result<Operator> {
    require_alpha(alpha)?;
    let levels = space.factor(BOSON)?.dim;
    let a = fock_destroy(levels)?;
    let mut m = linalg::mul(a.matrix(), a.matrix());
    linalg::add_identity(&mut m, -alpha * alpha);
    Operator::from_parts(a.space().clone(), m).lift(space, BOSON)
}

/// `H_SB = g[α σ_z b̂† − iσ_y â b̂†] + h.c. = g(R b̂† + R† b̂)` on
/// `spin ⊗ boson ⊗ bath`.
pub fn system_bath_hamiltonian(alpha: f64, b: &BathParams, space3: &SpaceLabel) -> Result<Operator> {
    b.validate()?;
    let (levels, bath_levels) = space3.require_spin_boson_bath()?;
    if bath_levels != b.bath_levels {
        return Err(Error::DimensionMismatch {
            expected: b.bath_levels,
            found: bath_levels,
        });
    }
    require_alpha(alpha)?;
    let a = fock_destroy(levels)?.lift(space3, BOSON)?;
    let bb = fock_destroy(bath_levels)?.lift(space3, BATH)?;
    let sy = pauli(PauliAxis::Y).lift(space3, SPIN)?;
    let sz = pauli(PauliAxis::Z).lift(space3, SPIN)?;
    let bd = bb.adjoint();
    let first = sz.mul(&bd)?.scale(C64::new(alpha, 0.0));
    let second = sy.mul(&a)?.mul(&bd)?.scale(-I);
    let half = first.add(&second)?.scale(C64::new(b.g, 0.0));
    let mut h = half.add(&half.adjoint())?.into_matrix();
    linalg::hermitize(&mut h);
    Ok(Operator::from_parts(space3.clone(), h))
}

/// `−i[H_SB, ·] + γ_b D[b̂]`.
pub fn two_mode_liouvillian(alpha: f64, b: &BathParams, space3: &SpaceLabel) -> Result<Liouvillian> {
    let h = system_bath_hamiltonian(alpha, b, space3)?;
    let bb = fock_destroy(b.bath_levels)?.lift(space3, BATH)?;
    hamiltonian_liouvillian(&h)?.with_jump(b.gamma_b, &bb)
}

/// `‖[A, B]‖_F / (‖A‖_F ‖B‖_F)` for two generators on the same space.
///
/// The superoperators are never materialized: each is applied to every
/// matrix unit `|i⟩⟨j|` in turn. Returns 0 when either generator vanishes.
pub fn superoperator_commutator_ratio(a: &Liouvillian, b: &Liouvillian) -> Result<f64> {
    a.space().require_same(b.space())?;
    let d = a.dim();
    let (ga, gb) = (a.compile(), b.compile());
    let mut unit = linalg::zeros(d, d);
    let mut xa = linalg::zeros(d, d);
    let mut xb = linalg::zeros(d, d);
    let mut ab = linalg::zeros(d, d);
    let mut ba = linalg::zeros(d, d);
    let (mut na, mut nb, mut nc) = (0.0, 0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            unit[(i, j)] = ONE;
            ga.apply_into(&unit, &mut xa);
            gb.apply_into(&unit, &mut xb);
            ga.apply_into(&xb, &mut ab);
            gb.apply_into(&xa, &mut ba);
            unit[(i, j)] = ZERO;
            let (fa, fb) = (linalg::frobenius(&xa), linalg::frobenius(&xb));
            na += fa * fa;
            nb += fb * fb;
            linalg::axpy(&mut ab, -ONE, &ba);
            let fc = linalg::frobenius(&ab);
            nc += fc * fc;
        }
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(crate::math::sqrt(nc / (na * nb)))
}

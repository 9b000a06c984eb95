//! Hilbert-space kernel: labeled tensor-product spaces, operators, pure and
//! mixed states on a spin ⊗ truncated-Fock (⊗ bath) composite.
//!
//! Every [`Operator`], [`StateVector`] and [`DensityMatrix`] carries the
//! [`SpaceLabel`] it lives on. Arithmetic between values on different spaces
//! is rejected with [`Error::SpaceMismatch`]. Factors are ordered; the first
//! factor is the slowest-varying index of the flattened basis.
//!
//! Truncation is monitored: a state whose population in the top
//! [`LEAKAGE_LEVELS`] Fock levels of any bosonic factor exceeds
//! [`LEAKAGE_LIMIT`] is reported as [`Error::Leakage`].

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use faer::Mat;

use crate::linalg::{self, ONE, ZERO};
use crate::{math, Error, Result, C64};

/// Name of the spin factor in the standard spaces.
pub const SPIN: &str = "spin";
/// Name of the storage oscillator factor.
pub const BOSON: &str = "boson";
/// Name of the auxiliary bath oscillator factor.
pub const BATH: &str = "bath";

/// Population allowed in the top Fock levels before a state counts as leaked.
pub const LEAKAGE_LIMIT: f64 = 1e-8;
/// Number of top Fock levels watched by the leakage monitor.
pub const LEAKAGE_LEVELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Spin,
    Boson,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Factor {
    pub name: String,
    pub dim: usize,
    pub kind: FactorKind,
}

/// Ordered list of named tensor factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceLabel {
    factors: Vec<Factor>,
}

impl SpaceLabel {
    pub fn spin(name: &str) -> Self {
        SpaceLabel {
            factors: vec![Factor {
                name: name.to_owned(),
                dim: 2,
                kind: FactorKind::Spin,
            }],
        }
    }

    pub fn fock(name: &str, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidTruncation(levels));
        }
        Ok(SpaceLabel {
            factors: vec![Factor {
                name: name.to_owned(),
                dim: levels,
                kind: FactorKind::Boson,
            }],
        })
    }

    /// `spin ⊗ boson(levels)`.
    pub fn spin_boson(levels: usize) -> Result<Self> {
        Ok(Self::spin(SPIN).tensor(&Self::fock(BOSON, levels)?))
    }

    /// `spin ⊗ boson(levels) ⊗ bath(bath_levels)`.
    pub fn spin_boson_bath(levels: usize, bath_levels: usize) -> Result<Self> {
        Ok(Self::spin_boson(levels)?.tensor(&Self::fock(BATH, bath_levels)?))
    }

    pub fn tensor(&self, other: &SpaceLabel) -> SpaceLabel {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        SpaceLabel { factors }
    }

    /// Same space with every factor name suffixed, e.g. `spin` → `spin_a`.
    pub fn with_suffix(&self, suffix: &str) -> SpaceLabel {
        SpaceLabel {
            factors: self
                .factors
                .iter()
                .map(|f| Factor {
                    name: format!("{}{}", f.name, suffix),
                    ..f.clone()
                })
                .collect(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn factor(&self, name: &str) -> Result<&Factor> {
        self.factors
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_owned()))
    }

    pub(crate) fn require_same(&self, other: &SpaceLabel) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }

    /// Requires `spin ⊗ boson` with the standard factor names.
    pub(crate) fn require_spin_boson(&self) -> Result<usize> {
        match self.factors.as_slice() {
            [s, b] if s.name == SPIN && s.dim == 2 && b.name == BOSON => Ok(b.dim),
            _ => Err(Error::SpaceMismatch {
                expected: "spin(2) ⊗ boson(N)".to_owned(),
                found: self.to_string(),
            }),
        }
    }

    /// Requires `spin ⊗ boson ⊗ bath`; returns the two truncations.
    pub(crate) fn require_spin_boson_bath(&self) -> Result<(usize, usize)> {
        match self.factors.as_slice() {
            [s, b, c] if s.name == SPIN && s.dim == 2 && b.name == BOSON && c.name == BATH => {
                Ok((b.dim, c.dim))
            }
            _ => Err(Error::SpaceMismatch {
                expected: "spin(2) ⊗ boson(N) ⊗ bath(M)".to_owned(),
                found: self.to_string(),
            }),
        }
    }

    /// Row-major digits of a flattened index, one per factor.
    pub(crate) fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            *slot = index % f.dim;
            index /= f.dim;
        }
        out
    }

    /// Largest population found in the watched top levels of any bosonic
    /// factor, given the diagonal of a state.
    pub fn tail_population(&self, diagonal: &[f64]) -> Option<(String, f64)> {
        let mut worst: Option<(String, f64)> = None;
        for (pos, f) in self.factors.iter().enumerate() {
            if f.kind != FactorKind::Boson || f.dim <= LEAKAGE_LEVELS {
                continue;
            }
            let stride: usize = self.factors[pos + 1..].iter().map(|g| g.dim).product();
            let cutoff = f.dim - LEAKAGE_LEVELS;
            let tail: f64 = diagonal
                .iter()
                .enumerate()
                .filter(|(i, _)| (i / stride) % f.dim >= cutoff)
                .map(|(_, p)| p.max(0.0))
                .sum();
            if worst.as_ref().map_or(true, |(_, w)| tail > *w) {
                worst = Some((f.name.clone(), tail));
            }
        }
        worst
    }

    pub(crate) fn check_leakage(&self, diagonal: &[f64]) -> Result<()> {
        match self.tail_population(diagonal) {
            Some((factor, population)) if population > LEAKAGE_LIMIT => Err(Error::Leakage {
                factor,
                population,
                limit: LEAKAGE_LIMIT,
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SpaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, factor) in self.factors.iter().enumerate() {
            if k > 0 {
                f.write_str(" ⊗ ")?;
            }
            write!(f, "{}({})", factor.name, factor.dim)?;
        }
        Ok(())
    }
}

/// Largest Poisson amplitude allowed on the top Fock level of a coherent
/// state at the default truncation.
pub const TOP_LEVEL_AMPLITUDE: f64 = 1e-10;

/// Amplitude `e^{−α²/2} αⁿ/√n!` of `|n⟩` in the coherent state `|α⟩`, α ≥ 0.
pub fn poisson_amplitude(alpha: f64, n: usize) -> f64 {
    if alpha == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    math::exp(-0.5 * alpha * alpha + nf * math::ln(alpha) - 0.5 * math::ln_gamma(nf + 1.0))
}

/// Default truncation: at least `ceil(α² + 6α + 10)` and 16 levels, grown
/// until the coherent amplitude on the top level is below
/// [`TOP_LEVEL_AMPLITUDE`]. The truncated `â` is nilpotent, so code-space
/// identities such as `R|ψ⟩_L = 0` hold only up to `α` times that amplitude.
pub fn default_truncation(alpha: f64) -> usize {
    let a = alpha.abs();
    let mut n = (math::ceil(a * a + 6.0 * a + 10.0) as usize).max(16);
    while poisson_amplitude(a, n - 1) > TOP_LEVEL_AMPLITUDE {
        n += 1;
    }
    n
}

/// Dense operator on a labeled space.
#[derive(Clone, Debug)]
pub struct Operator {
    space: SpaceLabel,
    matrix: Mat<C64>,
}

impl Operator {
    pub fn new(space: SpaceLabel, matrix: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Operator { space, matrix })
    }

    pub(crate) fn from_parts(space: SpaceLabel, matrix: Mat<C64>) -> Self {
        debug_assert_eq!(space.dim(), matrix.nrows());
        Operator { space, matrix }
    }

    pub fn identity(space: &SpaceLabel) -> Self {
        Operator::from_parts(space.clone(), linalg::identity(space.dim()))
    }

    pub fn zeros(space: &SpaceLabel) -> Self {
        let d = space.dim();
        Operator::from_parts(space.clone(), linalg::zeros(d, d))
    }

    pub fn space(&self) -> &SpaceLabel {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Operator {
        Operator::from_parts(self.space.clone(), linalg::adjoint(&self.matrix))
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator::from_parts(self.space.clone(), linalg::scaled(&self.matrix, s))
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.space.require_same(&other.space)?;
        let mut m = self.matrix.clone();
        linalg::axpy(&mut m, ONE, &other.matrix);
        Ok(Operator::from_parts(self.space.clone(), m))
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.space.require_same(&other.space)?;
        let mut m = self.matrix.clone();
        linalg::axpy(&mut m, -ONE, &other.matrix);
        Ok(Operator::from_parts(self.space.clone(), m))
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.space.require_same(&other.space)?;
        Ok(Operator::from_parts(
            self.space.clone(),
            linalg::mul(&self.matrix, &other.matrix),
        ))
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Largest absolute entry of `self − other`.
    pub fn distance(&self, other: &Operator) -> Result<f64> {
        Ok(linalg::max_abs(self.sub(other)?.matrix()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.space.require_same(&psi.space)?;
        let d = self.dim();
        let mut out = vec![ZERO; d];
        for (j, a) in psi.amplitudes.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.matrix.col_as_slice(j)) {
                *o += m * a;
            }
        }
        Ok(StateVector {
            space: self.space.clone(),
            amplitudes: out,
        })
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expect(&self, psi: &StateVector) -> Result<C64> {
        psi.inner(&self.apply(psi)?)
    }

    /// `exp(factor · self)` for a Hermitian operator, via its spectrum.
    pub fn exp_hermitian(&self, factor: C64) -> Result<Operator> {
        let dev = self.hermiticity_deviation();
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Operator::from_parts(
            self.space.clone(),
            linalg::exp_hermitian(&self.matrix, factor)?,
        ))
    }

    /// Embeds a single-factor operator into `space` at the factor named
    /// `factor`, with identities on every other factor.
    pub fn lift(&self, space: &SpaceLabel, factor: &str) -> Result<Operator> {
        let pos = space
            .position(factor)
            .ok_or_else(|| Error::UnknownFactor(factor.to_owned()))?;
        let target = &space.factors()[pos];
        if self.space.factors().len() != 1 || self.dim() != target.dim {
            return Err(Error::DimensionMismatch {
                expected: target.dim,
                found: self.dim(),
            });
        }
        let left: usize = space.factors()[..pos].iter().map(|f| f.dim).product();
        let right: usize = space.factors()[pos + 1..].iter().map(|f| f.dim).product();
        let m = linalg::kron(
            &linalg::kron(&linalg::identity(left), &self.matrix),
            &linalg::identity(right),
        );
        Ok(Operator::from_parts(space.clone(), m))
    }
}

/// Kronecker product with concatenated labels, `a` first.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator::from_parts(
        a.space.tensor(&b.space),
        linalg::kron(&a.matrix, &b.matrix),
    )
}

/// Pure state on a labeled space.
#[derive(Clone, Debug)]
pub struct StateVector {
    space: SpaceLabel,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(space: SpaceLabel, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(StateVector { space, amplitudes })
    }

    pub fn basis(space: &SpaceLabel, index: usize) -> Result<Self> {
        let d = space.dim();
        if index >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: index + 1,
            });
        }
        let mut amplitudes = vec![ZERO; d];
        amplitudes[index] = ONE;
        Ok(StateVector {
            space: space.clone(),
            amplitudes,
        })
    }

    pub fn space(&self) -> &SpaceLabel {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.amplitudes.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a null vector".to_owned()));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        StateVector {
            space: self.space.clone(),
            amplitudes: self.amplitudes.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        self.space.require_same(&other.space)?;
        Ok(StateVector {
            space: self.space.clone(),
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &StateVector) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.space.require_same(&other.space)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        StateVector {
            space: self.space.tensor(&other.space),
            amplitudes,
        }
    }

    pub fn projector(&self) -> DensityMatrix {
        let d = self.amplitudes.len();
        let m = Mat::from_fn(d, d, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix {
            space: self.space.clone(),
            matrix: m,
        }
    }

    pub fn check_leakage(&self) -> Result<()> {
        let diag: Vec<f64> = self.amplitudes.iter().map(|z| z.norm_sqr()).collect();
        self.space.check_leakage(&diag)
    }
}

/// `|+⟩`, the +1 eigenstate of σ_x.
pub fn spin_plus() -> StateVector {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    StateVector {
        space: SpaceLabel::spin(SPIN),
        amplitudes: vec![C64::new(h, 0.0), C64::new(h, 0.0)],
    }
}

/// `|−⟩`, the −1 eigenstate of σ_x.
pub fn spin_minus() -> StateVector {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    StateVector {
        space: SpaceLabel::spin(SPIN),
        amplitudes: vec![C64::new(h, 0.0), C64::new(-h, 0.0)],
    }
}

/// Computational spin state `|k⟩`, k ∈ {0, 1} (σ_z eigenvalue (−1)^k).
pub fn spin_basis(k: usize) -> Result<StateVector> {
    StateVector::basis(&SpaceLabel::spin(SPIN), k)
}

/// Fock state `|k⟩` in a `levels`-dimensional boson factor.
pub fn fock_state(levels: usize, k: usize) -> Result<StateVector> {
    StateVector::basis(&SpaceLabel::fock(BOSON, levels)?, k)
}

/// Mixed state; Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: SpaceLabel,
    matrix: Mat<C64>,
}

/// Conservation diagnostics of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDiagnostics {
    pub trace_deviation: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub fn within(&self, trace_tol: f64, herm_tol: f64, min_eig: f64) -> bool {
        self.trace_deviation <= trace_tol && self.hermiticity <= herm_tol && self.min_eigenvalue >= min_eig
    }
}

impl DensityMatrix {
    /// Validated constructor: Hermitian and unit trace within 1e-10,
    /// minimum eigenvalue at least −1e-8.
    pub fn new(space: SpaceLabel, matrix: Mat<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        let diag = rho.diagnostics()?;
        if !diag.within(1e-10, 1e-10, -1e-8) {
            return Err(Error::InvalidState(format!(
                "trace deviation {:.2e}, hermiticity {:.2e}, min eigenvalue {:.2e}",
                diag.trace_deviation, diag.hermiticity, diag.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    /// Checks only the shape.
    pub fn new_unchecked(space: SpaceLabel, matrix: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(DensityMatrix { space, matrix })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.projector()
    }

    pub fn maximally_mixed(space: &SpaceLabel) -> Self {
        let d = space.dim();
        DensityMatrix {
            space: space.clone(),
            matrix: linalg::scaled(&linalg::identity(d), C64::new(1.0 / d as f64, 0.0)),
        }
    }

    /// Convex combination `Σ w_k ρ_k`.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".to_owned()))?
            .1;
        let d = first.matrix.nrows();
        let mut m = linalg::zeros(d, d);
        for (w, rho) in parts {
            first.space.require_same(&rho.space)?;
            linalg::axpy(&mut m, C64::new(*w, 0.0), &rho.matrix);
        }
        Ok(DensityMatrix {
            space: first.space.clone(),
            matrix: m,
        })
    }

    pub fn space(&self) -> &SpaceLabel {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.matrix, &self.matrix).re
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut h = self.matrix.clone();
        linalg::hermitize(&mut h);
        linalg::hermitian_eigenvalues(&h)
    }

    pub fn diagnostics(&self) -> Result<StateDiagnostics> {
        let eig = self.eigenvalues()?;
        Ok(StateDiagnostics {
            trace_deviation: (self.trace() - ONE).norm(),
            hermiticity: linalg::hermiticity_deviation(&self.matrix),
            min_eigenvalue: eig.first().copied().unwrap_or(0.0),
        })
    }

    /// `Tr(ρ O)`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        self.space.require_same(op.space())?;
        Ok(linalg::trace_product(&self.matrix, op.matrix()))
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn overlap(&self, psi: &StateVector) -> Result<f64> {
        self.space.require_same(psi.space())?;
        let d = self.dim();
        let a = psi.amplitudes();
        let mut acc = ZERO;
        for j in 0..d {
            if a[j] == ZERO {
                continue;
            }
            let col = self.matrix.col_as_slice(j);
            let mut s = ZERO;
            for (i, r) in col.iter().enumerate() {
                s += a[i].conj() * r;
            }
            acc += s * a[j];
        }
        Ok(acc.re)
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Self> {
        self.space.require_same(u.space())?;
        let left = linalg::mul(u.matrix(), &self.matrix);
        let m = linalg::mul(&left, &linalg::adjoint(u.matrix()));
        Ok(DensityMatrix {
            space: self.space.clone(),
            matrix: m,
        })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Self {
        DensityMatrix {
            space: self.space.tensor(&other.space),
            matrix: linalg::kron(&self.matrix, &other.matrix),
        }
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.space.require_same(&other.space)?;
        linalg::trace_distance(&self.matrix, &other.matrix)
    }

    pub fn check_leakage(&self) -> Result<()> {
        self.space.check_leakage(&self.diagonal())
    }
}

/// Annihilation operator `â` on `levels` Fock states.
pub fn fock_destroy(levels: usize) -> Result<Operator> {
    let space = SpaceLabel::fock(BOSON, levels)?;
    let m = Mat::from_fn(levels, levels, |i, j| {
        if j == i + 1 {
            C64::new(math::sqrt(j as f64), 0.0)
        } else {
            ZERO
        }
    });
    Ok(Operator::from_parts(space, m))
}

/// Creation operator `â†`.
pub fn fock_create(levels: usize) -> Result<Operator> {
    Ok(fock_destroy(levels)?.adjoint())
}

/// Number operator `n̂`.
pub fn number(levels: usize) -> Result<Operator> {
    let space = SpaceLabel::fock(BOSON, levels)?;
    let m = Mat::from_fn(levels, levels, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            ZERO
        }
    });
    Ok(Operator::from_parts(space, m))
}

/// Parity `e^{iπn̂}`.
pub fn parity(levels: usize) -> Result<Operator> {
    let space = SpaceLabel::fock(BOSON, levels)?;
    let m = Mat::from_fn(levels, levels, |i, j| {
        if i != j {
            ZERO
        } else if i % 2 == 0 {
            ONE
        } else {
            -ONE
        }
    });
    Ok(Operator::from_parts(space, m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// Pauli matrix in the computational basis `{|0⟩, |1⟩}` (σ_z|0⟩ = |0⟩).
pub fn pauli(axis: PauliAxis) -> Operator {
    let (a, b, c, d) = match axis {
        PauliAxis::X => (ZERO, ONE, ONE, ZERO),
        PauliAxis::Y => (ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO),
        PauliAxis::Z => (ONE, ZERO, ZERO, -ONE),
    };
    let m = Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => a,
        (0, 1) => b,
        (1, 0) => c,
        _ => d,
    });
    Operator::from_parts(SpaceLabel::spin(SPIN), m)
}

/// `exp(α â† − α* â)` on the truncated space, without the leakage guard.
pub(crate) fn displacement_matrix(alpha: C64, levels: usize) -> Result<Mat<C64>> {
    let a = fock_destroy(levels)?;
    let a_dag = a.adjoint();
    // K = i(α â† − α* â) is Hermitian and D = exp(−iK).
    let mut k = linalg::scaled(a_dag.matrix(), C64::new(0.0, 1.0) * alpha);
    linalg::axpy(&mut k, -C64::new(0.0, 1.0) * alpha.conj(), a.matrix());
    linalg::hermitize(&mut k);
    linalg::exp_hermitian(&k, C64::new(0.0, -1.0))
}

/// Displacement operator `D(α)`, the exact exponential of the truncated
/// generator. Rejects amplitudes whose coherent state `D(α)|0⟩` leaks into
/// the top Fock levels.
pub fn displacement(alpha: C64, levels: usize) -> Result<Operator> {
    let m = displacement_matrix(alpha, levels)?;
    let op = Operator::from_parts(SpaceLabel::fock(BOSON, levels)?, m);
    let vac = op.apply(&fock_state(levels, 0)?)?;
    let norm_dev = (vac.norm() - 1.0).abs();
    if norm_dev > LEAKAGE_LIMIT {
        return Err(Error::Leakage {
            factor: BOSON.to_owned(),
            population: norm_dev,
            limit: LEAKAGE_LIMIT,
        });
    }
    vac.check_leakage()?;
    Ok(op)
}

/// Coherent state `|α⟩ = D(α)|0⟩`.
pub fn coherent_state(alpha: C64, levels: usize) -> Result<StateVector> {
    displacement(alpha, levels)?.apply(&fock_state(levels, 0)?)
}

/// Reduced state on the factors named in `keep` (kept in space order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::param("keep", "at least one factor must be kept"));
    }
    let space = rho.space();
    let mut kept = vec![false; space.factors().len()];
    for name in keep {
        let pos = space
            .position(name)
            .ok_or_else(|| Error::UnknownFactor((*name).to_owned()))?;
        kept[pos] = true;
    }
    let kept_space = SpaceLabel {
        factors: space
            .factors()
            .iter()
            .zip(&kept)
            .filter(|(_, k)| **k)
            .map(|(f, _)| f.clone())
            .collect(),
    };
    let dk = kept_space.dim();
    let dt = space.dim() / dk;

    // full index → (kept index, traced index)
    let d = space.dim();
    let mut by_traced: Vec<Vec<usize>> = vec![vec![0; dk]; dt];
    for i in 0..d {
        let digits = space.digits(i);
        let (mut ik, mut it) = (0usize, 0usize);
        for ((digit, f), k) in digits.iter().zip(space.factors()).zip(&kept) {
            if *k {
                ik = ik * f.dim + digit;
            } else {
                it = it * f.dim + digit;
            }
        }
        by_traced[it][ik] = i;
    }

    let m = rho.matrix();
    let mut out = linalg::zeros(dk, dk);
    for idx in &by_traced {
        for (c, &fc) in idx.iter().enumerate() {
            for (r, &fr) in idx.iter().enumerate() {
                out[(r, c)] += m[(fr, fc)];
            }
        }
    }
    Ok(DensityMatrix {
        space: kept_space,
        matrix: out,
    })
}

//! Displacement sensing with the hybrid-qubit probe: quantum Fisher
//! information of pure and idled mixed probes, and the Ramsey protocol.

use alloc::vec::Vec;

use crate::code::HybridCode;
use crate::linalg;
use crate::liouville::{error_liouvillian, recovery_jump, Liouvillian, NoiseParams};
use crate::propagate::{evolve, semigroup_deviation, ConservationStats, EvolveOptions};
use crate::qspace::{
    coherent_state, default_truncation, displacement, fock_create, fock_destroy, fock_state, pauli, spin_basis,
    DensityMatrix, Operator, PauliAxis, SpaceLabel, StateVector, BOSON, SPIN,
};
use crate::{math, Error, Result, C64};

/// Eigenvalue-pair cutoff of the spectral QFI.
pub const QFI_CUTOFF: f64 = 1e-10;

/// Displacement variance bound without entanglement.
pub const SQL: f64 = 0.25;

fn require_hermitian(h: &Operator) -> Result<()> {
    let dev = h.hermiticity_deviation();
    if dev > 1e-10 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// `4 (⟨H²⟩ − ⟨H⟩²)`.
pub fn qfi_pure(psi: &StateVector, h: &Operator) -> Result<f64> {
    require_hermitian(h)?;
    let psi = psi.normalized()?;
    let hpsi = h.apply(&psi)?;
    let mean = psi.inner(&hpsi)?.re;
    let second = hpsi.norm();
    Ok((4.0 * (second * second - mean * mean)).max(0.0))
}

/// Spectral form `2 Σ |⟨k|H|l⟩|² (λ_k − λ_l)² / (λ_k + λ_l)`, skipping pairs
/// with `λ_k + λ_l ≤ 1e-10` and clipping negative eigenvalues to zero.
pub fn qfi_mixed(rho: &DensityMatrix, h: &Operator) -> Result<f64> {
    require_hermitian(h)?;
    rho.space().require_same(h.space())?;
    let mut m = rho.matrix().clone();
    linalg::hermitize(&mut m);
    let (lam, vecs) = linalg::hermitian_eigen(&m)?;
    let lam: Vec<f64> = lam.iter().map(|x| x.max(0.0)).collect();
    let hv = linalg::mul(h.matrix(), &vecs);
    let n = lam.len();
    let mut total = 0.0;
    for k in 0..n {
        for l in 0..n {
            let s = lam[k] + lam[l];
            if s <= QFI_CUTOFF {
                continue;
            }
            let d = lam[k] - lam[l];
            if d == 0.0 {
                continue;
            }
            let mut hkl = C64::new(0.0, 0.0);
            for r in 0..n {
                hkl += vecs[(r, k)].conj() * hv[(r, l)];
            }
            total += hkl.norm_sqr() * d * d / s;
        }
    }
    Ok(2.0 * total)
}

/// Signal generator `â + â†` on `spin ⊗ boson(levels)`.
pub fn quadrature_generator(levels: usize) -> Result<Operator> {
    let space = SpaceLabel::spin_boson(levels)?;
    fock_destroy(levels)?.add(&fock_create(levels)?)?.lift(&space, BOSON)
}

/// Probe `|0⟩_L` at amplitude `alpha`; at `alpha = 0` this is the bare
/// product `|0⟩_s ⊗ |0⟩_b`.
pub fn probe_state(alpha: f64, levels: usize) -> Result<StateVector> {
    if alpha == 0.0 {
        return Ok(spin_basis(0)?.tensor(&fock_state(levels, 0)?));
    }
    Ok(HybridCode::with_truncation(alpha, levels)?.logical_zero())
}

/// The delta-kick signal `e^{−iβ(â + â†)}` applied to `rho`.
pub fn signal_kick(rho: &DensityMatrix, beta: f64) -> Result<DensityMatrix> {
    let levels = rho.space().require_spin_boson()?;
    let u = quadrature_generator(levels)?.exp_hermitian(C64::new(0.0, -beta))?;
    rho.conjugate_by(&u)
}

/// Idle window before the signal arrives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensingScenario {
    pub t_window: f64,
    pub recovery_on: bool,
    /// Error model; `kappa_r` is used only when `recovery_on`.
    pub noise: NoiseParams,
    pub beta: f64,
}

impl SensingScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_window.is_finite() && self.t_window >= 0.0) {
            return Err(Error::param("t_window", "must be finite and ≥ 0"));
        }
        self.noise.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QcrbResult {
    pub alpha: f64,
    pub qfi: f64,
    pub qcrb: f64,
    pub conservation: ConservationStats,
    /// Semigroup restart deviation at `t_window/2`, when the window is nonzero.
    pub restart_deviation: Option<f64>,
}

fn probe_levels(alpha: f64) -> usize {
    default_truncation(alpha)
}

/// Idles `|0⟩_L⟨0|` for `t_window` under the error model (plus `κ_R D[R]`
/// when recovery is on) and returns the QCRB `1/QFI` for the quadrature
/// generator. At `alpha = 0` no recovery term exists and the bare probe
/// idles under noise alone.
pub fn idle_then_qcrb(alpha: f64, scenario: &SensingScenario, opts: &EvolveOptions) -> Result<QcrbResult> {
    scenario.validate()?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::param("alpha", "must be finite and ≥ 0"));
    }
    let levels = probe_levels(alpha);
    let space = SpaceLabel::spin_boson(levels)?;
    let rho0 = probe_state(alpha, levels)?.projector();
    let mut l = error_liouvillian(&scenario.noise, &space)?;
    if scenario.recovery_on && alpha > 0.0 {
        l = l.add(&Liouvillian::zero(&space).with_jump(scenario.noise.kappa_r, &recovery_jump(alpha, &space)?)?)?;
    }
    let mut conservation = ConservationStats::default();
    let (rho, restart_deviation) = if scenario.t_window > 0.0 {
        let rho = evolve(&l, &rho0, scenario.t_window, opts)?;
        conservation.observe(&rho)?;
        let t2 = scenario.t_window;
        let dev = semigroup_deviation(&l, &rho0, 0.5 * t2, t2, opts)?;
        (rho, Some(dev))
    } else {
        (rho0, None)
    };
    let qfi = qfi_mixed(&rho, &quadrature_generator(levels)?)?;
    Ok(QcrbResult {
        alpha,
        qfi,
        qcrb: if qfi > 0.0 { 1.0 / qfi } else { f64::INFINITY },
        conservation,
        restart_deviation,
    })
}

/// `(α, QCRB, QCRB < 1/4)` for each amplitude.
pub fn sub_sql_region(
    scenario: &SensingScenario,
    alphas: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<(f64, f64, bool)>> {
    alphas
        .iter()
        .map(|&a| {
            let r = idle_then_qcrb(a, scenario, opts)?;
            Ok((a, r.qcrb, r.qcrb < SQL))
        })
        .collect()
}

/// Ramsey preparation drive; the probe amplitude is `α = g_prep τ / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RamseyConfig {
    pub g_prep: f64,
    pub tau: f64,
}

impl RamseyConfig {
    pub fn new(g_prep: f64, tau: f64) -> Result<Self> {
        if !(g_prep.is_finite() && tau.is_finite() && tau > 0.0) {
            return Err(Error::param("tau", "need finite g_prep and tau > 0"));
        }
        Ok(RamseyConfig { g_prep, tau })
    }

    /// Unit-duration drive reaching amplitude `alpha`.
    pub fn from_alpha(alpha: f64) -> Self {
        RamseyConfig {
            g_prep: 2.0 * alpha,
            tau: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        0.5 * self.g_prep * self.tau
    }

    /// Fock truncation for a signal of size `beta`.
    pub fn levels(&self, beta: f64) -> usize {
        default_truncation(self.alpha().abs() + beta.abs())
    }

    /// `H_prep = i g_prep J_x (â − â†)`, with `J_x = σ_x/2`.
    ///
    /// The ordering `(â − â†)` makes `e^{iH_prep τ} = D(2αJ_x)`, which is the
    /// identity the closed-form final state relies on; the opposite ordering
    /// would give `D(−2αJ_x)`. The prepared probe is therefore `U_CD(−α)|0⟩|0⟩`.
    pub fn hamiltonian(&self, levels: usize) -> Result<Operator> {
        let space = SpaceLabel::spin_boson(levels)?;
        let jx = pauli(PauliAxis::X).scale(C64::new(0.5, 0.0)).lift(&space, SPIN)?;
        let a = fock_destroy(levels)?;
        let quad = a.sub(&a.adjoint())?.lift(&space, BOSON)?;
        Ok(jx.mul(&quad)?.scale(C64::new(0.0, self.g_prep)))
    }
}

/// `e^{iH_prep τ} D(iβ) e^{−iH_prep τ} |0⟩_s|0⟩_b`, built from matrices.
///
/// The signal is `D(iβ) = e^{iβ(â + â†)}`, i.e. the kick `e^{−iβ'(â + â†)}`
/// with `β' = −β`; this is the sign under which the closed form holds.
pub fn ramsey_final_state(cfg: &RamseyConfig, beta: f64) -> Result<StateVector> {
    let levels = cfg.levels(beta);
    let h = cfg.hamiltonian(levels)?;
    let fwd = h.exp_hermitian(C64::new(0.0, -cfg.tau))?;
    let back = h.exp_hermitian(C64::new(0.0, cfg.tau))?;
    let space = h.space().clone();
    let kick = displacement(C64::new(0.0, beta), levels)?.lift(&space, BOSON)?;
    let psi0 = spin_basis(0)?.tensor(&fock_state(levels, 0)?);
    let out = back.apply(&kick.apply(&fwd.apply(&psi0)?)?)?;
    out.check_leakage()?;
    Ok(out)
}

/// `(cos 2αβ |0⟩ − i sin 2αβ |1⟩) ⊗ |iβ⟩`.
pub fn ramsey_closed_form(alpha: f64, beta: f64, levels: usize) -> Result<StateVector> {
    let phase = 2.0 * alpha * beta;
    let spin = StateVector::new(
        SpaceLabel::spin(SPIN),
        alloc::vec![C64::new(math::cos(phase), 0.0), C64::new(0.0, -math::sin(phase))],
    )?;
    Ok(spin.tensor(&coherent_state(C64::new(0.0, beta), levels)?))
}

/// `|⟨J_y⟩| / ΔJ_y` on the Ramsey final state; equals `|tan 4αβ|`.
pub fn ramsey_snr(cfg: &RamseyConfig, beta: f64) -> Result<f64> {
    let phase = 4.0 * cfg.alpha() * beta;
    if math::cos(phase).abs() < 1e-6 {
        return Err(Error::Divergence { phase });
    }
    let psi = ramsey_final_state(cfg, beta)?;
    let jy = pauli(PauliAxis::Y).scale(C64::new(0.5, 0.0)).lift(psi.space(), SPIN)?;
    let jpsi = jy.apply(&psi)?;
    let mean = psi.inner(&jpsi)?.re;
    let var = jpsi.norm() * jpsi.norm() - mean * mean;
    if var <= 0.0 {
        return Err(Error::Divergence { phase });
    }
    Ok(mean.abs() / math::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn probe_qfi() {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let levels = default_truncation(alpha);
            let q = qfi_pure(&probe_state(alpha, levels).unwrap(), &quadrature_generator(levels).unwrap()).unwrap();
            assert_abs_diff_eq!(q, 16.0 * alpha * alpha + 4.0, epsilon = 1e-6);
        }
        let q0 = qfi_pure(&probe_state(0.0, 16).unwrap(), &quadrature_generator(16).unwrap()).unwrap();
        assert_abs_diff_eq!(q0, 4.0, epsilon = 1e-12);
        let z = pauli(PauliAxis::Z);
        assert_abs_diff_eq!(qfi_pure(&spin_basis(0).unwrap(), &z).unwrap(), 0.0);
        let not_h = Operator::new(SpaceLabel::spin(SPIN), fock_destroy(2).unwrap().into_matrix()).unwrap();
        assert!(qfi_pure(&spin_basis(0).unwrap(), &not_h).is_err());
    }

    #[test]
    fn mixed_qfi_reduces() {
        let levels = 22;
        let psi = probe_state(1.0, levels).unwrap();
        let h = quadrature_generator(levels).unwrap();
        let pure = qfi_pure(&psi, &h).unwrap();
        assert_abs_diff_eq!(qfi_mixed(&psi.projector(), &h).unwrap(), pure, epsilon = 1e-6);
        let mm = DensityMatrix::maximally_mixed(&SpaceLabel::spin(SPIN));
        assert_abs_diff_eq!(qfi_mixed(&mm, &pauli(PauliAxis::Z)).unwrap(), 0.0);
        let mut shifted = h.matrix().clone();
        linalg::add_identity(&mut shifted, 3.7);
        let shifted = Operator::new(h.space().clone(), shifted).unwrap();
        assert_abs_diff_eq!(
            qfi_mixed(&psi.projector(), &shifted).unwrap(),
            qfi_mixed(&psi.projector(), &h).unwrap(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn zero_window_and_zero_noise() {
        let s = SensingScenario {
            t_window: 0.0,
            recovery_on: true,
            noise: NoiseParams::recovery_only(1.0),
            beta: 0.0,
        };
        let r = idle_then_qcrb(1.5, &s, &EvolveOptions::default()).unwrap();
        assert_abs_diff_eq!(r.qcrb, 1.0 / (16.0 * 2.25 + 4.0), epsilon = 1e-9);
        let later = idle_then_qcrb(1.5, &SensingScenario { t_window: 3.0, ..s }, &EvolveOptions::default()).unwrap();
        assert_abs_diff_eq!(later.qcrb, r.qcrb, epsilon = 1e-8);
        let bare = idle_then_qcrb(0.0, &s, &EvolveOptions::default()).unwrap();
        assert_abs_diff_eq!(bare.qcrb, SQL, epsilon = 1e-12);
        let region = sub_sql_region(&s, &[0.0, 1.0], &EvolveOptions::default()).unwrap();
        assert!(!region[0].2 && region[1].2);
    }

    #[test]
    fn prep_unitary_is_controlled_displacement() {
        let cfg = RamseyConfig::new(2.6, 0.5).unwrap();
        let levels = 24;
        let h = cfg.hamiltonian(levels).unwrap();
        let u = h.exp_hermitian(C64::new(0.0, cfg.tau)).unwrap();
        let code = HybridCode::with_truncation(cfg.alpha(), levels).unwrap();
        assert!(u.distance(code.u_cd()).unwrap() < 1e-10);
    }

    #[test]
    fn ramsey_examples() {
        let cfg = RamseyConfig::from_alpha(1.0);
        let psi = ramsey_final_state(&cfg, 0.0).unwrap();
        let vac = spin_basis(0).unwrap().tensor(&fock_state(psi.space().factors()[1].dim, 0).unwrap());
        assert!(psi.fidelity(&vac).unwrap() > 1.0 - 1e-12);

        let beta = 0.1;
        let psi = ramsey_final_state(&cfg, beta).unwrap();
        let levels = cfg.levels(beta);
        assert!(psi.fidelity(&ramsey_closed_form(1.0, beta, levels).unwrap()).unwrap() >= 1.0 - 1e-8);
        let p1 = pauli(PauliAxis::Z).lift(psi.space(), SPIN).unwrap().expect(&psi).unwrap().re;
        assert_abs_diff_eq!(0.5 * (1.0 + p1), math::cos(0.2).powi(2), epsilon = 1e-8);
        let n = crate::qspace::number(levels).unwrap().lift(psi.space(), BOSON).unwrap();
        assert_abs_diff_eq!(n.expect(&psi).unwrap().re, beta * beta, epsilon = 1e-8);

        assert_abs_diff_eq!(ramsey_snr(&cfg, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        let snr = ramsey_snr(&cfg, core::f64::consts::PI / 16.0).unwrap();
        assert_abs_diff_eq!(snr, 1.0, epsilon = 1e-6);
        let small = ramsey_snr(&cfg, 0.05 / 4.0).unwrap();
        assert!((0.99..=1.01).contains(&(small / 0.05)));
        assert!(matches!(ramsey_snr(&cfg, core::f64::consts::PI / 8.0), Err(Error::Divergence { .. })));
    }
}

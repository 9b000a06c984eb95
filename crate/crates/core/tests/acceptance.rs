//! Acceptance suite: twelve end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed; the
//! process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use autoqec_core::analysis::{
    gamma_analytic, gamma_numeric, jump_action_check, jump_levels, r_squared_residual, AnsatzState, Direction,
    JumpBasis,
};
use autoqec_core::code::{extract_rate, logical_error_rates, Basis, HybridCode, RateOptions};
use autoqec_core::concat::{platform_table, repetition_probs, NoisePoint, Platform};
use autoqec_core::liouville::{
    dissipator, recovery_jump, superoperator_commutator_ratio, two_mode_liouvillian, BathParams, NoiseParams,
    DEFAULT_BATH_LEVELS,
};
use autoqec_core::math;
use autoqec_core::metrology::{
    idle_then_qcrb, probe_state, quadrature_generator, qfi_pure, ramsey_closed_form, ramsey_final_state, ramsey_snr,
    RamseyConfig, SensingScenario,
};
use autoqec_core::propagate::{evolve_series, semigroup_deviation, ConservationStats, EvolveOptions, TimeSeries};
use autoqec_core::qspace::{
    default_truncation, fock_state, pauli, spin_plus, DensityMatrix, PauliAxis, SpaceLabel, StateVector, BATH, SPIN,
};
use autoqec_core::{analysis, Mat, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESTART_TOL: f64 = 1e-7;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl AsRef<str>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(what.as_ref());
        if !ok {
            self.detail.push_str(" [x]");
            self.pass = false;
        }
    }
}

/// Evolution records gathered for the conservation criterion.
#[derive(Default)]
struct Ledger {
    entries: Vec<(String, ConservationStats, f64)>,
}

impl Ledger {
    fn add(&mut self, name: impl Into<String>, stats: ConservationStats, restart: f64) {
        self.entries.push((name.into(), stats, restart));
    }
}

fn random_code_density(code: &HybridCode, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g: Vec<C64> = (0..4)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    // c = G G† / tr
    let mut c = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                c[i][j] += g[2 * i + k] * g[2 * j + k].conj();
            }
        }
    }
    let tr = c[0][0].re + c[1][1].re;
    let basis = [code.logical_plus().amplitudes(), code.logical_minus().amplitudes()];
    let d = code.space().dim();
    let m = Mat::from_fn(d, d, |r, s| {
        let mut z = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                z += c[a][b] * basis[a][r] * basis[b][s].conj();
            }
        }
        z / tr
    });
    DensityMatrix::new(code.space().clone(), m).expect("valid code-space density")
}

fn random_code_state(code: &HybridCode, rng: &mut ChaCha8Rng) -> StateVector {
    let a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let b = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    code.logical_plus()
        .scale(a)
        .add(&code.logical_minus().scale(b))
        .unwrap()
        .normalized()
        .unwrap()
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (slope, intercept, 1.0 - ss_res / ss_tot)
}

fn c1_stationarity() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let kappa = 2.5;
    for alpha in [1.0, 1.5, 2.0] {
        let code = HybridCode::new(alpha).unwrap();
        let l = dissipator(&recovery_jump(alpha, code.space()).unwrap()).scale(kappa).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let rho = random_code_density(&code, &mut rng);
            worst = worst.max(l.apply(&rho).unwrap().frobenius_norm());
        }
        let bound = 1e-9 * kappa * alpha * alpha;
        o.check(worst <= bound, format!("α={alpha}: {worst:.2e} ≤ {bound:.1e}"));
    }
    o
}

fn c2_phase_flip_identity() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for alpha in [1.0, 1.5, 2.0] {
        let code = HybridCode::new(alpha).unwrap();
        let r = recovery_jump(alpha, code.space()).unwrap();
        let sz = pauli(PauliAxis::Z).lift(code.space(), SPIN).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let psi = random_code_state(&code, &mut rng);
            let out = r.apply(&sz.apply(&psi).unwrap()).unwrap();
            let res = out.sub(&psi.scale(C64::new(2.0 * alpha, 0.0))).unwrap().norm();
            worst = worst.max(res);
        }
        o.check(worst <= 1e-9 * alpha, format!("α={alpha}: {worst:.2e}"));
    }
    o
}

fn c3_no_jump_rate() -> Outcome {
    let mut o = Outcome::new();
    let alpha: f64 = 1.5;
    let levels = 48;
    let closed = |br: f64, bi: f64, sx: f64| alpha * alpha - 2.0 * alpha * br * sx + br * br + bi * bi;
    let mut worst: f64 = 0.0;
    let mut points = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            points.push((-2.0 + i as f64, 0.0, -1.0 + 0.5 * j as f64));
        }
    }
    points.extend([(0.5, 0.5, 0.3), (-1.0, 0.8, -0.6), (1.5, -0.4, 1.0), (0.0, 1.2, 0.0), (2.0, -1.0, -0.9)]);
    for &(br, bi, sx) in &points {
        let st = AnsatzState::new(C64::new(br, bi), sx).unwrap();
        let g = gamma_numeric(alpha, 1.0, &st.state(levels).unwrap()).unwrap();
        worst = worst.max((g - closed(br, bi, sx)).abs());
        worst = worst.max((gamma_analytic(alpha, &st) - closed(br, bi, sx)).abs());
    }
    o.check(worst <= 1e-8, format!("{} points, max |Δ| = {worst:.2e}", points.len()));
    o
}

fn c4_jump_algebra() -> Outcome {
    let mut o = Outcome::new();
    for alpha in [1.0, 2.0] {
        let rep = jump_action_check(alpha, 5).unwrap();
        let six = ["spin:σx", "spin:σz", "R:fwd", "R:bwd", "R†:fwd", "R†:bwd"]
            .iter()
            .map(|p| rep.max_residual_of(p))
            .fold(0.0, f64::max);
        o.check(six <= 1e-8, format!("α={alpha}: jump identities {six:.1e}"));
        let ladder = rep.max_residual_of("boson:");
        o.check(ladder <= 1e-8, format!("ladder {ladder:.1e}"));
        let r2 = r_squared_residual(alpha, default_truncation(alpha))
            .unwrap()
            .max(r_squared_residual(alpha, rep.levels).unwrap());
        o.check(r2 <= 1e-12, format!("R² {r2:.1e}"));
        let basis = JumpBasis::new(alpha, jump_levels(alpha, 5)).unwrap();
        let mut gram: f64 = 0.0;
        let mut complete: f64 = 0.0;
        for dir in [Direction::Forward, Direction::Backward] {
            gram = gram.max(basis.gram_residual(dir, 5).unwrap());
            complete = complete.max(basis.completeness_residual(dir).unwrap());
        }
        o.check(gram <= 1e-8 && complete <= 1e-8, format!("gram {gram:.1e}, completeness {complete:.1e}"));
    }
    o
}

fn c5_rate_extraction() -> Outcome {
    let mut o = Outcome::new();
    let kappa = 0.37;
    let l = dissipator(&pauli(PauliAxis::Z)).scale(kappa).unwrap();
    let plus = spin_plus();
    let proj = DensityMatrix::from_pure(&plus);
    let proj = autoqec_core::qspace::Operator::new(proj.space().clone(), proj.matrix().clone()).unwrap();
    let times: Vec<f64> = (1..=25).map(|k| 0.04 * k as f64).collect();
    let series = evolve_series(&l, &plus.projector(), &times, &[("p0", &proj)], &EvolveOptions::default()).unwrap();
    let fit = extract_rate(&series).unwrap();
    let rel = (fit.gamma - kappa).abs() / kappa;
    o.check(rel <= 1e-4, format!("dephasing oracle rel {rel:.1e}"));

    let gamma = 2.3e-3;
    let t: Vec<f64> = (1..=40).map(|k| 5.0 * k as f64).collect();
    let p: Vec<f64> = t.iter().map(|x| 0.5 * (1.0 + (-2.0 * gamma * x).exp())).collect();
    let fit = extract_rate(&TimeSeries::from_real("p0", &t, &p).unwrap()).unwrap();
    let rel = (fit.gamma - gamma).abs() / gamma;
    o.check(rel <= 1e-6, format!("synthetic rel {rel:.1e}"));
    o
}

fn c6_bit_error_scaling(ledger: &mut Ledger) -> Outcome {
    let mut o = Outcome::new();
    let opts = RateOptions {
        stop_on: Some(Basis::Z),
        ..Default::default()
    };
    let loss = NoiseParams {
        kappa_th: 0.01,
        kappa_r: 1.0,
        ..Default::default()
    };
    let a2: Vec<f64> = (1..=6).map(|k| k as f64).collect();
    let mut gx = Vec::new();
    for &x in &a2 {
        let r = logical_error_rates(&HybridCode::new(x.sqrt()).unwrap(), &loss, &opts).unwrap();
        ledger.add(format!("c6 loss α²={x}"), r.conservation, r.restart.map_or(0.0, |c| c.deviation));
        gx.push(r.gamma_x.gamma);
    }
    let (slope, _, r2) = linear_fit(&a2, &gx);
    o.check(r2 >= 0.99 && slope > 0.0, format!("loss: slope {slope:.3e}, R² {r2:.6}"));

    let flip = NoiseParams {
        kappa_sx: 0.01,
        kappa_r: 1.0,
        ..Default::default()
    };
    let mut rates = Vec::new();
    for alpha in [1.0, 1.5, 2.0, 6f64.sqrt()] {
        let r = logical_error_rates(&HybridCode::new(alpha).unwrap(), &flip, &opts).unwrap();
        ledger.add(format!("c6 σx α={alpha:.3}"), r.conservation, r.restart.map_or(0.0, |c| c.deviation));
        rates.push(r.gamma_x.gamma);
    }
    let worst = rates.iter().map(|g| (g / flip.kappa_sx - 1.0).abs()).fold(0.0, f64::max);
    o.check(worst <= 1e-3, format!("σx: max |γ_X/κ_sx − 1| {worst:.1e}"));
    o
}

fn c7_phase_suppression(ledger: &mut Ledger) -> Outcome {
    let mut o = Outcome::new();
    let noise = platform_table(Platform::Superconducting).noise(&NoisePoint::default());
    let alphas = [1.0, 1.5, 2.0];
    let mut gz = Vec::new();
    let mut decoded_ok = true;
    for &alpha in &alphas {
        let r = logical_error_rates(&HybridCode::new(alpha).unwrap(), &noise, &RateOptions::expm()).unwrap();
        let restart = r.restart.expect("restart check requested");
        ledger.add(format!("c7 α={alpha}"), r.conservation, restart.deviation);
        let raw = r.x_series.real_column("raw_error").unwrap();
        let dec = r.x_series.real_column("decoded_error").unwrap();
        let ok = raw.iter().zip(&dec).all(|(a, b)| *b <= a + 1e-12);
        decoded_ok &= ok;
        let last = raw.len() - 1;
        o.check(
            ok,
            format!(
                "α={alpha}: γ_Z {:.3e}/s, raw {:.2e} ≥ decoded {:.2e}",
                r.gamma_z.gamma, raw[last], dec[last]
            ),
        );
        gz.push(r.gamma_z.gamma);
    }
    let monotone = gz.windows(2).all(|w| w[1] < w[0]);
    let x: Vec<f64> = alphas.iter().map(|a| a * a).collect();
    let y: Vec<f64> = gz.iter().map(|g| g.ln()).collect();
    let (slope, _, _) = linear_fit(&x, &y);
    o.check(monotone && slope < 0.0 && decoded_ok, format!("ln γ_Z slope {slope:.3}"));
    o
}

fn c8_commutation() -> Outcome {
    let mut o = Outcome::new();
    for alpha in [0.5, 1.0, 2.0] {
        let space = SpaceLabel::spin_boson(default_truncation(alpha)).unwrap();
        let a = dissipator(&pauli(PauliAxis::X).lift(&space, SPIN).unwrap());
        let b = dissipator(&recovery_jump(alpha, &space).unwrap());
        let ratio = superoperator_commutator_ratio(&a, &b).unwrap();
        o.check(ratio <= 1e-10, format!("α={alpha}: {ratio:.1e}"));
    }
    o
}

fn enumerate(q_x: f64, q_z: f64, d: usize) -> (f64, f64) {
    let (mut px, mut pz) = (0.0, 0.0);
    for mask in 0u32..(1 << d) {
        let w: Vec<bool> = (0..d).map(|b| mask >> b & 1 == 1).collect();
        let k = w.iter().filter(|x| **x).count();
        let wx: f64 = w.iter().map(|&e| if e { q_x } else { 1.0 - q_x }).product();
        let wz: f64 = w.iter().map(|&e| if e { q_z } else { 1.0 - q_z }).product();
        if 2 * k > d {
            px += wx;
        }
        if k % 2 == 1 {
            pz += wz;
        }
    }
    (px, pz)
}

fn c9_repetition() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut worst: f64 = 0.0;
    for d in [1, 3, 5] {
        for _ in 0..10 {
            let (qx, qz) = (rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5));
            let (px, pz) = repetition_probs(qx, qz, d).unwrap();
            let (ex, ez) = enumerate(qx, qz, d);
            worst = worst.max((px - ex).abs()).max((pz - ez).abs());
        }
    }
    o.check(worst <= 1e-12, format!("enumeration {worst:.1e}"));
    let q = 1e-3;
    for d in [3, 5] {
        let (px, pz) = repetition_probs(q, q, d).unwrap();
        let h = d.div_ceil(2);
        let rz = pz / (d as f64 * q);
        let rx = px / (math::binomial(d as u32, h as u32) * q.powi(h as i32));
        o.check(
            (rz - 1.0).abs() <= 0.2 && (rx - 1.0).abs() <= 0.2,
            format!("d={d}: P_Z/dq {rz:.3}, P_X/Cq^h {rx:.3}"),
        );
    }
    o
}

fn c10_adiabatic(ledger: &mut Ledger) -> Outcome {
    let mut o = Outcome::new();
    let alpha = 1.0;
    let code = HybridCode::new(alpha).unwrap();
    let sz = pauli(PauliAxis::Z).lift(code.space(), SPIN).unwrap();
    let rho0 = code.logical_plus().projector().conjugate_by(&sz).unwrap();
    let opts = EvolveOptions::default();
    let mut dists = Vec::new();
    for ratio in [0.05, 0.025] {
        // κ_R = 4g²/γ_b = 1 at every ratio
        let gamma_b = 1.0 / (4.0 * ratio * ratio);
        let bath = BathParams::new(ratio * gamma_b, gamma_b, DEFAULT_BATH_LEVELS).unwrap();
        let t = 5.0 / bath.effective_kappa_r();
        let c = analysis::adiabatic_elimination_compare(alpha, &bath, &rho0, t, 10, &opts).unwrap();

        let space3 = SpaceLabel::spin_boson_bath(code.levels(), bath.bath_levels).unwrap();
        let l = two_mode_liouvillian(alpha, &bath, &space3).unwrap();
        let vac = StateVector::new(
            SpaceLabel::fock(BATH, bath.bath_levels).unwrap(),
            fock_state(bath.bath_levels, 0).unwrap().amplitudes().to_vec(),
        )
        .unwrap();
        let full0 = DensityMatrix::new(space3, rho0.tensor(&vac.projector()).into_matrix()).unwrap();
        let dev = semigroup_deviation(&l, &full0, 0.25, 0.5, &opts).unwrap();
        ledger.add(format!("c10 g/γ_b={ratio}"), c.conservation, dev);
        o.check(
            c.warning.is_none(),
            format!("g/γ_b={ratio}: max trace distance {:.3e}", c.max_distance),
        );
        dists.push(c.max_distance);
    }
    o.check(dists[0] <= 0.05, "≤ 0.05 at g/γ_b = 0.05");
    o.check(dists[1] < dists[0], "improves at g/γ_b = 0.025");
    o
}

fn c11_metrology(ledger: &mut Ledger) -> Outcome {
    let mut o = Outcome::new();
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 1.0, 1.5, 2.0] {
        let levels = default_truncation(alpha);
        let q = qfi_pure(&probe_state(alpha, levels).unwrap(), &quadrature_generator(levels).unwrap()).unwrap();
        worst = worst.max((q - (16.0 * alpha * alpha + 4.0)).abs());
    }
    o.check(worst <= 1e-6, format!("QFI of |0⟩_L: {worst:.1e}"));

    let idle = SensingScenario {
        t_window: 0.0,
        recovery_on: false,
        noise: NoiseParams::default(),
        beta: 0.0,
    };
    let bare = idle_then_qcrb(0.0, &idle, &EvolveOptions::default()).unwrap();
    o.check((bare.qcrb - 0.25).abs() <= 1e-12, format!("α=0 QCRB {:.6}", bare.qcrb));

    let mut fid: f64 = 1.0;
    let mut snr_err: f64 = 0.0;
    for alpha in [0.5, 1.0, 1.5] {
        for beta in [0.05, 0.1, 0.2] {
            let cfg = RamseyConfig::from_alpha(alpha);
            let psi = ramsey_final_state(&cfg, beta).unwrap();
            let closed = ramsey_closed_form(alpha, beta, cfg.levels(beta)).unwrap();
            fid = fid.min(psi.fidelity(&closed).unwrap());
            let snr = ramsey_snr(&cfg, beta).unwrap();
            snr_err = snr_err.max((snr - (4.0 * alpha * beta).tan()).abs());
        }
    }
    o.check(fid >= 1.0 - 1e-8, format!("Ramsey fidelity {:.1e} from 1", 1.0 - fid));
    o.check(snr_err <= 1e-6, format!("SNR vs tan 4αβ {snr_err:.1e}"));

    let noise = platform_table(Platform::TrappedIon).noise(&NoisePoint::default());
    let mut qcrb = Vec::new();
    for on in [true, false] {
        let s = SensingScenario {
            t_window: 1e-3,
            recovery_on: on,
            noise,
            beta: 0.0,
        };
        let r = idle_then_qcrb(1.5, &s, &EvolveOptions::default()).unwrap();
        ledger.add(format!("c11 recovery_on={on}"), r.conservation, r.restart_deviation.unwrap_or(0.0));
        qcrb.push(r.qcrb);
    }
    o.check(
        qcrb[0] <= qcrb[1],
        format!("QCRB on {:.5e} ≤ off {:.5e}", qcrb[0], qcrb[1]),
    );
    o
}

fn c12_conservation(ledger: &Ledger) -> Outcome {
    let mut o = Outcome::new();
    let mut samples = 0;
    let mut trace: f64 = 0.0;
    let mut herm: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut restart: f64 = 0.0;
    for (name, s, dev) in &ledger.entries {
        samples += s.samples;
        trace = trace.max(s.max_trace_deviation);
        herm = herm.max(s.max_hermiticity);
        min_eig = min_eig.min(s.min_eigenvalue);
        restart = restart.max(*dev);
        if !s.within_bounds() || *dev > RESTART_TOL {
            o.check(false, format!("{name} out of bounds"));
        }
    }
    o.check(
        !ledger.entries.is_empty()
            && trace <= 1e-8
            && herm <= 1e-8
            && min_eig >= -1e-6
            && restart <= RESTART_TOL,
        format!(
            "{} evolutions, {samples} states: trace {trace:.1e}, hermiticity {herm:.1e}, min eig {min_eig:.1e}, restart {restart:.1e}",
            ledger.entries.len()
        ),
    );
    o
}

fn main() {
    let mut ledger = Ledger::default();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut out = f();
        let took = start.elapsed();
        out.check(took <= limit, format!("{:.1}s of {}s", took.as_secs_f64(), limit.as_secs()));
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {:<34} {}  {}",
            name,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    };
    let secs = Duration::from_secs;
    report(1, "code-space stationarity", secs(10), &mut c1_stationarity);
    report(2, "phase-flip correction identity", secs(1), &mut c2_phase_flip_identity);
    report(3, "no-jump decay rate", secs(10), &mut c3_no_jump_rate);
    report(4, "jump algebra", secs(30), &mut c4_jump_algebra);
    report(5, "rate extraction", secs(10), &mut c5_rate_extraction);
    report(6, "bit-error scaling", secs(600), &mut || c6_bit_error_scaling(&mut ledger));
    report(7, "phase-error suppression", secs(1800), &mut || c7_phase_suppression(&mut ledger));
    report(8, "superoperator commutation", secs(60), &mut c8_commutation);
    report(9, "repetition code", secs(5), &mut c9_repetition);
    report(10, "adiabatic elimination", secs(600), &mut || c10_adiabatic(&mut ledger));
    report(11, "metrology", secs(600), &mut || c11_metrology(&mut ledger));
    report(12, "conservation", secs(60), &mut || c12_conservation(&ledger));
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}

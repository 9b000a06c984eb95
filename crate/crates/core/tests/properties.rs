use autoqec_core::analysis::{gamma_analytic, gamma_numeric, markov_graph, AnsatzState, Direction, JumpBasis};
use autoqec_core::code::HybridCode;
use autoqec_core::concat::{rate_to_round_prob, repetition_probs, round_prob_to_rate};
use autoqec_core::liouville::{error_liouvillian, recovery_liouvillian, NoiseParams};
use autoqec_core::metrology::{
    idle_then_qcrb, probe_state, qfi_mixed, qfi_pure, quadrature_generator, SensingScenario,
};
use autoqec_core::propagate::{evolve, EvolveOptions};
use autoqec_core::qspace::{coherent_state, default_truncation, spin_basis, DensityMatrix, Operator, StateVector};
use autoqec_core::C64;
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

fn spin_boson_state(theta: f64, phi: f64, z: C64, levels: usize) -> StateVector {
    let spin = spin_basis(0)
        .unwrap()
        .scale(C64::new((theta / 2.0).cos(), 0.0))
        .add(&spin_basis(1).unwrap().scale(C64::from_polar((theta / 2.0).sin(), phi)))
        .unwrap();
    spin.tensor(&coherent_state(z, levels).unwrap())
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn no_jump_rate_is_nonnegative(alpha in 0.1f64..3.0, br in -4.0f64..4.0, bi in -4.0f64..4.0, sx in -1.0f64..=1.0) {
        let s = AnsatzState::new(C64::new(br, bi), sx).unwrap();
        prop_assert!(gamma_analytic(alpha, &s) >= -1e-12);
    }

    #[test]
    fn no_jump_rate_is_even_under_joint_sign_flip(alpha in 0.1f64..3.0, br in -4.0f64..4.0, bi in -4.0f64..4.0, sx in -1.0f64..=1.0) {
        let a = gamma_analytic(alpha, &AnsatzState::new(C64::new(br, bi), sx).unwrap());
        let b = gamma_analytic(alpha, &AnsatzState::new(C64::new(-br, -bi), -sx).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    // Beyond γt ≈ 5 the probability saturates at ½ and the inverse loses digits.
    fn round_probability_round_trips(gamma in 0.0f64..5.0, t in 1e-3f64..1.0) {
        let q = rate_to_round_prob(gamma, t).unwrap();
        prop_assert!((0.0..0.5).contains(&q) || q == 0.0);
        let back = round_prob_to_rate(q, t).unwrap();
        prop_assert!((back - gamma).abs() <= 1e-9 * (1.0 + gamma));
    }

    #[test]
    fn repetition_probabilities_order_with_distance(q_x in 1e-4f64..0.49, q_z in 1e-4f64..0.49, k in 0usize..4) {
        let d = 2 * k + 1;
        let (px, pz) = repetition_probs(q_x, q_z, d).unwrap();
        let (px2, pz2) = repetition_probs(q_x, q_z, d + 2).unwrap();
        prop_assert!((0.0..=0.5).contains(&px) && (0.0..=0.5).contains(&pz));
        // Majority voting suppresses bit flips, parity accumulates phase flips.
        prop_assert!(px2 <= px + 1e-15);
        prop_assert!(pz2 >= pz - 1e-15);
    }
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn no_jump_rate_matches_the_jump_norm(alpha in 0.3f64..1.5, br in -1.5f64..1.5, sx in -1.0f64..=1.0) {
        let s = AnsatzState::new(C64::new(br, 0.0), sx).unwrap();
        let levels = default_truncation(alpha + br.abs());
        let g = gamma_numeric(alpha, 1.0, &s.state(levels).unwrap()).unwrap();
        prop_assert!((g - gamma_analytic(alpha, &s)).abs() <= 1e-8);
    }

    #[test]
    fn qfi_ignores_generator_offset(theta in 0.0f64..3.1, phi in 0.0f64..6.2, re in -1.0f64..1.0, im in -1.0f64..1.0, c in -3.0f64..3.0) {
        let levels = 24;
        let psi = spin_boson_state(theta, phi, C64::new(re, im), levels);
        let h = quadrature_generator(levels).unwrap();
        let shifted = h.add(&Operator::identity(psi.space()).scale(C64::new(c, 0.0))).unwrap();
        let a = qfi_pure(&psi, &h).unwrap();
        let b = qfi_pure(&psi, &shifted).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn mixed_qfi_reduces_to_pure_and_is_convex(t1 in 0.0f64..3.1, t2 in 0.0f64..3.1, z1 in -1.0f64..1.0, z2 in -1.0f64..1.0) {
        let levels = 20;
        let a = spin_boson_state(t1, 0.3, C64::new(z1, 0.2), levels);
        let b = spin_boson_state(t2, 1.1, C64::new(z2, -0.4), levels);
        let h = quadrature_generator(levels).unwrap();
        let (ra, rb) = (a.projector(), b.projector());
        let qa = qfi_mixed(&ra, &h).unwrap();
        let qb = qfi_mixed(&rb, &h).unwrap();
        prop_assert!((qa - qfi_pure(&a, &h).unwrap()).abs() <= 1e-6 * (1.0 + qa));
        let mix = DensityMatrix::mixture(&[(0.5, &ra), (0.5, &rb)]).unwrap();
        prop_assert!(qfi_mixed(&mix, &h).unwrap() <= 0.5 * (qa + qb) + 1e-6);
    }

    #[test]
    fn jump_bases_are_orthonormal(alpha in 0.2f64..2.5) {
        let basis = JumpBasis::new(alpha, default_truncation(alpha) + 20).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            prop_assert!(basis.gram_residual(dir, 4).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn recovery_jumps_flip_the_sign_label(alpha in 0.2f64..2.5, kappa in 0.1f64..5.0) {
        let g = markov_graph(alpha, kappa, 3).unwrap();
        for e in &g.edges {
            prop_assert_eq!(g.nodes[e.target].sign, g.nodes[e.source].sign.flip());
            prop_assert!(e.rate >= 0.0);
        }
        for (i, node) in g.nodes.iter().enumerate() {
            let n = node.n as f64;
            let want = match node.direction {
                Direction::Forward => n * kappa,
                Direction::Backward => (4.0 * alpha * alpha + n) * kappa,
            };
            prop_assert!((g.out_rate(i) - want).abs() <= 1e-6 * (1.0 + want), "node {:?}", node);
        }
    }
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn evolution_preserves_the_state_space(alpha in 0.5f64..1.5, k_th in 0.0f64..0.2, k_sz in 0.0f64..0.2, t in 0.1f64..2.0) {
        let code = HybridCode::new(alpha).unwrap();
        let noise = NoiseParams { kappa_th: k_th, n_th: 0.05, kappa_sz: k_sz, kappa_r: 1.0, ..Default::default() };
        let l = error_liouvillian(&noise, code.space()).unwrap()
            .add(&recovery_liouvillian(alpha, 1.0, code.space()).unwrap()).unwrap();
        let rho = evolve(&l, &code.logical_plus().projector(), t, &EvolveOptions::default()).unwrap();
        let d = rho.diagnostics().unwrap();
        prop_assert!(d.within(1e-8, 1e-8, -1e-6), "{:?}", d);
    }

    #[test]
    fn qcrb_grows_with_the_idle_window(alpha in 0.5f64..1.5, t in 0.05f64..0.5) {
        let noise = NoiseParams { kappa_th: 0.5, kappa_sz: 0.2, ..Default::default() };
        let opts = EvolveOptions::default();
        let at = |w: f64| {
            let s = SensingScenario { t_window: w, recovery_on: false, noise, beta: 0.0 };
            idle_then_qcrb(alpha, &s, &opts).unwrap().qcrb
        };
        let (a, b) = (at(t), at(2.0 * t));
        prop_assert!(b >= a * (1.0 - 1e-9), "{} then {}", a, b);
        let fresh = qfi_pure(&probe_state(alpha, default_truncation(alpha)).unwrap(),
            &quadrature_generator(default_truncation(alpha)).unwrap()).unwrap();
        prop_assert!(a >= 1.0 / fresh * (1.0 - 1e-9));
    }
}

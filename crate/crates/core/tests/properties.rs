use proptest::prelude::*;
use tmcmc::chain::metropolis_log_alpha;
use tmcmc::diagnostics::bounds::{hmc_ar_bounds, rwmh_ar_bounds, tmcmc_ar_bounds, AcceptanceBoundInputs};
use tmcmc::diagnostics::iact_and_ess;
use tmcmc::discrete::{ising_exact_matrix, lattice_exact_matrix, target_masses, IsingTmcmc};
use tmcmc::targets::{IsingChain, LatticeLaplace};
use tmcmc::tmcmc::{dependent_log_move_ratio, log_softmax3, MoveProbs};
use tmcmc::transform::{additive_forward, Additive, MoveType, Transformation};

/// `x_i exp(z_i eps)`, log Jacobian `eps * sum z_i`.
struct Multiplicative;

impl Transformation for Multiplicative {
    fn forward(&self, x: &[f64], eps: f64, z: &[i8], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = x[i] * (z[i] as f64 * eps).exp();
        }
    }

    fn log_jacobian(&self, _x: &[f64], eps: f64, z: &[i8]) -> f64 {
        eps * z.iter().map(|&v| v as f64).sum::<f64>()
    }

    fn name(&self) -> &'static str {
        "multiplicative"
    }
}

fn move_type(k: usize) -> impl Strategy<Value = Vec<i8>> {
    proptest::collection::vec(prop_oneof![Just(-1i8), Just(0i8), Just(1i8)], k)
}

fn apply<Tr: Transformation>(t: &Tr, x: &[f64], eps: f64, z: &[i8]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    t.forward(x, eps, z, &mut out);
    out
}

proptest! {
    #[test]
    fn additive_inverse_identity(
        x in proptest::collection::vec(-50.0f64..50.0, 4),
        a in proptest::collection::vec(0.1f64..5.0, 4),
        eps in 0.0f64..10.0,
        z in move_type(4),
    ) {
        let mt = MoveType::new(z);
        let y = additive_forward(&x, eps, &mt, &a).unwrap();
        let back = additive_forward(&y, eps, &mt.conjugate(), &a).unwrap();
        for i in 0..4 {
            // Addition then subtraction of the same term; rounding only.
            prop_assert!((back[i] - x[i]).abs() <= 1e-12 * (x[i].abs() + a[i] * eps + 1.0));
        }
        let t = Additive::new(a.clone());
        prop_assert_eq!(t.log_jacobian(&x, eps, mt.as_slice()), 0.0);
    }

    #[test]
    fn user_transform_inverse_and_jacobian_reciprocity(
        x in proptest::collection::vec(0.01f64..100.0, 3),
        eps in 0.0f64..2.0,
        z in move_type(3),
    ) {
        let t = Multiplicative;
        let zc: Vec<i8> = z.iter().map(|v| -v).collect();
        let y = apply(&t, &x, eps, &z);
        let back = apply(&t, &y, eps, &zc);
        for i in 0..3 {
            prop_assert!((back[i] - x[i]).abs() <= 1e-12 * x[i].abs());
        }
        let s = t.log_jacobian(&x, eps, &z) + t.log_jacobian(&y, eps, &zc);
        prop_assert!(s.abs() <= 1e-12);
    }

    #[test]
    fn move_ratio_is_antisymmetric(
        p in proptest::collection::vec(0.05f64..0.5, 3),
        q in proptest::collection::vec(0.05f64..0.5, 3),
        z in move_type(3),
    ) {
        let probs = MoveProbs::new(&p, &q);
        let zc: Vec<i8> = z.iter().map(|v| -v).collect();
        prop_assert!((probs.log_move_ratio(&z) + probs.log_move_ratio(&zc)).abs() < 1e-12);
    }

    #[test]
    fn dependent_ratio_is_antisymmetric(
        w in proptest::collection::vec((-30.0f64..30.0, -30.0f64..30.0, -30.0f64..30.0), 3),
        z in move_type(3),
    ) {
        let l: Vec<[f64; 3]> = w.iter().map(|&(a, b, c)| log_softmax3(a, b, c)).collect();
        for row in &l {
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
        let zc: Vec<i8> = z.iter().map(|v| -v).collect();
        prop_assert!((dependent_log_move_ratio(&l, &z) + dependent_log_move_ratio(&l, &zc)).abs() < 1e-9);
    }

    #[test]
    fn log_alpha_is_a_log_probability(
        lx in -1e3f64..1e3,
        ly in prop_oneof![-1e3f64..1e3, Just(f64::NEG_INFINITY), Just(f64::NAN), Just(f64::INFINITY)],
        r in -50.0f64..50.0,
        j in -50.0f64..50.0,
    ) {
        let (la, forced) = metropolis_log_alpha(lx, ly, r, j);
        prop_assert!(la <= 0.0);
        prop_assert_eq!(forced, !ly.is_finite());
        if ly.is_finite() {
            prop_assert!((la - (ly - lx + r + j).min(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn bound_pairs_are_ordered(
        k in 1usize..=200,
        m_exp in -2.0f64..2.0,
        gap in 0.0f64..0.5,
        psi1 in 0.001f64..0.1,
        psi2 in 0.001f64..0.1,
        pi_exp in -5.0f64..1.0,
        dt in 0.01f64..1.0,
        lam in 0.0f64..1.0,
    ) {
        let m = 10f64.powf(m_exp);
        let mut inp = AcceptanceBoundInputs::new(k, m, m * (1.0 + gap), 10f64.powf(pi_exp));
        inp.psi1 = psi1;
        inp.psi2 = psi2;
        inp.dt = dt;
        inp.lambda = lam * 10.0 * k as f64;
        let r = rwmh_ar_bounds(&inp).unwrap();
        let t = tmcmc_ar_bounds(&inp).unwrap();
        let h = hmc_ar_bounds(&inp).unwrap();
        prop_assert!(r.lower.log_value <= r.upper.log_value);
        prop_assert!(t.lower.log_value <= t.upper.log_value);
        prop_assert!(h.finite_k.lower.log_value <= h.finite_k.upper.log_value);
        prop_assert!(r.upper.log_value.is_finite() && h.finite_k.upper.log_value.is_finite());
    }

    #[test]
    fn ising_exact_kernels_are_reversible(
        k in 1usize..=3,
        coupling in -1.0f64..1.0,
        p in proptest::collection::vec(0.1f64..0.9, 3),
        e1 in 1.01f64..5.0,
        e2 in 1.01f64..5.0,
    ) {
        let t = IsingChain::new(k, coupling).unwrap();
        let kern = IsingTmcmc::new(p[..k].to_vec()).unwrap();
        let m = ising_exact_matrix(&t, &kern, &[(e1, 0.3), (e2, 0.7)]).unwrap();
        let pi = target_masses(&t, &m.states);
        prop_assert!(m.detailed_balance_violation(&pi) < 1e-10);
        prop_assert!(m.stationarity_violation(&pi) < 1e-10);
        prop_assert!(m.is_strongly_connected(1e-14));
        prop_assert!(m.has_positive_diagonal());
    }

    #[test]
    fn lattice_exact_kernels_are_reversible(
        r in 0.0f64..=1.0,
        s in 0.3f64..4.0,
        rate in 0.1f64..2.0,
    ) {
        let t = LatticeLaplace::new(1, rate).unwrap();
        let m = lattice_exact_matrix(&t, 1, 5, r, s).unwrap();
        m.check_stochastic(1e-12).unwrap();
        let pi = target_masses(&t, &m.states);
        prop_assert!(m.detailed_balance_violation(&pi) < 1e-10);
    }

    #[test]
    fn iact_respects_floor(rho in 0.0f64..0.95, seed in 0u64..1000) {
        use rand::Rng;
        let mut rng = tmcmc::rng::rng_from_seed(seed);
        let mut v = 0.0;
        let x: Vec<f64> = (0..2000).map(|_| { v = rho * v + rng.random::<f64>() - 0.5; v }).collect();
        let e = iact_and_ess(&x).unwrap();
        prop_assert!(e.iact >= 1.0 / (2000f64).log10() - 1e-12);
        prop_assert!((e.ess * e.iact - 2000.0).abs() < 1e-6);
    }
}

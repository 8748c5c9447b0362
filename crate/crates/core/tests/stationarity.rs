//! Long-run moment checks: every kernel leaves its target invariant.

use tmcmc::baseline::{Hmc, HmcConfig, Rwmh};
use tmcmc::diagnostics::{mean, variance};
use tmcmc::discrete::{IsingTmcmc, ZkTmcmc};
use tmcmc::targets::{FnTarget, IidGaussian, IsingChain, LatticeLaplace};
use tmcmc::tmcmc::{AdditiveTmcmc, DependentZConfig, DependentZTmcmc, GeneralTmcmc, TmcmcConfig};
use tmcmc::transform::Transformation;
use tmcmc::{run_chain, Kernel, Target, Trace};

fn moments(trace: &Trace, burn: usize) -> Vec<(f64, f64)> {
    (0..trace.width)
        .map(|i| {
            let c = trace.coordinate(i, burn);
            (mean(&c), variance(&c))
        })
        .collect()
}

fn assert_standard_normal<K: Kernel>(kernel: &K, k: usize, n: usize, seed: u64) {
    let t = IidGaussian::new(k).unwrap();
    let trace = run_chain(kernel, &t, vec![0.5; k], n, seed).unwrap();
    for (i, (m, v)) in moments(&trace, n / 10).into_iter().enumerate() {
        assert!(m.abs() < 0.05, "{} coord {i}: mean {m}", kernel.name());
        assert!((v - 1.0).abs() < 0.1, "{} coord {i}: var {v}", kernel.name());
    }
}

#[test]
fn additive_tmcmc_k5() {
    let k = 5;
    let kern = AdditiveTmcmc::new(TmcmcConfig::symmetric(k, 2.4 / (k as f64).sqrt())).unwrap();
    assert_standard_normal(&kern, k, 200_000, 1);
}

#[test]
fn additive_tmcmc_asymmetric_move_probs() {
    let k = 3;
    let cfg = TmcmcConfig::symmetric(k, 1.2).with_move_probs(vec![0.8, 0.3, 0.6], vec![0.2, 0.7, 0.4]);
    assert_standard_normal(&AdditiveTmcmc::new(cfg).unwrap(), k, 200_000, 2);
}

#[test]
fn general_tmcmc_with_no_change_moves() {
    let k = 3;
    let cfg = TmcmcConfig::symmetric(k, 1.5).with_move_probs(vec![0.4, 0.3, 0.2], vec![0.3, 0.3, 0.5]);
    assert_standard_normal(&GeneralTmcmc::additive(cfg).unwrap(), k, 200_000, 3);
}

#[test]
fn dependent_z_tmcmc() {
    let k = 3;
    let mut cfg = DependentZConfig::standard(k, 1.5);
    cfg.mu = [vec![0.5; k], vec![-0.5; k], vec![0.0; k]];
    assert_standard_normal(&DependentZTmcmc::new(cfg).unwrap(), k, 200_000, 4);
}

#[test]
fn rwmh_k5() {
    assert_standard_normal(&Rwmh::isotropic(5, 1.0).unwrap(), 5, 200_000, 5);
}

#[test]
fn hmc_k10() {
    assert_standard_normal(&Hmc::new(HmcConfig::new(10, 0.1, 10)).unwrap(), 10, 200_000, 6);
}

/// `x_i exp(z_i eps)` on the positive orthant.
#[derive(Clone)]
struct Multiplicative {
    drop_jacobian: bool,
}

impl Transformation for Multiplicative {
    fn forward(&self, x: &[f64], eps: f64, z: &[i8], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = x[i] * (z[i] as f64 * eps).exp();
        }
    }

    fn log_jacobian(&self, _x: &[f64], eps: f64, z: &[i8]) -> f64 {
        if self.drop_jacobian {
            0.0
        } else {
            eps * z.iter().map(|&v| v as f64).sum::<f64>()
        }
    }

    fn name(&self) -> &'static str {
        "multiplicative"
    }
}

fn exponential_target() -> impl Target {
    FnTarget::new(2, |x: &[f64]| {
        if x.iter().all(|v| *v > 0.0) {
            -x.iter().sum::<f64>()
        } else {
            f64::NEG_INFINITY
        }
    })
    .unwrap()
}

#[test]
fn jacobian_enters_the_acceptance() {
    let t = exponential_target();
    let cfg = TmcmcConfig::symmetric(2, 0.8);
    let good = GeneralTmcmc::new(cfg.clone(), Multiplicative { drop_jacobian: false }).unwrap();
    let trace = run_chain(&good, &t, vec![1.0, 1.0], 200_000, 7).unwrap();
    for (m, v) in moments(&trace, 20_000) {
        assert!((m - 1.0).abs() < 0.05, "mean {m}");
        assert!((v - 1.0).abs() < 0.15, "var {v}");
    }
    let bad = GeneralTmcmc::new(cfg, Multiplicative { drop_jacobian: true }).unwrap();
    let trace = run_chain(&bad, &t, vec![1.0, 1.0], 200_000, 7).unwrap();
    let (m, _) = moments(&trace, 20_000)[0];
    assert!((m - 1.0).abs() > 0.2, "dropping the Jacobian should bias the mean, got {m}");
}

#[test]
fn ising_frequencies_match_enumeration() {
    let k = 3;
    let t = IsingChain::new(k, 0.4).unwrap();
    let kern = IsingTmcmc::new(vec![0.6, 0.5, 0.3]).unwrap();
    let n = 200_000;
    let trace = run_chain(&kern, &t, vec![1.0; k], n, 8).unwrap();
    let states: Vec<Vec<f64>> = tmcmc::discrete::SpinState::enumerate(k).iter().map(|s| s.to_f64()).collect();
    let pi = tmcmc::discrete::target_masses(&t, &states);
    for (s, p) in states.iter().zip(&pi) {
        let hits = (0..trace.len()).filter(|&i| trace.state(i) == s.as_slice()).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() < 0.01, "{s:?}: {freq} vs {p}");
    }
}

#[test]
fn lattice_frequencies_match_target() {
    let t = LatticeLaplace::new(1, 0.7).unwrap();
    let kern = ZkTmcmc::new(1, 0.5, 1.5).unwrap();
    let n = 200_000;
    let trace = run_chain(&kern, &t, vec![0.0], n, 9).unwrap();
    // pi(x) proportional to exp(-0.7 |x|) on Z.
    let z = (1.0 + (-0.7f64).exp()) / (1.0 - (-0.7f64).exp());
    for x in -3i64..=3 {
        let p = (-0.7 * x.abs() as f64).exp() / z;
        let freq = (0..n).filter(|&i| trace.state(i)[0] == x as f64).count() as f64 / n as f64;
        assert!((freq - p).abs() < 0.01, "x={x}: {freq} vs {p}");
    }
}

use tmcmc::baseline::{Hmc, HmcConfig, Rwmh};
use tmcmc::diagnostics::acceptance_rate_of;
use tmcmc::rng::{chain_seed, splitmix64};
use tmcmc::targets::{FnTarget, IidGaussian};
use tmcmc::tmcmc::{AdditiveTmcmc, TmcmcConfig};
use tmcmc::{run_chain, run_chains, Execution, Record, RunOptions};

#[test]
fn sequential_and_parallel_chains_agree() {
    let t = IidGaussian::new(4).unwrap();
    let kern = AdditiveTmcmc::new(TmcmcConfig::symmetric(4, 1.1)).unwrap();
    let starts = vec![vec![0.0; 4]; 6];
    let opts = RunOptions::new(2000);
    let a = run_chains(&kern, &t, starts.clone(), opts, 42, Execution::Sequential).unwrap();
    let b = run_chains(&kern, &t, starts, opts, 42, Execution::Parallel).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.states, y.states);
        assert_eq!(x.accepted, y.accepted);
        assert_eq!(x.seed, y.seed);
    }
    // Chains are distinct streams.
    assert_ne!(a[0].states, a[1].states);
}

#[test]
fn chain_seed_formula_is_stable() {
    assert_eq!(chain_seed(7, 0), splitmix64(7 ^ splitmix64(1)));
    assert_eq!(chain_seed(7, 3), splitmix64(7 ^ splitmix64(4)));
}

#[test]
fn same_seed_same_trace_csv() {
    let t = IidGaussian::new(2).unwrap();
    let kern = Rwmh::isotropic(2, 0.8).unwrap();
    let mut out = Vec::new();
    for _ in 0..2 {
        let tr = run_chain(&kern, &t, vec![0.0, 0.0], 500, 11).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        out.push(buf);
    }
    assert_eq!(out[0], out[1]);
    let text = String::from_utf8(out[0].clone()).unwrap();
    assert!(text.starts_with("iter,accepted,log_density,x_0,x_1\n"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn zero_gradient_one_step_hmc_is_rwmh() {
    // A lying zero gradient turns one leapfrog step into x + dt p / m with
    // p ~ N(0, m): RWMH with sigma = dt / sqrt(m), same draws in the same order.
    let dens = |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>();
    let t = FnTarget::new(3, dens).unwrap().with_gradient(|_, g| g.fill(0.0));
    let (dt, m) = (0.7, 2.0);
    let mut cfg = HmcConfig::new(1, dt, 3);
    cfg.mass = vec![m; 3];
    let hmc = Hmc::new(cfg).unwrap();
    let rw = Rwmh::isotropic(3, dt / m.sqrt()).unwrap();
    let a = run_chain(&hmc, &t, vec![0.1, 0.2, 0.3], 3000, 5).unwrap();
    let b = run_chain(&rw, &t, vec![0.1, 0.2, 0.3], 3000, 5).unwrap();
    assert_eq!(a.accepted, b.accepted);
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn acceptance_rate_is_stable_under_offset() {
    let t = IidGaussian::new(3).unwrap();
    let kern = AdditiveTmcmc::new(TmcmcConfig::symmetric(3, 1.3)).unwrap();
    let opts = RunOptions::new(200_000).record(Record::None);
    let mut rng = tmcmc::rng::rng_from_seed(3);
    let tr = tmcmc::chain::run_chain_with_rng(&kern, &t, vec![0.0; 3], opts, &mut rng, 3).unwrap();
    let full = acceptance_rate_of(&tr.accepted[..100_000]).unwrap();
    let shifted = acceptance_rate_of(&tr.accepted[37_123..137_123]).unwrap();
    assert!((full - shifted).abs() < 0.01, "{full} vs {shifted}");
}

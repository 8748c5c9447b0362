//! TMCMC kernels: additive with a single innovation, the general move-type
//! kernel, and the kernel with move probabilities drawn each iteration.
//!
//! Random draws happen in a fixed order so kernels that coincide as
//! mathematical objects also coincide as trajectories: the innovation `eps`
//! first, then one uniform per coordinate for `z`, then the decision uniform.

use crate::chain::{finish_step, metropolis_log_alpha, ChainState, Kernel, StepInfo};
use crate::error::{invalid, Error, Result};
use crate::rng::ChainRng;
use crate::targets::Target;
use crate::transform::{sample_epsilon, Additive, Transformation};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Below this the no-change probability is treated as exactly zero.
const NO_MOVE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmcmcConfig {
    /// Per-coordinate scales `a_i`.
    pub scales: Vec<f64>,
    /// Scale `s` of the half-normal innovation.
    pub eps_scale: f64,
    /// Forward probabilities `p_i`.
    pub forward: Vec<f64>,
    /// Backward probabilities `q_i`.
    pub backward: Vec<f64>,
}

impl TmcmcConfig {
    /// Unit scales and `p_i = q_i = 1/2`.
    pub fn symmetric(k: usize, eps_scale: f64) -> Self {
        Self {
            scales: vec![1.0; k],
            eps_scale,
            forward: vec![0.5; k],
            backward: vec![0.5; k],
        }
    }

    pub fn with_scales(mut self, scales: Vec<f64>) -> Self {
        self.scales = scales;
        self
    }

    pub fn with_move_probs(mut self, forward: Vec<f64>, backward: Vec<f64>) -> Self {
        self.forward = forward;
        self.backward = backward;
        self
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        for (name, len) in [
            ("scales", self.scales.len()),
            ("forward", self.forward.len()),
            ("backward", self.backward.len()),
        ] {
            if len != k {
                return Err(invalid(name, format!("has length {len}, target dimension is {k}")));
            }
        }
        if !(self.eps_scale > 0.0 && self.eps_scale.is_finite()) {
            return Err(invalid("eps_scale", "must be positive and finite"));
        }
        if self.scales.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(invalid("scales", "all a_i must be positive and finite"));
        }
        for i in 0..k {
            let (p, q) = (self.forward[i], self.backward[i]);
            if !(p >= 0.0 && q >= 0.0 && p + q <= 1.0 + NO_MOVE_EPS) {
                return Err(invalid(
                    "move_probs",
                    format!("coordinate {i}: need p, q >= 0 and p + q <= 1, got ({p}, {q})"),
                ));
            }
        }
        if self.forward.iter().zip(&self.backward).all(|(p, q)| p + q <= 0.0) {
            return Err(invalid("move_probs", "every coordinate has p + q = 0"));
        }
        Ok(())
    }

    /// Whether no coordinate can stay put.
    pub fn is_full_move(&self) -> bool {
        self.forward
            .iter()
            .zip(&self.backward)
            .all(|(p, q)| 1.0 - p - q <= NO_MOVE_EPS)
    }
}

/// Per-coordinate move probabilities with cached logs, indexed by `z + 1`.
#[derive(Clone, Debug)]
pub struct MoveProbs {
    p: Vec<f64>,
    pq: Vec<f64>,
    ln_f: Vec<[f64; 3]>,
}

impl MoveProbs {
    pub fn new(forward: &[f64], backward: &[f64]) -> Self {
        let mut p = Vec::with_capacity(forward.len());
        let mut pq = Vec::with_capacity(forward.len());
        let mut ln_f = Vec::with_capacity(forward.len());
        for (&f, &b) in forward.iter().zip(backward) {
            let rest = 1.0 - f - b;
            let full = rest <= NO_MOVE_EPS;
            p.push(f);
            pq.push(if full { f64::INFINITY } else { f + b });
            ln_f.push([
                b.ln(),
                if full { f64::NEG_INFINITY } else { rest.ln() },
                f.ln(),
            ]);
        }
        Self { p, pq, ln_f }
    }

    /// One uniform per coordinate: `+1` if `u < p`, `-1` if `u < p + q`, else `0`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [i8]) {
        for i in 0..z.len() {
            let u: f64 = rng.random();
            z[i] = if u < self.p[i] {
                1
            } else if u < self.pq[i] {
                -1
            } else {
                0
            };
        }
    }

    pub fn ln_prob(&self, i: usize, zi: i8) -> f64 {
        self.ln_f[i][(zi + 1) as usize]
    }

    /// `log P(z^c) - log P(z)`.
    pub fn log_move_ratio(&self, z: &[i8]) -> f64 {
        z.iter()
            .enumerate()
            .filter(|(_, &zi)| zi != 0)
            .map(|(i, &zi)| self.ln_prob(i, -zi) - self.ln_prob(i, zi))
            .sum()
    }
}

/// Additive TMCMC: `x'_i = x_i + z_i a_i eps` with `z_i = +-1`.
#[derive(Clone, Debug)]
pub struct AdditiveTmcmc {
    cfg: TmcmcConfig,
    probs: MoveProbs,
}

impl AdditiveTmcmc {
    pub fn new(cfg: TmcmcConfig) -> Result<Self> {
        cfg.validate(cfg.dim())?;
        if !cfg.is_full_move() {
            return Err(invalid(
                "move_probs",
                "additive kernel needs p_i + q_i = 1; use GeneralTmcmc for no-change coordinates",
            ));
        }
        let probs = MoveProbs::new(&cfg.forward, &cfg.backward);
        Ok(Self { cfg, probs })
    }

    pub fn config(&self) -> &TmcmcConfig {
        &self.cfg
    }
}

fn check_target_dim<T: Target + ?Sized>(target: &T, k: usize) -> Result<()> {
    if target.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: target.dim(),
        });
    }
    Ok(())
}

impl Kernel for AdditiveTmcmc {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo> {
        let k = self.cfg.dim();
        check_target_dim(target, k)?;
        let eps = sample_epsilon(rng, self.cfg.eps_scale);
        let mut z = vec![0i8; k];
        self.probs.sample_into(rng, &mut z);
        let y: Vec<f64> = (0..k)
            .map(|i| state.x[i] + z[i] as f64 * self.cfg.scales[i] * eps)
            .collect();
        let log_pi_y = target.log_density(&y);
        let ratio = self.probs.log_move_ratio(&z);
        Ok(finish_step(state, y, log_pi_y, ratio, 0.0, rng))
    }

    fn name(&self) -> &'static str {
        "additive-tmcmc"
    }
}

/// General TMCMC over `z in {-1,0,1}^k` with a user transformation. The
/// all-zero move type is rejected and resampled; the renormalizing constant
/// cancels in the move ratio.
#[derive(Clone, Debug)]
pub struct GeneralTmcmc<Tr> {
    cfg: TmcmcConfig,
    probs: MoveProbs,
    transform: Tr,
}

impl<Tr: Transformation> GeneralTmcmc<Tr> {
    pub fn new(cfg: TmcmcConfig, transform: Tr) -> Result<Self> {
        cfg.validate(cfg.dim())?;
        let probs = MoveProbs::new(&cfg.forward, &cfg.backward);
        Ok(Self {
            cfg,
            probs,
            transform,
        })
    }
}

impl GeneralTmcmc<Additive> {
    /// The additive transformation with the config's scales.
    pub fn additive(cfg: TmcmcConfig) -> Result<Self> {
        let t = Additive::new(cfg.scales.clone());
        Self::new(cfg, t)
    }
}

impl<Tr: Transformation> Kernel for GeneralTmcmc<Tr> {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo> {
        let k = self.cfg.dim();
        check_target_dim(target, k)?;
        let eps = sample_epsilon(rng, self.cfg.eps_scale);
        let mut z = vec![0i8; k];
        loop {
            self.probs.sample_into(rng, &mut z);
            if z.iter().any(|&v| v != 0) {
                break;
            }
        }
        let mut y = vec![0.0; k];
        self.transform.forward(&state.x, eps, &z, &mut y);
        let log_jac = self.transform.log_jacobian(&state.x, eps, &z);
        let log_pi_y = target.log_density(&y);
        let ratio = self.probs.log_move_ratio(&z);
        Ok(finish_step(state, y, log_pi_y, ratio, log_jac, rng))
    }

    fn name(&self) -> &'static str {
        "general-tmcmc"
    }
}

/// Covariance of one of the Gaussian logit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// Variances on the diagonal.
    Diagonal(Vec<f64>),
    /// Full symmetric positive-definite matrix, row-major rows.
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    /// Lower Cholesky factor, dense.
    fn cholesky(&self, k: usize, which: usize) -> Result<Vec<Vec<f64>>> {
        let field = ["sigma_1", "sigma_2", "sigma_3"][which];
        match self {
            Covariance::Diagonal(v) => {
                if v.len() != k {
                    return Err(invalid(field, format!("expected {k} variances, got {}", v.len())));
                }
                if v.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(invalid(field, "diagonal variances must be positive"));
                }
                let mut l = vec![vec![0.0; k]; k];
                for i in 0..k {
                    l[i][i] = v[i].sqrt();
                }
                Ok(l)
            }
            Covariance::Full(a) => {
                if a.len() != k || a.iter().any(|r| r.len() != k) {
                    return Err(invalid(field, format!("expected a {k}x{k} matrix")));
                }
                let mut l = vec![vec![0.0; k]; k];
                for i in 0..k {
                    for j in 0..=i {
                        if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                            return Err(invalid(field, "matrix is not symmetric"));
                        }
                        let s: f64 = (0..j).map(|m| l[i][m] * l[j][m]).sum();
                        if i == j {
                            let d = a[i][i] - s;
                            if !(d > 0.0) {
                                return Err(invalid(field, "matrix is not positive definite"));
                            }
                            l[i][i] = d.sqrt();
                        } else {
                            l[i][j] = (a[i][j] - s) / l[j][j];
                        }
                    }
                }
                Ok(l)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependentZConfig {
    pub mu: [Vec<f64>; 3],
    pub sigma: [Covariance; 3],
    pub eps_scale: f64,
    pub scales: Vec<f64>,
}

impl DependentZConfig {
    /// Zero means, identity covariances, unit scales.
    pub fn standard(k: usize, eps_scale: f64) -> Self {
        Self {
            mu: [vec![0.0; k], vec![0.0; k], vec![0.0; k]],
            sigma: [
                Covariance::Diagonal(vec![1.0; k]),
                Covariance::Diagonal(vec![1.0; k]),
                Covariance::Diagonal(vec![1.0; k]),
            ],
            eps_scale,
            scales: vec![1.0; k],
        }
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }
}

/// Numerically safe `(ln p, ln q, ln r)` from logits `(w1, w2, w3)`.
pub fn log_softmax3(w1: f64, w2: f64, w3: f64) -> [f64; 3] {
    let m = w1.max(w2).max(w3);
    let lse = m + ((w1 - m).exp() + (w2 - m).exp() + (w3 - m).exp()).ln();
    [w1 - lse, w2 - lse, w3 - lse]
}

/// Log move-type probability ratio `log P(z^c | p, q) - log P(z | p, q)` for
/// per-coordinate `(ln p_i, ln q_i, ln r_i)`.
pub fn dependent_log_move_ratio(ln_pqr: &[[f64; 3]], z: &[i8]) -> f64 {
    z.iter()
        .zip(ln_pqr)
        .map(|(&zi, l)| match zi {
            1 => l[1] - l[0],
            -1 => l[0] - l[1],
            _ => 0.0,
        })
        .sum()
}

/// TMCMC with move probabilities drawn each iteration from a softmax of
/// three Gaussian logit vectors.
#[derive(Clone, Debug)]
pub struct DependentZTmcmc {
    cfg: DependentZConfig,
    chol: [Vec<Vec<f64>>; 3],
    /// Drops the move-type ratio from the acceptance; for negative controls only.
    omit_move_ratio: bool,
}

impl DependentZTmcmc {
    pub fn new(cfg: DependentZConfig) -> Result<Self> {
        let k = cfg.dim();
        if k == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(cfg.eps_scale > 0.0 && cfg.eps_scale.is_finite()) {
            return Err(invalid("eps_scale", "must be positive and finite"));
        }
        if cfg.scales.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(invalid("scales", "all a_i must be positive and finite"));
        }
        for (j, mu) in cfg.mu.iter().enumerate() {
            if mu.len() != k || mu.iter().any(|v| !v.is_finite()) {
                return Err(invalid(["mu_1", "mu_2", "mu_3"][j], format!("must be {k} finite values")));
            }
        }
        let chol = [
            cfg.sigma[0].cholesky(k, 0)?,
            cfg.sigma[1].cholesky(k, 1)?,
            cfg.sigma[2].cholesky(k, 2)?,
        ];
        Ok(Self {
            cfg,
            chol,
            omit_move_ratio: false,
        })
    }

    #[doc(hidden)]
    pub fn without_move_ratio(mut self) -> Self {
        self.omit_move_ratio = true;
        self
    }

    /// Draws `w_1, w_2, w_3` and returns per-coordinate `(ln p, ln q, ln r)`.
    pub fn draw_move_probs<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<[f64; 3]> {
        let k = self.cfg.dim();
        let mut w = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
        for j in 0..3 {
            let n: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            for i in 0..k {
                let lin: f64 = (0..=i).map(|m| self.chol[j][i][m] * n[m]).sum();
                w[j][i] = self.cfg.mu[j][i] + lin;
            }
        }
        (0..k).map(|i| log_softmax3(w[0][i], w[1][i], w[2][i])).collect()
    }
}

impl Kernel for DependentZTmcmc {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo> {
        let k = self.cfg.dim();
        check_target_dim(target, k)?;
        let ln_pqr = self.draw_move_probs(rng);
        let eps = sample_epsilon(rng, self.cfg.eps_scale);
        let mut z = vec![0i8; k];
        for i in 0..k {
            let u: f64 = rng.random();
            let p = ln_pqr[i][0].exp();
            let q = ln_pqr[i][1].exp();
            z[i] = if u < p {
                1
            } else if u < p + q {
                -1
            } else {
                0
            };
        }
        let y: Vec<f64> = (0..k)
            .map(|i| state.x[i] + z[i] as f64 * self.cfg.scales[i] * eps)
            .collect();
        let log_pi_y = target.log_density(&y);
        let ratio = if self.omit_move_ratio {
            0.0
        } else {
            dependent_log_move_ratio(&ln_pqr, &z)
        };
        Ok(finish_step(state, y, log_pi_y, ratio, 0.0, rng))
    }

    fn name(&self) -> &'static str {
        "dependent-z-tmcmc"
    }
}

/// Result of a single transition in the free-function interface.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub x: Vec<f64>,
    pub accepted: bool,
    pub log_alpha: f64,
}

fn one_step<K: Kernel, T: Target + ?Sized>(
    kernel: &K,
    x: &[f64],
    target: &T,
    rng: &mut ChainRng,
) -> Result<Transition> {
    let mut st = ChainState::new(target, x.to_vec())?;
    let info = kernel.step(target, &mut st, rng)?;
    Ok(Transition {
        x: st.x,
        accepted: info.accepted,
        log_alpha: info.log_alpha,
    })
}

pub fn additive_tmcmc_step<T: Target + ?Sized>(
    x: &[f64],
    target: &T,
    cfg: &TmcmcConfig,
    rng: &mut ChainRng,
) -> Result<Transition> {
    one_step(&AdditiveTmcmc::new(cfg.clone())?, x, target, rng)
}

pub fn general_tmcmc_step<T: Target + ?Sized, Tr: Transformation + Clone>(
    x: &[f64],
    target: &T,
    transform: &Tr,
    cfg: &TmcmcConfig,
    rng: &mut ChainRng,
) -> Result<Transition> {
    one_step(&GeneralTmcmc::new(cfg.clone(), transform.clone())?, x, target, rng)
}

pub fn dependent_z_tmcmc_step<T: Target + ?Sized>(
    x: &[f64],
    target: &T,
    cfg: &DependentZConfig,
    rng: &mut ChainRng,
) -> Result<Transition> {
    one_step(&DependentZTmcmc::new(cfg.clone())?, x, target, rng)
}

/// Acceptance probability of a given additive proposal, for checks that
/// enumerate proposals instead of sampling them.
pub fn additive_log_alpha<T: Target + ?Sized>(
    target: &T,
    x: &[f64],
    eps: f64,
    z: &[i8],
    cfg: &TmcmcConfig,
) -> f64 {
    let probs = MoveProbs::new(&cfg.forward, &cfg.backward);
    let y: Vec<f64> = (0..x.len())
        .map(|i| x[i] + z[i] as f64 * cfg.scales[i] * eps)
        .collect();
    metropolis_log_alpha(target.log_density(x), target.log_density(&y), probs.log_move_ratio(z), 0.0).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::run_chain;
    use crate::rng::rng_from_seed;
    use crate::targets::IidGaussian;

    #[test]
    fn symmetric_ratio_is_zero() {
        let probs = MoveProbs::new(&[0.5; 4], &[0.5; 4]);
        assert_eq!(probs.log_move_ratio(&[1, -1, 1, 1]), 0.0);
        let probs = MoveProbs::new(&[0.7, 0.2], &[0.3, 0.5]);
        let r = probs.log_move_ratio(&[1, -1]);
        assert!((r - ((0.3f64 / 0.7).ln() + (0.2f64 / 0.5).ln())).abs() < 1e-14);
        assert_eq!(probs.log_move_ratio(&[0, 0]), 0.0);
    }

    #[test]
    fn hand_computed_alpha() {
        let t = IidGaussian::new(1).unwrap();
        let cfg = TmcmcConfig::symmetric(1, 1.0);
        let la = additive_log_alpha(&t, &[0.0], 1.0, &[1], &cfg);
        assert!((la - (-0.5)).abs() < 1e-15);
        // Near the mode with a tiny step the proposal is almost always accepted.
        let la = additive_log_alpha(&t, &[0.0, 0.0], 1e-9, &[1, -1], &TmcmcConfig::symmetric(2, 1.0));
        assert!(la > -1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(AdditiveTmcmc::new(TmcmcConfig::symmetric(2, 0.0)).is_err());
        let bad = TmcmcConfig::symmetric(2, 1.0).with_move_probs(vec![0.6, 0.5], vec![0.6, 0.5]);
        assert!(AdditiveTmcmc::new(bad).is_err());
        let partial = TmcmcConfig::symmetric(2, 1.0).with_move_probs(vec![0.3, 0.3], vec![0.3, 0.3]);
        assert!(AdditiveTmcmc::new(partial.clone()).is_err());
        assert!(GeneralTmcmc::additive(partial).is_ok());
        let dead = TmcmcConfig::symmetric(2, 1.0).with_move_probs(vec![0.0, 0.0], vec![0.0, 0.0]);
        assert!(GeneralTmcmc::additive(dead).is_err());
        assert!(AdditiveTmcmc::new(TmcmcConfig::symmetric(2, 1.0).with_scales(vec![1.0, -1.0])).is_err());
    }

    #[test]
    fn general_matches_additive_trajectory() {
        let t = IidGaussian::new(3).unwrap();
        let cfg = TmcmcConfig::symmetric(3, 0.9).with_move_probs(vec![0.3, 0.5, 0.8], vec![0.7, 0.5, 0.2]);
        let a = run_chain(&AdditiveTmcmc::new(cfg.clone()).unwrap(), &t, vec![0.1, 0.2, 0.3], 2000, 9).unwrap();
        let g = run_chain(&GeneralTmcmc::additive(cfg).unwrap(), &t, vec![0.1, 0.2, 0.3], 2000, 9).unwrap();
        assert_eq!(a.states, g.states);
        assert_eq!(a.accepted, g.accepted);
        assert_eq!(a.log_u, g.log_u);
    }

    #[test]
    fn zero_coordinates_are_untouched() {
        let t = IidGaussian::new(2).unwrap();
        let cfg = TmcmcConfig::symmetric(2, 1.0).with_move_probs(vec![0.5, 0.0], vec![0.5, 0.0]);
        let kern = GeneralTmcmc::additive(cfg).unwrap();
        let tr = run_chain(&kern, &t, vec![0.0, 1.25], 500, 2).unwrap();
        for i in 0..tr.len() {
            assert_eq!(tr.state(i)[1], 1.25);
        }
        assert!(tr.accepted.iter().any(|&a| a));
    }

    #[test]
    fn softmax_is_stable() {
        let l = log_softmax3(1000.0, 1000.0, 1000.0);
        for v in l {
            assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        }
        let l = log_softmax3(-800.0, 0.0, 800.0);
        assert!(l.iter().all(|v| !v.is_nan()));
        assert!(l[2].abs() < 1e-12);
    }

    #[test]
    fn dependent_ratio_swaps_p_and_q() {
        let ln = vec![
            [0.2f64.ln(), 0.5f64.ln(), 0.3f64.ln()],
            [0.6f64.ln(), 0.1f64.ln(), 0.3f64.ln()],
        ];
        let r = dependent_log_move_ratio(&ln, &[1, 1]);
        assert!((r - ((0.5f64 / 0.2).ln() + (0.1f64 / 0.6).ln())).abs() < 1e-14);
        assert!((dependent_log_move_ratio(&ln, &[-1, -1]) + r).abs() < 1e-14);
    }

    #[test]
    fn degenerate_dependent_config_gives_thirds() {
        let mut cfg = DependentZConfig::standard(3, 1.0);
        cfg.sigma = std::array::from_fn(|_| Covariance::Diagonal(vec![1e-30; 3]));
        let kern = DependentZTmcmc::new(cfg).unwrap();
        let mut rng = rng_from_seed(1);
        for l in kern.draw_move_probs(&mut rng) {
            for v in l {
                assert!((v.exp() - 1.0 / 3.0).abs() < 1e-12);
            }
            assert_eq!(dependent_log_move_ratio(&[l, l], &[1, -1]), 0.0);
        }
    }

    #[test]
    fn full_covariance_checked() {
        let mut cfg = DependentZConfig::standard(2, 1.0);
        cfg.sigma[0] = Covariance::Full(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            DependentZTmcmc::new(cfg.clone()),
            Err(Error::InvalidConfig { field: "sigma_1", .. })
        ));
        cfg.sigma[0] = Covariance::Full(vec![vec![2.0, 0.5], vec![0.5, 1.0]]);
        assert!(DependentZTmcmc::new(cfg).is_ok());
    }
}

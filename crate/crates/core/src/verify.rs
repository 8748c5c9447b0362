//! Correctness harness. Every check returns [`Verdict`]s that serialize to
//! JSON; negative controls are marked `expected_failure` and count as good
//! when they fail.

use crate::baseline::{hamiltonian, integrate, Hmc, HmcConfig, Integrator, PhasePoint};
use crate::chain::{metropolis_log_alpha, par_map, run_chain, Execution};
use crate::discrete::{
    exact_transition_matrix, ising_exact_matrix, lattice_exact_matrix, target_masses, IsingTmcmc, Proposal,
    TransitionMatrix, ZkTmcmc,
};
use crate::error::{invalid, Error, Result};
use crate::rng::{chain_seed, rng_from_seed};
use crate::targets::{IidGaussian, IsingChain, LatticeLaplace, Target};
use crate::tmcmc::{dependent_log_move_ratio, AdditiveTmcmc, DependentZConfig, DependentZTmcmc, MoveProbs, TmcmcConfig};
use crate::transform::{additive_forward, epsilon_log_density, MoveType};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;

/// Default tolerance for exact detailed-balance and stationarity checks.
pub const EXACT_TOL: f64 = 1e-10;
pub const REVERSIBILITY_TOL: f64 = 1e-10;
pub const VOLUME_TOL: f64 = 1e-6;
/// Largest grid accepted by the discretized checks.
pub const MAX_GRID_STATES: usize = 30;
pub const MIN_MC_SIZE: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub check_name: String,
    pub passed: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub seed: Option<u64>,
    /// Negative control: the check is built to fail.
    pub expected_failure: bool,
    pub details: serde_json::Value,
}

impl Verdict {
    pub fn new(check_name: impl Into<String>, max_violation: f64, tolerance: f64) -> Self {
        Self {
            check_name: check_name.into(),
            // NaN never passes.
            passed: max_violation <= tolerance,
            max_violation,
            tolerance,
            seed: None,
            expected_failure: false,
            details: serde_json::Value::Null,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = details;
        self
    }

    pub fn negative_control(mut self) -> Self {
        self.expected_failure = true;
        self
    }

    /// Correct outcome: a regular check passed or a negative control failed.
    pub fn is_ok(&self) -> bool {
        self.passed != self.expected_failure
    }
}

pub fn all_ok(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(Verdict::is_ok)
}

/// Fixed-width table, one line per verdict.
pub fn summary_table(verdicts: &[Verdict]) -> String {
    let mut out = format!(
        "{:<44} {:>6} {:>12} {:>10}  {}\n",
        "check", "result", "violation", "tolerance", "note"
    );
    for v in verdicts {
        let result = match (v.passed, v.expected_failure) {
            (true, false) => "pass",
            (false, false) => "FAIL",
            (false, true) => "pass",
            (true, true) => "FAIL",
        };
        let note = if v.expected_failure {
            "expected_failure"
        } else {
            ""
        };
        out.push_str(&format!(
            "{:<44} {:>6} {:>12.3e} {:>10.1e}  {}\n",
            v.check_name, result, v.max_violation, v.tolerance, note
        ));
    }
    out
}

/// `max |pi_i K_ij - pi_j K_ji|` against [`EXACT_TOL`]. Stationarity is
/// reported alongside as an independent measurement.
pub fn check_detailed_balance_exact(name: &str, k: &TransitionMatrix, pi: &[f64]) -> Result<Verdict> {
    k.check_stochastic(1e-12)?;
    if pi.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: pi.len(),
        });
    }
    if pi.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("pi", "target masses must be positive"));
    }
    if (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(invalid("pi", "target masses must sum to 1"));
    }
    let db = k.detailed_balance_violation(pi);
    let stat = k.stationarity_violation(pi);
    Ok(Verdict::new(name, db, EXACT_TOL).with_details(json!({
        "states": k.len(),
        "stationarity_violation": stat,
        "positive_diagonal": k.has_positive_diagonal(),
    })))
}

/// Moves `mass` from the diagonal of row `i` to entry `(i, j)`, keeping the
/// row stochastic. Negative-control helper.
pub fn corrupt_entry(k: &mut TransitionMatrix, i: usize, j: usize, mass: f64) {
    k.set(i, j, k.get(i, j) + mass);
    k.set(i, i, k.get(i, i) - mass);
}

/// Regular grid `origin + step * {0..points-1}` per axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub origin: f64,
    pub step: f64,
    pub points: usize,
    /// Jump sizes are `step * {1..max_jump}`.
    pub max_jump: usize,
    /// Scale of the continuous innovation being quantized.
    pub eps_scale: f64,
}

impl GridSpec {
    pub fn centered(points: usize, step: f64, max_jump: usize, eps_scale: f64) -> Self {
        Self {
            origin: -step * (points as f64 - 1.0) / 2.0,
            step,
            points,
            max_jump,
            eps_scale,
        }
    }

    fn validate(&self, dim: usize) -> Result<usize> {
        if !(self.step > 0.0 && self.step.is_finite() && self.origin.is_finite()) {
            return Err(Error::GridIncompatible("step must be positive and origin finite".into()));
        }
        if !(self.eps_scale > 0.0 && self.eps_scale.is_finite()) {
            return Err(Error::GridIncompatible("eps_scale must be positive".into()));
        }
        if self.max_jump == 0 || self.max_jump >= self.points {
            return Err(Error::GridIncompatible(format!(
                "max_jump must lie in 1..{}, got {}",
                self.points, self.max_jump
            )));
        }
        let states = self.points.checked_pow(dim as u32).unwrap_or(usize::MAX);
        if self.points < 2 || states > MAX_GRID_STATES {
            return Err(Error::GridIncompatible(format!(
                "grid has {states} states, allowed 2..={MAX_GRID_STATES}"
            )));
        }
        Ok(states)
    }

    fn states(&self, dim: usize) -> Vec<Vec<f64>> {
        let n = self.points.pow(dim as u32);
        (0..n)
            .map(|mut idx| {
                (0..dim)
                    .map(|_| {
                        let c = idx % self.points;
                        idx /= self.points;
                        self.origin + self.step * c as f64
                    })
                    .collect()
            })
            .collect()
    }

    fn index_of(&self, y: &[f64]) -> Option<usize> {
        let mut idx = 0;
        let mut mul = 1;
        for &v in y {
            let c = (v - self.origin) / self.step;
            let r = c.round();
            if (c - r).abs() > 1e-9 || r < 0.0 || r >= self.points as f64 {
                return None;
            }
            idx += r as usize * mul;
            mul *= self.points;
        }
        Some(idx)
    }

    /// Quantized half-normal weights for jumps `1..=max_jump`.
    fn eps_weights(&self) -> Vec<(f64, f64)> {
        let raw: Vec<(f64, f64)> = (1..=self.max_jump)
            .map(|m| {
                let e = m as f64 * self.step;
                (e, epsilon_log_density(e, self.eps_scale).exp())
            })
            .collect();
        let z: f64 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter().map(|(e, w)| (e, w / z)).collect()
    }
}

/// Kernels that can be quantized onto a [`GridSpec`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridKernel {
    /// One-dimensional additive TMCMC with `p + q = 1`.
    AdditiveTmcmc { forward: f64, backward: f64 },
    /// Same proposal with the move-type ratio left out. Negative control.
    UncorrectedTmcmc { forward: f64, backward: f64 },
    /// Symmetric jumps `+-m * step` weighted by a Gaussian of scale `sigma`.
    Rwmh { sigma: f64 },
    /// Multi-coordinate TMCMC with `z_i = 0` allowed and the all-zero move
    /// resampled.
    GeneralTmcmc { forward: Vec<f64>, backward: Vec<f64> },
}

impl GridKernel {
    fn dim(&self) -> usize {
        match self {
            GridKernel::GeneralTmcmc { forward, .. } => forward.len(),
            _ => 1,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            GridKernel::AdditiveTmcmc { .. } => "additive-tmcmc",
            GridKernel::UncorrectedTmcmc { .. } => "uncorrected-tmcmc",
            GridKernel::Rwmh { .. } => "rwmh",
            GridKernel::GeneralTmcmc { .. } => "general-tmcmc",
        }
    }
}

/// All `z` in `{-1, 0, 1}^k` except zero, with conditional probabilities.
fn nonzero_moves(probs: &MoveProbs, k: usize) -> Vec<(Vec<i8>, f64)> {
    let n = 3usize.pow(k as u32);
    let mut out = Vec::new();
    let mut zero_mass = 0.0;
    for mut code in 0..n {
        let z: Vec<i8> = (0..k)
            .map(|_| {
                let d = (code % 3) as i8 - 1;
                code /= 3;
                d
            })
            .collect();
        let lp: f64 = (0..k).map(|i| probs.ln_prob(i, z[i])).sum();
        if z.iter().all(|&v| v == 0) {
            zero_mass = lp.exp();
        } else if lp > f64::NEG_INFINITY {
            out.push((z, lp.exp()));
        }
    }
    for (_, p) in out.iter_mut() {
        *p /= 1.0 - zero_mass;
    }
    out
}

/// Exact matrix of a quantized continuous kernel on a grid.
pub fn grid_transition_matrix<T: Target + ?Sized>(
    target: &T,
    kernel: &GridKernel,
    grid: &GridSpec,
) -> Result<TransitionMatrix> {
    let k = kernel.dim();
    if target.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: target.dim(),
        });
    }
    grid.validate(k)?;
    let states = grid.states(k);
    let eps = grid.eps_weights();
    // (z, P(z), log move ratio) for the TMCMC variants.
    let moves: Vec<(Vec<i8>, f64, f64)> = match kernel {
        GridKernel::AdditiveTmcmc { forward, backward } | GridKernel::UncorrectedTmcmc { forward, backward } => {
            let cfg = TmcmcConfig::symmetric(1, grid.eps_scale).with_move_probs(vec![*forward], vec![*backward]);
            AdditiveTmcmc::new(cfg)?;
            let probs = MoveProbs::new(&[*forward], &[*backward]);
            let correct = matches!(kernel, GridKernel::AdditiveTmcmc { .. });
            [1i8, -1]
                .into_iter()
                .map(|z| {
                    let ratio = if correct { probs.log_move_ratio(&[z]) } else { 0.0 };
                    (vec![z], probs.ln_prob(0, z).exp(), ratio)
                })
                .collect()
        }
        GridKernel::GeneralTmcmc { forward, backward } => {
            TmcmcConfig::symmetric(k, grid.eps_scale)
                .with_move_probs(forward.clone(), backward.clone())
                .validate(k)?;
            let probs = MoveProbs::new(forward, backward);
            nonzero_moves(&probs, k)
                .into_iter()
                .map(|(z, p)| {
                    let ratio = probs.log_move_ratio(&z);
                    (z, p, ratio)
                })
                .collect()
        }
        GridKernel::Rwmh { sigma } => {
            if !(*sigma > 0.0 && sigma.is_finite()) {
                return Err(invalid("sigma", "must be positive"));
            }
            Vec::new()
        }
    };
    let rw_weights: Vec<(f64, f64)> = if let GridKernel::Rwmh { sigma } = kernel {
        let raw: Vec<(f64, f64)> = (1..=grid.max_jump)
            .flat_map(|m| {
                let d = m as f64 * grid.step;
                let w = (-0.5 * (d / sigma).powi(2)).exp();
                [(d, w), (-d, w)]
            })
            .collect();
        let z: f64 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter().map(|(d, w)| (d, w / z)).collect()
    } else {
        Vec::new()
    };
    exact_transition_matrix(
        target,
        &states,
        |x| {
            let mut out = Vec::new();
            if let GridKernel::Rwmh { .. } = kernel {
                for &(d, w) in &rw_weights {
                    out.push(Proposal {
                        y: vec![x[0] + d],
                        prob: w,
                        log_move_ratio: 0.0,
                    });
                }
                return out;
            }
            for &(e, we) in &eps {
                for (z, pz, ratio) in &moves {
                    let y = additive_forward(x, e, &MoveType::new(z.clone()), &vec![1.0; k])
                        .expect("dimensions checked");
                    out.push(Proposal {
                        y,
                        prob: we * pz,
                        log_move_ratio: *ratio,
                    });
                }
            }
            out
        },
        |y| grid.index_of(y),
    )
}

/// Builds the grid surrogate and delegates to [`check_detailed_balance_exact`].
pub fn check_detailed_balance_discretized<T: Target + ?Sized>(
    target: &T,
    kernel: &GridKernel,
    grid: &GridSpec,
) -> Result<Verdict> {
    let k = grid_transition_matrix(target, kernel, grid)?;
    let pi = target_masses(target, &k.states);
    let name = format!("grid-detailed-balance-{}", kernel.label());
    let v = check_detailed_balance_exact(&name, &k, &pi)?;
    let v = if matches!(kernel, GridKernel::UncorrectedTmcmc { .. }) {
        v.negative_control()
    } else {
        v
    };
    Ok(v)
}

/// Monte Carlo detailed-balance check for the dependent-z kernel on a 1-D
/// grid. For each grid pair the flux `pi_i K_ij` is averaged over draws of
/// the logits; both directions use the same draws, so the estimator of the
/// flux difference has its own standard error. The check passes when every
/// difference lies within four standard errors of zero (floored at 1e-12).
pub fn check_dependent_z_balance<T: Target + ?Sized>(
    target: &T,
    cfg: &DependentZConfig,
    grid: &GridSpec,
    mc_size: usize,
    seed: u64,
    omit_move_ratio: bool,
) -> Result<Verdict> {
    if mc_size < MIN_MC_SIZE {
        return Err(invalid("mc_size", format!("must be at least {MIN_MC_SIZE}")));
    }
    if cfg.dim() != 1 || target.dim() != 1 {
        return Err(invalid("dim", "the dependent-z check runs on a 1-D grid"));
    }
    grid.validate(1)?;
    let kernel = DependentZTmcmc::new(cfg.clone())?;
    let states = grid.states(1);
    let pi = target_masses(target, &states);
    let log_pi: Vec<f64> = states.iter().map(|s| target.log_density(s)).collect();
    let eps = grid.eps_weights();
    let n = states.len();
    let a = cfg.scales[0];
    // Jump of `m` grid steps per unit `eps`: the grid must be compatible with `a`.
    if (a - 1.0).abs() > 1e-12 {
        return Err(Error::GridIncompatible("dependent-z grid check needs a_1 = 1".into()));
    }
    // Pair (i, j = i + d), d in +-1..max_jump; accumulate difference sums.
    let mut pairs = Vec::new();
    for i in 0..n {
        for &(e, w) in &eps {
            let m = (e / grid.step).round() as usize;
            if i + m < n {
                pairs.push((i, i + m, w));
            }
        }
    }
    let mut sum = vec![0.0; pairs.len()];
    let mut sum_sq = vec![0.0; pairs.len()];
    let mut flux_sum = vec![0.0; pairs.len()];
    let mut rng = rng_from_seed(seed);
    for _ in 0..mc_size {
        let ln_pqr = kernel.draw_move_probs(&mut rng);
        let ratio_up = if omit_move_ratio { 0.0 } else { dependent_log_move_ratio(&ln_pqr, &[1]) };
        let ratio_down = if omit_move_ratio { 0.0 } else { dependent_log_move_ratio(&ln_pqr, &[-1]) };
        let p_up = ln_pqr[0][0].exp();
        let p_down = ln_pqr[0][1].exp();
        for (t, &(i, j, w)) in pairs.iter().enumerate() {
            let a_ij = metropolis_log_alpha(log_pi[i], log_pi[j], ratio_up, 0.0).0.exp();
            let a_ji = metropolis_log_alpha(log_pi[j], log_pi[i], ratio_down, 0.0).0.exp();
            let f_ij = pi[i] * w * p_up * a_ij;
            let f_ji = pi[j] * w * p_down * a_ji;
            let d = f_ij - f_ji;
            sum[t] += d;
            sum_sq[t] += d * d;
            flux_sum[t] += f_ij;
        }
    }
    let nn = mc_size as f64;
    let mut max_violation: f64 = 0.0;
    let mut max_se: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for t in 0..pairs.len() {
        let mean = sum[t] / nn;
        let var = (sum_sq[t] / nn - mean * mean).max(0.0) * nn / (nn - 1.0);
        let se = (var / nn).sqrt();
        max_violation = max_violation.max(mean.abs());
        max_se = max_se.max(se);
        if se > 0.0 {
            worst_z = worst_z.max(mean.abs() / se);
        }
    }
    let tol = 4.0 * max_se + 1e-12;
    let max_flux = flux_sum.iter().cloned().fold(0.0, f64::max) / nn;
    let v = Verdict::new(
        if omit_move_ratio {
            "dependent-z-balance-no-move-ratio"
        } else {
            "dependent-z-balance"
        },
        max_violation,
        tol,
    )
    .with_seed(seed)
    .with_details(json!({
        "mc_size": mc_size,
        "pairs": pairs.len(),
        "max_standard_error": max_se,
        "max_z_score": worst_z,
        "max_flux": max_flux,
    }));
    Ok(if omit_move_ratio { v.negative_control() } else { v })
}

/// The eight coordinate-move matrices. Column one is the sign pattern of the
/// first step, column two that of the second.
pub const TWO_STEP_MATRICES: [(&str, [[i8; 2]; 2]); 8] = [
    ("M1", [[1, 1], [1, -1]]),
    ("M2", [[-1, 1], [1, 1]]),
    ("M3", [[1, -1], [-1, -1]]),
    ("M4", [[-1, -1], [-1, 1]]),
    ("M1~", [[1, 1], [-1, 1]]),
    ("M2~", [[1, -1], [1, 1]]),
    ("M3~", [[-1, 1], [-1, -1]]),
    ("M4~", [[-1, -1], [1, -1]]),
];

/// Two additive moves with patterns given by the columns of `m`.
pub fn two_step_displacement(m: &[[i8; 2]; 2], x: &[f64], eps1: f64, eps2: f64) -> Result<Vec<f64>> {
    let z1 = MoveType::new(vec![m[0][0], m[1][0]]);
    let z2 = MoveType::new(vec![m[0][1], m[1][1]]);
    let mid = additive_forward(x, eps1, &z1, &[1.0, 1.0])?;
    let end = additive_forward(&mid, eps2, &z2, &[1.0, 1.0])?;
    Ok(vec![end[0] - x[0], end[1] - x[1]])
}

fn quadrant(x: &[f64]) -> usize {
    (x[0] < 0.0) as usize * 2 + (x[1] < 0.0) as usize
}

/// Constructive two-step reachability for the `k = 2` additive kernel with
/// `p = q = 1/2`, plus a simulated chain visiting all four quadrants.
pub fn check_two_step_reachability(seed: u64) -> Result<Verdict> {
    let mut rng = rng_from_seed(seed);
    let mut max_err: f64 = 0.0;
    let mut directions = [false; 4];
    for _ in 0..100 {
        let e1 = -rng.random::<f64>().ln();
        let e2 = -rng.random::<f64>().ln();
        let x = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
        for (_, m) in TWO_STEP_MATRICES.iter() {
            let got = two_step_displacement(m, &x, e1, e2)?;
            let want = [
                m[0][0] as f64 * e1 + m[0][1] as f64 * e2,
                m[1][0] as f64 * e1 + m[1][1] as f64 * e2,
            ];
            max_err = max_err.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
            if got[0] != 0.0 && got[1] != 0.0 {
                directions[quadrant(&got)] = true;
            }
        }
    }
    // No sign mixing: z_1 = z_2 in every step keeps x_2 - x_1 fixed, so from
    // x_1 < x_2 the region {x_1 > 0 > x_2} is out of reach.
    let mut blocked = true;
    let x = [-0.5, 0.5];
    for _ in 0..2000 {
        let mut y = x.to_vec();
        for _ in 0..2 {
            let s: i8 = if rng.random::<f64>() < 0.5 { 1 } else { -1 };
            let e = -rng.random::<f64>().ln() * 3.0;
            y = additive_forward(&y, e, &MoveType::new(vec![s, s]), &[1.0, 1.0])?;
        }
        if y[0] > 0.0 && y[1] < 0.0 {
            blocked = false;
        }
    }
    let target = IidGaussian::new(2)?;
    let kern = AdditiveTmcmc::new(TmcmcConfig::symmetric(2, 1.0))?;
    let trace = run_chain(&kern, &target, vec![0.0, 0.0], 10_000, chain_seed(seed, 1))?;
    let mut visited = [false; 4];
    for t in 0..trace.len() {
        let s = trace.state(t);
        if s[0] != 0.0 && s[1] != 0.0 {
            visited[quadrant(s)] = true;
        }
    }
    let all_dirs = directions.iter().all(|&b| b);
    let all_visited = visited.iter().all(|&b| b);
    let mut v = Verdict::new("two-step-reachability", max_err, 1e-12)
        .with_seed(seed)
        .with_details(json!({
            "matrix_identity_max_error": max_err,
            "two_step_directions_cover_all_quadrants": all_dirs,
            "chain_quadrants_visited": visited,
            "no_sign_mixing_blocks_opposite_quadrant": blocked,
        }));
    if !(all_dirs && all_visited && blocked) {
        v.passed = false;
        v.max_violation = f64::INFINITY;
    }
    Ok(v)
}

/// Structural checks of an integrator over a grid of `(L, dt)`:
/// reversibility at random phase points, and for `k <= 3` the determinant
/// of the central-difference Jacobian of the map.
#[derive(Clone, Debug)]
pub struct LeapfrogGrid {
    pub steps: Vec<usize>,
    pub dts: Vec<f64>,
    /// Total phase points for the reversibility check, spread over the grid.
    pub reversibility_points: usize,
    pub jacobian_points_per_cell: usize,
    pub fd_step: f64,
}

impl Default for LeapfrogGrid {
    fn default() -> Self {
        Self {
            steps: vec![1, 5, 20],
            dts: vec![0.01, 0.1, 0.3],
            reversibility_points: 1000,
            jacobian_points_per_cell: 10,
            fd_step: 1e-5,
        }
    }
}

fn random_phase_point<R: Rng + ?Sized>(rng: &mut R, k: usize) -> PhasePoint {
    let draw = |rng: &mut R| -> Vec<f64> { (0..k).map(|_| StandardNormal.sample(rng)).collect() };
    let x = draw(rng);
    let p = draw(rng);
    PhasePoint { x, p }
}

/// `det` of a small dense matrix by partial-pivot elimination.
fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for cc in c..n {
                a[r][cc] -= f * a[c][cc];
            }
        }
    }
    det
}

/// Central-difference Jacobian determinant of `(x, p) -> g^L(x, p)`.
pub fn numeric_jacobian_det<T: Target + ?Sized>(
    target: &T,
    start: &PhasePoint,
    cfg: &HmcConfig,
    integrator: Integrator,
    h: f64,
) -> Result<f64> {
    let k = start.x.len();
    let n = 2 * k;
    let flat = |z: &PhasePoint| -> Vec<f64> { z.x.iter().chain(&z.p).cloned().collect() };
    let unflat = |v: &[f64]| PhasePoint {
        x: v[..k].to_vec(),
        p: v[k..].to_vec(),
    };
    let base = flat(start);
    let mut jac = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[c] += h;
        minus[c] -= h;
        let fp = flat(&integrate(&unflat(&plus), cfg, target, integrator)?);
        let fm = flat(&integrate(&unflat(&minus), cfg, target, integrator)?);
        for r in 0..n {
            jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(determinant(jac))
}

/// Returns the reversibility and volume verdicts for one integrator.
pub fn check_leapfrog_structure<T: Target + ?Sized>(
    target: &T,
    grid: &LeapfrogGrid,
    integrator: Integrator,
    seed: u64,
) -> Result<Vec<Verdict>> {
    if !target.has_gradient() {
        return Err(Error::MissingGradient);
    }
    let k = target.dim();
    if grid.steps.is_empty() || grid.dts.is_empty() {
        return Err(invalid("grid", "needs at least one (L, dt) cell"));
    }
    let mut rng = rng_from_seed(seed);
    let cells: Vec<(usize, f64)> = grid
        .steps
        .iter()
        .flat_map(|&l| grid.dts.iter().map(move |&dt| (l, dt)))
        .collect();
    let per_cell = grid.reversibility_points.div_ceil(cells.len()).max(1);
    let mut rev: f64 = 0.0;
    let mut vol: f64 = 0.0;
    for &(l, dt) in &cells {
        let cfg = HmcConfig::new(l, dt, k);
        for _ in 0..per_cell {
            let z = random_phase_point(&mut rng, k);
            let end = integrate(&z, &cfg, target, integrator)?;
            let back = integrate(
                &PhasePoint {
                    x: end.x.clone(),
                    p: end.p.iter().map(|v| -v).collect(),
                },
                &cfg,
                target,
                integrator,
            )?;
            for i in 0..k {
                rev = rev.max((back.x[i] - z.x[i]).abs()).max((back.p[i] + z.p[i]).abs());
            }
        }
        if k <= 3 {
            for _ in 0..grid.jacobian_points_per_cell {
                let z = random_phase_point(&mut rng, k);
                let det = numeric_jacobian_det(target, &z, &cfg, integrator, grid.fd_step)?;
                vol = vol.max((det - 1.0).abs());
            }
        }
    }
    let tag = match integrator {
        Integrator::Leapfrog => "leapfrog",
        Integrator::Euler => "euler",
    };
    let details = json!({
        "steps": grid.steps,
        "dts": grid.dts,
        "dim": k,
        "points_per_cell": per_cell,
    });
    let mut out = vec![Verdict::new(format!("{tag}-reversibility"), rev, REVERSIBILITY_TOL)
        .with_seed(seed)
        .with_details(details.clone())];
    if k <= 3 {
        out.push(
            Verdict::new(format!("{tag}-volume-preservation"), vol, VOLUME_TOL)
                .with_seed(seed)
                .with_details(details),
        );
    }
    if integrator == Integrator::Euler {
        out = out.into_iter().map(Verdict::negative_control).collect();
    }
    Ok(out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median `|dH|` over trajectories with common starts and momenta at
/// `(L, dt)` and `(2L, dt/2)`; second-order integrators give a ratio near 4.
pub fn check_energy_scaling(k: usize, steps: usize, dt: f64, trajectories: usize, seed: u64) -> Result<Verdict> {
    let target = IidGaussian::new(k)?;
    let coarse = HmcConfig::new(steps, dt, k);
    let fine = HmcConfig::new(2 * steps, dt / 2.0, k);
    let mut rng = rng_from_seed(seed);
    let mut dh_coarse = Vec::with_capacity(trajectories);
    let mut dh_fine = Vec::with_capacity(trajectories);
    for _ in 0..trajectories {
        let z = random_phase_point(&mut rng, k);
        let h0 = hamiltonian(&target, &z, &coarse.mass);
        let a = integrate(&z, &coarse, &target, Integrator::Leapfrog)?;
        let b = integrate(&z, &fine, &target, Integrator::Leapfrog)?;
        dh_coarse.push((hamiltonian(&target, &a, &coarse.mass) - h0).abs());
        dh_fine.push((hamiltonian(&target, &b, &fine.mass) - h0).abs());
    }
    let mc = median(dh_coarse);
    let mf = median(dh_fine);
    let ratio = mc / mf;
    Ok(Verdict::new("leapfrog-energy-error-scaling", (ratio - 4.0).abs(), 0.5)
        .with_seed(seed)
        .with_details(json!({
            "dim": k,
            "coarse": {"steps": steps, "dt": dt, "median_abs_dh": mc},
            "fine": {"steps": 2 * steps, "dt": dt / 2.0, "median_abs_dh": mf},
            "ratio": ratio,
        })))
}

/// Moment test of `n` one-step proposals from `x` against a Gaussian law
/// `(mean, var)`: largest |z| over the per-coordinate mean and variance
/// statistics, against 4.
pub fn check_hmc_one_step_law<T: Target + ?Sized>(
    name: &str,
    target: &T,
    x: &[f64],
    cfg: &HmcConfig,
    mean: &[f64],
    var: &[f64],
    n: usize,
    seed: u64,
) -> Result<Verdict> {
    let k = x.len();
    if mean.len() != k || var.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: mean.len().min(var.len()),
        });
    }
    if n < 2 {
        return Err(invalid("n", "needs at least two proposals"));
    }
    let hmc = Hmc::new(cfg.clone())?;
    let mut rng = rng_from_seed(seed);
    let mut s1 = vec![0.0; k];
    let mut s2 = vec![0.0; k];
    for _ in 0..n {
        let p = hmc.draw_momentum(&mut rng);
        let end = integrate(&PhasePoint { x: x.to_vec(), p }, cfg, target, Integrator::Leapfrog)?;
        for i in 0..k {
            let d = end.x[i] - mean[i];
            s1[i] += d;
            s2[i] += d * d;
        }
    }
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    let mut emp_mean = Vec::with_capacity(k);
    let mut emp_var = Vec::with_capacity(k);
    for i in 0..k {
        let m = s1[i] / nf;
        let v = (s2[i] - nf * m * m) / (nf - 1.0);
        let z_mean = m / (var[i] / nf).sqrt();
        let z_var = (v - var[i]) / (var[i] * (2.0 / (nf - 1.0)).sqrt());
        worst = worst.max(z_mean.abs()).max(z_var.abs());
        emp_mean.push(mean[i] + m);
        emp_var.push(v);
    }
    Ok(Verdict::new(name, worst, 4.0).with_seed(seed).with_details(json!({
        "n": n,
        "dt": cfg.dt,
        "expected_mean": mean,
        "expected_var": var,
        "empirical_mean": emp_mean,
        "empirical_var": emp_var,
    })))
}

/// Invariance of `(x_1 - x_2) mod 2` along a `k = 2` lattice chain, and
/// whether both parity classes were visited.
pub fn lattice_parity_run(r: f64, n_iter: usize, seed: u64) -> Result<(u64, bool)> {
    let target = LatticeLaplace::new(2, 0.5)?;
    let kern = ZkTmcmc::new(2, r, 1.5)?;
    let trace = run_chain(&kern, &target, vec![0.0, 0.0], n_iter, seed)?;
    let parity = |s: &[f64]| ((s[0] - s[1]) as i64).rem_euclid(2);
    let mut changes = 0u64;
    let mut seen = [false; 2];
    let mut prev = 0;
    seen[0] = true;
    for t in 0..trace.len() {
        let p = parity(trace.state(t));
        seen[p as usize] = true;
        if p != prev {
            changes += 1;
        }
        prev = p;
    }
    Ok((changes, seen[0] && seen[1]))
}

/// Exact checks for the spin kernel (`k = 1..=4`) and the truncated lattice
/// kernel, plus negative controls.
pub fn discrete_exact_suite(seed: u64) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    let eps_grid = [(1.5, 0.5), (3.0, 0.5)];
    for k in 1..=4usize {
        for (coupling, p) in [(0.5, 0.5), (-0.3, 0.7)] {
            let t = IsingChain::new(k, coupling)?;
            let p_vec: Vec<f64> = (0..k).map(|i| p - 0.05 * i as f64).collect();
            let kern = IsingTmcmc::new(p_vec)?;
            let m = ising_exact_matrix(&t, &kern, &eps_grid)?;
            let pi = target_masses(&t, &m.states);
            let mut v = check_detailed_balance_exact(&format!("ising-k{k}-J{coupling}-p{p}-detailed-balance"), &m, &pi)?;
            let connected = m.is_strongly_connected(1e-14);
            let stat = m.stationarity_violation(&pi);
            let fixed = m.stationary_distribution();
            let fixed_err = fixed.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if !connected || stat > EXACT_TOL || fixed_err > 1e-12 {
                v.passed = false;
            }
            v.details["strongly_connected"] = json!(connected);
            v.details["stationary_vector_error"] = json!(fixed_err);
            out.push(v);
        }
    }
    // Corrupted kernel: one off-diagonal entry shifted by 1e-3.
    let t = IsingChain::new(3, 0.5)?;
    let mut m = ising_exact_matrix(&t, &IsingTmcmc::new(vec![0.5; 3])?, &eps_grid)?;
    let pi = target_masses(&t, &m.states);
    corrupt_entry(&mut m, 0, 1, 1e-3);
    out.push(check_detailed_balance_exact("ising-k3-corrupted-entry", &m, &pi)?.negative_control());

    for r in [0.0, 0.3, 1.0] {
        let t = LatticeLaplace::new(1, 0.7)?;
        let m = lattice_exact_matrix(&t, 1, 5, r, 1.5)?;
        let pi = target_masses(&t, &m.states);
        let mut v = check_detailed_balance_exact(&format!("lattice-k1-R5-r{r}-detailed-balance"), &m, &pi)?;
        v.details["strongly_connected"] = json!(m.is_strongly_connected(1e-14));
        out.push(v);
    }
    let t = LatticeLaplace::new(1, 0.7)?;
    let mut m = lattice_exact_matrix(&t, 1, 5, 0.3, 1.5)?;
    let pi = target_masses(&t, &m.states);
    corrupt_entry(&mut m, 3, 4, 1e-3);
    out.push(check_detailed_balance_exact("lattice-k1-corrupted-entry", &m, &pi)?.negative_control());

    // Reducibility on Z^2 without single-coordinate moves.
    let t = LatticeLaplace::new(2, 0.5)?;
    for r in [0.0, 0.3] {
        let m = lattice_exact_matrix(&t, 2, 3, r, 1.5)?;
        let connected = m.is_strongly_connected(1e-14);
        let reach = m.reachable_from(0, 1e-14);
        let parity_closed = m
            .states
            .iter()
            .zip(&reach)
            .all(|(s, &seen)| !seen || ((s[0] - s[1]) as i64).rem_euclid(2) == ((m.states[0][0] - m.states[0][1]) as i64).rem_euclid(2));
        let mut v = Verdict::new(
            format!("lattice-k2-r{r}-irreducible"),
            if connected { 0.0 } else { 1.0 },
            0.0,
        )
        .with_details(json!({
            "strongly_connected": connected,
            "reachable_set_within_parity_class": parity_closed,
            "reachable_states": reach.iter().filter(|&&b| b).count(),
            "states": m.len(),
        }));
        if r == 0.0 {
            v = v.negative_control();
        }
        out.push(v);
    }
    let (changes, _) = lattice_parity_run(0.0, 100_000, chain_seed(seed, 10))?;
    out.push(
        Verdict::new("lattice-k2-r0-parity-invariant", changes as f64, 0.0)
            .with_seed(chain_seed(seed, 10))
            .with_details(json!({"iterations": 100_000, "parity_changes": changes})),
    );
    let (_, both) = lattice_parity_run(0.3, 10_000, chain_seed(seed, 11))?;
    out.push(
        Verdict::new("lattice-k2-r0.3-both-parities-visited", if both { 0.0 } else { 1.0 }, 0.0)
            .with_seed(chain_seed(seed, 11))
            .with_details(json!({"iterations": 10_000})),
    );
    Ok(out)
}

/// Grid-surrogate checks for the continuous kernels, with the uncorrected
/// asymmetric kernel as negative control. `corrupt` turns the additive
/// check into the uncorrected kernel without marking it as a control.
pub fn continuous_grid_suite(corrupt: bool) -> Result<Vec<Verdict>> {
    let t1 = IidGaussian::new(1)?;
    let grid = GridSpec::centered(25, 0.25, 8, 0.8);
    let mut out = Vec::new();
    for (f, b) in [(0.5, 0.5), (0.7, 0.3)] {
        let kernel = if corrupt {
            GridKernel::UncorrectedTmcmc { forward: f, backward: b }
        } else {
            GridKernel::AdditiveTmcmc { forward: f, backward: b }
        };
        let mut v = check_detailed_balance_discretized(&t1, &kernel, &grid)?;
        v.expected_failure = false;
        v.check_name = format!("{}-p{f}", v.check_name);
        out.push(v);
    }
    out.push(check_detailed_balance_discretized(&t1, &GridKernel::Rwmh { sigma: 0.9 }, &grid)?);
    let mut v = check_detailed_balance_discretized(
        &t1,
        &GridKernel::UncorrectedTmcmc {
            forward: 0.8,
            backward: 0.2,
        },
        &grid,
    )?;
    v.check_name.push_str("-p0.8");
    out.push(v);
    let t2 = crate::targets::FnTarget::new(2, |x: &[f64]| {
        -0.5 * (x[0] * x[0] - 1.2 * x[0] * x[1] + x[1] * x[1]) / (1.0 - 0.36)
    })?;
    let grid2 = GridSpec::centered(5, 0.5, 3, 0.7);
    out.push(check_detailed_balance_discretized(
        &t2,
        &GridKernel::GeneralTmcmc {
            forward: vec![0.4, 0.3],
            backward: vec![0.35, 0.45],
        },
        &grid2,
    )?);
    Ok(out)
}

/// Dependent-z Monte Carlo checks: a generic asymmetric configuration, the
/// near-degenerate symmetric one, and the move-ratio-free negative control.
pub fn dependent_z_suite(mc_size: usize, seed: u64) -> Result<Vec<Verdict>> {
    use crate::tmcmc::Covariance;
    let t = IidGaussian::new(1)?;
    let grid = GridSpec::centered(15, 0.3, 6, 0.8);
    let generic = DependentZConfig {
        mu: [vec![0.8], vec![-0.4], vec![0.1]],
        sigma: [
            Covariance::Diagonal(vec![0.5]),
            Covariance::Diagonal(vec![1.5]),
            Covariance::Diagonal(vec![0.3]),
        ],
        eps_scale: 0.8,
        scales: vec![1.0],
    };
    let mut degenerate = DependentZConfig::standard(1, 0.8);
    degenerate.sigma = [
        Covariance::Diagonal(vec![1e-12]),
        Covariance::Diagonal(vec![1e-12]),
        Covariance::Diagonal(vec![1e-12]),
    ];
    let mut out = Vec::new();
    let mut v = check_dependent_z_balance(&t, &generic, &grid, mc_size, chain_seed(seed, 20), false)?;
    v.check_name.push_str("-generic");
    out.push(v);
    let mut v = check_dependent_z_balance(&t, &degenerate, &grid, mc_size, chain_seed(seed, 21), false)?;
    v.check_name.push_str("-degenerate");
    out.push(v);
    out.push(check_dependent_z_balance(&t, &generic, &grid, mc_size, chain_seed(seed, 22), true)?);
    Ok(out)
}

/// Leapfrog structure, energy scaling and the one-step proposal law.
pub fn hmc_suite(seed: u64) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    let grid = LeapfrogGrid::default();
    let gauss = crate::targets::AnisotropicGaussian::new(vec![1.0, 2.5, 0.4])?;
    out.extend(check_leapfrog_structure(&gauss, &grid, Integrator::Leapfrog, chain_seed(seed, 30))?);
    // Non-quadratic potential: U = sum(x^4/4 + x^2/2).
    let quartic = crate::targets::FnTarget::new(2, |x: &[f64]| -x.iter().map(|v| v.powi(4) / 4.0 + v * v / 2.0).sum::<f64>())?
        .with_gradient(|x, g| {
            for i in 0..x.len() {
                g[i] = -(x[i].powi(3) + x[i]);
            }
        })
        .with_name("quartic");
    let small = LeapfrogGrid {
        dts: vec![0.01, 0.05, 0.1],
        ..LeapfrogGrid::default()
    };
    for mut v in check_leapfrog_structure(&quartic, &small, Integrator::Leapfrog, chain_seed(seed, 31))? {
        v.check_name.push_str("-quartic");
        out.push(v);
    }
    out.extend(check_leapfrog_structure(&gauss, &grid, Integrator::Euler, chain_seed(seed, 32))?);
    out.push(check_energy_scaling(10, 10, 0.2, 2000, chain_seed(seed, 33))?);

    let t = IidGaussian::new(3)?;
    let cfg = HmcConfig::new(1, 0.3, 3);
    let x = [1.0, -0.5, 0.2];
    let (mean, var) = crate::baseline::hmc_one_step_proposal_params(&x, &t, &cfg)?;
    out.push(check_hmc_one_step_law("hmc-one-step-law", &t, &x, &cfg, &mean, &var, 100_000, chain_seed(seed, 34))?);
    // Variance and drift linear in dt instead of quadratic.
    let lin_mean: Vec<f64> = x.iter().map(|v| v - 0.5 * cfg.dt * v).collect();
    let lin_var = vec![cfg.dt; 3];
    out.push(
        check_hmc_one_step_law(
            "hmc-one-step-law-linear-in-dt",
            &t,
            &x,
            &cfg,
            &lin_mean,
            &lin_var,
            100_000,
            chain_seed(seed, 34),
        )?
        .negative_control(),
    );
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Continuous,
    DependentZ,
    Reachability,
    Hmc,
    Discrete,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::All,
        Suite::Continuous,
        Suite::DependentZ,
        Suite::Reachability,
        Suite::Hmc,
        Suite::Discrete,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Continuous => "continuous",
            Suite::DependentZ => "dependent-z",
            Suite::Reachability => "reachability",
            Suite::Hmc => "hmc",
            Suite::Discrete => "discrete",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub mc_size: usize,
    /// Drop the move-type ratio from the continuous grid check; the suite
    /// then reports a failure.
    pub corrupt_acceptance: bool,
    pub exec: Execution,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            mc_size: MIN_MC_SIZE,
            corrupt_acceptance: false,
            exec: Execution::Parallel,
        }
    }
}

/// Runs the requested suites concurrently; verdict order is fixed.
pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<Verdict>> {
    let parts: Vec<Suite> = match suite {
        Suite::All => vec![
            Suite::Continuous,
            Suite::DependentZ,
            Suite::Reachability,
            Suite::Hmc,
            Suite::Discrete,
        ],
        s => vec![s],
    };
    let results = par_map(parts, opts.exec, |s| match s {
        Suite::Continuous => continuous_grid_suite(opts.corrupt_acceptance),
        Suite::DependentZ => dependent_z_suite(opts.mc_size, opts.seed),
        Suite::Reachability => Ok(vec![check_two_step_reachability(chain_seed(opts.seed, 40))?]),
        Suite::Hmc => hmc_suite(opts.seed),
        Suite::Discrete => discrete_exact_suite(opts.seed),
        Suite::All => unreachable!(),
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_pass_rule() {
        assert!(Verdict::new("a", 1e-11, 1e-10).passed);
        assert!(!Verdict::new("a", f64::NAN, 1e-10).passed);
        assert!(Verdict::new("a", 1.0, 0.1).negative_control().is_ok());
    }

    #[test]
    fn symmetric_uniform_has_zero_violation() {
        let n = 4;
        let data = vec![0.25; n * n];
        let m = TransitionMatrix::from_dense((0..n).map(|i| vec![i as f64]).collect(), data).unwrap();
        let v = check_detailed_balance_exact("u", &m, &[0.25; 4]).unwrap();
        assert_eq!(v.max_violation, 0.0);
    }

    #[test]
    fn determinant_small() {
        assert!((determinant(vec![vec![2.0, 1.0], vec![1.0, 3.0]]) - 5.0).abs() < 1e-14);
        assert!((determinant(vec![vec![0.0, 1.0], vec![1.0, 0.0]]) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn grid_rejects_oversize() {
        let t = IidGaussian::new(1).unwrap();
        let g = GridSpec::centered(31, 0.2, 4, 1.0);
        assert!(matches!(
            check_detailed_balance_discretized(&t, &GridKernel::Rwmh { sigma: 1.0 }, &g),
            Err(Error::GridIncompatible(_))
        ));
        let g = GridSpec::centered(10, 0.2, 10, 1.0);
        assert!(check_detailed_balance_discretized(&t, &GridKernel::Rwmh { sigma: 1.0 }, &g).is_err());
    }

    #[test]
    fn first_matrix_example() {
        let d = two_step_displacement(&TWO_STEP_MATRICES[0].1, &[0.3, -0.2], 1.0, 1.0).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-15 && d[1].abs() < 1e-15);
    }
}

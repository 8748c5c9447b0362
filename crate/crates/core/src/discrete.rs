//! Discrete-state TMCMC: the spin-flip kernel built from `sgn(x_i +- eps)`
//! and the lattice kernel on `Z^k` mixing a single-coordinate update with a
//! shared-innovation update of all coordinates. Also exact transition
//! matrices for small enumerable spaces.

use crate::chain::{finish_step, metropolis_log_alpha, ChainState, Kernel, StepInfo};
use crate::error::{invalid, Error, Result};
use crate::normal;
use crate::rng::ChainRng;
use crate::targets::{SupportKind, Target};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::{HashMap, VecDeque};

/// Largest enumerable state space for exact matrices.
pub const MAX_EXACT_STATES: usize = 5000;

/// A spin configuration in `{-1, +1}^k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinState {
    spins: Vec<i8>,
}

impl SpinState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("spins", "every component must be +1 or -1"));
        }
        Ok(Self { spins })
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.spins.iter().map(|&s| s as f64).collect()
    }

    /// All `2^k` configurations, first coordinate varying slowest.
    pub fn enumerate(k: usize) -> Vec<SpinState> {
        (0..1usize << k)
            .map(|bits| SpinState {
                spins: (0..k)
                    .map(|i| if bits >> (k - 1 - i) & 1 == 1 { -1 } else { 1 })
                    .collect(),
            })
            .collect()
    }
}

/// A lattice point, optionally confined to the box `|x_i| <= box_radius`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticeState {
    coords: Vec<i64>,
    box_radius: Option<i64>,
}

impl LatticeState {
    pub fn new(coords: Vec<i64>, box_radius: Option<i64>) -> Result<Self> {
        if let Some(r) = box_radius {
            if r < 1 {
                return Err(invalid("box_radius", "must be at least 1"));
            }
            if coords.iter().any(|c| c.abs() > r) {
                return Err(invalid("coords", format!("outside the box of radius {r}")));
            }
        }
        Ok(Self { coords, box_radius })
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| c as f64).collect()
    }

    /// Every point of the box `{-R..R}^k`, first coordinate varying slowest.
    pub fn enumerate_box(k: usize, radius: i64) -> Result<Vec<LatticeState>> {
        let side = (2 * radius + 1) as usize;
        let n = side.checked_pow(k as u32).unwrap_or(usize::MAX);
        if n > MAX_EXACT_STATES {
            return Err(Error::StateSpaceTooLarge {
                states: n,
                limit: MAX_EXACT_STATES,
            });
        }
        Ok((0..n)
            .map(|mut idx| {
                let mut c = vec![0i64; k];
                for i in (0..k).rev() {
                    c[i] = (idx % side) as i64 - radius;
                    idx /= side;
                }
                LatticeState {
                    coords: c,
                    box_radius: Some(radius),
                }
            })
            .collect())
    }
}

/// `sgn(x + eps)` with `sgn(0)` undefined; callers keep `eps > 1`.
fn sgn(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Draws `eps` on `(1, inf)` as `1 + |N(0, s^2)|`, redrawing the null event `eps == 1`.
fn draw_eps_above_one<R: Rng + ?Sized>(rng: &mut R, s: f64) -> f64 {
    loop {
        let n: f64 = StandardNormal.sample(rng);
        let e = 1.0 + s * n.abs();
        if e > 1.0 {
            return e;
        }
    }
}

/// Spin kernel: coordinate `i` takes the forward map `sgn(x_i + eps)` with
/// probability `p_i` and the backward map `sgn(x_i - eps)` otherwise.
/// Because `eps > 1`, forward always lands on `+1` and backward on `-1`, so
/// the move type that returns `x'` to `x` has probability `prod f(x_i)` with
/// `f(+1) = p_i`, `f(-1) = 1 - p_i`.
#[derive(Clone, Debug)]
pub struct IsingTmcmc {
    p: Vec<f64>,
    eps_scale: f64,
}

impl IsingTmcmc {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(invalid("dim", "must be at least 1"));
        }
        if p.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(invalid("p", "each p_i must lie in (0, 1)"));
        }
        Ok(Self { p, eps_scale: 1.0 })
    }

    fn ln_f(&self, i: usize, s: f64) -> f64 {
        if s > 0.0 {
            self.p[i].ln()
        } else {
            (1.0 - self.p[i]).ln()
        }
    }

    /// Proposal for given `eps` and move directions (`true` = forward).
    pub fn propose(&self, x: &[f64], eps: f64, forward: &[bool]) -> (Vec<f64>, f64) {
        let y: Vec<f64> = x
            .iter()
            .zip(forward)
            .map(|(&xi, &f)| if f { sgn(xi + eps) } else { sgn(xi - eps) })
            .collect();
        let ratio = (0..x.len()).map(|i| self.ln_f(i, x[i]) - self.ln_f(i, y[i])).sum();
        (y, ratio)
    }
}

impl Kernel for IsingTmcmc {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo> {
        let k = self.p.len();
        if target.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: target.dim(),
            });
        }
        let eps = draw_eps_above_one(rng, self.eps_scale);
        let forward: Vec<bool> = (0..k).map(|i| rng.random::<f64>() < self.p[i]).collect();
        let (y, ratio) = self.propose(&state.x, eps, &forward);
        let log_pi_y = target.log_density(&y);
        Ok(finish_step(state, y, log_pi_y, ratio, 0.0, rng))
    }

    fn name(&self) -> &'static str {
        "ising-tmcmc"
    }
}

/// `Pr([eps] = m)` for `eps = 1 + |N(0, s^2)|`, `m >= 1`.
pub fn jump_mass(m: i64, s: f64) -> f64 {
    if m < 1 {
        return 0.0;
    }
    2.0 * (normal::sf((m - 1) as f64 / s) - normal::sf(m as f64 / s))
}

/// `Pr([eps] > m)`.
pub fn jump_tail(m: i64, s: f64) -> f64 {
    2.0 * normal::sf(m.max(0) as f64 / s)
}

/// Lattice kernel on `Z^k`. With probability `r` one uniformly chosen
/// coordinate moves by `+-[eps]`; otherwise every coordinate moves by
/// `z_i [eps]` with independent fair signs and a single `eps`.
#[derive(Clone, Debug)]
pub struct ZkTmcmc {
    k: usize,
    r: f64,
    jump_scale: f64,
    box_radius: Option<i64>,
}

impl ZkTmcmc {
    pub fn new(k: usize, r: f64, jump_scale: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(invalid("r", "must lie in [0, 1]"));
        }
        if !(jump_scale > 0.0 && jump_scale.is_finite()) {
            return Err(invalid("jump_scale", "must be positive"));
        }
        Ok(Self {
            k,
            r,
            jump_scale,
            box_radius: None,
        })
    }

    /// Rejects proposals leaving `|x_i| <= radius`.
    pub fn with_box(mut self, radius: i64) -> Result<Self> {
        if radius < 1 {
            return Err(invalid("box_radius", "must be at least 1"));
        }
        self.box_radius = Some(radius);
        Ok(self)
    }

    fn in_box(&self, y: &[f64]) -> bool {
        match self.box_radius {
            Some(r) => y.iter().all(|v| v.abs() <= r as f64),
            None => true,
        }
    }
}

impl Kernel for ZkTmcmc {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo> {
        if target.dim() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: target.dim(),
            });
        }
        let mut y = state.x.clone();
        let single = rng.random::<f64>() < self.r;
        if single {
            let j = rng.random_range(0..self.k);
            let m = draw_eps_above_one(rng, self.jump_scale).floor();
            let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
            y[j] += sign * m;
        } else {
            let m = draw_eps_above_one(rng, self.jump_scale).floor();
            for v in y.iter_mut() {
                let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
                *v += sign * m;
            }
        }
        let log_pi_y = if self.in_box(&y) {
            target.log_density(&y)
        } else {
            f64::NEG_INFINITY
        };
        Ok(finish_step(state, y, log_pi_y, 0.0, 0.0, rng))
    }

    fn name(&self) -> &'static str {
        "zk-tmcmc"
    }
}

/// One proposal of a finite-state kernel: target point, its probability,
/// and the log move-type ratio entering the acceptance.
#[derive(Clone, Debug)]
pub struct Proposal {
    pub y: Vec<f64>,
    pub prob: f64,
    pub log_move_ratio: f64,
}

/// Dense row-stochastic matrix over an enumerated state list.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub states: Vec<Vec<f64>>,
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_dense(states: Vec<Vec<f64>>, data: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { states, n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Fails with the first row whose sum is off by more than `tol`.
    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            let s: f64 = self.row(i).iter().sum();
            if (s - 1.0).abs() > tol || self.row(i).iter().any(|v| *v < 0.0) {
                return Err(Error::NotStochastic { row: i, sum: s });
            }
        }
        Ok(())
    }

    /// `max |pi_i K_ij - pi_j K_ji|`.
    pub fn detailed_balance_violation(&self, pi: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((pi[i] * self.get(i, j) - pi[j] * self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `max_j |(pi K)_j - pi_j|`.
    pub fn stationarity_violation(&self, pi: &[f64]) -> f64 {
        (0..self.n)
            .map(|j| {
                let s: f64 = (0..self.n).map(|i| pi[i] * self.get(i, j)).sum();
                (s - pi[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn has_positive_diagonal(&self) -> bool {
        (0..self.n).any(|i| self.get(i, i) > 0.0)
    }

    fn reach(&self, from: usize, threshold: f64, transpose: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..self.n {
                let w = if transpose { self.get(j, i) } else { self.get(i, j) };
                if !seen[j] && w > threshold {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    /// Strong connectivity of the graph with edges `K_ij > threshold`.
    pub fn is_strongly_connected(&self, threshold: f64) -> bool {
        if self.n == 0 {
            return true;
        }
        self.reach(0, threshold, false).iter().all(|&v| v) && self.reach(0, threshold, true).iter().all(|&v| v)
    }

    /// States reachable from `from` along edges `K_ij > threshold`.
    pub fn reachable_from(&self, from: usize, threshold: f64) -> Vec<bool> {
        self.reach(from, threshold, false)
    }

    /// Solves `pi K = pi`, `sum pi = 1` by Gaussian elimination. Cubic in
    /// the number of states; meant for small spaces.
    pub fn stationary_distribution(&self) -> Vec<f64> {
        let n = self.n;
        // Rows of A = K^T - I with the last equation replaced by sum(pi) = 1.
        let mut a = vec![vec![0.0; n + 1]; n];
        for (r, row) in a.iter_mut().enumerate() {
            for c in 0..n {
                row[c] = self.get(c, r) - if r == c { 1.0 } else { 0.0 };
            }
        }
        for c in 0..n {
            a[n - 1][c] = 1.0;
        }
        a[n - 1][n] = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for c in col..=n {
                a[col][c] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col];
                    if f != 0.0 {
                        for c in col..=n {
                            a[r][c] -= f * a[col][c];
                        }
                    }
                }
            }
        }
        a.iter().map(|row| row[n]).collect()
    }

    /// Dense CSV: a `state` label column followed by one column per target state.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let label = |s: &[f64]| s.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ");
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["state".to_string()];
        header.extend(self.states.iter().map(|s| label(s)));
        out.write_record(&header)?;
        for i in 0..self.n {
            let mut row = vec![label(&self.states[i])];
            row.extend(self.row(i).iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Normalized target masses over an enumerated state list.
pub fn target_masses<T: Target + ?Sized>(target: &T, states: &[Vec<f64>]) -> Vec<f64> {
    let logs: Vec<f64> = states.iter().map(|s| target.log_density(s)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Builds `K` from an enumerated state list and a proposal generator.
/// Acceptance uses the same Metropolis path as the sampling kernels;
/// proposals that fall outside the state list are rejected, and all
/// rejected mass stays on the diagonal.
pub fn exact_transition_matrix<T, P, L>(
    target: &T,
    states: &[Vec<f64>],
    proposals: P,
    index_of: L,
) -> Result<TransitionMatrix>
where
    T: Target + ?Sized,
    P: Fn(&[f64]) -> Vec<Proposal>,
    L: Fn(&[f64]) -> Option<usize>,
{
    let n = states.len();
    if n > MAX_EXACT_STATES {
        return Err(Error::StateSpaceTooLarge {
            states: n,
            limit: MAX_EXACT_STATES,
        });
    }
    let mut data = vec![0.0; n * n];
    for (i, x) in states.iter().enumerate() {
        let log_pi_x = target.log_density(x);
        for prop in proposals(x) {
            let (log_alpha, log_pi_y) = match index_of(&prop.y) {
                Some(j) => {
                    let lp = target.log_density(&prop.y);
                    (metropolis_log_alpha(log_pi_x, lp, prop.log_move_ratio, 0.0).0, Some(j))
                }
                None => (f64::NEG_INFINITY, None),
            };
            let a = log_alpha.exp();
            if let Some(j) = log_pi_y {
                data[i * n + j] += prop.prob * a;
            }
            data[i * n + i] += prop.prob * (1.0 - a);
        }
    }
    let k = TransitionMatrix::from_dense(states.to_vec(), data)?;
    k.check_stochastic(1e-12)?;
    Ok(k)
}

fn index_map(states: &[Vec<f64>]) -> HashMap<Vec<i64>, usize> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.iter().map(|v| *v as i64).collect(), i))
        .collect()
}

fn lookup(map: &HashMap<Vec<i64>, usize>, y: &[f64]) -> Option<usize> {
    if y.iter().any(|v| v.fract() != 0.0) {
        return None;
    }
    map.get(&y.iter().map(|v| *v as i64).collect::<Vec<_>>()).copied()
}

/// Exact spin-kernel matrix averaged over a finite `eps` grid `(value, weight)`,
/// computed as `sum_e w_e K(eps_e)`. Every grid value must exceed 1.
pub fn ising_exact_matrix<T: Target + ?Sized>(
    target: &T,
    kernel: &IsingTmcmc,
    eps_grid: &[(f64, f64)],
) -> Result<TransitionMatrix> {
    if target.support() != SupportKind::BinarySpins {
        return Err(invalid("target", "spin kernel needs a binary-spin target"));
    }
    let k = kernel.p.len();
    if target.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: target.dim(),
        });
    }
    if k > 12 {
        return Err(Error::StateSpaceTooLarge {
            states: 1 << k.min(62),
            limit: MAX_EXACT_STATES,
        });
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|(e, w)| !(*e > 1.0) || !(*w > 0.0)) {
        return Err(invalid("eps_grid", "needs values > 1 with positive weights"));
    }
    let wsum: f64 = eps_grid.iter().map(|(_, w)| w).sum();
    if (wsum - 1.0).abs() > 1e-12 {
        return Err(invalid("eps_grid", "weights must sum to 1"));
    }
    let states: Vec<Vec<f64>> = SpinState::enumerate(k).iter().map(|s| s.to_f64()).collect();
    let map = index_map(&states);
    let n = states.len();
    let mut total = vec![0.0; n * n];
    for &(eps, w) in eps_grid {
        let part = exact_transition_matrix(
            target,
            &states,
            |x| {
                (0..1usize << k)
                    .map(|bits| {
                        let forward: Vec<bool> = (0..k).map(|i| bits >> i & 1 == 1).collect();
                        let prob: f64 = (0..k)
                            .map(|i| if forward[i] { kernel.p[i] } else { 1.0 - kernel.p[i] })
                            .product();
                        let (y, ratio) = kernel.propose(x, eps, &forward);
                        Proposal {
                            y,
                            prob,
                            log_move_ratio: ratio,
                        }
                    })
                    .collect()
            },
            |y| lookup(&map, y),
        )?;
        for (t, v) in total.iter_mut().zip(&part.data) {
            *t += w * v;
        }
    }
    let m = TransitionMatrix::from_dense(states, total)?;
    m.check_stochastic(1e-12)?;
    Ok(m)
}

/// Exact lattice-kernel matrix on the box `{-R..R}^k`. Jumps of size `m`
/// carry mass `Pr([eps] = m)`; jumps longer than `2R` always leave the box
/// and are listed as a single rejected proposal carrying the tail mass.
pub fn lattice_exact_matrix<T: Target + ?Sized>(
    target: &T,
    k: usize,
    radius: i64,
    r: f64,
    jump_scale: f64,
) -> Result<TransitionMatrix> {
    ZkTmcmc::new(k, r, jump_scale)?.with_box(radius)?;
    if target.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: target.dim(),
        });
    }
    let states: Vec<Vec<f64>> = LatticeState::enumerate_box(k, radius)?
        .iter()
        .map(|s| s.to_f64())
        .collect();
    let map = index_map(&states);
    let max_jump = 2 * radius;
    let mut masses: Vec<(i64, f64)> = (1..=max_jump).map(|m| (m, jump_mass(m, jump_scale))).collect();
    masses.push((max_jump + 1, jump_tail(max_jump, jump_scale)));
    let signs = 1usize << k;
    exact_transition_matrix(
        target,
        &states,
        |x| {
            let mut out = Vec::new();
            if r > 0.0 {
                for j in 0..k {
                    for sign in [1.0, -1.0] {
                        for &(m, w) in &masses {
                            let mut y = x.to_vec();
                            y[j] += sign * m as f64;
                            out.push(Proposal {
                                y,
                                prob: r / k as f64 * 0.5 * w,
                                log_move_ratio: 0.0,
                            });
                        }
                    }
                }
            }
            if r < 1.0 {
                for bits in 0..signs {
                    for &(m, w) in &masses {
                        let y: Vec<f64> = (0..k)
                            .map(|i| x[i] + if bits >> i & 1 == 1 { -1.0 } else { 1.0 } * m as f64)
                            .collect();
                        out.push(Proposal {
                            y,
                            prob: (1.0 - r) / signs as f64 * w,
                            log_move_ratio: 0.0,
                        });
                    }
                }
            }
            out
        },
        |y| lookup(&map, y),
    )
}

//! Chain state, the kernel trait, the shared Metropolis acceptance path and
//! the trace recorder.

use crate::error::{invalid, Error, Result};
use crate::rng::{chain_rng, rng_from_seed, ChainRng};
use crate::targets::Target;
use rand::Rng;
use serde::Serialize;

/// Current position of a chain together with its cached log-density.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub log_density: f64,
}

impl ChainState {
    pub fn new<T: Target + ?Sized>(target: &T, x: Vec<f64>) -> Result<Self> {
        if x.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: x.len(),
            });
        }
        let log_density = target.log_density(&x);
        if !log_density.is_finite() {
            return Err(invalid("x0", "initial state has non-finite log-density"));
        }
        Ok(Self { x, log_density })
    }
}

/// What happened in one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub accepted: bool,
    /// `min(0, log acceptance ratio)`; `-inf` for auto-rejected proposals.
    pub log_alpha: f64,
    /// Log of the uniform used for the accept/reject decision.
    pub log_u: f64,
    /// Proposal had a non-finite log-density or Jacobian.
    pub auto_rejected: bool,
}

/// A Markov transition kernel.
pub trait Kernel: Send + Sync {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo>;

    fn name(&self) -> &'static str;
}

/// Log of the Metropolis-Hastings acceptance probability, with anything
/// non-finite on the proposal side mapped to `-inf`. Returns the value and
/// whether it was forced.
pub fn metropolis_log_alpha(
    log_pi_x: f64,
    log_pi_y: f64,
    log_move_ratio: f64,
    log_jacobian: f64,
) -> (f64, bool) {
    if log_pi_y.is_nan() || log_pi_y == f64::INFINITY || !log_jacobian.is_finite() {
        return (f64::NEG_INFINITY, true);
    }
    if log_pi_y == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, true);
    }
    let r = log_pi_y - log_pi_x + log_move_ratio + log_jacobian;
    if r.is_nan() {
        return (f64::NEG_INFINITY, true);
    }
    (r.min(0.0), false)
}

/// Draws the decision uniform and applies `ln U < log_alpha`.
pub fn accept_reject(rng: &mut ChainRng, log_alpha: f64) -> (bool, f64) {
    let u: f64 = rng.random();
    let log_u = u.ln();
    (log_u < log_alpha, log_u)
}

/// Shared tail of every kernel: decide, and on acceptance move the state.
pub(crate) fn finish_step(
    state: &mut ChainState,
    proposal: Vec<f64>,
    log_pi_y: f64,
    log_move_ratio: f64,
    log_jacobian: f64,
    rng: &mut ChainRng,
) -> StepInfo {
    let (log_alpha, auto_rejected) =
        metropolis_log_alpha(state.log_density, log_pi_y, log_move_ratio, log_jacobian);
    let (accepted, log_u) = accept_reject(rng, log_alpha);
    if accepted {
        state.x = proposal;
        state.log_density = log_pi_y;
    }
    StepInfo {
        accepted,
        log_alpha,
        log_u,
        auto_rejected,
    }
}

/// Which coordinates a trace keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Record {
    All,
    /// The first `n` coordinates (clamped to the dimension).
    First(usize),
    /// Only accept flags and log-densities.
    None,
}

impl Record {
    fn width(self, dim: usize) -> usize {
        match self {
            Record::All => dim,
            Record::First(n) => n.min(dim),
            Record::None => 0,
        }
    }
}

/// Ordered record of a run. Position `t` holds the state after transition `t`.
#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub kernel: String,
    pub dim: usize,
    pub seed: u64,
    /// Number of coordinates stored per iteration.
    pub width: usize,
    /// Row-major `n_iter x width`.
    pub states: Vec<f64>,
    pub accepted: Vec<bool>,
    pub log_density: Vec<f64>,
    pub log_alpha: Vec<f64>,
    pub log_u: Vec<f64>,
    pub auto_rejected: u64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.width..(t + 1) * self.width]
    }

    /// One recorded coordinate from iteration `from` onwards.
    pub fn coordinate(&self, i: usize, from: usize) -> Vec<f64> {
        assert!(i < self.width, "coordinate {i} not recorded");
        (from..self.len()).map(|t| self.states[t * self.width + i]).collect()
    }

    /// Drops the first `burn_in` iterations.
    pub fn discard(&self, burn_in: usize) -> Trace {
        let b = burn_in.min(self.len());
        Trace {
            kernel: self.kernel.clone(),
            dim: self.dim,
            seed: self.seed,
            width: self.width,
            states: self.states[b * self.width..].to_vec(),
            accepted: self.accepted[b..].to_vec(),
            log_density: self.log_density[b..].to_vec(),
            log_alpha: self.log_alpha[b..].to_vec(),
            log_u: self.log_u[b..].to_vec(),
            auto_rejected: self.auto_rejected,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["iter".to_string(), "accepted".into(), "log_density".into()];
        header.extend((0..self.width).map(|i| format!("x_{i}")));
        out.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![
                t.to_string(),
                (self.accepted[t] as u8).to_string(),
                self.log_density[t].to_string(),
            ];
            row.extend(self.state(t).iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub n_iter: usize,
    pub record: Record,
}

impl RunOptions {
    pub fn new(n_iter: usize) -> Self {
        Self {
            n_iter,
            record: Record::All,
        }
    }

    pub fn record(mut self, record: Record) -> Self {
        self.record = record;
        self
    }
}

/// Runs `opts.n_iter` transitions from `x0` with an explicit RNG.
pub fn run_chain_with_rng<K, T>(
    kernel: &K,
    target: &T,
    x0: Vec<f64>,
    opts: RunOptions,
    rng: &mut ChainRng,
    seed: u64,
) -> Result<Trace>
where
    K: Kernel + ?Sized,
    T: Target + ?Sized,
{
    if opts.n_iter == 0 {
        return Err(invalid("n_iter", "must be at least 1"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x0", "must be finite"));
    }
    let mut state = ChainState::new(target, x0)?;
    let dim = target.dim();
    let width = opts.record.width(dim);
    let n = opts.n_iter;
    let mut trace = Trace {
        kernel: kernel.name().to_string(),
        dim,
        seed,
        width,
        states: Vec::with_capacity(n * width),
        accepted: Vec::with_capacity(n),
        log_density: Vec::with_capacity(n),
        log_alpha: Vec::with_capacity(n),
        log_u: Vec::with_capacity(n),
        auto_rejected: 0,
    };
    for _ in 0..n {
        let info = kernel.step(target, &mut state, rng)?;
        trace.states.extend_from_slice(&state.x[..width]);
        trace.accepted.push(info.accepted);
        trace.log_density.push(state.log_density);
        trace.log_alpha.push(info.log_alpha);
        trace.log_u.push(info.log_u);
        trace.auto_rejected += info.auto_rejected as u64;
    }
    Ok(trace)
}

/// Runs a single chain seeded directly by `seed`.
pub fn run_chain<K, T>(kernel: &K, target: &T, x0: Vec<f64>, n_iter: usize, seed: u64) -> Result<Trace>
where
    K: Kernel + ?Sized,
    T: Target + ?Sized,
{
    let mut rng = rng_from_seed(seed);
    run_chain_with_rng(kernel, target, x0, RunOptions::new(n_iter), &mut rng, seed)
}

/// How independent work items are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is on; otherwise
    /// identical to `Sequential`.
    #[default]
    Parallel,
}

/// Order-preserving map over independent items.
pub fn par_map<I, R, F>(items: Vec<I>, exec: Execution, f: F) -> Vec<R>
where
    I: Send,
    R: Send,
    F: Fn(I) -> R + Send + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

/// Runs one chain per starting point; chain `c` uses `chain_rng(seed, c)`.
/// Results are in chain order whatever the schedule.
pub fn run_chains<K, T>(
    kernel: &K,
    target: &T,
    starts: Vec<Vec<f64>>,
    opts: RunOptions,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Trace>>
where
    K: Kernel + ?Sized,
    T: Target + ?Sized,
{
    let items: Vec<(usize, Vec<f64>)> = starts.into_iter().enumerate().collect();
    par_map(items, exec, |(c, x0)| {
        let mut rng = chain_rng(seed, c as u64);
        run_chain_with_rng(kernel, target, x0, opts, &mut rng, crate::rng::chain_seed(seed, c as u64))
    })
    .into_iter()
    .collect()
}

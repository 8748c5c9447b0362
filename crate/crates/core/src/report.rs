//! Per-run summaries shared by the sampling front ends.

use crate::chain::Trace;
use crate::diagnostics::{acceptance_rate, iact_and_ess, mean, split_rhat, variance};
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub sd: f64,
    /// Summed over chains.
    pub ess: f64,
    /// Monte Carlo standard error of the pooled mean.
    pub mcse: f64,
    /// Split-chain R-hat; absent for a single short chain.
    pub rhat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub kernel: String,
    pub target: String,
    pub seed: u64,
    pub n_chains: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub accept_rate: Vec<f64>,
    pub mean_accept_rate: f64,
    pub coordinates: Vec<CoordinateSummary>,
    /// Zero when timing is disabled.
    pub wall_ms: f64,
}

/// Summarizes recorded coordinates of `traces` after dropping `burn_in`
/// iterations, optionally through a map from chain space to reporting space.
pub fn summarize(
    kernel: &str,
    target: &str,
    seed: u64,
    traces: &[Trace],
    burn_in: usize,
    wall_ms: f64,
) -> Result<RunSummary> {
    summarize_mapped(kernel, target, seed, traces, burn_in, wall_ms, |x| x.to_vec())
}

pub fn summarize_mapped<F>(
    kernel: &str,
    target: &str,
    seed: u64,
    traces: &[Trace],
    burn_in: usize,
    wall_ms: f64,
    map: F,
) -> Result<RunSummary>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let first = traces.first().ok_or(Error::EmptyTrace)?;
    let n_iter = first.len();
    let post: Vec<Trace> = traces.iter().map(|t| t.discard(burn_in)).collect();
    if post.iter().any(|t| t.is_empty()) {
        return Err(Error::EmptyTrace);
    }
    // columns[c][chain] = series of mapped coordinate c.
    let width = map(post[0].state(0)).len();
    let mut columns: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(post.len()); width];
    for t in &post {
        let mut cols = vec![Vec::with_capacity(t.len()); width];
        for s in 0..t.len() {
            for (c, v) in map(t.state(s)).into_iter().enumerate() {
                cols[c].push(v);
            }
        }
        for (c, col) in cols.into_iter().enumerate() {
            columns[c].push(col);
        }
    }
    let mut coordinates = Vec::with_capacity(width);
    for chains in &columns {
        let pooled: Vec<f64> = chains.iter().flatten().cloned().collect();
        let mut ess = 0.0;
        for c in chains {
            ess += iact_and_ess(c)?.ess;
        }
        let var = variance(&pooled);
        let rhat = if chains.iter().all(|c| c.len() >= 4) {
            Some(split_rhat(chains)?)
        } else {
            None
        };
        coordinates.push(CoordinateSummary {
            mean: mean(&pooled),
            sd: var.sqrt(),
            ess,
            mcse: (var / ess).sqrt(),
            rhat,
        });
    }
    let accept_rate = post.iter().map(acceptance_rate).collect::<Result<Vec<_>>>()?;
    Ok(RunSummary {
        kernel: kernel.to_string(),
        target: target.to_string(),
        seed,
        n_chains: traces.len(),
        n_iter,
        burn_in,
        mean_accept_rate: mean(&accept_rate),
        accept_rate,
        coordinates,
        wall_ms,
    })
}

//! Logistic-regression benchmark on the O-ring data: additive TMCMC against
//! RWMH, four chains each, with a cross-kernel agreement check.

use crate::baseline::Rwmh;
use crate::chain::{run_chains, Execution, Kernel, Record, RunOptions};
use crate::error::{invalid, Result};
use crate::report::{summarize_mapped, RunSummary};
use crate::rng::{chain_seed, rng_from_seed};
use crate::targets::{ChallengerLogistic, Target};
use crate::tmcmc::{AdditiveTmcmc, TmcmcConfig};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChallengerSpec {
    pub prior_sd: f64,
    pub n_chains: usize,
    pub n_iter: usize,
    /// Fraction of each chain discarded as burn-in.
    pub burn_in_frac: f64,
    pub seed: u64,
    /// Run both kernels in the coordinates `theta` with
    /// `beta = mode + L theta`, where `L L'` is the Laplace covariance.
    pub precondition: bool,
    /// TMCMC `eps` scale in the sampling coordinates.
    pub tmcmc_scale: f64,
    /// RWMH step size in the sampling coordinates.
    pub rwmh_scale: f64,
    /// Starting points are drawn with this many Laplace standard deviations.
    pub overdispersion: f64,
    pub timing: bool,
}

impl Default for ChallengerSpec {
    fn default() -> Self {
        Self {
            prior_sd: 10.0,
            n_chains: 4,
            n_iter: 200_000,
            burn_in_frac: 0.1,
            seed: 1986,
            precondition: true,
            tmcmc_scale: 1.7,
            rwmh_scale: 1.7,
            overdispersion: 3.0,
            timing: true,
        }
    }
}

impl ChallengerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_sd > 0.0 && self.prior_sd.is_finite()) {
            return Err(invalid("prior_sd", "must be positive"));
        }
        if self.n_chains < 2 {
            return Err(invalid("n_chains", "needs at least 2 chains for R-hat"));
        }
        if !(0.0..0.9).contains(&self.burn_in_frac) {
            return Err(invalid("burn_in_frac", "must lie in [0, 0.9)"));
        }
        let kept = self.n_iter - self.burn_in();
        if kept < crate::diagnostics::MIN_SERIES {
            return Err(invalid("n_iter", "needs at least 100 post burn-in iterations"));
        }
        for (name, v) in [
            ("tmcmc_scale", self.tmcmc_scale),
            ("rwmh_scale", self.rwmh_scale),
            ("overdispersion", self.overdispersion),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn burn_in(&self) -> usize {
        (self.n_iter as f64 * self.burn_in_frac).floor() as usize
    }
}

/// `log pi(shift + L theta)`; the Jacobian is constant and dropped.
struct Affine<'a> {
    inner: &'a ChallengerLogistic,
    shift: [f64; 2],
    chol: [[f64; 2]; 2],
}

impl Affine<'_> {
    fn to_beta(&self, theta: &[f64]) -> Vec<f64> {
        affine_map(&self.shift, &self.chol, theta)
    }
}

fn affine_map(shift: &[f64; 2], chol: &[[f64; 2]; 2], theta: &[f64]) -> Vec<f64> {
    vec![
        shift[0] + chol[0][0] * theta[0],
        shift[1] + chol[1][0] * theta[0] + chol[1][1] * theta[1],
    ]
}

impl Target for Affine<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.inner.log_density(&self.to_beta(theta))
    }

    fn name(&self) -> String {
        format!("{} (affine)", self.inner.name())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Agreement {
    /// `|mean_tmcmc - mean_rwmh| / sqrt(se_tmcmc^2 + se_rwmh^2)` per coefficient.
    pub z: [f64; 2],
    pub within_three_se: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChallengerReport {
    pub spec: ChallengerSpec,
    pub laplace_mode: Vec<f64>,
    pub laplace_cov: [[f64; 2]; 2],
    pub tmcmc: RunSummary,
    pub rwmh: RunSummary,
    pub agreement: Agreement,
    pub slope_negative: bool,
    pub max_rhat: f64,
    /// Set when the two kernels disagree by more than three combined SEs.
    pub disagreement: bool,
}

fn run_kernel<K: Kernel>(
    kernel: &K,
    label: &str,
    target: &Affine<'_>,
    starts: Vec<Vec<f64>>,
    spec: &ChallengerSpec,
    seed: u64,
    exec: Execution,
) -> Result<RunSummary> {
    let t0 = Instant::now();
    let opts = RunOptions::new(spec.n_iter).record(Record::All);
    let traces = run_chains(kernel, target, starts, opts, seed, exec)?;
    let wall_ms = if spec.timing {
        t0.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    summarize_mapped(
        label,
        &target.inner.name(),
        seed,
        &traces,
        spec.burn_in(),
        wall_ms,
        |th| target.to_beta(th),
    )
}

pub fn run_challenger(spec: &ChallengerSpec, exec: Execution) -> Result<ChallengerReport> {
    spec.validate()?;
    let posterior = ChallengerLogistic::new(spec.prior_sd)?;
    let (mode, cov) = posterior.laplace_approximation();
    let (shift, chol) = if spec.precondition {
        let l00 = cov[0][0].sqrt();
        let l10 = cov[1][0] / l00;
        let l11 = (cov[1][1] - l10 * l10).sqrt();
        ([mode[0], mode[1]], [[l00, 0.0], [l10, l11]])
    } else {
        ([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    };
    let target = Affine {
        inner: &posterior,
        shift,
        chol,
    };
    // Overdispersed starts around the mode, in sampling coordinates.
    let mut rng = rng_from_seed(chain_seed(spec.seed, u64::MAX));
    let sd = [cov[0][0].sqrt(), cov[1][1].sqrt()];
    let starts: Vec<Vec<f64>> = (0..spec.n_chains)
        .map(|_| {
            let n: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            let beta = [
                mode[0] + spec.overdispersion * sd[0] * n[0],
                mode[1] + spec.overdispersion * sd[1] * n[1],
            ];
            // Invert the lower-triangular map.
            let t0 = (beta[0] - shift[0]) / chol[0][0];
            let t1 = (beta[1] - shift[1] - chol[1][0] * t0) / chol[1][1];
            vec![t0, t1]
        })
        .collect();
    let tm = AdditiveTmcmc::new(TmcmcConfig::symmetric(2, spec.tmcmc_scale))?;
    let rw = Rwmh::isotropic(2, spec.rwmh_scale)?;
    let tmcmc = run_kernel(&tm, "additive-tmcmc", &target, starts.clone(), spec, chain_seed(spec.seed, 1), exec)?;
    let rwmh = run_kernel(&rw, "rwmh", &target, starts, spec, chain_seed(spec.seed, 2), exec)?;
    let mut z = [0.0; 2];
    for (i, zi) in z.iter_mut().enumerate() {
        let a = &tmcmc.coordinates[i];
        let b = &rwmh.coordinates[i];
        *zi = (a.mean - b.mean).abs() / (a.mcse * a.mcse + b.mcse * b.mcse).sqrt();
    }
    let within = z.iter().all(|v| *v <= 3.0);
    let max_rhat = tmcmc
        .coordinates
        .iter()
        .chain(&rwmh.coordinates)
        .filter_map(|c| c.rhat)
        .fold(1.0, f64::max);
    Ok(ChallengerReport {
        spec: spec.clone(),
        laplace_mode: mode,
        laplace_cov: cov,
        slope_negative: tmcmc.coordinates[1].mean < 0.0 && rwmh.coordinates[1].mean < 0.0,
        agreement: Agreement {
            z,
            within_three_se: within,
        },
        disagreement: !within,
        max_rhat,
        tmcmc,
        rwmh,
    })
}

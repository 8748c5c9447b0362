//! Optimal-scaling study: sweep the proposal scale `l / sqrt(k)` for
//! additive TMCMC and RWMH on iid Gaussian targets and locate the
//! efficiency-maximizing scale.

use super::{acceptance_rate, iact_and_ess, mean, mean_acceptance_probability, variance};
use crate::baseline::Rwmh;
use crate::chain::{par_map, run_chain_with_rng, Execution, Kernel, Record, RunOptions};
use crate::error::{invalid, Result};
use crate::rng::{rng_from_seed, splitmix64};
use crate::targets::{IidGaussian, Target};
use crate::tmcmc::{AdditiveTmcmc, TmcmcConfig};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKernel {
    AdditiveTmcmc,
    Rwmh,
}

impl StudyKernel {
    pub fn label(self) -> &'static str {
        match self {
            StudyKernel::AdditiveTmcmc => "additive-tmcmc",
            StudyKernel::Rwmh => "rwmh",
        }
    }

    fn id(self) -> u64 {
        match self {
            StudyKernel::AdditiveTmcmc => 1,
            StudyKernel::Rwmh => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetFamily {
    IidGaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudySpec {
    pub kernels: Vec<StudyKernel>,
    pub dims: Vec<usize>,
    pub ell_grid: Vec<f64>,
    pub n_iter: usize,
    pub burn_in: usize,
    pub target_family: TargetFamily,
    pub seeds: Vec<u64>,
    /// ESS per iteration is averaged over this many leading coordinates.
    pub tracked_coords: usize,
    /// Record wall-clock time per cell; off for byte-reproducible output.
    pub timing: bool,
}

impl Default for ScalingStudySpec {
    fn default() -> Self {
        Self {
            kernels: vec![StudyKernel::AdditiveTmcmc, StudyKernel::Rwmh],
            dims: vec![10, 30, 100],
            ell_grid: (0..9).map(|i| 1.2 + 0.3 * i as f64).collect(),
            n_iter: 200_000,
            burn_in: 20_000,
            target_family: TargetFamily::IidGaussian,
            seeds: vec![1, 2, 3, 4],
            tracked_coords: 20,
            timing: true,
        }
    }
}

impl ScalingStudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(invalid("kernels", "must not be empty"));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(invalid("dims", "must be a nonempty list of positive integers"));
        }
        if self.ell_grid.is_empty() || self.ell_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(invalid("ell_grid", "must be a nonempty list of positive values"));
        }
        if self.ell_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("ell_grid", "must be strictly increasing"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must not be empty"));
        }
        if self.burn_in >= self.n_iter {
            return Err(invalid("burn_in", "must be smaller than n_iter"));
        }
        if self.n_iter - self.burn_in < super::MIN_SERIES {
            return Err(invalid("n_iter", "needs at least 100 post burn-in iterations"));
        }
        if self.tracked_coords == 0 {
            return Err(invalid("tracked_coords", "must be at least 1"));
        }
        Ok(())
    }
}

/// One `(kernel, k, l, seed)` run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyCell {
    pub kernel: StudyKernel,
    pub k: usize,
    pub ell: f64,
    pub seed: u64,
    pub accept_rate: f64,
    /// Mean of `min(1, alpha)` over post burn-in proposals.
    pub mean_accept_prob: f64,
    pub ess_per_iter: f64,
    pub wall_ms: f64,
}

/// Optimum for one `(kernel, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalRow {
    pub kernel: StudyKernel,
    pub k: usize,
    pub ell_star: f64,
    pub accept_rate: f64,
    /// Across-seed standard error of the acceptance rate; absent with one seed.
    pub accept_rate_se: Option<f64>,
    pub ess_per_iter: f64,
    /// `l*` came from a concave quadratic fit rather than the raw grid maximum.
    pub smoothed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub spec: ScalingStudySpec,
    pub cells: Vec<StudyCell>,
    pub optimal: Vec<OptimalRow>,
}

fn cell_seed(seed: u64, kernel: StudyKernel, k: usize, ell: f64) -> u64 {
    splitmix64(seed ^ splitmix64(kernel.id() ^ splitmix64(k as u64 ^ splitmix64(ell.to_bits()))))
}

fn run_cell(spec: &ScalingStudySpec, kernel: StudyKernel, k: usize, ell: f64, seed: u64) -> Result<StudyCell> {
    let target = IidGaussian::new(k)?;
    let scale = ell / (k as f64).sqrt();
    let mut rng = rng_from_seed(cell_seed(seed, kernel, k, ell));
    let x0 = target.sample_exact(&mut rng).expect("gaussian has exact draws");
    let opts = RunOptions::new(spec.n_iter).record(Record::First(spec.tracked_coords));
    let start = Instant::now();
    let trace = match kernel {
        StudyKernel::AdditiveTmcmc => {
            let kern = AdditiveTmcmc::new(TmcmcConfig::symmetric(k, scale))?;
            run_with(&kern, &target, x0, opts, &mut rng, seed)?
        }
        StudyKernel::Rwmh => {
            let kern = Rwmh::isotropic(k, scale)?;
            run_with(&kern, &target, x0, opts, &mut rng, seed)?
        }
    };
    let wall_ms = if spec.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let post = trace.discard(spec.burn_in);
    let n = post.len() as f64;
    let mut ess = Vec::with_capacity(post.width);
    for i in 0..post.width {
        ess.push(iact_and_ess(&post.coordinate(i, 0))?.ess / n);
    }
    Ok(StudyCell {
        kernel,
        k,
        ell,
        seed,
        accept_rate: acceptance_rate(&post)?,
        mean_accept_prob: mean_acceptance_probability(&post)?,
        ess_per_iter: mean(&ess),
        wall_ms,
    })
}

fn run_with<K: Kernel>(
    kern: &K,
    target: &IidGaussian,
    x0: Vec<f64>,
    opts: RunOptions,
    rng: &mut crate::rng::ChainRng,
    seed: u64,
) -> Result<crate::chain::Trace> {
    run_chain_with_rng(kern, target, x0, opts, rng, seed)
}

/// Least-squares quadratic through `(x, y)`; returns `(a, b, c)` of `a x^2 + b x + c`.
fn quadratic_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if x.len() < 3 {
        return None;
    }
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let mut p = 1.0;
        for (j, sj) in s.iter_mut().enumerate() {
            *sj += p;
            if j < 3 {
                t[j] += p * yi;
            }
            p *= xi;
        }
    }
    // Normal equations in the basis (1, x, x^2).
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut coef = [0.0; 3];
    for (col, c) in coef.iter_mut().enumerate() {
        let mut mm = m;
        for r in 0..3 {
            mm[r][col] = t[r];
        }
        *c = det(&mm) / d;
    }
    Some((coef[2], coef[1], coef[0]))
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    for i in 1..xs.len() {
        if x <= xs[i] {
            let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] * (1.0 - w) + ys[i] * w;
        }
    }
    *ys.last().unwrap()
}

/// Locates `l*` for one `(kernel, k)` from its cells. The seed-averaged ESS
/// per iteration is smoothed by a quadratic fitted over the five grid points
/// around the raw maximum; the acceptance rate at `l*` is interpolated.
pub fn optimal_row(ell_grid: &[f64], cells: &[&StudyCell]) -> OptimalRow {
    let kernel = cells[0].kernel;
    let k = cells[0].k;
    let mut ess = Vec::with_capacity(ell_grid.len());
    let mut ar = Vec::with_capacity(ell_grid.len());
    let mut ar_se = Vec::with_capacity(ell_grid.len());
    for &ell in ell_grid {
        let at: Vec<&&StudyCell> = cells.iter().filter(|c| c.ell == ell).collect();
        let e: Vec<f64> = at.iter().map(|c| c.ess_per_iter).collect();
        let a: Vec<f64> = at.iter().map(|c| c.accept_rate).collect();
        ess.push(mean(&e));
        ar.push(mean(&a));
        ar_se.push(if a.len() > 1 {
            (variance(&a) / a.len() as f64).sqrt()
        } else {
            f64::NAN
        });
    }
    let best = (0..ess.len()).max_by(|&i, &j| ess[i].total_cmp(&ess[j])).unwrap();
    let lo = best.saturating_sub(2);
    let hi = (best + 3).min(ell_grid.len());
    let mut ell_star = ell_grid[best];
    let mut smoothed = false;
    if let Some((a, b, _)) = quadratic_fit(&ell_grid[lo..hi], &ess[lo..hi]) {
        if a < 0.0 {
            let v = -b / (2.0 * a);
            if v >= ell_grid[lo] && v <= ell_grid[hi - 1] {
                ell_star = v;
                smoothed = true;
            }
        }
    }
    let se = interpolate(ell_grid, &ar_se, ell_star);
    OptimalRow {
        kernel,
        k,
        ell_star,
        accept_rate: interpolate(ell_grid, &ar, ell_star),
        accept_rate_se: se.is_finite().then_some(se),
        ess_per_iter: interpolate(ell_grid, &ess, ell_star),
        smoothed,
    }
}

/// Runs the grid. Cells are independent and are scheduled through
/// `par_map`; results come back in grid order whatever the schedule.
pub fn run_scaling_study(spec: &ScalingStudySpec, exec: Execution) -> Result<StudyReport> {
    spec.validate()?;
    let mut grid = Vec::new();
    for &kernel in &spec.kernels {
        for &k in &spec.dims {
            for &ell in &spec.ell_grid {
                for &seed in &spec.seeds {
                    grid.push((kernel, k, ell, seed));
                }
            }
        }
    }
    let cells: Vec<StudyCell> = par_map(grid, exec, |(kernel, k, ell, seed)| run_cell(spec, kernel, k, ell, seed))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut optimal = Vec::new();
    for &kernel in &spec.kernels {
        for &k in &spec.dims {
            let group: Vec<&StudyCell> = cells.iter().filter(|c| c.kernel == kernel && c.k == k).collect();
            optimal.push(optimal_row(&spec.ell_grid, &group));
        }
    }
    Ok(StudyReport {
        spec: spec.clone(),
        cells,
        optimal,
    })
}

impl StudyReport {
    /// `kernel,k,ell,seed,accept_rate,ess_per_iter,wall_ms`.
    pub fn write_grid_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kernel", "k", "ell", "seed", "accept_rate", "ess_per_iter", "wall_ms"])?;
        for c in &self.cells {
            out.write_record([
                c.kernel.label().to_string(),
                c.k.to_string(),
                c.ell.to_string(),
                c.seed.to_string(),
                c.accept_rate.to_string(),
                c.ess_per_iter.to_string(),
                c.wall_ms.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Long format: `kernel,k,ell,seed,metric,value`.
    pub fn write_long_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kernel", "k", "ell", "seed", "metric", "value"])?;
        for c in &self.cells {
            for (metric, value) in [
                ("accept_rate", c.accept_rate),
                ("mean_accept_prob", c.mean_accept_prob),
                ("ess_per_iter", c.ess_per_iter),
            ] {
                out.write_record([
                    c.kernel.label().to_string(),
                    c.k.to_string(),
                    c.ell.to_string(),
                    c.seed.to_string(),
                    metric.to_string(),
                    value.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "spec": self.spec,
            "optimal": self.optimal,
        })
    }
}

/// Acceptance at a fixed proposal scale with no `1/sqrt(k)` shrinkage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedScaleAcceptance {
    pub kernel: StudyKernel,
    pub k: usize,
    pub scale: f64,
    /// Fraction of accepted proposals.
    pub empirical: f64,
    /// Mean of `min(1, alpha)`; usable when acceptances are too rare to count.
    pub mean_accept_prob: f64,
}

/// Runs one chain on the `k`-dimensional iid Gaussian from an exact draw
/// with `eps` scale (TMCMC) or step size (RWMH) equal to `scale`.
pub fn fixed_scale_acceptance(
    kernel: StudyKernel,
    k: usize,
    scale: f64,
    n_iter: usize,
    seed: u64,
) -> Result<FixedScaleAcceptance> {
    let target = IidGaussian::new(k)?;
    let mut rng = rng_from_seed(cell_seed(seed, kernel, k, scale));
    let x0 = target.sample_exact(&mut rng).expect("gaussian has exact draws");
    let opts = RunOptions::new(n_iter).record(Record::None);
    let trace = match kernel {
        StudyKernel::AdditiveTmcmc => {
            let kern = AdditiveTmcmc::new(TmcmcConfig::symmetric(k, scale))?;
            run_with(&kern, &target, x0, opts, &mut rng, seed)?
        }
        StudyKernel::Rwmh => {
            let kern = Rwmh::isotropic(k, scale)?;
            run_with(&kern, &target, x0, opts, &mut rng, seed)?
        }
    };
    Ok(FixedScaleAcceptance {
        kernel,
        k,
        scale,
        empirical: acceptance_rate(&trace)?,
        mean_accept_prob: mean_acceptance_probability(&trace)?,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_fit_recovers_parabola() {
        let x = [1.0, 1.5, 2.0, 2.5, 3.0];
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v * v + 8.0 * v + 1.0).collect();
        let (a, b, c) = quadratic_fit(&x, &y).unwrap();
        assert!((a + 2.0).abs() < 1e-9 && (b - 8.0).abs() < 1e-9 && (c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spec_validation() {
        let mut s = ScalingStudySpec::default();
        assert!(s.validate().is_ok());
        s.burn_in = s.n_iter;
        assert!(s.validate().is_err());
        let s = ScalingStudySpec {
            dims: vec![0],
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn small_study_is_reproducible_across_schedules() {
        let spec = ScalingStudySpec {
            dims: vec![5],
            ell_grid: vec![1.5, 2.4, 3.3],
            n_iter: 3000,
            burn_in: 300,
            seeds: vec![7, 8],
            tracked_coords: 3,
            timing: false,
            ..Default::default()
        };
        let a = run_scaling_study(&spec, Execution::Sequential).unwrap();
        let b = run_scaling_study(&spec, Execution::Parallel).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.optimal.len(), 2);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_grid_csv(&mut buf_a).unwrap();
        b.write_grid_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }
}

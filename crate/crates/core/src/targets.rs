//! Target distributions.
//!
//! All targets are evaluated on `&[f64]` states. Discrete families encode
//! spins as `±1.0` and lattice points as integer-valued floats; a state
//! outside the declared support has log-density `-inf`.

use crate::error::{invalid, Error, Result};
use crate::normal::LN_SQRT_2PI;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    Continuous,
    BinarySpins,
    IntegerLattice,
}

/// Curvature sandwich `-M I <= Hess log pi <= -m I` and the mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogConcaveMeta {
    pub min_curvature: f64,
    pub max_curvature: f64,
    pub mode: Vec<f64>,
}

pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn support(&self) -> SupportKind {
        SupportKind::Continuous
    }

    fn log_density(&self, x: &[f64]) -> f64;

    fn has_gradient(&self) -> bool {
        false
    }

    /// Writes the gradient of the log-density at `x` into `grad`.
    fn grad_log_density(&self, _x: &[f64], _grad: &mut [f64]) -> Result<()> {
        Err(Error::MissingGradient)
    }

    fn log_concave_meta(&self) -> Option<LogConcaveMeta> {
        None
    }

    /// An exact draw from the target, for families where that is cheap.
    fn sample_exact(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    fn name(&self) -> String;
}

impl<T: Target + ?Sized> Target for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn support(&self) -> SupportKind {
        (**self).support()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn has_gradient(&self) -> bool {
        (**self).has_gradient()
    }
    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        (**self).grad_log_density(x, grad)
    }
    fn log_concave_meta(&self) -> Option<LogConcaveMeta> {
        (**self).log_concave_meta()
    }
    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        (**self).sample_exact(rng)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

fn check_dim(k: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    Ok(())
}

/// Product of `k` standard normals, normalized.
#[derive(Clone, Debug)]
pub struct IidGaussian {
    dim: usize,
}

impl IidGaussian {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim })
    }
}

impl Target for IidGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let ss: f64 = x.iter().map(|v| v * v).sum();
        -(self.dim as f64) * LN_SQRT_2PI - 0.5 * ss
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        for (g, v) in grad.iter_mut().zip(x) {
            *g = -v;
        }
        Ok(())
    }

    fn log_concave_meta(&self) -> Option<LogConcaveMeta> {
        Some(LogConcaveMeta {
            min_curvature: 1.0,
            max_curvature: 1.0,
            mode: vec![0.0; self.dim],
        })
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some((0..self.dim).map(|_| StandardNormal.sample(rng)).collect())
    }

    fn name(&self) -> String {
        format!("iid-gaussian(k={})", self.dim)
    }
}

/// Independent Gaussians with precisions `lambda_i`, normalized.
#[derive(Clone, Debug)]
pub struct AnisotropicGaussian {
    precisions: Vec<f64>,
    log_norm: f64,
}

impl AnisotropicGaussian {
    pub fn new(precisions: Vec<f64>) -> Result<Self> {
        check_dim(precisions.len())?;
        if let Some(bad) = precisions.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid("precisions", format!("{bad} is not a positive finite precision")));
        }
        let log_norm = precisions.iter().map(|l| 0.5 * l.ln() - LN_SQRT_2PI).sum();
        Ok(Self {
            precisions,
            log_norm,
        })
    }

    pub fn precisions(&self) -> &[f64] {
        &self.precisions
    }
}

impl Target for AnisotropicGaussian {
    fn dim(&self) -> usize {
        self.precisions.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let q: f64 = x.iter().zip(&self.precisions).map(|(v, l)| l * v * v).sum();
        self.log_norm - 0.5 * q
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        for ((g, v), l) in grad.iter_mut().zip(x).zip(&self.precisions) {
            *g = -l * v;
        }
        Ok(())
    }

    fn log_concave_meta(&self) -> Option<LogConcaveMeta> {
        let min = self.precisions.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.precisions.iter().cloned().fold(0.0, f64::max);
        Some(LogConcaveMeta {
            min_curvature: min,
            max_curvature: max,
            mode: vec![0.0; self.dim()],
        })
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(
            self.precisions
                .iter()
                .map(|l| {
                    let z: f64 = StandardNormal.sample(rng);
                    z / l.sqrt()
                })
                .collect(),
        )
    }

    fn name(&self) -> String {
        format!("anisotropic-gaussian(k={})", self.dim())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChallengerRecord {
    pub flight_no: u32,
    pub failure: u8,
    pub temp_f: f64,
}

const CHALLENGER_CSV: &str = include_str!("../data/challenger.csv");

pub const CHALLENGER_HEADER: [&str; 3] = ["flight_no", "failure", "temp_f"];

fn parse_challenger<R: std::io::Read>(reader: R) -> Result<Vec<ChallengerRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CHALLENGER_HEADER {
        return Err(Error::Data(format!(
            "expected header {:?}, found {:?}",
            CHALLENGER_HEADER,
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let rec: ChallengerRecord = row?;
        if rec.failure > 1 {
            return Err(Error::Data(format!("flight {}: failure must be 0 or 1", rec.flight_no)));
        }
        if !rec.temp_f.is_finite() {
            return Err(Error::Data(format!("flight {}: non-finite temperature", rec.flight_no)));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    Ok(out)
}

/// The embedded O-ring failure dataset (23 launches).
pub fn challenger_data() -> Vec<ChallengerRecord> {
    parse_challenger(CHALLENGER_CSV.as_bytes()).expect("embedded dataset is well formed")
}

pub fn load_challenger_csv(path: &Path) -> Result<Vec<ChallengerRecord>> {
    parse_challenger(std::fs::File::open(path)?)
}

/// Checks the embedded dataset's shape: 23 rows, 7 failures, temperatures in [53, 81].
pub fn check_challenger_integrity(records: &[ChallengerRecord]) -> Result<()> {
    if records.len() != 23 {
        return Err(Error::Data(format!("expected 23 rows, found {}", records.len())));
    }
    let failures: u32 = records.iter().map(|r| r.failure as u32).sum();
    if failures != 7 {
        return Err(Error::Data(format!("expected 7 failures, found {failures}")));
    }
    if records.iter().any(|r| !(53.0..=81.0).contains(&r.temp_f)) {
        return Err(Error::Data("temperature outside [53, 81]".into()));
    }
    Ok(())
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression posterior for O-ring failure against launch
/// temperature with independent `N(0, prior_sd^2)` priors on intercept and
/// slope. Unnormalized.
#[derive(Clone, Debug)]
pub struct ChallengerLogistic {
    failures: Vec<f64>,
    temps: Vec<f64>,
    prior_sd: f64,
    temp_offset: f64,
}

impl ChallengerLogistic {
    pub fn new(prior_sd: f64) -> Result<Self> {
        Self::with_records(&challenger_data(), prior_sd, false)
    }

    /// `center` subtracts the mean temperature from the covariate.
    pub fn with_records(records: &[ChallengerRecord], prior_sd: f64, center: bool) -> Result<Self> {
        if !(prior_sd > 0.0 && prior_sd.is_finite()) {
            return Err(invalid("prior_sd", "must be positive"));
        }
        if records.is_empty() {
            return Err(Error::Data("no records".into()));
        }
        let temps: Vec<f64> = records.iter().map(|r| r.temp_f).collect();
        let temp_offset = if center {
            temps.iter().sum::<f64>() / temps.len() as f64
        } else {
            0.0
        };
        Ok(Self {
            failures: records.iter().map(|r| r.failure as f64).collect(),
            temps: temps.iter().map(|t| t - temp_offset).collect(),
            prior_sd,
            temp_offset,
        })
    }

    pub fn temp_offset(&self) -> f64 {
        self.temp_offset
    }

    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        self.failures
            .iter()
            .zip(&self.temps)
            .map(|(y, t)| {
                let eta = beta[0] + beta[1] * t;
                y * eta - softplus(eta)
            })
            .sum()
    }

    pub fn grad_log_likelihood(&self, beta: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (y, t) in self.failures.iter().zip(&self.temps) {
            let r = y - logistic(beta[0] + beta[1] * t);
            g[0] += r;
            g[1] += r * t;
        }
        g
    }

    fn neg_hessian(&self, beta: &[f64]) -> [[f64; 2]; 2] {
        let prec = 1.0 / (self.prior_sd * self.prior_sd);
        let mut h = [[prec, 0.0], [0.0, prec]];
        for t in &self.temps {
            let p = logistic(beta[0] + beta[1] * t);
            let w = p * (1.0 - p);
            h[0][0] += w;
            h[0][1] += w * t;
            h[1][1] += w * t * t;
        }
        h[1][0] = h[0][1];
        h
    }

    /// Posterior mode by Newton's method and the inverse negative Hessian there.
    pub fn laplace_approximation(&self) -> (Vec<f64>, [[f64; 2]; 2]) {
        let mut beta = [0.0f64; 2];
        for _ in 0..100 {
            let g = self.grad_log_likelihood(&beta);
            let prec = 1.0 / (self.prior_sd * self.prior_sd);
            let g = [g[0] - beta[0] * prec, g[1] - beta[1] * prec];
            let h = self.neg_hessian(&beta);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let step = [
                (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                (-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ];
            beta[0] += step[0];
            beta[1] += step[1];
            if step[0].abs() + step[1].abs() < 1e-12 {
                break;
            }
        }
        let h = self.neg_hessian(&beta);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let cov = [[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]];
        (beta.to_vec(), cov)
    }
}

impl Target for ChallengerLogistic {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, beta: &[f64]) -> f64 {
        let prior = -(beta[0] * beta[0] + beta[1] * beta[1]) / (2.0 * self.prior_sd * self.prior_sd);
        self.log_likelihood(beta) + prior
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn grad_log_density(&self, beta: &[f64], grad: &mut [f64]) -> Result<()> {
        let g = self.grad_log_likelihood(beta);
        let prec = 1.0 / (self.prior_sd * self.prior_sd);
        grad[0] = g[0] - beta[0] * prec;
        grad[1] = g[1] - beta[1] * prec;
        Ok(())
    }

    fn name(&self) -> String {
        format!("challenger-logistic(prior_sd={})", self.prior_sd)
    }
}

/// Open Ising chain on `{-1,+1}^k`: `log pi(x) = coupling * sum x_i x_{i+1}`.
#[derive(Clone, Debug)]
pub struct IsingChain {
    dim: usize,
    coupling: f64,
}

impl IsingChain {
    pub fn new(dim: usize, coupling: f64) -> Result<Self> {
        check_dim(dim)?;
        if !coupling.is_finite() {
            return Err(invalid("coupling", "must be finite"));
        }
        Ok(Self { dim, coupling })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

impl Target for IsingChain {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self) -> SupportKind {
        SupportKind::BinarySpins
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&s| s != 1.0 && s != -1.0) {
            return f64::NEG_INFINITY;
        }
        self.coupling * x.windows(2).map(|w| w[0] * w[1]).sum::<f64>()
    }

    fn name(&self) -> String {
        format!("ising-chain(k={}, J={})", self.dim, self.coupling)
    }
}

/// Product of discrete Laplace weights on `Z^k`: `log pi(x) = -rate * sum |x_i|`.
#[derive(Clone, Debug)]
pub struct LatticeLaplace {
    dim: usize,
    rate: f64,
}

impl LatticeLaplace {
    pub fn new(dim: usize, rate: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("rate", "must be positive"));
        }
        Ok(Self { dim, rate })
    }
}

impl Target for LatticeLaplace {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self) -> SupportKind {
        SupportKind::IntegerLattice
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| v.fract() != 0.0 || !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        -self.rate * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn name(&self) -> String {
        format!("lattice-laplace(k={}, rate={})", self.dim, self.rate)
    }
}

type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A continuous target given by user callbacks.
pub struct FnTarget<F> {
    dim: usize,
    log_density: F,
    grad: Option<Box<GradFn>>,
    label: String,
}

impl<F> FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, log_density: F) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            log_density,
            grad: None,
            label: "user".into(),
        })
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.label = name.into();
        self
    }
}

impl<F> Target for FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.log_density)(x)
    }

    fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        match &self.grad {
            Some(g) => {
                g(x, grad);
                Ok(())
            }
            None => Err(Error::MissingGradient),
        }
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn fd_grad(t: &dyn Target, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (t.log_density(&xp) - t.log_density(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_gradient_matches(t: &dyn Target, scale: f64, seed: u64) {
        let mut rng = rng_from_seed(seed);
        let mut g = vec![0.0; t.dim()];
        for _ in 0..100 {
            let x: Vec<f64> = (0..t.dim()).map(|_| rng.random_range(-scale..scale)).collect();
            t.grad_log_density(&x, &mut g).unwrap();
            let fd = fd_grad(t, &x);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() / (1.0 + a.abs()) < 1e-5, "{a} vs {b} at {x:?}");
            }
        }
    }

    #[test]
    fn iid_gaussian_values() {
        let t = IidGaussian::new(1).unwrap();
        assert!((t.log_density(&[0.0]) + 0.918_938_5).abs() < 1e-7);
        let t2 = IidGaussian::new(2).unwrap();
        let mut g = [1.0, 1.0];
        t2.grad_log_density(&[0.0, 0.0], &mut g).unwrap();
        assert_eq!(g, [0.0, 0.0]);
        let t3 = IidGaussian::new(3).unwrap();
        let expect = -1.5 * (2.0 * std::f64::consts::PI).ln() - 1.5;
        assert!((t3.log_density(&[1.0, 1.0, 1.0]) - expect).abs() < 1e-12);
        let meta = t3.log_concave_meta().unwrap();
        assert_eq!((meta.min_curvature, meta.max_curvature), (1.0, 1.0));
        assert_eq!(meta.mode, vec![0.0; 3]);
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(matches!(IidGaussian::new(0), Err(Error::InvalidConfig { field: "dim", .. })));
        assert!(IsingChain::new(0, 1.0).is_err());
        assert!(LatticeLaplace::new(0, 1.0).is_err());
    }

    #[test]
    fn anisotropic_reduces_to_iid() {
        let a = AnisotropicGaussian::new(vec![1.0, 1.0]).unwrap();
        let b = IidGaussian::new(2).unwrap();
        for x in [[0.0, 0.0], [1.5, -0.3], [3.0, 2.0]] {
            assert!((a.log_density(&x) - b.log_density(&x)).abs() < 1e-14);
        }
        let c = AnisotropicGaussian::new(vec![2.0, 8.0]).unwrap();
        let mut g = [0.0; 2];
        c.grad_log_density(&[1.0, 1.0], &mut g).unwrap();
        assert_eq!(g, [-2.0, -8.0]);
        let meta = c.log_concave_meta().unwrap();
        assert_eq!((meta.min_curvature, meta.max_curvature), (2.0, 8.0));
        assert!(AnisotropicGaussian::new(vec![1.0, 0.0]).is_err());
        assert!(AnisotropicGaussian::new(vec![-1.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        assert_gradient_matches(&IidGaussian::new(4).unwrap(), 10.0, 1);
        assert_gradient_matches(&AnisotropicGaussian::new(vec![0.5, 2.0, 8.0]).unwrap(), 10.0, 2);
        // The Challenger likelihood saturates quickly in the slope; sample
        // the region where the logistic is not flat to machine precision.
        assert_gradient_matches(&ChallengerLogistic::new(10.0).unwrap(), 0.5, 3);
    }

    #[test]
    fn log_concave_sandwich_holds_for_gaussians() {
        // For -M I <= H <= -m I:
        //   g(x)·d - M|d|^2/2 <= f(x+d) - f(x) <= g(x)·d - m|d|^2/2
        let t = AnisotropicGaussian::new(vec![0.7, 1.3, 4.0]).unwrap();
        let meta = t.log_concave_meta().unwrap();
        let mut rng = rng_from_seed(11);
        let mut g = vec![0.0; 3];
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let dd: f64 = d.iter().map(|v| v * v).sum();
            t.grad_log_density(&x, &mut g).unwrap();
            let lin: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let diff = t.log_density(&y) - t.log_density(&x);
            assert!(diff <= lin - 0.5 * meta.min_curvature * dd + 1e-9);
            assert!(diff >= lin - 0.5 * meta.max_curvature * dd - 1e-9);
        }
    }

    #[test]
    fn challenger_dataset_integrity() {
        let recs = challenger_data();
        check_challenger_integrity(&recs).unwrap();
        let temps: f64 = recs.iter().map(|r| r.temp_f).sum();
        assert_eq!(temps, 1600.0);
    }

    #[test]
    fn challenger_at_origin() {
        let t = ChallengerLogistic::new(10.0).unwrap();
        let ll = t.log_likelihood(&[0.0, 0.0]);
        assert!((ll + 23.0 * std::f64::consts::LN_2).abs() < 1e-12);
        // Hand sums over the table: sum(y) = 7, sum(t*y) = 446, sum(t) = 1600.
        let g = t.grad_log_likelihood(&[0.0, 0.0]);
        assert!((g[0] - (7.0 - 11.5)).abs() < 1e-12);
        assert!((g[1] - (446.0 - 800.0)).abs() < 1e-12);
        let mut full = [0.0; 2];
        t.grad_log_density(&[0.0, 0.0], &mut full).unwrap();
        assert!(full.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn challenger_laplace_mode_is_stationary() {
        let t = ChallengerLogistic::new(10.0).unwrap();
        let (mode, cov) = t.laplace_approximation();
        let mut g = [0.0; 2];
        t.grad_log_density(&mode, &mut g).unwrap();
        assert!(g[0].abs() < 1e-8 && g[1].abs() < 1e-6, "{g:?}");
        assert!(mode[1] < 0.0);
        assert!(cov[0][0] > 0.0 && cov[1][1] > 0.0);
        assert!(cov[0][1] < 0.0);
    }

    #[test]
    fn challenger_external_csv_roundtrip() {
        let dir = std::env::temp_dir().join(format!("tmcmc-chal-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.csv");
        std::fs::write(&p, CHALLENGER_CSV).unwrap();
        assert_eq!(load_challenger_csv(&p).unwrap(), challenger_data());
        std::fs::write(&p, "flight,fail,temp\n1,0,70\n").unwrap();
        assert!(load_challenger_csv(&p).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn ising_values() {
        let t0 = IsingChain::new(2, 0.0).unwrap();
        let states = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        for s in &states {
            assert_eq!(t0.log_density(s), 0.0);
        }
        let t1 = IsingChain::new(2, 1.0).unwrap();
        assert_eq!(t1.log_density(&[1.0, 1.0]), 1.0);
        assert_eq!(t1.log_density(&[1.0, 0.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn ising_k3_normalizer_by_enumeration() {
        // Z = sum over 8 states of exp(0.5 (x1x2 + x2x3)).
        // Bond products (x1x2, x2x3) take each of the 4 sign pairs for 2
        // states each: Z = 2 (e^1 + 2 e^0 + e^-1).
        let t = IsingChain::new(3, 0.5).unwrap();
        let mut z = 0.0;
        for bits in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let w = t.log_density(&x).exp();
            assert!(w > 0.0);
            z += w;
        }
        let expect = 2.0 * (1f64.exp() + 2.0 + (-1f64).exp());
        assert!((z - expect).abs() < 1e-12);
    }

    #[test]
    fn lattice_values() {
        let t = LatticeLaplace::new(1, 1.0).unwrap();
        assert_eq!(t.log_density(&[0.0]) - t.log_density(&[3.0]), 3.0);
        assert_eq!(t.log_density(&[0.5]), f64::NEG_INFINITY);
        let t2 = LatticeLaplace::new(2, 1.0).unwrap();
        for x in [[1.0, 2.0], [-3.0, 4.0]] {
            let v = t2.log_density(&x);
            assert_eq!(v, t2.log_density(&[-x[0], x[1]]));
            assert_eq!(v, t2.log_density(&[x[0], -x[1]]));
            assert_eq!(v, t2.log_density(&[-x[0], -x[1]]));
        }
    }

    #[test]
    fn lattice_truncated_masses_by_direct_summation() {
        // On |x| <= 20 with rate 1, Z = 1 + 2 sum_{m=1}^{20} e^-m
        //                              = 1 + 2 e^-1 (1 - e^-20) / (1 - e^-1).
        let t = LatticeLaplace::new(1, 1.0).unwrap();
        let z: f64 = (-20..=20).map(|x| t.log_density(&[x as f64]).exp()).sum();
        let e = (-1f64).exp();
        let closed = 1.0 + 2.0 * e * (1.0 - (-20f64).exp()) / (1.0 - e);
        assert!((z - closed).abs() < 1e-12);
        let p0 = 1.0 / z;
        assert!((p0 - (1.0 - e) / (1.0 + e)).abs() < 1e-8);
    }

    #[test]
    fn fn_target_callbacks() {
        let t = FnTarget::new(2, |x: &[f64]| -(x[0].powi(4) + x[1].powi(4)) / 4.0)
            .unwrap()
            .with_gradient(|x, g| {
                g[0] = -x[0].powi(3);
                g[1] = -x[1].powi(3);
            });
        assert!(t.has_gradient());
        assert_gradient_matches(&t, 3.0, 5);
        let plain = FnTarget::new(1, |x: &[f64]| -x[0] * x[0]).unwrap();
        let mut g = [0.0];
        assert!(matches!(plain.grad_log_density(&[0.0], &mut g), Err(Error::MissingGradient)));
    }
}

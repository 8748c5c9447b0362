//! Chain diagnostics: acceptance, autocorrelation, effective sample size and
//! the split-chain potential scale reduction factor.

pub mod bounds;
pub mod scaling;

use crate::chain::Trace;
use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

/// Fraction of accepted proposals.
pub fn acceptance_rate(trace: &Trace) -> Result<f64> {
    acceptance_rate_of(&trace.accepted)
}

pub fn acceptance_rate_of(accepted: &[bool]) -> Result<f64> {
    if accepted.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(accepted.iter().filter(|&&a| a).count() as f64 / accepted.len() as f64)
}

/// Mean of `min(1, alpha)` over the trace: the acceptance probability
/// averaged over proposals instead of over decisions. Same expectation as
/// the acceptance rate, much smaller variance when acceptances are rare.
pub fn mean_acceptance_probability(trace: &Trace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(trace.log_alpha.iter().map(|l| l.exp()).sum::<f64>() / trace.len() as f64)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Normalized autocorrelation `rho_0..rho_{n-1}` via zero-padded FFT.
/// A constant series has no defined autocorrelation and returns `None`.
pub fn autocorrelation(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) || !c0.is_finite() {
        return None;
    }
    Some(buf[..n].iter().map(|c| c.re / c0).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Iact {
    pub iact: f64,
    pub ess: f64,
}

/// Shortest series accepted by the ESS estimators.
pub const MIN_SERIES: usize = 100;

/// Integrated autocorrelation time by Geyer's initial positive sequence:
/// pairs `rho_{2m} + rho_{2m+1}` are summed while positive. The estimate is
/// floored at `1 / log10(n)`, and a constant series is reported as one
/// effective draw.
pub fn iact_and_ess(x: &[f64]) -> Result<Iact> {
    let n = x.len();
    if n < MIN_SERIES {
        return Err(Error::ShortSeries {
            needed: MIN_SERIES,
            got: n,
        });
    }
    let Some(rho) = autocorrelation(x) else {
        return Ok(Iact {
            iact: n as f64,
            ess: 1.0,
        });
    };
    let mut sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let g = rho[2 * m] + rho[2 * m + 1];
        if g <= 0.0 {
            break;
        }
        sum += g;
        m += 1;
    }
    let floor = 1.0 / (n as f64).log10();
    let iact = (2.0 * sum - 1.0).max(floor);
    Ok(Iact {
        iact,
        ess: n as f64 / iact,
    })
}

/// ESS from non-overlapping batch means with batch size `floor(sqrt(n))`.
pub fn batch_means_ess(x: &[f64]) -> Result<Iact> {
    let n = x.len();
    if n < MIN_SERIES {
        return Err(Error::ShortSeries {
            needed: MIN_SERIES,
            got: n,
        });
    }
    let b = (n as f64).sqrt().floor() as usize;
    let a = n / b;
    let used = &x[..a * b];
    let var = variance(used);
    if !(var > 0.0) {
        return Ok(Iact {
            iact: n as f64,
            ess: 1.0,
        });
    }
    let means: Vec<f64> = used.chunks(b).map(mean).collect();
    let iact = (b as f64 * variance(&means) / var).max(1.0 / (n as f64).log10());
    Ok(Iact {
        iact,
        ess: n as f64 / iact,
    })
}

/// Split-chain potential scale reduction factor. Each chain is cut in two
/// halves and the between/within variance ratio is computed over the halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap();
    if half < 2 {
        return Err(Error::ShortSeries {
            needed: 4,
            got: half * 2,
        });
    }
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[c.len() - half..]);
    }
    let m = parts.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let w = parts.iter().map(|p| variance(p)).sum::<f64>() / m;
    let b = n * variance(&means);
    if !(w > 0.0) {
        return Ok(if b > 0.0 { f64::INFINITY } else { 1.0 });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// Monte Carlo standard error of the mean of one series.
pub fn mcse(x: &[f64]) -> Result<f64> {
    let e = iact_and_ess(x)?;
    Ok((variance(x) / e.ess).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let mut x = Vec::with_capacity(n);
        let mut v: f64 = StandardNormal.sample(&mut rng);
        v /= (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            v = rho * v + e;
            x.push(v);
        }
        x
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_rate_of(&[true; 10]).unwrap(), 1.0);
        let alt: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
        assert_eq!(acceptance_rate_of(&alt).unwrap(), 0.5);
        assert!(matches!(acceptance_rate_of(&[]), Err(Error::EmptyTrace)));
    }

    #[test]
    fn white_noise_iact_is_one() {
        let e = iact_and_ess(&white(100_000, 1)).unwrap();
        assert!((e.iact - 1.0).abs() < 0.1, "{e:?}");
        let b = batch_means_ess(&white(100_000, 2)).unwrap();
        assert!((b.iact - 1.0).abs() < 0.2, "{b:?}");
    }

    #[test]
    fn sticky_chain_hits_guard() {
        let e = iact_and_ess(&vec![3.0; 1000]).unwrap();
        assert_eq!(e.ess, 1.0);
    }

    #[test]
    fn ar1_matches_closed_form() {
        // tau = (1 + rho) / (1 - rho) = 19 for rho = 0.9.
        let e = iact_and_ess(&ar1(200_000, 0.9, 3)).unwrap();
        assert!((e.iact - 19.0).abs() < 0.15 * 19.0, "{e:?}");
        let b = batch_means_ess(&ar1(200_000, 0.9, 4)).unwrap();
        assert!((b.iact - 19.0).abs() < 0.25 * 19.0, "{b:?}");
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(iact_and_ess(&[1.0; 50]), Err(Error::ShortSeries { .. })));
    }

    #[test]
    fn autocorrelation_direct_sum() {
        let x = ar1(500, 0.5, 5);
        let rho = autocorrelation(&x).unwrap();
        let m = mean(&x);
        let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        for lag in [1usize, 2, 7] {
            let c: f64 = (0..x.len() - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum();
            assert!((rho[lag] - c / c0).abs() < 1e-12);
        }
    }

    #[test]
    fn rhat_behaviour() {
        let chains: Vec<Vec<f64>> = (0..4).map(|s| white(5000, 10 + s)).collect();
        let r = split_rhat(&chains).unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
        let mut shifted = chains.clone();
        for v in shifted[0].iter_mut() {
            *v += 3.0;
        }
        assert!(split_rhat(&shifted).unwrap() > 1.2);
    }
}

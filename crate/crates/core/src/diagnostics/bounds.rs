//! Acceptance-rate bound evaluators for strongly log-concave targets.
//!
//! Every expression carries the factor `(2 pi)^{k/2} / c^k * pi(x*)` with
//! `c` the lower or upper curvature, so values are kept in log space.
//! They are evaluated as written and need not lie in `[0, 1]`.

use crate::error::{invalid, Result};
use crate::normal::{log_sf, log_two_cdf_minus_one, LN_SQRT_2PI};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceBoundInputs {
    pub k: usize,
    /// `m_k`.
    pub min_curvature: f64,
    /// `M_k`.
    pub max_curvature: f64,
    pub psi1: f64,
    pub psi2: f64,
    /// Target density at its mode.
    pub pi_mode: f64,
    /// HMC step size.
    pub dt: f64,
    /// HMC non-centrality parameter.
    pub lambda: f64,
}

impl AcceptanceBoundInputs {
    pub fn new(k: usize, min_curvature: f64, max_curvature: f64, pi_mode: f64) -> Self {
        Self {
            k,
            min_curvature,
            max_curvature,
            psi1: 0.01,
            psi2: 0.01,
            pi_mode,
            dt: 1.0,
            lambda: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(self.min_curvature > 0.0 && self.min_curvature <= self.max_curvature && self.max_curvature.is_finite()) {
            return Err(invalid("curvature", "need 0 < m_k <= M_k < inf"));
        }
        if !(self.psi1 > 0.0 && self.psi1 < 1.0 && self.psi2 > 0.0 && self.psi2 < 1.0) {
            return Err(invalid("psi", "psi1 and psi2 must lie in (0, 1)"));
        }
        if !(self.psi1 < 1.0 - self.psi2) {
            return Err(invalid("psi", "need psi1 < 1 - psi2"));
        }
        if !(self.pi_mode > 0.0 && self.pi_mode.is_finite()) {
            return Err(invalid("pi_mode", "must be positive and finite"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", "must be nonnegative"));
        }
        Ok(())
    }
}

/// A bound held as its natural log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogBound {
    pub log_value: f64,
    /// A square-root argument was negative and was clamped to zero.
    pub clamped: bool,
}

impl LogBound {
    fn plain(log_value: f64) -> Self {
        Self {
            log_value,
            clamped: false,
        }
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundPair {
    pub lower: LogBound,
    pub upper: LogBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HmcBounds {
    pub finite_k: BoundPair,
    /// Regime `lambda / k -> 0`.
    pub asymptote_small_lambda: LogBound,
    /// Regime `lambda / k -> inf`.
    pub asymptote_large_lambda: LogBound,
}

/// `log[(2 pi)^{k/2} / c^k * pi(x*)]`.
fn log_prefactor(k: usize, c: f64, pi_mode: f64) -> f64 {
    let k = k as f64;
    k * LN_SQRT_2PI - k * c.ln() + pi_mode.ln()
}

pub fn rwmh_ar_bounds(inp: &AcceptanceBoundInputs) -> Result<BoundPair> {
    inp.validate()?;
    let k = inp.k as f64;
    let (m, big) = (inp.min_curvature, inp.max_curvature);
    let g_hi = (big - m) / big;
    let g_lo = (big - m) / m;
    let a_lower = ((1.0 - inp.psi2).ln() + 0.5 * k * (g_hi + big))
        / (0.5 * k * (g_hi * g_hi + 2.0 * big + big * big)).sqrt();
    let a_upper = (inp.psi1.ln() - 0.5 * k * (g_lo - m)) / (0.5 * k * (g_lo * g_lo + 2.0 * m + m * m)).sqrt();
    Ok(BoundPair {
        lower: LogBound::plain(log_prefactor(inp.k, big, inp.pi_mode) + log_sf(a_lower)),
        upper: LogBound::plain(log_prefactor(inp.k, m, inp.pi_mode) + log_sf(a_upper)),
    })
}

/// `log[(2 pi)^{k/2} / M_k^k * pi(x*) * (1 - Phi(sqrt(k/2)))]`.
pub fn rwmh_ar_asymp(k: usize, max_curvature: f64, pi_mode: f64) -> f64 {
    log_prefactor(k, max_curvature, pi_mode) + log_sf((k as f64 / 2.0).sqrt())
}

fn log_two_phi_sqrt_minus_one(arg: f64) -> LogBound {
    if arg < 0.0 {
        LogBound {
            log_value: f64::NEG_INFINITY,
            clamped: true,
        }
    } else {
        LogBound::plain(log_two_cdf_minus_one(arg.sqrt()))
    }
}

/// The finite-k pair keeps the curvature-gap terms; a negative square-root
/// argument clamps the corresponding bound to zero.
pub fn tmcmc_ar_bounds(inp: &AcceptanceBoundInputs) -> Result<BoundPair> {
    inp.validate()?;
    let k = inp.k as f64;
    let (m, big) = (inp.min_curvature, inp.max_curvature);
    let arg_lower = -2.0 / (k * big) * (1.0 - inp.psi2).ln() - (big - m) / (big * big);
    let arg_upper = -2.0 / (k * m) * inp.psi1.ln() + (big - m) / (m * m);
    let mut lower = log_two_phi_sqrt_minus_one(arg_lower);
    lower.log_value += log_prefactor(inp.k, big, inp.pi_mode);
    let mut upper = log_two_phi_sqrt_minus_one(arg_upper);
    upper.log_value += log_prefactor(inp.k, m, inp.pi_mode);
    Ok(BoundPair { lower, upper })
}

pub fn hmc_ar_bounds(inp: &AcceptanceBoundInputs) -> Result<HmcBounds> {
    inp.validate()?;
    let k = inp.k as f64;
    let (m, big) = (inp.min_curvature, inp.max_curvature);
    let dt2 = inp.dt * inp.dt;
    let c1 = 1.0 + inp.lambda / k;
    let c2 = 1.0 + 2.0 * inp.lambda / k;
    let g_hi = (big - m) / big;
    let g_lo = (big - m) / m;
    let a_lower = ((1.0 - inp.psi2).ln() + 0.5 * k * (g_hi + big * dt2 * c1))
        / (0.5 * k * (g_hi * g_hi + 2.0 * big * dt2 * c1 + big * big * dt2 * dt2 * c2)).sqrt();
    let a_upper = (inp.psi1.ln() - 0.5 * k * (g_lo - m * dt2 * c1))
        / (0.5 * k * (g_lo * g_lo + 2.0 * m * dt2 * c1 + m * m * dt2 * dt2 * c2)).sqrt();
    let pre_big = log_prefactor(inp.k, big, inp.pi_mode);
    let a_large = (0.5 * k * c1).sqrt() / (2f64.sqrt() * (1.0 / (big * dt2) + 1.0).sqrt());
    Ok(HmcBounds {
        finite_k: BoundPair {
            lower: LogBound::plain(pre_big + log_sf(a_lower)),
            upper: LogBound::plain(log_prefactor(inp.k, m, inp.pi_mode) + log_sf(a_upper)),
        },
        asymptote_small_lambda: LogBound::plain(rwmh_ar_asymp(inp.k, big, inp.pi_mode)),
        asymptote_large_lambda: LogBound::plain(pre_big + log_sf(a_large)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn asymptote_at_k2() {
        // 2 pi (1 - Phi(1)) to 25 digits: 0.9968603604089772686500476.
        let v = rwmh_ar_asymp(2, 1.0, 1.0).exp();
        assert!((v - 0.996_860_360_408_977_3).abs() < 1e-14, "{v}");
    }

    #[test]
    fn far_tail_is_accurate() {
        // erfc(10 / sqrt 2) / 2 from a 30-digit evaluation.
        let reference: f64 = 7.619_853_024_160_526_066e-24;
        let got = rwmh_ar_asymp(200, 1.0, (-200.0 * LN_SQRT_2PI).exp()).exp();
        assert!((got / reference - 1.0).abs() < 1e-12, "{got:e}");
        assert!((crate::normal::sf(10.0) / reference - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymptote_decreases_for_standard_normal_mode() {
        // With pi(x*) = (2 pi)^{-k/2} the prefactor is one and only the
        // Gaussian tail remains.
        let mut prev = f64::INFINITY;
        for k in 2..300 {
            let pi_mode = (-(k as f64) * LN_SQRT_2PI).exp();
            let v = rwmh_ar_asymp(k, 1.0, pi_mode.max(f64::MIN_POSITIVE));
            if pi_mode > 0.0 {
                assert!(v < prev, "k={k}");
                prev = v;
            }
        }
    }

    #[test]
    fn equal_curvatures_reduce() {
        let inp = AcceptanceBoundInputs::new(10, 2.0, 2.0, 1.0);
        let b = rwmh_ar_bounds(&inp).unwrap();
        let big = 2.0;
        let k = 10.0;
        let a = ((0.99f64).ln() + k * big / 2.0) / (k * (2.0 * big + big * big) / 2.0).sqrt();
        let expect = 5.0 * (2.0 * PI).ln() - 10.0 * 2f64.ln() + log_sf(a);
        assert!((b.lower.log_value - expect).abs() < 1e-12);
    }

    #[test]
    fn tmcmc_clamps_and_flags() {
        let mut inp = AcceptanceBoundInputs::new(1, 1.0, 50.0, 1.0);
        inp.psi2 = 1e-6;
        let b = tmcmc_ar_bounds(&inp).unwrap();
        assert!(b.lower.clamped);
        assert_eq!(b.lower.log_value, f64::NEG_INFINITY);
        assert!(!b.upper.clamped);
    }

    #[test]
    fn invalid_window_rejected() {
        let mut inp = AcceptanceBoundInputs::new(5, 1.0, 1.0, 1.0);
        inp.psi1 = 0.6;
        inp.psi2 = 0.5;
        assert!(rwmh_ar_bounds(&inp).is_err());
        let inp = AcceptanceBoundInputs::new(5, 2.0, 1.0, 1.0);
        assert!(tmcmc_ar_bounds(&inp).is_err());
    }

    #[test]
    fn hmc_small_lambda_matches_rwmh_asymptote() {
        let mut inp = AcceptanceBoundInputs::new(40, 3.0, 3.0, 0.2);
        inp.dt = 0.3;
        inp.lambda = 0.0;
        let h = hmc_ar_bounds(&inp).unwrap();
        assert_eq!(h.asymptote_small_lambda.log_value, rwmh_ar_asymp(40, 3.0, 0.2));
        // The large-lambda regime decays faster.
        inp.lambda = 1e4;
        let h = hmc_ar_bounds(&inp).unwrap();
        assert!(h.asymptote_large_lambda.log_value < h.asymptote_small_lambda.log_value);
    }
}

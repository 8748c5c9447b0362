//! Random-walk Metropolis and Hamiltonian Monte Carlo.

use crate::chain::{finish_step, ChainState, Kernel, StepInfo};
use crate::error::{invalid, Error, Result};
use crate::rng::ChainRng;
use crate::targets::Target;
use crate::tmcmc::Transition;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// `x' = x + sigma * N(0, I)`, with an optional per-coordinate `sigma`.
#[derive(Clone, Debug)]
pub struct Rwmh {
    sigma: Vec<f64>,
}

impl Rwmh {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(invalid("sigma", "needs at least one coordinate"));
        }
        if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("sigma", "must be positive and finite"));
        }
        Ok(Self { sigma })
    }

    pub fn isotropic(k: usize, sigma: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        Self::new(vec![sigma; k])
    }
}

impl Kernel for Rwmh {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo> {
        let k = self.sigma.len();
        if target.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: target.dim(),
            });
        }
        let y: Vec<f64> = (0..k)
            .map(|i| {
                let n: f64 = StandardNormal.sample(rng);
                state.x[i] + self.sigma[i] * n
            })
            .collect();
        let log_pi_y = target.log_density(&y);
        Ok(finish_step(state, y, log_pi_y, 0.0, 0.0, rng))
    }

    fn name(&self) -> &'static str {
        "rwmh"
    }
}

pub fn rwmh_step<T: Target + ?Sized>(
    x: &[f64],
    target: &T,
    sigma: f64,
    rng: &mut ChainRng,
) -> Result<Transition> {
    let kern = Rwmh::isotropic(x.len(), sigma)?;
    let mut st = ChainState::new(target, x.to_vec())?;
    let info = kern.step(target, &mut st, rng)?;
    Ok(Transition {
        x: st.x,
        accepted: info.accepted,
        log_alpha: info.log_alpha,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    /// Number of integrator steps `L`.
    pub steps: usize,
    /// Step size.
    pub dt: f64,
    /// Diagonal of the mass matrix.
    pub mass: Vec<f64>,
}

impl HmcConfig {
    pub fn new(steps: usize, dt: f64, k: usize) -> Self {
        Self {
            steps,
            dt,
            mass: vec![1.0; k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("steps", "L must be at least 1"));
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be nonnegative and finite"));
        }
        if self.mass.is_empty() || self.mass.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(invalid("mass", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// `U(x) = -log pi(x)`.
pub fn potential<T: Target + ?Sized>(target: &T, x: &[f64]) -> f64 {
    -target.log_density(x)
}

/// `grad U(x) = -grad log pi(x)`.
pub fn grad_potential<T: Target + ?Sized>(target: &T, x: &[f64], out: &mut [f64]) -> Result<()> {
    target.grad_log_density(x, out)?;
    for g in out.iter_mut() {
        *g = -*g;
    }
    Ok(())
}

pub fn kinetic(p: &[f64], mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(mass).map(|(p, m)| p * p / m).sum::<f64>()
}

/// Hamiltonian `U(x) + p' M^-1 p / 2`.
pub fn hamiltonian<T: Target + ?Sized>(target: &T, z: &PhasePoint, mass: &[f64]) -> f64 {
    potential(target, &z.x) + kinetic(&z.p, mass)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Leapfrog,
    /// Explicit Euler. Neither reversible nor volume preserving; kept as a
    /// negative control for the structural checks.
    Euler,
}

fn checked_grad<T: Target + ?Sized>(target: &T, x: &[f64], out: &mut [f64], step: usize) -> Result<()> {
    grad_potential(target, x, out)?;
    if out.iter().any(|g| !g.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { step });
    }
    Ok(())
}

/// Runs `cfg.steps` steps of
/// `x <- x + dt M^-1 (p - dt/2 grad U(x))`,
/// `p <- p - dt/2 (grad U(x_old) + grad U(x_new))`.
pub fn leapfrog<T: Target + ?Sized>(start: &PhasePoint, cfg: &HmcConfig, target: &T) -> Result<PhasePoint> {
    integrate(start, cfg, target, Integrator::Leapfrog)
}

pub fn integrate<T: Target + ?Sized>(
    start: &PhasePoint,
    cfg: &HmcConfig,
    target: &T,
    integrator: Integrator,
) -> Result<PhasePoint> {
    cfg.validate()?;
    let k = start.x.len();
    if start.p.len() != k || cfg.mass.len() != k || target.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: start.p.len().max(cfg.mass.len()).max(target.dim()),
        });
    }
    let dt = cfg.dt;
    let mut x = start.x.clone();
    let mut p = start.p.clone();
    let mut g = vec![0.0; k];
    let mut g_new = vec![0.0; k];
    checked_grad(target, &x, &mut g, 0)?;
    for step in 1..=cfg.steps {
        match integrator {
            Integrator::Leapfrog => {
                for i in 0..k {
                    x[i] += dt / cfg.mass[i] * (p[i] - 0.5 * dt * g[i]);
                }
                checked_grad(target, &x, &mut g_new, step)?;
                for i in 0..k {
                    p[i] -= 0.5 * dt * (g[i] + g_new[i]);
                }
            }
            Integrator::Euler => {
                for i in 0..k {
                    x[i] += dt / cfg.mass[i] * p[i];
                    p[i] -= dt * g[i];
                }
                checked_grad(target, &x, &mut g_new, step)?;
            }
        }
        std::mem::swap(&mut g, &mut g_new);
    }
    Ok(PhasePoint { x, p })
}

#[derive(Clone, Debug)]
pub struct Hmc {
    cfg: HmcConfig,
    integrator: Integrator,
}

impl Hmc {
    pub fn new(cfg: HmcConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.dt == 0.0 {
            return Err(invalid("dt", "must be positive"));
        }
        Ok(Self {
            cfg,
            integrator: Integrator::Leapfrog,
        })
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn config(&self) -> &HmcConfig {
        &self.cfg
    }

    /// Fresh momentum `p ~ N(0, M)`.
    pub fn draw_momentum(&self, rng: &mut ChainRng) -> Vec<f64> {
        self.cfg
            .mass
            .iter()
            .map(|m| {
                let n: f64 = StandardNormal.sample(rng);
                m.sqrt() * n
            })
            .collect()
    }
}

impl Kernel for Hmc {
    fn step<T: Target + ?Sized>(
        &self,
        target: &T,
        state: &mut ChainState,
        rng: &mut ChainRng,
    ) -> Result<StepInfo> {
        if !target.has_gradient() {
            return Err(Error::MissingGradient);
        }
        let p0 = self.draw_momentum(rng);
        let start = PhasePoint {
            x: state.x.clone(),
            p: p0,
        };
        let end = integrate(&start, &self.cfg, target, self.integrator)?;
        let log_pi_y = target.log_density(&end.x);
        // -H(x'', p'') + H(x, p') splits into the density ratio and the
        // kinetic-energy difference.
        let dk = kinetic(&start.p, &self.cfg.mass) - kinetic(&end.p, &self.cfg.mass);
        Ok(finish_step(state, end.x, log_pi_y, dk, 0.0, rng))
    }

    fn name(&self) -> &'static str {
        "hmc"
    }
}

pub fn hmc_step<T: Target + ?Sized>(
    x: &[f64],
    target: &T,
    cfg: &HmcConfig,
    rng: &mut ChainRng,
) -> Result<Transition> {
    let kern = Hmc::new(cfg.clone())?;
    let mut st = ChainState::new(target, x.to_vec())?;
    let info = kern.step(target, &mut st, rng)?;
    Ok(Transition {
        x: st.x,
        accepted: info.accepted,
        log_alpha: info.log_alpha,
    })
}

/// Mean and per-coordinate variance of the position proposal of a single
/// leapfrog step: `x + dt^2/2 M^-1 grad log pi(x)` and `dt^2 / m_i`.
pub fn hmc_one_step_proposal_params<T: Target + ?Sized>(
    x: &[f64],
    target: &T,
    cfg: &HmcConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if cfg.steps != 1 {
        return Err(invalid("steps", "one-step proposal law needs L = 1"));
    }
    let mut g = vec![0.0; x.len()];
    target.grad_log_density(x, &mut g)?;
    let tau = cfg.dt * cfg.dt;
    let mean = (0..x.len()).map(|i| x[i] + 0.5 * tau * g[i] / cfg.mass[i]).collect();
    let var = cfg.mass.iter().map(|m| tau / m).collect();
    Ok((mean, var))
}

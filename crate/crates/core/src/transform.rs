//! Move types and deterministic transformations `T_z(x, eps)`.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Per-coordinate direction: `+1` forward, `-1` backward, `0` unchanged.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MoveType(pub Vec<i8>);

impl MoveType {
    pub fn new(z: Vec<i8>) -> Self {
        debug_assert!(z.iter().all(|v| (-1..=1).contains(v)));
        Self(z)
    }

    /// The backward move `z^c = -z`.
    pub fn conjugate(&self) -> MoveType {
        MoveType(self.0.iter().map(|v| -v).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }
}

/// A family of invertible maps indexed by a move type, paired with the log
/// absolute Jacobian of `(x, eps) -> (T_z(x, eps), eps)`.
///
/// Implementations must satisfy `forward(forward(x, e, z), e, -z) == x` and
/// `log_jacobian(x, e, z) + log_jacobian(forward(x, e, z), e, -z) == 0`.
pub trait Transformation: Send + Sync {
    fn forward(&self, x: &[f64], eps: f64, z: &[i8], out: &mut [f64]);

    fn log_jacobian(&self, x: &[f64], eps: f64, z: &[i8]) -> f64;

    fn name(&self) -> &'static str;
}

/// `x_i + z_i a_i eps`.
#[derive(Clone, Debug)]
pub struct Additive {
    pub scales: Vec<f64>,
}

impl Additive {
    pub fn new(scales: Vec<f64>) -> Self {
        Self { scales }
    }

    pub fn unit(k: usize) -> Self {
        Self {
            scales: vec![1.0; k],
        }
    }
}

impl Transformation for Additive {
    fn forward(&self, x: &[f64], eps: f64, z: &[i8], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = x[i] + z[i] as f64 * self.scales[i] * eps;
        }
    }

    fn log_jacobian(&self, _x: &[f64], _eps: f64, _z: &[i8]) -> f64 {
        0.0
    }

    fn name(&self) -> &'static str {
        "additive"
    }
}

/// Draws `|N(0, s^2)|`.
pub fn sample_epsilon<R: Rng + ?Sized>(rng: &mut R, s: f64) -> f64 {
    let n: f64 = StandardNormal.sample(rng);
    s * n.abs()
}

/// Log-density of the half-normal innovation, `log(2 phi(e/s) / s)` on `e >= 0`.
pub fn epsilon_log_density(eps: f64, s: f64) -> f64 {
    if eps < 0.0 {
        return f64::NEG_INFINITY;
    }
    std::f64::consts::LN_2 - crate::normal::LN_SQRT_2PI - s.ln() - 0.5 * (eps / s).powi(2)
}

/// `y_i = x_i + z_i a_i eps`, checked.
pub fn additive_forward(x: &[f64], eps: f64, z: &MoveType, a: &[f64]) -> Result<Vec<f64>> {
    if z.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    if a.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: a.len(),
        });
    }
    let mut out = vec![0.0; x.len()];
    Additive::new(a.to_vec()).forward(x, eps, z.as_slice(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn additive_examples() {
        let y = additive_forward(&[1.0, 2.0], 0.5, &MoveType::new(vec![1, -1]), &[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![1.5, 1.5]);
        let x = [0.3, -7.0, 2.5];
        let z = MoveType::new(vec![1, -1, 0]);
        assert_eq!(additive_forward(&x, 0.0, &z, &[1.0; 3]).unwrap(), x.to_vec());
        assert!(additive_forward(&x, 1.0, &MoveType::new(vec![1, 1]), &[1.0; 3]).is_err());
    }

    #[test]
    fn conjugate_involution() {
        let z = MoveType::new(vec![1, 0, -1, 1]);
        assert_eq!(z.conjugate().0, vec![-1, 0, 1, -1]);
        assert_eq!(z.conjugate().conjugate(), z);
        assert!(MoveType::new(vec![0, 0]).is_zero());
    }

    #[test]
    fn epsilon_is_nonnegative_and_scales() {
        let mut a = rng_from_seed(4);
        let mut b = rng_from_seed(4);
        for _ in 0..10_000 {
            let e1 = sample_epsilon(&mut a, 1.0);
            let e2 = sample_epsilon(&mut b, 2.0);
            assert!(e1 >= 0.0);
            assert_eq!(e2, 2.0 * e1);
        }
    }

    #[test]
    fn epsilon_density_integrates_to_one() {
        let s = 1.7;
        let h = 1e-3;
        let total: f64 = (0..20_000)
            .map(|i| (i as f64 + 0.5) * h)
            .map(|e| epsilon_log_density(e, s).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}

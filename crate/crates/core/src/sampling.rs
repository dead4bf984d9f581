//! Seeded random problem generators for property checks.
//!
//! All generators draw from a caller-supplied [`ChaCha8Rng`], so a fixed seed
//! reproduces the same problems on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ivpsolver::DelaySystem;
use crate::matcore::{opnorm, Matrix, Vector};
use crate::Result;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dimension uniform in `1..=max_dim`.
pub fn dim(rng: &mut ChaCha8Rng, max_dim: usize) -> usize {
    rng.random_range(1..=max_dim.max(1))
}

/// Entries uniform in `[−1, 1]`.
pub fn uniform_matrix(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    let v: Vec<f64> = (0..dim * dim)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    Matrix::from_row_slice(dim, &v).expect("finite entries")
}

/// Uniform entries rescaled so that `‖A‖ ≤ 1`.
pub fn unit_matrix(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    let a = uniform_matrix(rng, dim);
    let n = opnorm(&a);
    if n > 1.0 {
        a.scale(1.0 / n)
    } else {
        a
    }
}

/// `A1 = c0·I + c1·A0 + c2·A0²` with `c_i` uniform in `[−1, 1]`, both of norm ≤ 1.
pub fn commuting_pair(rng: &mut ChaCha8Rng, dim: usize) -> (Matrix, Matrix) {
    let a0 = unit_matrix(rng, dim);
    let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
    let a1 = &(&Matrix::identity(dim).scale(c[0]) + &a0.scale(c[1])) + &a0.pow(2).scale(c[2]);
    let n = opnorm(&a1);
    let a1 = if n > 1.0 { a1.scale(1.0 / n) } else { a1 };
    (a0, a1)
}

fn uniform_vector(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(lo..=hi)).collect()
}

/// Componentwise `c + d·sin(ωt + θ)`.
#[derive(Debug, Clone)]
pub struct Sinusoid {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub omega: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Sinusoid {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        Sinusoid {
            c: uniform_vector(rng, dim, -1.0, 1.0),
            d: uniform_vector(rng, dim, -1.0, 1.0),
            omega: uniform_vector(rng, dim, 0.5, 3.0),
            theta: uniform_vector(rng, dim, 0.0, std::f64::consts::TAU),
        }
    }

    pub fn value(&self, t: f64) -> Vector {
        let v: Vec<f64> = (0..self.c.len())
            .map(|i| self.c[i] + self.d[i] * (self.omega[i] * t + self.theta[i]).sin())
            .collect();
        Vector::from_slice(&v).expect("finite")
    }

    pub fn derivative(&self, t: f64) -> Vector {
        let v: Vec<f64> = (0..self.c.len())
            .map(|i| self.d[i] * self.omega[i] * (self.omega[i] * t + self.theta[i]).cos())
            .collect();
        Vector::from_slice(&v).expect("finite")
    }
}

/// Random system with `dim ≤ max_dim`, `‖A0‖, ‖A1‖ ≤ 1`, smooth sinusoidal
/// history (derivative attached) and, when `forced`, sinusoidal forcing.
pub fn system(rng: &mut ChaCha8Rng, max_dim: usize, tau: f64, forced: bool) -> Result<DelaySystem> {
    let n = dim(rng, max_dim);
    let a0 = unit_matrix(rng, n);
    let a1 = unit_matrix(rng, n);
    let phi = Sinusoid::random(rng, n);
    let dphi = phi.clone();
    let mut sys = DelaySystem::new(a0, a1, tau, move |t| phi.value(t))?
        .with_history_derivative(move |t| dphi.derivative(t))?;
    if forced {
        let g = Sinusoid::random(rng, n);
        sys = sys.with_forcing(move |t| g.value(t))?;
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_problem() {
        let a = uniform_matrix(&mut rng(7), 3);
        let b = uniform_matrix(&mut rng(7), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn generated_pairs_are_bounded_and_commute() {
        let mut r = rng(1);
        for _ in 0..20 {
            let d = dim(&mut r, 4);
            let (a0, a1) = commuting_pair(&mut r, d);
            assert!(opnorm(&a0) <= 1.0 + 1e-12 && opnorm(&a1) <= 1.0 + 1e-12);
            assert!(opnorm(&crate::commutator(&a0, &a1).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn sinusoid_derivative_matches_difference_quotient() {
        let s = Sinusoid::random(&mut rng(3), 2);
        let h = 1e-6;
        let fd = (&s.value(0.3 + h) - &s.value(0.3 - h)).scale(0.5 / h);
        assert!(fd.max_abs_diff(&s.derivative(0.3)) < 1e-8);
    }
}

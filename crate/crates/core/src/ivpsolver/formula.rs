//! Representation formulas for the delay IVP in terms of a fundamental
//! solution kernel, evaluated pointwise in `t`.
//!
//! ```text
//! u0(t) = S(t)φ(0) + ∫_{−τ}^{0} S(t−τ−s) A1 φ(s) ds
//! u0(t) = S(t+τ)φ(−τ) + ∫_{−τ}^{0} S(t−s) [φ'(s) − A0 φ(s)] ds
//! u1(t) = ∫_{0}^{t} S(t−s) g(s) ds
//! ```
//!
//! Integrals are split where the kernel argument crosses a multiple of τ and
//! each piece is integrated by adaptive bisection with an 8-point
//! Gauss–Legendre rule.

use crate::error::{invalid, Result};
use crate::fundsol::FundamentalSolution;
use crate::matcore::{Matrix, Vector};
use crate::quadrature::{breakpoints, GaussLegendre};

/// A fundamental solution `S(t; τ)` together with its coefficients.
pub trait Kernel: Sync {
    fn dim(&self) -> usize;
    fn tau(&self) -> f64;
    fn a0(&self) -> &Matrix;
    fn a1(&self) -> &Matrix;
    /// `S(t)`, with `S = Θ` for `t < 0` and `S(0) = I`.
    fn eval(&self, t: f64) -> Result<Matrix>;

    /// `S(t)·v`.
    fn apply(&self, t: f64, v: &Vector) -> Result<Vector> {
        Ok(self.eval(t)?.mul_vec(v))
    }

    fn apply_a0(&self, v: &Vector) -> Vector {
        self.a0().mul_vec(v)
    }

    fn apply_a1(&self, v: &Vector) -> Vector {
        self.a1().mul_vec(v)
    }
}

impl Kernel for FundamentalSolution {
    fn dim(&self) -> usize {
        FundamentalSolution::dim(self)
    }
    fn tau(&self) -> f64 {
        FundamentalSolution::tau(self)
    }
    fn a0(&self) -> &Matrix {
        FundamentalSolution::a0(self)
    }
    fn a1(&self) -> &Matrix {
        FundamentalSolution::a1(self)
    }
    fn eval(&self, t: f64) -> Result<Matrix> {
        FundamentalSolution::eval(self, t)
    }
}

/// Adaptive quadrature settings.
#[derive(Debug, Clone)]
pub struct Quadrature {
    rule: GaussLegendre,
    tol: f64,
    max_depth: usize,
    stiffness: f64,
}

/// Integral value with the accumulated local error estimate.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub value: Vector,
    pub error: f64,
}

impl Quadrature {
    /// `tol` is an absolute bound on the max-norm error of each integral.
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid(format!(
                "quadrature tolerance must be positive, got {tol}"
            )));
        }
        Ok(Quadrature {
            rule: GaussLegendre::new(8),
            tol,
            max_depth: 40,
            stiffness: 0.0,
        })
    }

    /// Decay rate of the sharpest kernel transient. Such transients sit where
    /// the kernel argument approaches a multiple of τ from above, which is the
    /// right end of every segment of the formula integrals. Segments longer
    /// than `4/rate` start from a mesh graded geometrically towards their
    /// right end, down to a panel width of about `4/rate`.
    pub fn with_stiffness(mut self, rate: f64) -> Self {
        self.stiffness = if rate.is_finite() { rate.abs() } else { 0.0 };
        self
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn points(&self) -> usize {
        self.rule.len()
    }

    fn panel<F>(&self, a: f64, b: f64, dim: usize, f: &mut F) -> Result<Vector>
    where
        F: FnMut(f64) -> Result<Vector>,
    {
        let mut acc = Vector::zeros(dim);
        for (x, w) in self.rule.mapped(a, b) {
            acc.axpy(w, &f(x)?);
        }
        Ok(acc)
    }

    fn initial_mesh(&self, a: f64, b: f64) -> Vec<f64> {
        let width = b - a;
        let ratio = self.stiffness * width / 4.0;
        if ratio <= 1.0 {
            return vec![a, b];
        }
        let levels = (ratio.log2().ceil() as usize).min(60);
        let mut pts = Vec::with_capacity(levels + 2);
        pts.push(a);
        for i in 1..=levels {
            pts.push(b - width * 0.5f64.powi(i as i32));
        }
        pts.push(b);
        pts
    }

    /// `∫ f` over consecutive segments, bisecting each panel until the
    /// whole-versus-halves difference is below its share of `tol`.
    pub fn integrate<F>(&self, segments: &[f64], dim: usize, mut f: F) -> Result<Estimate>
    where
        F: FnMut(f64) -> Result<Vector>,
    {
        let total =
            segments.last().copied().unwrap_or(0.0) - segments.first().copied().unwrap_or(0.0);
        let mut value = Vector::zeros(dim);
        let mut error = 0.0;
        if total <= 0.0 {
            return Ok(Estimate { value, error });
        }
        for seg in segments.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b <= a {
                continue;
            }
            let mut stack = Vec::new();
            let mesh = self.initial_mesh(a, b);
            for w in mesh.windows(2).rev() {
                let coarse = self.panel(w[0], w[1], dim, &mut f)?;
                stack.push((w[0], w[1], coarse, 0usize));
            }
            while let Some((lo, hi, coarse, depth)) = stack.pop() {
                let mid = 0.5 * (lo + hi);
                let left = self.panel(lo, mid, dim, &mut f)?;
                let right = self.panel(mid, hi, dim, &mut f)?;
                let fine = &left + &right;
                let diff = fine.max_abs_diff(&coarse);
                let share = self.tol * (hi - lo) / total;
                if diff <= share || depth >= self.max_depth || mid <= lo || mid >= hi {
                    value += &fine;
                    error += diff;
                } else {
                    stack.push((mid, hi, right, depth + 1));
                    stack.push((lo, mid, left, depth + 1));
                }
            }
        }
        Ok(Estimate { value, error })
    }
}

/// `S(t)φ(0) + ∫_{−τ}^{min(0, t−τ)} S(t−τ−s) A1 φ(s) ds` for `t ≥ 0`.
pub fn homogeneous_at<K, P>(kernel: &K, phi: &P, t: f64, quad: &Quadrature) -> Result<Estimate>
where
    K: Kernel + ?Sized,
    P: Fn(f64) -> Vector + ?Sized,
{
    let tau = kernel.tau();
    let mut value = kernel.apply(t, &phi(0.0))?;
    let upper = (t - tau).min(0.0);
    if upper <= -tau {
        return Ok(Estimate { value, error: 0.0 });
    }
    let segments = breakpoints(-tau, upper, t, tau);
    let integral = quad.integrate(&segments, kernel.dim(), |s| {
        kernel.apply(t - tau - s, &kernel.apply_a1(&phi(s)))
    })?;
    value += &integral.value;
    Ok(Estimate {
        value,
        error: integral.error,
    })
}

/// `S(t+τ)φ(−τ) + ∫_{−τ}^{min(0, t)} S(t−s)[φ'(s) − A0 φ(s)] ds` for `t ≥ −τ`.
pub fn homogeneous_c1_at<K, P, D>(
    kernel: &K,
    phi: &P,
    dphi: &D,
    t: f64,
    quad: &Quadrature,
) -> Result<Estimate>
where
    K: Kernel + ?Sized,
    P: Fn(f64) -> Vector + ?Sized,
    D: Fn(f64) -> Vector + ?Sized,
{
    let tau = kernel.tau();
    let mut value = kernel.apply(t + tau, &phi(-tau))?;
    let upper = t.min(0.0);
    if upper <= -tau {
        return Ok(Estimate { value, error: 0.0 });
    }
    let segments = breakpoints(-tau, upper, t, tau);
    let integral = quad.integrate(&segments, kernel.dim(), |s| {
        let inner = &dphi(s) - &kernel.apply_a0(&phi(s));
        kernel.apply(t - s, &inner)
    })?;
    value += &integral.value;
    Ok(Estimate {
        value,
        error: integral.error,
    })
}

/// `∫_0^t S(t−s) g(s) ds` for `t ≥ 0`.
pub fn forced_at<K, G>(kernel: &K, g: &G, t: f64, quad: &Quadrature) -> Result<Estimate>
where
    K: Kernel + ?Sized,
    G: Fn(f64) -> Vector + ?Sized,
{
    if t <= 0.0 {
        return Ok(Estimate {
            value: Vector::zeros(kernel.dim()),
            error: 0.0,
        });
    }
    let segments = breakpoints(0.0, t, t, kernel.tau());
    quad.integrate(&segments, kernel.dim(), |s| kernel.apply(t - s, &g(s)))
}

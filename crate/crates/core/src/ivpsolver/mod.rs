//! Solvers for the linear delay IVP
//!
//! ```text
//! u'(t) = A0 u(t) + A1 u(t − τ) + g(t),   t > 0,
//! u(t)  = φ(t),                           −τ ≤ t ≤ 0.
//! ```
//!
//! The formula solvers evaluate closed-form representations through a
//! fundamental solution; [`solve_method_of_steps`] is an independent RK4
//! oracle.

pub mod formula;
pub mod steps;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fundsol::{FundamentalSolution, Method, TruncationPolicy};
use crate::matcore::{opnorm, Matrix, Vector};

pub use formula::{Estimate, Kernel, Quadrature};

/// A vector-valued function of time.
pub type VectorFn = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

/// Magnitude at which the method of steps reports divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Coefficients, delay, history and optional forcing of a delay system.
#[derive(Clone)]
pub struct DelaySystem {
    a0: Matrix,
    a1: Matrix,
    tau: f64,
    phi: VectorFn,
    dphi: Option<VectorFn>,
    g: Option<VectorFn>,
}

impl fmt::Debug for DelaySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelaySystem")
            .field("a0", &self.a0)
            .field("a1", &self.a1)
            .field("tau", &self.tau)
            .field("has_dphi", &self.dphi.is_some())
            .field("has_g", &self.g.is_some())
            .finish()
    }
}

fn check_callable(f: &VectorFn, at: f64, dim: usize, what: &str) -> Result<()> {
    let v = f(at);
    if v.dim() != dim {
        return Err(Error::DimensionMismatch {
            what: format!("{what} relative to A0"),
            expected: dim,
            got: v.dim(),
        });
    }
    Ok(())
}

impl DelaySystem {
    pub fn new<F>(a0: Matrix, a1: Matrix, tau: f64, phi: F) -> Result<Self>
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        if a0.dim() != a1.dim() {
            return Err(Error::DimensionMismatch {
                what: "A1 relative to A0".into(),
                expected: a0.dim(),
                got: a1.dim(),
            });
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!(
                "delay tau must be positive and finite, got {tau}"
            )));
        }
        let phi: VectorFn = Arc::new(phi);
        check_callable(&phi, 0.0, a0.dim(), "phi")?;
        check_callable(&phi, -tau, a0.dim(), "phi")?;
        Ok(DelaySystem {
            a0,
            a1,
            tau,
            phi,
            dphi: None,
            g: None,
        })
    }

    /// History constant in time.
    pub fn with_constant_history(a0: Matrix, a1: Matrix, tau: f64, value: Vector) -> Result<Self> {
        Self::new(a0, a1, tau, move |_| value.clone())
    }

    /// Attaches `φ'`, enabling [`solve_homogeneous_c1`].
    pub fn with_history_derivative<F>(mut self, dphi: F) -> Result<Self>
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        let dphi: VectorFn = Arc::new(dphi);
        check_callable(&dphi, 0.0, self.dim(), "phi'")?;
        self.dphi = Some(dphi);
        Ok(self)
    }

    pub fn with_forcing<F>(mut self, g: F) -> Result<Self>
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        let g: VectorFn = Arc::new(g);
        check_callable(&g, 0.0, self.dim(), "g")?;
        self.g = Some(g);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }

    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    pub fn a1(&self) -> &Matrix {
        &self.a1
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn history(&self, t: f64) -> Vector {
        (self.phi)(t)
    }

    pub fn history_derivative(&self, t: f64) -> Option<Vector> {
        self.dphi.as_ref().map(|d| d(t))
    }

    pub fn forcing(&self, t: f64) -> Option<Vector> {
        self.g.as_ref().map(|g| g(t))
    }

    pub fn has_forcing(&self) -> bool {
        self.g.is_some()
    }
}

/// The algorithm that produced a solution grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Formula,
    FormulaC1,
    FormulaForced,
    MethodOfSteps,
    Spectral,
    SpectralC1,
    FiniteDifference,
}

impl SolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolveMethod::Formula => "formula",
            SolveMethod::FormulaC1 => "formula-c1",
            SolveMethod::FormulaForced => "formula-forced",
            SolveMethod::MethodOfSteps => "method-of-steps",
            SolveMethod::Spectral => "spectral",
            SolveMethod::SpectralC1 => "spectral-c1",
            SolveMethod::FiniteDifference => "finite-difference",
        }
    }
}

/// Accuracy parameters attached to a solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolutionMeta {
    pub truncation_tol: Option<f64>,
    pub quad_tol: Option<f64>,
    pub quad_points: Option<usize>,
    /// Largest accumulated quadrature error estimate over the grid.
    pub quad_error: Option<f64>,
    pub step: Option<f64>,
}

/// Solution values on an increasing time grid.
#[derive(Debug, Clone)]
pub struct SolutionGrid {
    times: Vec<f64>,
    values: Vec<Vector>,
    derivatives: Option<Vec<Vector>>,
    method: SolveMethod,
    meta: SolutionMeta,
}

impl SolutionGrid {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Vector>,
        derivatives: Option<Vec<Vector>>,
        method: SolveMethod,
        meta: SolutionMeta,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(invalid("times and values differ in length"));
        }
        if let Some(d) = &derivatives {
            if d.len() != times.len() {
                return Err(invalid("times and derivatives differ in length"));
            }
        }
        check_times(&times, f64::NEG_INFINITY)?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericRange(format!(
                "non-finite solution value at t = {}",
                times[bad]
            )));
        }
        Ok(SolutionGrid {
            times,
            values,
            derivatives,
            method,
            meta,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn derivatives(&self) -> Option<&[Vector]> {
        self.derivatives.as_deref()
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    pub fn meta(&self) -> &SolutionMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Interpolated value inside the grid: cubic Hermite when derivatives are
    /// stored, linear otherwise.
    pub fn value_at(&self, t: f64) -> Result<Vector> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(invalid("empty solution grid")),
        };
        if !(t >= first && t <= last) {
            return Err(invalid(format!(
                "t = {t} outside the grid [{first}, {last}]"
            )));
        }
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Ok(self.values[i].clone()),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (u0, u1) = (&self.values[i], &self.values[i + 1]);
        match &self.derivatives {
            Some(d) => {
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                let mut v = u0.scale(h00);
                v.axpy(h * h10, &d[i]);
                v.axpy(h01, u1);
                v.axpy(h * h11, &d[i + 1]);
                Ok(v)
            }
            None => {
                let mut v = u0.scale(1.0 - s);
                v.axpy(s, u1);
                Ok(v)
            }
        }
    }

    /// Largest max-norm difference against another solution, compared at this
    /// grid's times.
    pub fn max_diff(&self, other: &SolutionGrid) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (t, v) in self.times.iter().zip(&self.values) {
            worst = worst.max(v.max_abs_diff(&other.value_at(*t)?));
        }
        Ok(worst)
    }
}

fn check_times(times: &[f64], lower: f64) -> Result<()> {
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(invalid(format!("grid time {i} is not finite")));
        }
        if t < lower {
            return Err(invalid(format!("grid time {t} is below {lower}")));
        }
        if i > 0 && t <= times[i - 1] {
            return Err(invalid("grid times must be strictly increasing"));
        }
    }
    Ok(())
}

/// Settings for the formula solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulaOptions {
    /// Route used to evaluate the fundamental solution.
    pub method: Method,
    pub truncation: TruncationPolicy,
    /// Absolute quadrature tolerance per integral.
    pub quad_tol: f64,
}

impl Default for FormulaOptions {
    fn default() -> Self {
        FormulaOptions {
            method: Method::NonPermutable,
            truncation: TruncationPolicy::default(),
            quad_tol: 1e-8,
        }
    }
}

impl FormulaOptions {
    /// Both tolerances set to `tol`.
    pub fn with_tol(tol: f64) -> Result<Self> {
        Ok(FormulaOptions {
            truncation: TruncationPolicy::with_tol(tol)?,
            quad_tol: tol,
            ..FormulaOptions::default()
        })
    }

    fn meta(&self, quad: &Quadrature) -> SolutionMeta {
        SolutionMeta {
            truncation_tol: Some(self.truncation.tol),
            quad_tol: Some(self.quad_tol),
            quad_points: Some(quad.points()),
            quad_error: None,
            step: None,
        }
    }
}

fn kernel_for(sys: &DelaySystem, opts: &FormulaOptions) -> Result<FundamentalSolution> {
    FundamentalSolution::new(
        sys.a0.clone(),
        sys.a1.clone(),
        sys.tau,
        opts.method,
        opts.truncation,
    )
}

fn evaluate_grid<F>(
    times: &[f64],
    method: SolveMethod,
    mut meta: SolutionMeta,
    point: F,
) -> Result<SolutionGrid>
where
    F: Fn(f64) -> Result<Estimate> + Sync,
{
    let estimates: Vec<Estimate> = times.par_iter().map(|&t| point(t)).collect::<Result<_>>()?;
    let quad_error = estimates.iter().fold(0.0, |acc: f64, e| acc.max(e.error));
    meta.quad_error = Some(quad_error);
    let values = estimates.into_iter().map(|e| e.value).collect();
    SolutionGrid::new(times.to_vec(), values, None, method, meta)
}

fn require_unforced(sys: &DelaySystem) -> Result<()> {
    if sys.has_forcing() {
        return Err(Error::Precondition(
            "system has a forcing term; use solve_nonhomogeneous".into(),
        ));
    }
    Ok(())
}

/// Homogeneous solution from `φ(0)` and the history integral against `A1`.
/// Grid times must be non-negative.
pub fn solve_homogeneous(
    sys: &DelaySystem,
    times: &[f64],
    opts: &FormulaOptions,
) -> Result<SolutionGrid> {
    require_unforced(sys)?;
    check_times(times, 0.0)?;
    let kernel = kernel_for(sys, opts)?;
    let quad = Quadrature::new(opts.quad_tol)?.with_stiffness(opnorm(&sys.a0));
    let phi = &*sys.phi;
    evaluate_grid(times, SolveMethod::Formula, opts.meta(&quad), |t| {
        formula::homogeneous_at(&kernel, phi, t, &quad)
    })
}

/// Homogeneous solution from `φ(−τ)` and the history integral of
/// `φ' − A0 φ`. Grid times may start at `−τ`, where the history is reproduced.
pub fn solve_homogeneous_c1(
    sys: &DelaySystem,
    times: &[f64],
    opts: &FormulaOptions,
) -> Result<SolutionGrid> {
    require_unforced(sys)?;
    let dphi = sys.dphi.as_deref().ok_or_else(|| {
        Error::Unsupported("the derivative-based formula needs phi' to be supplied".into())
    })?;
    check_times(times, -sys.tau)?;
    let kernel = kernel_for(sys, opts)?;
    let quad = Quadrature::new(opts.quad_tol)?.with_stiffness(opnorm(&sys.a0));
    let phi = &*sys.phi;
    evaluate_grid(times, SolveMethod::FormulaC1, opts.meta(&quad), |t| {
        formula::homogeneous_c1_at(&kernel, phi, dphi, t, &quad)
    })
}

/// Homogeneous solution plus the convolution `∫_0^t S(t−s) g(s) ds`.
pub fn solve_nonhomogeneous(
    sys: &DelaySystem,
    times: &[f64],
    opts: &FormulaOptions,
) -> Result<SolutionGrid> {
    let g = sys
        .g
        .as_deref()
        .ok_or_else(|| Error::Precondition("system has no forcing term".into()))?;
    check_times(times, 0.0)?;
    let kernel = kernel_for(sys, opts)?;
    let quad = Quadrature::new(opts.quad_tol)?.with_stiffness(opnorm(&sys.a0));
    let phi = &*sys.phi;
    evaluate_grid(times, SolveMethod::FormulaForced, opts.meta(&quad), |t| {
        let mut u = formula::homogeneous_at(&kernel, phi, t, &quad)?;
        let forced = formula::forced_at(&kernel, g, t, &quad)?;
        u.value += &forced.value;
        u.error += forced.error;
        Ok(u)
    })
}

struct SystemRhs<'a>(&'a DelaySystem);

impl steps::DelayRhs for SystemRhs<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, t: f64, u: &[f64], lag: &[f64], out: &mut [f64]) {
        let (a0, a1) = (self.0.a0.as_dmatrix(), self.0.a1.as_dmatrix());
        let g = self.0.forcing(t);
        for i in 0..out.len() {
            let mut acc = g.as_ref().map_or(0.0, |g| g.get(i));
            for j in 0..u.len() {
                acc += a0[(i, j)] * u[j] + a1[(i, j)] * lag[j];
            }
            out[i] = acc;
        }
    }

    fn history(&self, t: f64, out: &mut [f64]) {
        out.copy_from_slice(self.0.history(t).as_slice());
    }
}

/// RK4 method of steps on `t_j = j·h` up to `t_end`; `h` must divide τ.
/// The grid stores derivatives, so [`SolutionGrid::value_at`] gives
/// Hermite dense output.
pub fn solve_method_of_steps(sys: &DelaySystem, t_end: f64, h: f64) -> Result<SolutionGrid> {
    let cfg = steps::StepsConfig {
        tau: sys.tau,
        h,
        t_end,
        divergence_limit: DIVERGENCE_LIMIT,
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    steps::integrate(&SystemRhs(sys), &cfg, |t, u, du| {
        times.push(t);
        values.push(Vector::from_dvector(DVector::from_column_slice(u)));
        derivs.push(Vector::from_dvector(DVector::from_column_slice(du)));
    })?;
    let meta = SolutionMeta {
        step: Some(sys.tau / steps::steps_per_delay(sys.tau, h)? as f64),
        ..SolutionMeta::default()
    };
    SolutionGrid::new(
        times,
        values,
        Some(derivs),
        SolveMethod::MethodOfSteps,
        meta,
    )
}

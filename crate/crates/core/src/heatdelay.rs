//! The delayed heat equation on `[0, π]` with homogeneous Dirichlet data,
//!
//! ```text
//! u_t(x, t) = a² u_xx(x, t) + b u(x, t − τ) + ψ(x, t),
//! u(0, t) = u(π, t) = 0,    u(x, t) = φ(x, t) for −τ ≤ t ≤ 0.
//! ```
//!
//! [`solve_spectral`] expands in the sine eigenbasis. Each mode amplitude
//! obeys a scalar delay equation `c' = −a²n² c + b c(t−τ) + Ψ_n` whose
//! fundamental solution is evaluated term by term as
//! `Σ_k b^k e^{−a²n²(t−kτ)} (t−kτ)^k / k!`, which never forms the huge
//! intermediate `b·e^{a²n²τ}`. The modes are batched as one diagonal system
//! so the sine projection of φ and ψ at each quadrature node is shared.
//!
//! [`solve_fd_oracle`] is an independent method-of-lines check: central
//! differences in `x`, RK4 method of steps in `t`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fundsol::piece_index;
use crate::ivpsolver::formula::{self, Estimate, Kernel, Quadrature};
use crate::ivpsolver::steps::{self, DelayRhs, StepsConfig};
use crate::ivpsolver::{SolveMethod, DIVERGENCE_LIMIT};
use crate::matcore::{Matrix, Vector};
use crate::quadrature::GaussLegendre;

/// A scalar field `f(x, t)`.
pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Coefficients, history and optional forcing of a delayed heat problem.
#[derive(Clone)]
pub struct HeatProblem {
    a: f64,
    b: f64,
    tau: f64,
    phi: Field,
    dphi_dt: Option<Field>,
    psi: Option<Field>,
}

impl std::fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatProblem")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("tau", &self.tau)
            .field("has_dphi_dt", &self.dphi_dt.is_some())
            .field("has_psi", &self.psi.is_some())
            .finish()
    }
}

const COMPATIBILITY_TOL: f64 = 1e-10;

impl HeatProblem {
    /// Checks `φ(0, t) = φ(π, t) = 0` at sample times in `[−τ, 0]`.
    pub fn new<F>(a: f64, b: f64, tau: f64, phi: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!(
                "coefficients must be finite, got a = {a}, b = {b}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!(
                "delay tau must be positive and finite, got {tau}"
            )));
        }
        for i in 0..=10 {
            let t = -tau * i as f64 / 10.0;
            let (left, right) = (phi(0.0, t), phi(PI, t));
            if !(left.abs() <= COMPATIBILITY_TOL && right.abs() <= COMPATIBILITY_TOL) {
                return Err(Error::Precondition(format!(
                    "history must vanish at x = 0 and x = π; at t = {t} got {left:e} and {right:e}"
                )));
            }
        }
        Ok(HeatProblem {
            a,
            b,
            tau,
            phi: Arc::new(phi),
            dphi_dt: None,
            psi: None,
        })
    }

    /// Attaches `∂φ/∂t`, enabling [`solve_spectral_c1`].
    pub fn with_history_time_derivative<F>(mut self, dphi_dt: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.dphi_dt = Some(Arc::new(dphi_dt));
        self
    }

    pub fn with_forcing<F>(mut self, psi: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.psi = Some(Arc::new(psi));
        self
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn history(&self, x: f64, t: f64) -> f64 {
        (self.phi)(x, t)
    }

    pub fn forcing(&self, x: f64, t: f64) -> f64 {
        self.psi.as_ref().map_or(0.0, |p| p(x, t))
    }

    pub fn has_forcing(&self) -> bool {
        self.psi.is_some()
    }
}

/// Scaling of the sine basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Coefficients `(2/π)∫f sin(nξ)dξ`, basis `sin(nx)`.
    #[default]
    Fourier,
    /// Inner products with `√(2/π) sin(nx)`, basis `√(2/π) sin(nx)`.
    Orthonormal,
}

impl Normalization {
    fn projection_scale(self) -> f64 {
        match self {
            Normalization::Fourier => 2.0 / PI,
            Normalization::Orthonormal => (2.0 / PI).sqrt(),
        }
    }

    fn basis_scale(self) -> f64 {
        match self {
            Normalization::Fourier => 1.0,
            Normalization::Orthonormal => (2.0 / PI).sqrt(),
        }
    }
}

/// Spectral truncation and quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub n_modes: usize,
    /// Minimum number of nodes for the sine projection.
    pub quad_points_x: usize,
    /// Absolute tolerance of the time integrals.
    pub time_tol: f64,
    pub normalization: Normalization,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            n_modes: 64,
            quad_points_x: 128,
            time_tol: 1e-8,
            normalization: Normalization::Fourier,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(invalid("n_modes must be at least 1"));
        }
        if self.quad_points_x == 0 {
            return Err(invalid("quad_points_x must be at least 1"));
        }
        if !(self.time_tol > 0.0 && self.time_tol.is_finite()) {
            return Err(invalid(format!(
                "time tolerance must be positive, got {}",
                self.time_tol
            )));
        }
        Ok(())
    }
}

const PANEL_POINTS: usize = 16;

/// Precomputed composite Gauss–Legendre projection onto `sin(nx)`,
/// `n = 1..=n_modes`.
#[derive(Debug, Clone)]
pub struct SineProjector {
    n_modes: usize,
    nodes: Vec<f64>,
    // weights[j] * scale * sin(n x_j), row-major by node
    table: Vec<f64>,
    normalization: Normalization,
}

impl SineProjector {
    /// Uses at least `quad_points_x` nodes, and at least two 16-point panels
    /// per period of the highest mode.
    pub fn new(n_modes: usize, quad_points_x: usize, normalization: Normalization) -> Self {
        let panels = quad_points_x
            .div_ceil(PANEL_POINTS)
            .max(n_modes.div_ceil(2))
            .max(1);
        let rule = GaussLegendre::new(PANEL_POINTS);
        let width = PI / panels as f64;
        let scale = normalization.projection_scale();
        let mut nodes = Vec::with_capacity(panels * PANEL_POINTS);
        let mut table = Vec::with_capacity(panels * PANEL_POINTS * n_modes);
        for p in 0..panels {
            let lo = p as f64 * width;
            let hi = if p + 1 == panels { PI } else { lo + width };
            for (x, w) in rule.mapped(lo, hi) {
                nodes.push(x);
                for n in 1..=n_modes {
                    table.push(w * scale * (n as f64 * x).sin());
                }
            }
        }
        SineProjector {
            n_modes,
            nodes,
            table,
            normalization,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn project(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_modes];
        for (j, &x) in self.nodes.iter().enumerate() {
            let fx = f(x);
            if fx == 0.0 {
                continue;
            }
            let row = &self.table[j * self.n_modes..(j + 1) * self.n_modes];
            for (o, r) in out.iter_mut().zip(row) {
                *o += fx * r;
            }
        }
        out
    }

    /// `Σ_n c_n e_n(x)`, exactly zero at the end points.
    pub fn reconstruct(&self, coeffs: &[f64], x: f64) -> f64 {
        if x == 0.0 || x == PI {
            return 0.0;
        }
        let scale = self.normalization.basis_scale();
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * scale * ((i + 1) as f64 * x).sin())
            .sum()
    }
}

/// `(2/π)∫_0^π f(ξ) sin(nξ) dξ` for `n = 1..=n_max`.
pub fn fourier_coeffs(f: impl Fn(f64) -> f64, n_max: usize, quad_points_x: usize) -> Vec<f64> {
    SineProjector::new(n_max, quad_points_x, Normalization::Fourier).project(f)
}

/// Fundamental solution of `c' = −r c + b c(t − τ)` in factored form.
fn mode_kernel(rate: f64, b: f64, tau: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let n = piece_index(t, tau);
    let mut sum = 0.0;
    for k in 0..=n {
        let s = t - k as f64 * tau;
        let mut term = (-rate * s).exp();
        for j in 1..=k {
            term *= b * s / j as f64;
        }
        sum += term;
    }
    if !sum.is_finite() {
        return Err(Error::NumericRange(format!(
            "mode kernel overflows at t = {t} (rate {rate:e}, b = {b})"
        )));
    }
    Ok(sum)
}

/// The diagonal delay system of the first `rates.len()` modes.
struct ModeKernel {
    tau: f64,
    b: f64,
    rates: Vec<f64>,
    a0: Matrix,
    a1: Matrix,
}

impl ModeKernel {
    fn new(p: &HeatProblem, n_modes: usize) -> Result<Self> {
        let rates: Vec<f64> = (1..=n_modes).map(|n| p.a * p.a * (n * n) as f64).collect();
        let neg: Vec<f64> = rates.iter().map(|r| -r).collect();
        Ok(ModeKernel {
            tau: p.tau,
            b: p.b,
            a0: Matrix::from_diagonal(&neg)?,
            a1: Matrix::identity(n_modes).scale(p.b),
            rates,
        })
    }
}

fn vector(v: Vec<f64>) -> Vector {
    Vector::from_dvector(DVector::from_vec(v))
}

impl Kernel for ModeKernel {
    fn dim(&self) -> usize {
        self.rates.len()
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn a0(&self) -> &Matrix {
        &self.a0
    }

    fn a1(&self) -> &Matrix {
        &self.a1
    }

    fn eval(&self, t: f64) -> Result<Matrix> {
        let diag = self
            .rates
            .iter()
            .map(|&r| mode_kernel(r, self.b, self.tau, t))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_diagonal(&diag)
    }

    fn apply(&self, t: f64, v: &Vector) -> Result<Vector> {
        let out = self
            .rates
            .iter()
            .zip(v.as_slice())
            .map(|(&r, &x)| Ok(mode_kernel(r, self.b, self.tau, t)? * x))
            .collect::<Result<Vec<_>>>()?;
        Ok(vector(out))
    }

    fn apply_a0(&self, v: &Vector) -> Vector {
        vector(
            self.rates
                .iter()
                .zip(v.as_slice())
                .map(|(r, x)| -r * x)
                .collect(),
        )
    }

    fn apply_a1(&self, v: &Vector) -> Vector {
        v.scale(self.b)
    }
}

/// Accuracy data attached to a heat solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatMeta {
    pub n_modes: Option<usize>,
    /// Largest magnitude among the last two mode amplitudes over the grid.
    pub coefficient_tail: Option<f64>,
    pub time_tol: Option<f64>,
    pub quad_error: Option<f64>,
    /// Output spacing of the finite-difference grid.
    pub step: Option<f64>,
    pub substeps: Option<usize>,
    pub m_interior: Option<usize>,
}

/// Values `u(x_i, t_j)` on a tensor grid, stored by time row.
#[derive(Debug, Clone)]
pub struct HeatGrid {
    xs: Vec<f64>,
    ts: Vec<f64>,
    values: Vec<f64>,
    coefficients: Option<Vec<Vec<f64>>>,
    method: SolveMethod,
    meta: HeatMeta,
}

impl HeatGrid {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn value(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.xs.len() + ix]
    }

    pub fn row(&self, it: usize) -> &[f64] {
        &self.values[it * self.xs.len()..(it + 1) * self.xs.len()]
    }

    /// Mode amplitudes per time, for spectral solutions.
    pub fn coefficients(&self) -> Option<&[Vec<f64>]> {
        self.coefficients.as_deref()
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    pub fn meta(&self) -> &HeatMeta {
        &self.meta
    }

    /// Row index of `t`, matched to within rounding.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.ts.partition_point(|&s| s < t - tol);
        (i < self.ts.len() && (self.ts[i] - t).abs() <= tol).then_some(i)
    }

    /// Max-norm difference at this grid's times; `other` must share the
    /// spatial grid and contain every time.
    pub fn max_diff(&self, other: &HeatGrid) -> Result<f64> {
        if self.xs.len() != other.xs.len()
            || self
                .xs
                .iter()
                .zip(&other.xs)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(invalid("heat grids have different spatial nodes"));
        }
        let mut worst: f64 = 0.0;
        for (it, &t) in self.ts.iter().enumerate() {
            let jt = other
                .time_index(t)
                .ok_or_else(|| invalid(format!("time {t} missing from the other grid")))?;
            for (a, b) in self.row(it).iter().zip(other.row(jt)) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

fn check_grids(xs: &[f64], ts: &[f64], t_min: f64) -> Result<()> {
    for &x in xs {
        if !(0.0..=PI).contains(&x) {
            return Err(invalid(format!("x = {x} outside [0, π]")));
        }
    }
    for (i, &t) in ts.iter().enumerate() {
        if !(t.is_finite() && t >= t_min) {
            return Err(invalid(format!(
                "time {t} must be finite and at least {t_min}"
            )));
        }
        if i > 0 && t <= ts[i - 1] {
            return Err(invalid("times must be strictly increasing"));
        }
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Route {
    History,
    Derivative,
}

fn spectral(
    p: &HeatProblem,
    cfg: &SpectralConfig,
    xs: &[f64],
    ts: &[f64],
    route: Route,
) -> Result<HeatGrid> {
    cfg.validate()?;
    let dphi = match route {
        Route::Derivative => Some(p.dphi_dt.clone().ok_or_else(|| {
            Error::Unsupported("the derivative-based route needs ∂φ/∂t to be supplied".into())
        })?),
        Route::History => None,
    };
    let t_min = match route {
        Route::History => 0.0,
        Route::Derivative => -p.tau,
    };
    check_grids(xs, ts, t_min)?;

    let projector = SineProjector::new(cfg.n_modes, cfg.quad_points_x, cfg.normalization);
    let kernel = ModeKernel::new(p, cfg.n_modes)?;
    let max_rate = kernel.rates.last().copied().unwrap_or(0.0);
    let quad = Quadrature::new(cfg.time_tol)?.with_stiffness(max_rate);

    let phi_n = |s: f64| vector(projector.project(|x| p.history(x, s)));
    let dphi_n = |s: f64| {
        let d = dphi.as_ref().expect("derivative route");
        vector(projector.project(|x| d(x, s)))
    };
    let psi_n = |s: f64| vector(projector.project(|x| p.forcing(x, s)));

    let estimates: Vec<Estimate> = ts
        .par_iter()
        .map(|&t| {
            let mut est = match route {
                Route::History => formula::homogeneous_at(&kernel, &phi_n, t, &quad)?,
                Route::Derivative => {
                    formula::homogeneous_c1_at(&kernel, &phi_n, &dphi_n, t, &quad)?
                }
            };
            if p.has_forcing() && t > 0.0 {
                let forced = formula::forced_at(&kernel, &psi_n, t, &quad)?;
                est.value += &forced.value;
                est.error += forced.error;
            }
            Ok(est)
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(ts.len() * xs.len());
    let mut coefficients = Vec::with_capacity(ts.len());
    let mut tail: f64 = 0.0;
    let mut quad_error: f64 = 0.0;
    let basis = cfg.normalization.basis_scale();
    for est in estimates {
        let c = est.value.as_slice().to_vec();
        let n = c.len();
        tail = tail.max(c[n - 1].abs() * basis);
        if n >= 2 {
            tail = tail.max(c[n - 2].abs() * basis);
        }
        quad_error = quad_error.max(est.error);
        for &x in xs {
            values.push(projector.reconstruct(&c, x));
        }
        coefficients.push(c);
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericRange(format!(
            "non-finite heat solution at t = {}",
            ts[bad / xs.len().max(1)]
        )));
    }
    Ok(HeatGrid {
        xs: xs.to_vec(),
        ts: ts.to_vec(),
        values,
        coefficients: Some(coefficients),
        method: match route {
            Route::History => SolveMethod::Spectral,
            Route::Derivative => SolveMethod::SpectralC1,
        },
        meta: HeatMeta {
            n_modes: Some(cfg.n_modes),
            coefficient_tail: Some(tail),
            time_tol: Some(cfg.time_tol),
            quad_error: Some(quad_error),
            ..HeatMeta::default()
        },
    })
}

/// Sine-series solution with mode amplitudes from `φ(0)` and the history
/// integral. Times must be non-negative.
pub fn solve_spectral(
    p: &HeatProblem,
    cfg: &SpectralConfig,
    xs: &[f64],
    ts: &[f64],
) -> Result<HeatGrid> {
    spectral(p, cfg, xs, ts, Route::History)
}

/// Sine-series solution with mode amplitudes from `φ(−τ)` and the history
/// integral of `∂φ/∂t + a²n² φ`. Times may start at `−τ`.
pub fn solve_spectral_c1(
    p: &HeatProblem,
    cfg: &SpectralConfig,
    xs: &[f64],
    ts: &[f64],
) -> Result<HeatGrid> {
    spectral(p, cfg, xs, ts, Route::Derivative)
}

/// Internal RK4 substeps per output step of the finite-difference oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Substeps {
    /// Enough substeps to keep RK4 inside its stability interval.
    #[default]
    Auto,
    Fixed(usize),
}

/// Real stability limit of classical RK4 with a safety margin.
const RK4_STABLE: f64 = 2.5;

struct FdRhs<'a> {
    p: &'a HeatProblem,
    xs: Vec<f64>,
    diffusion: f64,
}

impl DelayRhs for FdRhs<'_> {
    fn dim(&self) -> usize {
        self.xs.len()
    }

    fn eval(&self, t: f64, u: &[f64], lag: &[f64], out: &mut [f64]) {
        let m = u.len();
        for i in 0..m {
            let left = if i == 0 { 0.0 } else { u[i - 1] };
            let right = if i + 1 == m { 0.0 } else { u[i + 1] };
            out[i] = self.diffusion * (left - 2.0 * u[i] + right)
                + self.p.b * lag[i]
                + self.p.forcing(self.xs[i], t);
        }
    }

    fn history(&self, t: f64, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(&self.xs) {
            *o = self.p.history(x, t);
        }
    }
}

/// Method of lines with `m_interior` uniform interior nodes and RK4 method of
/// steps; output every `h` (which must divide τ) up to `t_end`.
pub fn solve_fd_oracle(p: &HeatProblem, m_interior: usize, h: f64, t_end: f64) -> Result<HeatGrid> {
    solve_fd_oracle_with(p, m_interior, h, t_end, Substeps::Auto)
}

pub fn solve_fd_oracle_with(
    p: &HeatProblem,
    m_interior: usize,
    h: f64,
    t_end: f64,
    substeps: Substeps,
) -> Result<HeatGrid> {
    if m_interior < 8 {
        return Err(invalid(format!(
            "m_interior must be at least 8, got {m_interior}"
        )));
    }
    let per_delay = steps::steps_per_delay(p.tau, h)?;
    let h = p.tau / per_delay as f64;
    let n_out = steps::step_count(t_end, h)?;
    let dx = PI / (m_interior + 1) as f64;
    let diffusion = p.a * p.a / (dx * dx);
    let sub = match substeps {
        Substeps::Auto => {
            let spectral_radius = 4.0 * diffusion + p.b.abs();
            ((h * spectral_radius / RK4_STABLE).ceil() as usize).max(1)
        }
        Substeps::Fixed(0) => return Err(invalid("substep count must be at least 1")),
        Substeps::Fixed(s) => s,
    };
    let interior: Vec<f64> = (1..=m_interior).map(|i| i as f64 * dx).collect();
    let rhs = FdRhs {
        p,
        xs: interior,
        diffusion,
    };
    let cfg = StepsConfig {
        tau: p.tau,
        h: h / sub as f64,
        t_end: n_out as f64 * h,
        divergence_limit: DIVERGENCE_LIMIT,
    };
    let mut xs = Vec::with_capacity(m_interior + 2);
    xs.push(0.0);
    xs.extend_from_slice(&rhs.xs);
    xs.push(PI);
    let mut ts = Vec::with_capacity(n_out + 1);
    let mut values = Vec::with_capacity((n_out + 1) * xs.len());
    let mut node = 0usize;
    steps::integrate(&rhs, &cfg, |_, u, _| {
        if node.is_multiple_of(sub) {
            ts.push((node / sub) as f64 * h);
            values.push(0.0);
            values.extend_from_slice(u);
            values.push(0.0);
        }
        node += 1;
    })?;
    Ok(HeatGrid {
        xs,
        ts,
        values,
        coefficients: None,
        method: SolveMethod::FiniteDifference,
        meta: HeatMeta {
            step: Some(h),
            substeps: Some(sub),
            m_interior: Some(m_interior),
            ..HeatMeta::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_kernel_first_piece_is_exponential() {
        assert_eq!(mode_kernel(4.0, 0.5, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(mode_kernel(4.0, 0.5, 1.0, -0.1).unwrap(), 0.0);
        assert!((mode_kernel(4.0, 0.5, 1.0, 0.7).unwrap() - (-2.8f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn mode_kernel_matches_unfactored_form_where_representable() {
        // e^{−rt}·Σ_k (b e^{rτ})^k (t−kτ)^k/k!
        let (r, b, tau) = (1.5, 0.7, 0.8);
        for t in [0.5, 0.8, 1.3, 2.2, 3.9] {
            let n = piece_index(t, tau);
            let bn = b * (r * tau).exp();
            let mut sum = 0.0;
            let mut fact = 1.0;
            for k in 0..=n {
                if k > 0 {
                    fact *= k as f64;
                }
                sum += (bn * (t - k as f64 * tau)).powi(k as i32) / fact;
            }
            let naive = (-r * t).exp() * sum;
            assert!(
                (mode_kernel(r, b, tau, t).unwrap() - naive).abs() < 1e-14 * naive.abs().max(1.0)
            );
        }
    }

    #[test]
    fn high_modes_stay_finite() {
        // b·e^{a²n²τ} overflows here
        let v = mode_kernel(64.0 * 64.0 * 1.0, 0.5, 1.0, 2.5).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn projector_reconstructs_a_sine_polynomial() {
        let proj = SineProjector::new(8, 64, Normalization::Orthonormal);
        let f = |x: f64| 0.3 * x.sin() - 1.2 * (5.0 * x).sin();
        let c = proj.project(f);
        for x in [0.1, 1.0, 2.5] {
            assert!((proj.reconstruct(&c, x) - f(x)).abs() < 1e-13);
        }
        assert_eq!(proj.reconstruct(&c, PI), 0.0);
    }
}

//! The fundamental solution `S(t;τ)` of `S'(t) = A0·S(t) + A1·S(t−τ)` with
//! `S = Θ` on `[−τ, 0)` and `S(0) = I`.
//!
//! Four evaluation routes are provided:
//!
//! * [`eval_pure_delayed`]: the piecewise polynomial `exp_τ(A1 t)` (valid when `A0 = Θ`);
//! * [`eval_permutable`]: `exp(A0 t)·exp_τ(A1 e^{−A0 τ} t)` for commuting coefficients;
//! * [`eval_nonpermutable`]: the double series over the [`QTable`] coefficients;
//! * [`dyson_phillips_partial`]: partial sums of the delayed Dyson–Phillips series,
//!   with every convolution computed by Gauss–Legendre quadrature.
//!
//! On a piece `nτ < t ≤ (n+1)τ` exact multiples of τ belong to the left piece.
//! Norm bounds use the induced 2-norm ([`opnorm`]) with growth constants
//! `M = 1`, `ω = ‖A0‖`.

use std::sync::{Arc, Mutex};

use crate::error::{invalid, Error, Result};
use crate::matcore::{commutator, expm, opnorm, Matrix};
use crate::qkernel::QTable;
use crate::quadrature::{breakpoints, composite, GaussLegendre};

/// Evaluation route for [`FundamentalSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PureDelayed,
    Permutable,
    NonPermutable,
    DysonPhillips,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PureDelayed => "pure-delayed",
            Method::Permutable => "permutable",
            Method::NonPermutable => "nonpermutable",
            Method::DysonPhillips => "dyson-phillips",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure-delayed" | "pure_delayed" | "puredelayed" => Ok(Method::PureDelayed),
            "permutable" => Ok(Method::Permutable),
            "nonpermutable" | "non-permutable" | "non_permutable" => Ok(Method::NonPermutable),
            "dyson-phillips" | "dyson_phillips" | "dysonphillips" => Ok(Method::DysonPhillips),
            other => Err(invalid(format!(
                "unknown fundamental-solution method '{other}'"
            ))),
        }
    }
}

/// Truncation and quadrature parameters for the series routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Target absolute entrywise error of the series tail.
    pub tol: f64,
    /// Cap on the series index k.
    pub k_max: usize,
    /// Gauss–Legendre nodes per subinterval for Dyson–Phillips convolutions.
    pub quad_points: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tol: 1e-8,
            k_max: 400,
            quad_points: 16,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tol: f64, k_max: usize, quad_points: usize) -> Result<Self> {
        let p = TruncationPolicy {
            tol,
            k_max,
            quad_points,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(tol: f64) -> Result<Self> {
        Self::new(
            tol,
            TruncationPolicy::default().k_max,
            TruncationPolicy::default().quad_points,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!(
                "truncation tol must be positive, got {}",
                self.tol
            )));
        }
        if self.k_max < 1 {
            return Err(invalid("k_max must be at least 1"));
        }
        if self.quad_points < 2 {
            return Err(invalid("quad_points must be at least 2"));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "delay tau must be positive and finite, got {tau}"
        )))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("time must be finite, got {t}")))
    }
}

fn check_pair(a0: &Matrix, a1: &Matrix) -> Result<()> {
    if a0.dim() != a1.dim() {
        return Err(Error::DimensionMismatch {
            what: "A1 relative to A0".into(),
            expected: a0.dim(),
            got: a1.dim(),
        });
    }
    Ok(())
}

/// The piece index n with `nτ < t ≤ (n+1)τ`, for `t > 0`.
pub fn piece_index(t: f64, tau: f64) -> usize {
    debug_assert!(t > 0.0);
    ((t / tau).ceil() as usize).saturating_sub(1)
}

/// Value on the initial interval and at the origin, `None` for `t > 0`.
fn initial_value(dim: usize, t: f64) -> Option<Matrix> {
    if t < 0.0 {
        Some(Matrix::zeros(dim))
    } else if t == 0.0 {
        Some(Matrix::identity(dim))
    } else {
        None
    }
}

/// `exp_τ(A1 t)`: Θ for `t < 0`, I at 0, and
/// `Σ_{l=0}^{n} A1^l (t − lτ)^l / l!` on `nτ < t ≤ (n+1)τ`.
pub fn eval_pure_delayed(a1: &Matrix, tau: f64, t: f64) -> Result<Matrix> {
    check_tau(tau)?;
    check_time(t)?;
    if let Some(v) = initial_value(a1.dim(), t) {
        return Ok(v);
    }
    let n = piece_index(t, tau);
    let mut sum = Matrix::identity(a1.dim());
    let mut power = Matrix::identity(a1.dim());
    let mut factorial = 1.0;
    for l in 1..=n {
        power = &power * a1;
        factorial *= l as f64;
        let s = t - l as f64 * tau;
        sum.axpy(s.powi(l as i32) / factorial, &power);
    }
    Ok(sum)
}

/// Acceptance threshold for treating `A0`, `A1` as commuting.
pub fn commutation_tolerance(a0: &Matrix, a1: &Matrix) -> f64 {
    1e-10 * (1.0 + opnorm(a0) * opnorm(a1))
}

fn require_commuting(a0: &Matrix, a1: &Matrix) -> Result<()> {
    check_pair(a0, a1)?;
    let c = opnorm(&commutator(a0, a1)?);
    let tol = commutation_tolerance(a0, a1);
    if c > tol {
        return Err(Error::Precondition(format!(
            "coefficients do not commute: ‖[A0, A1]‖ = {c:e} exceeds {tol:e}"
        )));
    }
    Ok(())
}

/// `exp(A0 t)·exp_τ(A2 t)` with `A2 = A1·exp(−A0 τ)`, for commuting `A0`, `A1`.
pub fn eval_permutable(a0: &Matrix, a1: &Matrix, tau: f64, t: f64) -> Result<Matrix> {
    check_tau(tau)?;
    check_time(t)?;
    require_commuting(a0, a1)?;
    permutable_unchecked(a0, a1, tau, t)
}

fn permutable_unchecked(a0: &Matrix, a1: &Matrix, tau: f64, t: f64) -> Result<Matrix> {
    if let Some(v) = initial_value(a0.dim(), t) {
        return Ok(v);
    }
    let a2 = a1 * &expm(a0, -tau)?;
    Ok(&expm(a0, t)? * &eval_pure_delayed(&a2, tau, t)?)
}

/// Smallest K with `Σ_{k>K} x^k/k! < tol`, using the geometric bound
/// `x^{K+1}/(K+1)! · 1/(1 − x/(K+2))`.
pub fn series_order(x: f64, tol: f64, k_max: usize) -> Result<usize> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid(format!(
            "series argument must be finite and non-negative, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0);
    }
    // term = x^{K+1}/(K+1)!
    let mut term = x;
    let mut bound = f64::INFINITY;
    for k in 0..=k_max {
        if !term.is_finite() {
            return Err(Error::NumericRange(format!(
                "series terms overflow for argument {x:e}"
            )));
        }
        let ratio = x / (k as f64 + 2.0);
        if ratio < 1.0 {
            bound = term / (1.0 - ratio);
            if bound < tol {
                return Ok(k);
            }
        }
        term *= x / (k as f64 + 2.0);
    }
    Err(Error::Truncation {
        tol,
        k_max,
        achieved: bound,
    })
}

/// Series evaluation over a prebuilt table. `k_order` is the truncation index
/// and must be covered by the table together with the piece index.
fn series_with_table(table: &QTable, tau: f64, t: f64, k_order: usize) -> Matrix {
    let dim = table.dim();
    let n = piece_index(t, tau);
    let mut sum = Matrix::zeros(dim);
    for l in 0..=n.min(k_order) {
        let s = t - l as f64 * tau;
        // coeff = s^k / k!, starting from k = l
        let mut coeff = 1.0;
        for j in 1..=l {
            coeff *= s / j as f64;
        }
        for k in l..=k_order {
            if k > l {
                coeff *= s / k as f64;
            }
            if let Some(q) = table.get(k, l) {
                sum.axpy(coeff, q);
            }
        }
    }
    sum
}

/// Truncation order for the piece containing `t`. The tail bound is taken at
/// the right end of the piece so the order is constant across it.
fn piece_order(
    a0: &Matrix,
    a1: &Matrix,
    tau: f64,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<usize> {
    let n = piece_index(t, tau);
    let t_hi = (n as f64 + 1.0) * tau;
    let c = opnorm(a0) + opnorm(a1);
    series_order(c * t_hi.max(t), policy.tol, policy.k_max)
}

/// `Σ_{l=0}^{n} Σ_{k=l}^{K} Q_{k+1}(lτ)(t − lτ)^k / k!` on `nτ < t ≤ (n+1)τ`,
/// with K chosen from the tail bound `Σ_{k>K} ((‖A0‖+‖A1‖) t)^k / k! < tol`.
pub fn eval_nonpermutable(
    a0: &Matrix,
    a1: &Matrix,
    tau: f64,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<Matrix> {
    check_tau(tau)?;
    check_time(t)?;
    check_pair(a0, a1)?;
    policy.validate()?;
    if let Some(v) = initial_value(a0.dim(), t) {
        return Ok(v);
    }
    let k_order = piece_order(a0, a1, tau, t, policy)?;
    let n = piece_index(t, tau);
    let table = QTable::build(a0, a1, k_order, n.min(k_order))?;
    Ok(series_with_table(&table, tau, t, k_order))
}

struct DysonContext<'a> {
    a0: &'a Matrix,
    a1: &'a Matrix,
    tau: f64,
    rule: GaussLegendre,
}

impl DysonContext<'_> {
    /// `S_n(t, nτ)` for `t ≥ nτ`, Θ before.
    fn term(&self, n: usize, t: f64) -> Result<Matrix> {
        if n == 0 {
            return if t < 0.0 {
                Ok(Matrix::zeros(self.a0.dim()))
            } else {
                expm(self.a0, t)
            };
        }
        let start = n as f64 * self.tau;
        if t <= start {
            return Ok(Matrix::zeros(self.a0.dim()));
        }
        let segments = breakpoints(start, t, 0.0, self.tau);
        let mut err = None;
        let acc = composite(
            &self.rule,
            &segments,
            1,
            Matrix::zeros(self.a0.dim()),
            |s, w, acc| {
                if err.is_some() {
                    return;
                }
                match (expm(self.a0, t - s), self.term(n - 1, s - self.tau)) {
                    (Ok(e), Ok(inner)) => acc.axpy(w, &(&(&e * self.a1) * &inner)),
                    (Err(e), _) | (_, Err(e)) => err = Some(e),
                }
            },
        );
        match err {
            Some(e) => Err(e),
            None => Ok(acc),
        }
    }
}

/// `Σ_{n=0}^{N} S_n(t, nτ)·𝟙_{t ≥ nτ}` with
/// `S_0(t, 0) = exp(A0 t)` and
/// `S_n(t, nτ) = ∫_{nτ}^{t} exp(A0 (t − s)) A1 S_{n−1}(s − τ, (n−1)τ) ds`.
///
/// Each convolution is a composite Gauss–Legendre rule with `quad_points`
/// nodes on every subinterval between consecutive multiples of τ.
pub fn dyson_phillips_partial(
    a0: &Matrix,
    a1: &Matrix,
    tau: f64,
    t: f64,
    n_terms: usize,
    quad_points: usize,
) -> Result<Matrix> {
    check_tau(tau)?;
    check_time(t)?;
    check_pair(a0, a1)?;
    if quad_points < 1 {
        return Err(invalid("quad_points must be positive"));
    }
    if let Some(v) = initial_value(a0.dim(), t) {
        return Ok(v);
    }
    let ctx = DysonContext {
        a0,
        a1,
        tau,
        rule: GaussLegendre::new(quad_points),
    };
    let mut sum = Matrix::zeros(a0.dim());
    for n in 0..=n_terms {
        if t < n as f64 * tau {
            break;
        }
        sum += &ctx.term(n, t)?;
    }
    Ok(sum)
}

/// `‖A1 R(λ0; A0)‖·e^{−λ0 τ}`, the contraction ratio of the Neumann series.
pub fn neumann_ratio(a0: &Matrix, a1: &Matrix, tau: f64, lambda0: f64) -> Result<f64> {
    check_tau(tau)?;
    check_pair(a0, a1)?;
    let r = resolvent(a0, lambda0)?;
    Ok(opnorm(&(a1 * &r)) * (-lambda0 * tau).exp())
}

fn resolvent(a0: &Matrix, lambda0: f64) -> Result<Matrix> {
    if !lambda0.is_finite() {
        return Err(invalid(format!("lambda0 must be finite, got {lambda0}")));
    }
    let shifted = &Matrix::identity(a0.dim()).scale(lambda0) - a0;
    shifted
        .inverse()
        .map_err(|_| invalid(format!("λ0·I − A0 is singular at λ0 = {lambda0}")))
}

/// Residual `‖(λ0 I − A0 − A1 e^{−λ0 τ})·Σ_{n=0}^{N} R (A1 R)^n e^{−nλ0τ} − I‖`
/// of the truncated Neumann series for the delayed resolvent, where
/// `R = (λ0 I − A0)^{-1}`.
///
/// Requires the contraction `‖A1 R‖ e^{−λ0 τ} < 1`.
pub fn resolvent_series_check(
    a0: &Matrix,
    a1: &Matrix,
    tau: f64,
    lambda0: f64,
    n_terms: usize,
) -> Result<f64> {
    check_tau(tau)?;
    check_pair(a0, a1)?;
    let dim = a0.dim();
    let r = resolvent(a0, lambda0)?;
    let damp = (-lambda0 * tau).exp();
    let step = &(a1 * &r).scale(damp);
    let ratio = opnorm(step);
    if ratio >= 1.0 {
        return Err(Error::Precondition(format!(
            "Neumann series does not contract: ‖A1 R(λ0;A0)‖e^(−λ0τ) = {ratio} ≥ 1"
        )));
    }
    // Σ R (A1 R e^{−λ0τ})^n
    let mut power = Matrix::identity(dim);
    let mut series = Matrix::zeros(dim);
    for n in 0..=n_terms {
        if n > 0 {
            power = &power * step;
        }
        series += &(&r * &power);
    }
    let operator = &(&Matrix::identity(dim).scale(lambda0) - a0) - &a1.scale(damp);
    Ok(opnorm(&(&(&operator * &series) - &Matrix::identity(dim))))
}

/// A fundamental solution bound to its coefficients, delay and route.
///
/// The non-permutable route caches its coefficient table, growing it on
/// demand; the value is safe to share between threads.
pub struct FundamentalSolution {
    a0: Matrix,
    a1: Matrix,
    tau: f64,
    method: Method,
    policy: TruncationPolicy,
    table: Mutex<Option<Arc<QTable>>>,
}

impl std::fmt::Debug for FundamentalSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FundamentalSolution")
            .field("a0", &self.a0)
            .field("a1", &self.a1)
            .field("tau", &self.tau)
            .field("method", &self.method)
            .field("policy", &self.policy)
            .finish()
    }
}

impl FundamentalSolution {
    pub fn new(
        a0: Matrix,
        a1: Matrix,
        tau: f64,
        method: Method,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        check_tau(tau)?;
        check_pair(&a0, &a1)?;
        policy.validate()?;
        match method {
            Method::PureDelayed if !a0.is_zero() => {
                return Err(Error::Precondition(
                    "the pure delayed route requires A0 = Θ".into(),
                ))
            }
            Method::Permutable => require_commuting(&a0, &a1)?,
            _ => {}
        }
        Ok(FundamentalSolution {
            a0,
            a1,
            tau,
            method,
            policy,
            table: Mutex::new(None),
        })
    }

    /// General-purpose constructor using the non-permutable series.
    pub fn nonpermutable(
        a0: Matrix,
        a1: Matrix,
        tau: f64,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        Self::new(a0, a1, tau, Method::NonPermutable, policy)
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    pub fn a1(&self) -> &Matrix {
        &self.a1
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    fn table(&self, k: usize, l: usize) -> Result<Arc<QTable>> {
        let mut guard = self.table.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(t) = guard.as_ref() {
            if t.k_max() >= k && t.l_max() >= l {
                return Ok(Arc::clone(t));
            }
        }
        let (k_new, l_new) = match guard.as_ref() {
            Some(t) => (k.max(t.k_max()), l.max(t.l_max())),
            None => (k, l),
        };
        let table = Arc::new(QTable::build(&self.a0, &self.a1, k_new, l_new)?);
        *guard = Some(Arc::clone(&table));
        Ok(table)
    }

    /// `S(t; τ)`.
    pub fn eval(&self, t: f64) -> Result<Matrix> {
        check_time(t)?;
        if let Some(v) = initial_value(self.dim(), t) {
            return Ok(v);
        }
        match self.method {
            Method::PureDelayed => eval_pure_delayed(&self.a1, self.tau, t),
            Method::Permutable => permutable_unchecked(&self.a0, &self.a1, self.tau, t),
            Method::NonPermutable => {
                let k_order = piece_order(&self.a0, &self.a1, self.tau, t, &self.policy)?;
                let n = piece_index(t, self.tau);
                let table = self.table(k_order, n.min(k_order))?;
                Ok(series_with_table(&table, self.tau, t, k_order))
            }
            Method::DysonPhillips => {
                let n = (t / self.tau).ceil() as usize;
                dyson_phillips_partial(&self.a0, &self.a1, self.tau, t, n, self.policy.quad_points)
            }
        }
    }
}

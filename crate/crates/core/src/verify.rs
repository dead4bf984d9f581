//! Deterministic invariant suite.
//!
//! Every check draws its problems from a fixed seed and reports the measured
//! quantity next to its threshold. Reductions run sequentially in a fixed
//! order, so repeated runs produce bit-identical measurements.

use std::f64::consts::{E, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fundsol::{
    dyson_phillips_partial, eval_nonpermutable, eval_permutable, neumann_ratio,
    resolvent_series_check, TruncationPolicy,
};
use crate::heatdelay::{solve_fd_oracle, solve_spectral, HeatProblem, SpectralConfig};
use crate::ivpsolver::{
    solve_homogeneous, solve_homogeneous_c1, solve_method_of_steps, solve_nonhomogeneous,
    DelaySystem, FormulaOptions,
};
use crate::matcore::{opnorm, Matrix, Vector};
use crate::qkernel::{entry_commuting, QTable};
use crate::sampling;

/// How a measurement is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// Pass when `measured ≤ threshold`.
    AtMost,
    /// Pass when `measured > threshold`.
    Above,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::AtMost => "<=",
            Comparison::Above => ">",
        }
    }
}

/// One invariant measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, threshold: f64) -> Self {
        Check {
            name,
            measured,
            threshold,
            comparison: Comparison::AtMost,
        }
    }

    fn above(name: &'static str, measured: f64, threshold: f64) -> Self {
        Check {
            name,
            measured,
            threshold,
            comparison: Comparison::Above,
        }
    }

    pub fn passed(&self) -> bool {
        match self.comparison {
            Comparison::AtMost => self.measured <= self.threshold,
            Comparison::Above => self.measured > self.threshold,
        }
    }
}

const SEED: u64 = 0x5eed_0001;

fn seeded(offset: u64) -> ChaCha8Rng {
    sampling::rng(SEED + offset)
}

fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
        .collect()
}

fn near_multiple(t: f64, tau: f64, radius: f64) -> bool {
    let k = (t / tau).round();
    (t - k * tau).abs() <= radius
}

/// Central-difference residual of `S' = A0 S + A1 S(t−τ)` and of
/// `S' = S A0 + S(t−τ) A1` for 20 random pairs at 50 times in `(0, 3τ]`
/// away from the multiples of τ. Returns the left and right residuals.
pub fn defining_ode_residual() -> Result<(Check, Check)> {
    let mut rng = seeded(1);
    let policy = TruncationPolicy::default();
    let tau = 1.0;
    let h = 2e-5;
    let (mut left, mut right): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let d = sampling::dim(&mut rng, 4);
        let a0 = sampling::uniform_matrix(&mut rng, d);
        let a1 = sampling::uniform_matrix(&mut rng, d);
        let mut taken = 0;
        while taken < 50 {
            let t: f64 = rng.random_range(0.0..=3.0 * tau);
            if t <= 0.0 || near_multiple(t, tau, 1e-4) {
                continue;
            }
            taken += 1;
            let s = |x: f64| eval_nonpermutable(&a0, &a1, tau, x, &policy);
            let fd = (&s(t + h)? - &s(t - h)?).scale(0.5 / h);
            let (now, lag) = (s(t)?, s(t - tau)?);
            left = left.max(fd.max_abs_diff(&(&(&a0 * &now) + &(&a1 * &lag))));
            right = right.max(fd.max_abs_diff(&(&(&now * &a0) + &(&lag * &a1))));
        }
    }
    Ok((
        Check::at_most("defining_ode_residual_left", left, 1e-5),
        Check::at_most("defining_ode_residual_right", right, 1e-5),
    ))
}

/// Pairwise agreement of the permutable, non-permutable (tol 1e-10) and
/// Dyson–Phillips (N = 3, 16 points) evaluators on 20 commuting pairs.
pub fn cross_formula_equivalence() -> Result<Check> {
    let mut rng = seeded(2);
    let tau = 1.0;
    let policy = TruncationPolicy::with_tol(1e-10)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = sampling::dim(&mut rng, 4);
        let (a0, a1) = sampling::commuting_pair(&mut rng, d);
        for t in grid(0.0, 3.0 * tau, 31) {
            let p = eval_permutable(&a0, &a1, tau, t)?;
            let n = eval_nonpermutable(&a0, &a1, tau, t, &policy)?;
            let q = dyson_phillips_partial(&a0, &a1, tau, t, 3, 16)?;
            worst = worst
                .max(p.max_abs_diff(&n))
                .max(p.max_abs_diff(&q))
                .max(n.max_abs_diff(&q));
        }
    }
    Ok(Check::at_most("cross_formula_equivalence", worst, 1e-7))
}

/// Formula solvers against the RK4 oracle (`h = τ/200`) for 20 random
/// systems, every other one with sinusoidal forcing.
pub fn ivp_oracle_agreement() -> Result<Check> {
    let mut rng = seeded(3);
    let tau = 1.0;
    let ts = grid(0.0, 3.0 * tau, 61);
    let opts = FormulaOptions::default();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let sys = sampling::system(&mut rng, 4, tau, i % 2 == 1)?;
        let formula = if sys.has_forcing() {
            solve_nonhomogeneous(&sys, &ts, &opts)?
        } else {
            solve_homogeneous(&sys, &ts, &opts)?
        };
        let oracle = solve_method_of_steps(&sys, 3.0 * tau, tau / 200.0)?;
        worst = worst.max(formula.max_diff(&oracle)?);
    }
    Ok(Check::at_most("ivp_oracle_agreement", worst, 1e-5))
}

/// `u' = u(t−1)`, `u ≡ 1` on `[−1, 0]`: `u(2) = 1 + 2 + 1/2` through both
/// the formula and the oracle.
pub fn pure_delay_hand_value() -> Result<Check> {
    let sys = DelaySystem::with_constant_history(
        Matrix::scalar(0.0),
        Matrix::scalar(1.0),
        1.0,
        Vector::from_slice(&[1.0])?,
    )?;
    let hand = 1.0 + 2.0 + 0.5;
    let formula = solve_homogeneous(&sys, &[2.0], &FormulaOptions::default())?;
    let oracle = solve_method_of_steps(&sys, 2.0, 1.0 / 200.0)?;
    let err = (formula.values()[0].get(0) - hand)
        .abs()
        .max((oracle.value_at(2.0)?.get(0) - hand).abs());
    Ok(Check::at_most("pure_delay_hand_value", err, 1e-6))
}

/// `A0 = I`, `A1 = −I`, τ = 1: the semigroup gap `‖S(0.6)² − S(1.2)‖` and
/// the closed form `S(1.2) = e^{0.2}(e + 1 − 1.2)·I`.
pub fn counterexample() -> Result<(Check, Check)> {
    let i2 = Matrix::identity(2);
    let (a0, a1) = (i2.clone(), i2.scale(-1.0));
    let policy = TruncationPolicy::with_tol(1e-12)?;
    let s = |t: f64| eval_nonpermutable(&a0, &a1, 1.0, t, &policy);
    let half = s(0.6)?;
    let full = s(1.2)?;
    let gap = opnorm(&(&(&half * &half) - &full));
    let closed = i2.scale(0.2f64.exp() * (E + 1.0 - 1.2));
    let permutable = eval_permutable(&a0, &a1, 1.0, 1.2)?;
    let err = full
        .max_abs_diff(&closed)
        .max(permutable.max_abs_diff(&closed));
    Ok((
        Check::above("counterexample_semigroup_gap", gap, 0.01),
        Check::at_most("counterexample_closed_form", err, 1e-10),
    ))
}

/// `Q_{k+1}(0) = A0^k`, `Q_{k+1}(lτ) = Σ_{m=l}^{k} A0^{k−m} A1 Q_m((l−1)τ)`.
fn definitional_table(a0: &Matrix, a1: &Matrix, k_max: usize) -> Vec<Vec<Matrix>> {
    let dim = a0.dim();
    let mut q = vec![vec![Matrix::zeros(dim); k_max + 1]; k_max + 1];
    for (k, row) in q.iter_mut().enumerate() {
        row[0] = a0.pow(k as u32);
    }
    for l in 1..=k_max {
        for k in l..=k_max {
            let mut acc = Matrix::zeros(dim);
            for m in l..=k {
                acc += &(&(&a0.pow((k - m) as u32) * a1) * &q[m - 1][l - 1]);
            }
            q[k][l] = acc;
        }
    }
    q
}

/// Coefficient table identities for `K ≤ 8`: recursion against the
/// definitional sum, commuting closed form, row sums, and exact zeros above
/// the diagonal.
pub fn qtable_identities() -> Result<[Check; 4]> {
    let mut rng = seeded(6);
    let k_max = 8;
    let (mut decomposition, mut collapse, mut rows, mut upper): (f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0);
    for _ in 0..20 {
        let d = sampling::dim(&mut rng, 4);
        let a0 = sampling::uniform_matrix(&mut rng, d);
        let a1 = sampling::uniform_matrix(&mut rng, d);
        let table = QTable::build(&a0, &a1, k_max, k_max)?;
        let def = definitional_table(&a0, &a1, k_max);
        let sum = &a0 + &a1;
        for (k, def_row) in def.iter().enumerate() {
            let mut row = Matrix::zeros(d);
            for (l, expected) in def_row.iter().enumerate() {
                let e = table.entry(k, l);
                decomposition = decomposition.max(e.max_abs_diff(expected));
                if l > k {
                    upper = upper.max(e.max_abs());
                    if table.get(k, l).is_some() {
                        upper = f64::INFINITY;
                    }
                } else {
                    row += &e;
                }
            }
            rows = rows.max(row.max_abs_diff(&sum.pow(k as u32)));
        }

        let (c0, c1) = sampling::commuting_pair(&mut rng, d);
        let table = QTable::build(&c0, &c1, k_max, k_max)?;
        for k in 0..=k_max {
            for l in 0..=k {
                collapse = collapse.max(
                    table
                        .entry(k, l)
                        .max_abs_diff(&entry_commuting(&c0, &c1, k, l)?),
                );
            }
        }
    }
    Ok([
        Check::at_most("qtable_recursion_vs_definition", decomposition, 1e-12),
        Check::at_most("qtable_commuting_collapse", collapse, 1e-12),
        Check::at_most("qtable_row_sums", rows, 1e-10),
        Check::at_most("qtable_upper_triangle", upper, 0.0),
    ])
}

/// Neumann series residual at `N = 40` for `λ0 = 2(‖A0‖+‖A1‖)+1`, and the
/// geometric envelope `residual(N) ≤ q^{N+1}` with `q = ‖A1 R‖e^{−λ0τ}`,
/// checked while the envelope is above `1e-12`. Reports the worst residual
/// and the worst envelope ratio.
pub fn resolvent_neumann() -> Result<(Check, Check)> {
    let mut rng = seeded(7);
    let tau = 1.0;
    let (mut residual, mut envelope): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let a0 = sampling::uniform_matrix(&mut rng, 3);
        let a1 = sampling::uniform_matrix(&mut rng, 3);
        let lambda0 = 2.0 * (opnorm(&a0) + opnorm(&a1)) + 1.0;
        residual = residual.max(resolvent_series_check(&a0, &a1, tau, lambda0, 40)?);
        let q = neumann_ratio(&a0, &a1, tau, lambda0)?;
        for n in 0..=40 {
            let bound = q.powi(n as i32 + 1);
            if bound < 1e-12 {
                break;
            }
            envelope = envelope.max(resolvent_series_check(&a0, &a1, tau, lambda0, n)? / bound);
        }
    }
    Ok((
        Check::at_most("resolvent_neumann_residual", residual, 1e-10),
        Check::at_most("resolvent_geometric_envelope", envelope, 1.0 + 1e-6),
    ))
}

/// `‖S(t) − I‖ ≤ exp((‖A0‖+‖A1‖)t) − 1` on 100 random (pair, t) samples.
/// The measurement is the largest excess over the bound, which may be at most
/// the series truncation tolerance.
pub fn continuity_bound() -> Result<Check> {
    let mut rng = seeded(8);
    let policy = TruncationPolicy::default();
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..100 {
        let d = sampling::dim(&mut rng, 4);
        let a0 = sampling::uniform_matrix(&mut rng, d);
        let a1 = sampling::uniform_matrix(&mut rng, d);
        let t: f64 = rng.random_range(0.0..=3.0);
        let s = eval_nonpermutable(&a0, &a1, 1.0, t, &policy)?;
        let lhs = opnorm(&(&s - &Matrix::identity(d)));
        let rhs = ((opnorm(&a0) + opnorm(&a1)) * t).exp_m1();
        excess = excess.max(lhs - rhs);
    }
    Ok(Check::at_most(
        "continuity_bound_excess",
        excess,
        policy.tol,
    ))
}

/// Spectral (64 modes) against finite differences (200 interior nodes,
/// `h = τ/400`) on `[0, π] × [0, 2τ]`, and the undelayed single-mode case
/// against `e^{−t} sin x`.
pub fn heat_cross_validation() -> Result<(Check, Check)> {
    let tau = 1.0;
    let p = HeatProblem::new(1.0, 0.5, tau, move |x, t| x * (PI - x) * (1.0 + t / tau))?
        .with_forcing(|x, t| x.sin() * t.cos());
    let fd = solve_fd_oracle(&p, 200, tau / 400.0, 2.0 * tau)?;
    let ts = grid(0.0, 2.0 * tau, 21);
    let cfg = SpectralConfig::default();
    let spectral = solve_spectral(&p, &cfg, fd.xs(), &ts)?;
    let cross = spectral.max_diff(&fd)?;

    let p0 = HeatProblem::new(1.0, 0.0, tau, |x, _| x.sin())?;
    let xs = grid(0.0, PI, 33);
    let exact_run = solve_spectral(&p0, &cfg, &xs, &ts)?;
    let mut exact: f64 = 0.0;
    for (it, t) in ts.iter().enumerate() {
        for (ix, x) in xs.iter().enumerate() {
            exact = exact.max((exact_run.value(it, ix) - (-t).exp() * x.sin()).abs());
        }
    }
    Ok((
        Check::at_most("heat_spectral_vs_fd", cross, 5e-4),
        Check::at_most("heat_undelayed_exact", exact, 1e-6),
    ))
}

/// The two homogeneous formulas on 10 random systems with differentiable
/// history.
pub fn formula_c1_equivalence() -> Result<Check> {
    let mut rng = seeded(10);
    let ts = grid(0.0, 3.0, 31);
    let opts = FormulaOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let sys = sampling::system(&mut rng, 4, 1.0, false)?;
        let a = solve_homogeneous(&sys, &ts, &opts)?;
        let b = solve_homogeneous_c1(&sys, &ts, &opts)?;
        worst = worst.max(a.max_diff(&b)?);
    }
    Ok(Check::at_most("formula_c1_equivalence", worst, 1e-7))
}

/// Every check, in a fixed order.
pub fn run_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let (l, r) = defining_ode_residual()?;
    out.extend([l, r]);
    out.push(cross_formula_equivalence()?);
    out.push(ivp_oracle_agreement()?);
    out.push(pure_delay_hand_value()?);
    let (gap, closed) = counterexample()?;
    out.extend([gap, closed]);
    out.extend(qtable_identities()?);
    let (res, env) = resolvent_neumann()?;
    out.extend([res, env]);
    out.push(continuity_bound()?);
    let (cross, exact) = heat_cross_validation()?;
    out.extend([cross, exact]);
    out.push(formula_c1_equivalence()?);
    Ok(out)
}

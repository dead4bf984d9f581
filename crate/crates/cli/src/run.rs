//! Dispatch from a validated config to the solvers.

use std::f64::consts::PI;

use delaykit::heatdelay::{solve_fd_oracle, solve_spectral, solve_spectral_c1, HeatGrid};
use delaykit::ivpsolver::{
    solve_homogeneous, solve_homogeneous_c1, solve_method_of_steps, solve_nonhomogeneous,
};
use delaykit::{opnorm, verify, FormulaOptions, FundamentalSolution, Matrix, SolutionGrid};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{
    linspace, FundsolConfig, HeatConfig, HeatMethod, IvpConfig, IvpMethod, ProblemConfig,
};
use crate::error::CliError;
use crate::table::{Cell, ResultTable};

/// A finished run. `failures` counts failed checks of a verification run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub failures: usize,
}

pub fn run(cfg: &ProblemConfig) -> Result<RunOutput, CliError> {
    let started = std::time::Instant::now();
    let (mut table, failures) = match cfg {
        ProblemConfig::Fundsol(c) => (fundsol(c)?, 0),
        ProblemConfig::Ivp(c) => (ivp(c)?, 0),
        ProblemConfig::Heat(c) => (heat(c)?, 0),
        ProblemConfig::Verify => verification()?,
    };
    table.set_meta("kind", cfg.kind().name());
    table.set_meta("wall_time_s", started.elapsed().as_secs_f64());
    Ok(RunOutput { table, failures })
}

fn opt<T: Into<Value>>(v: Option<T>) -> Value {
    v.map_or(Value::Null, Into::into)
}

/// `‖S(t/2)² − S(t)‖`, zero exactly when the semigroup law holds at `t`.
fn semigroup_gap(s: &FundamentalSolution, t: f64, full: &Matrix) -> delaykit::Result<f64> {
    let half = s.eval(0.5 * t)?;
    Ok(opnorm(&(&(&half * &half) - full)))
}

fn fundsol(c: &FundsolConfig) -> Result<ResultTable, CliError> {
    let s = FundamentalSolution::new(c.a0.clone(), c.a1.clone(), c.tau, c.method, c.policy)?;
    let d = s.dim();
    let mut columns = vec!["t".to_string()];
    for i in 0..d {
        for j in 0..d {
            columns.push(format!("S_{i}_{j}"));
        }
    }
    columns.push("semigroup_gap".into());
    let mut table = ResultTable::new(columns);
    let rows: Vec<Vec<f64>> = c
        .grid
        .times()
        .par_iter()
        .map(|&t| {
            let m = s.eval(t)?;
            let mut row = Vec::with_capacity(d * d + 2);
            row.push(t);
            row.extend(m.row_major());
            row.push(semigroup_gap(&s, t, &m)?);
            Ok(row)
        })
        .collect::<delaykit::Result<_>>()?;
    for r in &rows {
        table.push_numbers(r)?;
    }
    table.set_meta("method", c.method.name());
    table.set_meta("tau", c.tau);
    table.set_meta("dim", d);
    table.set_meta("tol", c.policy.tol);
    table.set_meta("k_max", c.policy.k_max);
    table.set_meta("quad_points", c.policy.quad_points);
    Ok(table)
}

fn solution_table(sol: &SolutionGrid, times: &[f64], dim: usize) -> Result<ResultTable, CliError> {
    let columns = std::iter::once("t".to_string()).chain((0..dim).map(|i| format!("u_{i}")));
    let mut table = ResultTable::new(columns);
    for &t in times {
        let u = sol.value_at(t)?;
        let mut row = vec![t];
        row.extend_from_slice(u.as_slice());
        table.push_numbers(&row)?;
    }
    let meta = sol.meta();
    table.set_meta("method", sol.method().name());
    table.set_meta("truncation_tol", opt(meta.truncation_tol));
    table.set_meta("quad_tol", opt(meta.quad_tol));
    table.set_meta("quad_points", opt(meta.quad_points));
    table.set_meta("quad_error", opt(meta.quad_error));
    table.set_meta("step", opt(meta.step));
    Ok(table)
}

fn ivp(c: &IvpConfig) -> Result<ResultTable, CliError> {
    let sys = c.system()?;
    let times = c.grid.times();
    let opts = FormulaOptions::with_tol(c.tol)?;
    let sol = match c.method {
        IvpMethod::Formula if sys.has_forcing() => solve_nonhomogeneous(&sys, &times, &opts)?,
        IvpMethod::Formula => solve_homogeneous(&sys, &times, &opts)?,
        IvpMethod::FormulaC1 => solve_homogeneous_c1(&sys, &times, &opts)?,
        IvpMethod::Steps => solve_method_of_steps(&sys, c.grid.t_end, c.step)?,
    };
    let mut table = solution_table(&sol, &times, sys.dim())?;
    table.set_meta("tau", c.tau);
    Ok(table)
}

fn heat_table(grid: &HeatGrid, times: &[f64]) -> Result<ResultTable, CliError> {
    let mut table = ResultTable::new(["t", "x", "u"]);
    for &t in times {
        let it = grid
            .time_index(t)
            .ok_or_else(|| CliError::Numeric(format!("no solution row at t = {t}")))?;
        for (ix, &x) in grid.xs().iter().enumerate() {
            table.push_numbers(&[t, x, grid.value(it, ix)])?;
        }
    }
    let meta = grid.meta();
    table.set_meta("method", grid.method().name());
    table.set_meta("n_modes", opt(meta.n_modes));
    table.set_meta("coefficient_tail", opt(meta.coefficient_tail));
    table.set_meta("time_tol", opt(meta.time_tol));
    table.set_meta("quad_error", opt(meta.quad_error));
    table.set_meta("step", opt(meta.step));
    table.set_meta("substeps", opt(meta.substeps));
    table.set_meta("m_interior", opt(meta.m_interior));
    Ok(table)
}

fn heat(c: &HeatConfig) -> Result<ResultTable, CliError> {
    let p = c.problem()?;
    let times = c.grid.times();
    let xs = linspace(0.0, PI, c.x_points);
    let grid = match c.method {
        HeatMethod::Spectral => solve_spectral(&p, &c.spectral, &xs, &times)?,
        HeatMethod::SpectralC1 => solve_spectral_c1(&p, &c.spectral, &xs, &times)?,
        HeatMethod::Fd => solve_fd_oracle(&p, c.x_points - 2, c.step, c.grid.t_end)?,
    };
    let mut table = heat_table(&grid, &times)?;
    table.set_meta("a", c.a);
    table.set_meta("b", c.b);
    table.set_meta("tau", c.tau);
    Ok(table)
}

fn verification() -> Result<(ResultTable, usize), CliError> {
    let checks = verify::run_suite()?;
    let mut table = ResultTable::new(["check", "comparison", "measured", "threshold", "passed"]);
    let mut failures = 0;
    for c in &checks {
        let passed = c.passed();
        failures += usize::from(!passed);
        table.push(vec![
            Cell::Text(c.name.to_string()),
            Cell::Text(c.comparison.symbol().to_string()),
            Cell::Num(c.measured),
            Cell::Num(c.threshold),
            Cell::Num(if passed { 1.0 } else { 0.0 }),
        ])?;
    }
    table.set_meta("checks", checks.len());
    table.set_meta("failed", failures);
    Ok((table, failures))
}

//! Classical RK4 method of steps for delay systems with a single lag.
//!
//! The step `h` must divide τ, so the lag of every step endpoint is a stored
//! node. Lag values at the RK4 midpoint stages come from cubic Hermite
//! interpolation of the stored nodes (value and derivative at both ends), or
//! from the history callable while the lagged time is still negative.
//!
//! Only the last τ of the trajectory is retained; callers observe every node
//! through a callback.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};

/// Resolves `h` against τ, returning the number of steps per delay interval.
pub fn steps_per_delay(tau: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step h must be positive, got {h}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("delay tau must be positive, got {tau}")));
    }
    let ratio = tau / h;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(invalid(format!(
            "step h = {h} does not divide tau = {tau} (tau/h = {ratio})"
        )));
    }
    Ok(m as usize)
}

/// Number of steps needed to reach `t_end`.
pub fn step_count(t_end: f64, h: f64) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid(format!(
            "t_end must be finite and non-negative, got {t_end}"
        )));
    }
    Ok((t_end / h - 1e-9).ceil().max(0.0) as usize)
}

/// Right-hand side `out = f(t, u, u(t − τ))`.
pub trait DelayRhs {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, u: &[f64], lag: &[f64], out: &mut [f64]);
    /// Writes the prescribed history at `t ≤ 0`.
    fn history(&self, t: f64, out: &mut [f64]);
}

/// Integration parameters.
#[derive(Debug, Clone, Copy)]
pub struct StepsConfig {
    pub tau: f64,
    /// Requested step; must divide τ.
    pub h: f64,
    pub t_end: f64,
    /// Abort with [`Error::Diverged`] once any component exceeds this magnitude.
    pub divergence_limit: f64,
}

struct Node {
    u: Vec<f64>,
    f: Vec<f64>,
}

fn hermite_mid(a: &Node, b: &Node, h: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = 0.5 * (a.u[i] + b.u[i]) + h * (a.f[i] - b.f[i]) / 8.0;
    }
}

/// Integrates from `t = 0` to `t_end`, calling `on_node(t, u, u')` at every
/// node `t_j = j·h` (including `t = 0`).
pub fn integrate<R, F>(rhs: &R, cfg: &StepsConfig, mut on_node: F) -> Result<()>
where
    R: DelayRhs + ?Sized,
    F: FnMut(f64, &[f64], &[f64]),
{
    let m = steps_per_delay(cfg.tau, cfg.h)?;
    let h = cfg.tau / m as f64;
    let n_steps = step_count(cfg.t_end, h)?;
    let dim = rhs.dim();

    let mut lag = vec![0.0; dim];
    let mut lag_mid = vec![0.0; dim];
    let mut lag_next = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let (mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);

    // nodes j-m ..= j once the buffer is full
    let mut buffer: VecDeque<Node> = VecDeque::with_capacity(m + 2);

    let mut u0 = vec![0.0; dim];
    rhs.history(0.0, &mut u0);
    rhs.history(-cfg.tau, &mut lag);
    let mut f0 = vec![0.0; dim];
    rhs.eval(0.0, &u0, &lag, &mut f0);
    on_node(0.0, &u0, &f0);
    buffer.push_back(Node { u: u0, f: f0 });

    for j in 0..n_steps {
        let t = j as f64 * h;
        let lag_index = j as isize - m as isize;
        if lag_index < 0 {
            let t_lag = lag_index as f64 * h;
            rhs.history(t_lag, &mut lag);
            rhs.history(t_lag + 0.5 * h, &mut lag_mid);
            rhs.history(t_lag + h, &mut lag_next);
        } else {
            let a = &buffer[0];
            let b = &buffer[1];
            lag.copy_from_slice(&a.u);
            hermite_mid(a, b, h, &mut lag_mid);
            lag_next.copy_from_slice(&b.u);
        }

        let cur = buffer.back().expect("buffer holds the current node");
        let u = &cur.u;
        let k1 = &cur.f;

        for i in 0..dim {
            tmp[i] = u[i] + 0.5 * h * k1[i];
        }
        rhs.eval(t + 0.5 * h, &tmp, &lag_mid, &mut k2);
        for i in 0..dim {
            tmp[i] = u[i] + 0.5 * h * k2[i];
        }
        rhs.eval(t + 0.5 * h, &tmp, &lag_mid, &mut k3);
        for i in 0..dim {
            tmp[i] = u[i] + h * k3[i];
        }
        rhs.eval(t + h, &tmp, &lag_next, &mut k4);

        let mut next = vec![0.0; dim];
        let mut magnitude: f64 = 0.0;
        for i in 0..dim {
            next[i] = u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            magnitude = magnitude.max(next[i].abs());
        }
        let t_next = (j + 1) as f64 * h;
        if magnitude.is_nan() || magnitude > cfg.divergence_limit {
            return Err(Error::Diverged {
                t: t_next,
                magnitude,
            });
        }
        let mut f_next = vec![0.0; dim];
        rhs.eval(t_next, &next, &lag_next, &mut f_next);
        on_node(t_next, &next, &f_next);

        buffer.push_back(Node { u: next, f: f_next });
        if buffer.len() > m + 1 {
            buffer.pop_front();
        }
    }
    Ok(())
}

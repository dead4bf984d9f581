//! Gauss–Legendre rules and composite integration over piecewise smooth
//! integrands with known breakpoints.

use std::f64::consts::PI;

/// An n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are found by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = if n == 0 {
        0.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p, dp)
}

/// Splits `[a, b]` at every point of the form `offset + k·period` that lies
/// strictly inside, returning the ordered segment endpoints.
pub fn breakpoints(a: f64, b: f64, offset: f64, period: f64) -> Vec<f64> {
    let mut pts = vec![a];
    if b > a && period > 0.0 {
        let first = ((a - offset) / period).floor() as i64 + 1;
        let mut k = first;
        loop {
            let p = offset + k as f64 * period;
            if p >= b {
                break;
            }
            // drop slivers produced by rounding next to an endpoint
            let last = *pts.last().unwrap();
            if p > last + 1e-13 * period.max(1.0) && p < b - 1e-13 * period.max(1.0) {
                pts.push(p);
            }
            k += 1;
        }
    }
    pts.push(b);
    pts
}

/// Composite rule: `panels` equal panels of the given rule on each segment.
pub fn composite<T, F>(
    rule: &GaussLegendre,
    segments: &[f64],
    panels: usize,
    zero: T,
    mut f: F,
) -> T
where
    F: FnMut(f64, f64, &mut T),
{
    let mut acc = zero;
    for seg in segments.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * width;
            let hi = if p + 1 == panels { b } else { lo + width };
            for (x, w) in rule.mapped(lo, hi) {
                f(x, w, &mut acc);
            }
        }
    }
    acc
}

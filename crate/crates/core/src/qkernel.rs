//! The coefficient family `Q_{k+1}(lτ)` of the delayed perturbation of the
//! matrix exponential.
//!
//! For `k ≥ 0` and `0 ≤ l ≤ k` the entries satisfy the Pascal-type recursion
//!
//! ```text
//! Q_1(0)        = I
//! Q_{k+1}(lτ)   = A0·Q_k(lτ) + A1·Q_k((l−1)τ)      (k ≥ 1)
//! ```
//!
//! with `Q_k(lτ) = Θ` whenever `l > k − 1` or `l < 0`. The entries do not
//! depend on τ; the delay only labels the column.

use crate::error::{Error, Result};
use crate::matcore::{commutator, opnorm, Matrix};

/// Lower-triangular table of `Q_{k+1}(lτ)` for `k ≤ k_max`, `l ≤ min(k, l_max)`.
#[derive(Debug, Clone)]
pub struct QTable {
    a0: Matrix,
    a1: Matrix,
    k_max: usize,
    l_max: usize,
    // rows[k][l] = Q_{k+1}(lτ) for l ≤ min(k, l_max)
    rows: Vec<Vec<Matrix>>,
}

impl QTable {
    /// Fills the table with the O(K·L) recursion.
    pub fn build(a0: &Matrix, a1: &Matrix, k_max: usize, l_max: usize) -> Result<Self> {
        if a0.dim() != a1.dim() {
            return Err(Error::DimensionMismatch {
                what: "A1 relative to A0".into(),
                expected: a0.dim(),
                got: a1.dim(),
            });
        }
        let dim = a0.dim();
        let mut rows: Vec<Vec<Matrix>> = Vec::with_capacity(k_max + 1);
        rows.push(vec![Matrix::identity(dim)]);
        for k in 1..=k_max {
            let prev = &rows[k - 1];
            let width = k.min(l_max) + 1;
            let row = (0..width)
                .map(|l| {
                    let mut q = match prev.get(l) {
                        Some(p) => a0 * p,
                        None => Matrix::zeros(dim),
                    };
                    if l >= 1 {
                        if let Some(p) = prev.get(l - 1) {
                            q += &(a1 * p);
                        }
                    }
                    q
                })
                .collect();
            rows.push(row);
        }
        Ok(QTable {
            a0: a0.clone(),
            a1: a1.clone(),
            k_max,
            l_max,
            rows,
        })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn l_max(&self) -> usize {
        self.l_max
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

    /// Whether `(k, l)` is inside the stored index set.
    pub fn covers(&self, k: usize, l: usize) -> bool {
        k <= self.k_max && l <= self.l_max
    }

    /// Borrowed `Q_{k+1}(lτ)`, or `None` when the entry is structurally zero
    /// (`l > k`) or outside the stored range.
    pub fn get(&self, k: usize, l: usize) -> Option<&Matrix> {
        self.rows.get(k).and_then(|row| row.get(l))
    }

    /// `Q_{k+1}(lτ)`; `Θ` above the diagonal.
    ///
    /// # Panics
    /// If `(k, l)` lies below the diagonal but outside the stored range.
    pub fn entry(&self, k: usize, l: usize) -> Matrix {
        if l > k {
            return Matrix::zeros(self.dim());
        }
        assert!(
            self.covers(k, l),
            "Q entry (k={k}, l={l}) outside table range (K={}, L={})",
            self.k_max,
            self.l_max
        );
        self.rows[k][l].clone()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `binom(k, l)·A0^{k−l}·A1^l`, the closed form of `Q_{k+1}(lτ)` for
/// commuting coefficients. Returns `Θ` for `l > k`.
///
/// The caller is responsible for checking `[A0, A1] = Θ`.
pub fn entry_commuting(a0: &Matrix, a1: &Matrix, k: usize, l: usize) -> Result<Matrix> {
    if a0.dim() != a1.dim() {
        return Err(Error::DimensionMismatch {
            what: "A1 relative to A0".into(),
            expected: a0.dim(),
            got: a1.dim(),
        });
    }
    if l > k {
        return Ok(Matrix::zeros(a0.dim()));
    }
    Ok((&a0.pow((k - l) as u32) * &a1.pow(l as u32)).scale(binomial(k, l)))
}

/// Whether `‖[A0, A1]‖ ≤ tol`.
pub fn commute_within(a0: &Matrix, a1: &Matrix, tol: f64) -> Result<bool> {
    Ok(opnorm(&commutator(a0, a1)?) <= tol)
}

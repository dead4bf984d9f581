//! Dense real square matrices, vectors and the classical matrix exponential.
//!
//! Every problem handled by this crate is small (a handful of states, or one
//! heat mode at a time), so storage is a plain dense column-major
//! [`nalgebra::DMatrix`]. The public constructors reject non-finite entries.
//!
//! The operator norm used throughout the crate is the induced 2-norm
//! (largest singular value), see [`opnorm`]. Every norm inequality checked by
//! the test suites uses this same norm.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// A dense real square matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

/// A dense real vector with finite entries.
#[derive(Clone, PartialEq)]
pub struct Vector(DVector<f64>);

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &str) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains a non-finite entry")))
    }
}

impl Matrix {
    /// Builds a matrix from rows. All rows must have the same length as the
    /// number of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(invalid("matrix must have at least one row"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: format!("length of row {i} in a square matrix"),
                    expected: n,
                    got: row.len(),
                });
            }
            check_finite(row, "matrix")?;
        }
        Ok(Matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    /// Builds a `dim × dim` matrix from entries in row-major order.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                what: "number of matrix entries".into(),
                expected: dim * dim,
                got: entries.len(),
            });
        }
        check_finite(entries, "matrix")?;
        Ok(Matrix(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(invalid("matrix dimension must be positive"));
        }
        check_finite(diag, "diagonal")?;
        Ok(Matrix(DMatrix::from_diagonal(&DVector::from_column_slice(
            diag,
        ))))
    }

    /// Wraps an nalgebra matrix after checking shape and finiteness.
    pub fn try_from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(invalid(format!(
                "matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(m.iter(), "matrix")?;
        Ok(Matrix(m))
    }

    pub fn identity(dim: usize) -> Self {
        Matrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Matrix(DMatrix::zeros(dim, dim))
    }

    /// A 1×1 matrix.
    pub fn scalar(value: f64) -> Self {
        Matrix(DMatrix::from_element(1, 1, value))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<f64> {
        self.to_rows().into_iter().flatten().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix(&self.0 * c)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix(self.0.transpose())
    }

    /// `self += alpha * x`, in place.
    pub fn axpy(&mut self, alpha: f64, x: &Matrix) {
        assert_eq!(self.dim(), x.dim(), "dimension mismatch in axpy");
        for (y, &v) in self.0.iter_mut().zip(x.0.iter()) {
            *y += alpha * v;
        }
    }

    /// Integer power by repeated squaring; `pow(0)` is the identity.
    pub fn pow(&self, k: u32) -> Matrix {
        let mut result = Matrix::identity(self.dim());
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        Vector(&self.0 * &v.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(
            self.dim(),
            other.dim(),
            "dimension mismatch in max_abs_diff"
        );
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side of a linear solve".into(),
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        let lu = self.0.clone().lu();
        let x = lu
            .solve(&rhs.0)
            .ok_or_else(|| invalid("matrix is singular"))?;
        Matrix::try_from_dmatrix(x).map_err(|_| invalid("matrix is numerically singular"))
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.dim()))
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{:?}", self.to_rows())
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! matrix_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Matrix> for &Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                Matrix(&self.0 $op &rhs.0)
            }
        }
        impl $trait<Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: Matrix) -> Matrix {
                Matrix(self.0 $op rhs.0)
            }
        }
        impl $trait<&Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                Matrix(self.0 $op &rhs.0)
            }
        }
    };
}

matrix_binop!(Add, add, +);
matrix_binop!(Sub, sub, -);
matrix_binop!(Mul, mul, *);

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix(-&self.0)
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix(-self.0)
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        self.0 += &rhs.0;
    }
}

impl Mul<&Vector> for &Matrix {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        self.mul_vec(rhs)
    }
}

impl Vector {
    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("vector dimension must be positive"));
        }
        check_finite(entries, "vector")?;
        Ok(Vector(DVector::from_column_slice(entries)))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub(crate) fn from_dvector(v: DVector<f64>) -> Self {
        Vector(v)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * x`, in place.
    pub fn axpy(&mut self, alpha: f64, x: &Vector) {
        self.0.axpy(alpha, &x.0, 1.0);
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector(&self.0 * c)
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn max_abs_diff(&self, other: &Vector) -> f64 {
        assert_eq!(
            self.dim(),
            other.dim(),
            "dimension mismatch in max_abs_diff"
        );
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs()))
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vector{:?}", self.as_slice())
    }
}

impl Add<&Vector> for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        Vector(&self.0 + &rhs.0)
    }
}

impl Sub<&Vector> for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        Vector(&self.0 - &rhs.0)
    }
}

impl AddAssign<&Vector> for Vector {
    fn add_assign(&mut self, rhs: &Vector) {
        self.0 += &rhs.0;
    }
}

/// `AB − BA`.
pub fn commutator(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "commutator operands".into(),
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(&(a * b) - &(b * a))
}

/// Induced 2-norm (largest singular value).
pub fn opnorm(a: &Matrix) -> f64 {
    if a.dim() == 1 {
        return a.get(0, 0).abs();
    }
    a.0.singular_values().max()
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Scaling-and-squaring thresholds for the [m/m] Padé approximants,
// theta_m such that the backward error stays below the unit roundoff.
const PADE_ORDERS: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
];
const THETA_13: f64 = 5.371_920_351_148_152;

/// Coefficients of the [m/m] Padé approximant numerator of exp,
/// `b_j = (2m − j)! m! / ((2m)! j! (m − j)!)`, scaled so that `b_m = 1`.
fn pade_coefficients(m: usize) -> Vec<f64> {
    let mut b = vec![0.0; m + 1];
    b[m] = 1.0;
    // b_{j-1} / b_j = j (2m - j + 1) / (m - j + 1)
    for j in (1..=m).rev() {
        b[j - 1] = b[j] * (j as f64) * ((2 * m - j + 1) as f64) / ((m - j + 1) as f64);
    }
    b
}

fn pade_low(a: &DMatrix<f64>, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let b = pade_coefficients(m);
    let a2 = a * a;
    let mut u = DMatrix::<f64>::identity(n, n) * b[1];
    let mut v = DMatrix::<f64>::identity(n, n) * b[0];
    let mut power = DMatrix::<f64>::identity(n, n);
    for k in 1..=m / 2 {
        power = &power * &a2;
        u += &power * b[2 * k + 1];
        v += &power * b[2 * k];
    }
    (a * u, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let b = pade_coefficients(13);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let w2 = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = a * (&a6 * w1 + w2);
    let z1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let z2 = &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let v = &a6 * z1 + z2;
    (u, v)
}

/// `exp(A·t)` by scaling and squaring around a diagonal Padé approximant of
/// order 3 to 13, selected from the 1-norm of `A·t`.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    if !t.is_finite() {
        return Err(invalid(format!(
            "expm time argument must be finite, got {t}"
        )));
    }
    let n = a.dim();
    if t == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let at = &a.0 * t;
    if n == 1 {
        let v = at[(0, 0)].exp();
        if !v.is_finite() {
            return Err(Error::NumericRange(format!(
                "exp({}) overflows",
                at[(0, 0)]
            )));
        }
        return Ok(Matrix::scalar(v));
    }

    let norm = norm1(&at);
    let (u, v, squarings) = match PADE_ORDERS.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(m, _)) => {
            let (u, v) = pade_low(&at, m);
            (u, v, 0)
        }
        None => {
            let s = if norm > THETA_13 {
                (norm / THETA_13).log2().ceil().max(0.0) as i32
            } else {
                0
            };
            let scaled = &at * 2f64.powi(-s);
            let (u, v) = pade13(&scaled);
            (u, v, s)
        }
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::NumericRange("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::NumericRange(format!(
            "exp(A·t) overflows for ‖A·t‖₁ = {norm:e}"
        )));
    }
    Ok(Matrix(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Independent Taylor route: scale until the norm is below 1/64, sum 30
    /// terms, then square back.
    fn expm_taylor(a: &Matrix, t: f64) -> Matrix {
        let at = a.scale(t);
        let norm = at.frobenius_norm();
        let s = if norm > 1.0 / 64.0 {
            (norm * 64.0).log2().ceil() as i32
        } else {
            0
        };
        let b = at.scale(2f64.powi(-s));
        let mut term = Matrix::identity(a.dim());
        let mut sum = Matrix::identity(a.dim());
        for k in 1..30 {
            term = (&term * &b).scale(1.0 / k as f64);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn rel_err(x: &Matrix, reference: &Matrix) -> f64 {
        opnorm(&(x - reference)) / opnorm(reference)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&Matrix::zeros(2), 3.7).unwrap();
        assert_eq!(e, Matrix::identity(2));
    }

    #[test]
    fn expm_of_nilpotent_terminates() {
        let n = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        for &t in &[0.3, 1.0, 7.5, -2.0] {
            let e = expm(&n, t).unwrap();
            assert_abs_diff_eq!(e.get(0, 0), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(e.get(0, 1), t, epsilon = 1e-14 * t.abs().max(1.0));
            assert_abs_diff_eq!(e.get(1, 0), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(e.get(1, 1), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn expm_of_identity_is_scalar_exponential() {
        for &t in &[0.2, 1.0, 2.0] {
            let e = expm(&Matrix::identity(2), t).unwrap();
            let expected = Matrix::from_diagonal(&[t.exp(), t.exp()]).unwrap();
            assert!(rel_err(&e, &expected) <= 1e-14);
        }
    }

    #[test]
    fn expm_at_zero_time_is_exact_identity() {
        let a = m(&[&[1.3, -2.0], &[0.4, 5.0]]);
        assert_eq!(expm(&a, 0.0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn expm_rejects_non_finite_time() {
        let a = Matrix::identity(2);
        assert!(matches!(expm(&a, f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            expm(&a, f64::INFINITY),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn constructors_reject_non_finite_entries() {
        assert!(Matrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        assert!(Matrix::from_row_slice(1, &[f64::INFINITY]).is_err());
        assert!(Vector::from_slice(&[1.0, f64::NEG_INFINITY]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn expm_of_rotation_generator() {
        for &w in &[0.1, 3.0, 25.0, 50.0] {
            let a = m(&[&[0.0, w], &[-w, 0.0]]);
            let e = expm(&a, 1.0).unwrap();
            let expected = m(&[&[w.cos(), w.sin()], &[-w.sin(), w.cos()]]);
            assert!(rel_err(&e, &expected) <= 1e-12, "w = {w}");
        }
    }

    #[test]
    fn expm_of_symmetric_matches_eigendecomposition() {
        // ‖A t‖ up to 50 in the 2-norm.
        let base = m(&[&[2.0, -1.0, 0.5], &[-1.0, 1.0, 0.3], &[0.5, 0.3, -3.0]]);
        let scale = 50.0 / opnorm(&base);
        for &t in &[0.01, 0.5, 1.0, scale, -scale] {
            let e = expm(&base, t).unwrap();
            let eig = SymmetricEigen::new(base.as_dmatrix().clone() * t);
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
            let expected =
                Matrix::try_from_dmatrix(&eig.eigenvectors * d * eig.eigenvectors.transpose())
                    .unwrap();
            assert!(
                rel_err(&e, &expected) <= 1e-12,
                "t = {t}: {}",
                rel_err(&e, &expected)
            );
        }
    }

    #[test]
    fn expm_matches_taylor_route_on_general_matrices() {
        let a = m(&[&[0.3, -1.2, 0.7], &[0.9, -0.4, 0.2], &[-0.5, 0.8, 0.1]]);
        for &t in &[0.001, 0.1, 1.0, 3.0] {
            let e = expm(&a, t).unwrap();
            assert!(rel_err(&e, &expm_taylor(&a, t)) <= 1e-12);
        }
    }

    #[test]
    fn commutator_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!(commutator(&a, &a).unwrap().is_zero());
        let i = Matrix::identity(2);
        assert!(commutator(&i, &(-&i)).unwrap().is_zero());
        let e12 = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e21 = m(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(
            commutator(&e12, &e21).unwrap(),
            m(&[&[1.0, 0.0], &[0.0, -1.0]])
        );
        assert!(matches!(
            commutator(&i, &Matrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn opnorm_examples() {
        assert_abs_diff_eq!(opnorm(&Matrix::identity(3)), 1.0, epsilon = 1e-15);
        assert_eq!(opnorm(&Matrix::zeros(2)), 0.0);
        assert_abs_diff_eq!(
            opnorm(&Matrix::from_diagonal(&[2.0, -5.0]).unwrap()),
            5.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn pow_and_solve() {
        let a = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert_eq!(a.pow(5), m(&[&[1.0, 5.0], &[0.0, 1.0]]));
        assert_eq!(a.pow(0), Matrix::identity(2));
        let inv = a.inverse().unwrap();
        assert!((&a * &inv).max_abs_diff(&Matrix::identity(2)) < 1e-15);
        assert!(Matrix::zeros(2).inverse().is_err());
    }

    fn small_matrix(dim: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |v| {
            let a = Matrix::from_row_slice(dim, &v).unwrap();
            let n = opnorm(&a);
            // ‖A‖ ≤ 2
            if n > 2.0 {
                a.scale(2.0 / n)
            } else {
                a
            }
        })
    }

    proptest! {
        #[test]
        fn expm_semigroup_property(
            a in (1usize..=4).prop_flat_map(small_matrix),
            t in 0.0f64..2.0,
            s in 0.0f64..2.0,
        ) {
            let lhs = &expm(&a, t).unwrap() * &expm(&a, s).unwrap();
            let rhs = expm(&a, t + s).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * rhs.max_abs().max(1.0));
        }

        #[test]
        fn expm_derivative_matches_generator(
            a in (1usize..=4).prop_flat_map(small_matrix),
            t in 0.0f64..2.0,
        ) {
            let h = 1e-5;
            let fd = (expm(&a, t + h).unwrap() - expm(&a, t - h).unwrap()).scale(0.5 / h);
            let exact = &a * &expm(&a, t).unwrap();
            prop_assert!(fd.max_abs_diff(&exact) <= 1e-6);
        }
    }
}

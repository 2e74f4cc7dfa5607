//! Dense real square matrices and the matrix functions the rest of the
//! crate is built on.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tol;

/// Dense `n × n` real matrix with `n >= 2` and finite entries.
///
/// Serialized as a JSON array of rows.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<f64>);

impl SquareMatrix {
    /// Validates shape and finiteness.
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if inner.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "matrix dimension {} is below 2",
                inner.nrows()
            )));
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(SquareMatrix(inner))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub(crate) fn wrap(inner: DMatrix<f64>) -> Self {
        debug_assert_eq!(inner.nrows(), inner.ncols());
        SquareMatrix(inner)
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::wrap(DMatrix::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Self {
        Self::wrap(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self::wrap(DMatrix::identity(n, n))
    }

    /// Matrix unit `E_pq` (zero-based indices).
    pub fn unit(n: usize, p: usize, q: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(p, q)] = 1.0;
        Self::wrap(m)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::wrap(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.0[(i, j)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::wrap(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::wrap(&self.0 * s)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        self.0
            .column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn determinant(&self) -> f64 {
        self.0.clone().lu().determinant()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)].abs() <= tol))
    }

    /// Zero on and below the diagonal.
    pub fn is_strictly_upper(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..=i).all(|j| self.0[(i, j)].abs() <= tol))
    }

    pub fn is_strictly_lower(&self, tol: f64) -> bool {
        self.transpose().is_strictly_upper(tol)
    }

    pub fn is_upper(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..i).all(|j| self.0[(i, j)].abs() <= tol))
    }

    /// Entries above the diagonal, everything else zero.
    pub fn strict_upper_part(&self) -> Self {
        Self::from_fn(self.n(), |i, j| if j > i { self.0[(i, j)] } else { 0.0 })
    }

    pub fn strict_lower_part(&self) -> Self {
        Self::from_fn(self.n(), |i, j| if j < i { self.0[(i, j)] } else { 0.0 })
    }

    pub fn diagonal_part(&self) -> Self {
        Self::from_fn(self.n(), |i, j| if i == j { self.0[(i, j)] } else { 0.0 })
    }

    /// `‖self - other‖_∞` as a max-abs entry difference.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }

    pub(crate) fn check_same_dim(&self, other: &SquareMatrix) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                self.n(),
                other.n()
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SquareMatrix{:?}", self.to_rows())
    }
}

impl fmt::Display for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for SquareMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SquareMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&SquareMatrix> for &SquareMatrix {
            type Output = SquareMatrix;
            fn $method(self, rhs: &SquareMatrix) -> SquareMatrix {
                SquareMatrix::wrap(&self.0 $op &rhs.0)
            }
        }
        impl $trait<SquareMatrix> for SquareMatrix {
            type Output = SquareMatrix;
            fn $method(self, rhs: SquareMatrix) -> SquareMatrix {
                SquareMatrix::wrap(self.0 $op rhs.0)
            }
        }
        impl $trait<&SquareMatrix> for SquareMatrix {
            type Output = SquareMatrix;
            fn $method(self, rhs: &SquareMatrix) -> SquareMatrix {
                SquareMatrix::wrap(self.0 $op &rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Mul<f64> for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: f64) -> SquareMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: f64) -> SquareMatrix {
        SquareMatrix::wrap(self.0 * rhs)
    }
}

impl Neg for &SquareMatrix {
    type Output = SquareMatrix;
    fn neg(self) -> SquareMatrix {
        SquareMatrix::wrap(-&self.0)
    }
}

impl Neg for SquareMatrix {
    type Output = SquareMatrix;
    fn neg(self) -> SquareMatrix {
        SquareMatrix::wrap(-self.0)
    }
}

impl AddAssign<&SquareMatrix> for SquareMatrix {
    fn add_assign(&mut self, rhs: &SquareMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&SquareMatrix> for SquareMatrix {
    fn sub_assign(&mut self, rhs: &SquareMatrix) {
        self.0 -= &rhs.0;
    }
}

// Taylor degree after scaling to ‖X‖₁ ≤ 1/2: 0.5^19 / 19! ≈ 2e-23.
const EXP_TAYLOR_DEGREE: usize = 18;
const EXP_SCALED_NORM: f64 = 0.5;

/// Matrix exponential.
///
/// Nilpotent and diagonal input have exact shortcuts. Other input goes
/// through scaling and squaring over a truncated Taylor series.
pub fn mat_exp(x: &SquareMatrix) -> Result<SquareMatrix> {
    if !x.is_finite() {
        return Err(Error::InvalidInput("exp of a non-finite matrix".into()));
    }
    let n = x.n();
    if x.is_strictly_upper(0.0) || x.is_strictly_lower(0.0) {
        return Ok(nilpotent_series(x, |k| 1.0 / factorial(k)));
    }
    if x.is_diagonal(0.0) {
        return Ok(SquareMatrix::diagonal(
            &x.diag().iter().map(|v| v.exp()).collect::<Vec<_>>(),
        ));
    }

    let norm = x.norm_one();
    let squarings = if norm > EXP_SCALED_NORM {
        (norm / EXP_SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = x.scale(0.5f64.powi(squarings));

    // Horner: I + Y(I + Y/2(I + Y/3(...)))
    let eye = SquareMatrix::identity(n);
    let mut acc = eye.clone();
    for k in (1..=EXP_TAYLOR_DEGREE).rev() {
        acc = &eye + &(&scaled * &acc).scale(1.0 / k as f64);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    if !acc.is_finite() {
        return Err(Error::InvalidInput("exp overflowed".into()));
    }
    Ok(acc)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `Σ_{k=0}^{n-1} coeff(k) X^k` for nilpotent `X`.
fn nilpotent_series(x: &SquareMatrix, coeff: impl Fn(usize) -> f64) -> SquareMatrix {
    let n = x.n();
    let mut power = SquareMatrix::identity(n);
    let mut acc = power.scale(coeff(0));
    for k in 1..n {
        power = &power * x;
        acc += &power.scale(coeff(k));
    }
    acc
}

/// Logarithm of a unipotent upper triangular matrix: the finite series
/// `Σ_{k=1}^{n-1} (-1)^{k+1} (U - I)^k / k`.
pub fn log_unipotent(u: &SquareMatrix) -> Result<SquareMatrix> {
    let nil = u - &SquareMatrix::identity(u.n());
    if !nil.is_strictly_upper(tol::STRUCTURAL) {
        return Err(Error::Domain(
            "U - I is not strictly upper triangular".into(),
        ));
    }
    let nil = nil.strict_upper_part();
    Ok(nilpotent_series(&nil, |k| match k {
        0 => 0.0,
        k if k % 2 == 1 => 1.0 / k as f64,
        k => -1.0 / k as f64,
    }))
}

/// Inverse of a unit upper triangular matrix via `Σ (-(U - I))^k`.
pub(crate) fn inverse_unipotent(u: &SquareMatrix) -> SquareMatrix {
    let nil = (u - &SquareMatrix::identity(u.n())).strict_upper_part();
    nilpotent_series(&nil, |k| if k % 2 == 0 { 1.0 } else { -1.0 })
}

/// `g = Q·R` with orthonormal `Q` and upper triangular `R` with positive
/// diagonal.
///
/// Classical Gram–Schmidt with one full re-orthogonalization pass per column.
pub fn orthonormalize_columns(g: &SquareMatrix) -> Result<(SquareMatrix, SquareMatrix)> {
    let n = g.n();
    let a = g.as_matrix();
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut r = DMatrix::<f64>::zeros(n, n);
    let scale = g.max_abs().max(f64::MIN_POSITIVE);

    for j in 0..n {
        let mut v = a.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let c = q.column(i).dot(&v);
                v.axpy(-c, &q.column(i), 1.0);
                r[(i, j)] += c;
            }
        }
        let norm = v.norm();
        if norm <= f64::EPSILON * scale * n as f64 {
            return Err(Error::Singular(format!("column {j} is linearly dependent")));
        }
        r[(j, j)] = norm;
        q.set_column(j, &(v / norm));
    }

    let det: f64 = (0..n).map(|i| r[(i, i)]).product();
    if det <= tol::SINGULAR_DET {
        return Err(Error::Singular(format!("|det g| = {det:e}")));
    }
    Ok((SquareMatrix::wrap(q), SquareMatrix::wrap(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SquareMatrix::from_rows(&[vec![1.0]]).is_err());
        assert!(SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(SquareMatrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&SquareMatrix::zeros(3)).unwrap();
        assert_eq!(e, SquareMatrix::identity(3));
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat_exp(&SquareMatrix::diagonal(&[1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(e.get(0, 0), std::f64::consts::E, epsilon = 1e-15);
        assert_abs_diff_eq!(e.get(1, 1), 1.0 / std::f64::consts::E, epsilon = 1e-15);
        assert_eq!(e.get(0, 1), 0.0);
    }

    #[test]
    fn exp_of_unit_truncates() {
        let e12 = SquareMatrix::unit(2, 0, 1);
        let e = mat_exp(&e12).unwrap();
        assert_eq!(e, &SquareMatrix::identity(2) + &e12);
    }

    #[test]
    fn exp_matches_sl2_closed_form() {
        // exp X = cosh(δ) I + sinh(δ)/δ X for trace-free 2x2 X, δ² = a² + bc.
        for &(a, b, c) in &[(0.3, 1.2, -0.7), (2.0, 3.0, 1.5), (-4.0, 5.0, 2.0), (0.5, -3.0, 2.0)] {
            let x = m(&[&[a, b], &[c, -a]]);
            let d2: f64 = a * a + b * c;
            let (ch, sh) = if d2 >= 0.0 {
                let d = d2.sqrt();
                (d.cosh(), d.sinh() / d)
            } else {
                let d = (-d2).sqrt();
                (d.cos(), d.sin() / d)
            };
            let expected = &SquareMatrix::identity(2).scale(ch) + &x.scale(sh);
            let got = mat_exp(&x).unwrap();
            let rel = got.max_abs_diff(&expected) / expected.max_abs();
            assert!(rel <= 1e-12, "rel error {rel:e} for {x:?}");
        }
    }

    #[test]
    fn exp_rejects_non_finite() {
        let x = SquareMatrix::wrap(DMatrix::from_element(2, 2, f64::INFINITY));
        assert!(matches!(mat_exp(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn log_unipotent_examples() {
        let eye = SquareMatrix::identity(3);
        assert_eq!(log_unipotent(&eye).unwrap(), SquareMatrix::zeros(3));

        let e12 = SquareMatrix::unit(2, 0, 1);
        assert_eq!(log_unipotent(&(&SquareMatrix::identity(2) + &e12)).unwrap(), e12);

        // (U - I) - (U - I)²/2 with (U - I)² = E13.
        let u = m(&[&[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0], &[0.0, 0.0, 1.0]]);
        let expected = m(&[&[0.0, 1.0, 0.5], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(log_unipotent(&u).unwrap(), expected);
    }

    #[test]
    fn log_unipotent_rejects_non_unipotent() {
        let u = m(&[&[1.0, 1.0], &[0.5, 1.0]]);
        assert!(matches!(log_unipotent(&u), Err(Error::Domain(_))));
        let u = m(&[&[2.0, 1.0], &[0.0, 0.5]]);
        assert!(matches!(log_unipotent(&u), Err(Error::Domain(_))));
    }

    #[test]
    fn unipotent_inverse() {
        let u = m(&[&[1.0, 2.0, -1.0], &[0.0, 1.0, 3.0], &[0.0, 0.0, 1.0]]);
        let prod = &u * &inverse_unipotent(&u);
        assert!(prod.max_abs_diff(&SquareMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn orthonormalize_identity_and_triangular() {
        let (q, r) = orthonormalize_columns(&SquareMatrix::identity(3)).unwrap();
        assert_eq!(q, SquareMatrix::identity(3));
        assert_eq!(r, SquareMatrix::identity(3));

        let t = m(&[&[2.0, 1.0, -1.0], &[0.0, 0.5, 3.0], &[0.0, 0.0, 1.0]]);
        let (q, r) = orthonormalize_columns(&t).unwrap();
        assert!(q.max_abs_diff(&SquareMatrix::identity(3)) < 1e-15);
        assert!(r.max_abs_diff(&t) < 1e-15);
    }

    #[test]
    fn orthonormalize_hand_example() {
        let g = m(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let (q, r) = orthonormalize_columns(&g).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q_expected = m(&[&[s, -s], &[s, s]]);
        let r_expected = m(&[&[2f64.sqrt(), s], &[0.0, s]]);
        assert!(q.max_abs_diff(&q_expected) < 1e-15);
        assert!(r.max_abs_diff(&r_expected) < 1e-15);
        assert!((&q * &r).max_abs_diff(&g) < 1e-15);
        assert!((&q.transpose() * &q).max_abs_diff(&SquareMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn orthonormalize_rejects_singular() {
        let g = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(orthonormalize_columns(&g), Err(Error::Singular(_))));
        let tiny = m(&[&[1e-7, 0.0], &[0.0, 1e-7]]);
        assert!(matches!(orthonormalize_columns(&tiny), Err(Error::Singular(_))));
    }

    #[test]
    fn json_is_rows() {
        let x = m(&[&[1.0, 2.0], &[3.0, -1.0]]);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,-1.0]]");
        let back: SquareMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<SquareMatrix>("[[1.0]]").is_err());
    }
}

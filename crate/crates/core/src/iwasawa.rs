//! Iwasawa factorization `SL(n) = SO(n)·A·N⁺` and the global chart on
//! `A × N⁺` that identifies it with `SL(n)/SO(n)`.

use serde::{Deserialize, Serialize};

use crate::densecore::{orthonormalize_columns, SquareMatrix};
use crate::error::{Error, Result};
use crate::tol;

/// `g = K·A·N` with `K ∈ SO(n)`, `A` positive diagonal of determinant one
/// and `N` unit upper triangular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IwasawaFactors {
    #[serde(rename = "K")]
    pub k: SquareMatrix,
    #[serde(rename = "A")]
    pub a: SquareMatrix,
    #[serde(rename = "N")]
    pub n: SquareMatrix,
}

impl IwasawaFactors {
    pub fn product(&self) -> SquareMatrix {
        &(&self.k * &self.a) * &self.n
    }
}

/// Coordinates `(a_1, …, a_{n-1}; y_12, y_13, …, y_{n-1,n})` of a point of
/// `A × N⁺`. The last diagonal entry `1 / (a_1⋯a_{n-1})` is never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChartPoint")]
pub struct ChartPoint {
    n: usize,
    a: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Deserialize)]
struct RawChartPoint {
    n: usize,
    a: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<RawChartPoint> for ChartPoint {
    type Error = Error;
    fn try_from(raw: RawChartPoint) -> Result<Self> {
        ChartPoint::new(raw.n, raw.a, raw.y)
    }
}

pub fn upper_count(n: usize) -> usize {
    n * (n - 1) / 2
}

impl ChartPoint {
    pub fn new(n: usize, a: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("n = {n} is below 2")));
        }
        if a.len() != n - 1 || y.len() != upper_count(n) {
            return Err(Error::InvalidInput(format!(
                "chart point for n = {n} needs {} a-coordinates and {} y-coordinates, got {} and {}",
                n - 1,
                upper_count(n),
                a.len(),
                y.len()
            )));
        }
        if let Some(bad) = a.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("a-coordinate {bad} is not positive")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite y-coordinate".into()));
        }
        Ok(ChartPoint { n, a, y })
    }

    pub fn identity(n: usize) -> Self {
        ChartPoint {
            n,
            a: vec![1.0; n - 1],
            y: vec![0.0; upper_count(n)],
        }
    }

    /// Splits a flat `a ++ y` coordinate vector.
    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self> {
        if coords.len() != n - 1 + upper_count(n) {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                n - 1 + upper_count(n),
                coords.len()
            )));
        }
        let (a, y) = coords.split_at(n - 1);
        Self::new(n, a.to_vec(), y.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Flat `a ++ y`.
    pub fn coords(&self) -> Vec<f64> {
        self.a.iter().chain(&self.y).copied().collect()
    }

    /// The dependent diagonal entry `1 / (a_1⋯a_{n-1})`.
    pub fn last_diagonal(&self) -> f64 {
        1.0 / self.a.iter().product::<f64>()
    }

    /// `g = A·N`.
    pub fn to_group(&self) -> SquareMatrix {
        let (a, n) = from_chart(self);
        &a * &n
    }
}

/// Factorizes `g` with `det g = 1` as `K·A·N`.
///
/// With `g = QR` from column orthonormalization, `K = Q`, `A = diag(R)` and
/// `N = A⁻¹R`. Since `R` has positive diagonal and `det g = 1`, `det Q = +1`
/// follows and no sign correction is needed.
pub fn decompose_kan(g: &SquareMatrix) -> Result<IwasawaFactors> {
    let det = g.determinant();
    if (det - 1.0).abs() > tol::UNIT_DET {
        return Err(Error::Domain(format!("det g = {det}, expected 1")));
    }
    let (q, r) = orthonormalize_columns(g)?;
    let n = g.n();
    let diag = r.diag();
    let a = SquareMatrix::diagonal(&diag);
    let mut unipotent = SquareMatrix::from_fn(n, |i, j| if j > i { r.get(i, j) / diag[i] } else { 0.0 });
    for i in 0..n {
        unipotent.set(i, i, 1.0);
    }
    Ok(IwasawaFactors { k: q, a, n: unipotent })
}

/// Reads `(a, y)` off the `A` and `N` factors.
pub fn to_chart(factors: &IwasawaFactors) -> ChartPoint {
    let n = factors.a.n();
    let a = (0..n - 1).map(|k| factors.a.get(k, k)).collect();
    let y = (0..n)
        .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
        .map(|(p, q)| factors.n.get(p, q))
        .collect();
    ChartPoint { n, a, y }
}

/// `A = diag(a_1, …, a_{n-1}, 1/(a_1⋯a_{n-1}))`, `N = I + Σ y_pq E_pq`.
pub fn from_chart(p: &ChartPoint) -> (SquareMatrix, SquareMatrix) {
    let n = p.n;
    let mut diag = p.a.clone();
    diag.push(p.last_diagonal());
    let mut unipotent = SquareMatrix::identity(n);
    let mut idx = 0;
    for r in 0..n {
        for c in (r + 1)..n {
            unipotent.set(r, c, p.y[idx]);
            idx += 1;
        }
    }
    (SquareMatrix::diagonal(&diag), unipotent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densecore::mat_exp;

    fn m(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_factors() {
        let f = decompose_kan(&SquareMatrix::identity(3)).unwrap();
        assert_eq!(f.k, SquareMatrix::identity(3));
        assert_eq!(f.a, SquareMatrix::identity(3));
        assert_eq!(f.n, SquareMatrix::identity(3));
    }

    #[test]
    fn hand_factorization() {
        let g = m(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let f = decompose_kan(&g).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(f.k.max_abs_diff(&m(&[&[s, -s], &[s, s]])) < 1e-15);
        assert!(f.a.max_abs_diff(&SquareMatrix::diagonal(&[2f64.sqrt(), s])) < 1e-15);
        assert!(f.n.max_abs_diff(&m(&[&[1.0, 0.5], &[0.0, 1.0]])) < 1e-15);
        assert!(f.product().max_abs_diff(&g) < 1e-15);

        let p = to_chart(&f);
        assert!((p.a()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((p.y()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unipotent_input_is_its_own_n() {
        let g = mat_exp(&SquareMatrix::unit(2, 0, 1)).unwrap();
        let f = decompose_kan(&g).unwrap();
        assert_eq!(f.k, SquareMatrix::identity(2));
        assert_eq!(f.a, SquareMatrix::identity(2));
        assert_eq!(f.n, g);
    }

    #[test]
    fn decompose_rejects_wrong_determinant() {
        assert!(matches!(
            decompose_kan(&SquareMatrix::diagonal(&[2.0, 1.0])),
            Err(Error::Domain(_))
        ));
        assert!(decompose_kan(&SquareMatrix::diagonal(&[-1.0, -1.0, 1.0])).is_ok());
    }

    #[test]
    fn chart_examples() {
        let id = ChartPoint::identity(4);
        let (a, n) = from_chart(&id);
        assert_eq!(a, SquareMatrix::identity(4));
        assert_eq!(n, SquareMatrix::identity(4));

        let p = ChartPoint::new(2, vec![2.0], vec![3.0]).unwrap();
        let (a, n) = from_chart(&p);
        assert_eq!(a, SquareMatrix::diagonal(&[2.0, 0.5]));
        assert_eq!(n, m(&[&[1.0, 3.0], &[0.0, 1.0]]));
        assert_eq!(a.determinant(), 1.0);

        let p = ChartPoint::new(3, vec![1.0, 1.0], vec![0.0; 3]).unwrap();
        assert_eq!(p.to_group(), SquareMatrix::identity(3));
    }

    #[test]
    fn chart_rejects_bad_points() {
        assert!(matches!(
            ChartPoint::new(2, vec![0.0], vec![1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            ChartPoint::new(2, vec![-1.0], vec![1.0]),
            Err(Error::Domain(_))
        ));
        assert!(ChartPoint::new(3, vec![1.0], vec![0.0; 3]).is_err());
        assert!(serde_json::from_str::<ChartPoint>(r#"{"n":2,"a":[-2.0],"y":[0.0]}"#).is_err());
    }

    #[test]
    fn y_order_is_row_major() {
        let p = ChartPoint::new(3, vec![1.0, 1.0], vec![12.0, 13.0, 23.0]).unwrap();
        let (_, n) = from_chart(&p);
        assert_eq!(n.get(0, 1), 12.0);
        assert_eq!(n.get(0, 2), 13.0);
        assert_eq!(n.get(1, 2), 23.0);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"n":3,"a":[1.0,1.0],"y":[12.0,13.0,23.0]}"#);
    }
}

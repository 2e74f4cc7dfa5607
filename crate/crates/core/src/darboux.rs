//! Homogeneous Darboux derivative `μ_F` of grid-sampled maps into `A × N⁺`,
//! the co-differential `d*`, and the harmonicity residual
//! `d*μ_F − Σ_i β(μ_F(e_i), μ_F(e_i))`.
//!
//! Two conventions for `μ_F` are supported. [`Convention::Chart`] reads the
//! coordinate differential into the fixed basis `H_k, E_pq` of `a ⊕ n⁺`;
//! [`Convention::Logarithmic`] uses `g⁻¹ ∂g` with `g = A·N`. They agree to
//! first order at the identity and differ elsewhere.
//!
//! Derivatives are second-order finite differences, one-sided at the grid
//! boundary. The residual is only reported on nodes whose whole stencil is
//! centred, i.e. at distance at least two from every face.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::connections::ConnectionFn;
use crate::densecore::{inverse_unipotent, SquareMatrix};
use crate::error::{Error, Result};
use crate::iwasawa::{from_chart, upper_count, ChartPoint};
use crate::lie_algebra::{from_m_coefficients, m_basis, m_coefficients, ComplementChoice};
use crate::par::{map_indices, Exec};

/// Minimum points per axis for a residual: two boundary layers on each side
/// plus one node.
pub const MIN_RESIDUAL_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    #[serde(rename = "chart")]
    Chart,
    #[serde(rename = "log", alias = "logarithmic")]
    Logarithmic,
}

impl std::str::FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chart" => Ok(Self::Chart),
            "log" | "logarithmic" => Ok(Self::Logarithmic),
            other => Err(Error::InvalidInput(format!("unknown convention `{other}`"))),
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Chart => "chart",
            Self::Logarithmic => "log",
        })
    }
}

/// Sign of the co-differential: `Lemma` is `d*θ = −Σ ∂_i θ(e_i)`, `Example`
/// the opposite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodiffSign {
    Lemma,
    Example,
}

impl CodiffSign {
    pub fn factor(self) -> f64 {
        match self {
            Self::Lemma => -1.0,
            Self::Example => 1.0,
        }
    }
}

impl std::str::FromStr for CodiffSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemma" => Ok(Self::Lemma),
            "example" => Ok(Self::Example),
            other => Err(Error::InvalidInput(format!("unknown sign `{other}`"))),
        }
    }
}

impl std::fmt::Display for CodiffSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lemma => "lemma",
            Self::Example => "example",
        })
    }
}

/// Uniform row-major grid (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() != spacing.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} extents and {} spacings",
                dims.len(),
                spacing.len()
            )));
        }
        if let Some(d) = dims.iter().find(|d| **d < 3) {
            return Err(Error::Domain(format!("grid extent {d} is below 3")));
        }
        if let Some(h) = spacing.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::InvalidInput(format!("grid spacing {h} is not positive")));
        }
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len() - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Grid { dims, spacing, strides })
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d()];
        for (i, s) in self.strides.iter().enumerate() {
            idx[i] = flat / s;
            flat %= s;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Nodes at distance at least two from every face, row-major.
    pub fn residual_nodes(&self) -> Result<Vec<Vec<usize>>> {
        if let Some(d) = self.dims.iter().find(|d| **d < MIN_RESIDUAL_DIM) {
            return Err(Error::Domain(format!(
                "grid extent {d} leaves no node with a centred stencil (need {MIN_RESIDUAL_DIM})"
            )));
        }
        let inner: Vec<usize> = self.dims.iter().map(|d| d - 4).collect();
        let total: usize = inner.iter().product();
        Ok((0..total)
            .map(|mut flat| {
                let mut idx = vec![0; inner.len()];
                for i in (0..inner.len()).rev() {
                    idx[i] = flat % inner[i] + 2;
                    flat /= inner[i];
                }
                idx
            })
            .collect())
    }

    /// Second-order derivative along `axis` of a per-node vector field.
    fn derivative(&self, values: &[Vec<f64>], flat: usize, idx: &[usize], axis: usize) -> Vec<f64> {
        let s = self.strides[axis];
        let h = self.spacing[axis];
        let last = self.dims[axis] - 1;
        let at = |k: usize| &values[k];
        let combine = |w: [(f64, usize); 3]| -> Vec<f64> {
            (0..values[flat].len())
                .map(|c| w.iter().map(|(wt, k)| wt * at(*k)[c]).sum::<f64>() / (2.0 * h))
                .collect()
        };
        match idx[axis] {
            0 => combine([(-3.0, flat), (4.0, flat + s), (-1.0, flat + 2 * s)]),
            i if i == last => combine([(3.0, flat), (-4.0, flat - s), (1.0, flat - 2 * s)]),
            _ => combine([(1.0, flat + s), (-1.0, flat - s), (0.0, flat)]),
        }
    }
}

/// Grid-sampled map from a flat domain into the chart of `A × N⁺`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChartMap", into = "RawChartMap")]
pub struct ChartMap {
    n: usize,
    grid: Grid,
    values: Vec<ChartPoint>,
}

#[derive(Serialize, Deserialize)]
struct RawChartMap {
    n: usize,
    d: usize,
    dims: Vec<usize>,
    spacing: Vec<f64>,
    a: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl TryFrom<RawChartMap> for ChartMap {
    type Error = Error;
    fn try_from(raw: RawChartMap) -> Result<Self> {
        if raw.d != raw.dims.len() {
            return Err(Error::InvalidInput(format!(
                "d = {} but {} extents given",
                raw.d,
                raw.dims.len()
            )));
        }
        if raw.a.len() != raw.y.len() {
            return Err(Error::InvalidInput(format!(
                "{} a-vectors but {} y-vectors",
                raw.a.len(),
                raw.y.len()
            )));
        }
        let values = raw
            .a
            .into_iter()
            .zip(raw.y)
            .enumerate()
            .map(|(i, (a, y))| {
                ChartPoint::new(raw.n, a, y).map_err(|e| match e {
                    Error::Domain(m) => Error::Domain(format!("grid point {i}: {m}")),
                    Error::InvalidInput(m) => Error::InvalidInput(format!("grid point {i}: {m}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ChartMap::new(raw.n, Grid::new(raw.dims, raw.spacing)?, values)
    }
}

impl From<ChartMap> for RawChartMap {
    fn from(map: ChartMap) -> Self {
        RawChartMap {
            n: map.n,
            d: map.grid.d(),
            a: map.values.iter().map(|p| p.a().to_vec()).collect(),
            y: map.values.iter().map(|p| p.y().to_vec()).collect(),
            dims: map.grid.dims,
            spacing: map.grid.spacing,
        }
    }
}

impl ChartMap {
    pub fn new(n: usize, grid: Grid, values: Vec<ChartPoint>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        if let Some(p) = values.iter().find(|p| p.n() != n) {
            return Err(Error::InvalidInput(format!(
                "value for n = {} in a map into SL({n})",
                p.n()
            )));
        }
        Ok(ChartMap { n, grid, values })
    }

    /// Samples `f(x) = (a, y)` at `x = origin + idx·spacing`.
    pub fn sample<F>(n: usize, dims: Vec<usize>, spacing: Vec<f64>, origin: &[f64], f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> (Vec<f64>, Vec<f64>),
    {
        let grid = Grid::new(dims, spacing)?;
        if origin.len() != grid.d() {
            return Err(Error::InvalidInput("origin has the wrong dimension".into()));
        }
        let values = (0..grid.len())
            .map(|flat| {
                let idx = grid.multi_index(flat);
                let x: Vec<f64> = (0..grid.d())
                    .map(|i| origin[i] + idx[i] as f64 * grid.spacing[i])
                    .collect();
                let (a, y) = f(&x);
                ChartPoint::new(n, a, y)
            })
            .collect::<Result<Vec<_>>>()?;
        ChartMap::new(n, grid, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[ChartPoint] {
        &self.values
    }
}

/// `μ_F(e_i)` at every node and along every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFormSample {
    pub convention: Convention,
    pub n: usize,
    pub grid: Grid,
    /// `forms[node][axis]`, each in `a ⊕ n⁺`.
    pub forms: Vec<Vec<SquareMatrix>>,
}

pub fn mu_of_map(f: &ChartMap, convention: Convention) -> Result<OneFormSample> {
    mu_of_map_with(f, convention, Exec::default())
}

pub fn mu_of_map_with(f: &ChartMap, convention: Convention, exec: Exec) -> Result<OneFormSample> {
    let n = f.n;
    let grid = &f.grid;
    let coords: Vec<Vec<f64>> = f.values.iter().map(ChartPoint::coords).collect();
    let forms = map_indices(exec, grid.len(), |flat| {
        let idx = grid.multi_index(flat);
        (0..grid.d())
            .map(|axis| {
                let dc = grid.derivative(&coords, flat, &idx, axis);
                match convention {
                    Convention::Chart => from_m_coefficients(ComplementChoice::Iwasawa, n, &dc),
                    Convention::Logarithmic => log_derivative(&f.values[flat], &dc),
                }
            })
            .collect()
    });
    Ok(OneFormSample {
        convention,
        n,
        grid: grid.clone(),
        forms,
    })
}

/// `g⁻¹ ∂g = N⁻¹ (A⁻¹∂A) N + N⁻¹ ∂N` for `g = A·N`, given the coordinate
/// derivative `dc = (∂a, ∂y)`.
fn log_derivative(p: &ChartPoint, dc: &[f64]) -> SquareMatrix {
    let n = p.n();
    let (_, unipotent) = from_chart(p);
    let n_inv = inverse_unipotent(&unipotent);
    let mut log_rates: Vec<f64> = p.a().iter().zip(dc).map(|(a, da)| da / a).collect();
    log_rates.push(-log_rates.iter().sum::<f64>());
    let d = SquareMatrix::diagonal(&log_rates);
    let mut dn = SquareMatrix::zeros(n);
    let mut k = n - 1;
    for r in 0..n {
        for c in (r + 1)..n {
            dn.set(r, c, dc[k]);
            k += 1;
        }
    }
    debug_assert_eq!(k, n - 1 + upper_count(n));
    let mut mu = &(&(&n_inv * &d) * &unipotent) + &(&n_inv * &dn);
    // Products of upper triangular factors: clear rounding below the diagonal.
    for r in 1..n {
        for c in 0..r {
            mu.set(r, c, 0.0);
        }
    }
    mu
}

/// `m`-valued field on the residual nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub n: usize,
    pub grid: Grid,
    /// Multi-indices of the residual nodes, row-major.
    pub nodes: Vec<Vec<usize>>,
    pub values: Vec<SquareMatrix>,
    /// Diagonal (`a`) part of each value.
    pub a_part: Vec<SquareMatrix>,
    /// Strictly upper (`n⁺`) part of each value.
    pub n_part: Vec<SquareMatrix>,
    pub sup_norm: f64,
    pub mean_norm: f64,
}

impl ResidualField {
    fn from_values(n: usize, grid: Grid, nodes: Vec<Vec<usize>>, values: Vec<SquareMatrix>) -> Self {
        let norms: Vec<f64> = values.iter().map(SquareMatrix::norm_fro).collect();
        let sup_norm = norms.iter().copied().fold(0.0, f64::max);
        let mean_norm = if norms.is_empty() {
            0.0
        } else {
            norms.iter().sum::<f64>() / norms.len() as f64
        };
        ResidualField {
            n,
            a_part: values.iter().map(SquareMatrix::diagonal_part).collect(),
            n_part: values.iter().map(SquareMatrix::strict_upper_part).collect(),
            grid,
            nodes,
            values,
            sup_norm,
            mean_norm,
        }
    }

    /// Sup norm of the `a` part.
    pub fn a_sup_norm(&self) -> f64 {
        self.a_part.iter().map(SquareMatrix::norm_fro).fold(0.0, f64::max)
    }

    /// Sup norm of the `n⁺` part.
    pub fn n_sup_norm(&self) -> f64 {
        self.n_part.iter().map(SquareMatrix::norm_fro).fold(0.0, f64::max)
    }

    /// One row per node: indices, `a` components, `y` components, Frobenius
    /// norm.
    pub fn to_csv(&self) -> String {
        let n = self.n;
        let mut out = String::new();
        let mut header: Vec<String> = (0..self.grid.d()).map(|i| format!("i{i}")).collect();
        header.extend((1..n).map(|k| format!("a{k}")));
        for p in 1..=n {
            for q in (p + 1)..=n {
                header.push(format!("y{p}_{q}"));
            }
        }
        header.push("norm".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for (idx, v) in self.nodes.iter().zip(&self.values) {
            let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            row.extend(
                m_coefficients(ComplementChoice::Iwasawa, v)
                    .iter()
                    .map(|c| c.to_string()),
            );
            row.push(v.norm_fro().to_string());
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// `d*` of a one-form sample on the residual nodes.
pub fn codifferential(s: &OneFormSample, sign: CodiffSign) -> Result<ResidualField> {
    codifferential_with(s, sign, Exec::default())
}

pub fn codifferential_with(s: &OneFormSample, sign: CodiffSign, exec: Exec) -> Result<ResidualField> {
    let nodes = s.grid.residual_nodes()?;
    let values = map_indices(exec, nodes.len(), |k| divergence(s, &nodes[k]).scale(sign.factor()));
    Ok(ResidualField::from_values(s.n, s.grid.clone(), nodes, values))
}

/// `Σ_i ∂_i μ(e_i)` by central differences.
fn divergence(s: &OneFormSample, idx: &[usize]) -> SquareMatrix {
    let flat = s.grid.flat_index(idx);
    let mut acc = SquareMatrix::zeros(s.n);
    for axis in 0..s.grid.d() {
        let st = s.grid.strides[axis];
        let h = s.grid.spacing[axis];
        let diff = &s.forms[flat + st][axis] - &s.forms[flat - st][axis];
        acc += &diff.scale(1.0 / (2.0 * h));
    }
    acc
}

/// `d*μ_F − Σ_i β(μ_F(e_i), μ_F(e_i))` on the residual nodes.
pub fn harmonic_residual(
    f: &ChartMap,
    c: &ConnectionFn,
    convention: Convention,
    sign: CodiffSign,
) -> Result<ResidualField> {
    harmonic_residual_with(f, c, convention, sign, Exec::default())
}

pub fn harmonic_residual_with(
    f: &ChartMap,
    c: &ConnectionFn,
    convention: Convention,
    sign: CodiffSign,
    exec: Exec,
) -> Result<ResidualField> {
    if c.complement() != ComplementChoice::Iwasawa {
        return Err(Error::Domain(
            "maps into A x N+ need a connection on the iwasawa complement".into(),
        ));
    }
    if c.n() != f.n {
        return Err(Error::InvalidInput(format!(
            "connection is for n = {}, map is into SL({})",
            c.n(),
            f.n
        )));
    }
    let mu = mu_of_map_with(f, convention, exec)?;
    let codiff = codifferential_with(&mu, sign, exec)?;
    let tension = map_indices(exec, codiff.nodes.len(), |k| -> Result<SquareMatrix> {
        let flat = mu.grid.flat_index(&codiff.nodes[k]);
        let mut acc = SquareMatrix::zeros(f.n);
        for form in &mu.forms[flat] {
            acc += &c.eval_unchecked(form, form)?;
        }
        Ok(acc)
    });
    let values = codiff
        .values
        .iter()
        .zip(tension)
        .map(|(d, t)| Ok(d - &t?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualField::from_values(f.n, codiff.grid, codiff.nodes, values))
}

/// Per-basis-vector scalar fields of a residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentFields {
    /// `a1, …, a{n-1}, y1_2, …` in basis order.
    pub names: Vec<String>,
    /// `fields[k][node]` is the coefficient of basis vector `k`.
    pub fields: Vec<Vec<f64>>,
}

impl ComponentFields {
    pub fn is_zero(&self) -> bool {
        self.fields.iter().flatten().all(|v| *v == 0.0)
    }

    /// `Σ_k component_k · B_k` at node `node`.
    pub fn reassemble(&self, n: usize, node: usize) -> SquareMatrix {
        let coeffs: Vec<f64> = self.fields.iter().map(|f| f[node]).collect();
        from_m_coefficients(ComplementChoice::Iwasawa, n, &coeffs)
    }
}

pub fn residual_components(r: &ResidualField) -> ComponentFields {
    let n = r.n;
    let dim = m_basis(ComplementChoice::Iwasawa, n).len();
    let mut names: Vec<String> = (1..n).map(|k| format!("a{k}")).collect();
    for p in 1..=n {
        for q in (p + 1)..=n {
            names.push(format!("y{p}_{q}"));
        }
    }
    let mut fields = vec![Vec::with_capacity(r.values.len()); dim];
    for v in &r.values {
        for (k, c) in m_coefficients(ComplementChoice::Iwasawa, v).into_iter().enumerate() {
            fields[k].push(c);
        }
    }
    ComponentFields { names, fields }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::ConnectionKind;

    fn alpha(n: usize) -> ConnectionFn {
        ConnectionFn::with_defaults(ConnectionKind::Alpha, ComplementChoice::Iwasawa, n).unwrap()
    }

    fn curve(n_pts: usize, h: f64, t0: f64, f: impl Fn(f64) -> (Vec<f64>, Vec<f64>)) -> ChartMap {
        ChartMap::sample(2, vec![n_pts], vec![h], &[t0], |x| f(x[0])).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(Grid::new(vec![2, 5], vec![0.1, 0.1]), Err(Error::Domain(_))));
        assert!(Grid::new(vec![5], vec![0.0]).is_err());
        assert!(Grid::new(vec![5, 5], vec![0.1]).is_err());
        let g = Grid::new(vec![3, 4], vec![1.0, 1.0]).unwrap();
        assert_eq!(g.multi_index(7), vec![1, 3]);
        assert_eq!(g.flat_index(&[2, 1]), 9);
        assert!(matches!(g.residual_nodes(), Err(Error::Domain(_))));
        let g = Grid::new(vec![6, 5], vec![1.0, 1.0]).unwrap();
        assert_eq!(g.residual_nodes().unwrap(), vec![vec![2, 2], vec![3, 2]]);
    }

    #[test]
    fn constant_map_has_zero_form() {
        let f = ChartMap::sample(3, vec![4, 3], vec![0.1, 0.2], &[0.0, 0.0], |_| {
            (vec![2.0, 0.5], vec![1.0, -1.0, 3.0])
        })
        .unwrap();
        for conv in [Convention::Chart, Convention::Logarithmic] {
            let mu = mu_of_map(&f, conv).unwrap();
            assert!(mu.forms.iter().flatten().all(|m| *m == SquareMatrix::zeros(3)));
        }
    }

    #[test]
    fn linear_curve_chart_form() {
        let f = curve(7, 0.1, 0.0, |t| (vec![1.0 + t], vec![0.0]));
        let mu = mu_of_map(&f, Convention::Chart).unwrap();
        let h1 = SquareMatrix::diagonal(&[1.0, -1.0]);
        for forms in &mu.forms {
            assert!(forms[0].max_abs_diff(&h1) < 1e-13);
        }
    }

    #[test]
    fn linear_curve_log_form() {
        let h = 0.1;
        let f = curve(7, h, 0.0, |t| (vec![1.0 + t], vec![0.0]));
        let mu = mu_of_map(&f, Convention::Logarithmic).unwrap();
        for (k, forms) in mu.forms.iter().enumerate() {
            let t = k as f64 * h;
            let expected = SquareMatrix::diagonal(&[1.0, -1.0]).scale(1.0 / (1.0 + t));
            assert!(forms[0].max_abs_diff(&expected) < 1e-13);
        }
    }

    #[test]
    fn log_form_matches_hand_derivative_sl2() {
        // g = A N with a(t) = e^t, y(t) = t: μ = H + (1 + 2t) E12.
        let h = 1e-3;
        let f = curve(9, h, 0.3, |t| (vec![t.exp()], vec![t]));
        let mu = mu_of_map(&f, Convention::Logarithmic).unwrap();
        let t = 0.3 + 4.0 * h;
        let expected = &SquareMatrix::diagonal(&[1.0, -1.0]) + &SquareMatrix::unit(2, 0, 1).scale(1.0 + 2.0 * t);
        assert!(mu.forms[4][0].max_abs_diff(&expected) < 1e-6);
        assert_eq!(mu.forms[4][0].trace(), 0.0);
    }

    #[test]
    fn codifferential_of_linear_form() {
        let f = curve(9, 0.05, 0.0, |t| (vec![1.0 + t * t / 2.0], vec![0.0]));
        let mu = mu_of_map(&f, Convention::Chart).unwrap();
        let lemma = codifferential(&mu, CodiffSign::Lemma).unwrap();
        let h1 = SquareMatrix::diagonal(&[1.0, -1.0]);
        for v in &lemma.values {
            assert!(v.max_abs_diff(&h1.scale(-1.0)) < 1e-12);
        }
        let example = codifferential(&mu, CodiffSign::Example).unwrap();
        for (l, e) in lemma.values.iter().zip(&example.values) {
            assert_eq!(*l, -e);
        }
    }

    #[test]
    fn zero_sample_zero_codifferential() {
        let f = curve(6, 0.1, 0.0, |_| (vec![3.0], vec![1.0]));
        let mu = mu_of_map(&f, Convention::Chart).unwrap();
        let d = codifferential(&mu, CodiffSign::Lemma).unwrap();
        assert_eq!(d.sup_norm, 0.0);
        assert_eq!(d.values.len(), 2);
    }

    #[test]
    fn harmonic_polynomial_has_zero_codifferential() {
        let h = 0.05;
        let f = ChartMap::sample(2, vec![11, 11], vec![h, h], &[0.0, 0.0], |x| {
            (vec![2.0 + x[0] * x[0] - x[1] * x[1]], vec![0.0])
        })
        .unwrap();
        let mu = mu_of_map(&f, Convention::Chart).unwrap();
        let d = codifferential(&mu, CodiffSign::Lemma).unwrap();
        assert!(d.sup_norm < 1e-10, "{}", d.sup_norm);
    }

    #[test]
    fn residual_examples_sl2() {
        let h = 0.01;
        let dims = vec![21, 21];
        let harmonic = ChartMap::sample(2, dims.clone(), vec![h, h], &[1.0, 0.0], |x| {
            (vec![x[0] * x[0] - x[1] * x[1]], vec![x[0] * x[1]])
        })
        .unwrap();
        let r = harmonic_residual(&harmonic, &alpha(2), Convention::Chart, CodiffSign::Lemma).unwrap();
        assert!(r.sup_norm <= 1e-8, "{}", r.sup_norm);

        let square = ChartMap::sample(2, dims, vec![h, h], &[1.0, 0.0], |x| {
            (vec![x[0] * x[0]], vec![0.0])
        })
        .unwrap();
        for (sign, expected) in [(CodiffSign::Lemma, -2.0), (CodiffSign::Example, 2.0)] {
            let r = harmonic_residual(&square, &alpha(2), Convention::Chart, sign).unwrap();
            let comps = residual_components(&r);
            assert!(comps.fields[0].iter().all(|v| (v - expected).abs() < 1e-3));
            assert!(comps.fields[1].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn constant_map_residual_vanishes() {
        let f = ChartMap::sample(3, vec![5, 5], vec![0.1, 0.1], &[0.0, 0.0], |_| {
            (vec![2.0, 0.5], vec![1.0, -1.0, 3.0])
        })
        .unwrap();
        for kind in [ConnectionKind::Alpha, ConnectionKind::Riemannian, ConnectionKind::Canonical1] {
            let c = ConnectionFn::with_defaults(kind, ComplementChoice::Iwasawa, 3).unwrap();
            for conv in [Convention::Chart, Convention::Logarithmic] {
                let r = harmonic_residual(&f, &c, conv, CodiffSign::Lemma).unwrap();
                assert_eq!(r.sup_norm, 0.0);
            }
        }
    }

    #[test]
    fn residual_rejects_cartan_connection() {
        let f = curve(6, 0.1, 0.0, |_| (vec![1.0], vec![0.0]));
        let c = ConnectionFn::with_defaults(ConnectionKind::Alpha, ComplementChoice::Cartan, 2).unwrap();
        assert!(matches!(
            harmonic_residual(&f, &c, Convention::Chart, CodiffSign::Lemma),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn components_read_off_basis() {
        let grid = Grid::new(vec![5], vec![1.0]).unwrap();
        let h1 = SquareMatrix::diagonal(&[1.0, 0.0, -1.0]);
        let field = ResidualField::from_values(3, grid, vec![vec![2]], vec![h1.scale(2.0)]);
        let comps = residual_components(&field);
        assert_eq!(comps.names, vec!["a1", "a2", "y1_2", "y1_3", "y2_3"]);
        assert_eq!(comps.fields[0], vec![2.0]);
        assert!(comps.fields[1..].iter().all(|f| f == &vec![0.0]));
        assert_eq!(comps.reassemble(3, 0), field.values[0]);
        let zero = ResidualField::from_values(3, field.grid.clone(), vec![vec![2]], vec![SquareMatrix::zeros(3)]);
        assert!(residual_components(&zero).is_zero());
    }

    #[test]
    fn chart_map_json_round_trip() {
        let f = ChartMap::sample(2, vec![3, 3], vec![0.5, 0.25], &[0.0, 0.0], |x| {
            (vec![1.0 + x[0]], vec![x[1]])
        })
        .unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.starts_with(r#"{"n":2,"d":2,"dims":[3,3],"spacing":[0.5,0.25],"a":[[1.0],"#));
        let back: ChartMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);

        let bad = json.replace("[[1.0],", "[[-1.0],");
        let err = serde_json::from_str::<ChartMap>(&bad).unwrap_err();
        assert!(err.to_string().contains("grid point 0"));
    }

    #[test]
    fn csv_layout() {
        let f = ChartMap::sample(2, vec![5, 5], vec![0.1, 0.1], &[1.0, 0.0], |x| {
            (vec![x[0] * x[0]], vec![0.0])
        })
        .unwrap();
        let r = harmonic_residual(&f, &alpha(2), Convention::Chart, CodiffSign::Lemma).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("i0,i1,a1,y1_2,norm"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn residual_is_policy_independent() {
        let f = ChartMap::sample(3, vec![9, 8], vec![0.1, 0.1], &[0.0, 0.0], |x| {
            (vec![1.5 + x[0].sin(), 1.0 + x[1] * x[0]], vec![x[0], x[1] * x[1], x[0] * x[1]])
        })
        .unwrap();
        let c = alpha(3);
        let a = harmonic_residual_with(&f, &c, Convention::Logarithmic, CodiffSign::Lemma, Exec::Sequential).unwrap();
        let b = harmonic_residual_with(&f, &c, Convention::Logarithmic, CodiffSign::Lemma, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

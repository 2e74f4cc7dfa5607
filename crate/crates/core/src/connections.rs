//! Invariant connections on `SL(n)/SO(n)` described by their connection
//! functions `β: m × m → m`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::densecore::SquareMatrix;
use crate::error::{Error, Result};
use crate::lie_algebra::{
    adjoint_orthogonal, check_trace_free, from_m_coefficients, m_basis, m_coefficients,
    m_dimension, m_membership_defect, project_m_unchecked, random_in_m, ComplementChoice,
};
use crate::par::{map_indices, Exec};
use crate::sampling::{random_rotation, sample_rng};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionKind {
    /// `β(X, Y) = ½[X, Y]_m`.
    Canonical1,
    /// `β ≡ 0`.
    Canonical2,
    /// Levi-Civita connection of an inner product on `m`.
    Riemannian,
    /// `β(X, Y) = (XY + YX)/2 - tr(XY)/n · I`.
    Alpha,
}

impl std::str::FromStr for ConnectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical1" => Ok(Self::Canonical1),
            "canonical2" => Ok(Self::Canonical2),
            "riemannian" => Ok(Self::Riemannian),
            "alpha" => Ok(Self::Alpha),
            other => Err(Error::InvalidInput(format!("unknown connection `{other}`"))),
        }
    }
}

impl std::fmt::Display for ConnectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Canonical1 => "canonical1",
            Self::Canonical2 => "canonical2",
            Self::Riemannian => "riemannian",
            Self::Alpha => "alpha",
        })
    }
}

/// Inner product on `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerProduct {
    /// `⟨X, Y⟩ = tr(XᵀY)`.
    Trace,
    /// Gram matrix over the fixed basis of `m`.
    Gram(Vec<Vec<f64>>),
}

/// Coefficients of `U(B_i, B_j)` in the basis of `m`, solved from
/// `2⟨U(X,Y), Z⟩ = ⟨X, [Z,Y]_m⟩ + ⟨[Z,X]_m, Y⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannianTable {
    pub m: ComplementChoice,
    pub n: usize,
    pub gram: DMatrix<f64>,
    /// `coeffs[i][j]` holds the coefficient vector of `U(B_i, B_j)`.
    pub coeffs: Vec<Vec<DVector<f64>>>,
}

impl RiemannianTable {
    pub fn inner(&self, x: &SquareMatrix, y: &SquareMatrix) -> f64 {
        let cx = DVector::from_vec(m_coefficients(self.m, x));
        let cy = DVector::from_vec(m_coefficients(self.m, y));
        cx.dot(&(&self.gram * cy))
    }

    /// `U(X, Y)` by bilinear extension.
    pub fn apply(&self, x: &SquareMatrix, y: &SquareMatrix) -> SquareMatrix {
        let cx = m_coefficients(self.m, x);
        let cy = m_coefficients(self.m, y);
        let dim = cx.len();
        let mut acc = DVector::<f64>::zeros(dim);
        for (i, xi) in cx.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            for (j, yj) in cy.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                acc.axpy(xi * yj, &self.coeffs[i][j], 1.0);
            }
        }
        from_m_coefficients(self.m, self.n, acc.as_slice())
    }
}

fn gram_matrix(m: ComplementChoice, n: usize, inner: &InnerProduct) -> Result<DMatrix<f64>> {
    let dim = m_dimension(n);
    let gram = match inner {
        InnerProduct::Trace => {
            let basis = m_basis(m, n);
            DMatrix::from_fn(dim, dim, |a, b| {
                basis[a].as_matrix().component_mul(basis[b].as_matrix()).sum()
            })
        }
        InnerProduct::Gram(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Configuration(format!(
                    "Gram matrix must be {dim}x{dim} for n = {n}"
                )));
            }
            DMatrix::from_fn(dim, dim, |a, b| rows[a][b])
        }
    };
    if gram.iter().any(|v| !v.is_finite()) || (&gram - gram.transpose()).amax() > tol::STRUCTURAL {
        return Err(Error::Configuration("Gram matrix is not symmetric".into()));
    }
    let min_eig = gram.clone().symmetric_eigen().eigenvalues.min();
    if min_eig <= tol::GRAM_EIGEN_FLOOR {
        return Err(Error::Configuration(format!(
            "inner product is not positive definite on m (smallest eigenvalue {min_eig:e})"
        )));
    }
    Ok(gram)
}

/// Solves the defining system of `U` for every ordered pair of basis vectors.
pub fn build_riemannian_u(
    m: ComplementChoice,
    n: usize,
    inner: &InnerProduct,
) -> Result<RiemannianTable> {
    let gram = gram_matrix(m, n, inner)?;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Configuration("singular Gram matrix".into()))?;
    let basis = m_basis(m, n);
    let dim = basis.len();
    let inner_of = |x: &SquareMatrix, y: &SquareMatrix| {
        let cx = DVector::from_vec(m_coefficients(m, x));
        let cy = DVector::from_vec(m_coefficients(m, y));
        cx.dot(&(&gram * cy))
    };
    let bracket_m = |x: &SquareMatrix, y: &SquareMatrix| project_m_unchecked(&(&(x * y) - &(y * x)), m);

    let coeffs = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let rhs = DVector::from_fn(dim, |z, _| {
                        let bz = &basis[z];
                        0.5 * (inner_of(&basis[i], &bracket_m(bz, &basis[j]))
                            + inner_of(&bracket_m(bz, &basis[i]), &basis[j]))
                    });
                    chol.solve(&rhs)
                })
                .collect()
        })
        .collect();
    Ok(RiemannianTable { m, n, gram, coeffs })
}

/// Connection function descriptor.
#[derive(Debug, Clone)]
pub struct ConnectionFn {
    kind: ConnectionKind,
    m: ComplementChoice,
    n: usize,
    inner: Option<InnerProduct>,
    table: Option<Arc<RiemannianTable>>,
}

impl ConnectionFn {
    /// `inner` is required for [`ConnectionKind::Riemannian`] and ignored
    /// otherwise.
    pub fn new(
        kind: ConnectionKind,
        m: ComplementChoice,
        n: usize,
        inner: Option<InnerProduct>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("n = {n} is below 2")));
        }
        let table = match (kind, &inner) {
            (ConnectionKind::Riemannian, Some(ip)) => Some(Arc::new(build_riemannian_u(m, n, ip)?)),
            (ConnectionKind::Riemannian, None) => {
                return Err(Error::Configuration(
                    "riemannian connection needs an inner product".into(),
                ))
            }
            _ => None,
        };
        Ok(ConnectionFn { kind, m, n, inner, table })
    }

    /// Shorthand for every kind other than riemannian, which gets the trace
    /// inner product.
    pub fn with_defaults(kind: ConnectionKind, m: ComplementChoice, n: usize) -> Result<Self> {
        let inner = (kind == ConnectionKind::Riemannian).then_some(InnerProduct::Trace);
        Self::new(kind, m, n, inner)
    }

    pub fn kind(&self) -> ConnectionKind {
        self.kind
    }

    pub fn complement(&self) -> ComplementChoice {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inner(&self) -> Option<&InnerProduct> {
        self.inner.as_ref()
    }

    pub fn riemannian_table(&self) -> Option<&RiemannianTable> {
        self.table.as_deref()
    }

    /// True when `β(X, X) = 0` holds identically for this kind on every `m`
    /// and every `n`.
    pub fn is_self_null_by_construction(&self) -> bool {
        matches!(self.kind, ConnectionKind::Canonical1 | ConnectionKind::Canonical2)
    }

    fn check_member(&self, x: &SquareMatrix, what: &str) -> Result<()> {
        if x.n() != self.n {
            return Err(Error::InvalidInput(format!(
                "{what} is {}x{}, connection is for n = {}",
                x.n(),
                x.n(),
                self.n
            )));
        }
        check_trace_free(x).map_err(|e| Error::Domain(format!("{what} is not in m: {e}")))?;
        let defect = m_membership_defect(x, self.m);
        if defect > tol::MEMBERSHIP * x.norm_fro().max(1.0) {
            return Err(Error::Domain(format!(
                "{what} is not in the {} complement (defect {defect:e})",
                self.m
            )));
        }
        Ok(())
    }

    /// Raw formula, before re-projection onto `m`.
    fn formula(&self, x: &SquareMatrix, y: &SquareMatrix) -> SquareMatrix {
        let half_bracket = || project_m_unchecked(&(&(x * y) - &(y * x)), self.m).scale(0.5);
        match self.kind {
            ConnectionKind::Canonical2 => SquareMatrix::zeros(self.n),
            ConnectionKind::Canonical1 => half_bracket(),
            ConnectionKind::Riemannian => {
                let table = self.table.as_ref().expect("validated at construction");
                &half_bracket() + &table.apply(x, y)
            }
            ConnectionKind::Alpha => {
                let xy = x * y;
                let yx = y * x;
                let shift = xy.trace() / self.n as f64;
                &(&xy + &yx).scale(0.5) - &SquareMatrix::identity(self.n).scale(shift)
            }
        }
    }

    /// Evaluates β and re-projects onto `m`; errors when the raw value was
    /// not already in `m`.
    pub(crate) fn eval_unchecked(&self, x: &SquareMatrix, y: &SquareMatrix) -> Result<SquareMatrix> {
        let raw = self.formula(x, y);
        let projected = project_m_unchecked(&raw, self.m);
        let residual = (&raw - &projected).norm_fro();
        let trace = raw.trace();
        if residual > tol::MEMBERSHIP * raw.norm_fro().max(1.0)
            || !tol::is_structural_zero(trace, raw.max_abs())
        {
            return Err(Error::Domain(format!(
                "{} connection value leaves the {} complement (residual {residual:e}, trace {trace:e})",
                self.kind, self.m
            )));
        }
        Ok(projected)
    }
}

/// `β(X, Y)` for `X, Y ∈ m`.
pub fn beta_eval(c: &ConnectionFn, x: &SquareMatrix, y: &SquareMatrix) -> Result<SquareMatrix> {
    c.check_member(x, "X")?;
    c.check_member(y, "Y")?;
    c.eval_unchecked(x, y)
}

/// Sampled structural diagnostics of a connection function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub kind: ConnectionKind,
    pub m: ComplementChoice,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// `max |tr β(X, Y)|`.
    pub max_abs_trace: f64,
    /// `max ‖β(X, X)‖`.
    pub max_self_norm: f64,
    /// `max ‖β(X, Y) - β(Y, X)‖`.
    pub symmetry_defect: f64,
    /// `max ‖β(X, Y) + β(Y, X)‖`.
    pub antisymmetry_defect: f64,
    /// `max ‖Ad(h)β(X, Y) - β(Ad(h)X, Ad(h)Y)‖` with every `Ad(h)` image
    /// projected onto `m`.
    pub ad_invariance_defect: f64,
}

#[derive(Default, Clone, Copy)]
struct Defects {
    trace: f64,
    self_norm: f64,
    sym: f64,
    antisym: f64,
    ad: f64,
}

impl Defects {
    fn max(self, o: Defects) -> Defects {
        Defects {
            trace: self.trace.max(o.trace),
            self_norm: self.self_norm.max(o.self_norm),
            sym: self.sym.max(o.sym),
            antisym: self.antisym.max(o.antisym),
            ad: self.ad.max(o.ad),
        }
    }
}

fn pair_defects(c: &ConnectionFn, x: &SquareMatrix, y: &SquareMatrix) -> Result<Defects> {
    let xy = c.eval_unchecked(x, y)?;
    let yx = c.eval_unchecked(y, x)?;
    Ok(Defects {
        trace: xy.trace().abs(),
        self_norm: c.eval_unchecked(x, x)?.norm_fro(),
        sym: (&xy - &yx).norm_fro(),
        antisym: (&xy + &yx).norm_fro(),
        ad: 0.0,
    })
}

pub fn conn_properties(c: &ConnectionFn, samples: usize, seed: u64) -> Result<PropertyReport> {
    conn_properties_with(c, samples, seed, Exec::default())
}

pub fn conn_properties_with(
    c: &ConnectionFn,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<PropertyReport> {
    let (m, n) = (c.m, c.n);
    let basis = m_basis(m, n);
    let mut acc = Defects::default();
    for x in &basis {
        for y in &basis {
            acc = acc.max(pair_defects(c, x, y)?);
        }
    }
    let sampled = map_indices(exec, samples, |i| -> Result<Defects> {
        let mut rng = sample_rng(seed, i as u64);
        let x = random_in_m(m, n, &mut rng);
        let y = random_in_m(m, n, &mut rng);
        let h = random_rotation(n, &mut rng);
        let mut d = pair_defects(c, &x, &y)?;
        let moved = |v: &SquareMatrix| project_m_unchecked(&adjoint_orthogonal(&h, v), m);
        let lhs = moved(&c.eval_unchecked(&x, &y)?);
        let rhs = c.eval_unchecked(&moved(&x), &moved(&y))?;
        d.ad = (&lhs - &rhs).norm_fro();
        Ok(d)
    });
    for d in sampled {
        acc = acc.max(d?);
    }
    Ok(PropertyReport {
        kind: c.kind,
        m,
        n,
        samples,
        seed,
        max_abs_trace: acc.trace,
        max_self_norm: acc.self_norm,
        symmetry_defect: acc.sym,
        antisymmetry_defect: acc.antisym,
        ad_invariance_defect: acc.ad,
    })
}

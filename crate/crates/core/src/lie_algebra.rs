//! The Lie algebra `sl(n, R)` split along `so(n)` and a chosen complement
//! `m`, with a sampled check of whether `Ad(SO(n))` preserves `m`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densecore::SquareMatrix;
use crate::error::{Error, Result};
use crate::par::{map_indices, Exec};
use crate::sampling::{gaussian_vec, random_rotation, sample_rng};
use crate::tol;

/// Complement `m` of `h = so(n)` in `sl(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplementChoice {
    /// `m = a ⊕ n⁺`: trace-free diagonal plus strictly upper triangular.
    Iwasawa,
    /// `m = s`: trace-free symmetric matrices.
    Cartan,
}

impl std::str::FromStr for ComplementChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iwasawa" => Ok(Self::Iwasawa),
            "cartan" => Ok(Self::Cartan),
            other => Err(Error::InvalidInput(format!("unknown complement `{other}`"))),
        }
    }
}

impl std::fmt::Display for ComplementChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Iwasawa => "iwasawa",
            Self::Cartan => "cartan",
        })
    }
}

/// An element of `sl(n)` together with its Iwasawa parts.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    pub x: SquareMatrix,
    /// Skew-symmetric part, in `so(n)`.
    pub h_part: SquareMatrix,
    /// Diagonal part, in `a`.
    pub a_part: SquareMatrix,
    /// Strictly upper triangular part, in `n⁺`.
    pub n_part: SquareMatrix,
}

pub(crate) fn check_trace_free(x: &SquareMatrix) -> Result<()> {
    let tr = x.trace();
    if !tol::is_structural_zero(tr, x.max_abs()) {
        return Err(Error::Domain(format!("trace {tr:e} is not zero")));
    }
    Ok(())
}

/// `X = L + D + U` ↦ `(L - Lᵀ, D, U + Lᵀ)`.
pub fn split_iwasawa(x: &SquareMatrix) -> Result<AlgebraElement> {
    check_trace_free(x)?;
    Ok(split_iwasawa_unchecked(x))
}

fn split_iwasawa_unchecked(x: &SquareMatrix) -> AlgebraElement {
    let lower = x.strict_lower_part();
    let lower_t = lower.transpose();
    AlgebraElement {
        x: x.clone(),
        h_part: &lower - &lower_t,
        a_part: x.diagonal_part(),
        n_part: &x.strict_upper_part() + &lower_t,
    }
}

/// `X ↦ ((X - Xᵀ)/2, (X + Xᵀ)/2)`.
pub fn split_cartan(x: &SquareMatrix) -> Result<(SquareMatrix, SquareMatrix)> {
    check_trace_free(x)?;
    Ok(split_cartan_unchecked(x))
}

fn split_cartan_unchecked(x: &SquareMatrix) -> (SquareMatrix, SquareMatrix) {
    let xt = x.transpose();
    ((x - &xt).scale(0.5), (x + &xt).scale(0.5))
}

/// Projection onto `m` along `so(n)`.
pub fn project_m(x: &SquareMatrix, m: ComplementChoice) -> Result<SquareMatrix> {
    check_trace_free(x)?;
    Ok(project_m_unchecked(x, m))
}

pub(crate) fn project_m_unchecked(x: &SquareMatrix, m: ComplementChoice) -> SquareMatrix {
    match m {
        ComplementChoice::Iwasawa => {
            let parts = split_iwasawa_unchecked(x);
            &parts.a_part + &parts.n_part
        }
        ComplementChoice::Cartan => split_cartan_unchecked(x).1,
    }
}

/// `[X, Y] = XY - YX`.
pub fn bracket(x: &SquareMatrix, y: &SquareMatrix) -> Result<SquareMatrix> {
    x.check_same_dim(y)?;
    Ok(&(x * y) - &(y * x))
}

/// `Ad(h) X = h X h⁻¹` for orthogonal `h`.
pub fn adjoint_orthogonal(h: &SquareMatrix, x: &SquareMatrix) -> SquareMatrix {
    &(h * x) * &h.transpose()
}

pub fn m_dimension(n: usize) -> usize {
    (n - 1) + n * (n - 1) / 2
}

/// `H_k = E_kk - E_nn`.
fn cartan_generator(n: usize, k: usize) -> SquareMatrix {
    let mut d = vec![0.0; n];
    d[k] = 1.0;
    d[n - 1] = -1.0;
    SquareMatrix::diagonal(&d)
}

fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |p| ((p + 1)..n).map(move |q| (p, q)))
}

/// Fixed ordered basis of `m`.
///
/// Iwasawa: `H_1, …, H_{n-1}` then `E_pq` for `p < q` in row-major order.
/// Cartan: `E_pq + E_qp` for `p < q` in row-major order, then `H_1, …, H_{n-1}`.
pub fn m_basis(m: ComplementChoice, n: usize) -> Vec<SquareMatrix> {
    let diag = (0..n - 1).map(|k| cartan_generator(n, k));
    match m {
        ComplementChoice::Iwasawa => diag
            .chain(upper_pairs(n).map(|(p, q)| SquareMatrix::unit(n, p, q)))
            .collect(),
        ComplementChoice::Cartan => upper_pairs(n)
            .map(|(p, q)| &SquareMatrix::unit(n, p, q) + &SquareMatrix::unit(n, q, p))
            .chain(diag)
            .collect(),
    }
}

/// Coefficients of `x ∈ m` in [`m_basis`]. Entries of `x` outside `m` are
/// ignored.
pub fn m_coefficients(m: ComplementChoice, x: &SquareMatrix) -> Vec<f64> {
    let n = x.n();
    let diag = (0..n - 1).map(|k| x.get(k, k));
    let off = upper_pairs(n).map(|(p, q)| x.get(p, q));
    match m {
        ComplementChoice::Iwasawa => diag.chain(off).collect(),
        ComplementChoice::Cartan => off.chain(diag).collect(),
    }
}

/// Inverse of [`m_coefficients`].
pub fn from_m_coefficients(m: ComplementChoice, n: usize, coeffs: &[f64]) -> SquareMatrix {
    debug_assert_eq!(coeffs.len(), m_dimension(n));
    let (diag, off) = match m {
        ComplementChoice::Iwasawa => coeffs.split_at(n - 1),
        ComplementChoice::Cartan => {
            let (off, diag) = coeffs.split_at(n * (n - 1) / 2);
            (diag, off)
        }
    };
    let mut out = SquareMatrix::zeros(n);
    for (k, &c) in diag.iter().enumerate() {
        out.set(k, k, c);
    }
    out.set(n - 1, n - 1, -diag.iter().sum::<f64>());
    for ((p, q), &c) in upper_pairs(n).zip(off) {
        out.set(p, q, c);
        if m == ComplementChoice::Cartan {
            out.set(q, p, c);
        }
    }
    out
}

/// Gaussian coefficients in the basis of `m`.
pub fn random_in_m<R: Rng + ?Sized>(m: ComplementChoice, n: usize, rng: &mut R) -> SquareMatrix {
    from_m_coefficients(m, n, &gaussian_vec(m_dimension(n), rng))
}

/// `‖X - project_m(X)‖_F`.
pub fn m_membership_defect(x: &SquareMatrix, m: ComplementChoice) -> f64 {
    (x - &project_m_unchecked(x, m)).norm_fro()
}

/// Sampled maximum of `‖Ad(h)X - project_m(Ad(h)X)‖ / ‖X‖` over random
/// rotations `h` and random `X ∈ m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductivityReport {
    pub choice: ComplementChoice,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub max_relative_deviation: f64,
    /// True when the deviation stays within the structural tolerance.
    pub preserved: bool,
    pub worst_case_h: SquareMatrix,
    #[serde(rename = "worst_case_X")]
    pub worst_case_x: SquareMatrix,
}

pub fn check_reductivity(
    m: ComplementChoice,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<ReductivityReport> {
    check_reductivity_with(m, n, samples, seed, Exec::default())
}

pub fn check_reductivity_with(
    m: ComplementChoice,
    n: usize,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<ReductivityReport> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("n = {n} is below 2")));
    }
    let draws = map_indices(exec, samples, |i| {
        let mut rng = sample_rng(seed, i as u64);
        let h = random_rotation(n, &mut rng);
        let x = random_in_m(m, n, &mut rng);
        let moved = adjoint_orthogonal(&h, &x);
        let deviation = m_membership_defect(&moved, m) / x.norm_fro();
        (deviation, h, x)
    });
    // First maximum in index order keeps the report independent of scheduling.
    let (max_dev, h, x) = draws
        .into_iter()
        .reduce(|best, next| if next.0 > best.0 { next } else { best })
        .expect("samples >= 1");
    Ok(ReductivityReport {
        choice: m,
        n,
        samples,
        seed,
        max_relative_deviation: max_dev,
        preserved: max_dev <= tol::STRUCTURAL,
        worst_case_h: h,
        worst_case_x: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn split_iwasawa_examples() {
        let z = split_iwasawa(&SquareMatrix::zeros(2)).unwrap();
        assert_eq!(z.h_part, SquareMatrix::zeros(2));
        assert_eq!(z.n_part, SquareMatrix::zeros(2));

        let parts = split_iwasawa(&m(&[&[1.0, 2.0], &[3.0, -1.0]])).unwrap();
        assert_eq!(parts.h_part, m(&[&[0.0, -3.0], &[3.0, 0.0]]));
        assert_eq!(parts.a_part, SquareMatrix::diagonal(&[1.0, -1.0]));
        assert_eq!(parts.n_part, m(&[&[0.0, 5.0], &[0.0, 0.0]]));

        let up = m(&[&[0.0, 1.0, 2.0], &[0.0, 0.0, 3.0], &[0.0, 0.0, 0.0]]);
        let parts = split_iwasawa(&up).unwrap();
        assert_eq!(parts.n_part, up);
        assert_eq!(parts.h_part, SquareMatrix::zeros(3));
        assert_eq!(parts.a_part, SquareMatrix::zeros(3));
    }

    #[test]
    fn split_rejects_trace() {
        assert!(matches!(
            split_iwasawa(&SquareMatrix::identity(2)),
            Err(Error::Domain(_))
        ));
        assert!(split_cartan(&SquareMatrix::identity(3)).is_err());
        assert!(project_m(&SquareMatrix::identity(3), ComplementChoice::Cartan).is_err());
    }

    #[test]
    fn split_cartan_examples() {
        let s = m(&[&[1.0, 2.0], &[2.0, -1.0]]);
        let (skew, sym) = split_cartan(&s).unwrap();
        assert_eq!(skew, SquareMatrix::zeros(2));
        assert_eq!(sym, s);

        let (skew, sym) = split_cartan(&SquareMatrix::unit(2, 0, 1)).unwrap();
        assert_eq!(skew, m(&[&[0.0, 0.5], &[-0.5, 0.0]]));
        assert_eq!(sym, m(&[&[0.0, 0.5], &[0.5, 0.0]]));

        let (skew, sym) = split_cartan(&m(&[&[1.0, 2.0], &[3.0, -1.0]])).unwrap();
        assert_eq!(skew, m(&[&[0.0, -0.5], &[0.5, 0.0]]));
        assert_eq!(sym, m(&[&[1.0, 2.5], &[2.5, -1.0]]));
    }

    #[test]
    fn projection_examples() {
        let rot = m(&[&[0.0, -1.0], &[1.0, 0.0]]);
        assert_eq!(
            project_m(&rot, ComplementChoice::Iwasawa).unwrap(),
            SquareMatrix::zeros(2)
        );
        let an = m(&[&[0.5, 2.0, -1.0], &[0.0, 0.25, 3.0], &[0.0, 0.0, -0.75]]);
        assert_eq!(project_m(&an, ComplementChoice::Iwasawa).unwrap(), an);
        assert_eq!(
            project_m(&rot, ComplementChoice::Cartan).unwrap(),
            SquareMatrix::zeros(2)
        );
    }

    #[test]
    fn bracket_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, -1.0]]);
        assert_eq!(bracket(&x, &x).unwrap(), SquareMatrix::zeros(2));
        let e12 = SquareMatrix::unit(3, 0, 1);
        let e23 = SquareMatrix::unit(3, 1, 2);
        assert_eq!(bracket(&e12, &e23).unwrap(), SquareMatrix::unit(3, 0, 2));
        let h = SquareMatrix::diagonal(&[1.0, -1.0]);
        assert_eq!(
            bracket(&h, &SquareMatrix::unit(2, 0, 1)).unwrap(),
            SquareMatrix::unit(2, 0, 1).scale(2.0)
        );
        assert!(matches!(
            bracket(&h, &SquareMatrix::zeros(3)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn basis_orders() {
        let b = m_basis(ComplementChoice::Iwasawa, 3);
        assert_eq!(b.len(), 5);
        assert_eq!(b[0], SquareMatrix::diagonal(&[1.0, 0.0, -1.0]));
        assert_eq!(b[1], SquareMatrix::diagonal(&[0.0, 1.0, -1.0]));
        assert_eq!(b[2], SquareMatrix::unit(3, 0, 1));
        assert_eq!(b[3], SquareMatrix::unit(3, 0, 2));
        assert_eq!(b[4], SquareMatrix::unit(3, 1, 2));

        let c = m_basis(ComplementChoice::Cartan, 3);
        assert_eq!(c.len(), 5);
        assert_eq!(c[0], m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]));
        assert_eq!(c[4], SquareMatrix::diagonal(&[0.0, 1.0, -1.0]));
    }

    #[test]
    fn coefficients_round_trip_on_basis() {
        for choice in [ComplementChoice::Iwasawa, ComplementChoice::Cartan] {
            for n in 2..=5 {
                for (i, b) in m_basis(choice, n).iter().enumerate() {
                    let coeffs = m_coefficients(choice, b);
                    let expected: Vec<f64> =
                        (0..m_dimension(n)).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
                    assert_eq!(coeffs, expected);
                    assert_eq!(&from_m_coefficients(choice, n, &coeffs), b);
                }
            }
        }
    }

    #[test]
    fn cartan_complement_is_preserved() {
        let report = check_reductivity(ComplementChoice::Cartan, 4, 50, 7).unwrap();
        assert!(report.max_relative_deviation <= 1e-12);
        assert!(report.preserved);
    }

    #[test]
    fn iwasawa_counterexample_by_hand() {
        // Rotation by π/2 sends E12 to -E21, which has no a ⊕ n⁺ component.
        let h = m(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let moved = adjoint_orthogonal(&h, &SquareMatrix::unit(2, 0, 1));
        assert_eq!(moved, SquareMatrix::unit(2, 1, 0).scale(-1.0));
        let defect = m_membership_defect(&moved, ComplementChoice::Iwasawa);
        assert!(defect > 0.1);
    }

    #[test]
    fn iwasawa_complement_flagged() {
        let report = check_reductivity(ComplementChoice::Iwasawa, 2, 100, 1).unwrap();
        assert!(report.max_relative_deviation > 0.1);
        assert!(!report.preserved);
        let recomputed = m_membership_defect(
            &adjoint_orthogonal(&report.worst_case_h, &report.worst_case_x),
            ComplementChoice::Iwasawa,
        ) / report.worst_case_x.norm_fro();
        assert_eq!(recomputed, report.max_relative_deviation);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(check_reductivity(ComplementChoice::Cartan, 3, 0, 0).is_err());
    }

    #[test]
    fn reductivity_is_policy_independent() {
        let a = check_reductivity_with(ComplementChoice::Iwasawa, 3, 64, 9, Exec::Sequential);
        let b = check_reductivity_with(ComplementChoice::Iwasawa, 3, 64, 9, Exec::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn report_json_fields() {
        let report = check_reductivity(ComplementChoice::Cartan, 2, 3, 0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        for key in ["choice", "samples", "seed", "max_relative_deviation", "worst_case_h", "worst_case_X"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["choice"], "cartan");
    }
}

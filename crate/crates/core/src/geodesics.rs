//! Geodesics of invariant connections, integrated in either `μ` convention,
//! together with closed forms for comparison.
//!
//! A geodesic is a harmonic map from an interval, so specializing the
//! residual to `d = 1` gives `σ·v̇ = β(v, v)` with `σ = ±1` the
//! co-differential sign factor. In the chart convention `v` is the
//! coordinate velocity assembled in the basis of `a ⊕ n⁺`; in the
//! logarithmic convention `v = g⁻¹ġ` and `g` is carried along.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::connections::ConnectionFn;
use crate::darboux::{CodiffSign, Convention};
use crate::densecore::{log_unipotent, SquareMatrix};
use crate::error::{Error, Result};
use crate::iwasawa::{upper_count, ChartPoint};
use crate::lie_algebra::{check_trace_free, from_m_coefficients, m_coefficients, ComplementChoice};
use crate::tol;

const IWASAWA: ComplementChoice = ComplementChoice::Iwasawa;

/// Initial value problem for a geodesic through `p0` with velocity `v0`.
#[derive(Debug, Clone)]
pub struct GeodesicProblem {
    pub connection: ConnectionFn,
    pub convention: Convention,
    pub sign: CodiffSign,
    pub p0: ChartPoint,
    /// Initial velocity in `a ⊕ n⁺`.
    pub v0: SquareMatrix,
    pub horizon: f64,
    pub steps: usize,
}

impl GeodesicProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.p0.n();
        if self.connection.complement() != IWASAWA {
            return Err(Error::Domain(
                "geodesics in A x N+ need a connection on the iwasawa complement".into(),
            ));
        }
        if self.connection.n() != n || self.v0.n() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch between p0 (n = {n}), v0 (n = {}) and connection (n = {})",
                self.v0.n(),
                self.connection.n()
            )));
        }
        check_an_member(&self.v0, "v0")?;
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be at least 1".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon {} must be finite and positive",
                self.horizon
            )));
        }
        Ok(())
    }
}

fn check_an_member(x: &SquareMatrix, what: &str) -> Result<()> {
    check_trace_free(x).map_err(|e| Error::Domain(format!("{what}: {e}")))?;
    if !x.is_upper(tol::MEMBERSHIP * x.max_abs().max(1.0)) {
        return Err(Error::Domain(format!("{what} is not in a + n+")));
    }
    Ok(())
}

/// Sampled geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<ChartPoint>,
    /// Velocity in `a ⊕ n⁺` at each sample.
    pub velocities: Vec<SquareMatrix>,
    /// Set when an `a`-coordinate left `(0, ∞)`; the trajectory stops at the
    /// last valid sample before that time.
    pub blow_up_time: Option<f64>,
}

impl Trajectory {
    pub fn blew_up(&self) -> bool {
        self.blow_up_time.is_some()
    }

    pub fn end(&self) -> &ChartPoint {
        self.points.last().expect("trajectory holds the initial point")
    }

    /// `t, a1…, y1_2…, v_a1…, v_y1_2…` with velocity basis coefficients.
    pub fn to_csv(&self) -> String {
        let n = self.points[0].n();
        let names = coordinate_names(n);
        let mut out = String::from("t");
        for name in &names {
            let _ = write!(out, ",{name}");
        }
        for name in &names {
            let _ = write!(out, ",v_{name}");
        }
        out.push('\n');
        for ((t, p), v) in self.times.iter().zip(&self.points).zip(&self.velocities) {
            let _ = write!(out, "{t}");
            for c in p.coords() {
                let _ = write!(out, ",{c}");
            }
            for c in m_coefficients(IWASAWA, v) {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// `a1, …, a{n-1}, y1_2, y1_3, …` (one-based labels).
pub fn coordinate_names(n: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..n).map(|k| format!("a{k}")).collect();
    for p in 1..=n {
        for q in (p + 1)..=n {
            names.push(format!("y{p}_{q}"));
        }
    }
    names
}

/// Classical fourth-order Runge–Kutta with `steps` equal steps.
pub fn integrate_geodesic(p: &GeodesicProblem) -> Result<Trajectory> {
    p.validate()?;
    match p.convention {
        Convention::Chart => integrate_chart(p),
        Convention::Logarithmic => integrate_log(p),
    }
}

fn rk4_step<S, F>(state: &S, dt: f64, f: F) -> Result<S>
where
    S: Clone + Axpy,
    F: Fn(&S) -> Result<S>,
{
    let k1 = f(state)?;
    let k2 = f(&state.axpy(0.5 * dt, &k1))?;
    let k3 = f(&state.axpy(0.5 * dt, &k2))?;
    let k4 = f(&state.axpy(dt, &k3))?;
    Ok(state
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4))
}

/// `self + s·other`.
trait Axpy {
    fn axpy(&self, s: f64, other: &Self) -> Self;
}

impl Axpy for Vec<f64> {
    fn axpy(&self, s: f64, other: &Self) -> Self {
        self.iter().zip(other).map(|(a, b)| a + s * b).collect()
    }
}

impl Axpy for (SquareMatrix, SquareMatrix) {
    fn axpy(&self, s: f64, other: &Self) -> Self {
        (&self.0 + &other.0.scale(s), &self.1 + &other.1.scale(s))
    }
}

fn integrate_chart(p: &GeodesicProblem) -> Result<Trajectory> {
    let n = p.p0.n();
    let dim = n - 1 + upper_count(n);
    let sigma = p.sign.factor();
    let c = &p.connection;
    let dt = p.horizon / p.steps as f64;

    // state = (coordinates, coordinate velocities)
    let rhs = |s: &Vec<f64>| -> Result<Vec<f64>> {
        let (_, w) = s.split_at(dim);
        let v = from_m_coefficients(IWASAWA, n, w);
        let acc = m_coefficients(IWASAWA, &c.eval_unchecked(&v, &v)?);
        Ok(w.iter().copied().chain(acc.into_iter().map(|x| sigma * x)).collect())
    };

    let mut state: Vec<f64> = p.p0.coords();
    state.extend(m_coefficients(IWASAWA, &p.v0));
    let mut out = Trajectory {
        times: vec![0.0],
        points: vec![p.p0.clone()],
        velocities: vec![from_m_coefficients(IWASAWA, n, &state[dim..])],
        blow_up_time: None,
    };
    for step in 1..=p.steps {
        let t = step as f64 * dt;
        state = rk4_step(&state, dt, rhs)?;
        match ChartPoint::from_coords(n, &state[..dim]) {
            Ok(point) => {
                out.times.push(t);
                out.points.push(point);
                out.velocities.push(from_m_coefficients(IWASAWA, n, &state[dim..]));
            }
            Err(_) => {
                out.blow_up_time = Some(t);
                break;
            }
        }
    }
    Ok(out)
}

fn chart_point_of(g: &SquareMatrix) -> Option<ChartPoint> {
    let n = g.n();
    let diag = g.diag();
    if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return None;
    }
    let y = (0..n)
        .flat_map(|r| ((r + 1)..n).map(move |c| (r, c)))
        .map(|(r, c)| g.get(r, c) / diag[r])
        .collect();
    ChartPoint::new(n, diag[..n - 1].to_vec(), y).ok()
}

fn integrate_log(p: &GeodesicProblem) -> Result<Trajectory> {
    let n = p.p0.n();
    let sigma = p.sign.factor();
    let c = &p.connection;
    let dt = p.horizon / p.steps as f64;

    let rhs = |s: &(SquareMatrix, SquareMatrix)| -> Result<(SquareMatrix, SquareMatrix)> {
        let (g, v) = s;
        Ok((g * v, c.eval_unchecked(v, v)?.scale(sigma)))
    };

    let mut state = (p.p0.to_group(), p.v0.clone());
    let mut out = Trajectory {
        times: vec![0.0],
        points: vec![p.p0.clone()],
        velocities: vec![p.v0.clone()],
        blow_up_time: None,
    };
    for step in 1..=p.steps {
        let t = step as f64 * dt;
        let (mut g, v) = rk4_step(&state, dt, rhs)?;
        let det: f64 = g.diag().iter().product();
        let point = if det > 0.0 && det.is_finite() {
            g = g.scale(det.powf(-1.0 / n as f64));
            chart_point_of(&g)
        } else {
            None
        };
        let Some(point) = point else {
            out.blow_up_time = Some(t);
            break;
        };
        out.times.push(t);
        out.points.push(point);
        out.velocities.push(v.clone());
        state = (g, v);
    }
    Ok(out)
}

/// Affine closed form for connections with `β(X, X) = 0` from the identity:
/// `a_k(t) = v0_kk·t + 1`, `y_pq(t) = v0_pq·t`.
pub fn closed_form_symmetric(v0: &SquareMatrix, t: f64) -> Result<ChartPoint> {
    check_an_member(v0, "v0")?;
    let n = v0.n();
    let a: Vec<f64> = (0..n - 1).map(|k| v0.get(k, k) * t + 1.0).collect();
    if let Some(bad) = a.iter().find(|v| **v <= 0.0) {
        return Err(Error::Domain(format!(
            "a-coordinate {bad} at t = {t} left the chart"
        )));
    }
    let y = (0..n)
        .flat_map(|r| ((r + 1)..n).map(move |c| (r, c)))
        .map(|(r, c)| v0.get(r, c) * t)
        .collect();
    ChartPoint::new(n, a, y)
}

/// `det diag(v0_11·t + 1, …, v0_nn·t + 1) − 1`: how far the literal diagonal
/// matrix of the affine closed form drifts off `SL(n)`.
pub fn literal_diagonal_det_drift(v0: &SquareMatrix, t: f64) -> f64 {
    v0.diag().iter().map(|d| d * t + 1.0).product::<f64>() - 1.0
}

/// `f(1) = f(2) = 1`, `f(j) = Σ_{i=2}^{j} f(i−1)·f(j+1−i)`.
pub fn catalan_f(j: u32) -> Result<u64> {
    if j == 0 {
        return Err(Error::InvalidInput("catalan_f is defined for j >= 1".into()));
    }
    let j = j as usize;
    let mut f = vec![0u64; j.max(2) + 1];
    f[1] = 1;
    f[2] = 1;
    for m in 3..=j {
        let mut acc: u64 = 0;
        for i in 2..=m {
            let term = f[i - 1]
                .checked_mul(f[m + 1 - i])
                .ok_or_else(|| Error::Overflow(format!("f({m}) exceeds 64 bits")))?;
            acc = acc
                .checked_add(term)
                .ok_or_else(|| Error::Overflow(format!("f({m}) exceeds 64 bits")))?;
        }
        f[m] = acc;
    }
    Ok(f[j])
}

/// How the published N⁺ closed form is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NplusReading {
    /// Entry `(i, i+j)` is `f(j)·b_{i,i+1}⋯b_{i+j-1,i+j}·t^e` with `e = j` for
    /// `j ≤ 2` and `e = j − 1` beyond.
    Recurrence,
    /// The worked `n = 4` matrix: unit coefficients and `t^{max(1, j−1)}`.
    UnitCoefficient,
}

fn check_strictly_upper(v0: &SquareMatrix) -> Result<()> {
    if !v0.is_strictly_upper(tol::STRUCTURAL * v0.max_abs().max(1.0)) {
        return Err(Error::Domain("v0 is not strictly upper triangular".into()));
    }
    Ok(())
}

/// The published closed form for α-geodesics in `N⁺` from the identity,
/// evaluated as printed under the chosen reading.
pub fn closed_form_nplus_paper(v0: &SquareMatrix, t: f64, reading: NplusReading) -> Result<SquareMatrix> {
    check_strictly_upper(v0)?;
    let n = v0.n();
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 1..(n - i) {
            let chain: f64 = (i..i + j).map(|k| v0.get(k, k + 1)).product();
            let (coeff, exponent) = match reading {
                NplusReading::Recurrence => {
                    let e = if j <= 2 { j } else { j - 1 };
                    (catalan_f(j as u32)? as f64, e)
                }
                NplusReading::UnitCoefficient => (1.0, (j - 1).max(1)),
            };
            out.set(i, i + j, coeff * chain * t.powi(exponent as i32));
        }
    }
    Ok(out)
}

/// `B(t) = log(I + v0·t)` (lemma sign) or `−log(I − v0·t)` (example sign),
/// the exact solution of `B̈ = σ·Ḃ²`, `B(0) = 0`, `Ḃ(0) = v0`.
pub fn closed_form_nplus_oracle(v0: &SquareMatrix, t: f64, sign: CodiffSign) -> Result<SquareMatrix> {
    check_strictly_upper(v0)?;
    let n = v0.n();
    let eye = SquareMatrix::identity(n);
    let step = v0.strict_upper_part().scale(t);
    match sign {
        CodiffSign::Lemma => log_unipotent(&(&eye + &step)),
        CodiffSign::Example => Ok(-log_unipotent(&(&eye - &step))?),
    }
}

/// Closed forms a trajectory can be compared against. All start at the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    Symmetric { v0: SquareMatrix },
    NplusPublished { v0: SquareMatrix, reading: NplusReading },
    NplusOracle { v0: SquareMatrix, sign: CodiffSign },
}

impl ClosedForm {
    pub fn name(&self) -> String {
        match self {
            Self::Symmetric { .. } => "symmetric-affine".into(),
            Self::NplusPublished { reading, .. } => match reading {
                NplusReading::Recurrence => "nplus-published-recurrence".into(),
                NplusReading::UnitCoefficient => "nplus-published-unit-coefficient".into(),
            },
            Self::NplusOracle { sign, .. } => format!("nplus-log-oracle-{sign}"),
        }
    }

    /// Chart coordinates `a ++ y` at time `t`.
    pub fn coords(&self, t: f64) -> Result<Vec<f64>> {
        let nplus = |b: SquareMatrix| {
            let n = b.n();
            let mut c = vec![1.0; n - 1];
            c.extend((0..n).flat_map(|r| ((r + 1)..n).map(move |q| (r, q))).map(|(r, q)| b.get(r, q)));
            c
        };
        match self {
            Self::Symmetric { v0 } => Ok(closed_form_symmetric(v0, t)?.coords()),
            Self::NplusPublished { v0, reading } => Ok(nplus(closed_form_nplus_paper(v0, t, *reading)?)),
            Self::NplusOracle { v0, sign } => Ok(nplus(closed_form_nplus_oracle(v0, t, *sign)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDeviation {
    pub entry: String,
    pub max_abs_deviation: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference: String,
    pub threshold: f64,
    pub samples: usize,
    pub entries: Vec<EntryDeviation>,
    pub max_deviation: f64,
    pub agrees: bool,
}

impl ComparisonReport {
    pub fn entry(&self, name: &str) -> Option<&EntryDeviation> {
        self.entries.iter().find(|e| e.entry == name)
    }
}

/// Per-coordinate maximum deviation of `x` from `reference` over every
/// `stride`-th sample (the last sample is always included).
pub fn compare_trajectories(x: &Trajectory, reference: &ClosedForm, stride: usize) -> Result<ComparisonReport> {
    let stride = stride.max(1);
    let n = x.points[0].n();
    let names = coordinate_names(n);
    let mut max_dev = vec![0.0f64; names.len()];
    let last = x.times.len() - 1;
    let mut samples = 0;
    for k in (0..=last).filter(|k| k % stride == 0 || *k == last) {
        let expected = reference.coords(x.times[k])?;
        for ((m, got), want) in max_dev.iter_mut().zip(x.points[k].coords()).zip(expected) {
            *m = m.max((got - want).abs());
        }
        samples += 1;
    }
    let entries: Vec<EntryDeviation> = names
        .into_iter()
        .zip(&max_dev)
        .map(|(entry, &d)| EntryDeviation {
            entry,
            max_abs_deviation: d,
            agrees: d <= tol::TRAJECTORY_AGREEMENT,
        })
        .collect();
    let max_deviation = max_dev.iter().copied().fold(0.0, f64::max);
    Ok(ComparisonReport {
        reference: reference.name(),
        threshold: tol::TRAJECTORY_AGREEMENT,
        samples,
        agrees: entries.iter().all(|e| e.agrees),
        entries,
        max_deviation,
    })
}

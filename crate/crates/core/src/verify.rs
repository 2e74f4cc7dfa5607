//! Desk-scale re-derivation of the published harmonicity and geodesic claims.
//!
//! Each registered claim runs an independent check and yields a record
//! comparing a measured quantity against its threshold. Claims that are known
//! not to hold as printed carry `discrepant` as their expected verdict, so a
//! suite run only signals trouble when a verdict departs from the registry
//! or an internal consistency check fails.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::connections::{ConnectionFn, ConnectionKind};
use crate::darboux::{
    codifferential, harmonic_residual, mu_of_map, residual_components, ChartMap, CodiffSign, Convention,
};
use crate::densecore::SquareMatrix;
use crate::error::Result;
use crate::geodesics::{
    catalan_f, compare_trajectories, integrate_geodesic, literal_diagonal_det_drift, ClosedForm,
    GeodesicProblem, NplusReading,
};
use crate::iwasawa::ChartPoint;
use crate::lie_algebra::{check_reductivity_with, ComplementChoice};
use crate::par::{map_indices, Exec};
use crate::sampling::{gaussian_vec, sample_rng};
use crate::tol;

const IWASAWA: ComplementChoice = ComplementChoice::Iwasawa;
const SIGNS: [CodiffSign; 2] = [CodiffSign::Lemma, CodiffSign::Example];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Reproduced,
    ReproducedUpToConvention,
    Discrepant,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Reproduced => "reproduced",
            Self::ReproducedUpToConvention => "reproduced-up-to-convention",
            Self::Discrepant => "discrepant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub id: String,
    pub location: String,
    pub convention: String,
    pub sign: String,
    pub quantity: String,
    pub measured: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub expected_verdict: Verdict,
    /// Internal cross-checks (oracles, controls) that must hold whatever the
    /// verdict is.
    pub checks_passed: bool,
    pub details: Value,
}

impl ClaimRecord {
    pub fn matches_expectation(&self) -> bool {
        self.checks_passed && self.verdict == self.expected_verdict
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySuiteReport {
    pub seed: u64,
    pub claims: Vec<ClaimRecord>,
    pub all_match_expectation: bool,
}

impl VerifySuiteReport {
    pub fn claim(&self, id: &str) -> Option<&ClaimRecord> {
        self.claims.iter().find(|c| c.id == id)
    }
}

struct Claim {
    id: &'static str,
    location: &'static str,
    expected: Verdict,
    run: fn(&Claim, u64) -> Result<ClaimRecord>,
}

impl Claim {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        convention: &str,
        sign: &str,
        quantity: &str,
        measured: f64,
        threshold: f64,
        verdict: Verdict,
        checks_passed: bool,
        details: Value,
    ) -> ClaimRecord {
        ClaimRecord {
            id: self.id.into(),
            location: self.location.into(),
            convention: convention.into(),
            sign: sign.into(),
            quantity: quantity.into(),
            measured,
            threshold,
            verdict,
            expected_verdict: self.expected,
            checks_passed,
            details,
        }
    }
}

/// Sorted by id.
const REGISTRY: &[Claim] = &[
    Claim {
        id: "beta-null-criterion",
        location: "harmonicity criterion, case beta(X,X) = 0: harmonic iff d*mu_F = 0",
        expected: Verdict::Reproduced,
        run: claim_beta_null,
    },
    Claim {
        id: "nplus-closed-form",
        location: "N+ alpha-geodesics: closed form of the entries b_ij(t)",
        expected: Verdict::Discrepant,
        run: claim_nplus_closed_form,
    },
    Claim {
        id: "nplus-recurrence",
        location: "N+ alpha-geodesics: coefficients defined by recurrence as f(1) = f(2) = 1",
        expected: Verdict::Reproduced,
        run: claim_nplus_recurrence,
    },
    Claim {
        id: "reductivity-iwasawa",
        location: "reductive decomposition Ad(H)(m) in m, with m = a + n+",
        expected: Verdict::Discrepant,
        run: claim_reductivity,
    },
    Claim {
        id: "sl2-geodesics",
        location: "SL(2) geodesics: geodesics gamma(t) = (at + 1, nt) from the identity",
        expected: Verdict::Reproduced,
        run: claim_sl2_geodesics,
    },
    Claim {
        id: "sl2-harmonic-coordinates",
        location: "SL(2) maps: F is harmonic iff its coordinate functions are real harmonic maps",
        expected: Verdict::Reproduced,
        run: claim_sl2_harmonic,
    },
    Claim {
        id: "symmetric-geodesics",
        location: "symmetric-space geodesics: gamma is geodesic iff gamma(t) = diag(a_k t + 1) + nt",
        expected: Verdict::ReproducedUpToConvention,
        run: claim_symmetric_geodesics,
    },
    Claim {
        id: "symmetric-harmonic-coordinates",
        location: "symmetric-space maps: F is harmonic iff its coordinates are harmonic functions",
        expected: Verdict::Reproduced,
        run: claim_symmetric_harmonic,
    },
];

pub fn claim_ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|c| c.id).collect()
}

pub fn run_verify_suite(seed: u64) -> VerifySuiteReport {
    run_verify_suite_with(seed, Exec::default())
}

/// Claims run independently (in parallel under [`Exec::Parallel`]); a claim
/// whose check errors is reported as a failed discrepant record.
pub fn run_verify_suite_with(seed: u64, exec: Exec) -> VerifySuiteReport {
    let claims = map_indices(exec, REGISTRY.len(), |k| {
        let claim = &REGISTRY[k];
        let claim_seed: u64 = sample_rng(seed, k as u64).random();
        (claim.run)(claim, claim_seed).unwrap_or_else(|e| {
            claim.record(
                "-",
                "-",
                "error",
                f64::NAN,
                0.0,
                Verdict::Discrepant,
                false,
                json!({ "error": e.to_string() }),
            )
        })
    });
    VerifySuiteReport {
        seed,
        all_match_expectation: claims.iter().all(ClaimRecord::matches_expectation),
        claims,
    }
}

fn both_signs() -> String {
    "lemma,example".into()
}

fn conn(kind: ConnectionKind, n: usize) -> Result<ConnectionFn> {
    ConnectionFn::with_defaults(kind, IWASAWA, n)
}

/// Random `v0 ∈ a ⊕ n⁺` with diagonal entries in `[-diag, diag]` and
/// off-diagonal entries Gaussian.
fn random_an_velocity(n: usize, diag: f64, seed: u64, index: u64) -> SquareMatrix {
    let mut rng = sample_rng(seed, index);
    let g = gaussian_vec(n * n, &mut rng);
    let mut v = SquareMatrix::from_fn(n, |i, j| if j > i { g[i * n + j] } else { 0.0 });
    let mut trace = 0.0;
    for k in 0..n - 1 {
        let d = diag * g[k * n + k].tanh();
        v.set(k, k, d);
        trace += d;
    }
    v.set(n - 1, n - 1, -trace);
    v
}

fn geodesic(kind: ConnectionKind, v0: &SquareMatrix, sign: CodiffSign, convention: Convention) -> Result<GeodesicProblem> {
    Ok(GeodesicProblem {
        connection: conn(kind, v0.n())?,
        convention,
        sign,
        p0: ChartPoint::identity(v0.n()),
        v0: v0.clone(),
        horizon: 1.0,
        steps: 1000,
    })
}

fn claim_beta_null(c: &Claim, seed: u64) -> Result<ClaimRecord> {
    let mut worst_geodesic = 0.0f64;
    for (k, n) in [2usize, 3, 4].into_iter().enumerate() {
        let v0 = random_an_velocity(n, 0.5, seed, k as u64);
        for sign in SIGNS {
            let traj = integrate_geodesic(&geodesic(ConnectionKind::Canonical2, &v0, sign, Convention::Chart)?)?;
            let report = compare_trajectories(&traj, &ClosedForm::Symmetric { v0: v0.clone() }, 1)?;
            worst_geodesic = worst_geodesic.max(report.max_deviation);
        }
    }
    // residual and codifferential of a non-harmonic map agree bit for bit
    let map = ChartMap::sample(3, vec![7, 7], vec![0.1, 0.1], &[0.0, 0.0], |x| {
        (
            vec![1.0 + x[0] * x[0], 2.0 + x[0] * x[1].sin()],
            vec![x[0].exp(), x[1] * x[1], x[0] - x[1]],
        )
    })?;
    let c2 = conn(ConnectionKind::Canonical2, 3)?;
    let mut identical = true;
    for sign in SIGNS {
        let r = harmonic_residual(&map, &c2, Convention::Chart, sign)?;
        let d = codifferential(&mu_of_map(&map, Convention::Chart)?, sign)?;
        identical &= r.values == d.values;
    }
    let threshold = tol::TRAJECTORY_AGREEMENT;
    let verdict = if identical && worst_geodesic <= threshold {
        Verdict::Reproduced
    } else {
        Verdict::Discrepant
    };
    Ok(c.record(
        "chart",
        &both_signs(),
        "max deviation of canonical2 chart geodesics from affine coordinates",
        worst_geodesic,
        threshold,
        verdict,
        true,
        json!({ "residual_equals_codifferential": identical, "dimensions": [2, 3, 4] }),
    ))
}

fn claim_nplus_recurrence(c: &Claim, _seed: u64) -> Result<ClaimRecord> {
    // Catalan numbers C_{j-1} from the product formula.
    let mut catalan = vec![1u64];
    for m in 1..8u64 {
        let prev = catalan[m as usize - 1];
        catalan.push(prev * 2 * (2 * m - 1) / (m + 1));
    }
    let f: Vec<u64> = (1..=8).map(catalan_f).collect::<Result<_>>()?;
    let mismatches = f.iter().zip(&catalan).filter(|(a, b)| a != b).count();
    Ok(c.record(
        "-",
        "-",
        "entries of f(1..8) differing from shifted Catalan numbers",
        mismatches as f64,
        0.0,
        if mismatches == 0 { Verdict::Reproduced } else { Verdict::Discrepant },
        true,
        json!({ "f": f, "catalan_shifted": catalan }),
    ))
}

fn claim_nplus_closed_form(c: &Claim, seed: u64) -> Result<ClaimRecord> {
    let n = 4;
    let mut rng = sample_rng(seed, 0);
    let g = gaussian_vec(n * n, &mut rng);
    // strictly upper with every entry bounded away from zero
    let v0 = SquareMatrix::from_fn(n, |i, j| {
        if j > i {
            let x = g[i * n + j];
            x.signum() * (0.5 + x.abs().min(1.5))
        } else {
            0.0
        }
    });
    let mut oracle_dev = 0.0f64;
    let mut printed_dev = 0.0f64;
    let mut superdiag_dev = 0.0f64;
    let mut comparisons = Vec::new();
    let superdiag: Vec<String> = (1..n).map(|p| format!("y{p}_{}", p + 1)).collect();
    for sign in SIGNS {
        let traj = integrate_geodesic(&geodesic(ConnectionKind::Alpha, &v0, sign, Convention::Chart)?)?;
        let oracle = compare_trajectories(&traj, &ClosedForm::NplusOracle { v0: v0.clone(), sign }, 1)?;
        oracle_dev = oracle_dev.max(oracle.max_deviation);
        for reading in [NplusReading::Recurrence, NplusReading::UnitCoefficient] {
            let printed = compare_trajectories(&traj, &ClosedForm::NplusPublished { v0: v0.clone(), reading }, 1)?;
            printed_dev = printed_dev.max(printed.max_deviation);
            for name in &superdiag {
                superdiag_dev = superdiag_dev.max(printed.entry(name).map_or(f64::INFINITY, |e| e.max_abs_deviation));
            }
            comparisons.push(json!({ "sign": sign, "reading": reading, "published": printed }));
        }
        comparisons.push(json!({ "sign": sign, "oracle": oracle }));
    }
    let threshold = tol::TRAJECTORY_AGREEMENT;
    let checks = oracle_dev <= threshold && superdiag_dev <= threshold;
    Ok(c.record(
        "chart",
        &both_signs(),
        "max entry deviation of integrated alpha-geodesics from the published closed form",
        printed_dev,
        threshold,
        if printed_dev <= threshold { Verdict::Reproduced } else { Verdict::Discrepant },
        checks,
        json!({
            "v0": v0,
            "oracle_max_deviation": oracle_dev,
            "superdiagonal_max_deviation": superdiag_dev,
            "comparisons": comparisons,
        }),
    ))
}

fn claim_reductivity(c: &Claim, seed: u64) -> Result<ClaimRecord> {
    let iw = check_reductivity_with(IWASAWA, 3, 100, seed, Exec::Sequential)?;
    let cartan = check_reductivity_with(ComplementChoice::Cartan, 3, 100, seed, Exec::Sequential)?;
    let threshold = tol::STRUCTURAL;
    Ok(c.record(
        "-",
        "-",
        "max relative deviation of Ad(h)X from m over sampled rotations",
        iw.max_relative_deviation,
        threshold,
        if iw.max_relative_deviation <= threshold { Verdict::Reproduced } else { Verdict::Discrepant },
        cartan.max_relative_deviation <= threshold,
        json!({ "iwasawa": iw, "cartan_control": cartan }),
    ))
}

fn claim_sl2_geodesics(c: &Claim, seed: u64) -> Result<ClaimRecord> {
    let mut worst = 0.0f64;
    for k in 0..4 {
        let v0 = random_an_velocity(2, 0.6, seed, k);
        for sign in SIGNS {
            let traj = integrate_geodesic(&geodesic(ConnectionKind::Alpha, &v0, sign, Convention::Chart)?)?;
            worst = worst.max(compare_trajectories(&traj, &ClosedForm::Symmetric { v0: v0.clone() }, 1)?.max_deviation);
        }
    }
    let threshold = tol::TRAJECTORY_AGREEMENT;
    Ok(c.record(
        "chart",
        &both_signs(),
        "max deviation of alpha-geodesics in SL(2) from (at + 1, nt)",
        worst,
        threshold,
        if worst <= threshold { Verdict::Reproduced } else { Verdict::Discrepant },
        true,
        json!({ "velocities": 4 }),
    ))
}

/// `(x² − y², xy)` and `(x², xy)` on `[1, 1.2] × [0, 0.2]` at `h = 0.01`.
pub(crate) fn sl2_maps() -> Result<(ChartMap, ChartMap)> {
    let dims = vec![21, 21];
    let h = vec![0.01, 0.01];
    let harmonic = ChartMap::sample(2, dims.clone(), h.clone(), &[1.0, 0.0], |x| {
        (vec![x[0] * x[0] - x[1] * x[1]], vec![x[0] * x[1]])
    })?;
    let non_harmonic = ChartMap::sample(2, dims, h, &[1.0, 0.0], |x| (vec![x[0] * x[0]], vec![x[0] * x[1]]))?;
    Ok((harmonic, non_harmonic))
}

fn claim_sl2_harmonic(c: &Claim, _seed: u64) -> Result<ClaimRecord> {
    let (harmonic, non_harmonic) = sl2_maps()?;
    let alpha = conn(ConnectionKind::Alpha, 2)?;
    let mut sup = 0.0f64;
    let mut a_components = Vec::new();
    let mut a_dev = 0.0f64;
    for sign in SIGNS {
        sup = sup.max(harmonic_residual(&harmonic, &alpha, Convention::Chart, sign)?.sup_norm);
        let r = harmonic_residual(&non_harmonic, &alpha, Convention::Chart, sign)?;
        let a = &residual_components(&r).fields[0];
        let expected = 2.0 * sign.factor();
        a_dev = a.iter().map(|v| (v - expected).abs()).fold(a_dev, f64::max);
        a_components.push(json!({ "sign": sign, "a_component_min": a.iter().copied().fold(f64::INFINITY, f64::min), "a_component_max": a.iter().copied().fold(f64::NEG_INFINITY, f64::max) }));
    }
    let threshold = 1e-3;
    Ok(c.record(
        "chart",
        &both_signs(),
        "residual sup-norm of F = (x^2 - y^2, xy) under the alpha-connection, h = 0.01",
        sup,
        threshold,
        if sup <= threshold { Verdict::Reproduced } else { Verdict::Discrepant },
        a_dev <= threshold,
        json!({ "non_harmonic_a_component": a_components, "non_harmonic_a_deviation_from_2": a_dev }),
    ))
}

fn claim_symmetric_geodesics(c: &Claim, seed: u64) -> Result<ClaimRecord> {
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    for (k, n) in [3usize, 4].into_iter().enumerate() {
        let v0 = random_an_velocity(n, 0.5, seed, k as u64);
        drift = drift.max(literal_diagonal_det_drift(&v0, 1.0).abs());
        for sign in SIGNS {
            let traj = integrate_geodesic(&geodesic(ConnectionKind::Canonical1, &v0, sign, Convention::Chart)?)?;
            worst = worst.max(compare_trajectories(&traj, &ClosedForm::Symmetric { v0: v0.clone() }, 1)?.max_deviation);
        }
    }
    let threshold = tol::TRAJECTORY_AGREEMENT;
    // Affine in the chart coordinates a_1..a_{n-1}, y; the printed diagonal
    // with all n entries affine leaves SL(n).
    let verdict = match (worst <= threshold, drift > tol::UNIT_DET) {
        (true, true) => Verdict::ReproducedUpToConvention,
        (true, false) => Verdict::Reproduced,
        _ => Verdict::Discrepant,
    };
    Ok(c.record(
        "chart",
        &both_signs(),
        "max deviation of canonical1 chart geodesics from a_k(t) = v_kk t + 1, y(t) = v t",
        worst,
        threshold,
        verdict,
        true,
        json!({ "literal_diagonal_det_drift_at_t1": drift }),
    ))
}

/// Bound on `sup‖residual‖ / h²` for [`symmetric_harmonic_map`].
///
/// The residual stencil is a width-`2h` second difference with leading error
/// `(h²/3)(∂⁴_x + ∂⁴_y)` per coordinate. Each coordinate has that sum bounded
/// by `2e` on the unit square, and the `a` block enters the Frobenius norm as
/// `diag(c1, c2, −c1 − c2)`, giving `(2e/3)·√7 ≈ 4.8`.
pub const SYMMETRIC_RESIDUAL_CONSTANT: f64 = 5.0;

/// A map into `SL(3)/SO(3)` on `[0, 1]²` whose five coordinates are
/// harmonic and not polynomial.
pub fn symmetric_harmonic_map(h: f64) -> Result<ChartMap> {
    let dims = (1.0 / h).round() as usize + 1;
    ChartMap::sample(3, vec![dims, dims], vec![h, h], &[0.0, 0.0], |x| {
        let (u, v) = (x[0], x[1]);
        (
            vec![2.0 + u.exp() * v.cos(), 2.0 + v.exp() * u.cos()],
            vec![u.exp() * v.sin(), u * v, u * u - v * v],
        )
    })
}

fn claim_symmetric_harmonic(c: &Claim, _seed: u64) -> Result<ClaimRecord> {
    let c1 = conn(ConnectionKind::Canonical1, 3)?;
    let coarse = symmetric_harmonic_map(0.02)?;
    let fine = symmetric_harmonic_map(0.01)?;
    let mut ratios = Vec::new();
    let mut worst_scaled = 0.0f64;
    for sign in SIGNS {
        let rc = harmonic_residual(&coarse, &c1, Convention::Chart, sign)?.sup_norm;
        let rf = harmonic_residual(&fine, &c1, Convention::Chart, sign)?.sup_norm;
        worst_scaled = worst_scaled.max(rc / 0.02f64.powi(2)).max(rf / 0.01f64.powi(2));
        ratios.push(json!({ "sign": sign, "coarse": rc, "fine": rf, "ratio": rc / rf }));
    }
    let ratio_ok = ratios
        .iter()
        .all(|r| (3.5..=4.5).contains(&r["ratio"].as_f64().unwrap_or(f64::NAN)));
    let threshold = SYMMETRIC_RESIDUAL_CONSTANT;
    let verdict = if ratio_ok && worst_scaled <= threshold {
        Verdict::Reproduced
    } else {
        Verdict::Discrepant
    };
    Ok(c.record(
        "chart",
        &both_signs(),
        "max over h in {0.02, 0.01} of residual sup-norm / h^2 (canonical1, SL(3))",
        worst_scaled,
        threshold,
        verdict,
        true,
        json!({ "ratios": ratios }),
    ))
}

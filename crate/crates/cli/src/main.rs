use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use sln_harmonic::connections::{beta_eval, ConnectionFn, ConnectionKind, InnerProduct};
use sln_harmonic::darboux::{harmonic_residual, residual_components, ChartMap, CodiffSign, Convention};
use sln_harmonic::geodesics::{
    catalan_f, compare_trajectories, integrate_geodesic, ClosedForm, GeodesicProblem, NplusReading,
};
use sln_harmonic::iwasawa::{decompose_kan, to_chart, ChartPoint};
use sln_harmonic::lie_algebra::{check_reductivity, ComplementChoice};
use sln_harmonic::verify::run_verify_suite;
use sln_harmonic::{Error, SquareMatrix};

#[derive(Parser)]
#[command(name = "sln-harmonic", version, about = "Harmonic maps and geodesics in SL(n)/SO(n)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct Io {
    /// Input file; `-` reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(clap::Args)]
struct Conn {
    #[arg(long, default_value = "alpha")]
    connection: ConnectionKind,
    #[arg(long, default_value = "iwasawa")]
    m: ComplementChoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum Compare {
    Symmetric,
    NplusOracle,
    NplusRecurrence,
    NplusUnitCoefficient,
}

#[derive(Subcommand)]
enum Command {
    /// Iwasawa factors of a matrix with determinant one.
    Decompose {
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        io: Io,
    },
    /// Connection function on two elements of m, read as {"x": .., "y": ..}.
    Beta {
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        conn: Conn,
        #[command(flatten)]
        io: Io,
    },
    /// Harmonicity residual of a sampled map.
    Harmonic {
        #[command(flatten)]
        conn: Conn,
        #[arg(long, default_value = "chart")]
        convention: Convention,
        #[arg(long, default_value = "lemma")]
        sign: CodiffSign,
        #[command(flatten)]
        io: Io,
    },
    /// Integrate a geodesic, optionally against a closed form.
    Geodesic {
        #[command(flatten)]
        conn: Conn,
        #[arg(long, default_value = "chart")]
        convention: Convention,
        #[arg(long, default_value = "lemma")]
        sign: CodiffSign,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_enum)]
        compare: Option<Compare>,
        #[command(flatten)]
        io: Io,
    },
    /// Table of the coefficient recurrence f(j).
    Catalan {
        #[arg(long)]
        max: u32,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Sampled test of Ad(SO(n))-invariance of the complement.
    CheckReductivity {
        #[arg(long, default_value = "iwasawa")]
        m: ComplementChoice,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-run every registered claim.
    VerifyPaper {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Discrepancy,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read_input(path: &Option<PathBuf>) -> std::result::Result<String, Failure> {
    match path.as_deref() {
        None => Err(Failure::Validation("--input is required".into())),
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::Validation(format!("stdin: {e}")))?;
            Ok(s)
        }
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Validation(format!("{}: {e}", p.display()))),
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> std::result::Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Validation(format!("malformed {what}: {e}")))
}

/// Output is written only once fully computed.
fn emit(path: &Option<PathBuf>, body: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| Failure::Validation(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Validation(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn check_n(expected: Option<usize>, m: &SquareMatrix) -> Outcome {
    match expected {
        Some(n) if n != m.n() => Err(Failure::Validation(format!("--n {n} but input is {}x{}", m.n(), m.n()))),
        _ => Ok(()),
    }
}

fn csv_unsupported(format: Option<Format>, what: &str) -> Outcome {
    if format == Some(Format::Csv) {
        return Err(Failure::Validation(format!("{what} has no csv form")));
    }
    Ok(())
}

fn decompose(n: Option<usize>, io: Io) -> Outcome {
    csv_unsupported(io.format, "decompose")?;
    let g: SquareMatrix = parse(&read_input(&io.input)?, "matrix")?;
    check_n(n, &g)?;
    let factors = decompose_kan(&g)?;
    let chart = to_chart(&factors);
    emit(&io.output, &to_json(&json!({ "K": factors.k, "A": factors.a, "N": factors.n, "chart": chart })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaInput {
    x: SquareMatrix,
    y: SquareMatrix,
    #[serde(default)]
    inner: Option<InnerProduct>,
}

fn connection(conn: &Conn, n: usize, inner: Option<InnerProduct>) -> Result<ConnectionFn, Failure> {
    let inner = match conn.connection {
        ConnectionKind::Riemannian => Some(inner.unwrap_or(InnerProduct::Trace)),
        _ => inner,
    };
    Ok(ConnectionFn::new(conn.connection, conn.m, n, inner)?)
}

fn beta(n: Option<usize>, conn: Conn, io: Io) -> Outcome {
    csv_unsupported(io.format, "beta")?;
    let input: BetaInput = parse(&read_input(&io.input)?, "beta input")?;
    check_n(n, &input.x)?;
    check_n(n, &input.y)?;
    let c = connection(&conn, input.x.n(), input.inner)?;
    let b = beta_eval(&c, &input.x, &input.y)?;
    emit(&io.output, &to_json(&json!({ "connection": conn.connection, "m": conn.m, "beta": b })))
}

fn harmonic(conn: Conn, convention: Convention, sign: CodiffSign, io: Io) -> Outcome {
    let map: ChartMap = parse(&read_input(&io.input)?, "chart map")?;
    let c = connection(&conn, map.n(), None)?;
    let r = harmonic_residual(&map, &c, convention, sign)?;
    let comps = residual_components(&r);
    let component_sup: serde_json::Map<String, serde_json::Value> = comps
        .names
        .iter()
        .zip(&comps.fields)
        .map(|(name, f)| (name.clone(), json!(f.iter().fold(0.0f64, |m, v| m.max(v.abs())))))
        .collect();
    let summary = json!({
        "connection": conn.connection,
        "convention": convention,
        "sign": sign,
        "nodes": r.nodes.len(),
        "sup_norm": r.sup_norm,
        "mean_norm": r.mean_norm,
        "a_sup_norm": r.a_sup_norm(),
        "n_sup_norm": r.n_sup_norm(),
        "component_sup": component_sup,
    });
    match io.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            emit(&io.output, &r.to_csv())?;
            eprintln!("{}", serde_json::to_string(&summary).expect("serializable"));
            Ok(())
        }
        Format::Json => emit(&io.output, &to_json(&summary)),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeodesicInput {
    v0: SquareMatrix,
    #[serde(default)]
    p0: Option<ChartPoint>,
    #[serde(default)]
    horizon: Option<f64>,
    #[serde(default)]
    steps: Option<usize>,
    #[serde(default)]
    inner: Option<InnerProduct>,
}

#[allow(clippy::too_many_arguments)]
fn geodesic(
    conn: Conn,
    convention: Convention,
    sign: CodiffSign,
    steps: Option<usize>,
    horizon: Option<f64>,
    compare: Option<Compare>,
    io: Io,
) -> Outcome {
    let input: GeodesicInput = parse(&read_input(&io.input)?, "geodesic problem")?;
    let n = input.v0.n();
    let p0 = input.p0.unwrap_or_else(|| ChartPoint::identity(n));
    if compare.is_some() && p0 != ChartPoint::identity(n) {
        return Err(Failure::Validation("closed forms start at the identity; drop p0 or --compare".into()));
    }
    let problem = GeodesicProblem {
        connection: connection(&conn, n, input.inner)?,
        convention,
        sign,
        p0,
        v0: input.v0.clone(),
        horizon: horizon.or(input.horizon).unwrap_or(1.0),
        steps: steps.or(input.steps).unwrap_or(1000),
    };
    let traj = integrate_geodesic(&problem)?;
    let comparison = compare
        .map(|kind| {
            let v0 = input.v0.clone();
            let form = match kind {
                Compare::Symmetric => ClosedForm::Symmetric { v0 },
                Compare::NplusOracle => ClosedForm::NplusOracle { v0, sign },
                Compare::NplusRecurrence => ClosedForm::NplusPublished { v0, reading: NplusReading::Recurrence },
                Compare::NplusUnitCoefficient => ClosedForm::NplusPublished { v0, reading: NplusReading::UnitCoefficient },
            };
            compare_trajectories(&traj, &form, 1)
        })
        .transpose()?;
    match io.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            emit(&io.output, &traj.to_csv())?;
            if let Some(c) = &comparison {
                eprintln!("{}", serde_json::to_string(c).expect("serializable"));
            }
            if let Some(t) = traj.blow_up_time {
                eprintln!("blow-up: left the chart before t = {t}");
            }
            Ok(())
        }
        Format::Json => emit(
            &io.output,
            &to_json(&json!({
                "samples": traj.times.len(),
                "end_time": traj.times.last(),
                "end": traj.end(),
                "blow_up_time": traj.blow_up_time,
                "comparison": comparison,
            })),
        ),
    }
}

fn catalan(max: u32, output: Option<PathBuf>, format: Option<Format>) -> Outcome {
    let values = (1..=max).map(catalan_f).collect::<sln_harmonic::Result<Vec<u64>>>()?;
    let body = match format.unwrap_or(Format::Json) {
        Format::Json => to_json(&values),
        Format::Csv => {
            let mut s = String::from("j,f\n");
            for (j, v) in values.iter().enumerate() {
                s.push_str(&format!("{},{v}\n", j + 1));
            }
            s
        }
    };
    emit(&output, &body)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Decompose { n, io } => decompose(n, io),
        Command::Beta { n, conn, io } => beta(n, conn, io),
        Command::Harmonic { conn, convention, sign, io } => harmonic(conn, convention, sign, io),
        Command::Geodesic { conn, convention, sign, steps, horizon, compare, io } => {
            geodesic(conn, convention, sign, steps, horizon, compare, io)
        }
        Command::Catalan { max, output, format } => catalan(max, output, format),
        Command::CheckReductivity { m, n, samples, seed, output } => {
            emit(&output, &to_json(&check_reductivity(m, n, samples, seed)?))
        }
        Command::VerifyPaper { seed, output } => {
            let report = run_verify_suite(seed);
            emit(&output, &to_json(&report))?;
            for c in &report.claims {
                let mark = if c.matches_expectation() { "ok" } else { "UNEXPECTED" };
                eprintln!("{:<32} {:<28} {mark}", c.id, c.verdict.to_string());
            }
            if report.all_match_expectation {
                Ok(())
            } else {
                Err(Failure::Discrepancy)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Discrepancy) => {
            eprintln!("error: verdicts differ from the registered expectations");
            ExitCode::from(2)
        }
    }
}

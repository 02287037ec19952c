//! Command-line front end for the `semitall` library.
//!
//! [`dispatch`] parses an argument vector, runs one subcommand and returns
//! the exit code together with the rendered report.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use semitall::acceptance::{run_criterion, SuiteConfig, CRITERIA};
use semitall::certifier::{
    certify, global_experiment_with, perturb_experiment_with, CertifyOptions, RankVerdict, SPAN_TOL,
};
use semitall::classifier::{classify, theorem_table, Verdict};
use semitall::io::{read_tensor, to_json};
use semitall::polyfactor::{alpha_closed, divisor_to_point, real_selections};
use semitall::random::{gaussian_matrix, stream_rng};
use semitall::solver::{perturbed_start_tensor, solve_all, TrackOptions};
use semitall::tensor::{make_start_frame, tau, Format, Tensor3};
use semitall::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_EPS: f64 = 1e-3;
const DEFAULT_TRIALS: usize = 50;
const DIVISOR_TOL: f64 = 1e-9;
/// Stream used for the noise matrix when `certify` or `solve` builds its own input.
const INPUT_STREAM: u64 = 77;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Perturb,
    Global,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count real monic degree-(m-1) divisors of y^u + 1.
    Alpha,
    /// List the real divisors and their points (a_1, ..., a_{m-1}, -1).
    Divisors,
    /// Typical-rank verdict for an n x p x m format.
    Classify,
    /// Verdicts at the critical p for 3 <= m <= n (--m and --n are the upper bounds).
    Table,
    /// Solve M(a, Y) b = 0 for a u x n x m tensor (--input, or A' + eps R).
    Solve,
    /// Certify whether an n x p x m tensor has rank p (--input, or tau(W0 + eps R)).
    Certify,
    /// Monte Carlo certification experiment.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
    },
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Debug, Parser)]
#[command(name = "semitall-rank", version, about = "Plural typical ranks of real n x p x m tensors at p = (m-1)(n-1)+1")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Defaults to the critical value (m-1)(n-1)+1.
    #[arg(long, global = true)]
    pub p: Option<usize>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Span tolerance for certify/experiment/selftest, reality tolerance for solve.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: OutputFormat,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Dispatch {
    fn failure(code: i32, msg: impl Into<String>) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr: msg.into(),
        }
    }
}

struct Report {
    code: i32,
    body: Value,
    /// Rows for `--format csv`.
    csv: Option<String>,
    /// Text for `--format plain`.
    plain: Option<String>,
}

impl Report {
    fn ok(body: Value) -> Self {
        Self {
            code: EXIT_OK,
            body,
            csv: None,
            plain: None,
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::ChartViolation { .. } | Error::Parse(_) | Error::Io(_) => EXIT_DOMAIN,
        Error::Resource(_) | Error::DegenerateStart { .. } | Error::Internal(_) => EXIT_NUMERICAL,
    }
}

pub fn dispatch<I, T>(argv: I) -> Dispatch
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Dispatch {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Dispatch::failure(code, text)
            };
        }
    };
    match cli.jobs {
        Some(0) => Dispatch::failure(EXIT_DOMAIN, "error: --jobs must be at least 1\n"),
        Some(jobs) => match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Dispatch::failure(EXIT_NUMERICAL, format!("error: {e}\n")),
        },
        None => run(&cli),
    }
}

fn run(cli: &Cli) -> Dispatch {
    let report = match execute(cli) {
        Ok(r) => r,
        Err(e) => return Dispatch::failure(exit_code(&e), format!("error: {e}\n")),
    };
    let text = match cli.format {
        OutputFormat::Json => match to_json(&report.body) {
            Ok(s) => s + "\n",
            Err(e) => return Dispatch::failure(EXIT_NUMERICAL, format!("error: {e}\n")),
        },
        OutputFormat::Csv => match report.csv {
            Some(s) => s,
            None => return Dispatch::failure(EXIT_DOMAIN, "error: --format csv is only available for table\n"),
        },
        OutputFormat::Plain => report.plain.unwrap_or_else(|| plain_lines(&report.body)),
    };
    match &cli.output {
        Some(path) => match std::fs::write(path, &text) {
            Ok(()) => Dispatch {
                code: report.code,
                stdout: String::new(),
                stderr: String::new(),
            },
            Err(e) => Dispatch::failure(EXIT_DOMAIN, format!("error: cannot write {}: {e}\n", path.display())),
        },
        None => Dispatch {
            code: report.code,
            stdout: text,
            stderr: String::new(),
        },
    }
}

fn plain_lines(body: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = body {
        for (k, v) in map {
            out.push_str(&format!("{k}: {v}\n"));
        }
    } else {
        out.push_str(&format!("{body}\n"));
    }
    out
}

fn required(value: Option<usize>, flag: &str) -> semitall::Result<usize> {
    value.ok_or_else(|| Error::Domain(format!("--{flag} is required")))
}

fn critical(cli: &Cli) -> semitall::Result<Format> {
    let m = required(cli.m, "m")?;
    let n = required(cli.n, "n")?;
    let fmt = Format::critical(m, n)?;
    if let Some(p) = cli.p {
        if p != fmt.p {
            return Err(Error::Domain(format!("this command needs the critical p = {}, got {p}", fmt.p)));
        }
    }
    Ok(fmt)
}

fn positive(x: Option<f64>, flag: &str) -> semitall::Result<Option<f64>> {
    match x {
        Some(v) if v.is_nan() || v <= 0.0 || v.is_infinite() => Err(Error::Domain(format!("--{flag} must be positive"))),
        other => Ok(other),
    }
}

fn with_header(command: &str, seed: u64, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("command".into(), json!(command));
    map.insert("seed".into(), json!(seed));
    if let Value::Object(rest) = body {
        map.extend(rest);
    } else {
        map.insert("result".into(), body);
    }
    Value::Object(map)
}

fn to_value<T: serde::Serialize>(x: &T) -> semitall::Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn execute(cli: &Cli) -> semitall::Result<Report> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let tol = positive(cli.tol, "tol")?;
    match &cli.command {
        Command::Alpha => {
            let fmt = critical(cli)?;
            let alpha = alpha_closed(fmt.m, fmt.n)?;
            let body = json!({
                "m": fmt.m,
                "n": fmt.n,
                "p": fmt.p,
                "u": fmt.u,
                "alpha": u64::try_from(&alpha).map(Value::from).unwrap_or_else(|_| alpha.to_string().into()),
                "alpha_lt_p": alpha < fmt.p.into(),
            });
            Ok(Report::ok(with_header("alpha", seed, body)))
        }
        Command::Divisors => {
            let fmt = critical(cli)?;
            let mut rows = Vec::new();
            for sel in real_selections(fmt.u, fmt.m - 1)? {
                let h = sel
                    .real_poly()
                    .ok_or_else(|| Error::Internal("selection is not conjugation closed".into()))?;
                rows.push(json!({
                    "roots": sel.subset,
                    "coefficients": h.real_coeffs(),
                    "point": divisor_to_point(&h, fmt.m, DIVISOR_TOL)?,
                }));
            }
            let body = json!({
                "m": fmt.m,
                "n": fmt.n,
                "u": fmt.u,
                "count": rows.len(),
                "divisors": rows,
            });
            Ok(Report::ok(with_header("divisors", seed, body)))
        }
        Command::Classify => {
            let m = required(cli.m, "m")?;
            let n = required(cli.n, "n")?;
            let p = match cli.p {
                Some(p) => p,
                None => Format::critical(m, n)?.p,
            };
            let v = classify(m, n, p)?;
            let plain = format!(
                "m={} n={} p={}: {} [{}]\n",
                v.m,
                v.n,
                v.p,
                v.trank.name(),
                reason_list(&v)
            );
            let mut report = Report::ok(with_header("classify", seed, to_value(&v)?));
            report.plain = Some(plain);
            Ok(report)
        }
        Command::Table => {
            let m_max = cli.m.unwrap_or(9);
            let n_max = cli.n.unwrap_or(40);
            let rows = theorem_table(m_max, n_max)?;
            let mut report = Report::ok(with_header(
                "table",
                seed,
                json!({ "m_max": m_max, "n_max": n_max, "rows": to_value(&rows)? }),
            ));
            report.csv = Some(table_csv(&rows)?);
            report.plain = Some(table_plain(&rows));
            Ok(report)
        }
        Command::Solve => {
            let mut opts = TrackOptions::seeded(seed);
            if let Some(t) = tol {
                opts.real_tol = t;
            }
            let (y, source) = match &cli.input {
                Some(path) => (read_tensor(path)?, json!({ "file": path.display().to_string() })),
                None => {
                    let fmt = critical(cli)?;
                    let eps = cli.eps.unwrap_or(DEFAULT_EPS);
                    (
                        perturbed_start_tensor(fmt.m, fmt.n, eps, seed, INPUT_STREAM)?,
                        json!({ "perturbed_start": { "eps": eps, "stream": INPUT_STREAM } }),
                    )
                }
            };
            let rep = solve_all(&y, &opts)?;
            let code = if rep.complete() { EXIT_OK } else { EXIT_NUMERICAL };
            let mut body = to_value(&rep)?;
            if let Value::Object(map) = &mut body {
                map.insert("input".into(), source);
                map.insert("options".into(), to_value(&opts)?);
            }
            Ok(Report {
                code,
                ..Report::ok(with_header("solve", seed, body))
            })
        }
        Command::Certify => {
            let mut opts = CertifyOptions::seeded(seed);
            opts.span_tol = tol.unwrap_or(SPAN_TOL);
            let (t, source) = match &cli.input {
                Some(path) => (read_tensor(path)?, json!({ "file": path.display().to_string() })),
                None => {
                    let fmt = critical(cli)?;
                    let eps = cli.eps.unwrap_or(DEFAULT_EPS);
                    (perturbed_w0(fmt, eps, seed)?, json!({ "perturbed_w0": { "eps": eps, "stream": INPUT_STREAM } }))
                }
            };
            let cert = certify(&t, &opts)?;
            let code = if cert.verdict == RankVerdict::Inconclusive {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            };
            let plain = format!(
                "{} (dim U = {}, p = {}, real points = {}, failed paths = {}/{})\n",
                cert.verdict.name(),
                cert.dim_u,
                cert.format.p,
                cert.real_points,
                cert.paths_failed,
                cert.n_paths
            );
            let mut body = to_value(&cert)?;
            if let Value::Object(map) = &mut body {
                map.insert("input".into(), source);
                map.insert("track".into(), to_value(&opts.track)?);
            }
            Ok(Report {
                code,
                plain: Some(plain),
                ..Report::ok(with_header("certify", seed, body))
            })
        }
        Command::Experiment { kind } => {
            let fmt = critical(cli)?;
            let trials = cli.trials.unwrap_or(DEFAULT_TRIALS);
            let span_tol = tol.unwrap_or(SPAN_TOL);
            let start = Instant::now();
            let stats = match kind {
                ExperimentKind::Perturb => {
                    let eps = cli.eps.unwrap_or(DEFAULT_EPS);
                    perturb_experiment_with(fmt, eps, trials, seed, span_tol)?
                }
                ExperimentKind::Global => global_experiment_with(fmt, trials, seed, span_tol)?,
            };
            let plain = format!(
                "{} ({},{}) trials={} RANK_P={} RANK_GT_P={} INCONCLUSIVE={} mean dim U={:.3}\n",
                stats.experiment,
                fmt.m,
                fmt.n,
                stats.trials,
                stats.rank_p,
                stats.rank_gt_p,
                stats.inconclusive,
                stats.mean_dim_u
            );
            let mut body = to_value(&stats)?;
            if let Value::Object(map) = &mut body {
                map.insert("span_tol".into(), json!(span_tol));
                map.insert("elapsed_s".into(), json!(start.elapsed().as_secs_f64()));
            }
            Ok(Report {
                plain: Some(plain),
                ..Report::ok(with_header("experiment", seed, body))
            })
        }
        Command::Selftest => {
            let cfg = SuiteConfig {
                seed,
                span_tol: tol.unwrap_or(SPAN_TOL),
            };
            let start = Instant::now();
            let outcomes: Vec<_> = (1..=CRITERIA.len()).map(|id| run_criterion(id, &cfg)).collect();
            let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
            let mut plain: String = outcomes.iter().map(|o| o.line() + "\n").collect();
            plain.push_str(&format!(
                "{} of {} criteria passed in {:.1}s\n",
                outcomes.len() - failed.len(),
                outcomes.len(),
                start.elapsed().as_secs_f64()
            ));
            let body = json!({
                "span_tol": cfg.span_tol,
                "passed": failed.is_empty(),
                "failed": failed,
                "criteria": to_value(&outcomes)?,
                "elapsed_s": start.elapsed().as_secs_f64(),
            });
            Ok(Report {
                code: if failed.is_empty() { EXIT_OK } else { EXIT_NUMERICAL },
                plain: Some(plain),
                ..Report::ok(with_header("selftest", seed, body))
            })
        }
    }
}

/// `τ(W₀ + εR)` with `R` drawn from `(seed, INPUT_STREAM)`.
pub fn perturbed_w0(fmt: Format, eps: f64, seed: u64) -> semitall::Result<Tensor3> {
    let w0 = make_start_frame(fmt.m, fmt.n)?.w0;
    let mut rng = stream_rng(seed, INPUT_STREAM);
    let r = gaussian_matrix(&mut rng, fmt.u, fmt.p);
    tau(&(w0 + r * eps), fmt)
}

fn reason_list(v: &Verdict) -> String {
    v.reasons.iter().map(|r| r.name()).collect::<Vec<_>>().join(";")
}

fn alpha_text(v: &Verdict) -> String {
    v.alpha.as_ref().map(|a| a.to_string()).unwrap_or_default()
}

#[derive(serde::Serialize)]
struct CsvRow<'a> {
    m: usize,
    n: usize,
    p: usize,
    alpha: String,
    bit_disjoint: bool,
    verdict: &'a str,
    reasons: String,
}

fn table_csv(rows: &[Verdict]) -> semitall::Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for v in rows {
        writer
            .serialize(CsvRow {
                m: v.m,
                n: v.n,
                p: v.p,
                alpha: alpha_text(v),
                bit_disjoint: v.bit_disjoint,
                verdict: v.trank.name(),
                reasons: reason_list(v),
            })
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn table_plain(rows: &[Verdict]) -> String {
    let mut out = format!(
        "{:>3} {:>3} {:>5} {:>20} {:>5} {:<8} {}\n",
        "m", "n", "p", "alpha", "disj", "verdict", "reasons"
    );
    for v in rows {
        out.push_str(&format!(
            "{:>3} {:>3} {:>5} {:>20} {:>5} {:<8} {}\n",
            v.m,
            v.n,
            v.p,
            alpha_text(v),
            v.bit_disjoint,
            v.trank.name(),
            reason_list(v)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Domain("x".into())), EXIT_DOMAIN);
        assert_eq!(exit_code(&Error::Resource("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Internal("x".into())), EXIT_NUMERICAL);
    }

    #[test]
    fn header_keeps_result_fields() {
        let v = with_header("alpha", 4, json!({ "alpha": 3 }));
        assert_eq!(v["seed"], 4);
        assert_eq!(v["alpha"], 3);
        assert_eq!(with_header("x", 0, json!(5))["result"], 5);
    }

    #[test]
    fn csv_rows() {
        let rows = theorem_table(3, 4).unwrap();
        assert_eq!(
            table_csv(&rows).unwrap(),
            "m,n,p,alpha,bit_disjoint,verdict,reasons\n\
             3,3,5,2,false,PLURAL,BIT_DISJOINT_FAIL;ALPHA_LT_P\n\
             3,4,7,2,false,PLURAL,BIT_DISJOINT_FAIL;ALPHA_LT_P\n"
        );
    }
}

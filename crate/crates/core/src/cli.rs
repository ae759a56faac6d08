//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 a mathematical property was
//! violated, 3 runtime failure.

use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::ensemble::WignerMatrix;
use crate::entry_laws::EntryLaw;
use crate::experiments::{
    fit_rate, parse_list, parse_scalar, parse_settings, run_delta_sweep, run_inequality_sweep, run_stieltjes_sweep,
    write_atomic, write_csv, write_delta_outputs, write_json, write_stieltjes_outputs, ConfigError, ExperimentConfig,
    ExperimentError, IdentityRow, Settings, SUMMARY_SCHEMA,
};
use crate::resolvent_lab::identity_suite;
use crate::spectral::{eigenvalues, kolmogorov_distance, StepCdf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Largest algebraic residual tolerated by `identity-check`.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;
/// Largest `|m_n(eigenvalues) - (1/n) Tr R|` tolerated by `identity-check`.
pub const CROSS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "wigner-lab", version, about = "Monte-Carlo laboratory for Wigner random matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one matrix and store it in the binary matrix format
    Sample(CommonArgs),
    /// Eigenvalues of one matrix as a `lambda` CSV column
    Spectrum(CommonArgs),
    /// Kolmogorov distance to the semicircle law across n, with a log-log rate fit
    Delta(CommonArgs),
    /// Replica-averaged Stieltjes transform against the semicircle over the spectral domain
    StieltjesScan(CommonArgs),
    /// Refit the rate from an existing delta_scan.csv in --out
    RateFit(CommonArgs),
    /// Exact resolvent identities at machine precision
    IdentityCheck(CommonArgs),
    /// Moment inequality for off-diagonal quadratic forms
    InequalityCheck(InequalityArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Entry law: rademacher, gaussian or pareto:<beta> (beta > 4) [required for sample, spectrum, delta, stieltjes-scan]
    #[arg(long)]
    pub law: Option<String>,
    /// Truncate entries at D n^alpha, alpha = 2/(4+kappa), then restandardize; form D=<d>,kappa=<k> [default: off]
    #[arg(long)]
    pub truncate: Option<String>,
    /// Truncation constant D (dimensionless); enables truncation [default: 1]
    #[arg(long = "d-const")]
    pub d_const: Option<String>,
    /// Moment excess kappa in (0, 4]; enables truncation [default: 0.5]
    #[arg(long)]
    pub kappa: Option<String>,
    /// Matrix dimensions, comma separated and increasing [default: 100,200,400; identity-check 64]
    #[arg(long)]
    pub n: Option<String>,
    /// Replicas per dimension, one value or one per n [default: 1000; identity-check 1]
    #[arg(long)]
    pub replicas: Option<String>,
    /// Base seed (64-bit integer) [default: 0]
    #[arg(long)]
    pub seed: Option<String>,
    /// Spectral parameters a+bi with b > 0, comma separated [default: 2i,1+0.05i]
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// Domain grid <n_u>x<n_v> [default: 21x8]
    #[arg(long)]
    pub grid: Option<String>,
    /// Domain constant A0, with v0 = A0/n [default: 2]
    #[arg(long)]
    pub a0: Option<String>,
    /// Domain constant a, with eps^(3/2) = 2 v0 a [default: 1]
    #[arg(long)]
    pub a: Option<String>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    pub threads: Option<String>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out: Option<String>,
    /// Flat key = value file; explicit flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InequalityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Moment orders, even and at least 4 [default: 4,6]
    #[arg(long)]
    pub q: Option<String>,
    /// Random coefficient matrices per dimension [default: 5]
    #[arg(long)]
    pub matrices: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Violation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Violation(_) => EXIT_VIOLATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Parses `a+bi`, `a-bi`, `bi`, `i` or a plain real number.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("`{text}` is not a complex number of the form a+bi");
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => s.parse::<f64>().map_err(|_| err())?,
    };
    let re = re.parse::<f64>().map_err(|_| err())?;
    Ok(Complex64::new(re, im))
}

fn settings_from(args: &CommonArgs) -> Result<Settings, CliError> {
    let mut settings = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
            parse_settings(&text).map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?
        }
        None => Settings::new(),
    };
    let flags = [
        ("law", &args.law),
        ("truncate", &args.truncate),
        ("d_const", &args.d_const),
        ("kappa", &args.kappa),
        ("n_values", &args.n),
        ("replicas_per_n", &args.replicas),
        ("base_seed", &args.seed),
        ("z", &args.z),
        ("grid", &args.grid),
        ("a0", &args.a0),
        ("a", &args.a),
        ("threads", &args.threads),
        ("output_dir", &args.out),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            settings.insert(key, v.clone());
        }
    }
    Ok(settings)
}

fn config_for(settings: &Settings, default_law: Option<EntryLaw>, what: &str) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::from_settings(settings, default_law).map_err(|e| match e {
        ConfigError::Missing("law") => CliError::Usage(format!("{what} requires --law (rademacher, gaussian or pareto:<beta>)")),
        other => other.into(),
    })
}

fn z_values(settings: &Settings) -> Result<Vec<Complex64>, CliError> {
    let raw = settings.get("z").map(String::as_str).unwrap_or("2i,1+0.05i");
    raw.split(',')
        .map(|s| {
            let z = parse_complex(s).map_err(|e| CliError::Usage(format!("--z: {e}")))?;
            if z.im > 0.0 {
                Ok(z)
            } else {
                Err(CliError::Usage(format!("--z: {s} must have positive imaginary part")))
            }
        })
        .collect()
}

fn single_n(cfg: &ExperimentConfig, what: &str) -> Result<usize, CliError> {
    match cfg.n_values.as_slice() {
        [n] => Ok(*n),
        _ => Err(CliError::Usage(format!("{what} takes exactly one --n"))),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn cmd_sample(args: &CommonArgs) -> Result<String, CliError> {
    let settings = settings_from(args)?;
    let cfg = config_for(&settings, None, "sample")?;
    let n = single_n(&cfg, "sample")?;
    let w = WignerMatrix::build(n, cfg.law, cfg.base_seed, cfg.trunc).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let path = cfg.output_dir.join(format!("matrix_n{n}_seed{}.wgnr", cfg.base_seed));
    let mut buf = Vec::new();
    w.write_to(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(&path, &buf)?;
    Ok(format!("sample n={n} law={} seed={} frobenius^2/n={:.6} -> {}", cfg.law, cfg.base_seed, w.frobenius_sq() / n as f64, path.display()))
}

#[derive(serde::Serialize)]
struct LambdaRow {
    lambda: f64,
}

fn cmd_spectrum(args: &CommonArgs) -> Result<String, CliError> {
    let settings = settings_from(args)?;
    let cfg = config_for(&settings, None, "spectrum")?;
    let n = single_n(&cfg, "spectrum")?;
    let w = WignerMatrix::build(n, cfg.law, cfg.base_seed, cfg.trunc).map_err(|e| CliError::Runtime(e.to_string()))?;
    let spec = eigenvalues(&w).map_err(|e| CliError::Runtime(e.to_string()))?;
    let rows: Vec<LambdaRow> = spec.eigenvalues().iter().map(|&lambda| LambdaRow { lambda }).collect();
    let path = cfg.output_dir.join("spectrum.csv");
    write_csv(&path, &rows)?;
    let delta = kolmogorov_distance(&StepCdf::from_spectrum(&spec));
    let vals = spec.eigenvalues();
    Ok(format!(
        "spectrum n={n} law={} seed={} min={:.6} max={:.6} ks={:.6} -> {}",
        cfg.law,
        cfg.base_seed,
        vals[0],
        vals[n - 1],
        delta,
        path.display()
    ))
}

fn cmd_delta(args: &CommonArgs) -> Result<String, CliError> {
    let settings = settings_from(args)?;
    let cfg = config_for(&settings, None, "delta")?;
    let sweep = run_delta_sweep(&cfg)?;
    write_delta_outputs(&cfg, &sweep)?;
    let weak = sweep.insufficient_replicas();
    if !weak.is_empty() {
        eprintln!("warning: InsufficientReplicas: bootstrap stderr exceeds delta/5 at n = {weak:?}");
    }
    let deltas: Vec<String> = sweep.rows.iter().map(|r| format!("{}:{:.3e}", r.n, r.delta_hat)).collect();
    let fit = match &sweep.fit {
        Ok(f) => format!("slope={:.4}+-{:.4}", f.slope, f.slope_stderr),
        Err(e) => format!("slope=undefined ({e})"),
    };
    Ok(format!("delta law={} {} {fit} -> {}", cfg.law, deltas.join(" "), cfg.output_dir.join("delta_scan.csv").display()))
}

fn cmd_stieltjes(args: &CommonArgs) -> Result<String, CliError> {
    let settings = settings_from(args)?;
    let cfg = config_for(&settings, None, "stieltjes-scan")?;
    let sweep = run_stieltjes_sweep(&cfg)?;
    write_stieltjes_outputs(&cfg, &sweep)?;
    let c: Vec<String> = sweep.c_hat.iter().map(|(n, c)| format!("C({n})={c:.4}")).collect();
    Ok(format!("stieltjes-scan law={} {} -> {}", cfg.law, c.join(" "), cfg.output_dir.join("stieltjes_scan.csv").display()))
}

#[derive(serde::Deserialize)]
struct DeltaCsvRow {
    n: usize,
    delta_hat: f64,
}

fn cmd_rate_fit(args: &CommonArgs) -> Result<String, CliError> {
    let settings = settings_from(args)?;
    let dir = PathBuf::from(settings.get("output_dir").map(String::as_str).unwrap_or("."));
    let path = dir.join("delta_scan.csv");
    let file = File::open(&path).map_err(io_err(&path))?;
    let points: Vec<(usize, f64)> = csv::Reader::from_reader(file)
        .deserialize::<DeltaCsvRow>()
        .map(|r| r.map(|r| (r.n, r.delta_hat)))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let fit = fit_rate(&points).map_err(|e| CliError::Usage(e.to_string()))?;
    #[derive(serde::Serialize)]
    struct Out<'a> {
        schema: u32,
        kind: &'static str,
        fit: &'a crate::experiments::RateFit,
    }
    write_json(&dir.join("rate_fit.json"), &Out { schema: SUMMARY_SCHEMA, kind: "rate_fit", fit: &fit })?;
    Ok(format!("rate-fit points={} slope={:.4}+-{:.4} intercept={:.4}", points.len(), fit.slope, fit.slope_stderr, fit.intercept))
}

fn cmd_identity(args: &CommonArgs) -> Result<String, CliError> {
    let mut settings = settings_from(args)?;
    settings.entry("n_values").or_insert_with(|| "64".into());
    settings.entry("replicas_per_n").or_insert_with(|| "1".into());
    let cfg = config_for(&settings, Some(EntryLaw::gaussian()), "identity-check")?;
    let zs = z_values(&settings)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut worst_cross = 0.0f64;
    let mut violations = 0usize;
    for (i, &n) in cfg.n_values.iter().enumerate() {
        for r in 0..cfg.replicas_per_n[i] {
            let seed = cfg.replica_seed(i, r);
            let w = WignerMatrix::build(n, cfg.law, seed, cfg.trunc).map_err(|e| CliError::Runtime(e.to_string()))?;
            for &z in &zs {
                let report = identity_suite(&w, z).map_err(|e| CliError::Runtime(e.to_string()))?;
                worst = worst.max(report.max_residual());
                worst_cross = worst_cross.max(report.stieltjes_cross);
                violations += report.eps4_violations;
                rows.push(IdentityRow::from_report(seed, &report));
            }
        }
    }
    let path = cfg.output_dir.join("identity_report.csv");
    write_csv(&path, &rows)?;
    let line = format!(
        "identity-check law={} cases={} max_residual={worst:.3e} stieltjes_cross={worst_cross:.3e} eps4_violations={violations} -> {}",
        cfg.law,
        rows.len(),
        path.display()
    );
    if worst > IDENTITY_TOLERANCE || worst_cross > CROSS_TOLERANCE || violations > 0 || !worst.is_finite() {
        return Err(CliError::Violation(line));
    }
    Ok(line)
}

fn cmd_inequality(args: &InequalityArgs) -> Result<String, CliError> {
    let mut settings = settings_from(&args.common)?;
    if let Some(q) = &args.q {
        settings.insert("q", q.clone());
    }
    if let Some(m) = &args.matrices {
        settings.insert("matrices", m.clone());
    }
    let law = match settings.get("law") {
        Some(v) => v.parse::<EntryLaw>().map_err(|e| CliError::Usage(format!("--law: {e}")))?,
        None => EntryLaw::rademacher(),
    };
    let dims: Vec<usize> = parse_list("n_values", settings.get("n_values").map(String::as_str).unwrap_or("4,6,8,10"))?;
    let qs: Vec<u32> = parse_list("q", settings.get("q").map(String::as_str).unwrap_or("4,6"))?;
    if let Some(&q) = qs.iter().find(|&&q| q < 4 || q % 2 != 0) {
        return Err(CliError::Usage(format!("--q: {q} must be even and at least 4")));
    }
    let matrices: usize = parse_scalar("matrices", settings.get("matrices").map(String::as_str).unwrap_or("5"))?;
    let samples: usize = parse_scalar("replicas_per_n", settings.get("replicas_per_n").map(String::as_str).unwrap_or("100000"))?;
    let seed: u64 = parse_scalar("base_seed", settings.get("base_seed").map(String::as_str).unwrap_or("0"))?;
    let threads: usize = match settings.get("threads") {
        Some(t) => parse_scalar("threads", t)?,
        None => crate::experiments::default_threads(),
    };
    let out = PathBuf::from(settings.get("output_dir").map(String::as_str).unwrap_or("."));
    let rows = run_inequality_sweep(law, &dims, &qs, matrices, samples, seed, threads)?;
    let path = out.join("inequality_report.csv");
    write_csv(&path, &rows)?;
    let misses = rows.iter().filter(|r| !r.within_three_sigma()).count();
    let k_max = rows.iter().filter_map(|r| r.k_hat).fold(0.0, f64::max);
    let line = format!("inequality-check law={law} cases={} outside_3se={misses} max_k_hat={k_max:.4} -> {}", rows.len(), path.display());
    if misses > 0 {
        return Err(CliError::Violation(line));
    }
    Ok(line)
}

/// Runs one command; the summary line goes to stdout.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Delta(a) => cmd_delta(a),
        Command::StieltjesScan(a) => cmd_stieltjes(a),
        Command::RateFit(a) => cmd_rate_fit(a),
        Command::IdentityCheck(a) => cmd_identity(a),
        Command::InequalityCheck(a) => cmd_inequality(a),
    }
}

/// Parses `argv` (including the program name), runs it and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            EXIT_OK
        }
        Err(e) => {
            let code = e.exit_code();
            match e {
                CliError::Usage(m) => eprintln!("usage error: {m}"),
                CliError::Violation(m) => {
                    println!("{m}");
                    eprintln!("property violation: tolerance exceeded");
                }
                CliError::Runtime(m) => eprintln!("error: {m}"),
            }
            code
        }
    }
}

//! Command implementations behind the `collective-chsh` binary.
//!
//! Every command returns an [`Outcome`] holding the exit code and the text
//! destined for stdout/stderr, so the commands can be tested without
//! spawning a process. Output files (sweep CSV, gnuplot companion, run
//! manifests) are written by the commands themselves.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure (or a failed
//! verification, or a crossover that was not found).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use collective_chsh::oracle::{run_equivalence_suite_with, run_invariance_suite, InvarianceReport};
use collective_chsh::protocol::{reduce_pairs, tie_partner_rows, werner_pairs, xor_rows, RowPair};
use collective_chsh::{
    correlation_matrix, crossover, horodecki_bound, maximize_bound, sweep, EquivalenceReport,
    Error, OptimizationConfig, SingletFraction, SweepStrategy, TwoQubitDensity,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Environment variable holding the worker thread count (advisory).
pub const THREADS_ENV: &str = "CHSH_THREADS";

pub const MAX_CLI_PAIRS: usize = 5;

/// Value printed in the literature for five pairs at `x = 1/2`, which the
/// reduction does not reproduce; the bound output carries a note about it.
const PRINTED_N5_VALUE: f64 = 2.0087;

#[derive(Debug, Parser)]
#[command(
    name = "collective-chsh",
    version,
    about = "Collective CHSH tests on Werner pairs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximal CHSH value of the post-selected pair for one (n, x).
    Bound(BoundArgs),
    /// Bound over a grid of pair counts and singlet fractions, as CSV.
    Sweep(SweepArgs),
    /// Smallest x where optimized rows beat the XOR rows.
    Crossover(CrossoverArgs),
    /// Run the oracle equivalence and invariance suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Xor,
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    /// Number of Werner pairs (1 to 5).
    #[arg(long)]
    pub pairs: usize,
    /// Singlet fraction in [0, 1].
    #[arg(long)]
    pub x: f64,
    #[arg(long, value_enum, default_value = "xor")]
    pub strategy: Strategy,
    /// Random restarts for the optimizer (the XOR warm start is extra).
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write a run manifest to this path.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Comma-separated pair counts, e.g. 1,2,3,4.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pairs: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub x_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub x_step: f64,
    #[arg(long, value_enum, default_value = "xor")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination. A gnuplot `.dat` companion and a
    /// `.manifest.json` are written next to it. Without it the CSV goes to
    /// stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrossoverArgs {
    /// Number of pairs; 3 and 4 have a crossover, 2 is a diagnostic run.
    #[arg(long)]
    pub pairs: usize,
    /// Margin by which a restart must beat the XOR bound.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 128)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub cases: usize,
    /// Flip a sign in the fast reduction to check that the suite notices.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn usage(msg: impl Into<String>) -> Self {
        Outcome {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {}\n", msg.into()),
        }
    }

    fn from_error(e: &Error) -> Self {
        let code = match e {
            Error::SingletFractionDomain(_) | Error::PairCount { .. } | Error::Precondition(_) => {
                EXIT_USAGE
            }
            _ => EXIT_NUMERICAL,
        };
        Outcome {
            code,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        }
    }
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub wall_time_seconds: f64,
    /// SHA-256 of the output the manifest describes.
    pub output_sha256: String,
    pub note: Option<String>,
}

impl RunManifest {
    fn new<P: Serialize>(
        command: &str,
        params: &P,
        seed: u64,
        started: Instant,
        output: &[u8],
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            params: serde_json::to_value(params).unwrap_or(serde_json::Value::Null),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            output_sha256: sha256_hex(output),
            note: None,
        }
    }

    fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, to_json(self))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// Fixed-point rendering with at least ten significant digits; zero is
/// printed with ten decimals.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return "NA".into();
    }
    let decimals = if v == 0.0 {
        10
    } else {
        (9 - v.abs().log10().floor() as i32).max(1) as usize
    };
    format!("{v:.decimals$}")
}

/// Applies the thread count from [`THREADS_ENV`], if set and valid. Later
/// calls, or a global pool built elsewhere, leave the pool as it is.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// Parses `args` (program name first) and runs the command. Help and
/// version requests exit 0; every other parse failure is a usage error.
pub fn run_from_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome::ok(text)
            }
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Bound(a) => cmd_bound(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Crossover(a) => cmd_crossover(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub x: f64,
    pub strategy: Strategy,
    /// `xor`, or the optimizer's `xor_equivalent` / `general`.
    pub strategy_label: String,
    pub bound: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub success_prob: f64,
    pub violation: bool,
    pub xor_bound: f64,
    pub seed: u64,
    pub restarts: Option<usize>,
    pub note: Option<String>,
}

fn check_pairs(n: usize) -> Result<(), Outcome> {
    if (1..=MAX_CLI_PAIRS).contains(&n) {
        Ok(())
    } else {
        Err(Outcome::usage(format!(
            "--pairs must be between 1 and {MAX_CLI_PAIRS}, got {n}"
        )))
    }
}

fn config(restarts: usize, seed: u64) -> OptimizationConfig {
    OptimizationConfig {
        restarts,
        seed,
        ..OptimizationConfig::default()
    }
}

fn xor_pipeline(n: usize, x: SingletFraction) -> collective_chsh::Result<(f64, f64, f64)> {
    let u = xor_rows(n)?;
    let v = tie_partner_rows(&u);
    let reduced = reduce_pairs(&werner_pairs(n, x), &u, &v)?;
    let bell = horodecki_bound(&correlation_matrix(&reduced.rho_new)?);
    Ok((bell.bound, bell.m_value, reduced.success_probability))
}

fn n5_note(n: usize, x: f64, bound: f64) -> Option<String> {
    (n == 5 && (x - 0.5).abs() < 1e-12).then(|| {
        format!(
            "computed bound {} differs from the printed value {PRINTED_N5_VALUE} by {}; \
             the computed value is reported as is",
            format_number(bound),
            format_number(PRINTED_N5_VALUE - bound),
        )
    })
}

pub fn bound_report(args: &BoundArgs) -> Result<BoundReport, Outcome> {
    check_pairs(args.pairs)?;
    let x = SingletFraction::new(args.x).map_err(|e| Outcome::from_error(&e))?;
    let n = args.pairs;
    let xor_bound =
        collective_chsh::xor_bound_closed_form(n, x).map_err(|e| Outcome::from_error(&e))?;
    let (label, bound, m, success_prob, restarts) = match args.strategy {
        Strategy::Xor => {
            let (b, m, p) = xor_pipeline(n, x).map_err(|e| Outcome::from_error(&e))?;
            ("xor".to_string(), b, m, p, None)
        }
        Strategy::Optimize => {
            let r = maximize_bound(n, x, &config(args.restarts, args.seed))
                .map_err(|e| Outcome::from_error(&e))?;
            (
                r.strategy_label.as_str().to_string(),
                r.bell.bound,
                r.bell.m_value,
                r.success_probability,
                Some(args.restarts),
            )
        }
    };
    Ok(BoundReport {
        n,
        x: args.x,
        strategy: args.strategy,
        strategy_label: label,
        bound,
        m,
        success_prob,
        violation: bound > 2.0,
        xor_bound,
        seed: args.seed,
        restarts,
        note: n5_note(n, args.x, bound),
    })
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn cmd_bound(args: &BoundArgs) -> Outcome {
    let started = Instant::now();
    let report = match bound_report(args) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let text = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(
            &[
                "n",
                "x",
                "strategy",
                "bound",
                "M",
                "success_prob",
                "violation",
            ],
            &[vec![
                report.n.to_string(),
                format_number(report.x),
                report.strategy_label.clone(),
                format_number(report.bound),
                format_number(report.m),
                format_number(report.success_prob),
                report.violation.to_string(),
            ]],
        ),
    };
    if let Some(path) = &args.manifest {
        let mut manifest = RunManifest::new("bound", args, args.seed, started, text.as_bytes());
        manifest.note = report.note.clone();
        if let Err(e) = manifest.write(path) {
            return Outcome::usage(format!("cannot write manifest {}: {e}", path.display()));
        }
    }
    Outcome::ok(text)
}

/// `x_min, x_min + step, …` up to `x_max` (inclusive within 1e-9), each
/// rounded to 12 decimals so the grid prints cleanly.
pub fn x_grid(x_min: f64, x_max: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(x_min.is_finite() && x_max.is_finite() && step.is_finite()) {
        return Err("grid bounds must be finite".into());
    }
    if !(0.0 <= x_min && x_min < x_max && x_max <= 1.0) {
        return Err(format!(
            "need 0 <= x-min < x-max <= 1, got {x_min} and {x_max}"
        ));
    }
    if step <= 0.0 {
        return Err(format!("x-step must be positive, got {step}"));
    }
    let count = ((x_max - x_min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| (((x_min + i as f64 * step) * 1e12).round() / 1e12).min(x_max))
        .collect())
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLine {
    pub n: usize,
    pub x: f64,
    pub strategy: String,
    /// `None` when the optimizer failed for this cell.
    pub bound: Option<f64>,
    pub success_prob: Option<f64>,
}

impl SweepLine {
    fn record(&self) -> Vec<String> {
        let na = || "NA".to_string();
        vec![
            self.n.to_string(),
            format_number(self.x),
            self.strategy.clone(),
            self.bound.map_or_else(na, format_number),
            self.success_prob.map_or_else(na, format_number),
            self.bound.map_or_else(na, |b| (b > 2.0).to_string()),
        ]
    }
}

pub const SWEEP_HEADER: [&str; 6] = ["n", "x", "strategy", "bound", "success_prob", "violation"];

pub fn sweep_lines(args: &SweepArgs) -> Result<Vec<SweepLine>, Outcome> {
    let mut ns = args.pairs.clone();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        check_pairs(n)?;
    }
    let xs = x_grid(args.x_min, args.x_max, args.x_step).map_err(Outcome::usage)?;
    let strategy = match args.strategy {
        Strategy::Xor => SweepStrategy::Xor,
        Strategy::Optimize => SweepStrategy::Optimize,
    };
    let rows = sweep(&ns, &xs, &config(args.restarts, args.seed), strategy)
        .map_err(|e| Outcome::from_error(&e))?;
    Ok(rows
        .into_iter()
        .map(|r| match r.optimized {
            None => SweepLine {
                n: r.n,
                x: r.x,
                strategy: "xor".into(),
                bound: Some(r.xor_bound),
                success_prob: Some(r.xor_success_probability),
            },
            Some(Ok(p)) => SweepLine {
                n: r.n,
                x: r.x,
                strategy: p.strategy_label.as_str().into(),
                bound: Some(p.bound),
                success_prob: Some(p.success_probability),
            },
            Some(Err(_)) => SweepLine {
                n: r.n,
                x: r.x,
                strategy: "optimize".into(),
                bound: None,
                success_prob: None,
            },
        })
        .collect())
}

/// Gnuplot data: one `x bound` block per pair count, blocks separated by
/// two blank lines so `index` selects them.
pub fn gnuplot_text(lines: &[SweepLine]) -> String {
    let mut out = String::new();
    let mut current = None;
    for l in lines {
        if current != Some(l.n) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# n={}\n# x bound\n", l.n));
            current = Some(l.n);
        }
        let b = l.bound.map_or_else(|| "NaN".to_string(), format_number);
        out.push_str(&format!("{} {}\n", format_number(l.x), b));
    }
    out
}

fn companion(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

/// Gnuplot companion path for a sweep written to `out`.
pub fn dat_path(out: &Path) -> PathBuf {
    companion(out, ".dat")
}

/// Manifest path for a sweep written to `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    companion(out, ".manifest.json")
}

pub fn cmd_sweep(args: &SweepArgs) -> Outcome {
    let started = Instant::now();
    let lines = match sweep_lines(args) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let records: Vec<Vec<String>> = lines.iter().map(SweepLine::record).collect();
    let csv = csv_text(&SWEEP_HEADER, &records);
    let Some(out) = &args.out else {
        return Outcome::ok(csv);
    };

    let dat = dat_path(out);
    let manifest = manifest_path(out);
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty());
    let written = parent
        .map_or(Ok(()), std::fs::create_dir_all)
        .and_then(|_| std::fs::write(out, &csv))
        .and_then(|_| std::fs::write(&dat, gnuplot_text(&lines)))
        .and_then(|_| {
            RunManifest::new("sweep", args, args.seed, started, csv.as_bytes()).write(&manifest)
        });
    if let Err(e) = written {
        return Outcome::usage(format!("cannot write sweep output: {e}"));
    }
    let failed = lines.iter().filter(|l| l.bound.is_none()).count();
    Outcome {
        code: EXIT_OK,
        stdout: format!(
            "wrote {} rows to {} ({} NA); companions {} and {}\n",
            lines.len(),
            out.display(),
            failed,
            dat.display(),
            manifest.display()
        ),
        stderr: String::new(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossoverReport {
    pub n: usize,
    pub x_star: Option<f64>,
    /// Largest probed x where no restart beat XOR.
    pub lower: f64,
    pub resolution: f64,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub probes: Vec<(f64, bool)>,
}

pub fn cmd_crossover(args: &CrossoverArgs) -> Outcome {
    if !(2..=MAX_CLI_PAIRS).contains(&args.pairs) {
        return Outcome::usage(format!("--pairs must be between 2 and {MAX_CLI_PAIRS}"));
    }
    let c = match crossover(args.pairs, &config(args.restarts, args.seed), args.tol) {
        Ok(c) => c,
        Err(e) => return Outcome::from_error(&e),
    };
    let found = c.x_star.is_some();
    let report = CrossoverReport {
        n: c.n,
        x_star: c.x_star,
        lower: c.lower,
        resolution: c.resolution,
        restarts: args.restarts,
        seed: args.seed,
        tol: args.tol,
        probes: c.probes,
    };
    Outcome {
        code: if found { EXIT_OK } else { EXIT_NUMERICAL },
        stdout: to_json(&report),
        stderr: if found {
            String::new()
        } else {
            format!("no crossover found for n={}\n", args.pairs)
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub cases: usize,
    pub passed: bool,
    pub fault_injected: bool,
    pub equivalence: EquivalenceReport,
    pub invariance: InvarianceReport,
}

fn corrupted_reduce(
    pairs: &[TwoQubitDensity],
    u: &RowPair,
    v: &RowPair,
) -> collective_chsh::Result<collective_chsh::ReducedState> {
    let mut r = reduce_pairs(pairs, u, v)?;
    let mut e = *r.rho_new.entries();
    e[1][2] = -e[1][2];
    e[2][1] = -e[2][1];
    r.rho_new = TwoQubitDensity::from_entries_unchecked(e);
    Ok(r)
}

pub fn cmd_verify(args: &VerifyArgs) -> Outcome {
    if args.cases == 0 {
        return Outcome::usage("--cases must be at least 1");
    }
    let equivalence = if args.inject_fault {
        run_equivalence_suite_with(args.seed, args.cases, &corrupted_reduce)
    } else {
        run_equivalence_suite_with(args.seed, args.cases, &reduce_pairs)
    };
    let result = equivalence.and_then(|eq| Ok((eq, run_invariance_suite(args.seed, args.cases)?)));
    let (equivalence, invariance) = match result {
        Ok(r) => r,
        Err(e) => return Outcome::from_error(&e),
    };
    let passed = equivalence.passed() && invariance.passed();
    let report = VerifyReport {
        seed: args.seed,
        cases: args.cases,
        passed,
        fault_injected: args.inject_fault,
        equivalence,
        invariance,
    };
    Outcome {
        code: if passed { EXIT_OK } else { EXIT_NUMERICAL },
        stdout: to_json(&report),
        stderr: String::new(),
    }
}

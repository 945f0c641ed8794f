//! `sync`: generate synthetic synchronization problems, solve them, run
//! parameter sweeps and leave-one-out diagnostics.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors. Block
//! indices and anchors are 1-based on the command line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};

use groupsync::diagnostics::{davis_kahan_residual, sample_indices, LooContext, LOO_CSV_HEADER};
use groupsync::expt::{run_sweep, write_outputs, SweepConfig};
use groupsync::metrics::{evaluate, REPORT_CSV_HEADER};
use groupsync::{
    generate_od, generate_pm, read_block_matrix, read_group_tuple, solve_orthogonal, solve_permutation, stack_identity,
    write_block_matrix, write_group_tuple, EigenOptions, SyncError, SyncProblem,
};

#[derive(Parser, Debug)]
#[command(name = "sync", version, about = "Spectral group synchronization toolkit")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print per-cell / per-index detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic problem and write it to files.
    Gen(GenArgs),
    /// Recover group elements from a measurement matrix file.
    Solve(SolveArgs),
    /// Run a Monte-Carlo sweep described by a TOML config.
    Sweep(SweepArgs),
    /// Leave-one-out diagnostics on a generated instance.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    Od,
    Pm,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Noise level (od).
    #[arg(long)]
    sigma: Option<f64>,
    /// Clean-measurement probability (pm).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Haar-random ground truth (od).
    #[arg(long)]
    haar: bool,
    /// Random ground-truth permutations (pm).
    #[arg(long)]
    scramble: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Measurement matrix output.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth tuple output.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// 1-based anchor block.
    #[arg(long, default_value_t = 1)]
    anchor: usize,
    /// Estimated tuple output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth tuple; enables the recovery metrics.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the recovery report as a CSV row (needs --truth).
    #[arg(long, requires = "truth")]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// TOML sweep configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in grid: od-full, pm-full-d5, pm-full-d10, od-desk, pm-desk.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    rows: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    plots: Option<PathBuf>,
    /// Also write SVG heatmaps into the plot directory.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `all` or `sample:<k>`.
    #[arg(long, default_value = "all")]
    indices: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

enum CliError {
    Usage(String),
    Runtime(SyncError),
}

impl From<SyncError> for CliError {
    fn from(e: SyncError) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(SyncError::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            return usage_failure(&cli, "--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep(args, cli.verbose),
        Command::Diagnose(args) => diagnose(args, cli.verbose),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => usage_failure(&cli, &msg),
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn usage_failure(cli: &Cli, msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n");
    let mut cmd = Cli::command();
    let name = match cli.command {
        Command::Gen(_) => "gen",
        Command::Solve(_) => "solve",
        Command::Sweep(_) => "sweep",
        Command::Diagnose(_) => "diagnose",
    };
    let sub = cmd.find_subcommand_mut(name).expect("subcommand exists");
    eprintln!("{}", sub.render_usage());
    ExitCode::from(1)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn build_problem(m: &ModelArgs) -> CliResult<SyncProblem> {
    if m.n == 0 || m.d == 0 {
        return Err(CliError::Usage("--n and --d must be positive".into()));
    }
    let problem = match m.model {
        Model::Od => {
            let sigma = m.sigma.ok_or_else(|| CliError::Usage("--model od needs --sigma".into()))?;
            if m.p.is_some() || m.scramble {
                return Err(CliError::Usage("--p and --scramble apply to --model pm".into()));
            }
            generate_od(m.n, m.d, sigma, m.seed, m.haar)?
        }
        Model::Pm => {
            let p = m.p.ok_or_else(|| CliError::Usage("--model pm needs --p".into()))?;
            if m.sigma.is_some() || m.haar {
                return Err(CliError::Usage("--sigma and --haar apply to --model od".into()));
            }
            generate_pm(m.n, m.d, p, m.seed, m.scramble)?
        }
    };
    Ok(problem)
}

fn gen(args: &GenArgs) -> CliResult<()> {
    let problem = build_problem(&args.model)?;
    write_block_matrix(&problem.observed, create(&args.out)?)?;
    print!("wrote {}", args.out.display());
    if let Some(path) = &args.truth_out {
        write_group_tuple(&problem.truth, create(path)?)?;
        print!(" and {}", path.display());
    }
    println!();
    Ok(())
}

fn solve(args: &SolveArgs) -> CliResult<()> {
    let a = read_block_matrix(open(&args.input)?)?;
    if a.d() != args.d {
        return Err(CliError::Usage(format!("--d {} does not match the matrix block size {}", args.d, a.d())));
    }
    if args.anchor == 0 || args.anchor > a.n() {
        return Err(CliError::Usage(format!("--anchor must lie in 1..={}", a.n())));
    }
    let truth = match &args.truth {
        Some(path) => Some(read_group_tuple(open(path)?)?),
        None => None,
    };
    let opts = EigenOptions { tol: args.tol, max_iter: args.max_iter };
    let anchor = args.anchor - 1;
    let start = Instant::now();
    let est = match args.model {
        Model::Od => solve_orthogonal(&a, &opts)?,
        Model::Pm => solve_permutation(&a, &opts, anchor)?,
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    if let Some(path) = &args.out {
        write_group_tuple(&est.estimates, create(path)?)?;
    }
    let Some(truth) = truth else {
        println!("n={} d={} lambda_d={:?}", a.n(), a.d(), est.basis.lambda_d());
        return Ok(());
    };
    let report = evaluate(&est, &truth, anchor, Some(runtime_ms))?;
    println!(
        "exact={} avg_alignment={:?} max_block_dev={:?} lambda_d={:?}",
        report.exact, report.avg_alignment, report.max_block_dev, report.lambda_d
    );
    if let Some(path) = &args.report {
        let model = match args.model {
            Model::Od => "od",
            Model::Pm => "pm",
        };
        // The matrix file does not carry κ, the noise level, trial or seed.
        let mut out = create(path)?;
        writeln!(out, "{REPORT_CSV_HEADER}")?;
        writeln!(
            out,
            "{model},{},{},,,,,{},{},{},{},{}",
            a.n(),
            a.d(),
            report.max_block_dev,
            report.exact,
            report.avg_alignment,
            report.lambda_d,
            runtime_ms
        )?;
        out.flush()?;
    }
    Ok(())
}

fn sweep(args: &SweepArgs, verbose: u8) -> CliResult<()> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!("config file {} not found", path.display())));
            }
            SweepConfig::from_file(path).map_err(|e| match e {
                SyncError::Config(msg) => CliError::Usage(format!("invalid config {}: {msg}", path.display())),
                other => CliError::Runtime(other),
            })?
        }
        (None, Some(name)) => SweepConfig::preset(name).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, None) => return Err(CliError::Usage("either --config or --preset is required".into())),
    };
    if let Some(p) = &args.rows {
        cfg.outputs.rows = Some(p.clone());
    }
    if let Some(p) = &args.summary {
        cfg.outputs.summary = Some(p.clone());
    }
    if let Some(p) = &args.plots {
        cfg.outputs.plots = Some(p.clone());
    }
    cfg.svg |= args.svg;

    let out = run_sweep(&cfg)?;
    write_outputs(&out, &cfg.outputs, cfg.svg)?;
    if verbose > 0 {
        for s in &out.summaries {
            println!(
                "n={} kappa={} mean_max_dev={:.4e} success_rate={} mean_alignment={:.4}{}",
                s.n,
                s.kappa,
                s.mean_max_dev,
                s.success_rate,
                s.mean_alignment,
                if s.clamped { " (p clamped)" } else { "" }
            );
        }
    }
    let failed = out.rows.iter().filter(|r| r.report.is_none()).count();
    let written: Vec<String> = [&cfg.outputs.rows, &cfg.outputs.summary, &cfg.outputs.plots]
        .into_iter()
        .flatten()
        .map(|p| p.display().to_string())
        .collect();
    println!(
        "cells={} trials={} failed={} outputs={}",
        out.summaries.len(),
        out.rows.len(),
        failed,
        if written.is_empty() { "none".to_string() } else { written.join(",") }
    );
    Ok(())
}

fn parse_indices(spec: &str, n: usize, seed: u64) -> CliResult<Vec<usize>> {
    if spec == "all" {
        return Ok((0..n).collect());
    }
    let k = spec
        .strip_prefix("sample:")
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k > 0)
        .ok_or_else(|| CliError::Usage(format!("--indices expects all or sample:<k>, got {spec:?}")))?;
    Ok(sample_indices(n, k, seed))
}

fn diagnose(args: &DiagnoseArgs, verbose: u8) -> CliResult<()> {
    let problem = build_problem(&args.model)?;
    let indices = parse_indices(&args.indices, problem.truth.n(), problem.seed)?;
    let opts = EigenOptions { tol: args.tol, ..EigenOptions::default() };
    let ctx = LooContext::from_problem(&problem, &opts)?;
    let reports = ctx.reports(&indices)?;

    if let Some(path) = &args.out {
        let mut out = create(path)?;
        writeln!(out, "{LOO_CSV_HEADER}")?;
        for r in &reports {
            writeln!(out, "{}", r.csv_fields())?;
        }
        out.flush()?;
    }
    if verbose > 0 {
        for r in &reports {
            println!("i={} lhs={:.4e} t1+t2+t3={:.4e}", r.i + 1, r.lhs, r.t1 + r.t2 + r.t3);
        }
    }
    let holds = reports.iter().filter(|r| r.decomposition_holds()).count();
    let gain = reports.iter().filter(|r| r.dist_phi_loo <= r.dist_phi_z).count();
    let z = stack_identity(problem.truth.n(), problem.truth.d());
    println!(
        "indices={} decomposition_holds={holds}/{} loo_closer_than_truth={gain}/{} davis_kahan_residual={:.4e} eta={:.4e}",
        reports.len(),
        reports.len(),
        reports.len(),
        davis_kahan_residual(ctx.basis(), &z)?,
        reports.first().map_or(f64::NAN, |r| r.eta)
    );
    Ok(())
}

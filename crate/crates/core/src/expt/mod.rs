//! Monte-Carlo sweeps over `(n, κ)` grids: generate, solve, measure, then
//! aggregate per cell and emit plot data.

mod config;
mod plot;

pub use config::{log_grid, CellParams, ModelKind, OutputPaths, SweepConfig};
pub use plot::{emit_plot_data, PlotFiles};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::blockmat::EigenOptions;
use crate::error::{Result, SyncError};
use crate::metrics::{evaluate, RecoveryReport, ReportRow, REPORT_CSV_HEADER};
use crate::models::{generate_od, generate_pm, mix_key, NoiseModel, SyncProblem};
use crate::sync::{solve_orthogonal, solve_permutation, SyncEstimate};

pub const SUMMARY_CSV_HEADER: &str =
    "n,kappa,trials,completed,mean_max_dev,q1,q2,q3,success_rate,mean_alignment,clamped";

/// Seed of one trial. Keyed by the κ value rather than its grid position, so
/// adding or removing grid cells leaves every other cell's draws unchanged.
pub fn trial_seed(base_seed: u64, model: ModelKind, n: usize, kappa: f64, trial: usize) -> u64 {
    mix_key(&[base_seed, model.tag(), n as u64, kappa.to_bits(), trial as u64])
}

/// Generates one instance of the configured model.
pub fn generate(cfg: &SweepConfig, n: usize, model: NoiseModel, seed: u64) -> Result<SyncProblem> {
    match model {
        NoiseModel::Od { sigma } => generate_od(n, cfg.d, sigma, seed, cfg.haar),
        NoiseModel::Pm { p } => generate_pm(n, cfg.d, p, seed, cfg.scramble),
    }
}

/// Runs the solver matching the model's group.
pub fn solve(problem: &SyncProblem, opts: &EigenOptions, anchor: usize) -> Result<SyncEstimate> {
    match problem.model {
        NoiseModel::Od { .. } => solve_orthogonal(&problem.observed, opts),
        NoiseModel::Pm { .. } => solve_permutation(&problem.observed, opts, anchor),
    }
}

/// Generate, solve and measure one trial. Timing covers the solve only.
pub fn run_trial(
    problem: &SyncProblem,
    opts: &EigenOptions,
    anchor: usize,
    record_timing: bool,
) -> Result<RecoveryReport> {
    let start = Instant::now();
    let est = solve(problem, opts, anchor)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    evaluate(&est, &problem.truth, anchor, record_timing.then_some(elapsed))
}

/// One `(n, κ)` cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub kappa: f64,
    pub trials: usize,
    /// Trials whose solve finished; failed trials are left out of the means.
    pub completed: usize,
    pub mean_max_dev: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Exact recoveries over all trials.
    pub success_rate: f64,
    pub mean_alignment: f64,
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    /// In `(n, κ, trial)` grid order.
    pub rows: Vec<ReportRow>,
    /// In `(n, κ)` grid order.
    pub summaries: Vec<CellSummary>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn summarize(n: usize, kappa: f64, clamped: bool, rows: &[ReportRow]) -> CellSummary {
    let done: Vec<&RecoveryReport> = rows.iter().filter_map(|r| r.report.as_ref()).collect();
    let mut devs: Vec<f64> = done.iter().map(|r| r.max_block_dev).collect();
    devs.sort_by(f64::total_cmp);
    let exact = done.iter().filter(|r| r.exact).count();
    CellSummary {
        n,
        kappa,
        trials: rows.len(),
        completed: done.len(),
        mean_max_dev: mean(&devs),
        q1: quantile(&devs, 0.25),
        q2: quantile(&devs, 0.5),
        q3: quantile(&devs, 0.75),
        success_rate: exact as f64 / rows.len().max(1) as f64,
        mean_alignment: mean(&done.iter().map(|r| r.avg_alignment).collect::<Vec<_>>()),
        clamped,
    }
}

/// Runs every trial of every cell in parallel; results are collected in grid
/// order. Solver errors become failed rows instead of aborting the sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let opts = EigenOptions { tol: cfg.tol, max_iter: cfg.max_iter };
    let anchor = cfg.anchor - 1;
    let mut jobs = Vec::new();
    for &n in &cfg.n_grid {
        for &kappa in &cfg.kappa_grid {
            for trial in 0..cfg.trials {
                jobs.push((n, kappa, trial));
            }
        }
    }
    let rows: Vec<ReportRow> = jobs
        .par_iter()
        .map(|&(n, kappa, trial)| {
            let cell = cfg.cell_params(n, kappa);
            let seed = trial_seed(cfg.base_seed, cfg.model, n, kappa, trial);
            let report = generate(cfg, n, cell.model, seed)
                .and_then(|problem| run_trial(&problem, &opts, anchor, cfg.record_timing))
                .ok();
            ReportRow {
                model: cfg.model.name(),
                n,
                d: cfg.d,
                kappa,
                noise_param: cell.model.parameter(),
                trial,
                seed,
                report,
            }
        })
        .collect();

    let summaries = rows
        .chunks(cfg.trials)
        .map(|chunk| {
            let (n, kappa) = (chunk[0].n, chunk[0].kappa);
            summarize(n, kappa, cfg.cell_params(n, kappa).clamped, chunk)
        })
        .collect();
    Ok(SweepOutput { rows, summaries })
}

/// Row CSV: the report header plus a final `status` column (`ok` or `failed`).
pub fn write_rows<W: Write>(rows: &[ReportRow], mut out: W) -> Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER},status")?;
    for row in rows {
        let status = if row.report.is_some() { "ok" } else { "failed" };
        writeln!(out, "{},{status}", row.csv_fields())?;
    }
    out.flush()?;
    Ok(())
}

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn write_summaries<W: Write>(summaries: &[CellSummary], mut out: W) -> Result<()> {
    writeln!(out, "{SUMMARY_CSV_HEADER}")?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.n,
            s.kappa,
            s.trials,
            s.completed,
            fmt_opt(s.mean_max_dev),
            fmt_opt(s.q1),
            fmt_opt(s.q2),
            fmt_opt(s.q3),
            s.success_rate,
            fmt_opt(s.mean_alignment),
            s.clamped
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes whichever of rows, summary and plot data have a path.
pub fn write_outputs(out: &SweepOutput, paths: &OutputPaths, svg: bool) -> Result<()> {
    let create = |p: &Path| -> Result<std::io::BufWriter<std::fs::File>> {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(std::io::BufWriter::new(std::fs::File::create(p)?))
    };
    if let Some(p) = &paths.rows {
        write_rows(&out.rows, create(p)?)?;
    }
    if let Some(p) = &paths.summary {
        write_summaries(&out.summaries, create(p)?)?;
    }
    if let Some(dir) = &paths.plots {
        if out.summaries.is_empty() {
            return Err(SyncError::Config("no summaries to plot".into()));
        }
        emit_plot_data(&out.summaries, dir, svg)?;
    }
    Ok(())
}

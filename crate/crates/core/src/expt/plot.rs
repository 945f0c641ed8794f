//! Plot data: error-vs-κ curves per `n` and `n × κ` heatmaps as CSV, plus
//! optional grayscale SVG heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::CellSummary;
use crate::error::{Result, SyncError};

/// Paths written by [`emit_plot_data`].
#[derive(Clone, Debug, Default)]
pub struct PlotFiles {
    pub curves: Vec<PathBuf>,
    pub heatmaps: Vec<PathBuf>,
    pub svgs: Vec<PathBuf>,
}

const SVG_CELL: usize = 24;
const SVG_MARGIN: usize = 60;

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn sorted_unique<T: PartialOrd + Copy>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("grid values are ordered"));
    out
}

/// Writes `curve_n<N>.csv` (`kappa,mean,q1,q2,q3`) for every `n`, and
/// `success_rate.csv` / `mean_alignment.csv` with `n` down the rows and `κ`
/// across the columns. Cells missing from the grid are left empty.
pub fn emit_plot_data(summaries: &[CellSummary], dir: &Path, svg: bool) -> Result<PlotFiles> {
    if summaries.is_empty() {
        return Err(SyncError::Config("no summaries to plot".into()));
    }
    fs::create_dir_all(dir)?;
    let ns = sorted_unique(summaries.iter().map(|s| s.n));
    let kappas = sorted_unique(summaries.iter().map(|s| s.kappa));
    let find = |n: usize, k: f64| summaries.iter().find(|s| s.n == n && s.kappa == k);
    let mut files = PlotFiles::default();

    for &n in &ns {
        let mut text = String::from("kappa,mean,q1,q2,q3\n");
        for s in kappas.iter().filter_map(|&k| find(n, k)) {
            let _ = writeln!(text, "{},{},{},{},{}", s.kappa, num(s.mean_max_dev), num(s.q1), num(s.q2), num(s.q3));
        }
        let path = dir.join(format!("curve_n{n}.csv"));
        fs::write(&path, text)?;
        files.curves.push(path);
    }

    let success: fn(&CellSummary) -> f64 = |s| s.success_rate;
    let alignment: fn(&CellSummary) -> f64 = |s| s.mean_alignment;
    for (name, value) in [("success_rate", success), ("mean_alignment", alignment)] {
        let grid: Vec<Vec<Option<f64>>> =
            ns.iter().map(|&n| kappas.iter().map(|&k| find(n, k).map(value)).collect()).collect();

        let mut text = String::from("n\\kappa");
        for k in &kappas {
            let _ = write!(text, ",{k}");
        }
        text.push('\n');
        for (n, row) in ns.iter().zip(&grid) {
            let _ = write!(text, "{n}");
            for v in row {
                let _ = write!(text, ",{}", v.map(num).unwrap_or_default());
            }
            text.push('\n');
        }
        let path = dir.join(format!("{name}.csv"));
        fs::write(&path, text)?;
        files.heatmaps.push(path);

        if svg {
            let path = dir.join(format!("{name}.svg"));
            fs::write(&path, heatmap_svg(name, &ns, &kappas, &grid))?;
            files.svgs.push(path);
        }
    }
    Ok(files)
}

/// Grayscale heatmap: 0 is black, 1 is white; missing cells are hatched red.
fn heatmap_svg(title: &str, ns: &[usize], kappas: &[f64], grid: &[Vec<Option<f64>>]) -> String {
    let width = SVG_MARGIN + kappas.len() * SVG_CELL + 10;
    let height = SVG_MARGIN + ns.len() * SVG_CELL + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="9">"#
    );
    let _ = writeln!(s, r#"<text x="4" y="14" font-size="12">{title}</text>"#);
    // Largest n at the top, as in a phase diagram.
    for (row, (n, values)) in ns.iter().zip(grid).rev().enumerate() {
        let y = SVG_MARGIN + row * SVG_CELL;
        let _ = writeln!(s, r#"<text x="4" y="{}">{n}</text>"#, y + SVG_CELL / 2 + 3);
        for (col, v) in values.iter().enumerate() {
            let x = SVG_MARGIN + col * SVG_CELL;
            let fill = match v {
                Some(v) if v.is_finite() => {
                    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                    format!("rgb({g},{g},{g})")
                }
                _ => "rgb(200,60,60)".to_string(),
            };
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{SVG_CELL}" height="{SVG_CELL}" fill="{fill}"/>"#);
        }
    }
    for (col, k) in kappas.iter().enumerate() {
        let x = SVG_MARGIN + col * SVG_CELL + 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" transform="rotate(-60 {x} {})">{k}</text>"#,
            SVG_MARGIN - 4,
            SVG_MARGIN - 4
        );
    }
    s.push_str("</svg>\n");
    s
}

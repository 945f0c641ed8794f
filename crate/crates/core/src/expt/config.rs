//! Sweep configuration: a TOML table with the grid, trial count and solver
//! settings. Every field except `model`, `n_grid`, `kappa_grid` and `d` has a
//! default.
//!
//! ```toml
//! model = "pm"
//! n_grid = [100, 200]
//! kappa_grid = [0.5, 1.0, 2.0]
//! d = 5
//! trials = 25
//! base_seed = 1
//!
//! [outputs]
//! rows = "rows.csv"
//! summary = "summary.csv"
//! plots = "plots"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Result, SyncError};
use crate::models::NoiseModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Od,
    Pm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Od => "od",
            ModelKind::Pm => "pm",
        }
    }

    /// Part of every trial seed, so the two models never share streams.
    pub fn tag(self) -> u64 {
        match self {
            ModelKind::Od => 0x4F44,
            ModelKind::Pm => 0x504D,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = SyncError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "od" => Ok(ModelKind::Od),
            "pm" => Ok(ModelKind::Pm),
            other => Err(SyncError::Parse(format!("unknown model {other:?}, expected od or pm"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub rows: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub plots: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub n_grid: Vec<usize>,
    pub kappa_grid: Vec<f64>,
    pub d: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// OD only: Haar-distributed ground truth instead of identities.
    #[serde(default)]
    pub haar: bool,
    /// PM only: uniformly random ground-truth permutations.
    #[serde(default)]
    pub scramble: bool,
    /// 1-based anchor block.
    #[serde(default = "default_anchor")]
    pub anchor: usize,
    /// Fill the `runtime_ms` column. Off by default so row files are
    /// reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
    /// Also write SVG heatmaps next to the plot CSVs.
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub outputs: OutputPaths,
}

fn default_trials() -> usize {
    25
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    2000
}

fn default_anchor() -> usize {
    1
}

/// Noise parameter for one grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellParams {
    pub model: NoiseModel,
    /// PM only: `κ·√(log(nd)/n)` exceeded 1 and was clamped.
    pub clamped: bool,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| SyncError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(SyncError::Config(m.to_string()));
        if self.n_grid.is_empty() || self.kappa_grid.is_empty() {
            return fail("n_grid and kappa_grid must be non-empty");
        }
        if self.n_grid.contains(&0) || self.d == 0 || self.trials == 0 {
            return fail("n, d and trials must be positive");
        }
        if self.kappa_grid.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return fail("kappa values must be positive and finite");
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return fail("tol and max_iter must be positive");
        }
        if self.anchor == 0 || self.n_grid.iter().any(|&n| self.anchor > n) {
            return fail("anchor must lie in 1..=n for every n in the grid");
        }
        for &n in &self.n_grid {
            for &kappa in &self.kappa_grid {
                let cell = self.cell_params(n, kappa);
                if !(cell.model.parameter() > 0.0) {
                    return Err(SyncError::Config(format!("n={n}, kappa={kappa} gives a zero noise parameter")));
                }
            }
        }
        Ok(())
    }

    /// `σ = κ·√(n/d)` for OD; `p = min(1, κ·√(log(nd)/n))` for PM.
    pub fn cell_params(&self, n: usize, kappa: f64) -> CellParams {
        let (nf, df) = (n as f64, self.d as f64);
        match self.model {
            ModelKind::Od => CellParams { model: NoiseModel::Od { sigma: kappa * (nf / df).sqrt() }, clamped: false },
            ModelKind::Pm => {
                let p = kappa * ((nf * df).ln() / nf).sqrt();
                CellParams { model: NoiseModel::Pm { p: p.min(1.0) }, clamped: p > 1.0 }
            }
        }
    }

    /// Named grids: `od-full`, `pm-full-d5`, `pm-full-d10` are the full-size
    /// studies; `od-desk` and `pm-desk` are small enough for CI.
    pub fn preset(name: &str) -> Result<Self> {
        let base = |model, n_grid, kappa_grid, d| SweepConfig {
            model,
            n_grid,
            kappa_grid,
            d,
            trials: 25,
            base_seed: 1,
            tol: default_tol(),
            max_iter: default_max_iter(),
            haar: false,
            scramble: false,
            anchor: 1,
            record_timing: false,
            svg: false,
            outputs: OutputPaths::default(),
        };
        let steps = |lo: f64, step: f64, count: usize| (0..count).map(|k| round6(lo + step * k as f64)).collect();
        let cfg = match name {
            "od-full" => base(ModelKind::Od, vec![1000], steps(0.05, 0.05, 10), 3),
            "pm-full-d5" => base(ModelKind::Pm, log_grid(50, 1000, 8), steps(0.1, 0.1, 20), 5),
            "pm-full-d10" => base(ModelKind::Pm, log_grid(50, 1000, 8), steps(0.1, 0.1, 20), 10),
            "od-desk" => SweepConfig { trials: 5, ..base(ModelKind::Od, vec![200], steps(0.1, 0.1, 4), 3) },
            "pm-desk" => SweepConfig { trials: 5, ..base(ModelKind::Pm, vec![50, 100], vec![0.2, 0.6, 1.0, 2.0], 5) },
            other => return Err(SyncError::Config(format!("unknown preset {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// `count` integers spaced evenly in log scale from `lo` to `hi`, inclusive.
pub fn log_grid(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut grid: Vec<usize> =
        (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize).collect();
    grid.dedup();
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = SweepConfig::from_toml_str("model = \"pm\"\nn_grid = [50]\nkappa_grid = [1.0]\nd = 5\n").unwrap();
        assert_eq!(cfg.trials, 25);
        assert_eq!(cfg.anchor, 1);
        assert!(!cfg.record_timing);
        assert_eq!(cfg.outputs, OutputPaths::default());
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "model = \"pm\"\nn_grid = []\nkappa_grid = [1.0]\nd = 5\n",
            "model = \"pm\"\nn_grid = [50]\nkappa_grid = [-1.0]\nd = 5\n",
            "model = \"xx\"\nn_grid = [50]\nkappa_grid = [1.0]\nd = 5\n",
            "model = \"od\"\nn_grid = [50]\nkappa_grid = [1.0]\nd = 5\ntrials = 0\n",
            "model = \"od\"\nn_grid = [50]\nkappa_grid = [1.0]\nd = 5\ncolour = 1\n",
            "model = \"pm\"\nn_grid = [1]\nkappa_grid = [1.0]\nd = 1\n",
        ] {
            assert!(matches!(SweepConfig::from_toml_str(text), Err(SyncError::Config(_))), "{text}");
        }
    }

    #[test]
    fn kappa_mapping_and_clamping() {
        let mut cfg = SweepConfig::preset("pm-desk").unwrap();
        let cell = cfg.cell_params(50, 5.0);
        assert!(cell.clamped);
        assert_eq!(cell.model, NoiseModel::Pm { p: 1.0 });
        let cell = cfg.cell_params(1000, 0.5);
        assert!(!cell.clamped);
        assert!((cell.model.parameter() - 0.5 * (5000f64.ln() / 1000.0).sqrt()).abs() < 1e-15);
        cfg.model = ModelKind::Od;
        cfg.d = 4;
        assert_eq!(cfg.cell_params(100, 0.3).model, NoiseModel::Od { sigma: 0.3 * 5.0 });
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(50, 1000, 8);
        assert_eq!(g.len(), 8);
        assert_eq!((g[0], g[7]), (50, 1000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn presets_validate() {
        for name in ["od-full", "pm-full-d5", "pm-full-d10", "od-desk", "pm-desk"] {
            SweepConfig::preset(name).unwrap();
        }
        assert_eq!(SweepConfig::preset("od-full").unwrap().kappa_grid.last(), Some(&0.5));
        assert!(SweepConfig::preset("nope").is_err());
    }
}

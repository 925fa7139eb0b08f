//! Run configuration: cone, exponents, boundary data family, grid,
//! window overrides, solver and continuation options.
//!
//! Configurations are JSON. Every output file embeds the hash of the
//! canonical serialization, so results are traceable to the exact
//! configuration that produced them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::exponents::{admissible_range, decay_window, DecayWindow, ExponentReport};
use crate::grid::{BoundaryData, Grid};
use crate::solver::{IterOpts, ProblemSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeConfig {
    pub dimension: usize,
    pub theta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_override: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MuSpec {
    GaussianBump { center: f64, width: f64, amplitude: f64 },
    CompactBump { s_lo: f64, s_hi: f64, amplitude: f64 },
    /// CSV table of `s,value` rows, linearly interpolated onto the grid
    /// (zero outside the tabulated range), applied to every lateral edge.
    Table { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub n_theta: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WindowConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub blowup_factor: f64,
    /// Amplitude for the `solve` command; when absent the certified
    /// small-amplitude level from the barrier is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Initial bracket for the extremal-amplitude bisection.
    pub bracket: (f64, f64),
    pub bisect_rel_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 500,
            blowup_factor: 1e6,
            kappa: None,
            bracket: (0.1, 10.0),
            bisect_rel_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationConfig {
    /// Arclength step as a fraction of the bisected extremal amplitude.
    pub ds_frac: f64,
    /// Branch start as a fraction of the bisected extremal amplitude.
    pub start_frac: f64,
    pub max_steps: usize,
    pub kappa_floor_frac: f64,
    pub sup_cap_factor: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            ds_frac: 0.04,
            start_frac: 0.5,
            max_steps: 400,
            kappa_floor_frac: 0.25,
            sup_cap_factor: 1e3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub cone: ConeConfig,
    pub p: f64,
    #[serde(default)]
    pub a: f64,
    pub mu: MuSpec,
    pub grid: GridConfig,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    /// Seed for the randomized verification suites.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    0x5eed_c0de
}

impl RunConfig {
    /// The shipped default: half-space in three dimensions, cubic
    /// nonlinearity, Gaussian boundary bump, symmetric log-radial window.
    pub fn canonical() -> RunConfig {
        RunConfig {
            cone: ConeConfig { dimension: 3, theta0: std::f64::consts::FRAC_PI_2, lambda_override: None },
            p: 3.0,
            a: 0.0,
            mu: MuSpec::GaussianBump { center: 0.0, width: 0.5, amplitude: 1.0 },
            grid: GridConfig { s_min: -6.0, s_max: 6.0, n_s: 241, n_theta: 33 },
            window: WindowConfig { alpha: Some(0.0), beta: Some(-1.5) },
            solver: SolverConfig::default(),
            continuation: ContinuationConfig::default(),
            seed: default_seed(),
        }
    }

    pub fn from_path(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Halves both grid spacings `k` times.
    pub fn refine(&mut self, k: u32) {
        let f = 1usize << k;
        self.grid.n_s = (self.grid.n_s - 1) * f + 1;
        self.grid.n_theta = (self.grid.n_theta - 1) * f + 1;
    }

    /// Hash of the canonical JSON serialization, embedded in outputs.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut out = String::with_capacity(16);
        for b in digest.iter().take(8) {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    pub fn cone_spec(&self) -> Result<ConeSpec> {
        let mut cone = ConeSpec::new(self.cone.dimension, self.cone.theta0)?;
        if let Some(l) = self.cone.lambda_override {
            cone = cone.with_lambda_override(l)?;
        }
        Ok(cone)
    }

    pub fn iter_opts(&self) -> IterOpts {
        IterOpts {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            blowup_factor: self.solver.blowup_factor,
        }
    }

    /// Cross-section eigenvalue (refined) and the full exponent report.
    pub fn exponent_report(&self) -> Result<ExponentReport> {
        let cone = self.cone_spec()?;
        let lambda = if let Some(l) = cone.lambda_override {
            l
        } else {
            crate::cone::cross_section_eigen_refined(&cone, self.grid.n_theta.max(257))?
        };
        admissible_range(self.cone.dimension, lambda, self.a)
    }

    pub fn decay_window_resolved(&self, report: &ExponentReport) -> Result<DecayWindow> {
        decay_window(
            self.p,
            report.gamma,
            self.cone.dimension,
            self.a,
            self.window.alpha,
            self.window.beta,
        )
    }

    fn boundary_data(&self, grid: &Grid, window: &DecayWindow) -> Result<BoundaryData> {
        let mu = match &self.mu {
            MuSpec::GaussianBump { center, width, amplitude } => {
                if *width <= 0.0 || *amplitude <= 0.0 {
                    return Err(Error::Config("gaussian bump needs positive width and amplitude".into()));
                }
                BoundaryData::gaussian_bump(grid, window.alpha, window.beta, *center, *width, *amplitude)
            }
            MuSpec::CompactBump { s_lo, s_hi, amplitude } => {
                if !(s_lo < s_hi) || *amplitude <= 0.0 {
                    return Err(Error::Config("compact bump needs s_lo < s_hi and positive amplitude".into()));
                }
                BoundaryData::compact_bump(grid, window.alpha, window.beta, *s_lo, *s_hi, *amplitude)
            }
            MuSpec::Table { path } => {
                let table = read_mu_table(std::path::Path::new(path))?;
                BoundaryData::from_profile(grid, window.alpha, window.beta, |s| interp_table(&table, s))
            }
        };
        mu.validate(grid)?;
        Ok(mu)
    }

    /// Resolves the full problem: validates the configuration against the
    /// exponent module first, then builds grid, window, and data.
    pub fn build_problem(&self) -> Result<(ProblemSpec, ExponentReport, Vec<String>)> {
        let report = self.exponent_report()?;
        if self.p <= report.p_star {
            return Err(Error::Config(format!(
                "p = {} is at or below the critical exponent p* = {}; no positive solutions exist there",
                self.p, report.p_star
            )));
        }
        let window = self.decay_window_resolved(&report)?;
        let cone = self.cone_spec()?;
        let grid = Grid::new(cone, self.grid.s_min, self.grid.s_max, self.grid.n_s, self.grid.n_theta)?;
        let mu = self.boundary_data(&grid, &window)?;
        let spec = ProblemSpec { grid, p: self.p, a: self.a, mu, window };
        let warnings = spec.validate(&report)?;
        Ok((spec, report, warnings))
    }
}

fn read_mu_table(path: &std::path::Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("s,") {
            continue;
        }
        let mut parts = line.split(',');
        let s: f64 = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("bad table row {} in {}", ln + 1, path.display())))?;
        let v: f64 = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("bad table row {} in {}", ln + 1, path.display())))?;
        rows.push((s, v));
    }
    if rows.len() < 2 {
        return Err(Error::Config(format!("table {} needs at least two rows", path.display())));
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(rows)
}

fn interp_table(table: &[(f64, f64)], s: f64) -> f64 {
    if s <= table[0].0 || s >= table[table.len() - 1].0 {
        return 0.0;
    }
    let k = table.partition_point(|row| row.0 <= s);
    let (s0, v0) = table[k - 1];
    let (s1, v1) = table[k];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}

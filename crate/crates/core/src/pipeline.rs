//! Command implementations behind the CLI: each builds the problem from
//! a configuration, runs the relevant machinery, and persists results.
//!
//! Outputs are deterministic given the configuration: fixed seeds, a
//! direct solver, and fixed-precision formatting. Every file embeds the
//! configuration hash.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::continuation::{trace_branch, TraceOpts};
use crate::error::{Error, Result};
use crate::exponents::ExponentReport;
use crate::grid::Field;
use crate::poisson::build_laplacian;
use crate::solver::{
    bisect_kappa_star, decay_report, minimal_solution, DecayReport, IterationStatus, KappaStarResult,
};
use crate::verify::{full_verification, VerifyReport};

pub struct OutputWriter {
    dir: PathBuf,
    hash: String,
}

impl OutputWriter {
    pub fn new(dir: &Path, cfg: &RunConfig) -> Result<OutputWriter> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputWriter { dir: dir.to_path_buf(), hash: cfg.hash() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        let mut value = serde_json::to_value(payload)?;
        if let Some(map) = value.as_object_mut() {
            map.insert("config_hash".into(), json!(self.hash));
        } else {
            value = json!({ "config_hash": self.hash, "data": value });
        }
        let path = self.path(name);
        std::fs::write(&path, serde_json::to_string_pretty(&value)? + "\n")?;
        Ok(path)
    }

    pub fn write_csv<I: IntoIterator<Item = String>>(&self, name: &str, header: &str, rows: I) -> Result<PathBuf> {
        let path = self.path(name);
        let mut out = String::new();
        out.push_str(&format!("# config_hash={}\n", self.hash));
        out.push_str(header);
        out.push('\n');
        for row in rows {
            out.push_str(&row);
            out.push('\n');
        }
        std::fs::write(&path, out)?;
        Ok(path)
    }

    pub fn append_csv(&self, name: &str, header: &str, row: &str) -> Result<PathBuf> {
        let path = self.path(name);
        let mut file = if path.exists() {
            std::fs::OpenOptions::new().append(true).open(&path)?
        } else {
            let mut f = std::fs::File::create(&path)?;
            writeln!(f, "# config_hash={}", self.hash)?;
            writeln!(f, "{header}")?;
            f
        };
        writeln!(file, "{row}")?;
        Ok(path)
    }
}

fn field_csv_rows(grid: &crate::grid::Grid, u: &Field) -> Vec<String> {
    let mut rows = Vec::with_capacity(grid.len());
    for j in 0..grid.n_s {
        for i in 0..grid.n_theta {
            rows.push(format!("{:.12e},{:.12e},{:.12e}", grid.s(j), grid.theta(i), u.at(j, i)));
        }
    }
    rows
}

/// Exponent classification; also written as `exponents.json`.
pub fn run_exponents(cfg: &RunConfig, out_dir: &Path) -> Result<ExponentReport> {
    let report = cfg.exponent_report()?;
    let writer = OutputWriter::new(out_dir, cfg)?;
    writer.write_json("exponents.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenCapReport {
    pub lambda_coarse: f64,
    pub lambda_fine: f64,
    pub lambda_extrapolated: f64,
    pub gamma: f64,
    pub n_theta: usize,
}

/// Cross-section eigenvalue at two resolutions with extrapolation.
pub fn run_eigen_cap(cfg: &RunConfig, out_dir: &Path) -> Result<EigenCapReport> {
    let cone = cfg.cone_spec()?;
    let n_theta = cfg.grid.n_theta.max(257);
    let (coarse, fine, extrap) = if let Some(l) = cone.lambda_override {
        (l, l, l)
    } else {
        let (c, _) = crate::cone::cross_section_eigen(&cone, n_theta)?;
        let (f, _) = crate::cone::cross_section_eigen(&cone, 2 * (n_theta - 1) + 1)?;
        (c, f, (4.0 * f - c) / 3.0)
    };
    let report = EigenCapReport {
        lambda_coarse: coarse,
        lambda_fine: fine,
        lambda_extrapolated: extrap,
        gamma: crate::exponents::gamma_exponent(cfg.cone.dimension, extrap)?,
        n_theta,
    };
    let writer = OutputWriter::new(out_dir, cfg)?;
    writer.write_json("eigen_cap.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub kappa: f64,
    pub status: IterationStatus,
    pub sup: f64,
    pub cab: f64,
    pub residual: Option<f64>,
    pub j_reached: usize,
    pub interior_min: Option<f64>,
    pub decay: Option<DecayReport>,
    pub warnings: Vec<String>,
}

/// One monotone-iteration run. The amplitude comes from the
/// configuration, or from the barrier certificate when unset.
pub fn run_solve(cfg: &RunConfig, out_dir: &Path) -> Result<SolveSummary> {
    let (spec, _, warnings) = cfg.build_problem()?;
    let op = build_laplacian(&spec.grid)?;
    let kappa = match cfg.solver.kappa {
        Some(k) => k,
        None => {
            let mut cert = crate::barrier::build_barrier(&op, spec.window.alpha, spec.window.beta)?;
            let (_, kappa0) =
                crate::barrier::small_kappa_certificate(&op, &mut cert, spec.p, spec.a, &spec.mu)?;
            kappa0
        }
    };
    let out = minimal_solution(&op, &spec, kappa, &cfg.iter_opts())?;

    let writer = OutputWriter::new(out_dir, cfg)?;
    let (sup, cab) = out
        .trace
        .last()
        .map(|t| (t.sup, t.cab))
        .unwrap_or((0.0, 0.0));
    let decay = out
        .solution
        .as_ref()
        .map(|u| decay_report(&spec.grid, u, spec.p, spec.a, &spec.window));
    if let Some(u) = &out.solution {
        writer.write_csv("solution.csv", "s,theta,value", field_csv_rows(&spec.grid, u))?;
    }
    let status_txt = match out.status {
        IterationStatus::Converged => "converged",
        IterationStatus::Diverged => "diverged",
        IterationStatus::MaxIter => "max_iter",
    };
    writer.append_csv(
        "runs.csv",
        "kappa,status,sup,cab,residual,j_reached",
        &format!(
            "{:.12e},{},{:.12e},{:.12e},{:.12e},{}",
            kappa,
            status_txt,
            sup,
            cab,
            out.residual.unwrap_or(f64::NAN),
            out.j_reached
        ),
    )?;
    let summary = SolveSummary {
        kappa,
        status: out.status,
        sup,
        cab,
        residual: out.residual,
        j_reached: out.j_reached,
        interior_min: out.interior_min,
        decay,
        warnings,
    };
    writer.write_json("solve.json", &summary)?;
    Ok(summary)
}

/// Extremal-amplitude bisection; writes the bracket summary and the full
/// probe history.
pub fn run_kappa_star(cfg: &RunConfig, out_dir: &Path) -> Result<KappaStarResult> {
    let (spec, _, _) = cfg.build_problem()?;
    let op = build_laplacian(&spec.grid)?;
    let result = bisect_kappa_star(&op, &spec, cfg.solver.bracket, cfg.solver.bisect_rel_tol, &cfg.iter_opts())?;
    let writer = OutputWriter::new(out_dir, cfg)?;
    writer.write_json("kappa_star.json", &result)?;
    writer.write_csv(
        "kappa_history.csv",
        "kappa,status",
        result.history.iter().map(|(k, st)| {
            let txt = match st {
                IterationStatus::Converged => "converged",
                IterationStatus::Diverged => "diverged",
                IterationStatus::MaxIter => "max_iter",
            };
            format!("{k:.12e},{txt}")
        }),
    )?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub fold_kappa: Option<f64>,
    pub kappa_lower_estimate: Option<f64>,
    pub lambda_at_fold: Option<f64>,
    pub n_points: usize,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub bracket_rel_width: f64,
    pub fold_inside_bracket: Option<bool>,
}

/// Bisection plus continuation: two independent routes to the extremal
/// amplitude, cross-checked in the summary.
pub fn run_branch(cfg: &RunConfig, out_dir: &Path) -> Result<BranchSummary> {
    let (spec, _, _) = cfg.build_problem()?;
    let op = build_laplacian(&spec.grid)?;
    let bracket = bisect_kappa_star(&op, &spec, cfg.solver.bracket, cfg.solver.bisect_rel_tol, &cfg.iter_opts())?;
    let opts = TraceOpts {
        ds: cfg.continuation.ds_frac * bracket.midpoint,
        max_steps: cfg.continuation.max_steps,
        kappa_floor_frac: cfg.continuation.kappa_floor_frac,
        sup_cap_factor: cfg.continuation.sup_cap_factor,
        ds_min_frac: 1e-6,
    };
    let diagram = trace_branch(&op, &spec, cfg.continuation.start_frac * bracket.midpoint, &opts)?;

    let writer = OutputWriter::new(out_dir, cfg)?;
    writer.write_csv(
        "branch.csv",
        "index,s,kappa,sup_u,cab_norm,lambda1,decay_sup,residual",
        diagram.points.iter().enumerate().map(|(i, p)| {
            format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                i, p.s, p.kappa, p.sup_u, p.cab, p.lambda, p.decay_sup, p.residual
            )
        }),
    )?;
    let fold_inside = diagram.kappa_star_estimate.map(|f| {
        f >= bracket.kappa_lo * (1.0 - 2.0 * cfg.solver.bisect_rel_tol)
            && f <= bracket.kappa_hi * (1.0 + 2.0 * cfg.solver.bisect_rel_tol)
    });
    let summary = BranchSummary {
        fold_kappa: diagram.kappa_star_estimate,
        kappa_lower_estimate: diagram.kappa_lower_estimate,
        lambda_at_fold: diagram.lambda_at_fold,
        n_points: diagram.points.len(),
        bracket_lo: bracket.kappa_lo,
        bracket_hi: bracket.kappa_hi,
        bracket_rel_width: bracket.rel_width,
        fold_inside_bracket: fold_inside,
    };
    writer.write_json("branch.json", &summary)?;
    Ok(summary)
}

/// Full verification pipeline; writes `verify.json`.
pub fn run_verify(cfg: &RunConfig, out_dir: &Path) -> Result<VerifyReport> {
    let report = full_verification(cfg)?;
    let writer = OutputWriter::new(out_dir, cfg)?;
    writer.write_json("verify.json", &report)?;
    Ok(report)
}

/// Maps an error to the CLI exit code: 2 for validation problems,
/// 3 for numerical ones.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidCone(_)
        | Error::InvalidGrid(_)
        | Error::ApertureOutOfRange { .. }
        | Error::TooFewAngularNodes(..)
        | Error::WindowViolation(_)
        | Error::NegativeBoundaryData(_)
        | Error::ZeroBoundaryData
        | Error::Io(_)
        | Error::Json(_) => 2,
        _ => 3,
    }
}

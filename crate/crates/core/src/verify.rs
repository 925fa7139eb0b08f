//! Self-contained verification suites: manufactured-solution convergence
//! order, discrete maximum principle, barrier certification with the
//! certified small-amplitude run, the Hardy ratio suite, and truncation
//! sensitivity. The `verify` command runs all of them and fails on any
//! violated bound; the same routines back the acceptance tests.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::barrier::{build_barrier, small_kappa_certificate, weighted_profile};
use crate::cone::{cross_section_eigen, ConeSpec};
use crate::config::RunConfig;
use crate::eigen::random_admissible_field;
use crate::error::{Error, Result};
use crate::grid::{BoundaryData, Field, Grid};
use crate::poisson::{build_laplacian, hardy_ratio, DiscreteOperator, EndValues};
use crate::solver::{minimal_solution, IterationStatus, ProblemSpec};

/// Observed-order window for the manufactured-solution study.
pub const ORDER_LO: f64 = 1.8;
pub const ORDER_HI: f64 = 2.2;
/// Maximum-principle violation bound.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-10;
/// Truncation sensitivity bound (relative) under widening by log 2.
pub const TRUNCATION_TOL: f64 = 0.01;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    /// `(h_max, sup error)` per refinement level, coarse to fine.
    pub levels: Vec<(f64, f64)>,
    /// Observed orders between consecutive levels.
    pub orders: Vec<f64>,
    pub pass: bool,
}

/// Exact profile and load of the manufactured problem. The angular
/// factor is even across the axis (flat derivative) for the cap and
/// vanishes on every lateral edge offset by a constant, so both the
/// lateral data and the interior load are exercised.
struct Manufactured {
    alpha: f64,
    beta: f64,
    k_ang: f64,
    dim2: bool,
    n: f64,
}

impl Manufactured {
    fn new(cone: &ConeSpec, alpha: f64, beta: f64) -> Manufactured {
        Manufactured {
            alpha,
            beta,
            k_ang: if cone.dimension == 2 {
                std::f64::consts::PI / cone.theta0
            } else {
                std::f64::consts::FRAC_PI_2 / cone.theta0
            },
            dim2: cone.dimension == 2,
            n: cone.dimension as f64,
        }
    }

    /// Radial factor and its first two log-radial derivatives.
    fn radial(&self, s: f64) -> (f64, f64, f64) {
        let u = weighted_profile(self.alpha, self.beta, s.exp());
        let sig = {
            let e = (2.0 * s).exp();
            e / (1.0 + e)
        };
        let dlog = self.alpha + (self.beta - self.alpha) * sig;
        let dsig = 2.0 * sig * (1.0 - sig);
        let du = u * dlog;
        let ddu = du * dlog + u * (self.beta - self.alpha) * dsig;
        (u, du, ddu)
    }

    fn angular(&self, theta: f64) -> (f64, f64, f64) {
        let k = self.k_ang;
        if self.dim2 {
            ((k * theta).sin() + 0.5, k * (k * theta).cos(), -k * k * (k * theta).sin())
        } else {
            ((k * theta).cos() + 0.5, -k * (k * theta).sin(), -k * k * (k * theta).cos())
        }
    }

    fn value(&self, s: f64, theta: f64) -> f64 {
        self.radial(s).0 * self.angular(theta).0
    }

    /// `-Laplace` of the profile at `(s, theta)`.
    fn load(&self, s: f64, theta: f64) -> f64 {
        let (u, du, ddu) = self.radial(s);
        let (g, dg, ddg) = self.angular(theta);
        let ang = if self.dim2 {
            ddg
        } else if theta == 0.0 {
            (self.n - 1.0) * ddg
        } else {
            ddg + (self.n - 2.0) * (theta.cos() / theta.sin()) * dg
        };
        -(-2.0 * s).exp() * ((ddu + (self.n - 2.0) * du) * g + u * ang)
    }
}

/// Manufactured-solution convergence study over `levels` grids, the
/// finest having the given node counts.
pub fn manufactured_convergence(
    cone: &ConeSpec,
    s_min: f64,
    s_max: f64,
    n_s: usize,
    n_theta: usize,
    levels: u32,
) -> Result<ConvergenceStudy> {
    let exact = Manufactured::new(cone, 0.0, -1.5);
    let mut out = Vec::new();
    for level in (0..levels).rev() {
        let f = 1usize << level;
        if (n_s - 1) % f != 0 || (n_theta - 1) % f != 0 {
            return Err(Error::InvalidGrid(format!(
                "grid {n_s} x {n_theta} does not coarsen {levels} times"
            )));
        }
        let grid = Grid::new(cone.clone(), s_min, s_max, (n_s - 1) / f + 1, (n_theta - 1) / f + 1)?;
        let op = build_laplacian(&grid)?;
        let load = Field::from_fn(&grid, |s, th| exact.load(s, th));
        let mu = BoundaryData::from_profile(&grid, 0.0, -1.5, |_| 0.0);
        let mut mu = mu;
        for (pos, &i) in BoundaryData::edge_indices(&grid).iter().enumerate() {
            for j in 0..grid.n_s {
                mu.edges[pos][j] = exact.value(grid.s(j), grid.theta(i));
            }
        }
        let ends = EndValues {
            lo: (0..grid.n_theta).map(|i| exact.value(grid.s(0), grid.theta(i))).collect(),
            hi: (0..grid.n_theta).map(|i| exact.value(grid.s(grid.n_s - 1), grid.theta(i))).collect(),
        };
        let v = op.solve_poisson_with_ends(&load, &mu, &ends)?;
        let reference = Field::from_fn(&grid, |s, th| exact.value(s, th));
        out.push((grid.h_max(), v.sup_distance(&reference)));
    }
    let orders: Vec<f64> = out.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    let pass = orders.iter().all(|o| (ORDER_LO..=ORDER_HI).contains(o));
    Ok(ConvergenceStudy { levels: out, orders, pass })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub n_cases: usize,
    pub worst_min: f64,
    pub pass: bool,
}

/// Random nonnegative loads and boundary data must produce nonnegative
/// solutions up to solver noise.
pub fn max_principle_suite(grid: &Grid, n_cases: usize, seed: u64) -> Result<MaxPrincipleReport> {
    let op = build_laplacian(grid)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::MAX;
    for _ in 0..n_cases {
        let f = Field::from_fn(grid, |_, _| rng.gen_range(0.0..1.0));
        let mut mu = BoundaryData::from_profile(grid, 0.0, -1.5, |_| 0.0);
        for e in &mut mu.edges {
            for v in e.iter_mut() {
                *v = rng.gen_range(0.0..1.0);
            }
        }
        let v = op.solve_poisson(&f, &mu)?;
        worst = worst.min(v.min());
    }
    Ok(MaxPrincipleReport { n_cases, worst_min: worst, pass: worst >= -MAX_PRINCIPLE_TOL })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardyReport {
    pub n_fields: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub optimizer_ratio: f64,
    pub pass: bool,
}

/// Randomized Hardy suite plus the near-optimizing profile family.
pub fn hardy_suite(grid: &Grid, lambda: f64, n_fields: usize, seed: u64) -> Result<HardyReport> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = 0.0_f64;
    for _ in 0..n_fields {
        let phi = random_admissible_field(grid, &mut rng);
        max_ratio = max_ratio.max(hardy_ratio(grid, lambda, &phi)?);
    }

    // Near-optimizer: the inverse-square-homogeneous radial power times
    // the first angular eigenfunction, cut off by a half period.
    let (_, psi) = cross_section_eigen(&grid.cone, grid.n_theta)?;
    let psi = psi.ok_or_else(|| Error::InvalidCone("optimizer family needs an axisymmetric cross-section".into()))?;
    let w = grid.s_max - grid.s_min;
    let half = (grid.cone.dimension as f64 - 2.0) / 2.0;
    let mut opt = Field::zeros(grid);
    for j in 0..grid.n_s {
        let s = grid.s(j);
        let radial = (-half * s).exp() * (std::f64::consts::PI * (s - grid.s_min) / w).sin();
        for i in 0..grid.n_theta {
            *opt.at_mut(j, i) = radial * psi.values[i];
        }
    }
    let optimizer_ratio = hardy_ratio(grid, lambda, &opt)?;
    max_ratio = max_ratio.max(optimizer_ratio);

    let bound = 1.0 + 5.0 * grid.h_max();
    Ok(HardyReport {
        n_fields,
        max_ratio,
        bound,
        optimizer_ratio,
        pass: max_ratio <= bound && optimizer_ratio > 0.9,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierRunReport {
    pub ratio_min: f64,
    pub threshold: f64,
    pub delta: f64,
    pub kappa0: f64,
    /// Worst excess of the certified run over the scaled barrier.
    pub excess: f64,
    pub pass: bool,
}

/// Builds the barrier on the problem's own grid, certifies it, runs the
/// monotone iteration at the certified amplitude, and checks the run
/// stays below the scaled barrier.
pub fn barrier_run_check(op: &DiscreteOperator, spec: &ProblemSpec) -> Result<BarrierRunReport> {
    let mut cert = build_barrier(op, spec.window.alpha, spec.window.beta)?;
    let valid = cert.is_valid();
    let (delta, kappa0) = small_kappa_certificate(op, &mut cert, spec.p, spec.a, &spec.mu)?;
    let out = minimal_solution(op, spec, kappa0, &crate::solver::IterOpts::default())?;
    let mut excess = f64::MIN;
    let mut converged = false;
    if out.status == IterationStatus::Converged {
        converged = true;
        let u = out.solution.as_ref().unwrap();
        for (uv, vv) in u.values.iter().zip(cert.v.values.iter()) {
            excess = excess.max(uv - delta * vv);
        }
    }
    let sup = out.solution.as_ref().map(|u| u.sup_norm()).unwrap_or(1.0);
    Ok(BarrierRunReport {
        ratio_min: cert.ratio_min,
        threshold: cert.threshold,
        delta,
        kappa0,
        excess,
        pass: valid && converged && excess <= 1e-9 * (1.0 + sup),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationReport {
    pub rel_change: f64,
    pub pass: bool,
}

/// Sensitivity of the harmonic lift to widening the truncation window by
/// log 2 on each side, measured on the shared nodes.
pub fn truncation_sensitivity(op: &DiscreteOperator, spec: &ProblemSpec) -> Result<TruncationReport> {
    let lift = op.solve_poisson(&Field::zeros(&spec.grid), &spec.mu)?;

    let wide_grid = spec.grid.widened_both(std::f64::consts::LN_2);
    let pad = (wide_grid.n_s - spec.grid.n_s) / 2;
    let wide_op = build_laplacian(&wide_grid)?;
    let mut mu_wide = BoundaryData::from_profile(&wide_grid, spec.mu.alpha, spec.mu.beta, |_| 0.0);
    for (e_wide, e_base) in mu_wide.edges.iter_mut().zip(spec.mu.edges.iter()) {
        for j in 0..spec.grid.n_s {
            e_wide[j + pad] = e_base[j];
        }
    }
    let lift_wide = wide_op.solve_poisson(&Field::zeros(&wide_grid), &mu_wide)?;

    let mut diff = 0.0_f64;
    let mut scale = 0.0_f64;
    for j in 0..spec.grid.n_s {
        for i in 0..spec.grid.n_theta {
            diff = diff.max((lift.at(j, i) - lift_wide.at(j + pad, i)).abs());
            scale = scale.max(lift.at(j, i).abs());
        }
    }
    let rel_change = diff / scale.max(1e-300);
    Ok(TruncationReport { rel_change, pass: rel_change < TRUNCATION_TOL })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub convergence: ConvergenceStudy,
    pub max_principle: MaxPrincipleReport,
    pub barrier: BarrierRunReport,
    pub hardy: HardyReport,
    pub truncation: TruncationReport,
    pub pass: bool,
}

/// The full verification pipeline on a configuration's own grid.
pub fn full_verification(cfg: &RunConfig) -> Result<VerifyReport> {
    let (spec, report, _) = cfg.build_problem()?;
    let op = build_laplacian(&spec.grid)?;

    let convergence = manufactured_convergence(
        &spec.grid.cone,
        cfg.grid.s_min,
        cfg.grid.s_max,
        cfg.grid.n_s,
        cfg.grid.n_theta,
        3,
    )?;
    let max_principle = max_principle_suite(&spec.grid, 50, cfg.seed)?;
    let barrier = barrier_run_check(&op, &spec)?;
    let hardy = hardy_suite(&spec.grid, report.lambda, 50, cfg.seed.wrapping_add(1))?;
    let truncation = truncation_sensitivity(&op, &spec)?;

    let pass = convergence.pass && max_principle.pass && barrier.pass && hardy.pass && truncation.pass;
    Ok(VerifyReport { convergence, max_principle, barrier, hardy, truncation, pass })
}

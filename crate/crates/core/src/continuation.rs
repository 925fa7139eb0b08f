//! Newton solves of the nonlinear residual and pseudo-arclength
//! continuation through the fold, producing the upper solution branch.
//!
//! A field solves the problem at amplitude `kappa` exactly when
//! `Phi(u, kappa) = u - kappa*lift - G[|x|^a u_+^p]` vanishes, with `lift`
//! the harmonic extension of the unit boundary data. Newton steps are
//! taken in the equivalent strong form: the Jacobian is the Laplacian
//! shifted by the linearization potential, assembled and factored as a
//! banded system. At the fold the Jacobian is singular and plain Newton
//! is refused; the arclength-augmented bordered system stays regular and
//! carries the branch around the turn.

use serde::{Deserialize, Serialize};

use crate::barrier::weighted_sup_norm;
use crate::eigen::{first_eigenpair_from, linearized_potential};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::poisson::{inner_product, DiscreteOperator};
use crate::solver::{decay_report, minimal_solution, IterOpts, ProblemSpec};

/// One accepted point of the solution curve.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    /// Cumulative arclength along the traced curve.
    pub s: f64,
    pub kappa: f64,
    pub u: Field,
    /// First eigenvalue of the linearization at this point.
    pub lambda: f64,
    pub sup_u: f64,
    pub cab: f64,
    pub decay_sup: f64,
    /// Relative strong-form Newton residual at acceptance.
    pub residual: f64,
    /// Amplitude component of the tangent that led into this point.
    pub tangent_kappa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagramSummary {
    pub fold_index: Option<usize>,
    pub kappa_star_estimate: Option<f64>,
    pub kappa_lower_estimate: Option<f64>,
    pub lambda_at_fold: Option<f64>,
    pub n_points: usize,
}

/// The traced bifurcation diagram: branch points ordered by arclength,
/// the fold, and the descent bound of the upper branch.
#[derive(Debug)]
pub struct BifurcationDiagram {
    pub points: Vec<BranchPoint>,
    /// Index of the last point before the amplitude tangent flips sign.
    pub fold_index: Option<usize>,
    /// Fold amplitude from a parabola through the points around the turn;
    /// the working estimate of the extremal amplitude.
    pub kappa_star_estimate: Option<f64>,
    /// Smallest amplitude reached on the upper branch: an upper bound,
    /// on this grid and branch, for where multiplicity stops. No claim
    /// is made about the true lower threshold.
    pub kappa_lower_estimate: Option<f64>,
    pub lambda_at_fold: Option<f64>,
}

impl BifurcationDiagram {
    pub fn summary(&self) -> DiagramSummary {
        DiagramSummary {
            fold_index: self.fold_index,
            kappa_star_estimate: self.kappa_star_estimate,
            kappa_lower_estimate: self.kappa_lower_estimate,
            lambda_at_fold: self.lambda_at_fold,
            n_points: self.points.len(),
        }
    }

    /// Upper-branch point closest to the requested amplitude.
    pub fn upper_point_near(&self, kappa: f64) -> Option<&BranchPoint> {
        let fold = self.fold_index?;
        self.points[fold + 1..]
            .iter()
            .min_by(|a, b| (a.kappa - kappa).abs().partial_cmp(&(b.kappa - kappa).abs()).unwrap())
    }
}

/// Harmonic extension of the unit boundary data (`kappa = 1`).
pub fn harmonic_lift(op: &DiscreteOperator, spec: &ProblemSpec) -> Result<Field> {
    op.solve_poisson(&Field::zeros(&spec.grid), &spec.mu)
}

/// The fixed-point residual `Phi(u, kappa) = u - kappa*lift - G[|x|^a u_+^p]`.
pub fn residual_map(
    op: &DiscreteOperator,
    spec: &ProblemSpec,
    lift: &Field,
    u: &Field,
    kappa: f64,
) -> Result<Field> {
    let grid = &spec.grid;
    let mut f = Field::zeros(grid);
    for j in 0..grid.n_s {
        let w = spec.weight(j);
        for i in 0..grid.n_theta {
            *f.at_mut(j, i) = w * u.at(j, i).max(0.0).powf(spec.p);
        }
    }
    let gf = op.green(&f)?;
    let mut phi = u.clone();
    phi.axpy(-kappa, lift);
    phi.axpy(-1.0, &gf);
    Ok(phi)
}

/// Assembled-scale residual vector of the strong form: stencil rows carry
/// `A u - e^{2s} |x|^a u_+^p`, boundary rows the Dirichlet defects.
fn strong_residual_vec(op: &DiscreteOperator, spec: &ProblemSpec, u: &Field, kappa: f64) -> Vec<f64> {
    let grid = &spec.grid;
    let mut rhs = vec![0.0; grid.len()];
    for j in 0..grid.n_s {
        let w = spec.weight(j);
        let e2s = (2.0 * grid.s(j)).exp();
        for i in 0..grid.n_theta {
            let k = grid.idx(j, i);
            rhs[k] = match grid.classify(j, i) {
                crate::grid::NodeClass::Interior | crate::grid::NodeClass::Axis => {
                    e2s * w * u.at(j, i).max(0.0).powf(spec.p)
                }
                crate::grid::NodeClass::Lateral => kappa * spec.mu.value_at(grid, j, i),
                crate::grid::NodeClass::RadialEnd => 0.0,
            };
        }
    }
    let au = op.matrix().matvec(&u.values);
    au.into_iter().zip(rhs).map(|(a, b)| a - b).collect()
}

/// Derivative of the strong residual in `kappa`: minus the boundary data
/// on lateral rows.
fn strong_residual_kappa(spec: &ProblemSpec) -> Vec<f64> {
    let grid = &spec.grid;
    let mut d = vec![0.0; grid.len()];
    for j in 0..grid.n_s {
        for i in 0..grid.n_theta {
            if matches!(grid.classify(j, i), crate::grid::NodeClass::Lateral) {
                d[grid.idx(j, i)] = -spec.mu.value_at(grid, j, i);
            }
        }
    }
    d
}

fn relative_residual(op: &DiscreteOperator, spec: &ProblemSpec, u: &Field, f: &[f64]) -> f64 {
    let scale = op.matrix().norm_inf() * u.sup_norm() + spec.mu.weighted_sup(&spec.grid) + 1.0;
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale
}

const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX: usize = 30;
/// A Newton step whose Jacobian solve inflates the update this much
/// relative to the residual is treated as effectively singular.
const SINGULAR_INFLATION: f64 = 1e13;

/// Newton iteration on the strong form at fixed `kappa`.
///
/// Converges quadratically from a good start while the linearization is
/// invertible; at the fold the Jacobian loses invertibility and the
/// iteration reports it instead of wandering.
pub fn newton_solve(op: &DiscreteOperator, spec: &ProblemSpec, u0: &Field, kappa: f64) -> Result<(Field, f64)> {
    let grid = &spec.grid;
    let mut u = u0.clone();
    let mut last_step = f64::INFINITY;
    for _ in 0..NEWTON_MAX {
        let f = strong_residual_vec(op, spec, &u, kappa);
        let rel = relative_residual(op, spec, &u, &f);
        if rel < NEWTON_TOL {
            return Ok((u, rel));
        }
        let pot = linearized_potential(grid, &u, spec.p, spec.a);
        let jac = op.shifted_factor(&pot).map_err(|_| Error::JacobianSingular)?;
        let delta = jac.solve(&f);
        let step = delta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let fnorm = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if step > SINGULAR_INFLATION * fnorm.max(1e-300) {
            return Err(Error::JacobianSingular);
        }
        // Diverging steps signal a vanishing basin (no nearby root).
        if step > 10.0 * last_step.max(u.sup_norm() + 1.0) {
            return Err(Error::NewtonNoConvergence(NEWTON_MAX));
        }
        last_step = step;
        for (uv, dv) in u.values.iter_mut().zip(delta.iter()) {
            *uv -= dv;
        }
    }
    Err(Error::NewtonNoConvergence(NEWTON_MAX))
}

/// Newton refinement along a short amplitude homotopy: walks from a
/// known solution toward the requested amplitude in steps of at most
/// `max_step`, so each Newton solve starts well inside its basin. Valid
/// away from the fold, where the linearization stays invertible.
pub fn newton_continue(
    op: &DiscreteOperator,
    spec: &ProblemSpec,
    u0: &Field,
    kappa_from: f64,
    kappa_to: f64,
    max_step: f64,
) -> Result<(Field, f64)> {
    let n_steps = (((kappa_to - kappa_from).abs() / max_step).ceil() as usize).max(1);
    let mut u = u0.clone();
    let mut out = (u0.clone(), f64::INFINITY);
    for k in 1..=n_steps {
        let target = kappa_from + (kappa_to - kappa_from) * k as f64 / n_steps as f64;
        out = newton_solve(op, spec, &u, target)?;
        u = out.0.clone();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceOpts {
    /// Arclength step in the quadrature metric.
    pub ds: f64,
    pub max_steps: usize,
    /// Stop the upper branch below this fraction of the fold amplitude.
    pub kappa_floor_frac: f64,
    /// Stop when the sup norm exceeds this multiple of its fold value.
    pub sup_cap_factor: f64,
    /// Smallest allowed step as a fraction of the initial one.
    pub ds_min_frac: f64,
}

impl Default for TraceOpts {
    fn default() -> Self {
        TraceOpts { ds: 0.05, max_steps: 400, kappa_floor_frac: 0.25, sup_cap_factor: 1e3, ds_min_frac: 1e-6 }
    }
}

/// Pseudo-arclength predictor-corrector from a converged point of the
/// minimal branch, through the fold, down the upper branch.
pub fn trace_branch(
    op: &DiscreteOperator,
    spec: &ProblemSpec,
    kappa_start: f64,
    opts: &TraceOpts,
) -> Result<BifurcationDiagram> {
    let grid = &spec.grid;

    let seed = minimal_solution(op, spec, kappa_start, &IterOpts::default())?;
    let u_seed = seed.solution.ok_or_else(|| {
        Error::Config(format!("branch start kappa = {kappa_start} did not converge ({:?})", seed.status))
    })?;
    let (u0, res0) = newton_solve(op, spec, &u_seed, kappa_start)?;

    let mut points: Vec<BranchPoint> = Vec::new();
    let mut phi_start = Field::from_fn(grid, |_, _| 1.0);

    let accept = |points: &mut Vec<BranchPoint>,
                      u: Field,
                      kappa: f64,
                      residual: f64,
                      s: f64,
                      t_kappa: f64,
                      phi_start: &mut Field|
     -> Result<()> {
        let pair = first_eigenpair_from(op, &u, spec.p, spec.a, phi_start)?;
        *phi_start = pair.phi.clone();
        let rep = decay_report(grid, &u, spec.p, spec.a, &spec.window);
        points.push(BranchPoint {
            s,
            kappa,
            sup_u: u.sup_norm(),
            cab: weighted_sup_norm(grid, &u, spec.window.alpha, spec.window.beta),
            decay_sup: rep.sup_scaled,
            lambda: pair.lambda,
            residual,
            tangent_kappa: t_kappa,
            u,
        });
        Ok(())
    };

    accept(&mut points, u0, kappa_start, res0, 0.0, 1.0, &mut phi_start)?;

    // First tangent: pure amplitude direction.
    let mut tangent_u = Field::zeros(grid);
    let mut tangent_k = 1.0;
    let mut ds = opts.ds;
    let ds_min = opts.ds * opts.ds_min_frac;
    let mut fold_index: Option<usize> = None;
    let mut sup_at_fold = f64::INFINITY;

    for _ in 0..opts.max_steps {
        let (u_prev, k_prev, s_prev) = {
            let prev = points.last().expect("at least the seed point");
            (prev.u.clone(), prev.kappa, prev.s)
        };

        // Predictor.
        let mut u = u_prev.clone();
        u.axpy(ds, &tangent_u);
        let mut kappa = k_prev + ds * tangent_k;

        // Corrector on the bordered system.
        let mut corrected = false;
        for _ in 0..NEWTON_MAX {
            let f = strong_residual_vec(op, spec, &u, kappa);
            let mut du = u.clone();
            du.axpy(-1.0, &u_prev);
            let g = inner_product(grid, &du, &tangent_u) + (kappa - k_prev) * tangent_k - ds;
            let rel = relative_residual(op, spec, &u, &f);
            if rel < NEWTON_TOL && g.abs() < 1e-9 * ds.max(1.0) {
                corrected = true;
                break;
            }
            let pot = linearized_potential(grid, &u, spec.p, spec.a);
            let jac = match op.shifted_factor(&pot) {
                Ok(j) => j,
                Err(_) => break,
            };
            let z1 = Field { n_s: grid.n_s, n_theta: grid.n_theta, values: jac.solve(&f) };
            let fk = strong_residual_kappa(spec);
            let z2 = Field { n_s: grid.n_s, n_theta: grid.n_theta, values: jac.solve(&fk) };
            let denom = tangent_k - inner_product(grid, &tangent_u, &z2);
            if denom.abs() < 1e-14 {
                break;
            }
            let dk = (g - inner_product(grid, &tangent_u, &z1)) / denom;
            u.axpy(-1.0, &z1);
            u.axpy(dk, &z2);
            kappa -= dk;
            if !kappa.is_finite() || !u.sup_norm().is_finite() {
                break;
            }
        }

        if !corrected {
            ds *= 0.5;
            if ds < ds_min {
                return Err(Error::CorrectorFailed(ds));
            }
            continue;
        }

        // Accept; tangent from the secant.
        let mut du = u.clone();
        du.axpy(-1.0, &u_prev);
        let dk = kappa - k_prev;
        let len = (inner_product(grid, &du, &du) + dk * dk).sqrt();
        let f = strong_residual_vec(op, spec, &u, kappa);
        let rel = relative_residual(op, spec, &u, &f);
        tangent_u = du.scaled(1.0 / len);
        tangent_k = dk / len;
        accept(&mut points, u, kappa, rel, s_prev + len, tangent_k, &mut phi_start)?;

        let n = points.len();
        if fold_index.is_none() && n >= 2 && points[n - 1].tangent_kappa < 0.0 && points[n - 2].tangent_kappa > 0.0 {
            fold_index = Some(n - 2);
            sup_at_fold = points[n - 2].sup_u;
        }
        if let Some(fi) = fold_index {
            let fold_kappa = points[fi].kappa;
            let last = points.last().unwrap();
            if last.kappa < opts.kappa_floor_frac * fold_kappa || last.sup_u > opts.sup_cap_factor * sup_at_fold {
                break;
            }
        }
        // Step growth back toward the nominal size after earlier halving;
        // once the fold is banked the step may overgrow to cover the
        // descending branch within the budget.
        let cap = if fold_index.is_some() { 6.0 * opts.ds } else { opts.ds };
        if ds < cap {
            ds = (ds * 1.4).min(cap);
        }
    }

    let (kappa_star_estimate, lambda_at_fold) = match fold_index {
        Some(fi) => (Some(fold_kappa_estimate(&points, fi)), Some(points[fi].lambda)),
        None => (None, None),
    };
    let kappa_lower_estimate =
        fold_index.map(|fi| points[fi..].iter().map(|p| p.kappa).fold(f64::INFINITY, f64::min));

    Ok(BifurcationDiagram { points, fold_index, kappa_star_estimate, kappa_lower_estimate, lambda_at_fold })
}

/// Parabola through the three points around the turn; vertex amplitude.
fn fold_kappa_estimate(points: &[BranchPoint], fi: usize) -> f64 {
    if fi == 0 || fi + 1 >= points.len() {
        return points[fi].kappa;
    }
    let (s0, k0) = (points[fi - 1].s, points[fi - 1].kappa);
    let (s1, k1) = (points[fi].s, points[fi].kappa);
    let (s2, k2) = (points[fi + 1].s, points[fi + 1].kappa);
    // Lagrange quadratic in s; vertex where the derivative vanishes.
    let d0 = k0 / ((s0 - s1) * (s0 - s2));
    let d1 = k1 / ((s1 - s0) * (s1 - s2));
    let d2 = k2 / ((s2 - s0) * (s2 - s1));
    let a = d0 + d1 + d2;
    let b = -(d0 * (s1 + s2) + d1 * (s0 + s2) + d2 * (s0 + s1));
    if a.abs() < 1e-300 {
        return k1;
    }
    let sv = -b / (2.0 * a);
    let c = d0 * s1 * s2 + d1 * s0 * s2 + d2 * s0 * s1;
    (a * sv + b) * sv + c
}

/// The separating functional: potential-weighted pairing of a difference
/// against the fold eigenfunction. Positive on the difference between the
/// upper and lower solutions at equal amplitude.
pub fn separating_functional(spec: &ProblemSpec, u_fold: &Field, phi_fold: &Field, diff: &Field) -> f64 {
    let grid = &spec.grid;
    let pot = linearized_potential(grid, u_fold, spec.p, spec.a);
    let mut total = 0.0;
    for j in 0..grid.n_s {
        for i in 0..grid.n_theta {
            total += grid.quad_weight(j, i) * pot.at(j, i) * phi_fold.at(j, i) * diff.at(j, i);
        }
    }
    total
}

//! First eigenpair of the linearized operator along the minimal branch.
//!
//! The generalized problem pairs the Dirichlet Laplacian with the diagonal
//! potential `p |x|^a u^{p-1}`. Its smallest eigenvalue measures stability:
//! above 1 on the minimal branch, crossing 1 at the fold. Inverse power
//! iteration reuses the Poisson factorization; the inverse is entrywise
//! positive, so the first eigenvector has one sign and positivity is an
//! assertion, not a projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::poisson::{dirichlet_energy, DiscreteOperator};
use crate::solver::{minimal_solution, IterOpts, ProblemSpec};

const EIGEN_TOL: f64 = 1e-13;
const EIGEN_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// First eigenfunction: positive at stencil nodes, zero trace,
    /// unit Dirichlet energy.
    pub phi: Field,
    /// Quadrature-norm residual of the eigen equation.
    pub residual: f64,
    pub iterations: usize,
}

/// Diagonal potential `p |x|^a u_+^{p-1}` of the linearization at `u`.
pub fn linearized_potential(grid: &Grid, u: &Field, p: f64, a: f64) -> Field {
    let mut pot = Field::zeros(grid);
    for j in 0..grid.n_s {
        let w = (a * grid.s(j)).exp();
        for i in 0..grid.n_theta {
            *pot.at_mut(j, i) = p * w * u.at(j, i).max(0.0).powf(p - 1.0);
        }
    }
    pot
}

/// Smallest eigenvalue and eigenfunction of the linearization at `u`,
/// from a deterministic all-ones start.
pub fn first_eigenpair(op: &DiscreteOperator, u: &Field, p: f64, a: f64) -> Result<EigenPair> {
    let start = Field::from_fn(&op.grid, |_, _| 1.0);
    first_eigenpair_from(op, u, p, a, &start)
}

/// Same as [`first_eigenpair`] with a caller-supplied start vector.
pub fn first_eigenpair_from(
    op: &DiscreteOperator,
    u: &Field,
    p: f64,
    a: f64,
    start: &Field,
) -> Result<EigenPair> {
    let grid = &op.grid;
    let pot = linearized_potential(grid, u, p, a);
    if pot.values.iter().all(|&v| v == 0.0) {
        return Err(Error::PotentialZero);
    }

    // Row-scaled diagonal of the pencil, zero on Dirichlet rows.
    let mut b_diag = vec![0.0; grid.len()];
    for j in 0..grid.n_s {
        let e2s = (2.0 * grid.s(j)).exp();
        for i in 0..grid.n_theta {
            if grid.is_stencil_node(j, i) {
                b_diag[grid.idx(j, i)] = e2s * pot.at(j, i);
            }
        }
    }

    let mut x: Vec<f64> = start.values.clone();
    for j in 0..grid.n_s {
        for i in 0..grid.n_theta {
            if !grid.is_stencil_node(j, i) {
                x[grid.idx(j, i)] = 0.0;
            }
        }
    }
    let sup = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if sup == 0.0 {
        return Err(Error::Config("start vector vanishes on stencil nodes".into()));
    }
    x.iter_mut().for_each(|v| *v /= sup);

    let mut lambda = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < EIGEN_MAX_ITER {
        iterations += 1;
        let bx: Vec<f64> = x.iter().zip(b_diag.iter()).map(|(xi, bi)| xi * bi).collect();
        let y = op.factor().solve(&bx);

        // Pencil Rayleigh estimate from the B-weighted quotient.
        let num: f64 = x.iter().zip(b_diag.iter()).map(|(xi, bi)| bi * xi * xi).sum();
        let den: f64 = x
            .iter()
            .zip(b_diag.iter())
            .zip(y.iter())
            .map(|((xi, bi), yi)| bi * xi * yi)
            .sum();
        if den == 0.0 {
            return Err(Error::EigenStagnation(iterations));
        }
        let lambda_new = num / den;

        let ysup = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if ysup == 0.0 {
            return Err(Error::EigenStagnation(iterations));
        }
        x = y.into_iter().map(|v| v / ysup).collect();

        if (lambda_new - lambda).abs() <= EIGEN_TOL * lambda_new.abs() && iterations >= 3 {
            lambda = lambda_new;
            converged = true;
            break;
        }
        lambda = lambda_new;
    }
    if !converged {
        return Err(Error::EigenNoConvergence(EIGEN_MAX_ITER));
    }

    // Sign flip to the positive representative, then assert one sign.
    let total: f64 = x.iter().sum();
    if total < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let mut phi = Field { n_s: grid.n_s, n_theta: grid.n_theta, values: x };
    if phi.interior_min(grid) <= 0.0 {
        return Err(Error::EigenStagnation(iterations));
    }

    let energy = dirichlet_energy(grid, &phi);
    phi.scale(1.0 / energy.sqrt());

    // Residual in the original coordinates, quadrature norm.
    let neg_lap = op.neg_laplacian(&phi);
    let mut sq = 0.0;
    for j in 0..grid.n_s {
        for i in 0..grid.n_theta {
            if grid.is_stencil_node(j, i) {
                let r = neg_lap.at(j, i) - lambda * pot.at(j, i) * phi.at(j, i);
                sq += grid.quad_weight(j, i) * r * r;
            }
        }
    }
    let residual = sq.sqrt();

    Ok(EigenPair { lambda, phi, residual, iterations })
}

/// Runs the minimal solution at `kappa`, then the linearized eigenpair.
/// Returns the eigenvalue and its margin above neutral stability.
pub fn stability_margin(
    op: &DiscreteOperator,
    spec: &ProblemSpec,
    kappa: f64,
    opts: &IterOpts,
) -> Result<(f64, f64)> {
    let out = minimal_solution(op, spec, kappa, opts)?;
    let u = out.solution.ok_or_else(|| {
        Error::Config(format!("no converged minimal solution at kappa = {kappa} ({:?})", out.status))
    })?;
    let pair = first_eigenpair(op, &u, spec.p, spec.a)?;
    Ok((pair.lambda, pair.lambda - 1.0))
}

/// Weighted mass `integral p |x|^a u^{p-1} psi^2 dx`.
pub fn potential_mass(grid: &Grid, u: &Field, p: f64, a: f64, psi: &Field) -> f64 {
    let pot = linearized_potential(grid, u, p, a);
    let mut mass = 0.0;
    for j in 0..grid.n_s {
        for i in 0..grid.n_theta {
            let v = psi.at(j, i);
            mass += grid.quad_weight(j, i) * pot.at(j, i) * v * v;
        }
    }
    mass
}

/// Quadrature Rayleigh quotient `energy(psi) / potential_mass(psi)`.
pub fn rayleigh_quotient(grid: &Grid, u: &Field, p: f64, a: f64, psi: &Field) -> f64 {
    dirichlet_energy(grid, psi) / potential_mass(grid, u, p, a, psi)
}

/// Smooth random field with zero lateral and end trace, used by the
/// randomized stability and Hardy suites.
pub fn random_admissible_field<R: rand::Rng>(grid: &Grid, rng: &mut R) -> Field {
    let w = grid.s_max - grid.s_min;
    let n_modes = 5;
    let modes: Vec<(f64, usize, usize)> = (0..n_modes)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(1..=8usize), rng.gen_range(1..=6usize)))
        .collect();
    let dim2 = grid.cone.dimension == 2;
    let theta0 = grid.cone.theta0;
    let s_min = grid.s_min;
    Field::from_fn(grid, |s, th| {
        let mut v = 0.0;
        for &(c, js, mt) in &modes {
            let radial = (js as f64 * std::f64::consts::PI * (s - s_min) / w).sin();
            let angular = if dim2 {
                (mt as f64 * std::f64::consts::PI * th / theta0).sin()
            } else {
                ((2.0 * mt as f64 - 1.0) * std::f64::consts::FRAC_PI_2 * th / theta0).cos()
            };
            v += c * radial * angular;
        }
        v
    })
}

/// Minimizer of the Hardy-type Rayleigh quotient on the grid: the first
/// eigenpair of the Laplacian against the inverse-square weight. The
/// eigenvalue bounds every Hardy ratio on the same grid.
pub fn hardy_minimizer(op: &DiscreteOperator) -> Result<(f64, Field)> {
    let ones = Field::from_fn(&op.grid, |_, _| 1.0);
    let pair = first_eigenpair(op, &ones, 1.0, -2.0)?;
    Ok((pair.lambda, pair.phi))
}

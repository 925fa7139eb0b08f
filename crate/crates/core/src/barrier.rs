//! Weighted power-law profiles, the weighted sup norm, supersolution
//! barriers, and the small-amplitude existence certificate.
//!
//! The profile `U_{alpha,beta}(r) = r^alpha (1+r^2)^{(beta-alpha)/2}`
//! behaves like `r^alpha` at the origin and `r^beta` at infinity; the
//! weighted sup norm against it encodes two-sided decay. Multiplying by
//! the angular comparison profile gives a barrier whose discrete
//! `-Laplace` dominates `U_{alpha-2,beta-2}`, which in turn yields a
//! supersolution `delta * V` for the nonlinear problem at small boundary
//! amplitude and so a certified existence level `kappa0`.

use serde::{Deserialize, Serialize};

use crate::cone::barrier_angular_factor;
use crate::error::{Error, Result};
use crate::grid::{BoundaryData, Field, Grid};
use crate::poisson::DiscreteOperator;

/// `U_{alpha,beta}(r) = r^alpha (1 + r^2)^{(beta - alpha)/2}` for `r > 0`.
pub fn weighted_profile(alpha: f64, beta: f64, r: f64) -> f64 {
    debug_assert!(r > 0.0);
    r.powf(alpha) * (1.0 + r * r).powf(0.5 * (beta - alpha))
}

/// The two-sided decay profile as a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedProfile {
    pub alpha: f64,
    pub beta: f64,
}

impl WeightedProfile {
    pub fn new(alpha: f64, beta: f64) -> Self {
        WeightedProfile { alpha, beta }
    }

    pub fn eval(&self, r: f64) -> f64 {
        weighted_profile(self.alpha, self.beta, r)
    }

    /// Field of profile values on a grid (constant in the angle).
    pub fn sample(&self, grid: &Grid) -> Field {
        let alpha = self.alpha;
        let beta = self.beta;
        Field::from_fn(grid, |s, _| weighted_profile(alpha, beta, s.exp()))
    }
}

/// Weighted sup norm: largest `|f| / U_{alpha,beta}` over grid nodes.
pub fn weighted_sup_norm(grid: &Grid, f: &Field, alpha: f64, beta: f64) -> f64 {
    debug_assert!(f.matches(grid));
    let mut m = 0.0_f64;
    for j in 0..grid.n_s {
        let u = weighted_profile(alpha, beta, grid.r(j));
        for i in 0..grid.n_theta {
            m = m.max(f.at(j, i).abs() / u);
        }
    }
    m
}

/// A verified discrete supersolution barrier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierCertificate {
    pub alpha: f64,
    pub beta: f64,
    /// `max(alpha(alpha+N-2), beta(beta+N-2))`, the zeroth-order
    /// coefficient of the angular comparison problem.
    pub m_coef: f64,
    pub lambda: f64,
    /// Barrier samples `V = U_{alpha,beta}(r) * phi(theta)`.
    pub v: Field,
    /// Minimum over stencil nodes of `(-Laplace_h V) / U_{alpha-2,beta-2}`.
    pub ratio_min: f64,
    /// Validity threshold `1 - 10 h^2` for the ratio minimum.
    pub threshold: f64,
    /// Supersolution scaling from [`small_kappa_certificate`]; `None`
    /// until that step has run.
    pub delta: Option<f64>,
    /// Certified existence level; `None` until computed.
    pub kappa0: Option<f64>,
}

impl BarrierCertificate {
    pub fn is_valid(&self) -> bool {
        self.ratio_min >= self.threshold
    }
}

/// Builds the barrier `V = U_{alpha,beta} * phi(theta)` on the operator's
/// grid and verifies the discrete dominance `-Laplace_h V >= U_{alpha-2,beta-2}`
/// up to the `O(h^2)` certificate tolerance.
///
/// Requires the window `-N+2-gamma < beta < alpha < gamma`, which makes the
/// zeroth-order coefficient sit strictly below the cross-section
/// eigenvalue; otherwise the angular problem is rejected.
pub fn build_barrier(op: &DiscreteOperator, alpha: f64, beta: f64) -> Result<BarrierCertificate> {
    let grid = &op.grid;
    let n = grid.cone.dimension as f64;
    let m_coef = (alpha * (alpha + n - 2.0)).max(beta * (beta + n - 2.0));
    let lambda = grid.cone.lambda(grid.n_theta.max(65))?;
    if m_coef >= lambda {
        return Err(Error::NotCoercive { m: m_coef, lambda });
    }
    let phi = barrier_angular_factor(&grid.cone, m_coef, grid.n_theta)?;

    let v = Field::from_fn(grid, |s, _| weighted_profile(alpha, beta, s.exp()));
    let mut v = v;
    for j in 0..grid.n_s {
        for i in 0..grid.n_theta {
            *v.at_mut(j, i) *= phi.values[i];
        }
    }

    let neg_lap = op.neg_laplacian(&v);
    let mut ratio_min = f64::MAX;
    for j in 0..grid.n_s {
        let u_low = weighted_profile(alpha - 2.0, beta - 2.0, grid.r(j));
        for i in 0..grid.n_theta {
            if grid.is_stencil_node(j, i) {
                ratio_min = ratio_min.min(neg_lap.at(j, i) / u_low);
            }
        }
    }
    let h = grid.h_max();
    Ok(BarrierCertificate {
        alpha,
        beta,
        m_coef,
        lambda,
        v,
        ratio_min,
        threshold: 1.0 - 10.0 * h * h,
        delta: None,
        kappa0: None,
    })
}

/// Turns a valid barrier into an existence certificate for the nonlinear
/// problem with exponent `p` and radial weight `|x|^a`.
///
/// `delta` is the largest scaling making `delta * V` a discrete
/// supersolution of `-Laplace u = |x|^a u^p`; `kappa0` additionally
/// dominates the boundary data: monotone iteration at any
/// `kappa <= kappa0` stays below `delta * V`.
pub fn small_kappa_certificate(
    op: &DiscreteOperator,
    cert: &mut BarrierCertificate,
    p: f64,
    a: f64,
    mu: &BoundaryData,
) -> Result<(f64, f64)> {
    let grid = &op.grid;
    if !cert.is_valid() {
        return Err(Error::BarrierInvalid { ratio_min: cert.ratio_min, threshold: cert.threshold });
    }
    mu.validate(grid)?;

    let neg_lap = op.neg_laplacian(&cert.v);
    let mut delta_pow = f64::MAX;
    for j in 0..grid.n_s {
        let ra = (a * grid.s(j)).exp();
        for i in 0..grid.n_theta {
            if grid.is_stencil_node(j, i) {
                let vv = cert.v.at(j, i);
                delta_pow = delta_pow.min(neg_lap.at(j, i) / (ra * vv.powf(p)));
            }
        }
    }
    if !(delta_pow > 0.0) {
        return Err(Error::BarrierInvalid { ratio_min: cert.ratio_min, threshold: cert.threshold });
    }
    let delta = delta_pow.powf(1.0 / (p - 1.0));

    let mut v_over_mu = f64::MAX;
    for (edge_pos, &i) in BoundaryData::edge_indices(grid).iter().enumerate() {
        for j in 0..grid.n_s {
            let m = mu.edges[edge_pos][j];
            if m > 0.0 {
                v_over_mu = v_over_mu.min(cert.v.at(j, i) / m);
            }
        }
    }
    let kappa0 = delta * v_over_mu;
    cert.delta = Some(delta);
    cert.kappa0 = Some(kappa0);
    Ok((delta, kappa0))
}

//! Cone cross-section geometry and the one-dimensional angular problems.
//!
//! The cross-section of the cone is an axisymmetric cap on the unit sphere
//! (for `N >= 3`) or a circular sector arc (for `N = 2`). Everything the rest
//! of the crate needs from the cross-section reduces to one-dimensional
//! problems in the polar angle: the principal Dirichlet eigenvalue of the
//! Laplace-Beltrami operator, and a comparison profile with a zeroth-order
//! term used to build barriers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the angular eigensolve.
const EIGEN_TOL: f64 = 1e-12;
/// Iteration cap for inverse power iteration.
const EIGEN_MAX_ITER: usize = 10_000;

/// Geometry of the cone: ambient dimension and cross-section aperture.
///
/// For `N >= 3` the cross-section is the spherical cap `{theta < theta0}`
/// with `theta0` in `(0, pi]`; for `N = 2` it is the sector arc with
/// `theta0` in `(0, 2*pi)`. A non-axisymmetric cross-section is supported
/// only through `lambda_override`, which bypasses the eigensolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub dimension: usize,
    pub theta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_override: Option<f64>,
}

impl ConeSpec {
    pub fn new(dimension: usize, theta0: f64) -> Result<Self> {
        let cone = ConeSpec { dimension, theta0, lambda_override: None };
        cone.validate()?;
        Ok(cone)
    }

    /// Half-space: the hemisphere cross-section. For `N >= 3` this is the
    /// cap with aperture pi/2; for `N = 2` the half-circle, an arc of
    /// length pi.
    pub fn half_space(dimension: usize) -> Result<Self> {
        if dimension == 2 {
            Self::new(2, std::f64::consts::PI)
        } else {
            Self::new(dimension, std::f64::consts::FRAC_PI_2)
        }
    }

    pub fn with_lambda_override(mut self, lambda: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidCone(format!("lambda_override must be positive, got {lambda}")));
        }
        self.lambda_override = Some(lambda);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidCone(format!("dimension {} < 2", self.dimension)));
        }
        let ok = if self.dimension == 2 {
            self.theta0 > 0.0 && self.theta0 < 2.0 * std::f64::consts::PI
        } else {
            self.theta0 > 0.0 && self.theta0 <= std::f64::consts::PI
        };
        if !ok {
            return Err(Error::ApertureOutOfRange {
                n: self.dimension,
                theta0: self.theta0,
                expected: if self.dimension == 2 { "(0, 2*pi)" } else { "(0, pi]" },
            });
        }
        if let Some(l) = self.lambda_override {
            if l <= 0.0 || !l.is_finite() {
                return Err(Error::InvalidCone(format!("lambda_override must be positive, got {l}")));
            }
        }
        Ok(())
    }

    /// Angular weight `sin(theta)^(N-2)` for `N >= 3`, constant 1 for `N = 2`.
    pub fn angular_weight(&self, theta: f64) -> f64 {
        if self.dimension == 2 {
            1.0
        } else {
            theta.sin().powi(self.dimension as i32 - 2)
        }
    }

    /// Principal cross-section eigenvalue, honoring `lambda_override`.
    pub fn lambda(&self, n_theta: usize) -> Result<f64> {
        Ok(cross_section_eigen(self, n_theta)?.0)
    }
}

/// Values of a function of the polar angle on the uniform node set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngularProfile {
    pub theta0: f64,
    pub values: Vec<f64>,
}

impl AngularProfile {
    pub fn n_theta(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        self.theta0 / (self.values.len() - 1) as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }
}

/// Solves a symmetric positive definite tridiagonal system in place.
///
/// `diag` and `off` describe the matrix (off-diagonal length `n-1`);
/// the right-hand side `rhs` is overwritten with the solution.
fn solve_spd_tridiag(diag: &[f64], off: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0];
    if d[0] <= 0.0 {
        return Err(Error::SingularSystem(0));
    }
    for i in 1..n {
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - l[i - 1] * off[i - 1];
        if d[i] <= 0.0 {
            return Err(Error::SingularSystem(i));
        }
    }
    for i in 1..n {
        rhs[i] -= l[i - 1] * rhs[i - 1];
    }
    for i in 0..n {
        rhs[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        let t = l[i] * rhs[i + 1];
        rhs[i] -= t;
    }
    Ok(())
}

/// General tridiagonal solve (Thomas algorithm with no pivoting).
/// Valid for the diagonally dominant systems assembled in this module.
fn solve_tridiag(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(Error::SingularSystem(0));
    }
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if m == 0.0 {
            return Err(Error::SingularSystem(i));
        }
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    rhs[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = d[i] - c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Stiffness and mass of the angular operator in self-adjoint form.
///
/// Unknowns are the non-Dirichlet nodes. For `N >= 3` these are
/// `theta_0 = 0, ..., theta_{n-2}` (the cap boundary node is eliminated);
/// for `N = 2` they are the interior nodes `theta_1, ..., theta_{n-2}`.
struct AngularForms {
    /// Stiffness diagonal and (symmetric) off-diagonal.
    k_diag: Vec<f64>,
    k_off: Vec<f64>,
    /// Lumped mass per unknown (cell integral of the angular weight).
    mass: Vec<f64>,
}

fn assemble_angular_forms(cone: &ConeSpec, n_theta: usize) -> AngularForms {
    let h = cone.theta0 / (n_theta - 1) as f64;
    // 4-point Gauss-Legendre on [0, 1], enough for smooth cell integrals.
    const GX: [f64; 4] = [0.069431844202973714, 0.330009478207571868, 0.669990521792428132, 0.930568155797026286];
    const GW: [f64; 4] = [0.173927422568726929, 0.326072577431273071, 0.326072577431273071, 0.173927422568726929];
    let cell_integral = |a: f64, b: f64| -> f64 {
        let len = b - a;
        GX.iter().zip(GW.iter()).map(|(&x, &w)| w * cone.angular_weight(a + x * len)).sum::<f64>() * len
    };

    if cone.dimension == 2 {
        let m = n_theta - 2;
        AngularForms {
            k_diag: vec![2.0 / h; m],
            k_off: vec![-1.0 / h; m.saturating_sub(1)],
            mass: vec![h; m],
        }
    } else {
        // Unknowns 0..n-1 at theta_i = i*h, Dirichlet node at theta0 dropped.
        let m = n_theta - 1;
        let mut k_diag = vec![0.0; m];
        let mut k_off = vec![0.0; m.saturating_sub(1)];
        let mut mass = vec![0.0; m];
        for i in 0..m {
            let th = i as f64 * h;
            let w_right = cone.angular_weight(th + 0.5 * h);
            k_diag[i] += w_right / h;
            if i + 1 < m {
                k_off[i] = -w_right / h;
                k_diag[i + 1] += w_right / h;
            } else {
                // Edge to the eliminated Dirichlet node contributes only
                // to the diagonal; already added above.
            }
            let lo = (th - 0.5 * h).max(0.0);
            let hi = (th + 0.5 * h).min(cone.theta0);
            mass[i] = cell_integral(lo, hi);
        }
        AngularForms { k_diag, k_off, mass }
    }
}

/// Smallest eigenvalue and eigenfunction of the angular Dirichlet problem.
///
/// For `N >= 3` the operator is the Laplace-Beltrami operator on the cap
/// (weight `sin(theta)^(N-2)`, natural condition on the axis, Dirichlet at
/// `theta0`); for `N = 2` it is the second derivative with Dirichlet ends.
/// When `lambda_override` is set the override is returned and no profile
/// is produced. The eigenfunction is normalized to maximum value 1 and is
/// positive away from the Dirichlet boundary.
pub fn cross_section_eigen(cone: &ConeSpec, n_theta: usize) -> Result<(f64, Option<AngularProfile>)> {
    cone.validate()?;
    if let Some(l) = cone.lambda_override {
        return Ok((l, None));
    }
    if n_theta < 8 {
        return Err(Error::TooFewAngularNodes(n_theta, 8));
    }

    let forms = assemble_angular_forms(cone, n_theta);
    let m = forms.k_diag.len();

    // Inverse power iteration with shift 0 on K x = lambda M x.
    let mut x = vec![1.0; m];
    let m_norm = |v: &[f64]| -> f64 {
        v.iter().zip(forms.mass.iter()).map(|(vi, mi)| vi * vi * mi).sum::<f64>().sqrt()
    };
    let nrm = m_norm(&x);
    x.iter_mut().for_each(|v| *v /= nrm);

    let mut lambda_prev = f64::INFINITY;
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..EIGEN_MAX_ITER {
        let mut y: Vec<f64> = x.iter().zip(forms.mass.iter()).map(|(xi, mi)| xi * mi).collect();
        solve_spd_tridiag(&forms.k_diag, &forms.k_off, &mut y)?;
        let nrm = m_norm(&y);
        if nrm == 0.0 {
            return Err(Error::EigenStagnation(0));
        }
        y.iter_mut().for_each(|v| *v /= nrm);

        // Generalized Rayleigh quotient x'Kx / x'Mx with x'Mx = 1,
        // accumulated in the positive edge-energy form: every term is
        // nonnegative, so the estimate has no cancellation noise at the
        // tolerance floor.
        lambda = 0.0;
        for i in 0..m {
            let mut diag_rest = forms.k_diag[i];
            if i > 0 {
                diag_rest += forms.k_off[i - 1];
            }
            if i + 1 < m {
                diag_rest += forms.k_off[i];
                let d = y[i + 1] - y[i];
                lambda += (-forms.k_off[i]) * d * d;
            }
            lambda += diag_rest * y[i] * y[i];
        }
        x = y;
        if (lambda - lambda_prev).abs() <= EIGEN_TOL * lambda.abs() {
            converged = true;
            break;
        }
        lambda_prev = lambda;
    }
    if !converged {
        return Err(Error::EigenNoConvergence(EIGEN_MAX_ITER));
    }

    // Expand to the full node set, fix sign, normalize to max 1.
    let mut values = vec![0.0; n_theta];
    if cone.dimension == 2 {
        values[1..n_theta - 1].copy_from_slice(&x);
    } else {
        values[..n_theta - 1].copy_from_slice(&x);
    }
    let max_abs = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let sign = if values.iter().sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
    values.iter_mut().for_each(|v| *v *= sign / max_abs);

    let interior = if cone.dimension == 2 { 1..n_theta - 1 } else { 0..n_theta - 1 };
    if values[interior].iter().any(|&v| v <= 0.0) {
        return Err(Error::EigenStagnation(EIGEN_MAX_ITER));
    }

    Ok((lambda, Some(AngularProfile { theta0: cone.theta0, values })))
}

/// Eigenvalue computed at two resolutions and Richardson-extrapolated.
///
/// The discretization converges at second order in the spacing, so
/// `(4*lambda(2n) - lambda(n)) / 3` removes the leading error term.
pub fn cross_section_eigen_refined(cone: &ConeSpec, n_theta: usize) -> Result<f64> {
    if let Some(l) = cone.lambda_override {
        return Ok(l);
    }
    let (coarse, _) = cross_section_eigen(cone, n_theta)?;
    let (fine, _) = cross_section_eigen(cone, 2 * (n_theta - 1) + 1)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Angular comparison profile: solves `-L phi = m_coef * phi + 1` on the
/// cross-section with boundary value 1, where `L` is the angular operator
/// of [`cross_section_eigen`]. Requires `m_coef` strictly below the
/// cross-section eigenvalue so the operator is coercive; the solution then
/// dominates its boundary value everywhere.
pub fn barrier_angular_factor(cone: &ConeSpec, m_coef: f64, n_theta: usize) -> Result<AngularProfile> {
    cone.validate()?;
    if n_theta < 8 {
        return Err(Error::TooFewAngularNodes(n_theta, 8));
    }
    let lambda = if let Some(l) = cone.lambda_override {
        l
    } else {
        cross_section_eigen(cone, n_theta)?.0
    };
    if m_coef >= lambda {
        return Err(Error::NotCoercive { m: m_coef, lambda });
    }

    let h = cone.theta0 / (n_theta - 1) as f64;
    let n = cone.dimension;

    // Pointwise stencil, identical to the angular part of the cone operator,
    // written for the unknown interior/axis nodes with the boundary value 1
    // moved to the right-hand side.
    let (mut lower, mut diag, mut upper, mut rhs);
    let offset; // index of the first unknown node
    if n == 2 {
        let m = n_theta - 2;
        offset = 1;
        lower = vec![-1.0 / (h * h); m.saturating_sub(1)];
        upper = lower.clone();
        diag = vec![2.0 / (h * h) - m_coef; m];
        rhs = vec![1.0; m];
        rhs[0] += 1.0 / (h * h);
        rhs[m - 1] += 1.0 / (h * h);
    } else {
        let m = n_theta - 1;
        offset = 0;
        lower = vec![0.0; m - 1];
        upper = vec![0.0; m - 1];
        diag = vec![0.0; m];
        rhs = vec![1.0; m];
        // Axis node: -L phi = -2(N-1)(phi_1 - phi_0)/h^2.
        diag[0] = 2.0 * (n as f64 - 1.0) / (h * h) - m_coef;
        upper[0] = -2.0 * (n as f64 - 1.0) / (h * h);
        for i in 1..m {
            let th = i as f64 * h;
            let cot = th.cos() / th.sin();
            let c = (n as f64 - 2.0) * cot / (2.0 * h);
            lower[i - 1] = -1.0 / (h * h) + c;
            diag[i] = 2.0 / (h * h) - m_coef;
            if i + 1 < m {
                upper[i] = -1.0 / (h * h) - c;
            } else {
                rhs[i] += 1.0 / (h * h) + c;
            }
        }
    }
    solve_tridiag(&lower, &diag, &upper, &mut rhs)?;

    let mut values = vec![1.0; n_theta];
    values[offset..offset + rhs.len()].copy_from_slice(&rhs);
    Ok(AngularProfile { theta0: cone.theta0, values })
}

/// Angular stencil coefficients for the two-dimensional cone operator at
/// angular index `i` (must not be a lateral Dirichlet node). Returns
/// `(c_lo, c_diag, c_hi)` so that the `-Laplace-Beltrami` contribution of
/// the row is `c_lo*u[i-1] + c_diag*u[i] + c_hi*u[i+1]`.
pub(crate) fn angular_stencil(n: usize, theta: f64, h: f64) -> (f64, f64, f64) {
    if n == 2 {
        (-1.0 / (h * h), 2.0 / (h * h), -1.0 / (h * h))
    } else if theta == 0.0 {
        let c = 2.0 * (n as f64 - 1.0) / (h * h);
        (0.0, c, -c)
    } else {
        let cot = theta.cos() / theta.sin();
        let c = (n as f64 - 2.0) * cot / (2.0 * h);
        (-1.0 / (h * h) + c, 2.0 / (h * h), -1.0 / (h * h) - c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn half_space_dim3_lambda_is_two() {
        let cone = ConeSpec::half_space(3).unwrap();
        let lambda = cross_section_eigen_refined(&cone, 2001).unwrap();
        assert_relative_eq!(lambda, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn planar_sector_closed_form() {
        // -psi'' = lambda psi on (0, theta0) gives (pi/theta0)^2.
        let cone = ConeSpec::new(2, std::f64::consts::FRAC_PI_2).unwrap();
        let lambda = cross_section_eigen_refined(&cone, 2001).unwrap();
        assert_relative_eq!(lambda, 4.0, max_relative = 1e-10);
    }

    #[test]
    fn override_bypasses_eigensolve() {
        let cone = ConeSpec::new(3, 1.0).unwrap().with_lambda_override(7.5).unwrap();
        let (lambda, psi) = cross_section_eigen(&cone, 65).unwrap();
        assert_eq!(lambda, 7.5);
        assert!(psi.is_none());
    }

    #[test]
    fn eigenfunction_positive_and_normalized() {
        for &(n, theta0) in &[(3usize, 2.0_f64), (5, 0.9), (2, 4.0)] {
            let cone = ConeSpec::new(n, theta0).unwrap();
            let (_, psi) = cross_section_eigen(&cone, 129).unwrap();
            let psi = psi.unwrap();
            let max = psi.values.iter().cloned().fold(f64::MIN, f64::max);
            assert_relative_eq!(max, 1.0, epsilon = 1e-14);
            let interior = if n == 2 { &psi.values[1..128] } else { &psi.values[..128] };
            assert!(interior.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn richardson_second_order() {
        // Error against the closed form shrinks by about 4x per refinement.
        let cone = ConeSpec::half_space(4).unwrap();
        let exact = 3.0;
        let e1 = (cross_section_eigen(&cone, 101).unwrap().0 - exact).abs();
        let e2 = (cross_section_eigen(&cone, 201).unwrap().0 - exact).abs();
        let order = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&order), "observed order {order}");
    }

    #[test]
    fn aperture_range_checked() {
        assert!(ConeSpec::new(3, 3.5).is_err());
        assert!(ConeSpec::new(2, 6.5).is_err());
        assert!(ConeSpec::new(3, 0.0).is_err());
        assert!(ConeSpec::new(1, 1.0).is_err());
    }

    #[test]
    fn angular_factor_quadratic_closed_form() {
        // With m_coef = 0 and N = 2 the profile is 1 + theta*(theta0-theta)/2.
        let theta0 = 1.3;
        let cone = ConeSpec::new(2, theta0).unwrap();
        let phi = barrier_angular_factor(&cone, 0.0, 201).unwrap();
        for (i, &v) in phi.values.iter().enumerate() {
            let th = phi.theta(i);
            let exact = 1.0 + 0.5 * th * (theta0 - th);
            assert_relative_eq!(v, exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn angular_factor_dominates_boundary_value() {
        for &(n, theta0, m_coef) in &[(3usize, std::f64::consts::FRAC_PI_2, 0.75), (4, 1.2, 1.5), (2, 2.5, 0.2)] {
            let cone = ConeSpec::new(n, theta0).unwrap();
            let phi = barrier_angular_factor(&cone, m_coef, 257).unwrap();
            let h = phi.spacing();
            let min = phi.values.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min >= 1.0 - 10.0 * h * h, "min {min} for N={n}");
        }
    }

    #[test]
    fn angular_factor_limit_for_large_negative_coefficient() {
        // For m_coef well below -1 the zeroth-order term dominates: the
        // profile is pinched between 0 and the boundary value 1, and away
        // from the boundary it scales like 1/|m_coef|.
        let cone = ConeSpec::half_space(3).unwrap();
        let m = -1e8;
        let phi = barrier_angular_factor(&cone, m, 129).unwrap();
        for &v in &phi.values {
            assert!(v > 0.0 && v <= 1.0 + 1e-12, "value {v}");
        }
        let interior = phi.values[phi.values.len() / 2];
        assert_relative_eq!(interior * m.abs(), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn angular_factor_rejects_supercritical_coefficient() {
        let cone = ConeSpec::half_space(3).unwrap();
        assert!(matches!(
            barrier_angular_factor(&cone, 2.5, 65),
            Err(Error::NotCoercive { .. })
        ));
    }

    #[test]
    fn rejects_small_node_count() {
        let cone = ConeSpec::half_space(3).unwrap();
        assert!(cross_section_eigen(&cone, 7).is_err());
    }
}

//! Monotone iteration for minimal solutions, divergence certification,
//! bisection of the extremal boundary amplitude, and decay diagnostics.
//!
//! The iteration starts from zero and repeatedly solves the linear
//! problem with the previous iterate in the nonlinearity. Iterates
//! increase monotonically; they either settle (the minimal solution) or
//! grow past a blow-up threshold (certified divergence, the computable
//! signature of nonexistence). The extremal amplitude sits between the
//! largest converged and smallest diverged values and is bracketed by
//! bisection on the verdict; no claim is made about the verdict at the
//! extremal amplitude itself, only the bracket is reported.

use serde::{Deserialize, Serialize};

use crate::barrier::weighted_sup_norm;
use crate::error::{Error, Result};
use crate::exponents::{decay_window, DecayWindow, ExponentReport};
use crate::grid::{BoundaryData, Field, Grid};
use crate::poisson::DiscreteOperator;

/// The nonlinear problem: grid (with cone), exponents, boundary data,
/// and the decay window the run is measured against.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub p: f64,
    /// Radial weight exponent; 0 recovers the unweighted equation.
    pub a: f64,
    pub mu: BoundaryData,
    pub window: DecayWindow,
}

impl ProblemSpec {
    /// Hard-validates the decay window and boundary data; returns
    /// advisory warnings (an exponent outside the multiplicity range is
    /// legal, the fold machinery just loses its guarantees).
    pub fn validate(&self, report: &ExponentReport) -> Result<Vec<String>> {
        self.mu.validate(&self.grid)?;
        decay_window(
            self.p,
            report.gamma,
            self.grid.cone.dimension,
            self.a,
            Some(self.window.alpha),
            Some(self.window.beta),
        )?;
        let mut warnings = Vec::new();
        if !report.is_admissible(self.p) {
            warnings.push(format!(
                "p = {} is outside the admissible intervals {:?}; existence of the minimal branch still holds above p* = {}, but the critical-existence and multiplicity guarantees do not apply",
                self.p, report.admissible_intervals, report.p_star
            ));
        }
        Ok(warnings)
    }

    /// Weight values `|x|^a` at radial node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        (self.a * self.grid.s(j)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationStatus {
    Converged,
    Diverged,
    MaxIter,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterStep {
    pub j: usize,
    pub sup: f64,
    pub cab: f64,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub status: IterationStatus,
    pub kappa: f64,
    pub solution: Option<Field>,
    pub trace: Vec<IterStep>,
    /// Relative strong-form residual of the converged solution.
    pub residual: Option<f64>,
    pub j_reached: usize,
    /// Worst monotonicity violation seen (solver noise scale).
    pub max_monotonicity_violation: f64,
    /// Smallest solution value over stencil nodes (converged runs).
    pub interior_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterOpts {
    pub tol: f64,
    pub max_iter: usize,
    /// Divergence threshold as a multiple of the kappa-scaled weighted
    /// boundary norm.
    pub blowup_factor: f64,
}

impl Default for IterOpts {
    fn default() -> Self {
        IterOpts { tol: 1e-10, max_iter: 500, blowup_factor: 1e6 }
    }
}

/// Monotone iteration from zero for the problem at amplitude `kappa`.
///
/// Stops as converged when successive iterates differ by less than
/// `tol * (1 + sup)`, as diverged when the weighted sup norm exceeds the
/// blow-up threshold along three consecutive increasing iterates, and as
/// undecided at the iteration cap.
pub fn minimal_solution(
    op: &DiscreteOperator,
    spec: &ProblemSpec,
    kappa: f64,
    opts: &IterOpts,
) -> Result<IterationOutcome> {
    let grid = &spec.grid;
    debug_assert!(grid.same_shape(&op.grid));
    if kappa <= 0.0 {
        return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
    }
    spec.mu.validate(grid)?;
    let mu_k = spec.mu.scaled(kappa);
    let blowup_norm = opts.blowup_factor * kappa * spec.mu.weighted_sup(grid);

    let mut u_prev = Field::zeros(grid);
    let mut trace: Vec<IterStep> = Vec::new();
    let mut max_violation = 0.0_f64;
    let mut rising = 0usize;

    for j in 0..opts.max_iter {
        let mut f = Field::zeros(grid);
        for jj in 0..grid.n_s {
            let w = spec.weight(jj);
            for ii in 0..grid.n_theta {
                *f.at_mut(jj, ii) = w * u_prev.at(jj, ii).max(0.0).powf(spec.p);
            }
        }
        let u_next = op.solve_poisson(&f, &mu_k)?;

        let sup = u_next.sup_norm();
        let mut violation = 0.0_f64;
        let mut step = 0.0_f64;
        for (a, b) in u_prev.values.iter().zip(u_next.values.iter()) {
            violation = violation.max(a - b);
            step = step.max((b - a).abs());
        }
        max_violation = max_violation.max(violation);
        if violation > 1e-9 * (1.0 + sup) {
            return Err(Error::MonotonicityViolated(violation));
        }

        let cab = weighted_sup_norm(grid, &u_next, spec.window.alpha, spec.window.beta);
        rising = if trace.last().map_or(true, |last| cab > last.cab) { rising + 1 } else { 1 };
        trace.push(IterStep { j, sup, cab });

        if cab > blowup_norm && rising >= 3 {
            return Ok(IterationOutcome {
                status: IterationStatus::Diverged,
                kappa,
                solution: None,
                trace,
                residual: None,
                j_reached: j,
                max_monotonicity_violation: max_violation,
                interior_min: None,
            });
        }

        if step < opts.tol * (1.0 + sup) {
            let residual = strong_residual(op, spec, &u_next);
            let interior_min = u_next.interior_min(grid);
            return Ok(IterationOutcome {
                status: IterationStatus::Converged,
                kappa,
                solution: Some(u_next),
                trace,
                residual: Some(residual),
                j_reached: j,
                max_monotonicity_violation: max_violation,
                interior_min: Some(interior_min),
            });
        }
        u_prev = u_next;
    }

    Ok(IterationOutcome {
        status: IterationStatus::MaxIter,
        kappa,
        solution: None,
        trace,
        residual: None,
        j_reached: opts.max_iter,
        max_monotonicity_violation: max_violation,
        interior_min: None,
    })
}

/// Relative sup residual of `-Laplace_h u = |x|^a u^p` over stencil nodes.
pub fn strong_residual(op: &DiscreteOperator, spec: &ProblemSpec, u: &Field) -> f64 {
    let grid = &spec.grid;
    let neg_lap = op.neg_laplacian(u);
    let mut num = 0.0_f64;
    let mut den = 0.0_f64;
    for j in 0..grid.n_s {
        let w = spec.weight(j);
        for i in 0..grid.n_theta {
            if grid.is_stencil_node(j, i) {
                let rhs = w * u.at(j, i).max(0.0).powf(spec.p);
                num = num.max((neg_lap.at(j, i) - rhs).abs());
                den = den.max(rhs.abs());
            }
        }
    }
    num / den.max(1e-300)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaStarResult {
    /// Largest amplitude with a converged verdict.
    pub kappa_lo: f64,
    /// Smallest amplitude with a diverged verdict.
    pub kappa_hi: f64,
    /// Bracket midpoint, the working estimate of the extremal amplitude.
    pub midpoint: f64,
    /// Relative bracket width `kappa_hi / kappa_lo - 1`.
    pub rel_width: f64,
    /// Every probed amplitude with its verdict.
    pub history: Vec<(f64, IterationStatus)>,
    /// Amplitude at which no verdict could be reached even with an
    /// escalated iteration budget, if any; the bracket then surrounds an
    /// undecided gap instead of the extremal amplitude alone.
    pub undecided: Option<f64>,
}

/// Bisects the converge/diverge verdict to bracket the extremal
/// amplitude. The initial bracket is auto-expanded until its low end
/// converges and its high end diverges.
pub fn bisect_kappa_star(
    op: &DiscreteOperator,
    spec: &ProblemSpec,
    bracket: (f64, f64),
    rel_tol: f64,
    opts: &IterOpts,
) -> Result<KappaStarResult> {
    let mut history = Vec::new();
    let probe = |kappa: f64, budget_scale: usize, history: &mut Vec<(f64, IterationStatus)>| -> Result<IterationStatus> {
        let mut o = *opts;
        o.max_iter *= budget_scale;
        let status = minimal_solution(op, spec, kappa, &o)?.status;
        history.push((kappa, status));
        Ok(status)
    };

    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::BracketFailed(format!("invalid initial bracket ({lo}, {hi})")));
    }
    let mut expand = 0;
    while probe(lo, 1, &mut history)? != IterationStatus::Converged {
        lo *= 0.5;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailed("no converged amplitude found while shrinking".into()));
        }
    }
    expand = 0;
    while probe(hi, 1, &mut history)? != IterationStatus::Diverged {
        hi *= 2.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailed("no diverged amplitude found while growing".into()));
        }
    }

    let mut undecided = None;
    while hi / lo - 1.0 >= rel_tol {
        let mid = 0.5 * (lo + hi);
        let mut verdict = probe(mid, 1, &mut history)?;
        let mut scale = 2;
        while verdict == IterationStatus::MaxIter && scale <= 8 {
            verdict = probe(mid, scale, &mut history)?;
            scale *= 2;
        }
        match verdict {
            IterationStatus::Converged => lo = mid,
            IterationStatus::Diverged => hi = mid,
            IterationStatus::MaxIter => {
                undecided = Some(mid);
                break;
            }
        }
    }

    Ok(KappaStarResult {
        kappa_lo: lo,
        kappa_hi: hi,
        midpoint: 0.5 * (lo + hi),
        rel_width: hi / lo - 1.0,
        history,
        undecided,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellStat {
    pub r_lo: f64,
    pub r_hi: f64,
    pub sup_scaled: f64,
}

/// Decay diagnostics of a nonnegative field: the scaled sup
/// `sup r^{(2+a)/(p-1)} u`, the weighted sup norm against the saturated
/// exponents, and the scaled sup per dyadic radial shell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub sup_scaled: f64,
    pub cab_star: f64,
    pub shells: Vec<ShellStat>,
}

pub fn decay_report(grid: &Grid, u: &Field, p: f64, a: f64, window: &DecayWindow) -> DecayReport {
    let e = (2.0 + a) / (p - 1.0);
    let mut sup_scaled = 0.0_f64;
    let n_shells = ((grid.s_max - grid.s_min) / std::f64::consts::LN_2).ceil() as usize;
    let mut shells: Vec<ShellStat> = (0..n_shells)
        .map(|k| ShellStat {
            r_lo: (grid.s_min + k as f64 * std::f64::consts::LN_2).exp(),
            r_hi: (grid.s_min + (k + 1) as f64 * std::f64::consts::LN_2).exp(),
            sup_scaled: 0.0,
        })
        .collect();
    for j in 0..grid.n_s {
        let scl = (e * grid.s(j)).exp();
        let shell = (((grid.s(j) - grid.s_min) / std::f64::consts::LN_2) as usize).min(n_shells.saturating_sub(1));
        for i in 0..grid.n_theta {
            let v = scl * u.at(j, i);
            sup_scaled = sup_scaled.max(v);
            shells[shell].sup_scaled = shells[shell].sup_scaled.max(v);
        }
    }
    DecayReport {
        sup_scaled,
        cab_star: weighted_sup_norm(grid, u, window.alpha_star, window.beta_star),
        shells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{build_barrier, small_kappa_certificate, weighted_profile};
    use crate::cone::ConeSpec;
    use crate::exponents::admissible_range;
    use crate::poisson::build_laplacian;

    fn small_problem() -> (DiscreteOperator, ProblemSpec) {
        let grid = Grid::new(ConeSpec::half_space(3).unwrap(), -4.0, 4.0, 81, 13).unwrap();
        let op = build_laplacian(&grid).unwrap();
        let window = decay_window(3.0, 1.0, 3, 0.0, Some(0.0), Some(-1.5)).unwrap();
        let mu = BoundaryData::gaussian_bump(&grid, 0.0, -1.5, 0.0, 0.5, 1.0);
        (op, ProblemSpec { grid, p: 3.0, a: 0.0, mu, window })
    }

    #[test]
    fn certified_small_amplitude_converges_below_barrier() {
        let (op, spec) = small_problem();
        let mut cert = build_barrier(&op, 0.0, -1.5).unwrap();
        let (delta, kappa0) = small_kappa_certificate(&op, &mut cert, spec.p, spec.a, &spec.mu).unwrap();
        let out = minimal_solution(&op, &spec, kappa0, &IterOpts::default()).unwrap();
        assert_eq!(out.status, IterationStatus::Converged);
        let u = out.solution.unwrap();
        let mut worst = f64::MIN;
        for (uv, vv) in u.values.iter().zip(cert.v.values.iter()) {
            worst = worst.max(uv - delta * vv);
        }
        assert!(worst <= 1e-9 * (1.0 + u.sup_norm()), "excess over barrier {worst}");
        assert!(out.interior_min.unwrap() > 0.0);
        assert!(out.residual.unwrap() < 10.0 * 1e-10, "residual {}", out.residual.unwrap());
    }

    #[test]
    fn monotone_in_kappa_with_ratio_bound() {
        let (op, spec) = small_problem();
        let (k1, k2) = (0.05, 0.1);
        let u1 = minimal_solution(&op, &spec, k1, &IterOpts::default()).unwrap().solution.unwrap();
        let u2 = minimal_solution(&op, &spec, k2, &IterOpts::default()).unwrap().solution.unwrap();
        let ratio = k1 / k2;
        let tol = 1e-9 * (1.0 + u2.sup_norm());
        for (a, b) in u1.values.iter().zip(u2.values.iter()) {
            assert!(*a <= ratio * *b + tol, "{a} vs {}", ratio * b);
        }
    }

    #[test]
    fn large_amplitude_diverges() {
        let (op, spec) = small_problem();
        let result = bisect_kappa_star(&op, &spec, (0.05, 2.0), 0.02, &IterOpts::default()).unwrap();
        assert!(result.undecided.is_none());
        let out = minimal_solution(&op, &spec, 10.0 * result.kappa_hi, &IterOpts::default()).unwrap();
        assert_eq!(out.status, IterationStatus::Diverged);
    }

    #[test]
    fn bisection_bracket_properties() {
        let (op, spec) = small_problem();
        let result = bisect_kappa_star(&op, &spec, (0.05, 2.0), 0.01, &IterOpts::default()).unwrap();
        assert!(result.kappa_lo > 0.0 && result.kappa_hi.is_finite());
        assert!(result.rel_width < 0.01);
        // Interval property: converged probes all at or below kappa_lo,
        // diverged probes all at or above kappa_hi.
        for &(k, st) in &result.history {
            match st {
                IterationStatus::Converged => assert!(k <= result.kappa_lo + 1e-12),
                IterationStatus::Diverged => assert!(k >= result.kappa_hi - 1e-12),
                IterationStatus::MaxIter => {}
            }
        }
    }

    #[test]
    fn doubling_mu_halves_kappa_star() {
        let (op, spec) = small_problem();
        let r1 = bisect_kappa_star(&op, &spec, (0.05, 2.0), 1e-3, &IterOpts::default()).unwrap();
        let mut spec2 = spec.clone();
        spec2.mu = spec.mu.scaled(2.0);
        let r2 = bisect_kappa_star(&op, &spec2, (0.25 * r1.midpoint, r1.midpoint), 1e-3, &IterOpts::default()).unwrap();
        let ratio = r1.midpoint / r2.midpoint;
        assert!((ratio - 2.0).abs() < 4e-3, "ratio {ratio}");
    }

    #[test]
    fn verdict_stable_under_refinement_away_from_extremal() {
        let coarse_grid = Grid::new(ConeSpec::half_space(3).unwrap(), -4.0, 4.0, 41, 9).unwrap();
        let window = decay_window(3.0, 1.0, 3, 0.0, Some(0.0), Some(-1.5)).unwrap();
        let mu = BoundaryData::gaussian_bump(&coarse_grid, 0.0, -1.5, 0.0, 0.5, 1.0);
        let coarse = ProblemSpec { grid: coarse_grid.clone(), p: 3.0, a: 0.0, mu, window: window.clone() };
        let coarse_op = build_laplacian(&coarse_grid).unwrap();
        let bracket = bisect_kappa_star(&coarse_op, &coarse, (0.05, 2.0), 0.01, &IterOpts::default()).unwrap();

        let fine_grid = coarse_grid.refined(1);
        let mu_f = BoundaryData::gaussian_bump(&fine_grid, 0.0, -1.5, 0.0, 0.5, 1.0);
        let fine = ProblemSpec { grid: fine_grid.clone(), p: 3.0, a: 0.0, mu: mu_f, window };
        let fine_op = build_laplacian(&fine_grid).unwrap();

        for (k, expected) in [
            (0.8 * bracket.kappa_lo, IterationStatus::Converged),
            (1.3 * bracket.kappa_hi, IterationStatus::Diverged),
        ] {
            let c = minimal_solution(&coarse_op, &coarse, k, &IterOpts::default()).unwrap();
            let f = minimal_solution(&fine_op, &fine, k, &IterOpts::default()).unwrap();
            assert_eq!(c.status, expected);
            assert_eq!(f.status, expected);
        }
    }

    #[test]
    fn decay_report_exact_power_is_flat() {
        let (_, spec) = small_problem();
        let e = 2.0 / (spec.p - 1.0);
        let u = Field::from_fn(&spec.grid, |s, _| (-e * s).exp());
        let rep = decay_report(&spec.grid, &u, spec.p, spec.a, &spec.window);
        assert!((rep.sup_scaled - 1.0).abs() < 1e-12);
        for sh in &rep.shells {
            assert!((sh.sup_scaled - 1.0).abs() < 1e-12, "shell {:?}", sh);
        }
        assert!(rep.cab_star.is_finite());
    }

    #[test]
    fn decay_report_profile_with_tail_factor() {
        // U_{-e,-e} differs from the pure power only through the bounded
        // (1+r^2) factor, so the scaled sup stays near 1.
        let (_, spec) = small_problem();
        let e = 2.0 / (spec.p - 1.0);
        let u = Field::from_fn(&spec.grid, |s, _| weighted_profile(-e, -e, s.exp()));
        let rep = decay_report(&spec.grid, &u, spec.p, spec.a, &spec.window);
        assert!(rep.sup_scaled <= 1.0 + 1e-12);
        assert!(rep.sup_scaled > 0.9);
    }

    #[test]
    fn validate_warns_outside_admissible_interval() {
        let (_, mut spec) = small_problem();
        let report = admissible_range(3, 2.0, 0.0).unwrap();
        assert!(spec.validate(&report).unwrap().is_empty());
        // p = 2.1 sits between p* = 2 and the cubic root, so the minimal
        // branch exists but multiplicity is not guaranteed.
        spec.p = 2.1;
        spec.window = decay_window(2.1, 1.0, 3, 0.0, None, None).unwrap();
        let warnings = spec.validate(&report).unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        let (op, spec) = small_problem();
        assert!(minimal_solution(&op, &spec, 0.0, &IterOpts::default()).is_err());
    }
}

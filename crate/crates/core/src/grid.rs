//! Truncated log-radial by angular tensor grid and grid functions.
//!
//! The cone is parametrized by `(s, theta)` with `s = log r`. A uniform
//! grid on `[s_min, s_max] x [0, theta0]` realizes a truncated annulus of
//! the cone; the rows `s = s_min` and `s = s_max` are artificial Dirichlet
//! truncation boundaries, while the lateral boundary carries the problem
//! data (`theta = theta0` for `N >= 3`, both angular ends for `N = 2`).

use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    /// Cone axis `theta = 0` for `N >= 3`: a regular interior node with a
    /// reflected stencil, not a boundary.
    Axis,
    /// Lateral boundary (carries the Dirichlet data of the problem).
    Lateral,
    /// Artificial radial truncation boundary at `s_min` or `s_max`.
    RadialEnd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    pub cone: ConeSpec,
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub n_theta: usize,
}

impl Grid {
    pub fn new(cone: ConeSpec, s_min: f64, s_max: f64, n_s: usize, n_theta: usize) -> Result<Self> {
        cone.validate()?;
        if !(s_min < s_max) {
            return Err(Error::InvalidGrid(format!("s_min = {s_min} must be below s_max = {s_max}")));
        }
        if n_s < 3 || n_theta < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes per direction, got {n_s} x {n_theta}")));
        }
        Ok(Grid { cone, s_min, s_max, n_s, n_theta })
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h_s(&self) -> f64 {
        (self.s_max - self.s_min) / (self.n_s - 1) as f64
    }

    pub fn h_theta(&self) -> f64 {
        self.cone.theta0 / (self.n_theta - 1) as f64
    }

    /// Largest grid spacing, the `h` of certificate tolerances.
    pub fn h_max(&self) -> f64 {
        self.h_s().max(self.h_theta())
    }

    pub fn s(&self, j: usize) -> f64 {
        self.s_min + j as f64 * self.h_s()
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.h_theta()
    }

    pub fn r(&self, j: usize) -> f64 {
        self.s(j).exp()
    }

    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        j * self.n_theta + i
    }

    pub fn classify(&self, j: usize, i: usize) -> NodeClass {
        let lateral = if self.cone.dimension == 2 {
            i == 0 || i == self.n_theta - 1
        } else {
            i == self.n_theta - 1
        };
        if lateral {
            NodeClass::Lateral
        } else if j == 0 || j == self.n_s - 1 {
            NodeClass::RadialEnd
        } else if i == 0 {
            NodeClass::Axis
        } else {
            NodeClass::Interior
        }
    }

    /// True for nodes where the operator stencil applies (not Dirichlet).
    pub fn is_stencil_node(&self, j: usize, i: usize) -> bool {
        matches!(self.classify(j, i), NodeClass::Interior | NodeClass::Axis)
    }

    /// Angular weight at node `i`.
    pub fn w_theta(&self, i: usize) -> f64 {
        self.cone.angular_weight(self.theta(i))
    }

    /// Trapezoid quadrature weight of node `(j, i)` for integrals over the
    /// truncated cone, with the constant cross-sphere factor dropped:
    /// `e^{N s} w(theta) h_s h_theta` with halved edge cells.
    pub fn quad_weight(&self, j: usize, i: usize) -> f64 {
        let nf = self.cone.dimension as f64;
        let edge_s = if j == 0 || j == self.n_s - 1 { 0.5 } else { 1.0 };
        let edge_t = if i == 0 || i == self.n_theta - 1 { 0.5 } else { 1.0 };
        (nf * self.s(j)).exp() * self.w_theta(i) * self.h_s() * self.h_theta() * edge_s * edge_t
    }

    /// Grid with both spacings halved `k` times (same bounds).
    pub fn refined(&self, k: u32) -> Grid {
        let f = 1usize << k;
        Grid {
            cone: self.cone.clone(),
            s_min: self.s_min,
            s_max: self.s_max,
            n_s: (self.n_s - 1) * f + 1,
            n_theta: (self.n_theta - 1) * f + 1,
        }
    }

    /// Grid widened by `extra` in `s` on the right, keeping the spacing.
    pub fn widened(&self, extra: f64) -> Grid {
        let add = (extra / self.h_s()).round() as usize;
        Grid {
            cone: self.cone.clone(),
            s_min: self.s_min,
            s_max: self.s_max + add as f64 * self.h_s(),
            n_s: self.n_s + add,
            n_theta: self.n_theta,
        }
    }

    /// Grid widened by `extra` on both radial ends, keeping the spacing.
    pub fn widened_both(&self, extra: f64) -> Grid {
        let add = (extra / self.h_s()).round() as usize;
        Grid {
            cone: self.cone.clone(),
            s_min: self.s_min - add as f64 * self.h_s(),
            s_max: self.s_max + add as f64 * self.h_s(),
            n_s: self.n_s + 2 * add,
            n_theta: self.n_theta,
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.n_s == other.n_s && self.n_theta == other.n_theta
    }
}

/// A real-valued grid function, stored angular-index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub n_s: usize,
    pub n_theta: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field { n_s: grid.n_s, n_theta: grid.n_theta, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn<F: FnMut(f64, f64) -> f64>(grid: &Grid, mut f: F) -> Field {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_s {
            for i in 0..grid.n_theta {
                values.push(f(grid.s(j), grid.theta(i)));
            }
        }
        Field { n_s: grid.n_s, n_theta: grid.n_theta, values }
    }

    #[inline]
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.n_theta + i]
    }

    #[inline]
    pub fn at_mut(&mut self, j: usize, i: usize) -> &mut f64 {
        &mut self.values[j * self.n_theta + i]
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.n_s == grid.n_s && self.n_theta == grid.n_theta
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::MAX, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Smallest value over stencil (non-Dirichlet) nodes.
    pub fn interior_min(&self, grid: &Grid) -> f64 {
        let mut m = f64::MAX;
        for j in 0..grid.n_s {
            for i in 0..grid.n_theta {
                if grid.is_stencil_node(j, i) {
                    m = m.min(self.at(j, i));
                }
            }
        }
        m
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn axpy(&mut self, c: f64, other: &Field) {
        for (v, o) in self.values.iter_mut().zip(other.values.iter()) {
            *v += c * o;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let values = self.values.iter().zip(other.values.iter()).map(|(a, b)| a - b).collect();
        Field { n_s: self.n_s, n_theta: self.n_theta, values }
    }

    /// Largest pointwise difference against another field.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Lateral Dirichlet trace, one profile in `s` per lateral edge
/// (one edge for `N >= 3`, two for `N = 2`), with the decay exponents the
/// trace is measured against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryData {
    /// One vector of length `n_s` per lateral edge, ordered as the edges
    /// appear with increasing angular index.
    pub edges: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
}

impl BoundaryData {
    /// Validates shape, nonnegativity, and nontriviality against a grid.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let expected = if grid.cone.dimension == 2 { 2 } else { 1 };
        if self.edges.len() != expected {
            return Err(Error::InvalidGrid(format!(
                "boundary data has {} edges, grid needs {expected}",
                self.edges.len()
            )));
        }
        let mut max = 0.0_f64;
        for edge in &self.edges {
            if edge.len() != grid.n_s {
                return Err(Error::InvalidGrid(format!(
                    "boundary edge has {} samples, grid has {} radial nodes",
                    edge.len(),
                    grid.n_s
                )));
            }
            for &v in edge {
                if v < 0.0 {
                    return Err(Error::NegativeBoundaryData(v));
                }
                max = max.max(v);
            }
        }
        if max == 0.0 {
            return Err(Error::ZeroBoundaryData);
        }
        Ok(())
    }

    /// Builds from a radial profile applied to every lateral edge.
    pub fn from_profile<F: Fn(f64) -> f64>(grid: &Grid, alpha: f64, beta: f64, f: F) -> BoundaryData {
        let n_edges = if grid.cone.dimension == 2 { 2 } else { 1 };
        let profile: Vec<f64> = (0..grid.n_s).map(|j| f(grid.s(j))).collect();
        BoundaryData { edges: vec![profile; n_edges], alpha, beta }
    }

    /// Gaussian bump in `s`.
    pub fn gaussian_bump(grid: &Grid, alpha: f64, beta: f64, center: f64, width: f64, amplitude: f64) -> BoundaryData {
        Self::from_profile(grid, alpha, beta, |s| {
            amplitude * (-(s - center) * (s - center) / (2.0 * width * width)).exp()
        })
    }

    /// Smooth bump supported in the `s`-interval `[lo, hi]`.
    pub fn compact_bump(grid: &Grid, alpha: f64, beta: f64, lo: f64, hi: f64, amplitude: f64) -> BoundaryData {
        Self::from_profile(grid, alpha, beta, |s| {
            if s <= lo || s >= hi {
                0.0
            } else {
                let t = 2.0 * (s - lo) / (hi - lo) - 1.0; // in (-1, 1)
                amplitude * (-1.0 / (1.0 - t * t)).exp() * std::f64::consts::E
            }
        })
    }

    /// Angular indices of the lateral edges, smallest first.
    pub fn edge_indices(grid: &Grid) -> Vec<usize> {
        if grid.cone.dimension == 2 {
            vec![0, grid.n_theta - 1]
        } else {
            vec![grid.n_theta - 1]
        }
    }

    /// Value at lateral node `(j, i)`; `i` must be a lateral index.
    pub fn value_at(&self, grid: &Grid, j: usize, i: usize) -> f64 {
        let idx = Self::edge_indices(grid).iter().position(|&e| e == i).expect("not a lateral index");
        self.edges[idx][j]
    }

    /// Largest boundary value scaled by the weighted profile, the norm the
    /// blow-up threshold is measured against.
    pub fn weighted_sup(&self, grid: &Grid) -> f64 {
        let mut m = 0.0_f64;
        for edge in &self.edges {
            for (j, &v) in edge.iter().enumerate() {
                let u = crate::barrier::weighted_profile(self.alpha, self.beta, grid.r(j));
                m = m.max(v / u);
            }
        }
        m
    }

    pub fn scaled(&self, c: f64) -> BoundaryData {
        BoundaryData {
            edges: self.edges.iter().map(|e| e.iter().map(|v| c * v).collect()).collect(),
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeSpec;

    fn test_grid() -> Grid {
        Grid::new(ConeSpec::half_space(3).unwrap(), -2.0, 2.0, 21, 9).unwrap()
    }

    #[test]
    fn classification_dim3() {
        let g = test_grid();
        assert_eq!(g.classify(0, 3), NodeClass::RadialEnd);
        assert_eq!(g.classify(20, 0), NodeClass::RadialEnd);
        assert_eq!(g.classify(5, 8), NodeClass::Lateral);
        assert_eq!(g.classify(5, 0), NodeClass::Axis);
        assert_eq!(g.classify(5, 4), NodeClass::Interior);
    }

    #[test]
    fn classification_dim2() {
        let g = Grid::new(ConeSpec::new(2, 1.0).unwrap(), -1.0, 1.0, 11, 7).unwrap();
        assert_eq!(g.classify(5, 0), NodeClass::Lateral);
        assert_eq!(g.classify(5, 6), NodeClass::Lateral);
        assert_eq!(g.classify(0, 3), NodeClass::RadialEnd);
        assert_eq!(g.classify(5, 3), NodeClass::Interior);
    }

    #[test]
    fn spacings_uniform() {
        let g = test_grid();
        assert!((g.h_s() - 0.2).abs() < 1e-15);
        assert!((g.h_theta() - std::f64::consts::FRAC_PI_2 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn refinement_and_widening() {
        let g = test_grid();
        let r = g.refined(1);
        assert_eq!(r.n_s, 41);
        assert_eq!(r.n_theta, 17);
        assert!((r.h_s() - 0.5 * g.h_s()).abs() < 1e-15);
        let w = g.widened(std::f64::consts::LN_2);
        assert!((w.h_s() - g.h_s()).abs() < 1e-12);
        assert!((w.s_max - g.s_max - std::f64::consts::LN_2).abs() < g.h_s());
    }

    #[test]
    fn boundary_data_validation() {
        let g = test_grid();
        let mu = BoundaryData::gaussian_bump(&g, 0.0, -1.5, 0.0, 0.5, 1.0);
        assert!(mu.validate(&g).is_ok());
        let zero = BoundaryData::from_profile(&g, 0.0, -1.5, |_| 0.0);
        assert!(matches!(zero.validate(&g), Err(Error::ZeroBoundaryData)));
        let neg = BoundaryData::from_profile(&g, 0.0, -1.5, |s| s);
        assert!(matches!(neg.validate(&g), Err(Error::NegativeBoundaryData(_))));
    }

    #[test]
    fn compact_bump_support() {
        let g = test_grid();
        let mu = BoundaryData::compact_bump(&g, 0.0, -1.5, -0.5, 0.5, 2.0);
        mu.validate(&g).unwrap();
        for (j, &v) in mu.edges[0].iter().enumerate() {
            let s = g.s(j);
            if s <= -0.5 || s >= 0.5 {
                assert_eq!(v, 0.0);
            }
        }
        // Peak value is the amplitude at the center.
        let mid = mu.edges[0][10];
        assert!((mid - 2.0).abs() < 1e-12, "center value {mid}");
    }

    #[test]
    fn quad_weight_measures_volume() {
        // Sum of weights approximates the weighted volume integral of 1.
        let g = Grid::new(ConeSpec::half_space(3).unwrap(), -1.0, 1.0, 201, 65).unwrap();
        let total: f64 = (0..g.n_s)
            .flat_map(|j| (0..g.n_theta).map(move |i| (j, i)))
            .map(|(j, i)| g.quad_weight(j, i))
            .sum();
        // integral of e^{3s} ds over [-1,1] times integral of sin over [0,pi/2]
        let exact = ((3.0_f64).exp() - (-3.0_f64).exp()) / 3.0 * 1.0;
        assert!((total - exact).abs() / exact < 1e-3, "total {total} vs {exact}");
    }
}

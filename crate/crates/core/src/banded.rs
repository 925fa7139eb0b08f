//! Banded matrix storage and LU factorization with partial pivoting.
//!
//! LAPACK-style band storage: a matrix with `kl` subdiagonals and `ku`
//! superdiagonals is stored column-major in a `(2*kl + ku + 1) x n` array,
//! entry `(i, j)` at band row `kl + ku + i - j`. The extra `kl` rows at the
//! top hold fill-in produced by row interchanges.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    /// Column-major, `width = 2*kl + ku + 1` entries per column.
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Banded {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, data: vec![0.0; width * n] }
    }

    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        // Factorization fill widens the superdiagonal band to kl + ku.
        debug_assert!(i + self.kl + self.ku >= j && j + self.kl >= i, "entry ({i},{j}) outside band");
        j * self.width() + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                sums[i] += self.data[self.slot(i, j)].abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for i in lo..=hi {
                y[i] += self.data[self.slot(i, j)] * xj;
            }
        }
        y
    }

    /// LU factorization with partial pivoting. Consumes the matrix.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut ipiv = vec![0usize; n];

        for k in 0..n {
            // Pivot search in column k, rows k..=min(k+kl, n-1).
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut piv_val = self.get(k, k).abs();
            for i in (k + 1)..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > piv_val {
                    piv = i;
                    piv_val = v;
                }
            }
            if piv_val == 0.0 {
                return Err(Error::SingularSystem(k));
            }
            ipiv[k] = piv;
            let cols_end = (k + kl + ku).min(n - 1);
            if piv != k {
                for j in k..=cols_end {
                    // Both entries lie in the widened band by construction.
                    let a = self.slot(k, j);
                    let b = self.slot(piv, j);
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.slot(k, k)];
            for i in (k + 1)..=last {
                let s = self.slot(i, k);
                let m = self.data[s] / diag;
                self.data[s] = m;
                if m != 0.0 {
                    for j in (k + 1)..=cols_end {
                        let upper = self.data[self.slot(k, j)];
                        if upper != 0.0 {
                            let t = self.slot(i, j);
                            self.data[t] -= m * upper;
                        }
                    }
                }
            }
        }
        Ok(BandedLu { mat: self, ipiv })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    mat: Banded,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Solves `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let ku = self.mat.ku;
        debug_assert_eq!(b.len(), n);
        let mut x = b.to_vec();

        // Forward: apply interchanges and the unit lower factor.
        for k in 0..n {
            let piv = self.ipiv[k];
            if piv != k {
                x.swap(k, piv);
            }
            let last = (k + kl).min(n - 1);
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=last {
                    x[i] -= self.mat.data[self.mat.slot(i, k)] * xk;
                }
            }
        }
        // Back substitution with the upper factor (bandwidth kl + ku).
        for k in (0..n).rev() {
            let hi = (k + kl + ku).min(n - 1);
            let mut acc = x[k];
            for j in (k + 1)..=hi {
                acc -= self.mat.data[self.mat.slot(k, j)] * x[j];
            }
            x[k] = acc / self.mat.data[self.mat.slot(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn dense_solve(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>) {
        let n = b.len();
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if a[i][k].abs() > a[piv][k].abs() {
                    piv = i;
                }
            }
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let m = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= m * a[k][j];
                }
                b[i] -= m * b[k];
            }
        }
        for k in (0..n).rev() {
            for j in k + 1..n {
                b[k] -= a[k][j] * b[j];
            }
            b[k] /= a[k][k];
        }
    }

    #[test]
    fn random_banded_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &(n, kl, ku) in &[(12usize, 2usize, 3usize), (30, 5, 5), (7, 1, 0), (9, 0, 2), (40, 6, 1)] {
            let mut band = Banded::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if i + ku >= j && j + kl >= i {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        // Boost the diagonal so the system is comfortably regular.
                        let v = if i == j { v + 4.0 } else { v };
                        band.set(i, j, v);
                        dense[i][j] = v;
                    }
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = band.factor().unwrap();
            let x = lu.solve(&b);
            let mut bd = b.clone();
            dense_solve(&mut dense.clone(), &mut bd);
            for (xi, di) in x.iter().zip(bd.iter()) {
                assert!((xi - di).abs() < 1e-10, "banded {xi} vs dense {di}");
            }
        }
    }

    #[test]
    fn pivoting_handles_weak_diagonal() {
        // Leading entry zero forces an interchange immediately.
        let mut band = Banded::zeros(4, 1, 1);
        band.set(0, 0, 0.0);
        band.set(0, 1, 2.0);
        band.set(1, 0, 1.0);
        band.set(1, 1, 1.0);
        band.set(1, 2, 1.0);
        band.set(2, 1, 3.0);
        band.set(2, 2, 1.0);
        band.set(2, 3, 1.0);
        band.set(3, 2, 1.0);
        band.set(3, 3, 2.0);
        let reference = band.clone();
        let lu = band.factor().unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let x = lu.solve(&b);
        let r = reference.matvec(&x);
        for (ri, bi) in r.iter().zip(b.iter()) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let mut band = Banded::zeros(3, 1, 1);
        band.set(0, 0, 1.0);
        band.set(0, 1, 1.0);
        // Row 1 and 2 both zero in column 1 after elimination.
        band.set(1, 0, 0.0);
        band.set(1, 1, 0.0);
        band.set(1, 2, 0.0);
        band.set(2, 1, 0.0);
        band.set(2, 2, 1.0);
        assert!(matches!(band.factor(), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn residual_small_for_stencil_like_matrix() {
        // Tridiagonal-in-blocks pattern close to the discrete Laplacian.
        let n = 200;
        let kl = 10;
        let ku = 10;
        let mut band = Banded::zeros(n, kl, ku);
        for i in 0..n {
            band.set(i, i, 4.0);
            if i + 1 < n {
                band.set(i, i + 1, -1.0);
                band.set(i + 1, i, -1.0);
            }
            if i + kl < n {
                band.set(i, i + kl, -1.0);
                band.set(i + kl, i, -1.0);
            }
        }
        let reference = band.clone();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = band.factor().unwrap().solve(&b);
        let r = reference.matvec(&x);
        let err = r.iter().zip(b.iter()).fold(0.0_f64, |m, (a, c)| m.max((a - c).abs()));
        assert!(err < 1e-12, "residual {err}");
    }
}

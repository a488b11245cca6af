//! Small dense complex matrices and a one-sided Jacobi SVD.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ENTRIES: usize = 1_000_000;
const MAX_SVD_SIDE: usize = 512;
const MAX_SWEEPS: usize = 80;

/// Row-major dense matrix. Real matrices are stored with zero imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl SmallMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::BadDims(format!("{rows}x{cols} matrix")));
        }
        if rows * cols > MAX_ENTRIES {
            return Err(Error::TooLarge { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{} entries for {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| Complex64::new(0.0, 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |r, c| Complex64::new(if r == c { values[r] } else { 0.0 }, 0.0))
    }

    /// Gaussian entries; `complex` draws the imaginary part too.
    pub fn random(rows: usize, cols: usize, complex: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(rows, cols, |_, _| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = if complex {
                rng.sample(rand_distr::StandardNormal)
            } else {
                0.0
            };
            Complex64::new(re, im)
        })
    }

    /// Haar-ish random orthogonal (or unitary) matrix via Gram-Schmidt of a
    /// Gaussian matrix.
    pub fn random_unitary(n: usize, complex: bool, seed: u64) -> Self {
        let g = Self::random(n, n, complex, seed);
        let mut q = Self::zeros(n, n);
        let mut filled = 0;
        for c in 0..n {
            let mut col = g.column(c);
            for _ in 0..2 {
                for k in 0..filled {
                    let qk = q.column(k);
                    let proj: Complex64 = qk.iter().zip(&col).map(|(a, b)| a.conj() * b).sum();
                    for (x, y) in col.iter_mut().zip(&qk) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = vec_norm(&col);
            for (r, x) in col.iter().enumerate() {
                q[(r, filled)] = x / norm;
            }
            filled += 1;
        }
        q
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> SmallMatrix {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &SmallMatrix) -> Result<SmallMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.data[k * other.cols + c];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols, "vector length");
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^H x` without forming the adjoint.
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows, "vector length");
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (row, xr) in self.data.chunks_exact(self.cols).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * xr;
            }
        }
        out
    }

    /// Scales row `i` by `weights[i]` (i.e. `diag(weights) * self`).
    pub fn scale_rows(&self, weights: &[f64]) -> Result<SmallMatrix> {
        if weights.len() != self.rows {
            return Err(Error::DimMismatch(format!(
                "{} weights for {} rows",
                weights.len(),
                self.rows
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols, |r, c| self[(r, c)] * weights[r]))
    }

    pub fn sub(&self, other: &SmallMatrix) -> SmallMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |r, c| self[(r, c)] - other[(r, c)])
    }

    pub fn scale(&self, factor: f64) -> SmallMatrix {
        Self::from_fn(self.rows, self.cols, |r, c| self[(r, c)] * factor)
    }

    pub fn frobenius(&self) -> f64 {
        vec_norm(&self.data)
    }
}

impl std::ops::Index<(usize, usize)> for SmallMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SmallMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Thin SVD `m = u * diag(sigma) * v^H` with `k = min(rows, cols)` columns.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: SmallMatrix,
    pub sigma: Vec<f64>,
    pub v: SmallMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> SmallMatrix {
        let k = self.sigma.len();
        let us = SmallMatrix::from_fn(self.u.rows, k, |r, c| self.u[(r, c)] * self.sigma[c]);
        us.matmul(&self.v.adjoint()).expect("consistent SVD factors")
    }

    /// Number of singular values above `rel_tol * sigma_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > rel_tol * top).count()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd_small(m: &SmallMatrix) -> Result<Svd> {
    if m.rows > MAX_SVD_SIDE || m.cols > MAX_SVD_SIDE {
        return Err(Error::TooLarge {
            rows: m.rows,
            cols: m.cols,
        });
    }
    if m.rows < m.cols {
        let t = svd_tall(&m.adjoint())?;
        return Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    svd_tall(m)
}

fn svd_tall(m: &SmallMatrix) -> Result<Svd> {
    let (rows, n) = (m.rows, m.cols);
    // Column-major working copies so the rotations touch contiguous memory.
    let mut g: Vec<Vec<Complex64>> = (0..n).map(|c| m.column(c)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|c| {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[c] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();

    let tol = f64::EPSILON * rows as f64;
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = g[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = g[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = g[p].iter().zip(&g[q]).map(|(a, b)| a.conj() * b).sum();
                let gabs = gamma.norm();
                if gabs == 0.0 || gabs <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate column q by the phase of gamma so the 2x2 Gram block is
                // real symmetric, then apply the classical real Jacobi rotation.
                let phase = (gamma / gabs).conj();
                let zeta = (beta - alpha) / (2.0 * gabs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut g, p, q, phase, c, s);
                rotate(&mut v, p, q, phase, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut sigma: Vec<(f64, usize)> = g.iter().enumerate().map(|(i, col)| (vec_norm(col), i)).collect();
    sigma.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let top = sigma.first().map(|s| s.0).unwrap_or(0.0);
    let mut u_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (slot, &(s, idx)) in sigma.iter().enumerate() {
        if s > top * 1e-13 && s > 0.0 {
            u_cols.push(g[idx].iter().map(|z| z / s).collect());
        } else {
            u_cols.push(Vec::new());
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &pending, rows);

    let u = SmallMatrix::from_fn(rows, n, |r, c| u_cols[c][r]);
    let vm = SmallMatrix::from_fn(n, n, |r, c| v[sigma[c].1][r]);
    Ok(Svd {
        u,
        sigma: sigma.into_iter().map(|s| s.0).collect(),
        v: vm,
    })
}

fn rotate(cols: &mut [Vec<Complex64>], p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let bq = *b * phase;
        let ap = *a;
        *a = ap * c - bq * s;
        *b = ap * s + bq * c;
    }
}

/// Fills the empty slots in `cols` with unit vectors orthogonal to all the
/// others (Gram-Schmidt over the standard basis, twice for stability).
fn complete_orthonormal(cols: &mut [Vec<Complex64>], pending: &[usize], dim: usize) {
    let mut candidate = 0;
    for &slot in pending {
        loop {
            assert!(candidate < dim, "ran out of basis vectors");
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for col in cols.iter().filter(|c| !c.is_empty()) {
                    let proj: Complex64 = col.iter().zip(&e).map(|(a, b)| a.conj() * b).sum();
                    for (x, y) in e.iter_mut().zip(col) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = vec_norm(&e);
            if norm > 0.5 {
                cols[slot] = e.into_iter().map(|z| z / norm).collect();
                break;
            }
        }
    }
}

/// Largest singular value by power iteration on `m^H m`. Converges from
/// below; callers that need an upper bound should use [`svd_small`].
pub fn spectral_norm_power(m: &SmallMatrix, iterations: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Complex64> = (0..m.cols)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let n = vec_norm(&x);
        if n == 0.0 {
            return 0.0;
        }
        for z in &mut x {
            *z /= n;
        }
        let y = m.mul_vec(&x);
        estimate = vec_norm(&y);
        x = m.adjoint_mul_vec(&y);
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormality_residual(q: &SmallMatrix) -> f64 {
        q.adjoint()
            .matmul(q)
            .unwrap()
            .sub(&SmallMatrix::identity(q.cols()))
            .frobenius()
    }

    fn check(m: &SmallMatrix) -> Svd {
        let svd = svd_small(m).unwrap();
        let rel = svd.reconstruct().sub(m).frobenius() / m.frobenius();
        assert!(rel < 1e-10, "reconstruction {rel}");
        assert!(orthonormality_residual(&svd.u) < 1e-10);
        assert!(orthonormality_residual(&svd.v) < 1e-10);
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(svd.sigma.iter().all(|&s| s >= 0.0));
        svd
    }

    #[test]
    fn diagonal_case() {
        let svd = check(&SmallMatrix::diag_real(&[3.0, 2.0, 1.0]));
        assert_eq!(svd.sigma, vec![3.0, 2.0, 1.0]);
        for i in 0..3 {
            assert!((svd.u[(i, i)].norm() - 1.0).abs() < 1e-15);
            assert!((svd.v[(i, i)].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn permutation_has_unit_singular_values() {
        let svd = check(&SmallMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap());
        for s in svd.sigma {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn wide_complex_and_rank_deficient() {
        check(&SmallMatrix::random(3, 7, true, 4));
        let a = SmallMatrix::random(6, 2, true, 8);
        let b = SmallMatrix::random(2, 5, true, 9);
        let low_rank = a.matmul(&b).unwrap();
        let svd = check(&low_rank);
        assert_eq!(svd.rank(1e-12), 2);
    }

    #[test]
    fn zero_matrix() {
        let svd = svd_small(&SmallMatrix::zeros(3, 2)).unwrap();
        assert_eq!(svd.sigma, vec![0.0, 0.0]);
        assert!(orthonormality_residual(&svd.u) < 1e-12);
    }

    #[test]
    fn power_iteration_matches_top_singular_value() {
        let m = SmallMatrix::random(5, 4, true, 3);
        let top = svd_small(&m).unwrap().sigma[0];
        let est = spectral_norm_power(&m, 500, 1);
        assert!((top - est).abs() / top < 1e-10);
    }

    #[test]
    fn size_guard() {
        let big = SmallMatrix::zeros(513, 2);
        assert!(matches!(svd_small(&big), Err(Error::TooLarge { .. })));
        assert!(matches!(
            SmallMatrix::new(1001, 1000, vec![]),
            Err(Error::TooLarge { .. })
        ));
    }
}

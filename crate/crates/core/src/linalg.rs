//! Dense symmetric linear algebra: cyclic Jacobi eigendecomposition and
//! Cholesky factorization with the triangular solves the integrators need.
//!
//! Matrices are stored row-major in a flat `Vec<f64>`.

use crate::error::{check_len, Error, Result};

/// Off-diagonal convergence threshold for Jacobi, relative to ‖J‖_F.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;
const NORM_FLOOR: f64 = 1e-300;

/// Dense symmetric matrix. Symmetry is enforced on construction by averaging
/// the input with its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from row-major entries, replacing them by
    /// `(J + Jᵀ)/2`.
    pub fn new(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be at least 1".into()));
        }
        check_len(n * n, data.len())?;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in diag.iter().enumerate() {
            data[i * n + i] = v;
        }
        Self { n, data }
    }

    /// Builds a matrix from nested rows (convenience for small literals).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            check_len(n, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `J x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `½ xᵀ J x`.
    pub fn half_quadratic(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.mul_vec(x))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `J = Zᵀ diag(D) Z` with the rows of `Z` the eigenvectors and `D` ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    n: usize,
    /// Row-major; row `k` is the eigenvector for `values[k]`.
    z: Vec<f64>,
    values: Vec<f64>,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row `k` of `Z`.
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.z[k * self.n..(k + 1) * self.n]
    }

    /// `Z x`: coordinates of `x` in the eigenbasis.
    pub fn to_eigen(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|k| dot(self.vector(k), x)).collect()
    }

    /// `Zᵀ u`: back from eigen-coordinates.
    pub fn from_eigen(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &uk) in u.iter().enumerate() {
            axpy(uk, self.vector(k), &mut out);
        }
        out
    }

    /// `Zᵀ diag(D) Z`, used to check the decomposition.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for k in 0..n {
            let zk = self.vector(k);
            let dk = self.values[k];
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] += dk * zk[i] * zk[j];
                }
            }
        }
        SymMatrix { n, data }
    }
}

/// Lower-triangular `B` with `J = B Bᵀ`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// `B Bᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymMatrix { n, data }
    }

    /// `Bᵀ v`. `½‖Bᵀv‖²` is the kinetic energy `½ vᵀ J v`.
    pub fn mul_transpose_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| (j..n).map(|i| self.get(i, j) * v[i]).sum())
            .collect()
    }

    fn forward(&self, r: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = dot(row, &r[..i]);
            r[i] = (r[i] - s) / self.get(i, i);
        }
    }

    fn backward(&self, x: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.get(k, i) * x[k];
            }
            x[i] = s / self.get(i, i);
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Fails if the sweep cap is hit or if any eigenvalue is not strictly
/// positive (the matrices handled here are Hessians at a mode).
pub fn sym_eigen(j: &SymMatrix) -> Result<EigenDecomp> {
    let n = j.n;
    let mut a = j.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = j.frobenius().max(NORM_FLOOR);

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let residual = off(&a);
        if residual > JACOBI_TOL * scale {
            return Err(Error::EigenNoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
                residual,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let values: Vec<f64> = order.iter().map(|&k| a[k * n + k]).collect();
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(Error::NotSpd { index, value });
    }
    let mut z = vec![0.0; n * n];
    for (row, &k) in order.iter().enumerate() {
        for i in 0..n {
            z[row * n + i] = v[i * n + k];
        }
    }
    Ok(EigenDecomp { n, z, values })
}

/// Cholesky factorization `J = B Bᵀ`.
pub fn cholesky(j: &SymMatrix) -> Result<CholFactor> {
    let n = j.n;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..=i {
            let s = j.get(i, k) - dot(&l[i * n..i * n + k], &l[k * n..k * n + k]);
            if i == k {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotSpd { index: i, value: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + k] = s / l[k * n + k];
            }
        }
    }
    Ok(CholFactor { n, l })
}

/// Solves `B Bᵀ x = r`.
pub fn chol_solve(b: &CholFactor, r: &[f64]) -> Result<Vec<f64>> {
    check_len(b.n, r.len())?;
    let mut x = r.to_vec();
    b.forward(&mut x);
    b.backward(&mut x);
    Ok(x)
}

/// `B⁻ᵀ z` by back-substitution. For `z ~ N(0, I)` the result has covariance `J⁻¹`.
pub fn chol_sample_velocity(b: &CholFactor, z: &[f64]) -> Result<Vec<f64>> {
    check_len(b.n, z.len())?;
    let mut x = z.to_vec();
    b.backward(&mut x);
    Ok(x)
}

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, HermitianMatrix};
use crate::error::{Error, Result};

/// Default relative threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-9;

/// Jacobi stops once the off-diagonal Frobenius mass is below this fraction
/// of `‖A‖_F`.
const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `A = V Λ V†` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl EigDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<Complex64> {
        self.eigenvectors.column(j)
    }

    /// `V f(Λ) V†`
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * w;
                if vik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        HermitianMatrix::from_hermitian_part(&out)
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.map_eigenvalues(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    /// Absolute cut-off used by [`numerical_rank`].
    pub fn rank_threshold(&self, rank_tol: f64) -> f64 {
        rank_tol * self.max_abs_eigenvalue().max(1.0)
    }

    pub fn rank(&self, rank_tol: f64) -> usize {
        let thr = self.rank_threshold(rank_tol);
        self.eigenvalues.iter().filter(|x| x.abs() > thr).count()
    }

    /// Indices of eigenvalues strictly above the rank threshold, ascending.
    pub fn support_indices(&self, rank_tol: f64) -> Vec<usize> {
        let thr = self.rank_threshold(rank_tol);
        (0..self.dim())
            .filter(|&j| self.eigenvalues[j] > thr)
            .collect()
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<EigDecomposition> {
    if !a.as_matrix().is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(jacobi(a.as_matrix()))
}

pub(crate) fn jacobi(input: &ComplexMatrix) -> EigDecomposition {
    let n = input.rows();
    let mut a = input.as_slice().to_vec();
    let mut v = ComplexMatrix::identity(n);
    let norm = input.frobenius_norm();
    let skip = 1e-18 * norm;

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * norm || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let b = apq.norm();
                if b <= skip || b == 0.0 {
                    continue;
                }
                let e = apq / b;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                let se = e * s;
                let se_bar = se.conj();
                let ce_bar = e.conj() * c;
                let ce = e * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * c - se_bar * akq;
                    a[k * n + q] = akp * s + ce_bar * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk * c - se * aqk;
                    a[q * n + k] = apk * s + ce * aqk;
                }
                a[p * n + p] = Complex64::new(app - t * b, 0.0);
                a[q * n + q] = Complex64::new(aqq + t * b, 0.0);
                a[p * n + q] = Complex64::new(0.0, 0.0);
                a[q * n + p] = Complex64::new(0.0, 0.0);

                let vs = v.as_mut_slice();
                for k in 0..n {
                    let vkp = vs[k * n + p];
                    let vkq = vs[k * n + q];
                    vs[k * n + p] = vkp * c - se_bar * vkq;
                    vs[k * n + q] = vkp * s + ce_bar * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    EigDecomposition {
        eigenvalues: order.iter().map(|&i| a[i * n + i].re).collect(),
        eigenvectors: v.select_columns(&order),
    }
}

/// Number of eigenvalues with `|λ| > rank_tol · max(1, max|λ|)`.
pub fn numerical_rank(a: &HermitianMatrix, rank_tol: f64) -> Result<usize> {
    if rank_tol.is_nan() || rank_tol < 0.0 {
        return Err(Error::invalid(format!("rank_tol must be >= 0, got {rank_tol}")));
    }
    Ok(eig_hermitian(a)?.rank(rank_tol))
}

/// Frobenius-nearest positive semidefinite matrix.
pub fn psd_project(a: &HermitianMatrix) -> HermitianMatrix {
    jacobi(a.as_matrix()).map_eigenvalues(|x| x.max(0.0))
}

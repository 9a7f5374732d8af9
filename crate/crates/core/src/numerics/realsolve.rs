//! Small dense real least-squares helpers for the constraint maps used by the
//! rank-reduction engine.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Orthonormal basis of the row space of a real matrix, built by classical
/// Gram-Schmidt with reorthogonalization.
pub(crate) struct RowSpace {
    cols: usize,
    basis: Vec<Vec<f64>>,
    /// Each input row expressed in `basis`.
    coeffs: Vec<Vec<f64>>,
}

impl RowSpace {
    /// Rows whose component outside the span of the previous rows is below
    /// `drop_tol` times their norm are treated as dependent.
    pub(crate) fn new(rows: &[Vec<f64>], cols: usize, drop_tol: f64) -> Self {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for row in rows {
            debug_assert_eq!(row.len(), cols);
            let norm = dot(row, row).sqrt();
            if norm == 0.0 {
                continue;
            }
            let mut w = row.clone();
            for _ in 0..2 {
                for q in &basis {
                    let s = dot(q, &w);
                    axpy(&mut w, -s, q);
                }
            }
            let rn = dot(&w, &w).sqrt();
            if rn > drop_tol * norm {
                w.iter_mut().for_each(|x| *x /= rn);
                basis.push(w);
            }
        }
        let coeffs = rows
            .iter()
            .map(|row| basis.iter().map(|q| dot(q, row)).collect())
            .collect();
        Self {
            cols,
            basis,
            coeffs,
        }
    }

    pub(crate) fn rank(&self) -> usize {
        self.basis.len()
    }

    pub(crate) fn nullity(&self) -> usize {
        self.cols - self.rank()
    }

    /// Orthogonal projection of `y` onto the kernel of the matrix.
    pub(crate) fn project_onto_kernel(&self, y: &mut [f64]) {
        for _ in 0..2 {
            for q in &self.basis {
                let s = dot(q, y);
                axpy(y, -s, q);
            }
        }
    }

    /// Minimum-norm least-squares solution of `L y = b`.
    pub(crate) fn min_norm_solution(&self, b: &[f64]) -> Vec<f64> {
        let k = self.rank();
        let mut y = vec![0.0; self.cols];
        if k == 0 {
            return y;
        }
        // normal equations in the row-space coordinates: (CᵀC) c = Cᵀ b
        let mut gram = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for (row, &bi) in self.coeffs.iter().zip(b) {
            for i in 0..k {
                rhs[i] += row[i] * bi;
                for j in 0..=i {
                    gram[i * k + j] += row[i] * row[j];
                }
            }
        }
        let c = cholesky_solve(&mut gram, &rhs, k);
        for (q, ci) in self.basis.iter().zip(&c) {
            axpy(&mut y, *ci, q);
        }
        y
    }
}

/// Solves `A x = b` for SPD `A` given in its lower triangle. Pivots that
/// collapse are treated as zero directions.
fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Vec<f64> {
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        let d = if d > 1e-14 * scale { d.sqrt() } else { 0.0 };
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = if d > 0.0 { s / d } else { 0.0 };
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * z[k];
        }
        z[i] = if a[i * n + i] > 0.0 { s / a[i * n + i] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * x[k];
        }
        x[i] = if a[i * n + i] > 0.0 { s / a[i * n + i] } else { 0.0 };
    }
    x
}

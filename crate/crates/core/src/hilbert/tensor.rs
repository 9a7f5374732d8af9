use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{jacobi, ComplexMatrix, HermitianMatrix};

/// Local dimensions `d₁, …, dₙ` of a multipartite system. Subsystem 0 is the
/// most significant digit of a composite index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemShape {
    dims: Vec<usize>,
    total: usize,
}

impl SystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("a system needs at least one subsystem"));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::invalid(format!("local dimension {d} < 2")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("total dimension overflows"))?;
        Ok(Self { dims, total })
    }

    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    /// Hilbert dimension of the selected subsystems.
    pub fn subsystem_dim(&self, set: &SubsystemSet) -> usize {
        set.indices().iter().map(|&i| self.dims[i]).product()
    }

    pub fn check(&self, set: &SubsystemSet) -> Result<()> {
        match set.indices().iter().find(|&&i| i >= self.len()) {
            Some(&index) => Err(Error::SubsystemOutOfRange {
                index,
                count: self.len(),
            }),
            None => Ok(()),
        }
    }

    /// Shape of the selected factors, in order.
    pub fn restrict(&self, set: &SubsystemSet) -> Result<SystemShape> {
        self.check(set)?;
        SystemShape::new(set.indices().iter().map(|&i| self.dims[i]).collect())
    }

    /// Concatenation `self ⊗ other`.
    pub fn concat(&self, other: &SystemShape) -> SystemShape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SystemShape::new(dims).expect("concatenation of valid shapes")
    }
}

/// Strictly increasing list of subsystem positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsystemSet(Vec<usize>);

impl SubsystemSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "subsystem indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(Self(indices))
    }

    /// Sorts the indices and rejects duplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices)
    }

    pub fn range(range: std::ops::Range<usize>) -> Self {
        Self(range.collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn complement(&self, n: usize) -> SubsystemSet {
        SubsystemSet((0..n).filter(|i| !self.contains(*i)).collect())
    }

    pub fn union(&self, other: &SubsystemSet) -> SubsystemSet {
        let mut v: Vec<usize> = self.0.iter().chain(&other.0).copied().collect();
        v.sort_unstable();
        v.dedup();
        SubsystemSet(v)
    }

    pub fn offset(&self, by: usize) -> SubsystemSet {
        SubsystemSet(self.0.iter().map(|i| i + by).collect())
    }
}

/// Index bookkeeping for splitting a composite space into kept and traced
/// factors: `composite(a, t)` is the composite index whose kept digits
/// encode `a` and whose traced digits encode `t`.
#[derive(Clone, Debug)]
pub struct Bipartition {
    kept_dim: usize,
    traced_dim: usize,
    index: Vec<usize>,
}

impl Bipartition {
    pub fn new(shape: &SystemShape, keep: &SubsystemSet) -> Result<Self> {
        shape.check(keep)?;
        let dims = shape.dims();
        let n = dims.len();
        let kept_dim = shape.subsystem_dim(keep);
        let traced_dim = shape.total_dim() / kept_dim;
        let mut index = vec![0usize; shape.total_dim()];
        let mut digits = vec![0usize; n];
        for composite in 0..shape.total_dim() {
            let mut rem = composite;
            for pos in (0..n).rev() {
                digits[pos] = rem % dims[pos];
                rem /= dims[pos];
            }
            let (mut a, mut t) = (0usize, 0usize);
            for pos in 0..n {
                if keep.contains(pos) {
                    a = a * dims[pos] + digits[pos];
                } else {
                    t = t * dims[pos] + digits[pos];
                }
            }
            index[a * traced_dim + t] = composite;
        }
        Ok(Self {
            kept_dim,
            traced_dim,
            index,
        })
    }

    pub fn kept_dim(&self) -> usize {
        self.kept_dim
    }

    pub fn traced_dim(&self) -> usize {
        self.traced_dim
    }

    pub fn total_dim(&self) -> usize {
        self.index.len()
    }

    #[inline]
    pub fn composite(&self, kept: usize, traced: usize) -> usize {
        self.index[kept * self.traced_dim + traced]
    }

    /// Partial trace of an arbitrary (not necessarily Hermitian) operator.
    pub fn trace_out(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let (dk, dt) = (self.kept_dim, self.traced_dim);
        let mut out = ComplexMatrix::zeros(dk, dk);
        for a in 0..dk {
            for b in 0..dk {
                let mut s = Complex64::new(0.0, 0.0);
                for t in 0..dt {
                    s += x[(self.composite(a, t), self.composite(b, t))];
                }
                out[(a, b)] = s;
            }
        }
        out
    }

    /// `Tr_traced(|u⟩⟨v|)`
    pub fn trace_out_outer(&self, u: &[Complex64], v: &[Complex64]) -> ComplexMatrix {
        let (dk, dt) = (self.kept_dim, self.traced_dim);
        let mut out = ComplexMatrix::zeros(dk, dk);
        for a in 0..dk {
            for b in 0..dk {
                let mut s = Complex64::new(0.0, 0.0);
                for t in 0..dt {
                    s += u[self.composite(a, t)] * v[self.composite(b, t)].conj();
                }
                out[(a, b)] = s;
            }
        }
        out
    }

    /// `Y ⊗ I` with the factors interleaved back into composite order.
    pub fn embed(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let n = self.total_dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for a in 0..self.kept_dim {
            for b in 0..self.kept_dim {
                let yab = y[(a, b)];
                if yab == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for t in 0..self.traced_dim {
                    out[(self.composite(a, t), self.composite(b, t))] = yab;
                }
            }
        }
        out
    }
}

/// `Tr_{keepᶜ} X`
pub fn partial_trace(
    x: &HermitianMatrix,
    shape: &SystemShape,
    keep: &SubsystemSet,
) -> Result<HermitianMatrix> {
    if x.dim() != shape.total_dim() {
        return Err(Error::mismatch(shape.total_dim(), x.dim()));
    }
    let split = Bipartition::new(shape, keep)?;
    Ok(HermitianMatrix::from_hermitian_part(&split.trace_out(x.as_matrix())))
}

/// Partial trace of a general square operator.
pub fn partial_trace_operator(
    x: &ComplexMatrix,
    shape: &SystemShape,
    keep: &SubsystemSet,
) -> Result<ComplexMatrix> {
    if x.rows() != shape.total_dim() || !x.is_square() {
        return Err(Error::mismatch(shape.total_dim(), x.rows()));
    }
    Ok(Bipartition::new(shape, keep)?.trace_out(x))
}

/// Adjoint of [`partial_trace`]: acts as `Y` on `on` and as the identity on
/// every other factor.
pub fn embed_with_identity(
    y: &HermitianMatrix,
    shape: &SystemShape,
    on: &SubsystemSet,
) -> Result<HermitianMatrix> {
    shape.check(on)?;
    let expected = shape.subsystem_dim(on);
    if y.dim() != expected {
        return Err(Error::mismatch(expected, y.dim()));
    }
    let split = Bipartition::new(shape, on)?;
    Ok(HermitianMatrix::from_hermitian_part(&split.embed(y.as_matrix())))
}

/// Negative eigenvalues below `-psd_slack(rank_tol)` mark a state as
/// significantly non-PSD.
pub(crate) fn psd_slack(rank_tol: f64) -> f64 {
    (1e3 * rank_tol).max(1e-10)
}

/// Isometry whose columns span the eigenvectors of `rho` above the rank
/// threshold.
pub fn support_basis(rho: &HermitianMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let eig = jacobi(rho.as_matrix());
    let scale = eig.max_abs_eigenvalue().max(1.0);
    if eig.min_eigenvalue() < -psd_slack(rank_tol) * scale {
        return Err(Error::InvalidState(format!(
            "operator is not positive semidefinite (min eigenvalue {:e})",
            eig.min_eigenvalue()
        )));
    }
    Ok(eig.eigenvectors.select_columns(&eig.support_indices(rank_tol)))
}

/// Orthogonal projector onto the numerical support of a PSD operator.
pub fn support_projector(rho: &HermitianMatrix, rank_tol: f64) -> Result<HermitianMatrix> {
    let v = support_basis(rho, rank_tol)?;
    Ok(HermitianMatrix::from_hermitian_part(&(&v * &v.adjoint())))
}

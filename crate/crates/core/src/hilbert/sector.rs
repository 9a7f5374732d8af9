use std::collections::HashMap;

use num_complex::Complex64;

use super::tensor::{Bipartition, SubsystemSet, SystemShape};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermitianMatrix};

/// Largest tensor-space dimension `d^N` we are willing to materialize.
const MAX_TENSOR_DIM: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Statistics {
    Fermionic,
    Bosonic,
}

impl Statistics {
    /// Eigenvalue of an adjacent transposition on the sector.
    pub fn exchange_sign(self) -> f64 {
        match self {
            Statistics::Fermionic => -1.0,
            Statistics::Bosonic => 1.0,
        }
    }
}

/// Binomial coefficient; `0` when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of the N-particle sector over `d` levels.
pub fn sector_dim(statistics: Statistics, particles: usize, levels: usize) -> usize {
    match statistics {
        Statistics::Fermionic => binomial(levels, particles),
        Statistics::Bosonic => binomial(particles + levels - 1, particles),
    }
}

/// Isometric embedding of the antisymmetric (Slater) or symmetric (Dicke)
/// N-particle sector into `(C_d)^{⊗N}`.
#[derive(Clone, Debug)]
pub struct SectorEmbedding {
    statistics: Statistics,
    particles: usize,
    levels: usize,
    /// Sorted level tuples labelling the sector basis, in lexicographic order.
    basis: Vec<Vec<usize>>,
    isometry: ComplexMatrix,
}

impl SectorEmbedding {
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn tensor_dim(&self) -> usize {
        self.isometry.rows()
    }

    pub fn basis(&self) -> &[Vec<usize>] {
        &self.basis
    }

    pub fn isometry(&self) -> &ComplexMatrix {
        &self.isometry
    }

    /// Shape `[d; N]` of the ambient tensor space.
    pub fn tensor_shape(&self) -> SystemShape {
        SystemShape::new(vec![self.levels; self.particles]).expect("levels >= 2")
    }

    /// Sector operator → tensor-space operator `W σ W†`.
    pub fn lift(&self, sigma: &HermitianMatrix) -> Result<HermitianMatrix> {
        if sigma.dim() != self.dim() {
            return Err(Error::mismatch(self.dim(), sigma.dim()));
        }
        Ok(sigma.conjugate_by(&self.isometry))
    }

    /// Tensor-space operator → sector operator `W† X W`.
    pub fn compress(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        if x.dim() != self.tensor_dim() {
            return Err(Error::mismatch(self.tensor_dim(), x.dim()));
        }
        Ok(x.compress_by(&self.isometry))
    }
}

fn sorting_sign(digits: &[usize]) -> f64 {
    let mut inversions = 0usize;
    for i in 0..digits.len() {
        for j in (i + 1)..digits.len() {
            if digits[i] > digits[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn sector_tuples(statistics: Statistics, particles: usize, levels: usize) -> Vec<Vec<usize>> {
    fn rec(
        out: &mut Vec<Vec<usize>>,
        cur: &mut Vec<usize>,
        start: usize,
        remaining: usize,
        levels: usize,
        strict: bool,
    ) {
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        for l in start..levels {
            cur.push(l);
            rec(out, cur, if strict { l + 1 } else { l }, remaining - 1, levels, strict);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(
        &mut out,
        &mut Vec::new(),
        0,
        particles,
        levels,
        statistics == Statistics::Fermionic,
    );
    out
}

/// Builds the sector isometry for `N` particles over `d` levels.
pub fn sector_isometry(
    statistics: Statistics,
    particles: usize,
    levels: usize,
) -> Result<SectorEmbedding> {
    if particles == 0 {
        return Err(Error::invalid("a sector needs at least one particle"));
    }
    if levels < 2 {
        return Err(Error::invalid(format!("need at least 2 levels, got {levels}")));
    }
    if statistics == Statistics::Fermionic && particles > levels {
        return Err(Error::PauliExclusion { particles, levels });
    }
    let tensor_dim = u32::try_from(particles)
        .ok()
        .and_then(|n| levels.checked_pow(n))
        .filter(|&t| t <= MAX_TENSOR_DIM)
        .ok_or_else(|| {
            Error::invalid(format!(
                "tensor space {levels}^{particles} is too large to materialize"
            ))
        })?;

    let basis = sector_tuples(statistics, particles, levels);
    let column_of: HashMap<&[usize], usize> = basis
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_slice(), i))
        .collect();

    let mut isometry = ComplexMatrix::zeros(tensor_dim, basis.len());
    let mut digits = vec![0usize; particles];
    let mut sorted = vec![0usize; particles];
    let n_fact = factorial(particles);
    for composite in 0..tensor_dim {
        let mut rem = composite;
        for pos in (0..particles).rev() {
            digits[pos] = rem % levels;
            rem /= levels;
        }
        sorted.copy_from_slice(&digits);
        sorted.sort_unstable();
        let Some(&col) = column_of.get(sorted.as_slice()) else {
            continue;
        };
        let value = match statistics {
            Statistics::Fermionic => sorting_sign(&digits) / n_fact.sqrt(),
            Statistics::Bosonic => {
                let mut multiplicity = 1.0;
                let mut run = 1;
                for w in sorted.windows(2) {
                    if w[0] == w[1] {
                        run += 1;
                    } else {
                        multiplicity *= factorial(run);
                        run = 1;
                    }
                }
                multiplicity *= factorial(run);
                // distinct orderings of the multiset
                (multiplicity / n_fact).sqrt()
            }
        };
        isometry[(composite, col)] = Complex64::new(value, 0.0);
    }

    Ok(SectorEmbedding {
        statistics,
        particles,
        levels,
        basis,
        isometry,
    })
}

/// Partial trace of an N-particle sector state down to its first `k`
/// particles, expressed in the k-particle sector basis. `k = N` returns the
/// state itself.
pub fn sector_partial_trace(
    sigma: &HermitianMatrix,
    emb: &SectorEmbedding,
    k: usize,
) -> Result<HermitianMatrix> {
    SectorTrace::new(emb, k)?.apply(sigma)
}

/// Precomputed data for repeated sector partial traces.
#[derive(Clone, Debug)]
pub struct SectorTrace {
    outer: SectorEmbedding,
    inner: SectorEmbedding,
    split: Bipartition,
}

impl SectorTrace {
    pub fn new(emb: &SectorEmbedding, k: usize) -> Result<Self> {
        if k == 0 || k > emb.particles() {
            return Err(Error::invalid(format!(
                "marginal particle count must satisfy 1 <= k <= N = {}, got {k}",
                emb.particles()
            )));
        }
        let inner = sector_isometry(emb.statistics(), k, emb.levels())?;
        let split = Bipartition::new(&emb.tensor_shape(), &SubsystemSet::range(0..k))?;
        Ok(Self {
            outer: emb.clone(),
            inner,
            split,
        })
    }

    pub fn outer(&self) -> &SectorEmbedding {
        &self.outer
    }

    pub fn inner(&self) -> &SectorEmbedding {
        &self.inner
    }

    pub fn apply(&self, sigma: &HermitianMatrix) -> Result<HermitianMatrix> {
        if sigma.dim() != self.outer.dim() {
            return Err(Error::mismatch(self.outer.dim(), sigma.dim()));
        }
        Ok(HermitianMatrix::from_hermitian_part(
            &self.apply_operator(sigma.as_matrix()),
        ))
    }

    /// Marginal of a general sector operator.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let w = self.outer.isometry();
        let lifted = &(w * x) * &w.adjoint();
        let reduced = self.split.trace_out(&lifted);
        let wk = self.inner.isometry();
        &(&wk.adjoint() * &reduced) * wk
    }

    /// Marginal of `|u⟩⟨v|` for sector vectors `u`, `v`.
    pub fn apply_outer(&self, u: &[Complex64], v: &[Complex64]) -> ComplexMatrix {
        let w = self.outer.isometry();
        let lu = w.mul_vec(u);
        let lv = w.mul_vec(v);
        let m = self.split.trace_out_outer(&lu, &lv);
        let wk = self.inner.isometry();
        &(&wk.adjoint() * &m) * wk
    }

    /// Adjoint map: k-sector operator → N-sector operator
    /// `W_N† ((W_k Y W_k†) ⊗ I) W_N`.
    pub fn adjoint(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let wk = self.inner.isometry();
        let lifted = &(wk * y) * &wk.adjoint();
        let embedded = self.split.embed(&lifted);
        let w = self.outer.isometry();
        &(&w.adjoint() * &embedded) * w
    }
}

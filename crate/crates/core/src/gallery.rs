//! Worked examples and seeded random instances.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channels::KrausSet;
use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, SubsystemSet, SystemShape};
use crate::marginal::{ConsistencyInstance, MarginalConstraint};
use crate::numerics::{jacobi, ComplexMatrix, HermitianMatrix};

/// Largest qubit count for which dense examples are built.
pub const MAX_DENSE_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let data = match self {
            Pauli::I => vec![o, z, z, o],
            Pauli::X => vec![z, o, o, z],
            Pauli::Y => vec![z, -i, i, z],
            Pauli::Z => vec![o, z, z, -o],
        };
        ComplexMatrix::from_vec(2, 2, data).expect("2x2")
    }

    /// Image of the basis state `|bit⟩` as `(phase, flipped bit)`.
    fn act(self, bit: usize) -> (Complex64, usize) {
        let sign = if bit == 0 { 1.0 } else { -1.0 };
        match self {
            Pauli::I => (Complex64::new(1.0, 0.0), bit),
            Pauli::X => (Complex64::new(1.0, 0.0), bit ^ 1),
            Pauli::Y => (Complex64::new(0.0, sign), bit ^ 1),
            Pauli::Z => (Complex64::new(sign, 0.0), bit),
        }
    }
}

/// A tensor product of single-qubit Paulis, one letter per qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::invalid("a Pauli string needs at least one qubit"));
        }
        Ok(Self { letters })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; n])
    }

    /// Identity except for the given `(position, letter)` pairs.
    pub fn with_letters(n: usize, placed: &[(usize, Pauli)]) -> Result<Self> {
        let mut letters = vec![Pauli::I; n];
        for &(pos, p) in placed {
            if pos >= n {
                return Err(Error::SubsystemOutOfRange {
                    index: pos,
                    count: n,
                });
            }
            letters[pos] = p;
        }
        Self::new(letters)
    }

    /// The ring stabilizer `Z_{i−1} X_i Z_{i+1}` (indices mod `n`).
    pub fn ring_generator(n: usize, i: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid(format!("a ring needs at least 3 qubits, got {n}")));
        }
        Self::with_letters(
            n,
            &[((i + n - 1) % n, Pauli::Z), (i % n, Pauli::X), ((i + 1) % n, Pauli::Z)],
        )
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// `P|idx⟩ = phase |image⟩`, qubit 0 being the most significant bit.
    fn act_on_basis(&self, idx: usize) -> (Complex64, usize) {
        let n = self.len();
        let mut phase = Complex64::new(1.0, 0.0);
        let mut image = 0;
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = (idx >> (n - 1 - q)) & 1;
            let (ph, b) = p.act(bit);
            phase *= ph;
            image |= b << (n - 1 - q);
        }
        (phase, image)
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let d = 1usize << self.len();
        if v.len() != d {
            return Err(Error::mismatch(d, v.len()));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for (idx, &x) in v.iter().enumerate() {
            let (ph, image) = self.act_on_basis(idx);
            out[image] += ph * x;
        }
        Ok(out)
    }

    /// `P X` for a `2ⁿ × m` matrix.
    pub fn left_multiply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = 1usize << self.len();
        if x.rows() != d {
            return Err(Error::mismatch(d, x.rows()));
        }
        let mut out = ComplexMatrix::zeros(d, x.cols());
        for idx in 0..d {
            let (ph, image) = self.act_on_basis(idx);
            for j in 0..x.cols() {
                out[(image, j)] += ph * x[(idx, j)];
            }
        }
        Ok(out)
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        self.letters
            .iter()
            .skip(1)
            .fold(self.letters[0].matrix(), |acc, p| acc.kron(&p.matrix()))
    }
}

/// `2⁻ⁿ Πᵢ (I + gᵢ)` for the ring generators `gᵢ = Z_{i−1} X_i Z_{i+1}`: the
/// ring graph state, pure and fixed by every generator.
pub fn ring_graph_state(n: usize) -> Result<HermitianMatrix> {
    if n < 3 {
        return Err(Error::invalid(format!("a ring needs at least 3 qubits, got {n}")));
    }
    if n > MAX_DENSE_QUBITS {
        return Err(Error::invalid(format!(
            "at most {MAX_DENSE_QUBITS} qubits are supported, got {n}"
        )));
    }
    let d = 1usize << n;
    let mut acc = ComplexMatrix::identity(d);
    for i in 0..n {
        let g = PauliString::ring_generator(n, i)?;
        let gm = g.left_multiply(&acc)?;
        acc.add_scaled(Complex64::new(1.0, 0.0), &gm);
    }
    Ok(HermitianMatrix::from_hermitian_part(&acc.scale(1.0 / d as f64)))
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<SubsystemSet> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(SubsystemSet::new(cur.clone()).expect("increasing"));
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in (i + 1)..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Every k-qubit marginal of an n-qubit system fixed to `I/2^k`.
pub fn maximally_mixed_klocal_instance(n: usize, k: usize) -> Result<ConsistencyInstance> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("need 1 <= k < n, got n = {n}, k = {k}")));
    }
    let target = HermitianMatrix::maximally_mixed(1 << k);
    let constraints = k_subsets(n, k)
        .into_iter()
        .map(|s| MarginalConstraint::new(s, target.clone()))
        .collect::<Result<Vec<_>>>()?;
    ConsistencyInstance::new(SystemShape::qubits(n)?, constraints)
}

fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// `A A† / Tr(A A†)` with `A` a `dim × rank` complex Gaussian matrix.
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<HermitianMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::invalid(format!("rank must lie in 1..={dim}, got {rank}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = ginibre(dim, rank, &mut rng);
    let rho = &a * &a.adjoint();
    let t = rho.trace().re;
    Ok(HermitianMatrix::from_hermitian_part(&rho.scale(1.0 / t)))
}

/// A random state of the given rank and the instance made of its exact
/// marginals on `subsets`.
pub fn random_feasible_instance(
    shape: &SystemShape,
    subsets: &[SubsystemSet],
    global_rank: usize,
    seed: u64,
) -> Result<(ConsistencyInstance, HermitianMatrix)> {
    let rho = random_density(shape.total_dim(), global_rank, seed)?;
    let constraints = subsets
        .iter()
        .map(|s| {
            Ok(MarginalConstraint {
                subsystems: s.clone(),
                target: partial_trace(&rho, shape, s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ConsistencyInstance::new(shape.clone(), constraints)?, rho))
}

/// A random channel with `count` Kraus operators, `K_i = G_i (Σ G_j† G_j)^{-1/2}`
/// for complex Gaussian `G_i`. The count must be at least `⌈d_in / d_out⌉`.
pub fn random_channel(d_in: usize, d_out: usize, count: usize, seed: u64) -> Result<KrausSet> {
    let min_count = d_in.div_ceil(d_out.max(1));
    if count < min_count.max(1) || count > d_in * d_out {
        return Err(Error::invalid(format!(
            "Kraus count must lie in {}..={}, got {count}",
            min_count.max(1),
            d_in * d_out
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gs: Vec<ComplexMatrix> = (0..count).map(|_| ginibre(d_out, d_in, &mut rng)).collect();
    let mut m = ComplexMatrix::zeros(d_in, d_in);
    for g in &gs {
        m.add_scaled(Complex64::new(1.0, 0.0), &(&g.adjoint() * g));
    }
    let inv_sqrt = jacobi(&m.hermitian_part())
        .map_eigenvalues(|l| 1.0 / l.sqrt())
        .into_matrix();
    KrausSet::new(gs.iter().map(|g| g * &inv_sqrt).collect())
}

/// Haar-distributed unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ginibre(dim, dim, &mut rng);
    // modified Gram-Schmidt on the columns; phases follow the R diagonal
    let mut q = ComplexMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut v = g.column(j);
        for k in 0..j {
            let s: Complex64 = (0..dim).map(|i| q[(i, k)].conj() * v[i]).sum();
            for i in 0..dim {
                v[i] -= s * q[(i, k)];
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            q[(i, j)] = v[i] / norm;
        }
    }
    q
}

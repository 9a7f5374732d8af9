//! Rank reduction for fermionic and bosonic k-particle marginals, and the
//! rank-3 family of N-boson qubit states sharing the maximally mixed
//! 2-boson marginal.

use crate::error::{Error, Result};
use crate::hilbert::{
    binomial, sector_dim, sector_isometry, SectorEmbedding, SectorTrace, Statistics,
};
use crate::marginal::{check_density, ConstraintSystem, LinearConstraint, MarginalMap};
use crate::numerics::{HermitianMatrix, RANK_TOL};
use crate::reduce::{reduce_system, ReduceOptions, ReductionTrace};

/// A required k-particle marginal of an N-particle fermionic or bosonic state
/// over `levels` single-particle levels.
#[derive(Clone, Debug)]
pub struct SectorInstance {
    statistics: Statistics,
    particles: usize,
    levels: usize,
    k: usize,
    target: HermitianMatrix,
}

impl SectorInstance {
    pub fn new(
        statistics: Statistics,
        particles: usize,
        levels: usize,
        k: usize,
        target: HermitianMatrix,
    ) -> Result<Self> {
        if statistics == Statistics::Fermionic && particles > levels {
            return Err(Error::PauliExclusion { particles, levels });
        }
        if k == 0 || k > particles {
            return Err(Error::invalid(format!(
                "marginal particle count must satisfy 1 <= k <= N = {particles}, got {k}"
            )));
        }
        let expected = sector_dim(statistics, k, levels);
        if target.dim() != expected {
            return Err(Error::mismatch(expected, target.dim()));
        }
        check_density(&target, RANK_TOL)?;
        Ok(Self {
            statistics,
            particles,
            levels,
            k,
            target,
        })
    }

    /// The instance whose target is the k-particle marginal of `sigma`.
    pub fn from_state(
        statistics: Statistics,
        particles: usize,
        levels: usize,
        k: usize,
        sigma: &HermitianMatrix,
    ) -> Result<Self> {
        let emb = sector_isometry(statistics, particles, levels)?;
        let target = SectorTrace::new(&emb, k)?.apply(sigma)?;
        Self::new(statistics, particles, levels, k, target)
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn target(&self) -> &HermitianMatrix {
        &self.target
    }

    /// Dimension of the N-particle sector.
    pub fn sector_dim(&self) -> usize {
        sector_dim(self.statistics, self.particles, self.levels)
    }

    pub fn embedding(&self) -> Result<SectorEmbedding> {
        sector_isometry(self.statistics, self.particles, self.levels)
    }

    pub fn to_system(&self) -> Result<ConstraintSystem> {
        let trace = SectorTrace::new(&self.embedding()?, self.k)?;
        ConstraintSystem::new(
            self.sector_dim(),
            vec![LinearConstraint {
                map: MarginalMap::Sector(trace),
                target: self.target.clone(),
            }],
        )
    }
}

/// Reduces an N-particle sector state with the prescribed k-particle
/// marginal to one of rank at most `rank(target)`.
pub fn reduce_rank_sector(
    sigma0: &HermitianMatrix,
    instance: &SectorInstance,
    opts: &ReduceOptions,
) -> Result<(HermitianMatrix, ReductionTrace)> {
    reduce_system(sigma0, &instance.to_system()?, opts)
}

/// Admissible `p` for [`bosonic_sigma_p`]: `max(1, ⌈(N−1)/3⌉) ..= min(N−1, ⌊(2N+1)/3⌋)`.
pub fn sigma_p_window(particles: usize) -> Option<(usize, usize)> {
    if particles < 2 {
        return None;
    }
    let lo = particles.saturating_sub(1).div_ceil(3).max(1);
    let hi = ((2 * particles + 1) / 3).min(particles - 1);
    (lo <= hi).then_some((lo, hi))
}

/// Occupation-basis weights of [`bosonic_sigma_p`], indexed by the number of
/// excited bosons `0..=N`.
pub fn sigma_p_weights(particles: usize, p: usize) -> Result<Vec<f64>> {
    let n = particles;
    let Some((lo, hi)) = sigma_p_window(n) else {
        return Err(Error::invalid(format!(
            "need at least 2 particles, got {n}"
        )));
    };
    if p < lo || p > hi {
        return Err(Error::InadmissibleOccupation {
            particles: n,
            p,
            min: lo,
            max: hi,
        });
    }
    let (nf, pf) = (n as f64, p as f64);
    let mut w = vec![0.0; n + 1];
    w[0] = (3.0 * pf + 1.0 - nf) / (6.0 * pf);
    w[n] = (2.0 * nf - 3.0 * pf + 1.0) / (6.0 * (nf - pf));
    // the unnormalized Dicke vector has squared norm C(N, p)
    w[p] = binomial(n, p) as f64 / (6.0 * binomial(n - 2, p - 1) as f64);
    Ok(w)
}

/// The N-boson qubit state that mixes `|0…0⟩`, `|1…1⟩` and the Dicke state
/// with `p` excitations so that every 2-boson marginal is maximally mixed.
/// Returned in the occupation basis (`N + 1` levels).
pub fn bosonic_sigma_p(particles: usize, p: usize) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::from_real_diagonal(&sigma_p_weights(
        particles, p,
    )?))
}

/// `I₃/3` on the symmetric 2-qubit subspace.
pub fn bosonic_maximally_mixed_2() -> HermitianMatrix {
    HermitianMatrix::maximally_mixed(3)
}

/// k-boson marginal of a qubit state diagonal in the occupation basis,
/// computed without materializing the tensor space: a Dicke state with `m`
/// excitations splits as `Σⱼ √(C(k,j) C(N−k,m−j) / C(N,m)) |D_{k,j}⟩|D_{N−k,m−j}⟩`.
pub fn occupation_marginal(weights: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = weights
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::invalid("empty weight vector"))?;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= {n}, got {k}")));
    }
    let mut out = vec![0.0; k + 1];
    for (m, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let total = binomial(n, m) as f64;
        for (j, o) in out.iter_mut().enumerate() {
            if j <= m && m - j <= n - k {
                *o += w * (binomial(k, j) * binomial(n - k, m - j)) as f64 / total;
            }
        }
    }
    Ok(out)
}

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{psd_slack, support_basis, Bipartition, SectorTrace};
use crate::numerics::{jacobi, ComplexMatrix, HermitianMatrix};

/// A linear "take the marginal" map from global operators to local ones.
#[derive(Clone, Debug)]
pub enum MarginalMap {
    /// Ordinary partial trace onto a subset of tensor factors.
    PartialTrace(Bipartition),
    /// Partial trace of an N-particle sector state onto k particles.
    Sector(SectorTrace),
}

impl MarginalMap {
    pub fn input_dim(&self) -> usize {
        match self {
            MarginalMap::PartialTrace(split) => split.total_dim(),
            MarginalMap::Sector(st) => st.outer().dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            MarginalMap::PartialTrace(split) => split.kept_dim(),
            MarginalMap::Sector(st) => st.inner().dim(),
        }
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        match self {
            MarginalMap::PartialTrace(split) => split.trace_out(x),
            MarginalMap::Sector(st) => st.apply_operator(x),
        }
    }

    /// Image of `|u⟩⟨v|`.
    pub fn apply_outer(&self, u: &[Complex64], v: &[Complex64]) -> ComplexMatrix {
        match self {
            MarginalMap::PartialTrace(split) => split.trace_out_outer(u, v),
            MarginalMap::Sector(st) => st.apply_outer(u, v),
        }
    }

    pub fn adjoint(&self, y: &ComplexMatrix) -> ComplexMatrix {
        match self {
            MarginalMap::PartialTrace(split) => split.embed(y),
            MarginalMap::Sector(st) => st.adjoint(y),
        }
    }
}

/// One linear marginal constraint `map(ρ) = target`.
#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub map: MarginalMap,
    pub target: HermitianMatrix,
}

/// Residuals of a candidate global state against a set of constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// `‖map_i(ρ) − target_i‖_F` per constraint.
    pub residuals: Vec<f64>,
    /// `max(0, −λ_min(ρ))`
    pub psd_violation: f64,
    /// `|Tr ρ − 1|`
    pub trace_error: f64,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Largest of all recorded errors.
    pub fn worst(&self) -> f64 {
        self.max_residual()
            .max(self.psd_violation)
            .max(self.trace_error)
    }

    pub fn is_consistent(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// A global dimension plus a list of linear marginal constraints; the common
/// currency of the feasibility solver and the rank-reduction engine.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    dim: usize,
    constraints: Vec<LinearConstraint>,
}

impl ConstraintSystem {
    pub fn new(dim: usize, constraints: Vec<LinearConstraint>) -> Result<Self> {
        for c in &constraints {
            if c.map.input_dim() != dim {
                return Err(Error::mismatch(dim, c.map.input_dim()));
            }
            if c.target.dim() != c.map.output_dim() {
                return Err(Error::mismatch(c.map.output_dim(), c.target.dim()));
            }
        }
        Ok(Self { dim, constraints })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraint_residuals(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| (&c.map.apply(rho) - c.target.as_matrix()).frobenius_norm())
            .collect()
    }

    pub fn residuals(&self, rho: &HermitianMatrix) -> Result<ResidualReport> {
        if rho.dim() != self.dim {
            return Err(Error::mismatch(self.dim, rho.dim()));
        }
        let eig = jacobi(rho.as_matrix());
        Ok(ResidualReport {
            residuals: self.constraint_residuals(rho.as_matrix()),
            psd_violation: (-eig.min_eigenvalue()).max(0.0),
            trace_error: (rho.trace() - 1.0).abs(),
        })
    }

    pub fn target_ranks(&self, rank_tol: f64) -> Vec<usize> {
        self.constraints
            .iter()
            .map(|c| jacobi(c.target.as_matrix()).rank(rank_tol))
            .collect()
    }

    /// `⌊√(Σᵢ rank(targetᵢ)²)⌋`
    pub fn rank_bound(&self, rank_tol: f64) -> usize {
        isqrt(self.target_ranks(rank_tol).iter().map(|&r| (r * r) as u64).sum())
    }

    /// Isometry onto the largest subspace that can carry the support of any
    /// feasible state: every `v` with `map_i(|v⟩⟨v|)` inside `supp(target_i)`
    /// for all `i`. `None` means the whole space.
    pub(crate) fn feasible_support(&self, rank_tol: f64) -> Result<Option<ComplexMatrix>> {
        let mut penalty = ComplexMatrix::zeros(self.dim, self.dim);
        let mut any = false;
        for c in &self.constraints {
            let w = support_basis(&c.target, rank_tol)?;
            if w.cols() == c.target.dim() {
                continue;
            }
            any = true;
            let outside = &ComplexMatrix::identity(c.target.dim()) - &(&w * &w.adjoint());
            penalty.add_scaled(Complex64::new(1.0, 0.0), &c.map.adjoint(&outside));
        }
        if !any {
            return Ok(None);
        }
        let eig = jacobi(&penalty.hermitian_part());
        let keep: Vec<usize> = (0..self.dim)
            .filter(|&j| eig.eigenvalues[j] <= KERNEL_TOL)
            .collect();
        Ok(Some(eig.eigenvectors.select_columns(&keep)))
    }

    /// Validates that every target is a density operator.
    pub(crate) fn check_targets(&self, rank_tol: f64) -> Result<()> {
        for (i, c) in self.constraints.iter().enumerate() {
            check_density(&c.target, rank_tol)
                .map_err(|e| Error::invalid(format!("constraint {i}: {e}")))?;
        }
        Ok(())
    }
}

const KERNEL_TOL: f64 = 1e-8;

/// Trace tolerance for marginal targets.
pub const TARGET_TRACE_TOL: f64 = 1e-9;

pub(crate) fn check_density(rho: &HermitianMatrix, rank_tol: f64) -> Result<()> {
    let eig = jacobi(rho.as_matrix());
    if eig.min_eigenvalue() < -psd_slack(rank_tol) {
        return Err(Error::InvalidState(format!(
            "not positive semidefinite (min eigenvalue {:e})",
            eig.min_eigenvalue()
        )));
    }
    if (rho.trace() - 1.0).abs() > TARGET_TRACE_TOL {
        return Err(Error::InvalidState(format!(
            "trace {} differs from 1",
            rho.trace()
        )));
    }
    Ok(())
}

/// Integer square root, `⌊√n⌋`.
pub fn isqrt(n: u64) -> usize {
    let n = n as u128;
    let mut r = (n as f64).sqrt() as u128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r as usize
}

use super::map::{check_density, isqrt, ConstraintSystem, LinearConstraint, MarginalMap, ResidualReport};
use crate::error::{Error, Result};
use crate::hilbert::{Bipartition, SubsystemSet, SystemShape};
use crate::numerics::{HermitianMatrix, RANK_TOL};

/// A pair `(ρᵢ, Iᵢ)`: the required reduced state on a set of subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalConstraint {
    pub subsystems: SubsystemSet,
    pub target: HermitianMatrix,
}

impl MarginalConstraint {
    /// Checks that `target` is a density operator.
    pub fn new(subsystems: SubsystemSet, target: HermitianMatrix) -> Result<Self> {
        check_density(&target, RANK_TOL)?;
        Ok(Self { subsystems, target })
    }
}

/// A local-consistency instance: a system shape and a set of marginal
/// constraints. Mutual consistency of the constraints is not checked here.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyInstance {
    shape: SystemShape,
    constraints: Vec<MarginalConstraint>,
}

impl ConsistencyInstance {
    pub fn new(shape: SystemShape, constraints: Vec<MarginalConstraint>) -> Result<Self> {
        for c in &constraints {
            shape.check(&c.subsystems)?;
            if c.subsystems.is_empty() {
                return Err(Error::invalid("constraint on an empty subsystem set"));
            }
            let expected = shape.subsystem_dim(&c.subsystems);
            if c.target.dim() != expected {
                return Err(Error::mismatch(expected, c.target.dim()));
            }
        }
        Ok(Self { shape, constraints })
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn constraints(&self) -> &[MarginalConstraint] {
        &self.constraints
    }

    pub fn total_dim(&self) -> usize {
        self.shape.total_dim()
    }

    /// The instance as a list of partial-trace constraints.
    pub fn to_system(&self) -> Result<ConstraintSystem> {
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                Ok(LinearConstraint {
                    map: MarginalMap::PartialTrace(Bipartition::new(&self.shape, &c.subsystems)?),
                    target: c.target.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ConstraintSystem::new(self.shape.total_dim(), constraints)
    }
}

/// Residuals of `rho` against every constraint of the instance.
pub fn check_consistency(
    instance: &ConsistencyInstance,
    rho: &HermitianMatrix,
) -> Result<ResidualReport> {
    instance.to_system()?.residuals(rho)
}

/// `⌊√(Σᵢ rᵢ²)⌋` with `rᵢ` the numerical rank of each target.
pub fn theorem1_bound(instance: &ConsistencyInstance, rank_tol: f64) -> Result<usize> {
    if rank_tol.is_nan() || rank_tol < 0.0 {
        return Err(Error::invalid(format!("rank_tol must be >= 0, got {rank_tol}")));
    }
    let sum: u64 = instance
        .constraints
        .iter()
        .map(|c| crate::numerics::jacobi(c.target.as_matrix()).rank(rank_tol) as u64)
        .map(|r| r * r)
        .sum();
    Ok(isqrt(sum))
}

/// `⌊√(Σᵢ (dim Iᵢ)²)⌋`, the rank-free form of the bound.
pub fn dimension_bound(instance: &ConsistencyInstance) -> usize {
    isqrt(subsystem_dim_squares(instance))
}

/// `⌊√(2 Σᵢ (dim Iᵢ)²)⌋`, the weaker bound obtained from Barvinok's theorem.
pub fn barvinok_bound(instance: &ConsistencyInstance) -> usize {
    isqrt(2 * subsystem_dim_squares(instance))
}

fn subsystem_dim_squares(instance: &ConsistencyInstance) -> u64 {
    instance
        .constraints
        .iter()
        .map(|c| instance.shape.subsystem_dim(&c.subsystems) as u64)
        .map(|d| d * d)
        .sum()
}

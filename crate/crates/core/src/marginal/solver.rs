//! Feasibility by Dykstra alternating projections between the affine set of
//! operators with the prescribed marginals and the PSD cone.

use num_complex::Complex64;

use super::map::{ConstraintSystem, LinearConstraint};
use crate::error::{Error, Result};
use crate::numerics::{jacobi, ComplexMatrix, HermitianMatrix, RANK_TOL};

#[derive(Clone, Debug)]
pub struct FeasibilityOptions {
    pub max_iters: usize,
    /// Required bound on every constraint residual and the trace error.
    pub tol: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Iterations over which the best residual must improve by at least 1%.
    pub plateau_window: usize,
    pub rank_tol: f64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-8,
            cg_tol: 1e-12,
            cg_max_iters: 500,
            plateau_window: 250,
            rank_tol: RANK_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeasibleSolution {
    pub state: HermitianMatrix,
    pub iterations: usize,
    /// Largest constraint residual (or trace error) of `state`.
    pub residual: f64,
}

/// Heuristic evidence that an instance has no solution. Never a certificate.
#[derive(Clone, Debug)]
pub struct InfeasibilityReport {
    pub best_residual: f64,
    /// Per-constraint residuals of the best iterate.
    pub best_residuals: Vec<f64>,
    pub iterations: usize,
    pub plateau: bool,
    /// Best residual seen, sampled every `plateau_window` iterations.
    pub history: Vec<f64>,
    /// The admissible support of a solution collapsed to `{0}`.
    pub empty_support: bool,
}

/// Elements of the marginal space: one block per constraint plus the trace.
#[derive(Clone)]
struct Dual {
    blocks: Vec<ComplexMatrix>,
    trace: f64,
}

impl Dual {
    fn dot(&self, other: &Dual) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                a.as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(x, y)| (x.conj() * y).re)
                    .sum::<f64>()
            })
            .sum::<f64>()
            + self.trace * other.trace
    }

    fn axpy(&mut self, s: f64, other: &Dual) {
        let sc = Complex64::new(s, 0.0);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.add_scaled(sc, b);
        }
        self.trace += s * other.trace;
    }

    fn scaled(&self, s: f64) -> Dual {
        Dual {
            blocks: self.blocks.iter().map(|b| b.scale(s)).collect(),
            trace: self.trace * s,
        }
    }
}

/// Constraint maps composed with an optional compression `X ↦ U X U†`.
struct Operator<'a> {
    constraints: &'a [LinearConstraint],
    compression: Option<&'a ComplexMatrix>,
    /// Dimension of the (possibly compressed) working space.
    dim: usize,
    full_dim: usize,
}

impl Operator<'_> {
    fn lift(&self, x: &ComplexMatrix) -> ComplexMatrix {
        match self.compression {
            Some(u) => &(u * x) * &u.adjoint(),
            None => x.clone(),
        }
    }

    fn forward(&self, x: &ComplexMatrix) -> Dual {
        let full = self.lift(x);
        Dual {
            blocks: self.constraints.iter().map(|c| c.map.apply(&full)).collect(),
            trace: x.trace().re,
        }
    }

    fn adjoint(&self, y: &Dual) -> ComplexMatrix {
        let mut full = ComplexMatrix::zeros(self.full_dim, self.full_dim);
        for (c, b) in self.constraints.iter().zip(&y.blocks) {
            full.add_scaled(Complex64::new(1.0, 0.0), &c.map.adjoint(b));
        }
        let mut acc = match self.compression {
            Some(u) => &(&u.adjoint() * &full) * u,
            None => full,
        };
        acc.add_scaled(
            Complex64::new(y.trace, 0.0),
            &ComplexMatrix::identity(self.dim),
        );
        acc
    }

    fn normal(&self, y: &Dual) -> Dual {
        self.forward(&self.adjoint(y))
    }
}

/// Conjugate gradients on the (possibly singular) normal equations
/// `A A* z = r`, returning the iterate with the smallest residual.
fn conjugate_gradient(op: &Operator<'_>, rhs: &Dual, tol: f64, max_iters: usize) -> Dual {
    let mut z = rhs.scaled(0.0);
    let rhs_norm = rhs.dot(rhs).sqrt();
    if rhs_norm == 0.0 {
        return z;
    }
    let mut res = rhs.clone();
    let mut dir = rhs.clone();
    let mut rr = res.dot(&res);
    let mut best = (rr, z.clone());
    for _ in 0..max_iters {
        let ad = op.normal(&dir);
        let curvature = dir.dot(&ad);
        if curvature.is_nan() || curvature <= 1e-300 {
            break;
        }
        let alpha = rr / curvature;
        z.axpy(alpha, &dir);
        res.axpy(-alpha, &ad);
        let rr_new = res.dot(&res);
        if rr_new < best.0 {
            best = (rr_new, z.clone());
        }
        if rr_new.sqrt() <= tol * rhs_norm || !rr_new.is_finite() {
            break;
        }
        let beta = rr_new / rr;
        let mut next = res.clone();
        next.axpy(beta, &dir);
        dir = next;
        rr = rr_new;
    }
    best.1
}

/// Finds a density operator satisfying every constraint, starting from the
/// maximally mixed state on the admissible support. When that support is
/// `{0}` the projections still run on the full space so the report carries a
/// residual history.
pub fn find_feasible_system(
    system: &ConstraintSystem,
    opts: &FeasibilityOptions,
) -> Result<FeasibleSolution> {
    system.check_targets(opts.rank_tol)?;
    let compression = system.feasible_support(opts.rank_tol)?;
    let empty_support = compression.as_ref().is_some_and(|u| u.cols() == 0);
    let compression = if empty_support { None } else { compression };
    match dykstra(system, compression.as_ref(), opts) {
        Ok(sol) if !empty_support => Ok(sol),
        Ok(sol) => Err(Error::PossiblyInfeasible(Box::new(InfeasibilityReport {
            best_residual: sol.residual,
            best_residuals: system.constraint_residuals(sol.state.as_matrix()),
            iterations: sol.iterations,
            plateau: false,
            history: vec![sol.residual],
            empty_support,
        }))),
        Err(mut report) => {
            report.empty_support = empty_support;
            Err(Error::PossiblyInfeasible(report))
        }
    }
}

fn dykstra(
    system: &ConstraintSystem,
    compression: Option<&ComplexMatrix>,
    opts: &FeasibilityOptions,
) -> std::result::Result<FeasibleSolution, Box<InfeasibilityReport>> {
    let dim = compression.map_or(system.dim(), |u| u.cols());
    let op = Operator {
        constraints: system.constraints(),
        compression,
        dim,
        full_dim: system.dim(),
    };
    let targets = Dual {
        blocks: system
            .constraints()
            .iter()
            .map(|c| c.target.as_matrix().clone())
            .collect(),
        trace: 1.0,
    };
    let residual_of = |x: &ComplexMatrix| -> (f64, Vec<f64>) {
        let full = op.lift(x);
        let per = system.constraint_residuals(&full);
        let worst = per
            .iter()
            .copied()
            .fold((x.trace().re - 1.0).abs(), f64::max);
        (worst, per)
    };
    let project_affine = |x: &ComplexMatrix| -> ComplexMatrix {
        let mut r = targets.clone();
        r.axpy(-1.0, &op.forward(x));
        let z = conjugate_gradient(&op, &r, opts.cg_tol, opts.cg_max_iters);
        let mut out = x.clone();
        out.add_scaled(Complex64::new(1.0, 0.0), &op.adjoint(&z));
        out.hermitian_part()
    };
    let project_psd = |x: &ComplexMatrix| -> ComplexMatrix {
        jacobi(x).map_eigenvalues(|l| l.max(0.0)).into_matrix()
    };

    let mut x = ComplexMatrix::identity(dim).scale(1.0 / dim as f64);
    let mut p = ComplexMatrix::zeros(dim, dim);
    let mut q = ComplexMatrix::zeros(dim, dim);
    let (mut best, mut best_per) = residual_of(&x);
    let mut history = vec![best];
    let mut window_start_best = best;

    if best <= opts.tol {
        return Ok(finish(op.lift(&x), 0, best));
    }

    let window = opts.plateau_window.max(1);
    for it in 1..=opts.max_iters {
        let xp = &x + &p;
        let y = project_affine(&xp);
        p = &xp - &y;
        let yq = &y + &q;
        x = project_psd(&yq);
        q = &yq - &x;

        let (res, per) = residual_of(&x);
        if res < best {
            best = res;
            best_per = per;
        }
        if res <= opts.tol {
            return Ok(finish(op.lift(&x), it, res));
        }
        if it % window == 0 {
            history.push(best);
            if it >= 2 * window && best > 0.99 * window_start_best {
                return Err(Box::new(InfeasibilityReport {
                    best_residual: best,
                    best_residuals: best_per,
                    iterations: it,
                    plateau: true,
                    history,
                    empty_support: false,
                }));
            }
            window_start_best = best;
        }
    }
    Err(Box::new(InfeasibilityReport {
        best_residual: best,
        best_residuals: best_per,
        iterations: opts.max_iters,
        plateau: false,
        history,
        empty_support: false,
    }))
}

fn finish(state: ComplexMatrix, iterations: usize, residual: f64) -> FeasibleSolution {
    FeasibleSolution {
        state: HermitianMatrix::from_hermitian_part(&state),
        iterations,
        residual,
    }
}

/// [`find_feasible_system`] for a tensor-product instance.
pub fn find_feasible(
    instance: &super::ConsistencyInstance,
    opts: &FeasibilityOptions,
) -> Result<FeasibleSolution> {
    find_feasible_system(&instance.to_system()?, opts)
}

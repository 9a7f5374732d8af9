//! Constructive rank reduction: repeatedly move a feasible state along a
//! traceless direction that leaves every marginal fixed until an eigenvalue
//! hits zero.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hilbert::support_basis;
use crate::marginal::{ConsistencyInstance, ConstraintSystem, ResidualReport};
use crate::numerics::{jacobi, ComplexMatrix, HermitianMatrix, RowSpace, RANK_TOL};

#[derive(Clone, Debug)]
pub struct ReduceOptions {
    pub rank_tol: f64,
    /// Largest constraint residual tolerated after a repair pass.
    pub repair_tol: f64,
    pub seed: u64,
    pub max_steps: usize,
    /// How far the starting state may be from feasible.
    pub feasibility_tol: f64,
    /// Bound on `‖map_i(H)‖_F` and `|Tr H|` for an accepted direction.
    pub deriv_tol: f64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self {
            rank_tol: RANK_TOL,
            repair_tol: 1e-8,
            seed: 0,
            max_steps: 1000,
            feasibility_tol: 1e-6,
            deriv_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionStep {
    pub rank_before: usize,
    pub rank_after: usize,
    pub lambda: f64,
    /// `+1` for `ρ − λH`, `-1` for `ρ + λH`.
    pub sign: i8,
    pub direction_norm: f64,
    pub direction_trace: f64,
    /// Largest `‖map_i(H)‖_F` over the constraints.
    pub direction_marginal_norm: f64,
    /// Largest constraint residual right after truncation.
    pub residual_before_repair: f64,
    pub residual_after: ResidualReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// No admissible direction was left.
    NullSpaceExhausted,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionTrace {
    pub steps: Vec<ReductionStep>,
    pub initial_rank: usize,
    pub final_rank: usize,
    /// `⌊√(Σᵢ rank(targetᵢ)²)⌋`
    pub bound: usize,
    pub termination: Termination,
    /// False if the search ever came back empty although the dimension count
    /// promised a direction.
    pub dimension_guarantee_held: bool,
}

impl ReductionTrace {
    pub fn within_bound(&self) -> bool {
        self.final_rank <= self.bound
    }
}

/// A state stored as `V diag(p) V†` with `V` an isometry.
#[derive(Clone, Debug)]
struct Support {
    v: ComplexMatrix,
    p: Vec<f64>,
}

impl Support {
    fn from_state(rho: &ComplexMatrix, rank_tol: f64) -> Self {
        let eig = jacobi(rho);
        let keep = eig.support_indices(rank_tol);
        let mut s = Support {
            v: eig.eigenvectors.select_columns(&keep),
            p: keep.iter().map(|&j| eig.eigenvalues[j]).collect(),
        };
        s.normalize();
        s
    }

    fn rank(&self) -> usize {
        self.p.len()
    }

    fn normalize(&mut self) {
        let t: f64 = self.p.iter().sum();
        if t > 0.0 {
            self.p.iter_mut().for_each(|x| *x /= t);
        }
    }

    fn state(&self) -> ComplexMatrix {
        let d = self.v.rows();
        let mut out = ComplexMatrix::zeros(d, d);
        for (c, &w) in self.p.iter().enumerate() {
            let col = self.v.column(c);
            for i in 0..d {
                let a = col[i] * w;
                for j in 0..d {
                    out[(i, j)] += a * col[j].conj();
                }
            }
        }
        out.hermitian_part()
    }

    /// Replaces the state by `V R V†` restricted to the numerical support of
    /// the `r×r` Hermitian `R`.
    fn rotate(&self, r: &ComplexMatrix, rank_tol: f64) -> Support {
        let eig = jacobi(r);
        let keep = eig.support_indices(rank_tol);
        let u = eig.eigenvectors.select_columns(&keep);
        let mut s = Support {
            v: &self.v * &u,
            p: keep.iter().map(|&j| eig.eigenvalues[j]).collect(),
        };
        s.normalize();
        s
    }

    /// Drops weights at or below `floor` and renormalizes.
    fn truncate(&mut self, floor: f64) -> bool {
        let keep: Vec<usize> = (0..self.rank()).filter(|&j| self.p[j] > floor).collect();
        if keep.len() == self.rank() {
            return false;
        }
        self.v = self.v.select_columns(&keep);
        self.p = keep.iter().map(|&j| self.p[j]).collect();
        self.normalize();
        true
    }
}

/// Real coordinates of a Hermitian `n×n` matrix in the orthonormal basis
/// `{E_cc} ∪ {(E_ce + E_ec)/√2, i(E_ce − E_ec)/√2 : c < e}`.
fn herm_coords(z: &ComplexMatrix) -> Vec<f64> {
    let n = z.rows();
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for c in 0..n {
        out.push(z[(c, c)].re);
    }
    for c in 0..n {
        for e in (c + 1)..n {
            out.push(s2 * z[(c, e)].re);
            out.push(s2 * z[(c, e)].im);
        }
    }
    out
}

fn herm_from_coords(y: &[f64], n: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut z = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        z[(c, c)] = Complex64::new(y[c], 0.0);
    }
    let mut k = n;
    for c in 0..n {
        for e in (c + 1)..n {
            let v = Complex64::new(y[k] * s, y[k + 1] * s);
            z[(c, e)] = v;
            z[(e, c)] = v.conj();
            k += 2;
        }
    }
    z
}

/// Constraints prepared for a reduction run: the system, the support basis of
/// each target, and an optional isometry onto the admissible support.
struct Prepared<'a> {
    system: &'a ConstraintSystem,
    target_bases: Vec<ComplexMatrix>,
    compression: Option<ComplexMatrix>,
}

impl<'a> Prepared<'a> {
    fn new(system: &'a ConstraintSystem, rank_tol: f64) -> Result<Self> {
        system.check_targets(rank_tol)?;
        let target_bases = system
            .constraints()
            .iter()
            .map(|c| support_basis(&c.target, rank_tol))
            .collect::<Result<Vec<_>>>()?;
        let compression = system.feasible_support(rank_tol)?;
        if compression.as_ref().is_some_and(|u| u.cols() == 0) {
            return Err(Error::Precondition(
                "the constraints admit no state at all".into(),
            ));
        }
        Ok(Self {
            system,
            target_bases,
            compression,
        })
    }

    fn rank_square_sum(&self) -> usize {
        self.target_bases.iter().map(|w| w.cols() * w.cols()).sum()
    }

    fn bound(&self) -> usize {
        crate::marginal::isqrt(self.rank_square_sum() as u64)
    }

    /// Validates feasibility of `rho` and returns it as a support
    /// decomposition inside the admissible subspace.
    fn support_of(&self, rho: &HermitianMatrix, opts: &ReduceOptions) -> Result<Support> {
        let report = self.system.residuals(rho)?;
        if report.worst() > opts.feasibility_tol {
            return Err(Error::Precondition(format!(
                "starting state is not feasible (worst residual {:e}, allowed {:e})",
                report.worst(),
                opts.feasibility_tol
            )));
        }
        let rho = match &self.compression {
            Some(u) => {
                let proj = u * &u.adjoint();
                &(&proj * rho.as_matrix()) * &proj
            }
            None => rho.as_matrix().clone(),
        };
        Ok(Support::from_state(&rho.hermitian_part(), opts.rank_tol))
    }

    /// The real linear map `Y ↦ (W_i† map_i(V Y V†) W_i)_i ⊕ Tr Y`, one row per
    /// output coordinate and `r²` columns.
    fn constraint_rows(&self, v: &ComplexMatrix) -> Vec<Vec<f64>> {
        let r = v.cols();
        let cols: Vec<Vec<Complex64>> = (0..r).map(|c| v.column(c)).collect();
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let si = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);

        // images of the basis elements, column by column
        let mut images: Vec<Vec<f64>> = vec![Vec::new(); r * r];
        for (con, w) in self.system.constraints().iter().zip(&self.target_bases) {
            let compress = |m: &ComplexMatrix| -> Vec<f64> {
                herm_coords(&(&(&w.adjoint() * m) * w))
            };
            for c in 0..r {
                let m = con.map.apply_outer(&cols[c], &cols[c]).hermitian_part();
                images[c].extend(compress(&m));
            }
            let mut k = r;
            for c in 0..r {
                for e in (c + 1)..r {
                    let m = con.map.apply_outer(&cols[c], &cols[e]);
                    let md = m.adjoint();
                    let mut sym = m.scale_complex(s);
                    sym.add_scaled(s, &md);
                    let mut asym = m.scale_complex(si);
                    asym.add_scaled(-si, &md);
                    images[k].extend(compress(&sym));
                    images[k + 1].extend(compress(&asym));
                    k += 2;
                }
            }
        }
        for (j, img) in images.iter_mut().enumerate() {
            img.push(if j < r { 1.0 } else { 0.0 });
        }

        let n_rows = images.first().map_or(0, Vec::len);
        (0..n_rows)
            .map(|i| images.iter().map(|col| col[i]).collect())
            .collect()
    }

    fn max_residual(&self, state: &ComplexMatrix) -> f64 {
        self.system
            .constraint_residuals(state)
            .into_iter()
            .fold((state.trace().re - 1.0).abs(), f64::max)
    }

    /// Minimum-norm in-support corrections until the residual is negligible
    /// or three rounds have passed.
    fn repair(&self, mut support: Support, opts: &ReduceOptions) -> (Support, f64) {
        let mut residual = self.max_residual(&support.state());
        for _ in 0..3 {
            if residual <= 1e-3 * opts.repair_tol || support.rank() == 0 {
                break;
            }
            let state = support.state();
            let mut b = Vec::new();
            for (con, w) in self.system.constraints().iter().zip(&self.target_bases) {
                let err = &con.map.apply(&state) - con.target.as_matrix();
                b.extend(herm_coords(&(&(&w.adjoint() * &err) * w)).iter().map(|x| -x));
            }
            b.push(1.0 - state.trace().re);
            let rows = self.constraint_rows(&support.v);
            let space = RowSpace::new(&rows, support.rank() * support.rank(), ROW_DROP_TOL);
            let dy = herm_from_coords(&space.min_norm_solution(&b), support.rank());
            let mut r = ComplexMatrix::from_real_diagonal(&support.p);
            r.add_scaled(Complex64::new(1.0, 0.0), &dy);
            let candidate = support.rotate(&r.hermitian_part(), opts.rank_tol);
            let cand_res = self.max_residual(&candidate.state());
            if cand_res >= residual {
                break;
            }
            support = candidate;
            residual = cand_res;
        }
        (support, residual)
    }

    /// A seeded random element of the kernel, normalized, in support
    /// coordinates; `None` when the kernel is trivial.
    fn direction(
        &self,
        support: &Support,
        rng: &mut ChaCha8Rng,
    ) -> Option<ComplexMatrix> {
        let r = support.rank();
        if r <= 1 {
            return None;
        }
        let rows = self.constraint_rows(&support.v);
        let space = RowSpace::new(&rows, r * r, ROW_DROP_TOL);
        if space.nullity() == 0 {
            return None;
        }
        let mut y: Vec<f64> = (0..r * r).map(|_| StandardNormal.sample(rng)).collect();
        space.project_onto_kernel(&mut y);
        let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < MIN_DIRECTION_NORM {
            return None;
        }
        y.iter_mut().for_each(|x| *x /= norm);
        Some(herm_from_coords(&y, r))
    }

    /// Checks an accepted direction against the support-containment
    /// consequences: zero trace and zero marginals.
    fn check_direction(&self, h: &ComplexMatrix, deriv_tol: f64) -> Result<(f64, f64)> {
        let trace = h.trace().re;
        let marginal = self
            .system
            .constraints()
            .iter()
            .map(|c| c.map.apply(h).frobenius_norm())
            .fold(0.0, f64::max);
        if trace.abs() > deriv_tol || marginal > deriv_tol {
            return Err(Error::Precondition(format!(
                "direction moves the marginals (trace {trace:e}, marginal norm {marginal:e})"
            )));
        }
        Ok((trace, marginal))
    }
}

const ROW_DROP_TOL: f64 = 1e-10;
const MIN_DIRECTION_NORM: f64 = 1e-10;
const MULTIPLICITY_TOL: f64 = 1e-8;

/// Step length and sign for `diag(p) − sign·λ·Y` to lose rank.
fn step_in_support(p: &[f64], y: &ComplexMatrix) -> Result<(f64, i8)> {
    let r = p.len();
    let inv_sqrt: Vec<f64> = p.iter().map(|x| 1.0 / x.sqrt()).collect();
    let b = ComplexMatrix::from_fn(r, r, |i, j| y[(i, j)] * (inv_sqrt[i] * inv_sqrt[j]));
    let eig = jacobi(&b.hermitian_part());
    let mu_plus = eig.eigenvalues[r - 1];
    let mu_minus = -eig.eigenvalues[0];
    if !(mu_plus > 0.0 && mu_minus > 0.0) {
        return Err(Error::Precondition(
            "direction is not traceless and nonzero on the support".into(),
        ));
    }
    let tol = MULTIPLICITY_TOL * mu_plus.max(mu_minus);
    let mult_plus = eig.eigenvalues.iter().filter(|&&l| mu_plus - l <= tol).count();
    let mult_minus = eig.eigenvalues.iter().filter(|&&l| l + mu_minus <= tol).count();
    Ok(if mult_plus >= mult_minus {
        (1.0 / mu_plus, 1)
    } else {
        (1.0 / mu_minus, -1)
    })
}

/// Length `λ > 0` and sign `s` such that `ρ − s·λ·H` is PSD with at least
/// one fewer nonzero eigenvalue. The side zeroing more eigenvalues at once is
/// preferred; ties go to `+1`.
pub fn step_length(rho: &HermitianMatrix, h: &HermitianMatrix, rank_tol: f64) -> Result<(f64, i8)> {
    if rho.dim() != h.dim() {
        return Err(Error::mismatch(rho.dim(), h.dim()));
    }
    let norm = h.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Precondition("direction is zero".into()));
    }
    if h.trace().abs() > 1e-9 * norm.max(1.0) {
        return Err(Error::Precondition(format!(
            "direction has trace {:e}",
            h.trace()
        )));
    }
    let support = Support::from_state(rho.as_matrix(), rank_tol);
    let y = h.compress_by(&support.v);
    let inside = HermitianMatrix::from_hermitian_part(y.as_matrix()).conjugate_by(&support.v);
    if h.distance(&inside) > 1e-8 * norm {
        return Err(Error::Precondition(
            "direction is not supported on the support of the state".into(),
        ));
    }
    let eig = jacobi(rho.as_matrix());
    let p: Vec<f64> = eig
        .support_indices(rank_tol)
        .iter()
        .map(|&j| eig.eigenvalues[j])
        .collect();
    step_in_support(&p, y.as_matrix())
}

/// [`descent_direction`] for a general constraint system.
pub fn descent_direction_system(
    rho: &HermitianMatrix,
    system: &ConstraintSystem,
    opts: &ReduceOptions,
) -> Result<Option<HermitianMatrix>> {
    let prep = Prepared::new(system, opts.rank_tol)?;
    let support = prep.support_of(rho, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let Some(y) = prep.direction(&support, &mut rng) else {
        return Ok(None);
    };
    let h = HermitianMatrix::from_hermitian_part(&y).conjugate_by(&support.v);
    prep.check_direction(h.as_matrix(), opts.deriv_tol)?;
    Ok(Some(h))
}

/// A unit-norm traceless Hermitian `H` supported on `supp ρ` that leaves
/// every marginal of the instance unchanged, or `None` if none was found.
pub fn descent_direction(
    rho: &HermitianMatrix,
    instance: &ConsistencyInstance,
    opts: &ReduceOptions,
) -> Result<Option<HermitianMatrix>> {
    descent_direction_system(rho, &instance.to_system()?, opts)
}

/// Rank reduction against a general constraint system.
pub fn reduce_system(
    rho0: &HermitianMatrix,
    system: &ConstraintSystem,
    opts: &ReduceOptions,
) -> Result<(HermitianMatrix, ReductionTrace)> {
    if rho0.dim() != system.dim() {
        return Err(Error::mismatch(system.dim(), rho0.dim()));
    }
    let prep = Prepared::new(system, opts.rank_tol)?;
    let initial_rank = jacobi(rho0.as_matrix()).rank(opts.rank_tol);
    let mut support = prep.support_of(rho0, opts)?;
    let mut trace = ReductionTrace {
        steps: Vec::new(),
        initial_rank,
        final_rank: initial_rank,
        bound: prep.bound(),
        termination: Termination::NullSpaceExhausted,
        dimension_guarantee_held: true,
    };
    let fail = |residual: f64, mut trace: ReductionTrace, support: &Support| {
        trace.final_rank = support.rank();
        Error::RepairFailed {
            residual,
            tol: opts.repair_tol,
            trace: Box::new(trace),
        }
    };

    let guard = 1e3 * opts.rank_tol;
    support.truncate(guard);
    let (repaired, residual) = prep.repair(support, opts);
    support = repaired;
    if residual > opts.repair_tol {
        return Err(fail(residual, trace, &support));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    loop {
        if trace.steps.len() >= opts.max_steps {
            trace.termination = Termination::MaxSteps;
            break;
        }
        if support.truncate(guard) {
            let (repaired, residual) = prep.repair(support, opts);
            support = repaired;
            if residual > opts.repair_tol {
                return Err(fail(residual, trace, &support));
            }
        }
        let r = support.rank();
        let Some(y) = prep.direction(&support, &mut rng) else {
            if r * r > prep.rank_square_sum().max(1) {
                trace.dimension_guarantee_held = false;
            }
            trace.termination = Termination::NullSpaceExhausted;
            break;
        };
        let h = &(&support.v * &y) * &support.v.adjoint();
        let (direction_trace, direction_marginal_norm) =
            prep.check_direction(&h, opts.deriv_tol)?;
        let (lambda, sign) = step_in_support(&support.p, &y)?;

        let mut next = ComplexMatrix::from_real_diagonal(&support.p);
        next.add_scaled(Complex64::new(-(sign as f64) * lambda, 0.0), &y);
        let stepped = support.rotate(&next.hermitian_part(), opts.rank_tol);
        let residual_before_repair = prep.max_residual(&stepped.state());
        let (repaired, residual) = prep.repair(stepped, opts);
        if repaired.rank() >= r {
            return Err(Error::Precondition(format!(
                "step did not reduce the rank (still {})",
                repaired.rank()
            )));
        }
        support = repaired;
        let report = system.residuals(&HermitianMatrix::from_hermitian_part(&support.state()))?;
        trace.steps.push(ReductionStep {
            rank_before: r,
            rank_after: support.rank(),
            lambda,
            sign,
            direction_norm: h.frobenius_norm(),
            direction_trace,
            direction_marginal_norm,
            residual_before_repair,
            residual_after: report,
        });
        if residual > opts.repair_tol {
            return Err(fail(residual, trace, &support));
        }
    }

    trace.final_rank = support.rank();
    Ok((HermitianMatrix::from_hermitian_part(&support.state()), trace))
}

/// Reduces the rank of a feasible `rho0` while keeping every marginal of
/// `instance` fixed. Terminates when no admissible direction remains, at
/// which point the rank is at most `⌊√(Σᵢ rank(ρᵢ)²)⌋`.
pub fn reduce_rank(
    rho0: &HermitianMatrix,
    instance: &ConsistencyInstance,
    opts: &ReduceOptions,
) -> Result<(HermitianMatrix, ReductionTrace)> {
    reduce_system(rho0, &instance.to_system()?, opts)
}

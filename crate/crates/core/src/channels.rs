//! Quantum channels in Choi form, Kraus decompositions, sub-channels and
//! channel consistency instances.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{psd_slack, Bipartition, SubsystemSet, SystemShape};
use crate::marginal::{
    find_feasible, isqrt, ConsistencyInstance, FeasibilityOptions, MarginalConstraint,
};
use crate::numerics::{jacobi, ComplexMatrix, HermitianMatrix, RANK_TOL};
use crate::reduce::{reduce_rank, ReduceOptions, ReductionTrace};

/// Default tolerance for trace preservation.
pub const TP_TOL: f64 = 1e-8;

/// A channel from `in_shape` to `out_shape`, stored as its unit-trace Choi
/// state `(1/d_in) Σ_{p,q} |p⟩⟨q| ⊗ Ψ(|p⟩⟨q|)` on `in ⊗ out`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRepr {
    in_shape: SystemShape,
    out_shape: SystemShape,
    choi: HermitianMatrix,
}

impl ChannelRepr {
    /// Validates complete positivity and trace preservation at [`TP_TOL`].
    pub fn new(in_shape: SystemShape, out_shape: SystemShape, choi: HermitianMatrix) -> Result<Self> {
        Self::with_tolerance(in_shape, out_shape, choi, TP_TOL)
    }

    pub fn with_tolerance(
        in_shape: SystemShape,
        out_shape: SystemShape,
        choi: HermitianMatrix,
        tp_tol: f64,
    ) -> Result<Self> {
        let expected = in_shape.total_dim() * out_shape.total_dim();
        if choi.dim() != expected {
            return Err(Error::mismatch(expected, choi.dim()));
        }
        let min = jacobi(choi.as_matrix()).min_eigenvalue();
        if min < -psd_slack(RANK_TOL) {
            return Err(Error::NotCompletelyPositive(min));
        }
        let ch = Self {
            in_shape,
            out_shape,
            choi,
        };
        let dev = ch.tp_deviation();
        if dev > tp_tol {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(ch)
    }

    /// Identity channel on `shape`.
    pub fn identity(shape: &SystemShape) -> Self {
        Self::from_unitary(&ComplexMatrix::identity(shape.total_dim()), shape)
            .expect("identity is unitary")
    }

    /// `ρ ↦ U ρ U†`
    pub fn from_unitary(u: &ComplexMatrix, shape: &SystemShape) -> Result<Self> {
        choi_from_kraus(&KrausSet::new(vec![u.clone()])?, shape, shape)
    }

    /// `ρ ↦ Tr(ρ) I/d_out`
    pub fn completely_depolarizing(in_shape: &SystemShape, out_shape: &SystemShape) -> Self {
        let d = in_shape.total_dim() * out_shape.total_dim();
        Self {
            in_shape: in_shape.clone(),
            out_shape: out_shape.clone(),
            choi: HermitianMatrix::maximally_mixed(d),
        }
    }

    pub fn in_shape(&self) -> &SystemShape {
        &self.in_shape
    }

    pub fn out_shape(&self) -> &SystemShape {
        &self.out_shape
    }

    pub fn choi(&self) -> &HermitianMatrix {
        &self.choi
    }

    pub fn in_dim(&self) -> usize {
        self.in_shape.total_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.out_shape.total_dim()
    }

    /// Shape of the space carrying the Choi state, inputs first.
    pub fn composite_shape(&self) -> SystemShape {
        self.in_shape.concat(&self.out_shape)
    }

    /// `‖Tr_out σ − I/d_in‖_F`
    pub fn tp_deviation(&self) -> f64 {
        let keep = SubsystemSet::range(0..self.in_shape.len());
        let split = Bipartition::new(&self.composite_shape(), &keep).expect("valid split");
        let reduced = split.trace_out(self.choi.as_matrix());
        let ident = ComplexMatrix::identity(self.in_dim()).scale(1.0 / self.in_dim() as f64);
        (&reduced - &ident).frobenius_norm()
    }

    /// Number of Kraus operators in a minimal decomposition.
    pub fn kraus_rank(&self, rank_tol: f64) -> usize {
        jacobi(self.choi.as_matrix()).rank(rank_tol)
    }
}

/// Kraus operators `K_i` (`d_out × d_in`) with `Σ K_i† K_i = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(operators, TP_TOL)
    }

    pub fn with_tolerance(operators: Vec<ComplexMatrix>, tp_tol: f64) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::invalid("a Kraus set needs at least one operator"))?;
        let (d_out, d_in) = first.shape();
        for k in &operators {
            if k.shape() != (d_out, d_in) {
                return Err(Error::mismatch(d_out * d_in, k.rows() * k.cols()));
            }
        }
        if operators.len() > d_in * d_out {
            return Err(Error::invalid(format!(
                "{} Kraus operators exceed d_in·d_out = {}",
                operators.len(),
                d_in * d_out
            )));
        }
        let set = Self { operators };
        let dev = set.tp_deviation();
        if dev > tp_tol {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(set)
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.operators[0].cols()
    }

    pub fn out_dim(&self) -> usize {
        self.operators[0].rows()
    }

    /// `‖Σ K_i† K_i − I‖_F`
    pub fn tp_deviation(&self) -> f64 {
        let d = self.in_dim();
        let mut sum = ComplexMatrix::zeros(d, d);
        for k in &self.operators {
            sum.add_scaled(Complex64::new(1.0, 0.0), &(&k.adjoint() * k));
        }
        (&sum - &ComplexMatrix::identity(d)).frobenius_norm()
    }

    /// `Σ K_i X K_i†`
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.in_dim() || !x.is_square() {
            return Err(Error::mismatch(self.in_dim(), x.rows()));
        }
        let mut out = ComplexMatrix::zeros(self.out_dim(), self.out_dim());
        for k in &self.operators {
            out.add_scaled(Complex64::new(1.0, 0.0), &(&(k * x) * &k.adjoint()));
        }
        Ok(out)
    }
}

/// Choi state of a Kraus set. The vectorization is row-major over
/// `(input, output)` pairs: `κ[p·d_out + o] = K[o, p]`.
pub fn choi_from_kraus(
    kraus: &KrausSet,
    in_shape: &SystemShape,
    out_shape: &SystemShape,
) -> Result<ChannelRepr> {
    let (d_in, d_out) = (in_shape.total_dim(), out_shape.total_dim());
    if kraus.in_dim() != d_in {
        return Err(Error::mismatch(d_in, kraus.in_dim()));
    }
    if kraus.out_dim() != d_out {
        return Err(Error::mismatch(d_out, kraus.out_dim()));
    }
    let d = d_in * d_out;
    let mut choi = ComplexMatrix::zeros(d, d);
    for k in kraus.operators() {
        let kappa: Vec<Complex64> = (0..d).map(|idx| k[(idx % d_out, idx / d_out)]).collect();
        for i in 0..d {
            for j in 0..d {
                choi[(i, j)] += kappa[i] * kappa[j].conj();
            }
        }
    }
    ChannelRepr::with_tolerance(
        in_shape.clone(),
        out_shape.clone(),
        HermitianMatrix::from_hermitian_part(&choi.scale(1.0 / d_in as f64)),
        f64::INFINITY,
    )
}

/// Minimal Kraus decomposition from the eigenpairs of the Choi state:
/// `K[o, p] = √(d_in λ) v[p·d_out + o]`.
pub fn kraus_from_choi(ch: &ChannelRepr, rank_tol: f64) -> Result<KrausSet> {
    let eig = jacobi(ch.choi.as_matrix());
    if eig.min_eigenvalue() < -psd_slack(rank_tol) {
        return Err(Error::NotCompletelyPositive(eig.min_eigenvalue()));
    }
    let (d_in, d_out) = (ch.in_dim(), ch.out_dim());
    let operators = eig
        .support_indices(rank_tol)
        .into_iter()
        .rev()
        .map(|j| {
            let s = (d_in as f64 * eig.eigenvalues[j]).sqrt();
            let v = eig.eigenvector(j);
            ComplexMatrix::from_fn(d_out, d_in, |o, p| v[p * d_out + o] * s)
        })
        .collect();
    KrausSet::with_tolerance(operators, f64::INFINITY)
}

/// `d_in · Tr_in[(Xᵀ ⊗ I) σ]` for an arbitrary input operator.
pub fn apply_channel_operator(ch: &ChannelRepr, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (d_in, d_out) = (ch.in_dim(), ch.out_dim());
    if x.rows() != d_in || !x.is_square() {
        return Err(Error::mismatch(d_in, x.rows()));
    }
    let sigma = ch.choi.as_matrix();
    let mut out = ComplexMatrix::zeros(d_out, d_out);
    for p in 0..d_in {
        for q in 0..d_in {
            let c = x[(p, q)];
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for o in 0..d_out {
                for o2 in 0..d_out {
                    out[(o, o2)] += c * sigma[(p * d_out + o, q * d_out + o2)];
                }
            }
        }
    }
    Ok(out.scale(d_in as f64))
}

pub fn apply_channel(ch: &ChannelRepr, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::from_hermitian_part(&apply_channel_operator(
        ch,
        rho.as_matrix(),
    )?))
}

/// The induced channel `ρ_A ↦ Tr_{B'} Ψ(ρ_A ⊗ I_B/d_B)` evaluated on one input.
pub fn sub_channel_action(
    ch: &ChannelRepr,
    in_keep: &SubsystemSet,
    out_keep: &SubsystemSet,
    x: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let in_split = Bipartition::new(&ch.in_shape, in_keep)?;
    let out_split = Bipartition::new(&ch.out_shape, out_keep)?;
    if x.rows() != in_split.kept_dim() || !x.is_square() {
        return Err(Error::mismatch(in_split.kept_dim(), x.rows()));
    }
    let lifted = in_split
        .embed(x)
        .scale(1.0 / in_split.traced_dim() as f64);
    Ok(out_split.trace_out(&apply_channel_operator(ch, &lifted)?))
}

/// Sub-channel on the kept input and output factors, taken as the Choi
/// marginal and cross-checked against [`sub_channel_action`] on every
/// matrix unit of the kept input.
pub fn sub_channel(
    ch: &ChannelRepr,
    in_keep: &SubsystemSet,
    out_keep: &SubsystemSet,
) -> Result<ChannelRepr> {
    let in_shape = ch.in_shape.restrict(in_keep)?;
    let out_shape = ch.out_shape.restrict(out_keep)?;
    let keep = in_keep.union(&out_keep.offset(ch.in_shape.len()));
    let marginal = Bipartition::new(&ch.composite_shape(), &keep)?.trace_out(ch.choi.as_matrix());
    let t = marginal.trace().re;
    let sub = ChannelRepr {
        in_shape,
        out_shape,
        choi: HermitianMatrix::from_hermitian_part(&marginal.scale(1.0 / t)),
    };

    let d_a = sub.in_dim();
    let mut worst = 0.0f64;
    for p in 0..d_a {
        for q in 0..d_a {
            let mut unit = ComplexMatrix::zeros(d_a, d_a);
            unit[(p, q)] = Complex64::new(1.0, 0.0);
            let via_choi = apply_channel_operator(&sub, &unit)?;
            let via_action = sub_channel_action(ch, in_keep, out_keep, &unit)?;
            worst = worst.max(via_choi.max_abs_diff(&via_action));
        }
    }
    if worst > SUB_CHANNEL_CHECK_TOL {
        return Err(Error::InvalidState(format!(
            "Choi marginal and action formula disagree by {worst:e}"
        )));
    }
    Ok(sub)
}

const SUB_CHANNEL_CHECK_TOL: f64 = 1e-8;

/// A prescribed sub-channel from input factors `in_subsystems` to output
/// factors `out_subsystems`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalChannel {
    pub in_subsystems: SubsystemSet,
    pub out_subsystems: SubsystemSet,
    pub channel: ChannelRepr,
}

/// A channel consistency instance: does a global channel exist with all the
/// given sub-channels?
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelInstance {
    in_shape: SystemShape,
    out_shape: SystemShape,
    locals: Vec<LocalChannel>,
}

impl ChannelInstance {
    pub fn new(in_shape: SystemShape, out_shape: SystemShape, locals: Vec<LocalChannel>) -> Result<Self> {
        for l in &locals {
            if in_shape.restrict(&l.in_subsystems)? != *l.channel.in_shape() {
                return Err(Error::invalid("local channel input shape does not match its subsystems"));
            }
            if out_shape.restrict(&l.out_subsystems)? != *l.channel.out_shape() {
                return Err(Error::invalid("local channel output shape does not match its subsystems"));
            }
        }
        Ok(Self {
            in_shape,
            out_shape,
            locals,
        })
    }

    pub fn in_shape(&self) -> &SystemShape {
        &self.in_shape
    }

    pub fn out_shape(&self) -> &SystemShape {
        &self.out_shape
    }

    pub fn locals(&self) -> &[LocalChannel] {
        &self.locals
    }

    /// `⌊√(Σ_l (d_{I_l} d_{J_l})²)⌋`, the bound from the local Choi states alone.
    pub fn local_bound(&self) -> usize {
        isqrt(self.local_square_sum())
    }

    /// [`Self::local_bound`] with the trace-preservation constraint counted:
    /// `⌊√(Σ_l (d_{I_l} d_{J_l})² + d_in²)⌋`.
    pub fn tp_bound(&self) -> usize {
        let d = self.in_shape.total_dim() as u64;
        isqrt(self.local_square_sum() + d * d)
    }

    fn local_square_sum(&self) -> u64 {
        self.locals
            .iter()
            .map(|l| l.channel.choi().dim() as u64)
            .map(|d| d * d)
            .sum()
    }
}

/// Marginal instance on `A₁…Aₙ B₁…Bₘ` whose solutions are the Choi states of
/// the consistent global channels. With `include_tp` the global
/// trace-preservation condition `Tr_B σ = I/d_A` is appended as a constraint.
pub fn channel_instance_to_marginal(ci: &ChannelInstance, include_tp: bool) -> Result<ConsistencyInstance> {
    let shape = ci.in_shape.concat(&ci.out_shape);
    let n_in = ci.in_shape.len();
    let mut constraints: Vec<MarginalConstraint> = ci
        .locals
        .iter()
        .map(|l| MarginalConstraint {
            subsystems: l.in_subsystems.union(&l.out_subsystems.offset(n_in)),
            target: l.channel.choi().clone(),
        })
        .collect();
    if include_tp {
        constraints.push(MarginalConstraint {
            subsystems: SubsystemSet::range(0..n_in),
            target: HermitianMatrix::maximally_mixed(ci.in_shape.total_dim()),
        });
    }
    ConsistencyInstance::new(shape, constraints)
}

#[derive(Clone, Debug)]
pub struct ChannelReduceOptions {
    pub feasibility: FeasibilityOptions,
    pub reduce: ReduceOptions,
    pub include_tp: bool,
    /// Tolerance on trace preservation of the result.
    pub tp_tol: f64,
}

impl Default for ChannelReduceOptions {
    fn default() -> Self {
        Self {
            feasibility: FeasibilityOptions::default(),
            reduce: ReduceOptions::default(),
            include_tp: true,
            tp_tol: TP_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChannelReduction {
    pub channel: ChannelRepr,
    pub kraus: KrausSet,
    pub trace: ReductionTrace,
    pub local_bound: usize,
    pub tp_bound: usize,
    /// `‖σ_sub − σ_l‖_F` for each local channel.
    pub sub_channel_residuals: Vec<f64>,
}

/// Finds a global channel consistent with every local channel and then
/// lowers its Kraus rank.
pub fn reduce_kraus_rank(ci: &ChannelInstance, opts: &ChannelReduceOptions) -> Result<ChannelReduction> {
    let inst = channel_instance_to_marginal(ci, opts.include_tp)?;
    let start = find_feasible(&inst, &opts.feasibility)?;
    let (choi, trace) = reduce_rank(&start.state, &inst, &opts.reduce)?;
    let channel = ChannelRepr::with_tolerance(
        ci.in_shape.clone(),
        ci.out_shape.clone(),
        choi,
        opts.tp_tol,
    )?;
    let kraus = kraus_from_choi(&channel, opts.reduce.rank_tol)?;
    let sub_channel_residuals = ci
        .locals
        .iter()
        .map(|l| {
            let sub = sub_channel(&channel, &l.in_subsystems, &l.out_subsystems)?;
            Ok(sub.choi().distance(l.channel.choi()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelReduction {
        channel,
        kraus,
        trace,
        local_bound: ci.local_bound(),
        tp_bound: if opts.include_tp {
            ci.tp_bound()
        } else {
            ci.local_bound()
        },
        sub_channel_residuals,
    })
}

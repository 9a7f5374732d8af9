//! JSON documents read and written by the command-line tool. Matrices are
//! stored as separate row-major real and imaginary arrays.

use anyhow::{anyhow, bail, ensure, Context};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qmarginal::channels::{ChannelInstance, ChannelRepr, KrausSet, LocalChannel};
use qmarginal::hilbert::{SubsystemSet, SystemShape, Statistics};
use qmarginal::marginal::{ConsistencyInstance, ConstraintSystem, MarginalConstraint};
use qmarginal::numerics::{ComplexMatrix, HermitianMatrix};
use qmarginal::sector::SectorInstance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.rows())
                .map(|i| m.row(i).iter().map(f).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    pub fn from_hermitian(m: &HermitianMatrix) -> Self {
        Self::from_matrix(m.as_matrix())
    }

    pub fn to_matrix(&self) -> anyhow::Result<ComplexMatrix> {
        let rows = self.re.len();
        ensure!(rows > 0, "matrix has no rows");
        ensure!(
            self.im.len() == rows,
            "re has {rows} rows but im has {}",
            self.im.len()
        );
        let cols = self.re[0].len();
        let mut data = Vec::with_capacity(rows * cols);
        for (i, (r, m)) in self.re.iter().zip(&self.im).enumerate() {
            ensure!(
                r.len() == cols && m.len() == cols,
                "row {i} does not have {cols} entries in both re and im"
            );
            data.extend(r.iter().zip(m).map(|(&a, &b)| Complex64::new(a, b)));
        }
        Ok(ComplexMatrix::from_vec(rows, cols, data)?)
    }

    pub fn to_hermitian(&self) -> anyhow::Result<HermitianMatrix> {
        let m = self.to_matrix()?;
        ensure!(m.is_square(), "matrix is {}x{}, not square", m.rows(), m.cols());
        Ok(HermitianMatrix::new(m)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDoc {
    pub subsystems: Vec<usize>,
    pub matrix: MatrixDoc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Qudit,
    Fermionic,
    Bosonic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub constraints: Vec<ConstraintDoc>,
}

/// A parsed instance of either kind.
pub enum Instance {
    Qudit(ConsistencyInstance),
    Sector(SectorInstance),
}

impl Instance {
    pub fn to_system(&self) -> anyhow::Result<ConstraintSystem> {
        Ok(match self {
            Instance::Qudit(i) => i.to_system()?,
            Instance::Sector(s) => s.to_system()?,
        })
    }

    /// Hilbert dimension of each constrained block.
    pub fn block_dims(&self) -> Vec<usize> {
        match self {
            Instance::Qudit(i) => i
                .constraints()
                .iter()
                .map(|c| c.target.dim())
                .collect(),
            Instance::Sector(s) => vec![s.target().dim()],
        }
    }

    pub fn global_dim(&self) -> usize {
        match self {
            Instance::Qudit(i) => i.total_dim(),
            Instance::Sector(s) => s.sector_dim(),
        }
    }
}

impl InstanceDoc {
    pub fn from_instance(inst: &ConsistencyInstance) -> Self {
        Self {
            kind: None,
            dims: inst.shape().dims().to_vec(),
            particles: None,
            d: None,
            k: None,
            constraints: inst
                .constraints()
                .iter()
                .map(|c| ConstraintDoc {
                    subsystems: c.subsystems.indices().to_vec(),
                    matrix: MatrixDoc::from_hermitian(&c.target),
                })
                .collect(),
        }
    }

    pub fn from_sector(inst: &SectorInstance) -> Self {
        Self {
            kind: Some(match inst.statistics() {
                Statistics::Fermionic => Kind::Fermionic,
                Statistics::Bosonic => Kind::Bosonic,
            }),
            dims: vec![inst.levels(); inst.particles()],
            particles: Some(inst.particles()),
            d: Some(inst.levels()),
            k: Some(inst.k()),
            constraints: vec![ConstraintDoc {
                subsystems: (0..inst.k()).collect(),
                matrix: MatrixDoc::from_hermitian(inst.target()),
            }],
        }
    }

    pub fn to_instance(&self) -> anyhow::Result<Instance> {
        match self.kind.unwrap_or(Kind::Qudit) {
            Kind::Qudit => {
                let shape = SystemShape::new(self.dims.clone())?;
                let constraints = self
                    .constraints
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let set = SubsystemSet::new(c.subsystems.clone())
                            .with_context(|| format!("constraint {i}"))?;
                        let target = c.matrix.to_hermitian().with_context(|| format!("constraint {i}"))?;
                        MarginalConstraint::new(set, target).with_context(|| format!("constraint {i}"))
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                Ok(Instance::Qudit(ConsistencyInstance::new(shape, constraints)?))
            }
            kind => {
                let statistics = if kind == Kind::Fermionic {
                    Statistics::Fermionic
                } else {
                    Statistics::Bosonic
                };
                let n = self.particles.ok_or_else(|| anyhow!("sector instance needs N"))?;
                let d = self.d.ok_or_else(|| anyhow!("sector instance needs d"))?;
                let k = self.k.ok_or_else(|| anyhow!("sector instance needs k"))?;
                let [c] = self.constraints.as_slice() else {
                    bail!("sector instance needs exactly one constraint");
                };
                let target = c.matrix.to_hermitian()?;
                Ok(Instance::Sector(SectorInstance::new(statistics, n, d, k, target)?))
            }
        }
    }
}

/// A single state, e.g. from an example generator or a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub matrix: MatrixDoc,
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
}

/// The part of a state or solution document needed for checking.
#[derive(Clone, Debug, Deserialize)]
pub struct MatrixHolder {
    pub matrix: MatrixDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub rank_before: usize,
    pub rank_after: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub theorem1: usize,
    pub barvinok: usize,
    pub achieved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tol: f64,
    pub rank_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub reduce: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub matrix: MatrixDoc,
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub bounds: Bounds,
    pub settings: Settings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    pub choi: MatrixDoc,
}

impl ChannelDoc {
    pub fn from_channel(ch: &ChannelRepr) -> Self {
        Self {
            in_dims: ch.in_shape().dims().to_vec(),
            out_dims: ch.out_shape().dims().to_vec(),
            choi: MatrixDoc::from_hermitian(ch.choi()),
        }
    }

    pub fn to_channel(&self, tp_tol: f64) -> anyhow::Result<ChannelRepr> {
        Ok(ChannelRepr::with_tolerance(
            SystemShape::new(self.in_dims.clone())?,
            SystemShape::new(self.out_dims.clone())?,
            self.choi.to_hermitian()?,
            tp_tol,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausDoc {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    pub operators: Vec<MatrixDoc>,
}

impl KrausDoc {
    pub fn from_kraus(k: &KrausSet, in_shape: &SystemShape, out_shape: &SystemShape) -> Self {
        Self {
            in_dims: in_shape.dims().to_vec(),
            out_dims: out_shape.dims().to_vec(),
            operators: k.operators().iter().map(MatrixDoc::from_matrix).collect(),
        }
    }

    pub fn to_kraus(&self, tp_tol: f64) -> anyhow::Result<KrausSet> {
        let ops = self
            .operators
            .iter()
            .map(MatrixDoc::to_matrix)
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(KrausSet::with_tolerance(ops, tp_tol)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalChannelDoc {
    pub in_subsystems: Vec<usize>,
    pub out_subsystems: Vec<usize>,
    pub choi: MatrixDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelInstanceDoc {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    pub locals: Vec<LocalChannelDoc>,
}

impl ChannelInstanceDoc {
    pub fn from_instance(ci: &ChannelInstance) -> Self {
        Self {
            in_dims: ci.in_shape().dims().to_vec(),
            out_dims: ci.out_shape().dims().to_vec(),
            locals: ci
                .locals()
                .iter()
                .map(|l| LocalChannelDoc {
                    in_subsystems: l.in_subsystems.indices().to_vec(),
                    out_subsystems: l.out_subsystems.indices().to_vec(),
                    choi: MatrixDoc::from_hermitian(l.channel.choi()),
                })
                .collect(),
        }
    }

    pub fn to_instance(&self, tp_tol: f64) -> anyhow::Result<ChannelInstance> {
        let in_shape = SystemShape::new(self.in_dims.clone())?;
        let out_shape = SystemShape::new(self.out_dims.clone())?;
        let locals = self
            .locals
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let in_subsystems = SubsystemSet::new(l.in_subsystems.clone())?;
                let out_subsystems = SubsystemSet::new(l.out_subsystems.clone())?;
                let channel = ChannelRepr::with_tolerance(
                    in_shape.restrict(&in_subsystems)?,
                    out_shape.restrict(&out_subsystems)?,
                    l.choi.to_hermitian()?,
                    tp_tol,
                )
                .with_context(|| format!("local channel {i}"))?;
                Ok(LocalChannel {
                    in_subsystems,
                    out_subsystems,
                    channel,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(ChannelInstance::new(in_shape, out_shape, locals)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelBounds {
    /// From the local Choi states alone.
    pub local: usize,
    /// Including the trace-preservation constraint.
    pub tp_augmented: usize,
    pub achieved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelReductionDoc {
    pub channel: ChannelDoc,
    pub kraus: KrausDoc,
    pub kraus_count: usize,
    pub bounds: ChannelBounds,
    pub sub_channel_residuals: Vec<f64>,
    pub tp_deviation: f64,
    pub trace: Vec<TraceRow>,
    pub settings: Settings,
}

//! Tensor-product structure: subsystem index arithmetic, partial traces and
//! their adjoints, support projectors, and the fermionic/bosonic sectors.

mod sector;
mod tensor;

pub use sector::{
    binomial, sector_dim, sector_isometry, sector_partial_trace, SectorEmbedding, SectorTrace,
    Statistics,
};
pub use tensor::{
    embed_with_identity, partial_trace, partial_trace_operator, support_basis, support_projector,
    Bipartition, SubsystemSet, SystemShape,
};
pub(crate) use tensor::psd_slack;

//! Reduction of almost Lagrangian and almost CR structures to partially
//! integrable ones.
//!
//! The pipeline: derive the triple (nu, g, A) from an instance (omega with
//! J or sigma), split the complexification into generalized eigenspaces of
//! the structure operator A, transport them onto the eigenspaces of the
//! model operator by a real g-orthogonal map e, and read off the reduced
//! structure K = Re(e^{-1} S e).

pub mod classify;
pub mod error;
pub mod generator;
pub mod io;
pub mod linalg;
pub mod reduction;
pub mod spectral;
pub mod structures;
#[cfg(test)]
pub(crate) mod testutil;
pub mod tol;

pub use classify::{
    classify, mixed_reduce, rank_profile, rank_spikes, Classification, Kind, MixedResult,
};
pub use error::{Error, Result};
pub use generator::{
    family_direction,
    degenerate_family, gen_degenerate, gen_generic, gen_partially_integrable, Frame, GeneratorSpec,
};
pub use io::{ClassifyFile, InstanceFile, ReportFile};
pub use linalg::{CMat, CVec, RMat, RVec, SignedBasis, Subspace};
pub use reduction::{reduce, verify_uniqueness, IsometryE, ReductionResult, TargetSplit};
pub use spectral::{EigCluster, QuadSpace, SpectralData};
pub use structures::{derive, DerivedTriple, GenericityReport, Instance, Mode};
pub use tol::Tolerances;

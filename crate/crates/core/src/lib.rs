//! Spin-phonon relaxation for molecular spin qubits.
//!
//! The crate ingests g-tensor gradients per phonon mode, contracts them with
//! an applied field into a spin-phonon coupling matrix, splits the phonon
//! space by SVD into a handful of primary modes plus a residual bath,
//! constructs bath spectral densities (quantum or classical, Gaussian
//! broadened), and computes T1/T2 via Bloch-Redfield dynamics. The embedded
//! primary+residual model is an orthogonal transformation of the original
//! bath, so its exact effective spectral density — and hence the relaxation
//! physics — reproduces the full-bath result.

pub mod bath;
pub mod dynamics;
pub mod embed;
pub mod gtensor;
pub mod ingest;
pub(crate) mod linalg;
pub mod ode;
pub mod spin;
pub mod synth;
pub mod units;

pub use bath::{
    bose_occupation, spectral_density_effective, spectral_density_full, EffectiveMethod, Flavor,
    SpectralDensity,
};
pub use dynamics::{
    exact_oracle, extract_rates, propagate, redfield_tensor, relax_scan, ModeSource,
    RedfieldModel, RedfieldOptions, RelaxationResult, ScanOptions,
};
pub use embed::{
    build_embedding, embed_dataset, mode_entropy, roundtrip_check, svd_project, Embedding,
    Projectors,
};
pub use gtensor::GTensor;
pub use ingest::{
    coupling_matrix, fd_gradient, parse_dataset, participation_norms, write_dataset,
    CouplingMatrix, Dataset, GGradientSet, GradientNorm, ModeSet, ParseOptions, SchemaKind,
};
pub use spin::{field_vector, spin_hamiltonian, spin_operators, SpinSystem};
pub use synth::{generate, SynthSpec};

use thiserror::Error;

/// Any error this crate can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spin(#[from] spin::SpinError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Embed(#[from] embed::EmbedError),
    #[error(transparent)]
    Bath(#[from] bath::BathError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
}

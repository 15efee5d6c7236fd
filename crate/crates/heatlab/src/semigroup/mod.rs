//! Spectral and Krylov engines for the heat semigroups and the kernels they
//! generate: heat columns, the Szego projector, relative fundamental
//! solutions, Green and resolvent columns, and derivative words on slices.

pub mod lanczos;
pub mod spectral;
pub mod heat;
pub mod szego;
pub mod green;
pub mod derivative;

pub use heat::{heat_kernel_column, heat_kernel_columns, HeatEngine, KernelKind, KernelSlice};
pub use spectral::{decompose, decompose_from, EigenRequest, SpectralDecomposition};

//! heatlab: a numerical laboratory for the heat semigroups generated by
//! weighted Cauchy-Riemann operators on ℂ.
//!
//! Given a subharmonic, nonharmonic polynomial weight `p` and a parameter
//! `τ`, the crate assembles the weighted operators
//! `Zbar = ∂/∂zbar + τ ∂p/∂zbar` and friends on a truncated uniform grid,
//! forms the magnetic Schrodinger operators `box = Zbar Zbar†` and
//! `boxt = Zbar† Zbar`, and computes heat kernels, the Szego projector, the
//! relative fundamental solution, Green and resolvent columns, and wave
//! evolutions. On top of that sits a verification layer that fits the
//! constants `(c, C)` in the pointwise decay estimates these kernels satisfy
//! and checks the embedding/Poincare/cancellation inequalities on random
//! test functions.
//!
//! Start with the runnable examples (`cargo run --release --example ...`) or
//! the `heatlab` binary, which drives full experiment configurations.

pub mod error;
pub mod grid;
pub mod polygeom;
pub mod sparse;
pub mod discretize;
pub mod semigroup;

pub use error::{HeatlabError, Result};

/// Entry point used by the `heatlab` binary. Returns the process exit code.
pub fn run_cli() -> i32 {
    eprintln!("heatlab CLI not wired up yet");
    2
}

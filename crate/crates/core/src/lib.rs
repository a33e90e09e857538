//! Isospectral families of one-dimensional Schrödinger potentials.
//!
//! A potential `V` with known eigenpairs `(E_k, ψ_k)` is refactorized around
//! an arbitrary bound state `ψ_n`. The one-parameter family
//!
//! ```text
//! Ṽ(x) = V(x) − E_n − 2 f′(x),    f(x) = ψ_n²(x) / (C + ∫_{x₀}^{x} ψ_n²)
//! ```
//!
//! has exactly the spectrum `{E_k − E_n}` of `V − E_n` whenever the
//! denominator never vanishes. The crate builds these families
//! ([`factorize`]), provides exactly solvable starting points ([`catalog`]),
//! and checks every claim with an independent finite-difference eigensolver
//! ([`spectral`]). The [`verify`] module bundles the property battery and
//! [`cli`] backs the `isospec` binary.

pub mod catalog;
pub mod cli;
pub mod error;
pub mod factorize;
pub mod grid;
pub mod spectral;
pub mod verify;

pub use catalog::{BasePotential, BoundState, Direction, EigenState, LadderDescriptor};
pub use error::{Error, Result};
pub use factorize::{CScale, Deformation, DeformedState, ValidityInterval};
pub use grid::{Grid, GridFunction};
pub use spectral::{FdHamiltonian, SpectrumReport};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/factorization.md")]
    mod factorization {}
    #[doc = include_str!("../../../book/src/examples.md")]
    mod examples {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

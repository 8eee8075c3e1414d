//! Spectral regularization algorithms with inner-product kernels on spheres.
//!
//! The crate is organised bottom-up:
//!
//! * [`sphere`]: sampling on `S^d`, harmonic multiplicities, normalized
//!   Gegenbauer polynomials and Funk–Hecke eigenvalues.
//! * [`kernels`]: inner-product kernels `K(x, x') = Φ(<x, x'>)` and Gram assembly.
//! * [`filters`]: filter functions `φ_λ`, remainders `ψ_λ` and an axiom checker.
//! * [`regression`]: fitting, prediction and Monte-Carlo risk evaluation.
//! * [`rates`]: closed-form rate exponents and phase/plateau bookkeeping.
//! * [`oracle`]: data-free evaluation of `N₁`, `N₂`, `M₂` on grouped spectra.
//! * [`harness`]: declarative, seeded experiments and log-log rate fits.
//!
//! Data parallelism (Gram rows, trial sweeps) goes through [`par`]. With the
//! default `parallel` feature it uses rayon; results are bit-identical to the
//! sequential path for any thread count.

// `!(x >= a)` is how argument checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filters;
pub mod harness;
pub mod kernels;
mod linalg;
pub mod oracle;
pub mod par;
pub mod quadrature;
pub mod rates;
pub mod regression;
pub mod sphere;
pub mod target;

pub use error::{Error, Result};

//! Toroidal-distance message codes over `Z_q^l` and their use inside a
//! generalized Kyber.CPA public-key encryption scheme.
//!
//! The crate is organised in layers:
//!
//! * [`torus`] — centered-modulus arithmetic and the L2 toroidal metric;
//! * [`lattice`] — integer lattices (`Z^l`, `D4`, `2E8`), point enumeration
//!   and closest-vector decoding;
//! * [`codebook`] — the message codebook constructions (baseline, Minal,
//!   GTD via `D4`/`2E8`, max-Lee-distance), behind a registry keyed by
//!   construction name;
//! * [`ring`] — arithmetic in `Z_q[x]/(x^n + 1)`, centered-binomial
//!   sampling and Kyber compression;
//! * [`pke`] — the generalized Kyber.CPA scheme with a pluggable
//!   l-dimensional message encoder and noise instrumentation;
//! * [`fixed`] / [`dist`] — high-precision fixed-point arithmetic and exact
//!   discrete probability distributions with tracked pruned mass;
//! * [`noise`] — the joint decryption-noise model (product-projection
//!   distributions, quantization noise, splitting checks);
//! * [`dfr`] — pairwise error probabilities, the decryption-failure-rate
//!   union bound, a Chernoff cross-check and Monte Carlo simulation.

pub mod codebook;
pub mod dfr;
pub mod dist;
pub mod error;
pub mod fixed;
pub mod lattice;
pub mod noise;
pub mod pke;
pub mod ring;
pub mod torus;

pub use error::{Error, Result};

//! Numerics for the two-dimensional Coulomb gas confined to an analytic Jordan curve.
//!
//! A curve enters as the exterior conformal map `φ(z) = z + Σ c_j z^{-j}` of
//! the unbounded complement (see [`curve`]). From it the crate builds the
//! Grunsky matrix and the block operator `K` ([`grunsky`]), the Fourier data of
//! test functions and the large-`n` predictions for the gas ([`boundary`]),
//! boundary-integral oracles for the same operators ([`potential`]), and a
//! Metropolis sampler for the gas itself ([`gas`]).

pub mod boundary;
pub mod curve;
mod error;
pub mod gas;
pub mod grunsky;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};

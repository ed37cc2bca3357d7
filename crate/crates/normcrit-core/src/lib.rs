//! Variational numerics for normalized solutions of the coupled Schrödinger system
//!
//! ```text
//! -Δu + λ₁u = μ₁|u|^{2*-2}u + να|u|^{α-2}|v|^β u
//! -Δv + λ₂v = μ₂|v|^{2*-2}v + νβ|u|^α|v|^{β-2}v
//! ```
//!
//! posed on the L² torus `‖u‖₂ = a, ‖v‖₂ = b` of radial functions in N = 3, 4.
//! The crate computes the closed-form geometry constants, the local minimizer,
//! the mountain-pass solution, the truncated-bubble level bound and the ν → 0
//! scaling laws. Everything is `no_std` with `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod bubbles;
mod error;
pub mod functional;
pub mod grid;
pub mod linalg;
pub mod minimize;
mod newton;
pub mod mountain;
pub mod params;
mod pchip;
pub mod quad;
mod rearrange;

pub use error::{Error, Result};
pub use functional::{Functional, MultiplierPair, Parts, StatePair};
pub use grid::{Grading, RadialField, RadialGrid, ScaleWindow};
pub use params::{DerivedConstants, ProblemParams};

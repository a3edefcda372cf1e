//! Kinetically constrained superradiance toolkit.
//!
//! Collective decay through a constrained jump operator `F = Σ_j P_j σ_j⁻`:
//! exact operators and observables ([`spin`]), cavity elimination
//! ([`model_reduction`]), trajectories and master equations ([`dynamics`]),
//! early-time cascade analysis ([`click_limit`]), dark-state structure
//! ([`dark`]), entanglement measures ([`entanglement`]) and a semiclassical
//! sampler with the cavity kept ([`dtwa`]).

pub mod click_limit;
pub mod dark;
pub mod dtwa;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod model_reduction;
pub mod numerics;
pub mod rng;
pub mod spin;
pub mod stats;

pub use error::{Error, Result};

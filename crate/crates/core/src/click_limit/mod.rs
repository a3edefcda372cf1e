//! Early-time click cascade: layer norms `B_k = ‖F^k|⇑⟩‖²`, exact AND
//! combinatorics, the universal lower bound for local Boolean constraints and
//! the thermodynamic rate equation `dn/dτ = -g(n)`.

mod and;
mod bound;
mod layers;
mod ode;

pub use and::{and_count, and_intensity, g_and, g_and_maximizer};
pub use bound::{
    boolean_lower_bound, isolated_zone_size, random_rule, verify_bound, BoundMargin, BoundReport,
};
pub use layers::{layer_spectrum, Cascade, Layer, LayerSpectrum, LAYER_SUPPORT_LIMIT};
pub use ode::{ode_density, ode_density_and, quadrature_time, DensityTrajectory};

//! Time evolution: quantum-jump trajectories of the effective spin model, a
//! dense master-equation oracle and the explicit spin-cavity model.

mod cavity;
mod density;
mod jumps;
mod master;
mod model;
mod prep;
mod result;

pub use cavity::{auto_fock_cutoff, run_full_cavity, CAVITY_MAX_DIM, FOCK_ABORT, FOCK_ACCEPT, PHOTONS};
pub use density::{reconstruct_density, DensityMatrix, DENSITY_MAX_SITES};
pub use jumps::{run_quantum_jumps, Engine, JumpOptions, SPECTRAL_MAX_SITES};
pub use master::{evolve_master_exact, Lindbladian, MASTER_MAX_SITES};
pub use model::{EffectiveModel, FullCavityModel, TimeGrid};
pub use prep::prep_time;
pub use result::{Record, Series, TrajectoryResult};

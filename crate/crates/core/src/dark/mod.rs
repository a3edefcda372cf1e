//! Dark states of the constrained jump operator: bitstrings, packets,
//! exact sector kernels and fragmentation.

mod bitstrings;
mod fragments;
mod kernel;
mod omega;
mod packets;

pub use bitstrings::{enumerate_bitstring_dark, extendable_zeros, facilitable_zeros, is_independent_set};
pub use fragments::{fragmentation_report, FragmentationReport, SectorFragments};
pub use kernel::{
    is_dark, kernel_basis, sector_kernel, DarkBasis, DarkCheck, DarkClass, DarkLabel, SectorKernel,
    CLASS_TOL, KERNEL_MAX_SITES,
};
pub use omega::{
    build_omega, embed, embeddings, format_terms, omega_family, omega_seed, Embedding, OmegaClosure,
};
pub use packets::{dimer_packet, dimer_product, triple_packet};

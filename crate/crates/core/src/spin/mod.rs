//! Constrained spin operators on bitmask configurations of an `N`-site chain.
//!
//! `F = Σ_j P_j σ_j⁻` is the constrained collective lowering operator, with
//! `P_j` a Boolean function of the occupations of the `2w` nearest sites.

mod config;
mod observables;
mod ops;
mod rule;
mod sector;
mod state;

pub use config::{bitstring, parse_bits, SpinConfig, MAX_SITES};
pub use observables::{
    block_count, diagonal_value, expect, expect_report, Expectation, Observable,
};
pub use ops::{
    apply_f, apply_fdag, f_into, fdag_into, lower_into, raise_into, sigma_minus, sigma_plus,
    sigma_z, total_sz, SpinOperand,
};
pub use rule::{constraint_allows, table_len, Boundary, CompiledRule, ConstraintRule, RuleKind};
pub use sector::{combinations, Sector};
pub use state::{PureState, SparseState, C64, DENSE_MAX_SITES, SPARSE_DROP_TOL};
pub(crate) use config::full_mask;

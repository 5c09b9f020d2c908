//! Rigidity and hidden-mode analysis for distance-based formations.
//!
//! A [`Framework`] is a graph plus a reference configuration. From it the crate
//! builds the rigidity matrix and its fundamental subspaces ([`rigidity`]), the
//! linearized gradient-flow system with a single actuated node and a single
//! measured node and its uncontrollable/unobservable structure ([`modes`]),
//! and simulations of both the nonlinear and linearized dynamics
//! ([`dynamics`]). All geometric statements are checked through
//! [`Subspace`] comparisons with explicit tolerances.

pub mod dynamics;
pub mod error;
pub mod framework;
mod linalg;
pub mod modes;
pub mod rigidity;
pub mod subspace;

pub use dynamics::{
    controllable_plane, dichotomy_experiment, edge_error_series, rbm_coefficients, simulate_lti,
    simulate_nonlinear, steady_state, ControllablePlane, ImpulseOutcome, Trajectory, Verdict,
};
pub use error::{Error, Result};
pub use framework::{block, load_scenario, Framework, Method, Scenario, SimSettings, Tolerances};
pub use modes::{
    classify_modes, global_rotational_subspace, linearize, local_rotational_subspace,
    uncontrollable_subspace, unobservable_subspace, LinearizedSystem, ModeReport,
};
pub use rigidity::{
    classify_rigidity, deformation_space, flex_space, rbm_basis, rigidity_function, rigidity_matrix,
    self_stress_space, RbmBasis, RigidityClass, RigidityMatrix,
};
pub use subspace::{contains, direct_sum_check, intersect, orthonormalize, principal_angles, Subspace};

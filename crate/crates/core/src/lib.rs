//! Maximum-entropy goal-directedness for finite-horizon tabular MDPs.
//!
//! The central question: how well is a policy's behaviour explained by the
//! hypothesis that it is optimising *some* utility function? The score —
//! MEG, in nats — is the best expected log-probability advantage that any
//! Boltzmann-rational model policy achieves over the uniform baseline. It is
//! zero for policies that exert no control (uniform behaviour, constant
//! utilities, action-independent dynamics), capped at `horizon * ln(A)`, and
//! invariant to affine rescaling of the utility.
//!
//! Layout:
//! - [`mdp`]: processes, policies, occupancies, trajectories.
//! - [`soft_q`]: soft (entropy-regularised) value iteration and the
//!   Boltzmann model-policy family, including the β = 0 and β = ±∞ limits.
//! - [`meg`]: the solvers — known utility, parametric unknown utility, and
//!   goals about reaching target states.
//! - [`utility`]: tabular / linear / one-hidden-layer parametric utilities
//!   with hand-rolled gradients.
//! - [`oracles`]: slow, independent reference implementations used to
//!   cross-check the solvers in tests and in `verify`.
//! - [`envs`]: the worked one-step example, cliff-world, random instances.
//! - [`experiments`]: the two cliff-world sweeps behind the CLI.
//! - [`io`]: JSON/CSV schemas for processes, policies, trajectories, models.
//! - [`verify`]: the seeded self-check battery.

pub mod envs;
pub mod error;
pub mod experiments;
pub mod io;
pub mod mdp;
pub mod meg;
pub mod oracles;
pub mod soft_q;
pub mod utility;
pub mod verify;

pub use error::{MegError, Result};
pub use mdp::{Occupancy, Policy, StepUtilities, TabularMdp, TrajectorySet};
pub use meg::{
    meg_known, meg_known_from_trajectories, meg_target_state,
    meg_target_state_from_trajectories, meg_unknown, meg_unknown_from_trajectories,
    predictive_accuracy, MegOptions, MegResult,
};
pub use soft_q::{soft_policy, soft_value_iteration, Beta, SoftQ};
pub use utility::{FeatureMap, ParametricUtility, UtilityKind};

//! Single-mode solutions of multi-term fractionally damped wave equations,
//! and recovery of the damping parameters from time-trace observations.
//!
//! The crate splits into:
//! - [`model`]: the damping model, its Laplace-domain symbol `omega(s)` and the
//!   analytic transfer function `hhat` for each excitation,
//! - [`special`]: gamma/digamma used throughout,
//! - [`ml`]: the two-parameter Mittag-Leffler function for scalars and matrices,
//! - [`forward`]: the companion-system forward solver producing time traces,
//! - [`laplace`]: numerical Laplace transform and pole/residue computation,
//! - [`recon`]: the three inversion algorithms (Laplace-domain Newton,
//!   large-time asymptotics, small-time asymptotics) plus sequential peel-off.

pub mod forward;
pub mod laplace;
pub mod ml;
pub mod model;
pub mod recon;
pub mod special;

pub use forward::{solve_trace, CompanionSystem, TimeTrace};
pub use laplace::{laplace_numeric, LaplaceSamples, PoleData};
pub use ml::{ml_matrix, ml_scalar, MlAccuracy};
pub use model::{DampingModel, DampingTerm, Excitation, ExcitationKind, HigherTerm};
pub use recon::{ReconstructionReport, ReconstructionStatus};

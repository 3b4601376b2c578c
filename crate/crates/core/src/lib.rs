//! Bandit algorithms for bilinear reward models.
//!
//! The reward of pulling a pair of arms (x, z) is `xᵀ Θ* z` plus noise, where
//! Θ* is an unknown low-rank matrix. Exploiting that structure takes three
//! ingredients, each a module here:
//!
//! * [`completion`] recovers a low-rank matrix from noisy averages of a
//!   subset of its entries;
//! * [`lowoful`] runs optimism-based linear bandits with a penalty split
//!   between an estimated subspace and its complement;
//! * [`estr`] glues them into two-stage and interleaved strategies: explore a
//!   well-conditioned arm subset, complete the reward matrix, estimate the
//!   singular subspaces, then rotate the action space so the complement
//!   carries almost no signal and can be penalized hard.
//!
//! [`env`] simulates the reward model, [`arm_selection`] picks the
//! exploration subset, [`linalg`] provides the dense kernels, and [`harness`]
//! runs multi-method experiments with CSV/SVG output.

pub mod arm_selection;
pub mod completion;
pub mod env;
pub mod error;
pub mod estr;
pub mod harness;
pub mod linalg;
pub mod lowoful;
pub mod rng;

pub use arm_selection::{relaxation_weights, score_subset, select_subset, SubsetSelection};
pub use estr::{
    estimate_theta, gamma_bound, isse_knots, rearranged_theta, rotate_and_vectorize, run_estr,
    run_estr_detailed, run_isse, run_isse_detailed, run_oful_baseline, run_oful_baseline_detailed,
    stage1_schedule, EstrConfig, GammaMode, RunDiagnostics, SubspaceDiagnostics, SubspaceEstimate,
};
pub use completion::{complete, incoherence, sin_theta_product, CompletionMethod, CompletionOptions, CompletionResult, IncoherenceReport, ObservationTable};
pub use env::{generate_sphere_arms, make_low_rank_theta, ArmSet, BilinearEnvironment, NoiseKind, RegretTrace};
pub use error::{Error, Result};
pub use harness::{
    run_experiment, run_invariant_checks, summary_json, ExperimentConfig, ExperimentResult,
    InvariantReport, Method, MethodResult,
};
pub use linalg::DenseMatrix;
pub use lowoful::{lambda_perp_default, ConfidenceEllipsoid, LowOfulConfig, LowOfulState, UcbRunner};
pub use rng::{derive_stream, RunStream};

//! Sparse-recovery STAP: simulate airborne-radar clutter, estimate the
//! angle-Doppler clutter spectrum by L1 recovery, and build clutter
//! covariance estimates and adaptive filters from it.
//!
//! The crate is organized along the processing chain:
//!
//! - [`model`]: array geometry, space-time steering vectors, the clutter ridge
//! - [`scenario`]: synthetic clutter snapshots and the ground-truth covariance
//! - [`dictionary`]: angle-Doppler grid, overcomplete steering basis, sparsity estimate
//! - [`l1solver`]: complex basis-pursuit-denoising solver with optimality audit
//! - [`jointsr`]: multi-snapshot spectrum estimation (averaging and joint recovery)
//! - [`estimators`]: covariance estimators (SMI, LSMI, colored loading, SR) and filters
//! - [`harness`]: improvement-factor metrics, Monte Carlo convergence and mismatch sweeps
//! - [`linalg`]: dense complex Hermitian factorizations used throughout

pub mod dictionary;
pub mod estimators;
pub mod harness;
pub mod jointsr;
pub mod l1solver;
pub mod linalg;
pub mod model;
pub mod scenario;

pub use dictionary::{build_dictionary, build_grid, estimate_sparsity, Dictionary, GridSpec};
pub use estimators::{
    assumed_ccm, capon_spectrum, colored_loading, filter_weights, lsmi, smi, sr_ccm,
    CovarianceEstimate, EstimatorKind, FilterWeights,
};
pub use harness::{
    convergence_rate, if_loss, improvement_factor, range_scan, run_convergence,
    run_mismatch_sweep, IfLossCurve, Method, MismatchParameter, PriorSpec, StapSetup,
    SweepResult,
};
pub use jointsr::{
    extract_support, joint_recover, ls_refit, simple_average, vote_supports, PowerSpectrum,
    SupportSet,
};
pub use l1solver::{check_kkt, solve_bpdn, BpdnConfig, BpdnSolver, KktCertificate, SparseSpectrum};
pub use model::{clutter_doppler, steering_vector, RadarParams, SteeringVector};
pub use scenario::{
    derive_seed, ground_truth_ccm, inject_target, simulate_snapshots, ClutterScenario,
    SnapshotSet, TargetSpec,
};

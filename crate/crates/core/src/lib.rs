//! Simulation of single-copy product testing for multi-qudit pure states,
//! together with numerical checks of the permanent, overlap-sum, likelihood
//! and purity inequalities that bound such testers.

pub mod bounds;
pub mod ensembles;
pub mod error;
pub mod perm;
pub mod permanent;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod schmidt;
pub mod state;
pub mod verify;

pub use ensembles::{far_fraction_experiment, far_state, sample, EnsembleKind, EnsembleSpec, FarStateCertificate};
pub use error::{Error, Result};
pub use perm::{double_coset_decompose, permute_tensor_factors, sym_dim, CosetDecomposition, Permutation};
pub use permanent::{brute_force_permanent, permanent};
pub use protocol::{
    empirical_tv, estimate_purity_single_copy, mp_test, tester_eval, Measurement, PurityEstimate, Rank1Povm, Strategy,
    TesterVerdict, Verdict,
};
pub use report::ExperimentReport;
pub use schmidt::{distance_to_bp, distance_to_mp, schmidt, BpDistance, MpDistance, MpOptions, SchmidtData};
pub use state::{
    haar_state, haar_unitary, partial_trace, pure_trace_distance, purity, trace_distance, DensityMatrix, PureState,
    State, C64,
};
pub use verify::{run_verification, SuiteResult, SuiteStatus, VerifyOptions, VerifyReport};

//! Single-copy measurement protocols: rank-1 POVMs, strategies and outcome
//! strings, ensemble distinguishing, purity estimation and the product
//! tester.

pub mod distinguish;
pub mod povm;
pub mod purity;
pub mod strategy;
pub mod tester;

pub use distinguish::empirical_tv;
pub use povm::{sample_from, sample_outcome, Measurement, Rank1Povm};
pub use purity::{estimate_purity_single_copy, CopySource, PurityEstimate, PurityEstimatorConfig, StateSource};
pub use strategy::{exact_string_distribution, run_protocol, AdaptiveRule, Scope, Source, Strategy};
pub use tester::{
    bias, mp_test, mp_tester, mp_thresholds, tester_eval, TesterOutcome, TesterVerdict, TranscriptRow, Verdict,
};

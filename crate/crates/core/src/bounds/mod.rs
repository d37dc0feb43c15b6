//! Functionals from the lower-bound arguments and checks of the
//! inequalities between them.

mod gram;
mod likelihood;
mod moments;
mod overlap;
mod purity;
mod tv;

use serde::{Deserialize, Serialize};

pub use gram::{frobenius_bound_check, gram, gram_regime_check, GramMatrix};
pub use likelihood::{
    haar_likelihood_ratio, monte_carlo_ratio, product_likelihood_ratio, ratio_chain, rising_factorial, LikelihoodRatio,
    MonteCarloEstimate, RatioChain,
};
pub use moments::{haar_moment_deviation, swap_trick_gap};
pub use overlap::{
    perm_overlap_sum, perm_overlap_sum_by_contraction, prod_perm_overlap_sum, prod_perm_overlap_sum_by_symmetrizers,
    saturation_check_product_collection, sym_overlap_check, validate_partition, MAX_CONTRACTION_DIM,
};
pub use purity::{average_marginal_purity, avg_purity_bound, p_test};
pub use tv::{check_distribution, le_cam_success, one_sided_tv_check, tv_distance};

/// Absolute slack tolerance for inequality checks.
pub const SLACK_TOL: f64 = 1e-9;

/// An inequality `lhs ≥ rhs`, checked up to a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub slack: f64,
}

impl BoundReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self::with_tolerance(lhs, rhs, SLACK_TOL)
    }

    pub fn with_tolerance(lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            lhs,
            rhs,
            satisfied: slack >= -tol,
            slack,
        }
    }
}

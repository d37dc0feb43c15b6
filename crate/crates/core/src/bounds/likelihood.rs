//! Likelihood ratios between Haar-type ensembles and the maximally mixed
//! state for a fixed sequence of rank-one outcomes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::overlap::{perm_overlap_sum, prod_perm_overlap_sum, validate_partition};
use super::BoundReport;
use crate::error::{Error, Result};
use crate::perm::MAX_ENUM_DEGREE;
use crate::rng::stream;
use crate::state::{haar_state, inner, PureState};

/// `d (d+1) ⋯ (d+T-1)`.
pub fn rising_factorial(d: f64, t: usize) -> f64 {
    (0..t).map(|k| d + k as f64).product()
}

/// Exact ratio `E_v[p^v(ℓ)] / p^mm(ℓ)` and the linear lower bound on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRatio {
    pub ratio: f64,
    /// The permutation-symmetrized overlap sum entering the ratio.
    pub overlap_sum: f64,
    /// `Π_b D_b^T / rising(D_b, T)`.
    pub prefactor: f64,
    pub lower_bound: f64,
}

impl LikelihoodRatio {
    pub fn check(&self) -> BoundReport {
        BoundReport::new(self.ratio, self.lower_bound)
    }
}

/// Global Haar ensemble on `C^d` against `I/d`.
pub fn haar_likelihood_ratio(measured: &[PureState]) -> Result<LikelihoodRatio> {
    let t = measured.len();
    if t > MAX_ENUM_DEGREE {
        return Err(Error::SizeCap(format!("{t} rounds > {MAX_ENUM_DEGREE}")));
    }
    if t == 0 {
        return Ok(LikelihoodRatio {
            ratio: 1.0,
            overlap_sum: 1.0,
            prefactor: 1.0,
            lower_bound: 1.0,
        });
    }
    let d = measured[0].dim() as f64;
    let prefactor = d.powi(t as i32) / rising_factorial(d, t);
    let overlap_sum = perm_overlap_sum(measured)?;
    Ok(LikelihoodRatio {
        ratio: prefactor * overlap_sum,
        overlap_sum,
        prefactor,
        lower_bound: 1.0 - (t * (t - 1)) as f64 / (2.0 * d),
    })
}

/// Independent Haar states on each block of `parts` against the maximally
/// mixed state. The bound is `1 - Σ_b T(T-1)/(2 D_b)`; for two blocks of
/// equal dimension `D` it reads `1 - T(T-1)/D`.
pub fn product_likelihood_ratio(measured: &[PureState], parts: &[Vec<usize>]) -> Result<LikelihoodRatio> {
    let t = measured.len();
    let first = measured
        .first()
        .ok_or_else(|| Error::InvalidState("no measured states".into()))?;
    validate_partition(parts, first.num_factors())?;
    let d = first.local_dim() as f64;
    let block_dims: Vec<f64> = parts.iter().map(|p| d.powi(p.len() as i32)).collect();
    let prefactor: f64 = block_dims
        .iter()
        .map(|&db| db.powi(t as i32) / rising_factorial(db, t))
        .product();
    let overlap_sum = prod_perm_overlap_sum(measured, parts)?;
    let lower_bound = 1.0
        - block_dims
            .iter()
            .map(|db| (t * (t - 1)) as f64 / (2.0 * db))
            .sum::<f64>();
    Ok(LikelihoodRatio {
        ratio: prefactor * overlap_sum,
        overlap_sum,
        prefactor,
        lower_bound,
    })
}

/// The successive lower bounds on the Haar ratio for any outcome sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioChain {
    pub d: usize,
    pub t: usize,
    /// `d^T / rising(d, T)`, the ratio when the overlap sum is 1.
    pub prefactor: f64,
    /// `Π_{k<T} (1 + k/d)^{-1}`.
    pub product: f64,
    /// `exp(-T(T-1)/(2d))`.
    pub exponential: f64,
    /// `1 - T(T-1)/(2d)`.
    pub linear: f64,
}

impl RatioChain {
    /// One report per link, starting from an actual ratio value.
    pub fn links(&self, ratio: f64, tol: f64) -> Vec<BoundReport> {
        vec![
            BoundReport::with_tolerance(ratio, self.product, tol),
            BoundReport::with_tolerance(self.product, self.exponential, tol),
            BoundReport::with_tolerance(self.exponential, self.linear, tol),
        ]
    }
}

pub fn ratio_chain(d: usize, t: usize) -> Result<RatioChain> {
    if d == 0 {
        return Err(Error::InvalidDimension("d must be positive".into()));
    }
    let df = d as f64;
    let x = (t * t.saturating_sub(1)) as f64 / (2.0 * df);
    Ok(RatioChain {
        d,
        t,
        prefactor: df.powi(t as i32) / rising_factorial(df, t),
        product: (0..t).map(|k| 1.0 / (1.0 + k as f64 / df)).product(),
        exponential: (-x).exp(),
        linear: 1.0 - x,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 4096;

/// Sample mean of `Π_t d |⟨ψ_t|v⟩|²` over Haar `v`, in fixed chunks so the
/// value does not depend on the thread count.
pub fn monte_carlo_ratio(measured: &[PureState], samples: usize, seed: u64) -> Result<MonteCarloEstimate> {
    let first = measured
        .first()
        .ok_or_else(|| Error::InvalidState("no measured states".into()))?;
    let d = first.dim();
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let mut rng = stream(seed, c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let v = haar_state(d, &mut rng)?;
                let x: f64 = measured
                    .iter()
                    .map(|m| d as f64 * inner(m.amplitudes(), v.amplitudes()).norm_sqr())
                    .product();
                s += x;
                s2 += x * x;
            }
            Ok((s, s2))
        })
        .collect::<Result<_>>()?;
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

//! Purity estimation from single-copy measurements in random bases.
//!
//! Each round draws a Haar-random basis, measures `K` fresh copies in it
//! and counts outcome-equal pairs. For a Haar basis the expected collision
//! rate is `(1 + Tr ρ²)/(D + 1)`, so `(D + 1)·rate − 1` is unbiased; rounds
//! are combined by median-of-means.

use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::povm::{sample_from, Measurement, Rank1Povm};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::state::State;

/// Refuses schedules that would need more copies than this.
pub const MAX_COPIES: usize = 200_000_000;

/// Anything that hands out fresh copies of an unknown state and measures
/// them one at a time.
pub trait CopySource {
    fn local_dim(&self) -> usize;
    fn num_factors(&self) -> usize;
    /// Copies left, or `None` for an unlimited supply.
    fn remaining(&self) -> Option<usize>;
    /// Measures `shots` fresh copies with `m`, one outcome per copy.
    fn measure(&mut self, m: &Measurement, shots: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>>;

    fn dim(&self) -> usize {
        self.local_dim().pow(self.num_factors() as u32)
    }
}

/// Copies of a known state, optionally with a finite budget.
#[derive(Clone, Debug)]
pub struct StateSource {
    state: State,
    budget: Option<usize>,
    used: usize,
}

impl StateSource {
    pub fn new(state: State) -> Self {
        Self {
            state,
            budget: None,
            used: 0,
        }
    }

    pub fn with_budget(state: State, budget: usize) -> Self {
        Self {
            state,
            budget: Some(budget),
            used: 0,
        }
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn used(&self) -> usize {
        self.used
    }
}

impl CopySource for StateSource {
    fn local_dim(&self) -> usize {
        self.state.local_dim()
    }

    fn num_factors(&self) -> usize {
        self.state.num_factors()
    }

    fn remaining(&self) -> Option<usize> {
        self.budget.map(|b| b - self.used)
    }

    fn measure(&mut self, m: &Measurement, shots: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        if let Some(left) = self.remaining() {
            if shots > left {
                return Err(Error::InsufficientCopies {
                    needed: shots,
                    available: left,
                });
            }
        }
        let p = m.probabilities(&self.state)?;
        self.used += shots;
        sample_from(&p, shots, rng)
    }
}

/// Schedule constants: `K = max(2, ⌈c₁√D/ε⌉)` shots per basis and
/// `M = groups·⌈c₂ ln(1/δ)/ε²⌉` bases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimatorConfig {
    pub c1: f64,
    pub c2: f64,
    pub groups: usize,
}

impl Default for PurityEstimatorConfig {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 0.25,
            groups: 8,
        }
    }
}

impl PurityEstimatorConfig {
    /// `(shots per basis, bases)` for dimension `dim`.
    pub fn schedule(&self, dim: usize, eps: f64, delta: f64) -> Result<(usize, usize)> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")));
        }
        if dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "purity estimation needs D ≥ 2, got {dim}"
            )));
        }
        if self.groups == 0 || [self.c1, self.c2].iter().any(|c| c.is_nan() || *c <= 0.0) {
            return Err(Error::Domain("schedule constants must be positive".into()));
        }
        let k = ((self.c1 * (dim as f64).sqrt() / eps).ceil() as usize).max(2);
        let per_group = (self.c2 * (1.0 / delta).ln() / (eps * eps)).ceil().max(1.0) as usize;
        let m = self.groups * per_group;
        if k.saturating_mul(m) > MAX_COPIES {
            return Err(Error::SizeCap(format!("schedule needs {k}×{m} copies")));
        }
        Ok((k, m))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimate {
    /// Median-of-means estimate.
    pub value: f64,
    /// Plain mean over bases; unbiased for `Tr ρ²`.
    pub raw: f64,
    pub eps_target: f64,
    pub delta_target: f64,
    pub copies_used: usize,
    pub bases: usize,
    pub shots_per_basis: usize,
}

/// Fraction of outcome-equal unordered pairs among `outcomes`.
pub fn collision_rate(outcomes: &[usize], num_outcomes: usize) -> f64 {
    let k = outcomes.len();
    if k < 2 {
        return 0.0;
    }
    let mut counts = vec![0u64; num_outcomes];
    for &o in outcomes {
        counts[o] += 1;
    }
    let equal: u64 = counts.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
    equal as f64 / (k * (k - 1) / 2) as f64
}

/// Single-basis purity statistic `(D + 1)·rate − 1`.
pub fn basis_statistic(outcomes: &[usize], dim: usize) -> f64 {
    (dim as f64 + 1.0) * collision_rate(outcomes, dim) - 1.0
}

/// Median of the means of `groups` equal consecutive blocks.
pub fn median_of_means(xs: &[f64], groups: usize) -> f64 {
    let groups = groups.clamp(1, xs.len().max(1));
    let size = xs.len() / groups;
    if size == 0 {
        return f64::NAN;
    }
    let mut means: Vec<f64> = xs
        .chunks(size)
        .take(groups)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let g = means.len();
    if g % 2 == 1 {
        means[g / 2]
    } else {
        0.5 * (means[g / 2 - 1] + means[g / 2])
    }
}

/// Draws the basis for one round from its own seed so transcripts can
/// replay it.
pub(crate) fn basis_from_seed(dim: usize, seed: u64) -> Result<Rank1Povm> {
    Rank1Povm::random_basis(dim, &mut SimRng::seed_from_u64(seed))
}

/// Estimates `Tr ρ²` of the whole system held by `source` to within `eps`
/// with probability at least `1 − delta`, measuring each copy once in a
/// Haar-random basis of the full space.
pub fn estimate_purity_single_copy(
    source: &mut dyn CopySource,
    eps: f64,
    delta: f64,
    config: &PurityEstimatorConfig,
    rng: &mut dyn RngCore,
) -> Result<PurityEstimate> {
    let dim = source.dim();
    let (k, m) = config.schedule(dim, eps, delta)?;
    let needed = k * m;
    if let Some(left) = source.remaining() {
        if left < needed {
            return Err(Error::InsufficientCopies {
                needed,
                available: left,
            });
        }
    }
    let mut stats = Vec::with_capacity(m);
    for _ in 0..m {
        let basis = Measurement::Global(basis_from_seed(dim, rng.next_u64())?);
        let outcomes = source.measure(&basis, k, rng)?;
        stats.push(basis_statistic(&outcomes, dim));
    }
    Ok(PurityEstimate {
        value: median_of_means(&stats, config.groups),
        raw: stats.iter().sum::<f64>() / m as f64,
        eps_target: eps,
        delta_target: delta,
        copies_used: needed,
        bases: m,
        shots_per_basis: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, stream};
    use crate::state::{haar_state, DensityMatrix, PureState, C64};
    use nalgebra::DMatrix;

    fn diag_state(p: &[f64]) -> State {
        let d = p.len();
        let m = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(p[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        State::Mixed(DensityMatrix::new(m, d, 1).unwrap())
    }

    #[test]
    fn schedule_shape() {
        let c = PurityEstimatorConfig::default();
        let (k, m) = c.schedule(4, 0.1, 0.1).unwrap();
        assert_eq!(k, 20);
        assert_eq!(m, 8 * 58);
        assert!(c.schedule(4, 0.0, 0.1).is_err());
        assert!(c.schedule(4, 0.1, 1.0).is_err());
    }

    #[test]
    fn collision_counts() {
        assert_eq!(collision_rate(&[0, 0, 0], 2), 1.0);
        assert_eq!(collision_rate(&[0, 1], 2), 0.0);
        assert!((collision_rate(&[0, 0, 1, 1], 2) - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(median_of_means(&[1.0, 2.0, 3.0, 10.0], 4), 2.5);
        assert_eq!(median_of_means(&[1.0, 1.0, 5.0, 5.0, 9.0, 9.0], 3), 5.0);
    }

    #[test]
    fn pure_state_within_tolerance() {
        let state = State::Pure(PureState::zero(2, 1).unwrap());
        let cfg = PurityEstimatorConfig::default();
        let mut hits = 0;
        for i in 0..200 {
            let mut rng = stream(140, i);
            let mut src = StateSource::new(state.clone());
            let e = estimate_purity_single_copy(&mut src, 0.05, 0.1, &cfg, &mut rng).unwrap();
            assert_eq!(src.used(), e.copies_used);
            hits += ((e.value - 1.0).abs() <= 0.05) as usize;
        }
        assert!(hits >= 180, "{hits}");
    }

    #[test]
    fn maximally_mixed_d4() {
        let state = State::Mixed(DensityMatrix::maximally_mixed(4, 1).unwrap());
        let cfg = PurityEstimatorConfig::default();
        let mut hits = 0;
        for i in 0..100 {
            let mut src = StateSource::new(state.clone());
            let e = estimate_purity_single_copy(&mut src, 0.1, 0.1, &cfg, &mut stream(141, i)).unwrap();
            hits += ((e.value - 0.25).abs() <= 0.1) as usize;
        }
        assert!(hits >= 90, "{hits}");
    }

    #[test]
    fn raw_statistic_is_unbiased() {
        let mut rng = seeded(142);
        let psi = haar_state(3, &mut rng).unwrap();
        let rho = DensityMatrix::mixture(&[
            (0.6, DensityMatrix::from_pure(&psi)),
            (0.4, DensityMatrix::maximally_mixed(3, 1).unwrap()),
        ])
        .unwrap();
        let truth = rho.purity();
        let state = State::Mixed(rho);
        let cfg = PurityEstimatorConfig {
            c1: 1.0,
            c2: 0.25,
            groups: 1,
        };
        // One basis per run, K shots: the single-basis statistic.
        let (k, _) = cfg.schedule(3, 0.5, 0.5).unwrap();
        let runs = 10_000;
        let xs: Vec<f64> = (0..runs)
            .map(|i| {
                let mut r = stream(143, i as u64);
                let mut src = StateSource::new(state.clone());
                let basis = Measurement::Global(basis_from_seed(3, r.next_u64()).unwrap());
                basis_statistic(&src.measure(&basis, k, &mut r).unwrap(), 3)
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / runs as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        assert!((mean - truth).abs() <= 2.0 * se, "{mean} vs {truth} (se {se})");
    }

    #[test]
    fn budget_is_enforced() {
        let mut src = StateSource::with_budget(diag_state(&[0.5, 0.5]), 10);
        let err = estimate_purity_single_copy(&mut src, 0.1, 0.1, &PurityEstimatorConfig::default(), &mut seeded(144));
        assert!(matches!(err, Err(Error::InsufficientCopies { .. })));
        assert_eq!(src.used(), 0);
    }
}

//! Single-copy measurement strategies and protocol runs.

use std::sync::Arc;

use rand::Rng;

use super::povm::{sample_from, Measurement, Rank1Povm};
use crate::ensembles::{sample, EnsembleSpec};
use crate::error::{Error, Result};
use crate::state::State;

/// Largest outcome-string space that is enumerated exactly.
pub const MAX_EXACT_STRINGS: usize = 1_000_000;

/// Whether each round acts on the whole system or site by site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Global,
    Local,
}

/// Chooses the next measurement from the outcomes seen so far. Must be a
/// pure function of the history.
pub type AdaptiveRule = Arc<dyn Fn(&[usize]) -> Measurement + Send + Sync>;

#[derive(Clone)]
enum Plan {
    Fixed(Vec<Measurement>),
    Adaptive(AdaptiveRule),
}

#[derive(Clone)]
pub struct Strategy {
    plan: Plan,
    scope: Scope,
}

impl std::fmt::Debug for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.plan {
            Plan::Fixed(m) => format!("NonAdaptive({} rounds)", m.len()),
            Plan::Adaptive(_) => "Adaptive".to_string(),
        };
        f.debug_struct("Strategy")
            .field("plan", &kind)
            .field("scope", &self.scope)
            .finish()
    }
}

fn check_scope(m: &Measurement, scope: Scope) -> Result<()> {
    match (m, scope) {
        (Measurement::Global(_), Scope::Global) | (Measurement::Local(_), Scope::Local) => Ok(()),
        _ => Err(Error::InvalidPovm(format!(
            "measurement does not match {scope:?} scope"
        ))),
    }
}

impl Strategy {
    /// A fixed measurement for each round.
    pub fn non_adaptive(scope: Scope, rounds: Vec<Measurement>) -> Result<Self> {
        for m in &rounds {
            check_scope(m, scope)?;
        }
        Ok(Self {
            plan: Plan::Fixed(rounds),
            scope,
        })
    }

    pub fn adaptive(scope: Scope, rule: AdaptiveRule) -> Self {
        Self {
            plan: Plan::Adaptive(rule),
            scope,
        }
    }

    /// An independent Haar-random basis on the whole space for each round.
    pub fn random_basis<R: Rng + ?Sized>(dim: usize, rounds: usize, rng: &mut R) -> Result<Self> {
        let ms = (0..rounds)
            .map(|_| Rank1Povm::random_basis(dim, rng).map(Measurement::Global))
            .collect::<Result<_>>()?;
        Self::non_adaptive(Scope::Global, ms)
    }

    /// Independent Haar-random bases on every site for each round.
    pub fn random_local_bases<R: Rng + ?Sized>(d: usize, n: usize, rounds: usize, rng: &mut R) -> Result<Self> {
        let ms = (0..rounds)
            .map(|_| {
                (0..n)
                    .map(|_| Rank1Povm::random_basis(d, rng))
                    .collect::<Result<Vec<_>>>()
                    .map(Measurement::Local)
            })
            .collect::<Result<_>>()?;
        Self::non_adaptive(Scope::Local, ms)
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.plan, Plan::Adaptive(_))
    }

    /// Fixed rounds, when the strategy is non-adaptive.
    pub fn rounds(&self) -> Option<&[Measurement]> {
        match &self.plan {
            Plan::Fixed(m) => Some(m),
            Plan::Adaptive(_) => None,
        }
    }

    /// The measurement for the round following `history`.
    pub fn measurement(&self, history: &[usize]) -> Result<Measurement> {
        let m = match &self.plan {
            Plan::Fixed(ms) => ms
                .get(history.len())
                .cloned()
                .ok_or_else(|| Error::Domain(format!("strategy has only {} rounds", ms.len())))?,
            Plan::Adaptive(rule) => rule(history),
        };
        check_scope(&m, self.scope)?;
        Ok(m)
    }
}

/// What each protocol run measures.
#[derive(Clone, Debug)]
pub enum Source {
    Fixed(State),
    /// A fresh draw per run, held fixed across that run's rounds.
    Ensemble(EnsembleSpec),
}

/// Measures `rounds` fresh copies and returns the outcome string.
pub fn run_protocol<R: Rng + ?Sized>(
    strategy: &Strategy,
    source: &Source,
    rounds: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let state = match source {
        Source::Fixed(s) => s.clone(),
        Source::Ensemble(spec) => sample(spec, rng)?,
    };
    let mut history = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let m = strategy.measurement(&history)?;
        let p = m.probabilities(&state)?;
        history.push(sample_from(&p, 1, rng)?[0]);
    }
    Ok(history)
}

/// Number of outcome strings of a non-adaptive strategy.
pub fn string_space_size(rounds: &[Measurement]) -> Option<usize> {
    rounds
        .iter()
        .try_fold(1usize, |acc, m| acc.checked_mul(m.num_outcomes()))
}

/// Exact outcome-string distribution on a fixed state. Strings are indexed
/// with round 0 most significant; adaptive strategies are expanded along
/// every history.
pub fn exact_string_distribution(strategy: &Strategy, state: &State, rounds: usize) -> Result<Vec<f64>> {
    fn expand(
        strategy: &Strategy,
        state: &State,
        rounds: usize,
        history: &mut Vec<usize>,
        weight: f64,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if history.len() == rounds {
            out.push(weight);
            return Ok(());
        }
        let m = strategy.measurement(history)?;
        let p = m.probabilities(state)?;
        for (k, pk) in p.into_iter().enumerate() {
            history.push(k);
            expand(strategy, state, rounds, history, weight * pk, out)?;
            history.pop();
        }
        Ok(())
    }
    if let Some(ms) = strategy.rounds() {
        if ms.len() < rounds {
            return Err(Error::Domain(format!("strategy has only {} rounds", ms.len())));
        }
        let size = string_space_size(&ms[..rounds]).filter(|&s| s <= MAX_EXACT_STRINGS);
        if size.is_none() {
            return Err(Error::SizeCap(format!("more than {MAX_EXACT_STRINGS} outcome strings")));
        }
    }
    let mut out = Vec::new();
    expand(strategy, state, rounds, &mut Vec::new(), 1.0, &mut out)?;
    if out.len() > MAX_EXACT_STRINGS {
        return Err(Error::SizeCap(format!("more than {MAX_EXACT_STRINGS} outcome strings")));
    }
    Ok(out)
}

//! The single-copy multipartite product tester and tester evaluation.
//!
//! Every round draws one independent Haar basis per site, measures `K`
//! copies of the whole state with that local measurement, and feeds each
//! site's outcomes to its own purity estimator. The state is rejected as
//! soon as some marginal looks mixed.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::povm::Measurement;
use super::purity::{basis_from_seed, basis_statistic, median_of_means, CopySource, PurityEstimatorConfig};
use crate::ensembles::{sample, EnsembleSpec, MAX_FAR_EPS};
use crate::error::{Error, Result};
use crate::report::{wilson_radius, ExperimentReport, Z95};
use crate::rng::{stream, SimRng};
use crate::state::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesterVerdict {
    pub verdict: Verdict,
    pub per_site_estimates: Vec<f64>,
    pub eps_purity: f64,
    pub delta: f64,
    /// Estimates at or below this reject.
    pub threshold: f64,
    pub copies_used: usize,
}

impl TesterVerdict {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }
}

/// One measured outcome of one site on one copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub round: usize,
    pub copy: usize,
    pub site: usize,
    pub basis_seed: u64,
    pub outcome: usize,
}

/// Per-site purity accuracy and failure probability for `n` sites at
/// product distance `eps_prod`: `ε²(1 − ε²)/n` and `1/(3n)`.
pub fn mp_thresholds(n: usize, eps_prod: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least two sites, got {n}")));
    }
    if !(eps_prod > 0.0 && eps_prod <= MAX_FAR_EPS + 1e-12) {
        return Err(Error::Domain(format!("eps must lie in (0, 1/√2], got {eps_prod}")));
    }
    let e2 = eps_prod * eps_prod;
    Ok((e2 * (1.0 - e2) / n as f64, 1.0 / (3.0 * n as f64)))
}

/// Copies `mp_test` consumes for the given parameters.
pub fn mp_test_copies(n: usize, d: usize, eps_prod: f64, config: &PurityEstimatorConfig) -> Result<usize> {
    let (eps, delta) = mp_thresholds(n, eps_prod)?;
    let (k, m) = config.schedule(d, eps, delta)?;
    Ok(k * m)
}

/// Tests whether the `n`-qudit pure state behind `source` is a product
/// state, or `eps_prod`-far from every product state, using only local
/// single-copy measurements.
pub fn mp_test(
    source: &mut dyn CopySource,
    n: usize,
    d: usize,
    eps_prod: f64,
    config: &PurityEstimatorConfig,
    rng: &mut dyn RngCore,
    mut transcript: Option<&mut Vec<TranscriptRow>>,
) -> Result<TesterVerdict> {
    if source.num_factors() != n || source.local_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: source.num_factors(),
        });
    }
    let (eps_purity, delta) = mp_thresholds(n, eps_prod)?;
    let (k, m) = config.schedule(d, eps_purity, delta)?;
    let needed = k * m;
    if let Some(left) = source.remaining() {
        if left < needed {
            return Err(Error::InsufficientCopies {
                needed,
                available: left,
            });
        }
    }
    let mut stats = vec![Vec::with_capacity(m); n];
    let mut site_outcomes = vec![0usize; k];
    for round in 0..m {
        let seeds: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
        let bases = seeds
            .iter()
            .map(|&s| basis_from_seed(d, s))
            .collect::<Result<Vec<_>>>()?;
        let joint = Measurement::Local(bases);
        let outcomes = source.measure(&joint, k, rng)?;
        let split: Vec<Vec<usize>> = outcomes.iter().map(|&o| joint.split_outcome(o)).collect();
        for site in 0..n {
            for (shot, parts) in split.iter().enumerate() {
                site_outcomes[shot] = parts[site];
            }
            stats[site].push(basis_statistic(&site_outcomes, d));
        }
        if let Some(rows) = transcript.as_deref_mut() {
            for (shot, parts) in split.iter().enumerate() {
                for (site, &outcome) in parts.iter().enumerate() {
                    rows.push(TranscriptRow {
                        round,
                        copy: round * k + shot,
                        site,
                        basis_seed: seeds[site],
                        outcome,
                    });
                }
            }
        }
    }
    let per_site_estimates: Vec<f64> = stats.iter().map(|s| median_of_means(s, config.groups)).collect();
    let threshold = 1.0 - 2.0 * eps_purity;
    let reject = per_site_estimates.iter().any(|&p| p <= threshold);
    Ok(TesterVerdict {
        verdict: if reject { Verdict::Reject } else { Verdict::Accept },
        per_site_estimates,
        eps_purity,
        delta,
        threshold,
        copies_used: needed,
    })
}

/// Anything a tester returns that says whether it accepted.
pub trait TesterOutcome {
    fn accepted(&self) -> bool;
}

impl TesterOutcome for bool {
    fn accepted(&self) -> bool {
        *self
    }
}

impl TesterOutcome for TesterVerdict {
    fn accepted(&self) -> bool {
        TesterVerdict::accepted(self)
    }
}

/// Runs `tester` on `trials` independent draws from `spec`. Trial `i`
/// draws its state and its measurement randomness from stream `i` of
/// `seed`. Reports the acceptance rate with a 95% Wilson radius.
pub fn tester_eval<O, F>(tester: F, spec: &EnsembleSpec, trials: usize, seed: u64) -> Result<(ExperimentReport, Vec<O>)>
where
    O: TesterOutcome + Send,
    F: Fn(&State, &mut SimRng) -> Result<O> + Sync,
{
    spec.validate()?;
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let outcomes: Vec<O> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let state = sample(spec, &mut rng)?;
            tester(&state, &mut rng)
        })
        .collect::<Result<_>>()?;
    let accepted = outcomes.iter().filter(|o| o.accepted()).count();
    let report = ExperimentReport::new(
        "tester_eval",
        json!({ "ensemble": spec, "label": spec.label() }),
        trials,
        accepted as f64 / trials as f64,
        wilson_radius(accepted, trials, Z95),
        seed,
    )
    .with_detail("accepted", accepted);
    Ok((report, outcomes))
}

/// Accept-rate gap between a property ensemble and a far ensemble, with
/// the sum of the two radii.
pub fn bias(members: &ExperimentReport, far: &ExperimentReport) -> (f64, f64) {
    (
        members.estimate - far.estimate,
        members.confidence_radius + far.confidence_radius,
    )
}

/// `mp_test` on fresh copies of a known state, as a `tester_eval` closure.
pub fn mp_tester(
    n: usize,
    d: usize,
    eps_prod: f64,
    config: PurityEstimatorConfig,
) -> impl Fn(&State, &mut SimRng) -> Result<TesterVerdict> + Sync {
    move |state, rng| {
        let mut src = super::purity::StateSource::new(state.clone());
        mp_test(&mut src, n, d, eps_prod, &config, rng, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;
    use crate::protocol::purity::StateSource;
    use crate::rng::seeded;
    use crate::state::{PureState, C64};

    fn bell() -> State {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [h, 0.0, 0.0, h].map(|x| C64::new(x, 0.0)).to_vec();
        State::Pure(PureState::new(amps, 2, 2).unwrap())
    }

    #[test]
    fn thresholds_follow_schedule() {
        let (e, d) = mp_thresholds(3, 0.6).unwrap();
        assert!((e - 0.36 * 0.64 / 3.0).abs() < 1e-15);
        assert!((d - 1.0 / 9.0).abs() < 1e-15);
        assert!(mp_thresholds(3, 0.8).is_err());
        assert!(mp_thresholds(1, 0.5).is_err());
        assert_eq!(
            mp_test_copies(3, 2, 0.6, &PurityEstimatorConfig::default()).unwrap(),
            19 * 752
        );
    }

    #[test]
    fn verdict_matches_threshold_rule() {
        let cfg = PurityEstimatorConfig::default();
        for i in 0..5 {
            let mut src = StateSource::new(bell());
            let v = mp_test(&mut src, 2, 2, 0.7, &cfg, &mut stream(150, i), None).unwrap();
            let reject = v.per_site_estimates.iter().any(|&p| p <= v.threshold);
            assert_eq!(reject, v.verdict == Verdict::Reject);
            assert_eq!(src.used(), v.copies_used);
        }
    }

    #[test]
    fn bell_state_is_rejected() {
        let spec_bell = bell();
        let rejects = (0..50)
            .filter(|&i| {
                let mut src = StateSource::new(spec_bell.clone());
                !mp_test(
                    &mut src,
                    2,
                    2,
                    0.7,
                    &PurityEstimatorConfig::default(),
                    &mut stream(151, i),
                    None,
                )
                .unwrap()
                .accepted()
            })
            .count();
        assert!(rejects >= 45, "{rejects}");
    }

    #[test]
    fn product_state_is_accepted() {
        let psi = State::Pure(PureState::zero(2, 3).unwrap());
        let mut src = StateSource::new(psi);
        let v = mp_test(
            &mut src,
            3,
            2,
            0.6,
            &PurityEstimatorConfig::default(),
            &mut seeded(152),
            None,
        )
        .unwrap();
        assert!(v.accepted(), "{:?}", v.per_site_estimates);
    }

    #[test]
    fn transcript_replays_bases() {
        let cfg = PurityEstimatorConfig {
            c1: 1.0,
            c2: 0.01,
            groups: 2,
        };
        let mut rows = Vec::new();
        let mut src = StateSource::new(bell());
        let v = mp_test(&mut src, 2, 2, 0.7, &cfg, &mut seeded(153), Some(&mut rows)).unwrap();
        assert_eq!(rows.len(), v.copies_used * 2);
        // Recompute the site statistics from the transcript alone.
        let (k, m) = cfg.schedule(2, v.eps_purity, v.delta).unwrap();
        for site in 0..2 {
            let stats: Vec<f64> = (0..m)
                .map(|r| {
                    let o: Vec<usize> = rows
                        .iter()
                        .filter(|row| row.round == r && row.site == site)
                        .map(|row| row.outcome)
                        .collect();
                    assert_eq!(o.len(), k);
                    basis_statistic(&o, 2)
                })
                .collect();
            assert_eq!(median_of_means(&stats, cfg.groups), v.per_site_estimates[site]);
        }
    }

    #[test]
    fn always_accept_rate_is_one() {
        let spec = EnsembleSpec::new(EnsembleKind::GlobalHaar, 2, 2).unwrap();
        let (r, _) = tester_eval(|_: &State, _: &mut SimRng| Ok(true), &spec, 20, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert!(tester_eval(|_: &State, _: &mut SimRng| Ok(true), &spec, 0, 1).is_err());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let spec = EnsembleSpec::new(EnsembleKind::MultipartiteProductHaar, 2, 2).unwrap();
        let t = mp_tester(2, 2, 0.7, PurityEstimatorConfig::default());
        let (a, va) = tester_eval(&t, &spec, 8, 9).unwrap();
        let (b, vb) = tester_eval(&t, &spec, 8, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(va, vb);
    }
}

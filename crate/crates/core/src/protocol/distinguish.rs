//! Total variation between the outcome-string distributions that two state
//! ensembles induce under a fixed strategy.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::povm::Measurement;
use super::strategy::{run_protocol, string_space_size, Source, Strategy, MAX_EXACT_STRINGS};
use crate::bounds::{prod_perm_overlap_sum_by_symmetrizers, rising_factorial, MAX_CONTRACTION_DIM};
use crate::ensembles::{sample, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::permanent::permanent;
use crate::report::{ExperimentReport, Z95};
use crate::rng::stream;
use crate::state::{inner, PureState, C64};

const BOOTSTRAP_ROUNDS: usize = 200;
/// Above this many stored probabilities the bootstrap gives way to a
/// per-string standard-error bound.
const BOOTSTRAP_MEMORY: usize = 20_000_000;
const MAX_PRODUCT_COPIES: usize = 4;

/// Mixture outcome distribution, with per-draw data when it was sampled.
enum Mixture {
    Exact(Vec<f64>),
    Sampled {
        mean: Vec<f64>,
        draws: Option<Vec<Vec<f64>>>,
        var: Vec<f64>,
        count: usize,
    },
}

impl Mixture {
    fn mean(&self) -> &[f64] {
        match self {
            Mixture::Exact(p) => p,
            Mixture::Sampled { mean, .. } => mean,
        }
    }
}

/// Per-round elements `(D a_k, ψ_k)` and the digits of every string.
struct Outcomes {
    elements: Vec<Vec<(f64, Vec<C64>)>>,
    sizes: Vec<usize>,
    total: usize,
}

impl Outcomes {
    fn new(rounds: &[Measurement]) -> Self {
        let elements: Vec<Vec<_>> = rounds
            .iter()
            .map(|m| (0..m.num_outcomes()).map(|k| m.element(k)).collect())
            .collect();
        let sizes: Vec<usize> = rounds.iter().map(|m| m.num_outcomes()).collect();
        let total = sizes.iter().product();
        Self { elements, sizes, total }
    }

    fn digits(&self, mut l: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for (t, &s) in self.sizes.iter().enumerate().rev() {
            out[t] = l % s;
            l /= s;
        }
        out
    }

    /// `Π_t D a_{s_t}` and the measured vectors of string `l`.
    fn string(&self, l: usize) -> (f64, Vec<&[C64]>) {
        let mut w = 1.0;
        let mut vs = Vec::with_capacity(self.sizes.len());
        for (t, k) in self.digits(l).into_iter().enumerate() {
            let (wk, v) = &self.elements[t][k];
            w *= wk;
            vs.push(v.as_slice());
        }
        (w, vs)
    }
}

fn closed_form(spec: &EnsembleSpec, out: &Outcomes) -> Result<Option<Vec<f64>>> {
    let t = out.sizes.len();
    let dim = spec.dim() as f64;
    let parts: Vec<Vec<usize>> = match &spec.kind {
        EnsembleKind::MaximallyMixed => {
            let scale = dim.powi(t as i32);
            return Ok(Some((0..out.total).map(|l| out.string(l).0 / scale).collect()));
        }
        EnsembleKind::GlobalHaar => {
            let denom = rising_factorial(dim, t);
            let p = (0..out.total)
                .into_par_iter()
                .map(|l| {
                    let (w, vs) = out.string(l);
                    let g = DMatrix::from_fn(t, t, |i, j| inner(vs[i], vs[j]));
                    Ok(w * permanent(&g)?.re / denom)
                })
                .collect::<Result<_>>()?;
            return Ok(Some(p));
        }
        EnsembleKind::BipartiteProductHaar { cut } => {
            let rest = (0..spec.n).filter(|f| !cut.contains(f)).collect();
            vec![cut.clone(), rest]
        }
        EnsembleKind::MultipartiteProductHaar => (0..spec.n).map(|f| vec![f]).collect(),
        EnsembleKind::FarFromMp { .. } => return Ok(None),
    };
    let fits = t <= MAX_PRODUCT_COPIES
        && spec
            .dim()
            .checked_pow(t as u32)
            .is_some_and(|x| x <= MAX_CONTRACTION_DIM);
    if !fits {
        return Ok(None);
    }
    let denom: f64 = parts
        .iter()
        .map(|p| rising_factorial((spec.d as f64).powi(p.len() as i32), t))
        .product();
    let p = (0..out.total)
        .into_par_iter()
        .map(|l| {
            let (w, vs) = out.string(l);
            let states: Vec<PureState> = vs
                .iter()
                .map(|v| PureState::normalized(v.to_vec(), spec.d, spec.n))
                .collect::<Result<_>>()?;
            Ok(w * prod_perm_overlap_sum_by_symmetrizers(&states, &parts)? / denom)
        })
        .collect::<Result<_>>()?;
    Ok(Some(p))
}

/// Averages the exact string distribution of `draws` sampled states.
fn sampled_mixture(
    spec: &EnsembleSpec,
    rounds: &[Measurement],
    out: &Outcomes,
    draws: usize,
    seed: u64,
) -> Result<Mixture> {
    let per_draw = |i: usize| -> Result<Vec<f64>> {
        let mut rng = stream(seed, i as u64);
        let state = sample(spec, &mut rng)?;
        let per_round: Vec<Vec<f64>> = rounds.iter().map(|m| m.probabilities(&state)).collect::<Result<_>>()?;
        Ok((0..out.total)
            .map(|l| {
                out.digits(l)
                    .iter()
                    .enumerate()
                    .map(|(t, &k)| per_round[t][k])
                    .product()
            })
            .collect())
    };
    let keep = draws.saturating_mul(out.total) <= BOOTSTRAP_MEMORY;
    let all: Vec<Vec<f64>> = (0..draws).into_par_iter().map(per_draw).collect::<Result<_>>()?;
    let n = draws as f64;
    let mut mean = vec![0.0; out.total];
    let mut sq = vec![0.0; out.total];
    for d in &all {
        for (l, &x) in d.iter().enumerate() {
            mean[l] += x;
            sq[l] += x * x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let var: Vec<f64> = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            if draws > 1 {
                (s / n - m * m).max(0.0) * n / (n - 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(Mixture::Sampled {
        mean,
        draws: keep.then_some(all),
        var,
        count: draws,
    })
}

fn mixture(spec: &EnsembleSpec, rounds: &[Measurement], out: &Outcomes, draws: usize, seed: u64) -> Result<Mixture> {
    match closed_form(spec, out)? {
        Some(p) => Ok(Mixture::Exact(p)),
        None => sampled_mixture(spec, rounds, out, draws, seed),
    }
}

fn half_l1(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn percentile95(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[((xs.len() as f64 * 0.95).ceil() as usize).clamp(1, xs.len()) - 1]
}

fn resample_mean<R: Rng>(draws: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    let mut acc = vec![0.0; draws[0].len()];
    for _ in 0..draws.len() {
        let d = &draws[rng.gen_range(0..draws.len())];
        for (a, x) in acc.iter_mut().zip(d) {
            *a += x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= draws.len() as f64);
    acc
}

fn mixture_radius(a: &Mixture, b: &Mixture, tv: f64, seed: u64) -> (f64, &'static str) {
    let draws_of = |m: &Mixture| match m {
        Mixture::Exact(_) => Some(None),
        Mixture::Sampled { draws: Some(d), .. } => Some(Some(d.clone())),
        Mixture::Sampled { draws: None, .. } => None,
    };
    match (draws_of(a), draws_of(b)) {
        (Some(None), Some(None)) => (0.0, "none"),
        (Some(da), Some(db)) => {
            let diffs: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream(seed ^ 0xb007_5742, r as u64);
                    let pa = da
                        .as_ref()
                        .map_or_else(|| a.mean().to_vec(), |d| resample_mean(d, &mut rng));
                    let pb = db
                        .as_ref()
                        .map_or_else(|| b.mean().to_vec(), |d| resample_mean(d, &mut rng));
                    (half_l1(&pa, &pb) - tv).abs()
                })
                .collect();
            (percentile95(diffs), "bootstrap")
        }
        _ => {
            let se = |m: &Mixture, l: usize| match m {
                Mixture::Sampled { var, count, .. } => var[l] / *count as f64,
                Mixture::Exact(_) => 0.0,
            };
            let total: f64 = (0..a.mean().len()).map(|l| (se(a, l) + se(b, l)).sqrt()).sum();
            (0.5 * Z95 * total, "standard-error")
        }
    }
}

/// Add-½ smoothed distributions over the strings observed in either sample.
fn smoothed(ca: &[u64], cb: &[u64]) -> (Vec<f64>, Vec<f64>) {
    let k = ca.len() as f64;
    let na: u64 = ca.iter().sum();
    let nb: u64 = cb.iter().sum();
    let pa = ca.iter().map(|&c| (c as f64 + 0.5) / (na as f64 + 0.5 * k)).collect();
    let pb = cb.iter().map(|&c| (c as f64 + 0.5) / (nb as f64 + 0.5 * k)).collect();
    (pa, pb)
}

fn histogram_tv(
    a: &EnsembleSpec,
    b: &EnsembleSpec,
    strategy: &Strategy,
    rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64, usize)> {
    let run = |spec: &EnsembleSpec, offset: u64| -> Result<Vec<Vec<usize>>> {
        let src = Source::Ensemble(spec.clone());
        (0..trials)
            .into_par_iter()
            .map(|i| run_protocol(strategy, &src, rounds, &mut stream(seed, 2 * i as u64 + offset)))
            .collect()
    };
    let sa = run(a, 0)?;
    let sb = run(b, 1)?;
    let mut index: BTreeMap<&[usize], usize> = BTreeMap::new();
    for s in sa.iter().chain(&sb) {
        let next = index.len();
        index.entry(s.as_slice()).or_insert(next);
    }
    let ia: Vec<usize> = sa.iter().map(|s| index[s.as_slice()]).collect();
    let ib: Vec<usize> = sb.iter().map(|s| index[s.as_slice()]).collect();
    let counts = |ids: &[usize]| {
        let mut c = vec![0u64; index.len()];
        ids.iter().for_each(|&i| c[i] += 1);
        c
    };
    let (pa, pb) = smoothed(&counts(&ia), &counts(&ib));
    let tv = half_l1(&pa, &pb);
    let diffs: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed ^ 0x4157_0647, r as u64);
            let ra: Vec<usize> = (0..ia.len()).map(|_| ia[rng.gen_range(0..ia.len())]).collect();
            let rb: Vec<usize> = (0..ib.len()).map(|_| ib[rng.gen_range(0..ib.len())]).collect();
            let (qa, qb) = smoothed(&counts(&ra), &counts(&rb));
            (half_l1(&qa, &qb) - tv).abs()
        })
        .collect();
    Ok((tv, percentile95(diffs), index.len()))
}

/// TV distance between the mixtures `E_{ρ∼A} p^ρ` and `E_{ρ∼B} p^ρ` of
/// outcome strings of length `rounds`.
///
/// Non-adaptive strategies with at most a million strings are enumerated:
/// Haar, product-Haar and maximally mixed ensembles in closed form, others
/// by averaging exact distributions over `trials` draws. Everything else
/// falls back to smoothed histograms of `trials` runs per ensemble.
pub fn empirical_tv(
    a: &EnsembleSpec,
    b: &EnsembleSpec,
    strategy: &Strategy,
    rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    a.validate()?;
    b.validate()?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let start = Instant::now();
    let fixed = strategy
        .rounds()
        .filter(|ms| ms.len() >= rounds)
        .map(|ms| &ms[..rounds]);
    let enumerable = fixed
        .and_then(string_space_size)
        .is_some_and(|s| s <= MAX_EXACT_STRINGS);
    let (tv, radius, method, strings) = match fixed {
        Some(ms) if enumerable => {
            for m in ms {
                if m.dim() != a.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: a.dim(),
                        got: m.dim(),
                    });
                }
            }
            let out = Outcomes::new(ms);
            let ma = mixture(a, ms, &out, trials, seed.wrapping_mul(2))?;
            let mb = mixture(b, ms, &out, trials, seed.wrapping_mul(2).wrapping_add(1))?;
            let tv = half_l1(ma.mean(), mb.mean());
            let (radius, how) = mixture_radius(&ma, &mb, tv, seed);
            let method = match (&ma, &mb) {
                (Mixture::Exact(_), Mixture::Exact(_)) => "exact".to_string(),
                _ => format!("enumerated-sampled-mixture/{how}"),
            };
            (tv, radius, method, out.total)
        }
        _ => {
            let (tv, radius, strings) = histogram_tv(a, b, strategy, rounds, trials, seed)?;
            (tv, radius, "histogram".to_string(), strings)
        }
    };
    let t = rounds as f64;
    let mut report = ExperimentReport::new(
        "distinguish",
        json!({ "a": a, "b": b, "rounds": rounds, "adaptive": strategy.is_adaptive() }),
        trials,
        tv,
        radius,
        seed,
    )
    .with_detail("method", method)
    .with_detail("strings", strings);
    let pair = (&a.kind, &b.kind);
    if matches!(
        pair,
        (EnsembleKind::GlobalHaar, EnsembleKind::MaximallyMixed)
            | (EnsembleKind::MaximallyMixed, EnsembleKind::GlobalHaar)
    ) {
        report = report.with_detail("haar_bound", t * (t - 1.0) / (2.0 * a.dim() as f64));
    }
    report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    Ok(report)
}

//! Random-state families and far-from-product statistics.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::report::{wilson_radius, ExperimentReport, Z95};
use crate::rng::stream;
use crate::schmidt::{bipartite_cuts, cut_lambdas, distance_to_mp, MpOptions};
use crate::state::{check_subset, digits, dim_pow, haar_state, haar_state_on, DensityMatrix, PureState, State, C64};

/// Largest accepted far-state parameter.
pub const MAX_FAR_EPS: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Agreement required between the target and the verified distance.
pub const FAR_TOL: f64 = 1e-6;
const FAR_REDRAWS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EnsembleKind {
    GlobalHaar,
    /// Independent Haar states on `cut` and on its complement.
    BipartiteProductHaar {
        cut: Vec<usize>,
    },
    MultipartiteProductHaar,
    MaximallyMixed,
    FarFromMp {
        eps: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    pub d: usize,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n: usize, d: usize) -> Result<Self> {
        let spec = Self { kind, n, d };
        spec.validate()?;
        Ok(spec)
    }

    /// Product Haar across the `⌊n/2⌋ : ⌈n/2⌉` split.
    pub fn balanced_bipartite(n: usize, d: usize) -> Result<Self> {
        Self::new(
            EnsembleKind::BipartiteProductHaar {
                cut: (0..n / 2).collect(),
            },
            n,
            d,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidDimension("n must be positive".into()));
        }
        dim_pow(self.d, self.n)?;
        match &self.kind {
            EnsembleKind::BipartiteProductHaar { cut } => {
                if cut.is_empty() || cut.len() >= self.n {
                    return Err(Error::InvalidCut(format!("{cut:?} is trivial for n={}", self.n)));
                }
                check_subset(cut, self.n).map_err(|e| Error::InvalidCut(e.to_string()))?;
            }
            EnsembleKind::FarFromMp { eps } => check_far_params(self.n, self.d, *eps)?,
            _ => {}
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            EnsembleKind::GlobalHaar => "global-haar",
            EnsembleKind::BipartiteProductHaar { .. } => "bipartite-product-haar",
            EnsembleKind::MultipartiteProductHaar => "multipartite-product-haar",
            EnsembleKind::MaximallyMixed => "maximally-mixed",
            EnsembleKind::FarFromMp { .. } => "far-from-product",
        }
    }
}

fn check_far_params(n: usize, d: usize, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= MAX_FAR_EPS + 1e-15) {
        return Err(Error::Domain(format!("eps = {eps} not in (0, 1/sqrt(2)]")));
    }
    if n < 2 || dim_pow(d, n)? < 4 {
        return Err(Error::Domain(format!("need n >= 2 and d^n >= 4, got n={n}, d={d}")));
    }
    Ok(())
}

/// One draw from the ensemble.
pub fn sample<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<State> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    Ok(match &spec.kind {
        EnsembleKind::GlobalHaar => State::Pure(haar_state_on(d, n, rng)?),
        EnsembleKind::BipartiteProductHaar { cut } => {
            let a = haar_state_on(d, cut.len(), rng)?;
            let b = haar_state_on(d, n - cut.len(), rng)?;
            State::Pure(PureState::from_cut_product(&a, &b, cut, n)?)
        }
        EnsembleKind::MultipartiteProductHaar => {
            let factors: Vec<PureState> = (0..n).map(|_| haar_state(d, rng)).collect::<Result<_>>()?;
            State::Pure(PureState::product(&factors)?)
        }
        EnsembleKind::MaximallyMixed => State::Mixed(DensityMatrix::maximally_mixed(d, n)?),
        EnsembleKind::FarFromMp { eps } => State::Pure(far_state(n, d, *eps, rng)?.state),
    })
}

/// A state together with its verified distance to the fully product set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarStateCertificate {
    pub state: PureState,
    pub eps_target: f64,
    pub eps_measured: f64,
    /// Draws of the high-weight component that were rejected.
    pub redraws: usize,
    /// Whether `φ` was finally drawn on strings with no zero digit.
    #[serde(default)]
    pub full_weight: bool,
}

/// Digit strings of Hamming weight at least `min_weight`.
fn weight_support(d: usize, n: usize, dim: usize, min_weight: usize) -> Vec<usize> {
    (0..dim)
        .filter(|&x| digits(x, d, n).iter().filter(|&&k| k != 0).count() >= min_weight)
        .collect()
}

/// `sqrt(1-ε²)|0…0⟩ + ε|φ⟩` with `φ` Haar on the strings of Hamming weight
/// at least two, checked against the product-overlap optimizer.
///
/// When every draw is beaten by some product state (common near
/// `ε = 1/√2` with few factors), `φ` is drawn once more on the strings of
/// full weight `n`. There no product state overlaps more than `1 - ε²`, so
/// the distance is exactly `ε`; it is still checked by the optimizer.
pub fn far_state<R: Rng + ?Sized>(n: usize, d: usize, eps: f64, rng: &mut R) -> Result<FarStateCertificate> {
    check_far_params(n, d, eps)?;
    let dim = dim_pow(d, n)?;
    let head = (1.0 - eps * eps).sqrt();
    let attempt = |support: &[usize], rng: &mut R| -> Result<(PureState, f64)> {
        let phi = haar_state(support.len(), rng)?;
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[0] = C64::new(head, 0.0);
        for (&x, a) in support.iter().zip(phi.amplitudes()) {
            amps[x] = a * eps;
        }
        let state = PureState::normalized(amps, d, n)?;
        let opts = MpOptions {
            seed: rng.next_u64(),
            ..MpOptions::default()
        };
        let found = distance_to_mp(&state, &opts)?;
        // |0…0⟩ itself is a product state with overlap 1 - ε².
        let overlap = found.max_overlap.max(head * head);
        Ok((state, (1.0 - overlap).max(0.0).sqrt()))
    };
    let support = weight_support(d, n, dim, 2);
    for redraws in 0..FAR_REDRAWS {
        let (state, eps_measured) = attempt(&support, rng)?;
        if (eps_measured - eps).abs() <= FAR_TOL {
            return Ok(FarStateCertificate {
                state,
                eps_target: eps,
                eps_measured,
                redraws,
                full_weight: false,
            });
        }
    }
    let (state, eps_measured) = attempt(&weight_support(d, n, dim, n), rng)?;
    if (eps_measured - eps).abs() <= FAR_TOL {
        return Ok(FarStateCertificate {
            state,
            eps_target: eps,
            eps_measured,
            redraws: FAR_REDRAWS,
            full_weight: true,
        });
    }
    Err(Error::Unverifiable(format!(
        "no draw at n={n}, d={d}, eps={eps} verified within {FAR_TOL} after {FAR_REDRAWS} attempts"
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutStatistics {
    pub cut: Vec<usize>,
    pub mean_lambda_max: f64,
    pub max_lambda_max: f64,
    /// Fraction of samples with `λ_1 ≥ 1 - ε²` on this cut.
    pub close_fraction: f64,
}

/// Fraction of global Haar states within `eps` of some bipartite product
/// state, with a 95% Wilson radius and per-cut largest-coefficient data.
pub fn far_fraction_experiment(n: usize, d: usize, eps: f64, samples: usize, seed: u64) -> Result<ExperimentReport> {
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("eps = {eps} not in [0, 1]")));
    }
    let spec = EnsembleSpec::new(EnsembleKind::GlobalHaar, n, d)?;
    let cuts = bipartite_cuts(n);
    if cuts.is_empty() {
        return Err(Error::InvalidDimension("need at least two factors".into()));
    }
    let start = Instant::now();
    let lambdas: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = stream(seed, i as u64);
            let psi = haar_state_on(d, n, &mut rng)?;
            Ok(cut_lambdas(&psi)?.into_iter().map(|(_, l)| l).collect())
        })
        .collect::<Result<_>>()?;
    let threshold = 1.0 - eps * eps;
    let close = lambdas
        .iter()
        .filter(|ls| ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= threshold)
        .count();
    let stats: Vec<CutStatistics> = cuts
        .iter()
        .enumerate()
        .map(|(c, cut)| {
            let col = lambdas.iter().map(|ls| ls[c]);
            CutStatistics {
                cut: cut.clone(),
                mean_lambda_max: col.clone().sum::<f64>() / samples as f64,
                max_lambda_max: col.clone().fold(f64::NEG_INFINITY, f64::max),
                close_fraction: col.filter(|&l| l >= threshold).count() as f64 / samples as f64,
            }
        })
        .collect();
    let mut report = ExperimentReport::new(
        "far-fraction",
        json!({ "ensemble": spec, "eps": eps }),
        samples,
        close as f64 / samples as f64,
        wilson_radius(close, samples, Z95),
        seed,
    )
    .with_detail("close_count", close)
    .with_detail("cuts", stats);
    report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    Ok(report)
}

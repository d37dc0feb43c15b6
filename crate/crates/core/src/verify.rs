//! Randomized verification suites for every identity and inequality the
//! library evaluates. Each suite draws its instances from its own seeded
//! streams, so a report is reproducible from the seed alone.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{
    average_marginal_purity, avg_purity_bound, frobenius_bound_check, gram, gram_regime_check, haar_likelihood_ratio,
    haar_moment_deviation, monte_carlo_ratio, one_sided_tv_check, p_test, perm_overlap_sum,
    perm_overlap_sum_by_contraction, prod_perm_overlap_sum, prod_perm_overlap_sum_by_symmetrizers,
    product_likelihood_ratio, ratio_chain, saturation_check_product_collection, swap_trick_gap, sym_overlap_check,
    BoundReport, GramMatrix,
};
use crate::ensembles::{far_state, MAX_FAR_EPS};
use crate::error::{Error, Result};
use crate::perm::{double_coset_decompose, permute_tensor_factors, Permutation};
use crate::permanent::{brute_force_permanent, permanent};
use crate::rng::{stream, SimRng};
use crate::state::{haar_state, haar_state_on, haar_unitary, inner, DensityMatrix, PureState, State, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteStatus {
    Passed,
    BoundViolated,
    PreconditionViolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    /// Smallest `lhs - rhs` over all checks; `null` when nothing was checked.
    pub min_slack: Option<f64>,
    pub status: SuiteStatus,
    /// The first offending instance, with its stream index.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failing_instance: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Feeds a Gram matrix with diagonal 0.9 into the Frobenius suite.
    pub inject_corrupt_gram: bool,
}

/// One checked inequality and the data needed to reproduce it.
struct Check {
    report: BoundReport,
    instance: Value,
}

fn check(report: BoundReport, instance: Value) -> Check {
    Check { report, instance }
}

/// `|a - b| ≤ tol` as a bound report whose slack is `tol - |a - b|`.
fn close(a: f64, b: f64, tol: f64) -> BoundReport {
    BoundReport::with_tolerance(tol, (a - b).abs(), 0.0)
}

fn holds(ok: bool) -> BoundReport {
    BoundReport::with_tolerance(0.0, if ok { 0.0 } else { 1.0 }, 0.0)
}

fn run_suite<F>(name: &str, seed: u64, id: u64, instances: usize, body: F) -> SuiteResult
where
    F: Fn(usize, &mut SimRng) -> Result<Vec<Check>> + Sync,
{
    let suite_seed = seed ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let outcomes: Vec<Result<Vec<Check>>> = (0..instances)
        .into_par_iter()
        .map(|i| body(i, &mut stream(suite_seed, i as u64)))
        .collect();
    let mut min_slack: Option<f64> = None;
    let mut status = SuiteStatus::Passed;
    let mut failing = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(checks) => {
                for c in checks {
                    min_slack = Some(min_slack.map_or(c.report.slack, |m| m.min(c.report.slack)));
                    if !c.report.satisfied && failing.is_none() {
                        status = SuiteStatus::BoundViolated;
                        failing = Some(json!({ "index": i, "instance": c.instance, "report": c.report }));
                    }
                }
            }
            Err(e) if failing.is_none() => {
                status = match e {
                    Error::Inconsistent(_) => SuiteStatus::BoundViolated,
                    _ => SuiteStatus::PreconditionViolated,
                };
                failing = Some(json!({ "index": i, "error": e.to_string() }));
            }
            Err(_) => {}
        }
    }
    SuiteResult {
        name: name.to_string(),
        instances,
        min_slack,
        status,
        failing_instance: failing,
    }
}

fn random_perm<R: Rng>(deg: usize, rng: &mut R) -> Permutation {
    let mut images: Vec<usize> = (0..deg).collect();
    for i in (1..deg).rev() {
        images.swap(i, rng.gen_range(0..=i));
    }
    Permutation::new(images).expect("shuffled identity")
}

fn random_density<R: Rng>(dim: usize, rng: &mut R) -> Result<DensityMatrix> {
    let parts = (0..rng.gen_range(1..=3))
        .map(|_| {
            Ok((
                rng.gen_range(0.1..1.0),
                DensityMatrix::from_pure(&haar_state(dim, rng)?),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = parts.iter().map(|p| p.0).sum();
    DensityMatrix::mixture(&parts.into_iter().map(|(w, r)| (w / total, r)).collect::<Vec<_>>())
}

fn random_collection<R: Rng>(t: usize, d: usize, rng: &mut R) -> Result<Vec<PureState>> {
    (0..t).map(|_| haar_state(d, rng)).collect()
}

fn orthonormal_collection<R: Rng>(t: usize, d: usize, rng: &mut R) -> Result<Vec<PureState>> {
    let u = haar_unitary(d, rng)?;
    (0..t)
        .map(|c| PureState::normalized(u.column(c).iter().copied().collect(), d, 1))
        .collect()
}

fn random_distribution<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn double_coset(seed: u64) -> SuiteResult {
    let perms: Vec<Permutation> = (2..=6)
        .flat_map(|deg| Permutation::all(deg).expect("small degree"))
        .collect();
    run_suite("double_coset_decomposition", seed, 1, perms.len(), |i, _| {
        let p = &perms[i];
        let c = double_coset_decompose(p)?;
        let ok = c.recompose() == *p && c.alpha.fixes(0) && c.beta.fixes(0) && (c.a == 0) == p.fixes(0);
        Ok(vec![check(holds(ok), json!({ "perm": p }))])
    })
}

fn representation(seed: u64) -> SuiteResult {
    run_suite("permutation_representation", seed, 2, 300, |_, rng| {
        let t = rng.gen_range(1..=4);
        let m: usize = rng.gen_range(1..=3);
        let (p, q) = (random_perm(t, rng), random_perm(t, rng));
        let v = haar_state(m.pow(t as u32), rng)?;
        let pq = permute_tensor_factors(v.amplitudes(), m, &p.compose(&q)?)?;
        let p_q = permute_tensor_factors(&permute_tensor_factors(v.amplitudes(), m, &q)?, m, &p)?;
        let hom: f64 = pq.iter().zip(&p_q).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let back = permute_tensor_factors(&permute_tensor_factors(v.amplitudes(), m, &p)?, m, &p.inverse())?;
        let inv: f64 = back
            .iter()
            .zip(v.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let instance = json!({ "p": p, "q": q, "m": m });
        Ok(vec![
            check(close(hom, 0.0, 1e-12), instance.clone()),
            check(close(inv, 0.0, 1e-12), instance),
        ])
    })
}

fn swap_trick(seed: u64) -> SuiteResult {
    run_suite("swap_trick", seed, 3, 200, |_, rng| {
        let dim = rng.gen_range(1..=4);
        let (a, b) = (random_density(dim, rng)?, random_density(dim, rng)?);
        Ok(vec![check(
            close(swap_trick_gap(&a, &b)?, 0.0, 1e-10),
            json!({ "dim": dim }),
        )])
    })
}

fn haar_moment(seed: u64) -> SuiteResult {
    run_suite("haar_moment", seed, 4, 2, |i, rng| {
        let dim = [4, 8][i];
        let dev = haar_moment_deviation(dim, 2, 100_000, rng.gen())?;
        Ok(vec![check(
            BoundReport::with_tolerance(0.02, dev, 0.0),
            json!({ "dim": dim, "t": 2 }),
        )])
    })
}

fn one_sided_tv(seed: u64) -> SuiteResult {
    run_suite("one_sided_tv", seed, 5, 500, |_, rng| {
        let k = rng.gen_range(2..=8);
        let (p, q) = (random_distribution(k, rng), random_distribution(k, rng));
        let min_ratio = p.iter().zip(&q).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
        let delta = (1.0 - min_ratio).max(0.0) + rng.gen_range(0.0..0.1);
        Ok(vec![check(
            one_sided_tv_check(&p, &q, delta)?,
            json!({ "p": p, "q": q, "delta": delta }),
        )])
    })
}

fn frobenius(seed: u64, inject: bool) -> SuiteResult {
    run_suite("frobenius_permanent_bound", seed, 6, 500, |i, rng| {
        if inject && i == 0 {
            let mut m = DMatrix::<C64>::identity(3, 3);
            m[(1, 1)] = C64::new(0.9, 0.0);
            let g = GramMatrix::new(m)?;
            return Ok(vec![check(frobenius_bound_check(&g)?, json!("corrupted"))]);
        }
        let t = rng.gen_range(1..=6);
        let d = rng.gen_range(1..=4);
        let g = gram(&random_collection(t, d, rng)?)?;
        Ok(vec![check(frobenius_bound_check(&g)?, json!({ "t": t, "d": d }))])
    })
}

fn plus_minus_frame() -> Result<GramMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let frame: Vec<PureState> = [[1.0, 0.0], [0.0, 1.0], [h, h], [h, -h]]
        .iter()
        .map(|v| PureState::new(v.iter().map(|&x| C64::new(x, 0.0)).collect(), 2, 1))
        .collect::<Result<_>>()?;
    gram(&frame)
}

fn gram_regimes(seed: u64) -> SuiteResult {
    run_suite("gram_regimes", seed, 7, 1001, |i, rng| {
        if i == 1000 {
            let g = plus_minus_frame()?;
            return Ok(vec![
                check(close(g.frobenius_sqr(), 8.0, 1e-9), json!("tight frame d=2 T=4")),
                check(gram_regime_check(&g, 2)?, json!("tight frame d=2 T=4")),
            ]);
        }
        let d = rng.gen_range(1..=4);
        let t = if i < 500 {
            rng.gen_range(1..=d)
        } else {
            rng.gen_range(d + 1..=6)
        };
        let g = gram(&random_collection(t, d, rng)?)?;
        Ok(vec![check(gram_regime_check(&g, d)?, json!({ "t": t, "d": d }))])
    })
}

fn overlap_identity(seed: u64) -> SuiteResult {
    run_suite("permanent_overlap_identity", seed, 8, 600, |i, rng| {
        let d = rng.gen_range(1..=3);
        let t = rng.gen_range(1..=4);
        if i >= 500 {
            let t = t.min(d);
            let sum = perm_overlap_sum(&orthonormal_collection(t, d, rng)?)?;
            return Ok(vec![check(
                close(sum, 1.0, 1e-9),
                json!({ "orthonormal": true, "t": t, "d": d }),
            )]);
        }
        let states = random_collection(t, d, rng)?;
        let per = gram(&states)?.permanent()?;
        let direct = perm_overlap_sum_by_contraction(&states)?;
        let instance = json!({ "t": t, "d": d });
        Ok(vec![
            check(close(direct / per, 1.0, 1e-8), instance.clone()),
            check(BoundReport::new(direct, 1.0), instance),
        ])
    })
}

fn block_sum_checks(states: &[PureState], parts: &[Vec<usize>], instance: Value) -> Result<Vec<Check>> {
    let sum = prod_perm_overlap_sum(states, parts)?;
    let via_sym = prod_perm_overlap_sum_by_symmetrizers(states, parts)?;
    Ok(vec![
        check(close(via_sym / sum, 1.0, 1e-9), instance.clone()),
        check(sym_overlap_check(states, parts)?, instance),
    ])
}

fn bipartite_sum(seed: u64) -> SuiteResult {
    run_suite("bipartite_overlap_sum", seed, 9, 200, |_, rng| {
        let t = rng.gen_range(1..=3);
        let states = (0..t).map(|_| haar_state_on(2, 2, rng)).collect::<Result<Vec<_>>>()?;
        block_sum_checks(&states, &[vec![0], vec![1]], json!({ "t": t, "d": 2 }))
    })
}

fn multipartite_sum(seed: u64) -> SuiteResult {
    run_suite("multipartite_overlap_sum", seed, 10, 50, |_, rng| {
        let states = (0..2).map(|_| haar_state_on(2, 3, rng)).collect::<Result<Vec<_>>>()?;
        block_sum_checks(&states, &[vec![0], vec![1], vec![2]], json!({ "t": 2, "d": 2, "n": 3 }))
    })
}

fn saturation(seed: u64) -> SuiteResult {
    let grid: Vec<(usize, usize)> = (2..=4).flat_map(|d| (1..=d.min(3)).map(move |t| (t, d))).collect();
    run_suite("symmetric_saturation", seed, 11, grid.len() * 10, |i, rng| {
        let (t, d) = grid[i % grid.len()];
        let r = saturation_check_product_collection(t, d, rng)?;
        Ok(vec![check(close(r.lhs, r.rhs, 1e-9), json!({ "t": t, "d": d }))])
    })
}

fn likelihood_chain(seed: u64) -> SuiteResult {
    let dims = [2usize, 4, 8, 16];
    let grid: Vec<(usize, usize)> = dims.iter().flat_map(|&d| (1..=6).map(move |t| (d, t))).collect();
    let per_cell = 10;
    run_suite("likelihood_chain", seed, 12, grid.len() * per_cell + 2, |i, rng| {
        if i == grid.len() * per_cell {
            // Monte Carlo estimate of the Haar average against the closed form.
            let states = random_collection(3, 2, rng)?;
            let exact = haar_likelihood_ratio(&states)?.ratio;
            let mc = monte_carlo_ratio(&states, 100_000, rng.gen())?;
            return Ok(vec![check(
                close(mc.mean, exact, 3.0 * mc.std_error),
                json!({ "d": 2, "t": 3, "mc": mc }),
            )]);
        }
        if i == grid.len() * per_cell + 1 {
            // Two-block product ensemble at T = 3 on two qubits.
            let states = (0..3).map(|_| haar_state_on(2, 2, rng)).collect::<Result<Vec<_>>>()?;
            let r = product_likelihood_ratio(&states, &[vec![0], vec![1]])?;
            return Ok(vec![check(r.check(), json!({ "product": true, "t": 3, "d": 2 }))]);
        }
        let (d, t) = grid[i / per_cell];
        let chain = ratio_chain(d, t)?;
        let r = haar_likelihood_ratio(&random_collection(t, d, rng)?)?;
        let instance = json!({ "d": d, "t": t });
        let mut checks: Vec<Check> = chain
            .links(r.ratio, 1e-12)
            .into_iter()
            .map(|b| check(b, instance.clone()))
            .collect();
        checks.push(check(
            BoundReport::with_tolerance(r.ratio, r.lower_bound, 1e-12),
            instance,
        ));
        Ok(checks)
    })
}

fn average_purity(seed: u64) -> SuiteResult {
    let epsilons = [0.3, 0.5, 0.6, MAX_FAR_EPS];
    let mut grid = Vec::new();
    for n in 2..=4 {
        for d in 2..=3 {
            for &eps in &epsilons {
                grid.push((n, d, eps));
            }
        }
    }
    let draws = 50;
    run_suite(
        "average_purity",
        seed,
        13,
        grid.len() * draws + epsilons.len(),
        |i, rng| {
            if i >= grid.len() * draws {
                let eps = epsilons[i - grid.len() * draws];
                let mut amps = vec![C64::new(0.0, 0.0); 4];
                amps[0] = C64::new((1.0 - eps * eps).sqrt(), 0.0);
                amps[3] = C64::new(eps, 0.0);
                let psi = PureState::new(amps, 2, 2)?;
                let avg = average_marginal_purity(&psi)?;
                return Ok(vec![check(
                    close(avg, avg_purity_bound(eps, 2)?, 1e-12),
                    json!({ "family": "n=2", "eps": eps }),
                )]);
            }
            let (n, d, eps) = grid[i / draws];
            let cert = far_state(n, d, eps, rng)?;
            let avg = average_marginal_purity(&cert.state)?;
            let bound = avg_purity_bound(eps, n)?;
            Ok(vec![check(
                BoundReport::new(bound, avg),
                json!({ "n": n, "d": d, "eps": eps, "eps_measured": cert.eps_measured }),
            )])
        },
    )
}

fn ryser(seed: u64) -> SuiteResult {
    run_suite("ryser_vs_brute_force", seed, 14, 300, |_, rng| {
        let side = rng.gen_range(1..=8);
        let a = DMatrix::from_fn(side, side, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let (fast, slow) = (permanent(&a)?, brute_force_permanent(&a)?);
        let rel = (fast - slow).norm() / slow.norm().max(1.0);
        Ok(vec![check(close(rel, 0.0, 1e-10), json!({ "side": side }))])
    })
}

fn product_test_functional(seed: u64) -> SuiteResult {
    run_suite("product_test_functional", seed, 15, 101, |i, rng| {
        if i == 100 {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut amps = vec![C64::new(0.0, 0.0); 8];
            amps[0] = C64::new(h, 0.0);
            amps[7] = C64::new(h, 0.0);
            let ghz = State::Pure(PureState::new(amps, 2, 3)?);
            return Ok(vec![check(close(p_test(&ghz)?, 0.625, 1e-12), json!("ghz n=3"))]);
        }
        let n = rng.gen_range(2..=4);
        let d = rng.gen_range(2..=3);
        let factors = (0..n).map(|_| haar_state(d, rng)).collect::<Result<Vec<_>>>()?;
        let product = State::Pure(PureState::product(&factors)?);
        let entangled = State::Pure(haar_state_on(d, n, rng)?);
        let instance = json!({ "n": n, "d": d });
        Ok(vec![
            check(close(p_test(&product)?, 1.0, 1e-10), instance.clone()),
            check(BoundReport::new(1.0, p_test(&entangled)?), instance),
        ])
    })
}

fn gram_from_vectors(vs: &[Vec<C64>]) -> DMatrix<C64> {
    DMatrix::from_fn(vs.len(), vs.len(), |i, j| inner(&vs[i], &vs[j]))
}

fn corrupted_gram_is_rejected() -> SuiteResult {
    // A Gram matrix built from unnormalized vectors must never reach a bound.
    let vs = vec![
        vec![C64::new(0.9f64.sqrt(), 0.0), C64::new(0.0, 0.0)],
        vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ];
    let ok = matches!(GramMatrix::new(gram_from_vectors(&vs)), Err(Error::Precondition(_)));
    SuiteResult {
        name: "gram_precondition_guard".into(),
        instances: 1,
        min_slack: Some(if ok { 0.0 } else { -1.0 }),
        status: if ok {
            SuiteStatus::Passed
        } else {
            SuiteStatus::BoundViolated
        },
        failing_instance: None,
    }
}

/// Runs every suite. The report is a pure function of the options.
pub fn run_verification(opts: &VerifyOptions) -> VerifyReport {
    let s = opts.seed;
    let suites = vec![
        double_coset(s),
        representation(s),
        swap_trick(s),
        haar_moment(s),
        one_sided_tv(s),
        frobenius(s, opts.inject_corrupt_gram),
        gram_regimes(s),
        overlap_identity(s),
        bipartite_sum(s),
        multipartite_sum(s),
        saturation(s),
        likelihood_chain(s),
        average_purity(s),
        ryser(s),
        product_test_functional(s),
        corrupted_gram_is_rejected(),
    ];
    let passed = suites.iter().all(|r| r.status == SuiteStatus::Passed);
    VerifyReport {
        seed: s,
        suites,
        passed,
    }
}

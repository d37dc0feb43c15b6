use std::time::Instant;

use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::json;
use singlecopy_core::ensembles::{far_fraction_experiment, sample, EnsembleKind, EnsembleSpec, MAX_FAR_EPS};
use singlecopy_core::protocol::tester::mp_test_copies;
use singlecopy_core::protocol::{
    bias, empirical_tv, estimate_purity_single_copy, mp_test as run_mp_test, mp_tester, mp_thresholds, tester_eval,
    PurityEstimatorConfig, StateSource, Strategy, TranscriptRow,
};
use singlecopy_core::report::{wilson_interval, ExperimentReport, Z95};
use singlecopy_core::rng::{seeded, stream};
use singlecopy_core::state::{dim_pow, haar_state, DensityMatrix, PureState, State};
use singlecopy_core::{run_verification, SuiteStatus, VerifyOptions};

use crate::output::{core_failure, emit_csv, emit_json, usage, write_csv};
use crate::{
    DistinguishArgs, EnsembleArg, Failure, FarFractionArgs, Format, MpTestArgs, PurityArgs, ScopeArg, SourceArg,
    VerifyArgs,
};

/// Largest total dimension the drivers accept.
const MAX_DRIVER_DIM: usize = 4096;
/// Largest copy count of a single tester or estimator run.
const MAX_RUN_COPIES: usize = 5_000_000;

type Outcome = Result<(), Failure>;

fn ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn strip_timing(report: &mut ExperimentReport, no_timing: bool) {
    if no_timing {
        report.wall_time_ms = None;
    }
}

pub fn verify(a: VerifyArgs) -> Outcome {
    let seed = a.common.seed.unwrap_or(42);
    let start = Instant::now();
    let report = run_verification(&VerifyOptions {
        seed,
        inject_corrupt_gram: a.inject_corrupt_gram,
    });
    let config = json!({ "seed": seed, "inject_corrupt_gram": a.inject_corrupt_gram });
    match a.common.format {
        Format::Json => emit_json(&a.common, "verify", config, ms(start), &report)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .suites
                .iter()
                .map(|s| {
                    vec![
                        s.name.clone(),
                        s.instances.to_string(),
                        s.min_slack.map(fmt).unwrap_or_default(),
                        serde_json::to_value(s.status)
                            .map(|v| v.as_str().unwrap_or("").to_string())
                            .unwrap_or_default(),
                        s.failing_instance.as_ref().map(|v| v.to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            let header = ["suite", "instances", "min_slack", "status", "failing_instance"];
            emit_csv(&a.common, header.map(String::from).to_vec(), &rows)?
        }
    }
    for s in report.suites.iter().filter(|s| s.status != SuiteStatus::Passed) {
        eprintln!("{}: {:?}", s.name, s.status);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn check_site_params(n: usize, d: usize) -> Outcome {
    usage(n >= 1, "--n must be at least 1")?;
    usage(d >= 2, "--d must be at least 2")?;
    let dim = dim_pow(d, n).map_err(core_failure)?;
    usage(dim <= MAX_DRIVER_DIM, format!("d^n = {dim} exceeds {MAX_DRIVER_DIM}"))
}

fn transcript_rows(label: &str, rows: &[TranscriptRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                label.to_string(),
                "0".into(),
                r.round.to_string(),
                r.copy.to_string(),
                r.site.to_string(),
                r.basis_seed.to_string(),
                r.outcome.to_string(),
            ]
        })
        .collect()
}

pub fn mp_test(a: MpTestArgs) -> Outcome {
    usage(a.trials >= 1, "--trials must be at least 1")?;
    usage(a.n >= 2, "--n must be at least 2")?;
    check_site_params(a.n, a.d)?;
    usage(
        a.eps > 0.0 && a.eps <= MAX_FAR_EPS + 1e-12,
        "--eps must lie in (0, 1/√2]",
    )?;
    let cfg = PurityEstimatorConfig::default();
    let copies = mp_test_copies(a.n, a.d, a.eps, &cfg).map_err(core_failure)?;
    usage(
        copies <= MAX_RUN_COPIES,
        format!("one trial needs {copies} copies, above {MAX_RUN_COPIES}"),
    )?;
    let (eps_purity, delta) = mp_thresholds(a.n, a.eps).map_err(core_failure)?;
    let seed = a.common.seed.unwrap_or(7);
    let (seed_mp, seed_far) = (seed.wrapping_mul(2), seed.wrapping_mul(2).wrapping_add(1));
    let mp_spec = EnsembleSpec::new(EnsembleKind::MultipartiteProductHaar, a.n, a.d).map_err(core_failure)?;
    let far_spec = EnsembleSpec::new(EnsembleKind::FarFromMp { eps: a.eps }, a.n, a.d).map_err(core_failure)?;

    let start = Instant::now();
    let tester = mp_tester(a.n, a.d, a.eps, cfg);
    let (rm, vm) = tester_eval(&tester, &mp_spec, a.trials, seed_mp).map_err(core_failure)?;
    let (rf, vf) = tester_eval(&tester, &far_spec, a.trials, seed_far).map_err(core_failure)?;
    let (gap, gap_radius) = bias(&rm, &rf);
    let passed = rm.estimate >= 2.0 / 3.0 && rf.estimate <= 1.0 / 3.0;
    let wall = ms(start);

    if let Some(path) = &a.transcript {
        // Trial 0 of each ensemble, replayed from its stream.
        let mut rows = Vec::new();
        for (label, spec, s) in [("mp", &mp_spec, seed_mp), ("far", &far_spec, seed_far)] {
            let mut rng = stream(s, 0);
            let state = sample(spec, &mut rng).map_err(core_failure)?;
            let mut log = Vec::new();
            run_mp_test(
                &mut StateSource::new(state),
                a.n,
                a.d,
                a.eps,
                &cfg,
                &mut rng,
                Some(&mut log),
            )
            .map_err(core_failure)?;
            rows.extend(transcript_rows(label, &log));
        }
        let header = ["ensemble", "trial", "round", "copy", "site", "basis_seed", "outcome"];
        write_csv(&Some(path.clone()), &header.map(String::from), &rows)?;
    }

    let config = json!({ "n": a.n, "d": a.d, "eps": a.eps, "trials": a.trials, "seed": seed, "estimator": cfg });
    match a.common.format {
        Format::Json => {
            let (lo_m, _) = wilson_interval(vm.iter().filter(|v| v.accepted()).count(), a.trials, Z95);
            let (_, hi_f) = wilson_interval(vf.iter().filter(|v| v.accepted()).count(), a.trials, Z95);
            let result = json!({
                "members": rm,
                "far": rf,
                "bias": gap,
                "bias_radius": gap_radius,
                "members_accept_lower_95": lo_m,
                "far_accept_upper_95": hi_f,
                "completeness_threshold": 2.0 / 3.0,
                "soundness_threshold": 1.0 / 3.0,
                "eps_purity": eps_purity,
                "delta": delta,
                "copies_per_trial": copies,
                "passed": passed,
            });
            emit_json(&a.common, "mp-test", config, wall, &result)?
        }
        Format::Csv => {
            let mut header: Vec<String> = ["ensemble", "trial", "verdict", "copies"].map(String::from).to_vec();
            header.extend((0..a.n).map(|i| format!("purity_site_{i}")));
            let mut rows = Vec::new();
            for (label, verdicts) in [("mp", &vm), ("far", &vf)] {
                for (i, v) in verdicts.iter().enumerate() {
                    let mut row = vec![
                        label.to_string(),
                        i.to_string(),
                        format!("{:?}", v.verdict),
                        v.copies_used.to_string(),
                    ];
                    row.extend(v.per_site_estimates.iter().map(|&p| fmt(p)));
                    rows.push(row);
                }
            }
            emit_csv(&a.common, header, &rows)?
        }
    }
    eprintln!(
        "accept(MP) = {:.3} ± {:.3}, accept(far) = {:.3} ± {:.3}, bias = {gap:.3} ± {gap_radius:.3}",
        rm.estimate, rm.confidence_radius, rf.estimate, rf.confidence_radius
    );
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn ensemble(arg: EnsembleArg, n: usize, d: usize, eps: f64) -> Result<EnsembleSpec, Failure> {
    let spec = match arg {
        EnsembleArg::GlobalHaar => EnsembleSpec::new(EnsembleKind::GlobalHaar, n, d),
        EnsembleArg::MaximallyMixed => EnsembleSpec::new(EnsembleKind::MaximallyMixed, n, d),
        EnsembleArg::ProductHaar => EnsembleSpec::new(EnsembleKind::MultipartiteProductHaar, n, d),
        EnsembleArg::BipartiteHaar => EnsembleSpec::balanced_bipartite(n, d),
        EnsembleArg::Far => EnsembleSpec::new(EnsembleKind::FarFromMp { eps }, n, d),
    };
    spec.map_err(core_failure)
}

/// `1 − min ratio` bound on TV against the maximally mixed state, when one
/// side is maximally mixed and the other a Haar-type ensemble.
fn ratio_bound(a: &EnsembleSpec, b: &EnsembleSpec, t: usize) -> Option<f64> {
    let other = match (&a.kind, &b.kind) {
        (EnsembleKind::MaximallyMixed, k) | (k, EnsembleKind::MaximallyMixed) => k,
        _ => return None,
    };
    let pairs = (t * t.saturating_sub(1)) as f64 / 2.0;
    let block_dims: Vec<usize> = match other {
        EnsembleKind::GlobalHaar => vec![a.dim()],
        EnsembleKind::MultipartiteProductHaar => vec![a.d; a.n],
        EnsembleKind::BipartiteProductHaar { cut } => {
            vec![a.d.pow(cut.len() as u32), a.d.pow((a.n - cut.len()) as u32)]
        }
        _ => return None,
    };
    Some(block_dims.iter().map(|&db| pairs / db as f64).sum::<f64>().min(1.0))
}

pub fn distinguish(a: DistinguishArgs) -> Outcome {
    usage(a.trials >= 1, "--trials must be at least 1")?;
    usage(a.t >= 1 && a.t <= 8, "--T must lie in 1..=8")?;
    check_site_params(a.n, a.d)?;
    let spec_a = ensemble(a.a, a.n, a.d, a.eps)?;
    let spec_b = ensemble(a.b, a.n, a.d, a.eps)?;
    let seed = a.common.seed.unwrap_or(42);
    let mut basis_rng = seeded(seed ^ 0x5eed_ba5e);
    let strategy = match a.scope {
        ScopeArg::Global => Strategy::random_basis(spec_a.dim(), a.t, &mut basis_rng),
        ScopeArg::Local => Strategy::random_local_bases(a.d, a.n, a.t, &mut basis_rng),
    }
    .map_err(core_failure)?;
    let start = Instant::now();
    let mut report = empirical_tv(&spec_a, &spec_b, &strategy, a.t, a.trials, seed).map_err(core_failure)?;
    strip_timing(&mut report, a.common.no_timing);
    let wall = ms(start);
    let bound = ratio_bound(&spec_a, &spec_b, a.t);
    let violated = bound.is_some_and(|b| report.lower() > b + 1e-9);
    let config = json!({
        "n": a.n, "d": a.d, "T": a.t, "trials": a.trials, "seed": seed,
        "a": spec_a, "b": spec_b, "scope": format!("{:?}", a.scope).to_lowercase(),
    });
    match a.common.format {
        Format::Json => emit_json(
            &a.common,
            "distinguish",
            config,
            wall,
            &json!({ "report": report, "bound": bound }),
        )?,
        Format::Csv => {
            let header = ["tv", "radius", "bound", "method", "strings", "trials"]
                .map(String::from)
                .to_vec();
            let row = vec![
                fmt(report.estimate),
                fmt(report.confidence_radius),
                bound.map(fmt).unwrap_or_default(),
                report
                    .details
                    .get("method")
                    .and_then(|v| v.as_str())
                    .unwrap_or("")
                    .to_string(),
                report.details.get("strings").map(|v| v.to_string()).unwrap_or_default(),
                a.trials.to_string(),
            ];
            emit_csv(&a.common, header, &[row])?
        }
    }
    match bound {
        Some(b) => eprintln!(
            "TV = {:.6} ± {:.6}    bound = {b:.6}",
            report.estimate, report.confidence_radius
        ),
        None => eprintln!("TV = {:.6} ± {:.6}", report.estimate, report.confidence_radius),
    }
    if violated {
        Err(Failure::Check)
    } else {
        Ok(())
    }
}

pub fn far_fraction(a: FarFractionArgs) -> Outcome {
    usage(a.trials >= 1, "--trials must be at least 1")?;
    usage(a.n >= 2, "--n must be at least 2")?;
    check_site_params(a.n, a.d)?;
    usage((0.0..=1.0).contains(&a.eps), "--eps must lie in [0, 1]")?;
    let seed = a.common.seed.unwrap_or(42);
    let start = Instant::now();
    let mut report = far_fraction_experiment(a.n, a.d, a.eps, a.trials, seed).map_err(core_failure)?;
    strip_timing(&mut report, a.common.no_timing);
    let config = json!({ "n": a.n, "d": a.d, "eps": a.eps, "trials": a.trials, "seed": seed });
    match a.common.format {
        Format::Json => emit_json(&a.common, "far-fraction", config, ms(start), &report)?,
        Format::Csv => {
            let header = ["n", "d", "eps", "samples", "fraction", "radius", "close_count"]
                .map(String::from)
                .to_vec();
            let row = vec![
                a.n.to_string(),
                a.d.to_string(),
                fmt(a.eps),
                a.trials.to_string(),
                fmt(report.estimate),
                fmt(report.confidence_radius),
                report
                    .details
                    .get("close_count")
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            ];
            emit_csv(&a.common, header, &[row])?
        }
    }
    eprintln!(
        "fraction within {} of product = {:.4} ± {:.4}",
        a.eps, report.estimate, report.confidence_radius
    );
    Ok(())
}

fn purity_source(arg: SourceArg, d: usize, seed: u64) -> Result<State, Failure> {
    let state = match arg {
        SourceArg::MaximallyMixed => State::Mixed(DensityMatrix::maximally_mixed(d, 1).map_err(core_failure)?),
        SourceArg::Pure => State::Pure(PureState::zero(d, 1).map_err(core_failure)?),
        SourceArg::HalfMixed => {
            let psi = haar_state(d, &mut seeded(seed)).map_err(core_failure)?;
            let mm = DensityMatrix::maximally_mixed(d, 1).map_err(core_failure)?;
            State::Mixed(
                DensityMatrix::mixture(&[(0.5, DensityMatrix::from_pure(&psi)), (0.5, mm)]).map_err(core_failure)?,
            )
        }
    };
    Ok(state)
}

pub fn purity(a: PurityArgs) -> Outcome {
    usage(a.trials >= 1, "--trials must be at least 1")?;
    usage(
        a.d >= 2 && a.d <= MAX_DRIVER_DIM,
        format!("--d must lie in 2..={MAX_DRIVER_DIM}"),
    )?;
    let cfg = PurityEstimatorConfig::default();
    let (k, m) = cfg.schedule(a.d, a.eps, a.delta).map_err(core_failure)?;
    usage(
        k * m <= MAX_RUN_COPIES,
        format!("one run needs {} copies, above {MAX_RUN_COPIES}", k * m),
    )?;
    let seed = a.common.seed.unwrap_or(42);
    let source_name = a
        .source
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    let state = purity_source(a.source, a.d, seed)?;
    let truth = state.to_density().purity();
    let start = Instant::now();
    let estimates = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            let mut src = StateSource::new(state.clone());
            estimate_purity_single_copy(&mut src, a.eps, a.delta, &cfg, &mut stream(seed, i as u64 + 1))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(core_failure)?;
    let n = a.trials as f64;
    let mean = estimates.iter().map(|e| e.value).sum::<f64>() / n;
    let sd = if a.trials > 1 {
        (estimates.iter().map(|e| (e.value - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let hits = estimates.iter().filter(|e| (e.value - truth).abs() <= a.eps).count();
    let (_, hi) = wilson_interval(hits, a.trials, Z95);
    let contract_ok = hi >= 1.0 - a.delta;
    let mut report = ExperimentReport::new(
        "purity",
        json!({ "source": source_name, "d": a.d, "eps": a.eps, "delta": a.delta }),
        a.trials,
        mean,
        Z95 * sd / n.sqrt(),
        seed,
    )
    .with_detail("truth", truth)
    .with_detail("within_eps", hits)
    .with_detail("success_rate", hits as f64 / n)
    .with_detail("copies_per_run", k * m)
    .with_detail("bases", m)
    .with_detail("shots_per_basis", k)
    .with_detail("estimator", cfg);
    if !a.common.no_timing {
        report.wall_time_ms = Some(ms(start));
    }
    let config = json!({ "d": a.d, "eps": a.eps, "delta": a.delta, "trials": a.trials, "seed": seed,
        "source": source_name });
    match a.common.format {
        Format::Json => emit_json(&a.common, "purity", config, ms(start), &report)?,
        Format::Csv => {
            let header = ["trial", "estimate", "raw", "truth", "copies"]
                .map(String::from)
                .to_vec();
            let rows: Vec<Vec<String>> = estimates
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    vec![
                        i.to_string(),
                        fmt(e.value),
                        fmt(e.raw),
                        fmt(truth),
                        e.copies_used.to_string(),
                    ]
                })
                .collect();
            emit_csv(&a.common, header, &rows)?
        }
    }
    eprintln!(
        "purity estimate {mean:.4} (truth {truth:.4}); within eps in {hits}/{} runs",
        a.trials
    );
    if contract_ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

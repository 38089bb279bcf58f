//! Command implementations. The CLI orchestrates; numerical work lives in
//! the core crate. Independent sub-tasks run on a small worker pool capped
//! by the CHAINVERIFIER_THREADS environment variable, and every task owns a
//! seed derived from (section seed, task index), so results do not depend
//! on scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use chainverifier_core::{
    assemble_verdict, certify_fixed_point, certify_globally_attracting,
    certify_steadily_attracting, derive_seed, empirical_density_check, find_path,
    find_rank_witness, halton_box, return_lengths, run_chain, steadily_via_fixed_point,
    xnes_convergence_rate, Conclusion, Model, RankEvidence, StateVector,
};

use crate::config::RunConfig;
use crate::report::{
    sign_verdict, trajectory_csv, DensityCheckOutcome, DensityReport, PathQueryOutcome,
    PathsReport, RateReport, VerdictReport, TOOL_VERSION,
};
use crate::{CliError, EXIT_INCONCLUSIVE, EXIT_OK};

/// Worker count cap: CHAINVERIFIER_THREADS when set, otherwise the
/// available parallelism.
pub fn worker_cap() -> usize {
    match std::env::var("CHAINVERIFIER_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&c| c >= 1).unwrap_or(1),
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    }
}

/// Run independent tasks on at most `cap` workers; output order follows
/// task order regardless of scheduling.
pub fn parallel_collect<T, F>(tasks: Vec<F>, cap: usize) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let total = tasks.len();
    let workers = cap.max(1).min(total.max(1));
    if workers <= 1 {
        return tasks.into_iter().map(|f| f()).collect();
    }
    let pending: Mutex<Vec<Option<F>>> = Mutex::new(tasks.into_iter().map(Some).collect());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..total).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= total {
                    break;
                }
                let task = pending.lock().unwrap()[idx].take().unwrap();
                let out = task();
                results.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect()
}

fn state(coords: &[f64]) -> Result<StateVector, CliError> {
    StateVector::from_slice(coords).map_err(CliError::from)
}

/// Low-discrepancy origin set plus the user-supplied extremes.
fn assemble_origins(
    lo: &[f64],
    hi: &[f64],
    count: usize,
    extras: &[Vec<f64>],
) -> Result<Vec<StateVector>, CliError> {
    let mut origins = Vec::with_capacity(count + extras.len());
    for coords in halton_box(lo, hi, count) {
        origins.push(state(&coords)?);
    }
    for coords in extras {
        origins.push(state(coords)?);
    }
    Ok(origins)
}

/// Rank witness at the candidate, surfacing an actionable error when no
/// admissible witness was found at all.
fn rank_witness(
    model: &dyn Model,
    x_star: &StateVector,
    rel_tol: f64,
    seed: u64,
) -> Result<RankEvidence, CliError> {
    find_rank_witness(model, x_star, rel_tol, seed)?.ok_or_else(|| {
        CliError::Config(
            "analysis: no admissible rank witness found at x_star (every sampled control \
             sequence fell outside the control set)"
                .into(),
        )
    })
}

/// The `analyze` command: rank condition at x*, attractivity certificates,
/// return lengths, assembled verdict.
pub fn cmd_analyze(config: &RunConfig) -> Result<(VerdictReport, i32), CliError> {
    let started = Instant::now();
    let analysis = config
        .analysis
        .as_ref()
        .ok_or_else(|| CliError::Config("the [analysis] section is required for analyze".into()))?;
    let model = config.model.build()?;
    let x_star = state(&analysis.x_star)?;
    let origins = assemble_origins(
        &analysis.origin_box_lo,
        &analysis.origin_box_hi,
        analysis.origin_count,
        &analysis.extra_origins,
    )?;
    let budget = analysis.budget();
    let seed = analysis.seed;

    enum Task {
        Rank(Result<RankEvidence, CliError>),
        Globally(chainverifier_core::Result<chainverifier_core::AttractivityCertificate>),
        Steadily(chainverifier_core::Result<chainverifier_core::AttractivityCertificate>),
        Returns(chainverifier_core::Result<chainverifier_core::ReturnLengthSet>),
    }

    let model_ref: &dyn Model = model.as_ref();
    let tasks: Vec<Box<dyn FnOnce() -> Task + Send>> = vec![
        Box::new(|| Task::Rank(rank_witness(model_ref, &x_star, analysis.rank_rel_tol, derive_seed(seed, 0, 0xC0)))),
        Box::new(|| {
            Task::Globally(certify_globally_attracting(
                model_ref,
                &x_star,
                &origins,
                analysis.epsilon,
                analysis.k_max,
                &budget,
                derive_seed(seed, 1, 0xC1),
            ))
        }),
        Box::new(|| {
            Task::Steadily(certify_steadily_attracting(
                model_ref,
                &x_star,
                &origins,
                analysis.epsilon,
                analysis.t_start,
                analysis.span,
                &budget,
                derive_seed(seed, 2, 0xC2),
            ))
        }),
        Box::new(|| {
            Task::Returns(return_lengths(
                model_ref,
                &x_star,
                analysis.epsilon_return(),
                analysis.return_k_max,
                &budget,
                derive_seed(seed, 3, 0xC3),
            ))
        }),
    ];
    let mut rank = None;
    let mut globally = None;
    let mut steadily = None;
    let mut returns = None;
    for out in parallel_collect(tasks, worker_cap()) {
        match out {
            Task::Rank(r) => rank = Some(r?),
            Task::Globally(r) => globally = Some(r?),
            Task::Steadily(r) => steadily = Some(r?),
            Task::Returns(r) => returns = Some(r?),
        }
    }
    let rank = rank.expect("rank task ran");

    // Fallback steady route: a globally-attracting candidate with a
    // one-step stay-at-candidate control is steadily attracting under the
    // rank condition, even when the uniform window search came up short.
    if rank.ok
        && !steadily.as_ref().map_or(false, |c| c.is_established())
        && globally.as_ref().map_or(false, |c| c.is_established())
    {
        if let Some(fp) = certify_fixed_point(
            model_ref,
            &x_star,
            analysis.epsilon_return(),
            &budget,
            derive_seed(seed, 4, 0xC5),
        )? {
            steadily = Some(steadily_via_fixed_point(
                globally.as_ref().expect("established above"),
                fp,
            )?);
        }
    }

    let verdict = assemble_verdict(rank, globally, steadily, returns)?;
    let exit = if verdict.conclusion == Conclusion::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    Ok((
        VerdictReport {
            tool_version: TOOL_VERSION.to_string(),
            config: config.clone(),
            verdict,
            wall_clock_ms: started.elapsed().as_millis() as u64,
        },
        exit,
    ))
}

/// The `check-density` command: sampler-versus-density L1 comparisons at
/// the configured states.
pub fn cmd_check_density(
    config: &RunConfig,
) -> Result<(DensityReport, i32, Vec<(String, String)>), CliError> {
    let started = Instant::now();
    let density = config.density.as_ref().ok_or_else(|| {
        CliError::Config("the [density] section is required for check-density".into())
    })?;
    let model = config.model.build()?;
    let model_ref: &dyn Model = model.as_ref();

    let tasks: Vec<_> = density
        .states
        .iter()
        .enumerate()
        .map(|(i, coords)| {
            let coords = coords.clone();
            move || -> Result<DensityCheckOutcome, CliError> {
                let z = state(&coords)?;
                let check = empirical_density_check(
                    model_ref,
                    &z,
                    density.samples,
                    density.bins,
                    (density.range_lo, density.range_hi),
                    derive_seed(density.seed, i as u64, 0xD0),
                )?;
                Ok(DensityCheckOutcome {
                    state: coords,
                    l1_threshold: density.l1_threshold,
                    pass: check.l1_distance <= density.l1_threshold,
                    check,
                })
            }
        })
        .collect();
    let outcomes = parallel_collect(tasks, worker_cap())
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let all_pass = outcomes.iter().all(|o| o.pass);
    let mut side_files = Vec::new();
    if let Some(name) = &density.histogram_csv {
        side_files.push((name.clone(), crate::report::histogram_csv(&outcomes)));
    }
    Ok((
        DensityReport {
            tool_version: TOOL_VERSION.to_string(),
            config: config.clone(),
            all_pass,
            outcomes,
            wall_clock_ms: started.elapsed().as_millis() as u64,
        },
        if all_pass { EXIT_OK } else { EXIT_INCONCLUSIVE },
        side_files,
    ))
}

/// The `rate` command: two-route convergence-rate estimate, plus an
/// optional trajectory export.
pub fn cmd_rate(config: &RunConfig) -> Result<(RateReport, i32, Vec<(String, String)>), CliError> {
    let started = Instant::now();
    let rate = config
        .rate
        .as_ref()
        .ok_or_else(|| CliError::Config("the [rate] section is required for rate".into()))?;
    let chain = config.model.build_xnes()?;
    let x0 = state(&rate.x0)?;
    let estimate = xnes_convergence_rate(
        &chain,
        &x0,
        rate.sigma0,
        rate.iterations,
        rate.burn_in(),
        rate.seed,
    )?;

    let mut side_files = Vec::new();
    if let Some(name) = &rate.trajectory_csv {
        let steps = rate.trajectory_steps.unwrap_or(1000);
        let z0 = state(
            &rate
                .x0
                .iter()
                .map(|v| v / rate.sigma0)
                .collect::<Vec<_>>(),
        )?;
        let traj = run_chain(&chain, &z0, steps, derive_seed(rate.seed, 9, 0xE0))?;
        side_files.push((name.clone(), trajectory_csv(&traj)));
    }

    let report = RateReport {
        tool_version: TOOL_VERSION.to_string(),
        config: config.clone(),
        routes_agree: estimate.routes_agree_within(4.0),
        sign_verdict: sign_verdict(&estimate),
        estimate,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    };
    Ok((report, EXIT_OK, side_files))
}

/// The `paths` command: explicit find-path queries, certificates as JSON.
pub fn cmd_paths(config: &RunConfig) -> Result<(PathsReport, i32), CliError> {
    let started = Instant::now();
    let paths = config
        .paths
        .as_ref()
        .ok_or_else(|| CliError::Config("the [paths] section is required for paths".into()))?;
    let model = config.model.build()?;
    let model_ref: &dyn Model = model.as_ref();
    let budget = paths.budget();

    let tasks: Vec<_> = paths
        .query
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let q = q.clone();
            let budget = budget;
            move || -> Result<PathQueryOutcome, CliError> {
                let origin = state(&q.origin)?;
                let center = state(&q.center)?;
                let certificate = find_path(
                    model_ref,
                    &origin,
                    &center,
                    q.radius,
                    q.k,
                    &budget,
                    derive_seed(paths.seed, i as u64, 0xF0),
                )?;
                Ok(PathQueryOutcome {
                    query: q,
                    found: certificate.is_some(),
                    certificate,
                })
            }
        })
        .collect();
    let outcomes = parallel_collect(tasks, worker_cap())
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    Ok((
        PathsReport {
            tool_version: TOOL_VERSION.to_string(),
            config: config.clone(),
            outcomes,
            wall_clock_ms: started.elapsed().as_millis() as u64,
        },
        EXIT_OK,
    ))
}

//! Acceptance suite: one test per criterion, each printing a pass line and
//! enforcing its stated tolerance and runtime budget.

use std::process::Command;
use std::time::{Duration, Instant};

use chainverifier_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sv(c: &[f64]) -> StateVector {
    StateVector::from_slice(c).unwrap()
}

fn sampled_sequence(model: &dyn Model, x: &StateVector, k: usize, seed: u64) -> ControlSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = x.clone();
    let mut blocks = Vec::with_capacity(k);
    for _ in 0..k {
        let w = model.sample_control(&state, &mut rng);
        state = model.step(&state, &w);
        blocks.push(w);
    }
    ControlSequence::new(blocks).unwrap()
}

fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sv(&(0..n).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>())
}

fn xnes(n: usize, lambda: usize, mu: usize, kappa_m: f64, kappa_sigma: f64) -> XnesChain {
    XnesChain::new(
        XnesParams::equal_weights(n, lambda, mu, kappa_m, kappa_sigma, Objective::sphere())
            .unwrap(),
    )
    .unwrap()
}

fn assert_runtime(started: Instant, limit: Duration, what: &str) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= limit,
        "{what} exceeded its runtime budget: {elapsed:?} > {limit:?}"
    );
}

fn check_controllability_identity(model: &dyn Model, k: usize, draws: usize, seed: u64) {
    for d in 0..draws as u64 {
        let x = random_state(model.state_dim(), derive_seed(seed, d, 1));
        let ws = sampled_sequence(model, &x, k, derive_seed(seed, d, 2));
        let c = controllability_matrix(model, &x, &ws).unwrap();
        let fd = fd_path_jacobian(model, &x, &ws).unwrap();
        assert_eq!(c.mat.rows(), model.state_dim());
        assert_eq!(c.mat.cols(), model.control_dim() * k);
        for (a, b) in c.mat.data().iter().zip(fd.data()) {
            assert!(
                (a - b).abs() <= 1e-4 * (1.0 + b.abs()),
                "{} draw {d}: assembled {a} vs finite-difference {b}",
                model.name()
            );
        }
    }
}

#[test]
fn criterion_01_controllability_identity() {
    let started = Instant::now();
    check_controllability_identity(&RandomWalk::new(1), 3, 20, 101);
    check_controllability_identity(&SelectionWalk::new(Objective::sphere()), 2, 20, 102);
    for n in [1usize, 3] {
        for k in [1usize, 2] {
            let chain = xnes(n, 4, 2, 1.0, 1.0);
            check_controllability_identity(&chain, k, 20, 103 + (n * 10 + k) as u64);
        }
    }
    assert_runtime(started, Duration::from_secs(10), "criterion 1");
    println!("[PASS] criterion 1: controllability matrix matches the finite-difference Jacobian");
}

#[test]
fn criterion_02_xnes_rank_at_zero() {
    let started = Instant::now();

    // Rank n at a strictly-f-ordered block near 0, mu = 2.
    for n in [1usize, 2, 5] {
        let chain = xnes(n, 4, 2, 1.0, 1.0);
        let zero = sv(&vec![0.0; n]);
        // Blocks at distinct tiny radii are strictly ordered on the sphere.
        let mut flat = vec![0.0; 2 * n];
        flat[0] = 1e-3;
        flat[n] = 2e-3;
        let ws = ControlSequence::from_flat(&flat, 2 * n).unwrap();
        assert!(in_control_set(&chain, &zero, &ws).unwrap());
        let c = controllability_matrix(&chain, &zero, &ws).unwrap();
        let report = numeric_rank(&c.mat, DEFAULT_RANK_REL_TOL).unwrap();
        assert_eq!(report.numeric_rank, n, "rank at near-zero block, n={n}");
        assert!(rank_condition(&chain, &zero, &ws, DEFAULT_RANK_REL_TOL).unwrap());
    }

    // Exact zero block, mu = 1 (no ties): the Jacobian is the scaled
    // weighted-sum map kappa_m e^{kappa_sigma/2} (sum_i beta_i h_i).
    for n in [1usize, 2, 5] {
        for (kappa_m, kappa_sigma) in [(1.0, 1.0), (1.3, 0.7)] {
            let chain = xnes(n, 2, 1, kappa_m, kappa_sigma);
            let zero = sv(&vec![0.0; n]);
            let w0 = ControlBlock::new(vec![0.0; n]).unwrap();
            let jac = jacobian_w(&chain, &zero, &w0).unwrap();
            let scale = kappa_m * (kappa_sigma / 2.0).exp();
            for i in 0..n {
                for j in 0..n {
                    let expected = if i == j { scale } else { 0.0 };
                    let got = jac.get(i, j);
                    assert!(
                        (got - expected).abs() <= 1e-6 * expected.abs().max(1e-6),
                        "n={n} entry ({i},{j}): {got} vs {expected}"
                    );
                }
            }
            // The zero block is in O for mu = 1, so the rank condition
            // itself is decidable right at the candidate.
            let ws = ControlSequence::single(w0);
            assert!(rank_condition(&chain, &zero, &ws, DEFAULT_RANK_REL_TOL).unwrap());
        }
    }

    // mu = 2 near zero: the Jacobian approaches
    // kappa_m e^{kappa_sigma/2} [beta_1 I | beta_2 I].
    let n = 2;
    let chain = xnes(n, 4, 2, 1.0, 1.0);
    let zero = sv(&[0.0, 0.0]);
    let mut flat = vec![0.0; 2 * n];
    flat[0] = 1e-5;
    flat[n] = 2e-5;
    let w = ControlBlock::new(flat).unwrap();
    let jac = jacobian_w(&chain, &zero, &w).unwrap();
    let scale = 1.0_f64 * (0.5_f64).exp();
    for i in 0..n {
        for j in 0..2 * n {
            let beta = 0.5;
            let expected = if j % n == i { scale * beta } else { 0.0 };
            assert!(
                (jac.get(i, j) - expected).abs() <= 1e-3,
                "near-zero mu=2 entry ({i},{j}): {} vs {expected}",
                jac.get(i, j)
            );
        }
    }

    assert_runtime(started, Duration::from_secs(5), "criterion 2");
    println!("[PASS] criterion 2: xNES rank condition and exact Jacobian at the zero block");
}

#[test]
fn criterion_03_toy_steady_attraction() {
    let started = Instant::now();
    let origins: Vec<StateVector> = halton_box(&[-10.0], &[10.0], 20)
        .into_iter()
        .map(|c| StateVector::new(c).unwrap())
        .collect();
    let budget = SearchBudget::default();

    // Random walk: exact hits of every length 1..=5 into B(0, 1e-9).
    let rw = RandomWalk::new(1);
    let cert = certify_steadily_attracting(&rw, &sv(&[0.0]), &origins, 1e-9, 1, 4, &budget, 31)
        .unwrap();
    assert!(cert.is_established(), "failures: {:?}", cert.failures);
    assert_eq!(cert.paths.len(), origins.len() * 5);
    for p in &cert.paths {
        assert_eq!(p.achieved_distance, 0.0, "analytic hints hit exactly");
    }

    // Selection walk: found by search (the model exposes no hint).
    let sel = SelectionWalk::new(Objective::sphere());
    let cert = certify_steadily_attracting(&sel, &sv(&[0.0]), &origins, 0.1, 1, 4, &budget, 32)
        .unwrap();
    assert!(cert.is_established(), "failures: {:?}", cert.failures);
    for p in &cert.paths {
        assert!(is_path(&sel, &p.origin, &p.sequence, &p.target_center, p.radius).unwrap());
    }

    assert_runtime(started, Duration::from_secs(30), "criterion 3");
    println!("[PASS] criterion 3: toy models steadily attracting at 0 for 20 origins");
}

fn run_binary(args: &[&str]) -> (String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_chainverifier"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

#[test]
fn criterion_04_xnes_steady_attraction_and_analyze() {
    let started = Instant::now();
    let budget = SearchBudget::default();
    for n in [1usize, 3] {
        let chain = xnes(n, 4, 2, 1.0, 1.0);
        let zero = sv(&vec![0.0; n]);
        let origins: Vec<StateVector> = halton_box(&vec![-5.0; n], &vec![5.0; n], 20)
            .into_iter()
            .map(|c| StateVector::new(c).unwrap())
            .collect();
        let glob =
            certify_globally_attracting(&chain, &zero, &origins, 0.1, 2, &budget, 41).unwrap();
        assert!(glob.is_established(), "n={n} failures: {:?}", glob.failures);
        let steady =
            certify_steadily_attracting(&chain, &zero, &origins, 0.1, 1, 3, &budget, 42).unwrap();
        assert!(steady.is_established(), "n={n} failures: {:?}", steady.failures);
    }

    // cmd_analyze end to end through the binary.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("xnes.toml");
    std::fs::write(
        &config,
        r#"
[model]
kind = "xnes"
n = 3
lambda = 4
mu = 2
objective = "sphere"

[analysis]
seed = 7
x_star = [0.0, 0.0, 0.0]
epsilon = 0.1
k_max = 2
t_start = 1
span = 3
origin_box_lo = [-5.0, -5.0, -5.0]
origin_box_hi = [5.0, 5.0, 5.0]
origin_count = 20
"#,
    )
    .unwrap();
    let (stdout, code) = run_binary(&[
        "analyze",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(code, 0, "analyze must be conclusive");
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(
        report["verdict"]["conclusion"],
        "aperiodic-phi-irreducible-T-chain"
    );

    assert_runtime(started, Duration::from_secs(120), "criterion 4");
    println!("[PASS] criterion 4: xNES steadily attracting at 0; analyze concludes aperiodicity");
}

#[test]
fn criterion_05_density_oracles() {
    let started = Instant::now();

    let rw = RandomWalk::new(1);
    let check = empirical_density_check(&rw, &sv(&[0.0]), 200_000, 80, (-4.0, 4.0), 51).unwrap();
    assert!(check.l1_distance <= 0.02, "random walk L1 {}", check.l1_distance);

    let sel = SelectionWalk::new(Objective::sphere());
    let check = empirical_density_check(&sel, &sv(&[0.0]), 200_000, 80, (-4.0, 4.0), 52).unwrap();
    assert!(check.l1_distance <= 0.03, "selection walk L1 {}", check.l1_distance);

    let chain = xnes(1, 2, 1, 1.0, 1.0);
    let check = empirical_density_check(&chain, &sv(&[1.0]), 100_000, 80, (-4.0, 4.0), 53).unwrap();
    assert!(check.l1_distance <= 0.05, "xnes L1 {}", check.l1_distance);

    // Normalization: the selection density integrates to 1.
    let params = XnesParams::equal_weights(2, 4, 2, 1.0, 1.0, Objective::sphere()).unwrap();
    let (mass, se) = selection_density_mass(&params, &[0.3, -0.8], 40_000, 54);
    assert!(
        (mass - 1.0).abs() <= 4.0 * se,
        "selection density mass {mass} +- {se}"
    );

    assert_runtime(started, Duration::from_secs(60), "criterion 5");
    println!("[PASS] criterion 5: sampler/density L1 distances and density normalization");
}

#[test]
fn criterion_06_exact_q_values() {
    let obj = Objective::sphere();
    // Q = P(N^2 <= 1) = 2 Phi(1) - 1.
    let exact = q_value(&obj, &[0.0], &[1.0], 10_000, 61).unwrap();
    assert!(exact.exact);
    assert!(
        (exact.value - 0.6826894921370859).abs() < 1e-9,
        "exact Q {}",
        exact.value
    );
    let negated = q_value(&obj, &[0.0], &[-1.0], 10_000, 61).unwrap();
    assert!((negated.value - exact.value).abs() < 1e-12);

    let mc = q_value_monte_carlo(&obj, &[0.0], &[1.0], 50_000, 62).unwrap();
    assert!(!mc.exact);
    assert!(mc.std_error > 0.0);
    assert!(
        (mc.value - exact.value).abs() <= 4.0 * mc.std_error,
        "MC {} vs exact {} (se {})",
        mc.value,
        exact.value,
        mc.std_error
    );
    println!("[PASS] criterion 6: exact quantile evaluator and Monte-Carlo agreement");
}

#[test]
fn criterion_07_rate_consistency() {
    let started = Instant::now();

    let chain = xnes(5, 10, 5, 1.0, 1.0);
    let x0 = sv(&[10.0, 0.0, 0.0, 0.0, 0.0]);
    let est = xnes_convergence_rate(&chain, &x0, 1.0, 20_000, 4_000, 71).unwrap();
    assert!(est.routes_agree_within(4.0), "routes {} vs {}", est.per_iteration_log_step_ratio, est.expectation_route);
    assert!(
        est.per_iteration_log_step_ratio < 0.0,
        "sphere run must contract: {}",
        est.per_iteration_log_step_ratio
    );

    // lambda = mu null case: no selection pressure, rate 0 within noise.
    let null_chain = xnes(5, 10, 10, 1.0, 1.0);
    let est = xnes_convergence_rate(&null_chain, &x0, 1.0, 20_000, 4_000, 72).unwrap();
    assert!(
        est.expectation_route.abs() <= 4.0 * est.se_route_b,
        "null-case route B {} +- {}",
        est.expectation_route,
        est.se_route_b
    );

    assert_runtime(started, Duration::from_secs(120), "criterion 7");
    println!("[PASS] criterion 7: rate routes agree, sphere contracts, null case is flat");
}

#[test]
fn criterion_08_gcd_machinery() {
    // Exhaustive: every nonempty subset of {1..12}.
    for mask in 1u32..(1 << 12) {
        let lengths: Vec<usize> = (0..12).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect();
        let set = ReturnLengthSet::from_lengths(sv(&[0.0]), lengths.clone());
        // Oracle: largest d dividing every member.
        let oracle = (1..=*lengths.iter().min().unwrap())
            .filter(|d| lengths.iter().all(|l| l % d == 0))
            .max()
            .unwrap() as u64;
        assert_eq!(set.gcd, oracle, "subset {lengths:?}");
        // A member coprime to the gcd forces gcd 1.
        for extra in 1..=12usize {
            if gcd(set.gcd, extra as u64) == 1 {
                let mut more = lengths.clone();
                more.push(extra);
                assert_eq!(ReturnLengthSet::from_lengths(sv(&[0.0]), more).gcd, 1);
                break;
            }
        }
    }

    // Period-2 toy: verified return paths and simulated returns agree on 2.
    let alt = AlternatingModel::new();
    let x_star = sv(&[1.0]);
    let by_search =
        return_lengths(&alt, &x_star, 0.1, 6, &SearchBudget::default(), 81).unwrap();
    assert_eq!(by_search.lengths, vec![2, 4, 6]);
    assert_eq!(by_search.gcd, 2);
    let by_simulation = empirical_return_periods(&alt, &x_star, 0.15, 200, 82).unwrap();
    assert_eq!(by_simulation.gcd, 2);

    println!("[PASS] criterion 8: gcd machinery exhaustive over subsets of 1..=12; period-2 toy");
}

#[test]
fn criterion_09_negative_control_and_monotonicity() {
    // The control-ignoring model certifies nothing.
    let frozen = FrozenModel::new(1);
    let x_star = sv(&[1.0]);
    let origins = [sv(&[0.0]), sv(&[2.0])];
    let budget = SearchBudget::default();
    let glob =
        certify_globally_attracting(&frozen, &x_star, &origins, 0.1, 3, &budget, 91).unwrap();
    assert!(!glob.is_established());
    assert_eq!(glob.failures.len(), 2);
    let witness = find_rank_witness(&frozen, &x_star, DEFAULT_RANK_REL_TOL, 92)
        .unwrap()
        .expect("sampled witnesses are admissible");
    assert!(!witness.ok, "frozen model cannot be full rank");
    let verdict = assemble_verdict(witness.clone(), Some(glob.clone()), None, None).unwrap();
    assert_eq!(verdict.conclusion, Conclusion::Inconclusive);

    // Through the binary: exit code 2 and the inconclusive conclusion.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("frozen.toml");
    std::fs::write(
        &config,
        r#"
[model]
kind = "external"
external = "frozen"
n = 1

[analysis]
seed = 5
x_star = [1.0]
epsilon = 0.1
k_max = 2
t_start = 1
span = 2
origin_box_lo = [-3.0]
origin_box_hi = [3.0]
origin_count = 6
restarts = 8
refine_iters = 40
"#,
    )
    .unwrap();
    let (stdout, code) = run_binary(&[
        "analyze",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(code, 2, "inconclusive exit code");
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["verdict"]["conclusion"], "inconclusive");

    // Monotonicity: removing evidence never upgrades the conclusion.
    let rw = RandomWalk::new(1);
    let zero = sv(&[0.0]);
    let rank = find_rank_witness(&rw, &zero, DEFAULT_RANK_REL_TOL, 93)
        .unwrap()
        .unwrap();
    let origins: Vec<StateVector> = halton_box(&[-3.0], &[3.0], 6)
        .into_iter()
        .map(|c| StateVector::new(c).unwrap())
        .collect();
    let glob = certify_globally_attracting(&rw, &zero, &origins, 1e-6, 3, &budget, 94).unwrap();
    let steady =
        certify_steadily_attracting(&rw, &zero, &origins, 1e-6, 1, 3, &budget, 94).unwrap();
    let returns = return_lengths(&rw, &zero, 1e-7, 5, &budget, 94).unwrap();
    let full = assemble_verdict(
        rank.clone(),
        Some(glob.clone()),
        Some(steady.clone()),
        Some(returns.clone()),
    )
    .unwrap()
    .conclusion;
    for mask in 1..16u32 {
        let mut r = rank.clone();
        if mask & 1 != 0 {
            r.ok = false;
        }
        let g = (mask & 2 == 0).then(|| glob.clone());
        let s = (mask & 4 == 0).then(|| steady.clone());
        let ret = (mask & 8 == 0).then(|| returns.clone());
        let v = assemble_verdict(r, g, s, ret).unwrap();
        assert!(v.conclusion <= full, "mask {mask} upgraded the conclusion");
    }
    println!("[PASS] criterion 9: negative control inconclusive; verdict monotone");
}

#[test]
fn criterion_10_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rw.toml");
    std::fs::write(
        &config,
        r#"
[model]
kind = "random-walk"
n = 1

[analysis]
seed = 42
x_star = [0.0]
epsilon = 0.001
k_max = 3
t_start = 1
span = 4
origin_box_lo = [-10.0]
origin_box_hi = [10.0]
origin_count = 10
"#,
    )
    .unwrap();
    let normalize = |raw: &str| -> String {
        let mut v: serde_json::Value = serde_json::from_str(raw).unwrap();
        v["wall_clock_ms"] = serde_json::json!(0);
        serde_json::to_string_pretty(&v).unwrap()
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let (stdout_a, code_a) = run_binary(&[
        "analyze",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
        "--quiet",
    ]);
    let (stdout_b, code_b) = run_binary(&[
        "analyze",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(code_a, 0);
    assert_eq!(code_b, 0);
    assert_eq!(
        normalize(&stdout_a),
        normalize(&stdout_b),
        "stdout reports must be byte-identical modulo wall clock"
    );
    let file_a = std::fs::read_to_string(out_a.join("analyze-report.json")).unwrap();
    let file_b = std::fs::read_to_string(out_b.join("analyze-report.json")).unwrap();
    assert_eq!(normalize(&file_a), normalize(&file_b));

    // A different thread cap must not change results either.
    let output = Command::new(env!("CARGO_BIN_EXE_chainverifier"))
        .args([
            "analyze",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("c").to_str().unwrap(),
            "--quiet",
        ])
        .env("CHAINVERIFIER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(
        normalize(&stdout_a),
        normalize(&String::from_utf8_lossy(&output.stdout)),
        "results must not depend on the worker count"
    );
    println!("[PASS] criterion 10: byte-identical reports across runs and thread counts");
}

//! The built-in chain models: additive random walk, selection-based random
//! walk, the xNES normalized chain, and two adversarial models used as
//! negative controls.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::stats::{self, log_normal_pdf_nd, noncentral_chi_square_cdf};

mod negative;
mod random_walk;
mod selection_walk;
mod xnes;

pub use negative::{AlternatingModel, FrozenModel};
pub use random_walk::RandomWalk;
pub use selection_walk::SelectionWalk;
pub use xnes::XnesChain;

/// Default Monte-Carlo sample count for estimated quantile terms.
pub const DEFAULT_Q_SAMPLES: usize = 20_000;

/// Fixed stream for Monte-Carlo density pools, so density evaluation is a
/// deterministic function of its arguments (common random numbers).
pub(crate) const MC_POOL_SEED: u64 = 0x584e_4553;

/// How an objective was declared, which decides whether exact quantile
/// evaluation is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    /// f(x) = ||x||^2; exact quantiles via the noncentral chi-square CDF.
    Sphere,
    /// f(x) = ||x||; shares the sphere's exact quantiles.
    Norm,
    /// Black-box objective; quantiles are Monte-Carlo estimated.
    Custom,
}

/// An objective function together with the user-asserted hypotheses the
/// paper-level propositions need. The flags are assertions, not facts the
/// toolkit proves; `check_scaling_invariance` offers a statistical
/// spot-check.
pub struct Objective {
    name: String,
    eval: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    kind: ObjectiveKind,
    /// Level sets asserted Lebesgue-negligible.
    pub negligible_level_sets: bool,
    /// Scaling-invariant about the origin, Eq.-style pairwise comparisons.
    pub scaling_invariant_about_zero: bool,
}

impl core::fmt::Debug for Objective {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("negligible_level_sets", &self.negligible_level_sets)
            .field(
                "scaling_invariant_about_zero",
                &self.scaling_invariant_about_zero,
            )
            .finish()
    }
}

impl Objective {
    /// The sphere function f(x) = ||x||^2.
    pub fn sphere() -> Self {
        Objective {
            name: "sphere".into(),
            eval: Box::new(|x| x.iter().map(|v| v * v).sum()),
            kind: ObjectiveKind::Sphere,
            negligible_level_sets: true,
            scaling_invariant_about_zero: true,
        }
    }

    /// The Euclidean norm f(x) = ||x||.
    pub fn norm() -> Self {
        Objective {
            name: "norm".into(),
            eval: Box::new(|x| Float::sqrt(x.iter().map(|v| v * v).sum::<f64>())),
            kind: ObjectiveKind::Norm,
            negligible_level_sets: true,
            scaling_invariant_about_zero: true,
        }
    }

    /// A user objective with explicitly asserted hypotheses.
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        negligible_level_sets: bool,
        scaling_invariant_about_zero: bool,
    ) -> Self {
        Objective {
            name: name.into(),
            eval: Box::new(eval),
            kind: ObjectiveKind::Custom,
            negligible_level_sets,
            scaling_invariant_about_zero,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Whether P(f(z + N) <= f(z + w)) has a closed-form evaluator.
    pub fn has_exact_q(&self) -> bool {
        matches!(self.kind, ObjectiveKind::Sphere | ObjectiveKind::Norm)
    }
}

/// Parameters of the xNES normalized chain.
#[derive(Debug)]
pub struct XnesParams {
    pub n: usize,
    pub lambda: usize,
    pub mu: usize,
    /// Selection weights beta_1..beta_mu, summing to 1.
    pub weights: Vec<f64>,
    pub kappa_m: f64,
    pub kappa_sigma: f64,
    pub objective: Objective,
    /// Monte-Carlo sample count for estimated quantile terms.
    pub q_samples: usize,
}

impl XnesParams {
    /// Equal weights beta_i = 1/mu.
    pub fn equal_weights(
        n: usize,
        lambda: usize,
        mu: usize,
        kappa_m: f64,
        kappa_sigma: f64,
        objective: Objective,
    ) -> Result<Self> {
        let weights = alloc::vec![1.0 / mu as f64; mu];
        Self::new(n, lambda, mu, weights, kappa_m, kappa_sigma, objective)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        lambda: usize,
        mu: usize,
        weights: Vec<f64>,
        kappa_m: f64,
        kappa_sigma: f64,
        objective: Objective,
    ) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidParameter("n must be positive".into()));
        }
        if mu == 0 || mu > lambda {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "mu must satisfy 1 <= mu <= lambda, got mu={mu}, lambda={lambda}"
            )));
        }
        if weights.len() != mu {
            return Err(CoreError::DimensionMismatch {
                what: "weights",
                expected: mu,
                got: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        if !(kappa_m > 0.0) || !(kappa_sigma > 0.0) {
            return Err(CoreError::InvalidParameter(
                "kappa_m and kappa_sigma must be positive".into(),
            ));
        }
        Ok(XnesParams {
            n,
            lambda,
            mu,
            weights,
            kappa_m,
            kappa_sigma,
            objective,
            q_samples: DEFAULT_Q_SAMPLES,
        })
    }
}

/// Ranked candidates of one selection event.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Permutation of candidate indices (0-based) sorted by objective value;
    /// ties broken by natural index order.
    pub permutation: Vec<usize>,
    /// The first `mu` candidate vectors in ranked order.
    pub selected: Vec<Vec<f64>>,
}

/// Rank `candidates` by f(z + u) and keep the best `mu`.
pub fn select_candidates(
    objective: &Objective,
    z: &[f64],
    candidates: &[Vec<f64>],
    mu: usize,
) -> SelectionOutcome {
    let values: Vec<f64> = candidates
        .iter()
        .map(|u| {
            let shifted: Vec<f64> = z.iter().zip(u).map(|(a, b)| a + b).collect();
            objective.eval(&shifted)
        })
        .collect();
    let mut permutation: Vec<usize> = (0..candidates.len()).collect();
    permutation.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let selected = permutation
        .iter()
        .take(mu)
        .map(|&i| candidates[i].clone())
        .collect();
    SelectionOutcome {
        permutation,
        selected,
    }
}

/// A quantile estimate with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// Exact P(f(z + N) <= f(z + w)) for radially monotone objectives:
/// ||z + N||^2 follows a noncentral chi-square law with `n` degrees of
/// freedom and noncentrality ||z||^2.
pub fn sphere_q_exact(z: &[f64], w: &[f64]) -> f64 {
    let lambda: f64 = z.iter().map(|v| v * v).sum();
    let x: f64 = z.iter().zip(w).map(|(a, b)| (a + b) * (a + b)).sum();
    noncentral_chi_square_cdf(x, z.len() as f64, lambda)
}

/// P(f(z + N) <= f(z + w)): exact when the objective permits, Monte-Carlo
/// otherwise.
pub fn q_value(
    objective: &Objective,
    z: &[f64],
    w: &[f64],
    samples: usize,
    seed: u64,
) -> Result<QEstimate> {
    if objective.has_exact_q() {
        return Ok(QEstimate {
            value: sphere_q_exact(z, w),
            std_error: 0.0,
            exact: true,
        });
    }
    q_value_monte_carlo(objective, z, w, samples, seed)
}

/// Monte-Carlo frequency of f(z + N) <= f(z + w) over `samples` standard
/// normal draws, with its binomial standard error.
pub fn q_value_monte_carlo(
    objective: &Objective,
    z: &[f64],
    w: &[f64],
    samples: usize,
    seed: u64,
) -> Result<QEstimate> {
    if samples < 1000 {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "q_value needs at least 1000 samples, got {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fw = {
        let shifted: Vec<f64> = z.iter().zip(w).map(|(a, b)| a + b).collect();
        objective.eval(&shifted)
    };
    let n = z.len();
    let mut hits = 0usize;
    let mut point = alloc::vec![0.0; n];
    for _ in 0..samples {
        for (i, p) in point.iter_mut().enumerate() {
            *p = z[i] + rng.sample::<f64, _>(StandardNormal);
        }
        if objective.eval(&point) <= fw {
            hits += 1;
        }
    }
    let q = hits as f64 / samples as f64;
    Ok(QEstimate {
        value: q,
        std_error: (q * (1.0 - q) / samples as f64).sqrt(),
        exact: false,
    })
}

/// The upper tail 1 - Q in log space, with the linear-scale standard error
/// of its Monte-Carlo estimate (0 for exact evaluators).
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogTail {
    pub log_value: f64,
    pub linear_se: f64,
}

/// ln P(f(z + N) > f(z + w)) for radially monotone objectives, via the
/// noncentral chi-square survival function; stays finite deep in the tail.
pub(crate) fn log_sphere_q_tail(z: &[f64], w: &[f64]) -> f64 {
    let lambda: f64 = z.iter().map(|v| v * v).sum();
    let x: f64 = z.iter().zip(w).map(|(a, b)| (a + b) * (a + b)).sum();
    crate::stats::log_noncentral_chi_square_sf(x, z.len() as f64, lambda)
}

/// ln of the selection density of the mu best of lambda standard normal
/// steps, through a caller-provided log-tail evaluator. Never constructs
/// the linear-space product, so the value stays meaningful where that
/// product would underflow.
pub(crate) fn log_selection_density_with(
    params: &XnesParams,
    z: &[f64],
    blocks: &[&[f64]],
    tail_at: impl Fn(&[f64]) -> LogTail,
) -> f64 {
    let (lambda, mu, n) = (params.lambda, params.mu, params.n);
    debug_assert_eq!(blocks.len(), mu);
    if mu > 1 {
        let mut prev = f64::NEG_INFINITY;
        for b in blocks {
            let shifted: Vec<f64> = z.iter().zip(*b).map(|(a, v)| a + v).collect();
            let f = params.objective.eval(&shifted);
            if !(f > prev) {
                return f64::NEG_INFINITY;
            }
            prev = f;
        }
    }
    let mut log_p = libm::lgamma(lambda as f64 + 1.0) - libm::lgamma((lambda - mu) as f64 + 1.0);
    if lambda > mu {
        let tail = tail_at(blocks[mu - 1]);
        // Monte-Carlo tails are only trusted three standard errors away
        // from the boundary of the control set.
        if tail.linear_se > 0.0 && Float::exp(tail.log_value) <= 3.0 * tail.linear_se {
            return f64::NEG_INFINITY;
        }
        if !(tail.log_value > f64::NEG_INFINITY) {
            return f64::NEG_INFINITY;
        }
        log_p += (lambda - mu) as f64 * tail.log_value;
    }
    for b in blocks {
        debug_assert_eq!(b.len(), n);
        log_p += log_normal_pdf_nd(b);
    }
    log_p
}

fn log_selection_density(params: &XnesParams, z: &[f64], w: &[f64]) -> Result<f64> {
    if w.len() != params.n * params.mu {
        return Err(CoreError::DimensionMismatch {
            what: "selection density control",
            expected: params.n * params.mu,
            got: w.len(),
        });
    }
    let blocks: Vec<&[f64]> = w.chunks(params.n).collect();
    if params.objective.has_exact_q() {
        Ok(log_selection_density_with(params, z, &blocks, |b| LogTail {
            log_value: log_sphere_q_tail(z, b),
            linear_se: 0.0,
        }))
    } else {
        let pool = draw_normal_pool(params.q_samples, params.n, MC_POOL_SEED);
        Ok(log_selection_density_with(params, z, &blocks, |b| {
            tail_from_pool(&params.objective, z, b, &pool, params.n)
        }))
    }
}

/// Selection density p_z(w) for the xNES chain, w given as mu concatenated
/// blocks of dimension n. Uses the exact quantile evaluator when the
/// objective permits, Monte-Carlo with a fixed internal stream otherwise.
pub fn selection_density(params: &XnesParams, z: &[f64], w: &[f64]) -> Result<f64> {
    Ok(Float::exp(log_selection_density(params, z, w)?))
}

/// Fixed pool of standard normal draws, flattened `count` x `dim`.
pub(crate) fn draw_normal_pool(count: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Tail estimate against a fixed pool (common random numbers keep the
/// density a deterministic, search-friendly function).
pub(crate) fn tail_from_pool(
    objective: &Objective,
    z: &[f64],
    w: &[f64],
    pool: &[f64],
    dim: usize,
) -> LogTail {
    let fw = {
        let shifted: Vec<f64> = z.iter().zip(w).map(|(a, b)| a + b).collect();
        objective.eval(&shifted)
    };
    let samples = pool.len() / dim;
    let mut above = 0usize;
    let mut point = alloc::vec![0.0; dim];
    for s in 0..samples {
        for i in 0..dim {
            point[i] = z[i] + pool[s * dim + i];
        }
        if objective.eval(&point) > fw {
            above += 1;
        }
    }
    let tail = above as f64 / samples as f64;
    LogTail {
        log_value: Float::ln(tail),
        linear_se: (tail * (1.0 - tail) / samples as f64).sqrt(),
    }
}

/// Monte-Carlo mass of the selection density under its own base measure:
/// the importance-sampled integral of p_z over mu-fold standard normal
/// blocks, which must equal 1 for a proper density. Returns (mean, se).
pub fn selection_density_mass(
    params: &XnesParams,
    z: &[f64],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = params.n * params.mu;
    let mut weights = Vec::with_capacity(samples);
    for _ in 0..samples {
        let w: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let p = selection_density(params, z, &w).expect("dims fixed");
        let base = log_normal_pdf_nd(&w).exp();
        weights.push(p / base);
    }
    let mean = stats::mean(&weights);
    let var = weights.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (samples as f64 - 1.0);
    (mean, (var / samples as f64).sqrt())
}

/// One violating triple found by the scaling-invariance spot-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingViolation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
}

/// Result of the scaling-invariance spot-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub passed: bool,
    pub trials: usize,
    pub violations: Vec<ScalingViolation>,
}

/// Statistical spot-check of scaling invariance about `x_star`: random
/// triples (x, y, rho) must preserve pairwise comparisons under scaling.
pub fn check_scaling_invariance(
    objective: &Objective,
    x_star: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ScalingCheck> {
    if trials == 0 {
        return Err(CoreError::InvalidParameter(
            "trials must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = x_star.len();
    let mut violations = Vec::new();
    for _ in 0..trials {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            x_star
                .iter()
                .map(|c| c + 3.0 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let rho = Float::exp(rng.gen_range(-3.0..3.0));
        let scale = |p: &[f64]| -> Vec<f64> {
            (0..dim).map(|i| x_star[i] + rho * (p[i] - x_star[i])).collect()
        };
        let before = objective.eval(&x) <= objective.eval(&y);
        let after = objective.eval(&scale(&x)) <= objective.eval(&scale(&y));
        if before != after {
            if violations.len() < 16 {
                violations.push(ScalingViolation { x, y, rho });
            } else {
                break;
            }
        }
    }
    Ok(ScalingCheck {
        passed: violations.is_empty(),
        trials,
        violations,
    })
}

/// Draw a standard normal vector of the given length.
pub(crate) fn standard_normal_vec(rng: &mut dyn RngCore, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_q_is_zero_at_the_optimum() {
        // P(||N||^2 <= 0) = 0 for any dimension.
        assert_eq!(sphere_q_exact(&[0.0], &[0.0]), 0.0);
        assert_eq!(sphere_q_exact(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]), 0.0);
        let q = q_value(&Objective::sphere(), &[0.0], &[0.0], 1000, 0).unwrap();
        assert!(q.exact);
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn monte_carlo_q_requires_enough_samples() {
        let err =
            q_value_monte_carlo(&Objective::custom("id", |x| x[0], true, false), &[0.0], &[0.0], 10, 0)
                .unwrap_err();
        assert!(matches!(err, CoreError::InvalidParameter(_)));
    }

    #[test]
    fn single_offspring_density_is_plain_normal() {
        // lambda = mu = 1: no selection at all.
        let params =
            XnesParams::new(2, 1, 1, alloc::vec![1.0], 1.0, 1.0, Objective::sphere()).unwrap();
        let w = [0.3, -0.7];
        let d = selection_density(&params, &[5.0, 1.0], &w).unwrap();
        assert!((d - log_normal_pdf_nd(&w).exp()).abs() < 1e-15);
    }

    #[test]
    fn best_of_two_density_at_the_optimum() {
        // lambda = 2, mu = 1, z = 0, w = 0: Q = 0, so p = 2 p_N(0).
        for n in [1usize, 3] {
            let params = XnesParams::new(
                n,
                2,
                1,
                alloc::vec![1.0],
                1.0,
                1.0,
                Objective::sphere(),
            )
            .unwrap();
            let z = alloc::vec![0.0; n];
            let w = alloc::vec![0.0; n];
            let d = selection_density(&params, &z, &w).unwrap();
            let expected = 2.0 * log_normal_pdf_nd(&w).exp();
            assert!((d - expected).abs() < 1e-15, "n={n}: {d} vs {expected}");
        }
    }

    #[test]
    fn full_selection_density_is_factorial_times_normals() {
        // mu = lambda: density = lambda! 1{ordered} prod p_N(w^i).
        let params = XnesParams::new(
            1,
            3,
            3,
            alloc::vec![0.5, 0.3, 0.2],
            1.0,
            1.0,
            Objective::sphere(),
        )
        .unwrap();
        let z = [0.0];
        let ordered = [0.1, -0.5, 1.2];
        let d = selection_density(&params, &z, &ordered).unwrap();
        let expected = 6.0 * log_normal_pdf_nd(&ordered).exp();
        assert!((d - expected).abs() < 1e-12 * expected, "{d} vs {expected}");
        let misordered = [1.2, 0.1, -0.5];
        assert_eq!(selection_density(&params, &z, &misordered).unwrap(), 0.0);
    }

    #[test]
    fn selection_orders_candidates_with_natural_tie_break() {
        let obj = Objective::sphere();
        let candidates = alloc::vec![
            alloc::vec![2.0],
            alloc::vec![-1.0],
            alloc::vec![1.0], // ties with -1.0 on the sphere
            alloc::vec![0.5],
        ];
        let out = select_candidates(&obj, &[0.0], &candidates, 2);
        // f-values: 4, 1, 1, 0.25; the tie between indices 1 and 2 keeps
        // natural order.
        assert_eq!(out.permutation, alloc::vec![3, 1, 2, 0]);
        assert_eq!(out.selected, alloc::vec![alloc::vec![0.5], alloc::vec![-1.0]]);
    }

    #[test]
    fn scaling_invariance_spot_check() {
        let sphere = Objective::sphere();
        let check = check_scaling_invariance(&sphere, &[0.0, 0.0], 500, 7).unwrap();
        assert!(check.passed);

        // Non-monotone radial profile r + 2 sin r is not scaling-invariant.
        let wavy = Objective::custom(
            "wavy",
            |x| {
                let r = Float::sqrt(x.iter().map(|v| v * v).sum::<f64>());
                r + 2.0 * Float::sin(r)
            },
            true,
            false,
        );
        let check = check_scaling_invariance(&wavy, &[0.0, 0.0], 500, 7).unwrap();
        assert!(!check.passed);
        // The reported triple really violates the equivalence.
        let v = &check.violations[0];
        let f = |p: &[f64]| {
            let r = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            r + 2.0 * r.sin()
        };
        let scale = |p: &[f64]| p.iter().map(|c| c * v.rho).collect::<Vec<_>>();
        let before = f(&v.x) <= f(&v.y);
        let after = f(&scale(&v.x)) <= f(&scale(&v.y));
        assert_ne!(before, after);

        let err = check_scaling_invariance(&sphere, &[0.0], 0, 7).unwrap_err();
        assert!(matches!(err, CoreError::InvalidParameter(_)));
    }
}

//! Path search into target neighborhoods, attractivity certificates,
//! return-length gcd machinery and final verdict assembly.
//!
//! Everything here produces *sampled evidence*: a certificate records
//! concrete control sequences that the core operations re-validate, and a
//! missing path is an absence of evidence, never a disproof.

use alloc::string::String;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::RankEvidence;
use crate::error::{CoreError, Result};
use crate::model::{
    extended_density, extended_log_density, extended_transition, in_control_set, is_path,
    ControlSequence, Model, StateVector,
};
use crate::stats::{derive_seed, gcd_of};

/// Caveat attached verbatim to every verdict.
pub const VERDICT_CAVEAT: &str = "certificates are sampled numerical evidence over finitely many \
origins, path lengths and search budgets, not proofs";

const HINT_STREAM: u64 = 0xA1;
const RESTART_STREAM: u64 = 0xB2;

/// Budget of the multi-start path search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Number of random restarts per (origin, length) query.
    pub restarts: usize,
    /// Coordinate-descent sweeps per restart.
    pub refine_iters: usize,
    /// Step-size shrink factor applied when a sweep yields no improvement.
    pub shrink: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            restarts: 64,
            refine_iters: 200,
            shrink: 0.5,
        }
    }
}

/// Evidence that a concrete control sequence is a k-steps path from
/// `origin` into `B(target_center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCertificate {
    pub origin: StateVector,
    pub sequence: ControlSequence,
    pub target_center: StateVector,
    pub radius: f64,
    pub achieved_distance: f64,
    /// Linear-space extended density; may underflow to 0 for extreme
    /// sequences whose true density is positive but below f64 range.
    pub density_value: f64,
    /// ln of the extended density, the authoritative positivity witness.
    pub log_density_value: f64,
}

impl PathCertificate {
    /// Validate a candidate sequence against the path predicate and record
    /// the achieved distance and density. Returns `None` when the sequence
    /// is not a path.
    pub fn try_new(
        model: &dyn Model,
        origin: &StateVector,
        sequence: ControlSequence,
        center: &StateVector,
        radius: f64,
    ) -> Result<Option<Self>> {
        if !is_path(model, origin, &sequence, center, radius)? {
            return Ok(None);
        }
        let reached = extended_transition(model, origin, &sequence)?;
        let density_value = extended_density(model, origin, &sequence)?;
        let log_density_value = extended_log_density(model, origin, &sequence)?;
        Ok(Some(PathCertificate {
            origin: origin.clone(),
            sequence,
            target_center: center.clone(),
            radius,
            achieved_distance: reached.distance(center),
            density_value,
            log_density_value,
        }))
    }
}

/// Multi-start search for a k-steps path from `y` into `B(center, radius)`:
/// model hints first, then seeded restarts sampling controls along the
/// trajectory, each followed by coordinate descent that rejects moves
/// leaving the control set. `None` is exhaustion of the budget, not a
/// disproof.
pub fn find_path(
    model: &dyn Model,
    y: &StateVector,
    center: &StateVector,
    radius: f64,
    k: usize,
    budget: &SearchBudget,
    seed: u64,
) -> Result<Option<PathCertificate>> {
    if !(radius > 0.0) {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "radius must be positive, got {radius}"
        )));
    }
    if k == 0 {
        return Err(CoreError::InvalidParameter(
            "path length k must be at least 1".into(),
        ));
    }

    // (a) analytic hints from the model.
    let mut hint_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, HINT_STREAM));
    for _ in 0..4 {
        match model.path_hint(y, center, radius, k, &mut hint_rng) {
            Some(ws) if ws.len() == k => {
                if let Some(cert) = PathCertificate::try_new(model, y, ws, center, radius)? {
                    return Ok(Some(cert));
                }
            }
            Some(_) => {}
            None => break,
        }
    }

    // (b) random restarts, (c) local refinement.
    for restart in 0..budget.restarts {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, restart as u64 + 1, RESTART_STREAM));
        let mut blocks = Vec::with_capacity(k);
        let mut state = y.clone();
        for _ in 0..k {
            let w = model.sample_control(&state, &mut rng);
            state = model.step(&state, &w);
            blocks.push(w);
        }
        let ws = ControlSequence::new(blocks)?;
        if let Some(cert) = PathCertificate::try_new(model, y, ws.clone(), center, radius)? {
            return Ok(Some(cert));
        }
        if let Some(refined) = refine_path(model, y, center, radius, &ws, budget)? {
            return Ok(Some(refined));
        }
    }
    Ok(None)
}

/// Derivative-free coordinate descent on the flattened sequence, minimizing
/// the distance of the endpoint to the target center. Moves that leave the
/// control set are rejected.
fn refine_path(
    model: &dyn Model,
    y: &StateVector,
    center: &StateVector,
    radius: f64,
    start: &ControlSequence,
    budget: &SearchBudget,
) -> Result<Option<PathCertificate>> {
    let p = model.control_dim();
    let mut flat = start.flatten();
    let endpoint_distance = |coords: &[f64]| -> Result<f64> {
        let seq = ControlSequence::from_flat(coords, p)?;
        Ok(extended_transition(model, y, &seq)?.distance(center))
    };
    let valid = |coords: &[f64]| -> Result<bool> {
        let seq = ControlSequence::from_flat(coords, p)?;
        in_control_set(model, y, &seq)
    };

    let mut dist = endpoint_distance(&flat)?;
    let mut step = 1.0;
    for _ in 0..budget.refine_iters {
        if dist < radius && valid(&flat)? {
            break;
        }
        let mut improved = false;
        for c in 0..flat.len() {
            for sign in [1.0, -1.0] {
                let orig = flat[c];
                flat[c] = orig + sign * step;
                let trial = endpoint_distance(&flat)?;
                if trial < dist && valid(&flat)? {
                    dist = trial;
                    improved = true;
                    break;
                }
                flat[c] = orig;
            }
        }
        if !improved {
            step *= budget.shrink;
            if step < 1e-12 {
                break;
            }
        }
    }
    let seq = ControlSequence::from_flat(&flat, p)?;
    PathCertificate::try_new(model, y, seq, center, radius)
}

/// Which attractivity statement a certificate supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractivityKind {
    /// Some finite-length path from every tested origin.
    Globally,
    /// Paths of every length in a window from every tested origin.
    SteadilyUniform,
    /// Globally attracting plus a one-step fixed-point control.
    SteadilyFixedPoint,
}

/// An origin (and, for steady certificates, the specific length) for which
/// no path was found within budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchFailure {
    pub origin: StateVector,
    pub length: Option<usize>,
}

/// Evidence that `candidate` attracts the tested origins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractivityCertificate {
    pub candidate: StateVector,
    pub kind: AttractivityKind,
    pub epsilon: f64,
    pub tested_origins: Vec<StateVector>,
    pub paths: Vec<PathCertificate>,
    /// k_max for globally certificates, the window start T for steady ones.
    pub horizon: usize,
    /// Window width for steady certificates, 0 otherwise.
    pub span: usize,
    pub failures: Vec<SearchFailure>,
    /// The one-step stay-at-candidate path of fixed-point certificates.
    pub fixed_point: Option<PathCertificate>,
}

impl AttractivityCertificate {
    /// Whether every tested origin (and length) was certified.
    pub fn is_established(&self) -> bool {
        self.failures.is_empty()
    }
}

/// For each origin, search paths of length 1..=k_max into
/// B(x_star, epsilon); the certificate is established only if every origin
/// has at least one.
pub fn certify_globally_attracting(
    model: &dyn Model,
    x_star: &StateVector,
    origins: &[StateVector],
    epsilon: f64,
    k_max: usize,
    budget: &SearchBudget,
    seed: u64,
) -> Result<AttractivityCertificate> {
    if origins.is_empty() {
        return Err(CoreError::InvalidParameter(
            "origins must be nonempty".into(),
        ));
    }
    if k_max == 0 {
        return Err(CoreError::InvalidParameter("k_max must be at least 1".into()));
    }
    let mut paths = Vec::new();
    let mut failures = Vec::new();
    for (o, origin) in origins.iter().enumerate() {
        let mut found = false;
        for k in 1..=k_max {
            let s = derive_seed(seed, o as u64, k as u64);
            if let Some(cert) = find_path(model, origin, x_star, epsilon, k, budget, s)? {
                paths.push(cert);
                found = true;
                break;
            }
        }
        if !found {
            failures.push(SearchFailure {
                origin: origin.clone(),
                length: None,
            });
        }
    }
    Ok(AttractivityCertificate {
        candidate: x_star.clone(),
        kind: AttractivityKind::Globally,
        epsilon,
        tested_origins: origins.to_vec(),
        paths,
        horizon: k_max,
        span: 0,
        failures,
        fixed_point: None,
    })
}

/// Uniform steady-attraction check: every origin must reach
/// B(x_star, epsilon) by a path of *every* length in [t_start, t_start+span].
/// The finite window is an explicitly reported truncation of "for all
/// k >= T".
pub fn certify_steadily_attracting(
    model: &dyn Model,
    x_star: &StateVector,
    origins: &[StateVector],
    epsilon: f64,
    t_start: usize,
    span: usize,
    budget: &SearchBudget,
    seed: u64,
) -> Result<AttractivityCertificate> {
    if origins.is_empty() {
        return Err(CoreError::InvalidParameter(
            "origins must be nonempty".into(),
        ));
    }
    if span == 0 {
        return Err(CoreError::InvalidParameter("span must be at least 1".into()));
    }
    if t_start == 0 {
        return Err(CoreError::InvalidParameter(
            "t_start must be at least 1".into(),
        ));
    }
    let mut paths = Vec::new();
    let mut failures = Vec::new();
    for (o, origin) in origins.iter().enumerate() {
        for k in t_start..=t_start + span {
            let s = derive_seed(seed, o as u64, k as u64);
            match find_path(model, origin, x_star, epsilon, k, budget, s)? {
                Some(cert) => paths.push(cert),
                None => failures.push(SearchFailure {
                    origin: origin.clone(),
                    length: Some(k),
                }),
            }
        }
    }
    Ok(AttractivityCertificate {
        candidate: x_star.clone(),
        kind: AttractivityKind::SteadilyUniform,
        epsilon,
        tested_origins: origins.to_vec(),
        paths,
        horizon: t_start,
        span,
        failures,
        fixed_point: None,
    })
}

/// Search a one-step control that stays at `x_star` within `tol`.
pub fn certify_fixed_point(
    model: &dyn Model,
    x_star: &StateVector,
    tol: f64,
    budget: &SearchBudget,
    seed: u64,
) -> Result<Option<PathCertificate>> {
    find_path(model, x_star, x_star, tol, 1, budget, seed)
}

/// Upgrade a globally-attracting certificate to a steady one using a
/// one-step fixed-point path at the candidate (paths of lengths t and t+1
/// exist for all large t, and gcd(t, t+1) = 1).
pub fn steadily_via_fixed_point(
    globally: &AttractivityCertificate,
    fixed_point: PathCertificate,
) -> Result<AttractivityCertificate> {
    if globally.kind != AttractivityKind::Globally {
        return Err(CoreError::InvalidParameter(
            "expected a globally-attracting certificate".into(),
        ));
    }
    if fixed_point.origin.distance(&globally.candidate) > 1e-9 {
        return Err(CoreError::CandidateMismatch(
            "fixed-point path does not start at the certificate candidate".into(),
        ));
    }
    let mut out = globally.clone();
    out.kind = AttractivityKind::SteadilyFixedPoint;
    out.fixed_point = Some(fixed_point);
    Ok(out)
}

/// Verified return lengths at a candidate: the set of k <= k_max with a
/// path from x_star back into B(x_star, epsilon_return), and their gcd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnLengthSet {
    pub candidate: StateVector,
    pub lengths: Vec<usize>,
    /// gcd of the verified lengths; 0 when the set is empty.
    pub gcd: u64,
    pub warning: Option<String>,
}

impl ReturnLengthSet {
    /// Assemble from raw lengths (the gcd is recomputed).
    pub fn from_lengths(candidate: StateVector, mut lengths: Vec<usize>) -> Self {
        lengths.sort_unstable();
        lengths.dedup();
        let gcd = gcd_of(lengths.iter().map(|&k| k as u64));
        let warning = lengths.is_empty().then(|| {
            String::from("no return paths found within the horizon; gcd degenerate, reported as 0")
        });
        ReturnLengthSet {
            candidate,
            lengths,
            gcd,
            warning,
        }
    }
}

/// Search return paths of every length up to k_max.
pub fn return_lengths(
    model: &dyn Model,
    x_star: &StateVector,
    epsilon_return: f64,
    k_max: usize,
    budget: &SearchBudget,
    seed: u64,
) -> Result<ReturnLengthSet> {
    if k_max == 0 {
        return Err(CoreError::InvalidParameter("k_max must be at least 1".into()));
    }
    let mut lengths = Vec::new();
    for k in 1..=k_max {
        let s = derive_seed(seed, k as u64, 0x5E);
        if find_path(model, x_star, x_star, epsilon_return, k, budget, s)?.is_some() {
            lengths.push(k);
        }
    }
    Ok(ReturnLengthSet::from_lengths(x_star.clone(), lengths))
}

/// Conclusion of the practical theorems, ordered by strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Conclusion {
    #[serde(rename = "inconclusive")]
    Inconclusive,
    #[serde(rename = "phi-irreducible-T-chain")]
    PhiIrreducibleTChain,
    #[serde(rename = "aperiodic-phi-irreducible-T-chain")]
    AperiodicPhiIrreducibleTChain,
}

/// Assembled conclusion with all supporting evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub rank: RankEvidence,
    pub globally: Option<AttractivityCertificate>,
    pub steadily: Option<AttractivityCertificate>,
    pub returns: Option<ReturnLengthSet>,
    /// gcd of verified return lengths when it exceeds 1: counter-evidence
    /// against aperiodicity.
    pub period_lower_bound: u64,
    pub conclusion: Conclusion,
    pub caveat: String,
}

fn candidates_match(a: &StateVector, b: &StateVector) -> bool {
    a.dim() == b.dim() && a.distance(b) <= 1e-9
}

/// Apply the decision table: rank witness + steady certificate yields the
/// aperiodic conclusion, rank + globally the irreducible one, anything
/// less is inconclusive. All evidence must refer to one candidate state.
pub fn assemble_verdict(
    rank: RankEvidence,
    globally: Option<AttractivityCertificate>,
    steadily: Option<AttractivityCertificate>,
    returns: Option<ReturnLengthSet>,
) -> Result<StabilityVerdict> {
    let candidate = &rank.base_point;
    for cert in globally.iter().chain(steadily.iter()) {
        if !candidates_match(candidate, &cert.candidate) {
            return Err(CoreError::CandidateMismatch(alloc::format!(
                "certificate candidate {:?} differs from rank witness point {:?}",
                cert.candidate.coords(),
                candidate.coords()
            )));
        }
    }
    if let Some(r) = &returns {
        if !candidates_match(candidate, &r.candidate) {
            return Err(CoreError::CandidateMismatch(
                "return-length candidate differs from rank witness point".into(),
            ));
        }
    }

    let steadily_ok = steadily.as_ref().map_or(false, |c| {
        c.is_established()
            && matches!(
                c.kind,
                AttractivityKind::SteadilyUniform | AttractivityKind::SteadilyFixedPoint
            )
    });
    let globally_ok = globally.as_ref().map_or(false, |c| c.is_established()) || steadily_ok;

    let conclusion = if rank.ok && steadily_ok {
        Conclusion::AperiodicPhiIrreducibleTChain
    } else if rank.ok && globally_ok {
        Conclusion::PhiIrreducibleTChain
    } else {
        Conclusion::Inconclusive
    };
    let gcd = returns.as_ref().map_or(0, |r| r.gcd);
    Ok(StabilityVerdict {
        rank,
        globally,
        steadily,
        returns,
        period_lower_bound: if gcd > 1 { gcd } else { 0 },
        conclusion,
        caveat: VERDICT_CAVEAT.into(),
    })
}

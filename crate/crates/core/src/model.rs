//! Model abstraction and the extended transition map, extended density and
//! path predicate of the underlying deterministic control model.
//!
//! A chain `X_{k+1} = F(X_k, a(X_k, U_{k+1}))` is described to the toolkit by
//! a [`Model`]: the deterministic step `F`, a sampler for the selected
//! control `a(x, U)`, and an evaluator for its density `p_x(w)`. Everything
//! else in the crate is built from compositions of these three maps.

use alloc::vec::Vec;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{CoreError, Result};

/// A point of the state space, a vector in R^n with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    coords: Vec<f64>,
}

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("state coordinate"));
        }
        Ok(StateVector { coords })
    }

    /// Constructor for step-map outputs, which may leave the finite domain
    /// when a chain diverges; the simulation and search layers check
    /// finiteness where it matters instead of panicking inside the model.
    pub fn new_unchecked(coords: Vec<f64>) -> Self {
        StateVector { coords }
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        num_traits::Float::sqrt(self.coords.iter().map(|v| v * v).sum::<f64>())
    }

    /// Euclidean distance to another state.
    pub fn distance(&self, other: &StateVector) -> f64 {
        num_traits::Float::sqrt(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        )
    }
}

/// One control block, a vector in R^p with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlBlock {
    coords: Vec<f64>,
}

impl ControlBlock {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("control coordinate"));
        }
        Ok(ControlBlock { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// A nonempty sequence of control blocks, the argument of the extended
/// transition map and extended density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    blocks: Vec<ControlBlock>,
}

impl ControlSequence {
    pub fn new(blocks: Vec<ControlBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(CoreError::InvalidParameter(
                "control sequence must contain at least one block".into(),
            ));
        }
        Ok(ControlSequence { blocks })
    }

    /// Single-block sequence.
    pub fn single(block: ControlBlock) -> Self {
        ControlSequence {
            blocks: alloc::vec![block],
        }
    }

    /// Rebuild a sequence from `p`-sized chunks of a flat coordinate vector.
    pub fn from_flat(flat: &[f64], p: usize) -> Result<Self> {
        if p == 0 || flat.is_empty() || flat.len() % p != 0 {
            return Err(CoreError::DimensionMismatch {
                what: "flat control sequence",
                expected: p.max(1),
                got: flat.len(),
            });
        }
        let blocks = flat
            .chunks(p)
            .map(|c| ControlBlock::from_slice(c))
            .collect::<Result<Vec<_>>>()?;
        ControlSequence::new(blocks)
    }

    /// Number of steps k.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn blocks(&self) -> &[ControlBlock] {
        &self.blocks
    }

    /// Concatenated coordinates, length p*k.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.coords().iter().copied())
            .collect()
    }
}

/// A chain model: deterministic step, control sampler and control density.
///
/// All methods must be pure functions of their arguments (randomness enters
/// only through the explicitly passed generator), so implementations are
/// safe to share across threads.
pub trait Model: Send + Sync {
    /// State-space dimension n.
    fn state_dim(&self) -> usize;
    /// Control dimension p (the dimension of one block).
    fn control_dim(&self) -> usize;
    /// Raw-noise dimension m.
    fn noise_dim(&self) -> usize;

    /// The deterministic step F(x, w). Inputs are assumed dimension-checked.
    fn step(&self, x: &StateVector, w: &ControlBlock) -> StateVector;

    /// Draw one control distributed as a(x, U).
    fn sample_control(&self, x: &StateVector, rng: &mut dyn RngCore) -> ControlBlock;

    /// The chosen lower semi-continuous density representative p_x(w).
    fn density(&self, x: &StateVector, w: &ControlBlock) -> f64;

    /// ln p_x(w), negative infinity where the density vanishes. The default
    /// takes the log of [`Model::density`]; built-ins override it with a
    /// native log-space form so extreme control sequences keep a meaningful
    /// value where the plain product would underflow to 0.
    fn log_density(&self, x: &StateVector, w: &ControlBlock) -> f64 {
        num_traits::Float::ln(self.density(x, w))
    }

    /// Threshold deciding numeric membership in the control set.
    fn positivity_threshold(&self) -> f64 {
        0.0
    }

    /// Step evaluated on dual numbers, when the model exposes a
    /// generic-scalar step. `None` selects the finite-difference fallback.
    fn step_dual(&self, _x: &[Dual], _w: &[Dual]) -> Option<Vec<Dual>> {
        None
    }

    /// Veto differentiation at points where the step's selection ranking is
    /// ambiguous.
    fn check_differentiable(&self, _x: &StateVector, _w: &ControlBlock) -> Result<()> {
        Ok(())
    }

    /// Analytic hint for a k-steps path from `y` into `B(center, radius)`,
    /// if the model knows a construction. Hints are re-validated by the
    /// caller against [`is_path`]; a wrong hint is merely useless.
    fn path_hint(
        &self,
        _y: &StateVector,
        _center: &StateVector,
        _radius: f64,
        _k: usize,
        _rng: &mut dyn RngCore,
    ) -> Option<ControlSequence> {
        None
    }

    /// Short human-readable name used in reports.
    fn name(&self) -> &'static str {
        "model"
    }
}

fn check_state(model: &dyn Model, x: &StateVector) -> Result<()> {
    if x.dim() != model.state_dim() {
        return Err(CoreError::DimensionMismatch {
            what: "state vector",
            expected: model.state_dim(),
            got: x.dim(),
        });
    }
    Ok(())
}

fn check_block(model: &dyn Model, w: &ControlBlock) -> Result<()> {
    if w.dim() != model.control_dim() {
        return Err(CoreError::DimensionMismatch {
            what: "control block",
            expected: model.control_dim(),
            got: w.dim(),
        });
    }
    Ok(())
}

/// One application of the step map F(x, w).
pub fn step(model: &dyn Model, x: &StateVector, w: &ControlBlock) -> Result<StateVector> {
    check_state(model, x)?;
    check_block(model, w)?;
    Ok(model.step(x, w))
}

/// Left fold of the step map over a possibly empty block slice; the empty
/// slice realizes the k = 0 convention and returns `x` itself.
pub fn transition_along(
    model: &dyn Model,
    x: &StateVector,
    blocks: &[ControlBlock],
) -> Result<StateVector> {
    check_state(model, x)?;
    let mut state = x.clone();
    for w in blocks {
        check_block(model, w)?;
        state = model.step(&state, w);
    }
    Ok(state)
}

/// Extended transition map: the state reached from `x` after applying the
/// whole control sequence.
pub fn extended_transition(
    model: &dyn Model,
    x: &StateVector,
    ws: &ControlSequence,
) -> Result<StateVector> {
    transition_along(model, x, ws.blocks())
}

/// Extended density: the product of per-step densities evaluated along the
/// trajectory of intermediate states. Returns 0 as soon as a factor is 0.
pub fn extended_density(model: &dyn Model, x: &StateVector, ws: &ControlSequence) -> Result<f64> {
    check_state(model, x)?;
    let mut state = x.clone();
    let mut product = 1.0;
    for w in ws.blocks() {
        check_block(model, w)?;
        let d = model.density(&state, w);
        if d <= 0.0 {
            return Ok(0.0);
        }
        product *= d;
        state = model.step(&state, w);
    }
    Ok(product)
}

/// Extended density in log space: the sum of per-step log-densities along
/// the trajectory, negative infinity as soon as a factor vanishes. This is
/// the authoritative positivity test; the linear-space product can
/// underflow for long or extreme sequences.
pub fn extended_log_density(
    model: &dyn Model,
    x: &StateVector,
    ws: &ControlSequence,
) -> Result<f64> {
    check_state(model, x)?;
    let mut state = x.clone();
    let mut sum = 0.0;
    for w in ws.blocks() {
        check_block(model, w)?;
        let d = model.log_density(&state, w);
        if !(d > f64::NEG_INFINITY) {
            return Ok(f64::NEG_INFINITY);
        }
        sum += d;
        state = model.step(&state, w);
    }
    Ok(sum)
}

/// Membership of `ws` in the control set of `x`: the extended density must
/// exceed the model's positivity threshold. Decided in log space so that
/// genuinely positive but sub-f64 densities still count as members.
pub fn in_control_set(model: &dyn Model, x: &StateVector, ws: &ControlSequence) -> Result<bool> {
    let threshold = model.positivity_threshold();
    let log_threshold = if threshold > 0.0 {
        num_traits::Float::ln(threshold)
    } else {
        f64::NEG_INFINITY
    };
    Ok(extended_log_density(model, x, ws)? > log_threshold)
}

/// k-steps-path predicate: `ws` lies in the control set of `y` and steers
/// `y` strictly inside the open ball `B(center, radius)`.
pub fn is_path(
    model: &dyn Model,
    y: &StateVector,
    ws: &ControlSequence,
    center: &StateVector,
    radius: f64,
) -> Result<bool> {
    if !(radius > 0.0) {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "radius must be positive, got {radius}"
        )));
    }
    if !in_control_set(model, y, ws)? {
        return Ok(false);
    }
    let reached = extended_transition(model, y, ws)?;
    Ok(reached.distance(center) < radius)
}

//! Adversarial models used as negative controls: one that ignores its
//! controls entirely and one with a period-2 deterministic skeleton.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, RngCore};

use crate::dual::Dual;
use crate::model::{ControlBlock, Model, StateVector};
use crate::models::standard_normal_vec;
use crate::stats::log_normal_pdf_nd;

/// step(x, w) = x: the control has no effect, so no state other than the
/// start is ever reachable and the controllability matrix is zero.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    n: usize,
}

impl FrozenModel {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        FrozenModel { n }
    }
}

impl Model for FrozenModel {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn control_dim(&self) -> usize {
        self.n
    }

    fn noise_dim(&self) -> usize {
        self.n
    }

    fn step(&self, x: &StateVector, _w: &ControlBlock) -> StateVector {
        x.clone()
    }

    fn sample_control(&self, _x: &StateVector, rng: &mut dyn RngCore) -> ControlBlock {
        ControlBlock::new(standard_normal_vec(rng, self.n)).expect("finite")
    }

    fn density(&self, _x: &StateVector, w: &ControlBlock) -> f64 {
        num_traits::Float::exp(log_normal_pdf_nd(w.coords()))
    }

    fn log_density(&self, _x: &StateVector, w: &ControlBlock) -> f64 {
        log_normal_pdf_nd(w.coords())
    }

    fn step_dual(&self, x: &[Dual], _w: &[Dual]) -> Option<Vec<Dual>> {
        Some(x.to_vec())
    }

    fn name(&self) -> &'static str {
        "frozen"
    }
}

/// step(x, w) = -x + 0.01 w with controls supported on |w| < 1: the state
/// flips sign every step, so a neighborhood of the start is reachable only
/// at even times and the chain has a 2-cycle.
#[derive(Debug, Clone)]
pub struct AlternatingModel;

impl AlternatingModel {
    pub const DRIFT: f64 = 0.01;

    pub fn new() -> Self {
        AlternatingModel
    }
}

impl Default for AlternatingModel {
    fn default() -> Self {
        Self::new()
    }
}

impl Model for AlternatingModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &StateVector, w: &ControlBlock) -> StateVector {
        StateVector::new_unchecked(vec![-x.coords()[0] + Self::DRIFT * w.coords()[0]])
    }

    fn sample_control(&self, _x: &StateVector, rng: &mut dyn RngCore) -> ControlBlock {
        ControlBlock::new(vec![rng.gen_range(-1.0..1.0)]).expect("finite")
    }

    fn density(&self, _x: &StateVector, w: &ControlBlock) -> f64 {
        // Lower semi-continuous representative of Uniform(-1, 1).
        if w.coords()[0].abs() < 1.0 {
            0.5
        } else {
            0.0
        }
    }

    fn step_dual(&self, x: &[Dual], w: &[Dual]) -> Option<Vec<Dual>> {
        Some(vec![&(-&x[0]) + &w[0].scale(Self::DRIFT)])
    }

    fn name(&self) -> &'static str {
        "alternating"
    }
}

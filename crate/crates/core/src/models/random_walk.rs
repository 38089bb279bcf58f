//! Additive Gaussian random walk on R^n.

use alloc::vec;
use alloc::vec::Vec;
use rand::RngCore;

use crate::dual::Dual;
use crate::model::{ControlBlock, ControlSequence, Model, StateVector};
use crate::models::standard_normal_vec;
use crate::stats::log_normal_pdf_nd;

/// The chain x_{k+1} = x_k + U_{k+1} with standard normal increments.
///
/// Its control model has F(x, w) = x + w and control sets equal to all of
/// R^{nk}; every state is steadily attracting and exact paths of every
/// length exist, which the path hint exploits.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    n: usize,
}

impl RandomWalk {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "state dimension must be positive");
        RandomWalk { n }
    }
}

impl Model for RandomWalk {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn control_dim(&self) -> usize {
        self.n
    }

    fn noise_dim(&self) -> usize {
        self.n
    }

    fn step(&self, x: &StateVector, w: &ControlBlock) -> StateVector {
        let coords = x
            .coords()
            .iter()
            .zip(w.coords())
            .map(|(a, b)| a + b)
            .collect();
        StateVector::new_unchecked(coords)
    }

    fn sample_control(&self, _x: &StateVector, rng: &mut dyn RngCore) -> ControlBlock {
        ControlBlock::new(standard_normal_vec(rng, self.n)).expect("normal draws are finite")
    }

    fn density(&self, _x: &StateVector, w: &ControlBlock) -> f64 {
        num_traits::Float::exp(log_normal_pdf_nd(w.coords()))
    }

    fn log_density(&self, _x: &StateVector, w: &ControlBlock) -> f64 {
        log_normal_pdf_nd(w.coords())
    }

    fn step_dual(&self, x: &[Dual], w: &[Dual]) -> Option<Vec<Dual>> {
        Some(x.iter().zip(w).map(|(a, b)| a + b).collect())
    }

    /// Exact construction: idle for k-1 steps, then jump by center - y.
    fn path_hint(
        &self,
        y: &StateVector,
        center: &StateVector,
        _radius: f64,
        k: usize,
        _rng: &mut dyn RngCore,
    ) -> Option<ControlSequence> {
        let mut blocks = vec![ControlBlock::new(vec![0.0; self.n]).ok()?; k];
        let jump: Vec<f64> = center
            .coords()
            .iter()
            .zip(y.coords())
            .map(|(c, yc)| c - yc)
            .collect();
        blocks[k - 1] = ControlBlock::new(jump).ok()?;
        ControlSequence::new(blocks).ok()
    }

    fn name(&self) -> &'static str {
        "random-walk"
    }
}

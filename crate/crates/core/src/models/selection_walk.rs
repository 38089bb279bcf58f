//! Selection-based random walk on R: the better of two Gaussian candidates.

use alloc::vec::Vec;
use num_traits::Float;
use rand::RngCore;

use crate::dual::Dual;
use crate::model::{ControlBlock, Model, StateVector};
use crate::models::{draw_normal_pool, standard_normal_vec, Objective, MC_POOL_SEED};
use crate::stats::{log_add_exp, log_normal_sf, LN_TAU};

/// Default Monte-Carlo sample count for the general-objective density.
const DEFAULT_DENSITY_SAMPLES: usize = 20_000;

/// The chain x_{k+1} = x_k + a(x_k, (U^1, U^2)) where a keeps the candidate
/// step with the better objective value (ties resolved toward the first).
///
/// The selected step has density p_x(w) = 2 p_N(w) P(f(x+w) < f(x+U));
/// for radially monotone objectives about 0 the probability is a normal
/// tail expression, otherwise it is estimated against a fixed Monte-Carlo
/// pool so the density stays a deterministic function.
pub struct SelectionWalk {
    objective: Objective,
    mc_pool: Option<Vec<f64>>,
}

impl SelectionWalk {
    pub fn new(objective: Objective) -> Self {
        let mc_pool = if objective.has_exact_q() {
            None
        } else {
            Some(draw_normal_pool(DEFAULT_DENSITY_SAMPLES, 1, MC_POOL_SEED))
        };
        SelectionWalk { objective, mc_pool }
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// ln P(f(x + w) < f(x + U)) for U standard normal.
    fn log_better_tail(&self, x: f64, w: f64) -> f64 {
        if self.objective.has_exact_q() {
            // The set {u : |x+u| > |x+w|} is the union of two rays, so the
            // probability is a sum of two normal tails.
            let a = (x + w).abs();
            log_add_exp(log_normal_sf(a - x), log_normal_sf(a + x))
        } else {
            let pool = self.mc_pool.as_ref().expect("pool built for custom objectives");
            let fw = self.objective.eval(&[x + w]);
            let hits = pool
                .iter()
                .filter(|&&u| fw < self.objective.eval(&[x + u]))
                .count();
            Float::ln(hits as f64 / pool.len() as f64)
        }
    }
}

impl core::fmt::Debug for SelectionWalk {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SelectionWalk")
            .field("objective", &self.objective)
            .finish()
    }
}

impl Model for SelectionWalk {
    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn step(&self, x: &StateVector, w: &ControlBlock) -> StateVector {
        StateVector::new_unchecked(alloc::vec![x.coords()[0] + w.coords()[0]])
    }

    fn sample_control(&self, x: &StateVector, rng: &mut dyn RngCore) -> ControlBlock {
        let u = standard_normal_vec(rng, 2);
        let xv = x.coords()[0];
        let keep_first = self.objective.eval(&[xv + u[0]]) <= self.objective.eval(&[xv + u[1]]);
        let w = if keep_first { u[0] } else { u[1] };
        ControlBlock::new(alloc::vec![w]).expect("normal draws are finite")
    }

    fn density(&self, x: &StateVector, w: &ControlBlock) -> f64 {
        Float::exp(self.log_density(x, w))
    }

    fn log_density(&self, x: &StateVector, w: &ControlBlock) -> f64 {
        let (xv, wv) = (x.coords()[0], w.coords()[0]);
        core::f64::consts::LN_2 - 0.5 * wv * wv - 0.5 * LN_TAU + self.log_better_tail(xv, wv)
    }

    fn step_dual(&self, x: &[Dual], w: &[Dual]) -> Option<Vec<Dual>> {
        Some(alloc::vec![&x[0] + &w[0]])
    }

    fn name(&self) -> &'static str {
        "selection-walk"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sv(c: f64) -> StateVector {
        StateVector::from_slice(&[c]).unwrap()
    }

    fn cb(c: f64) -> ControlBlock {
        ControlBlock::from_slice(&[c]).unwrap()
    }

    #[test]
    fn density_at_origin() {
        // p_0(0) = 2 p_N(0): the candidate at the optimum beats U almost surely.
        let m = SelectionWalk::new(Objective::sphere());
        let d = m.density(&sv(0.0), &cb(0.0));
        assert!((d - 0.7978845608028654).abs() < 1e-14, "got {d}");
    }

    #[test]
    fn density_vanishes_in_the_tail() {
        let m = SelectionWalk::new(Objective::sphere());
        let far = m.density(&sv(0.0), &cb(6.0));
        assert!(far > 0.0);
        assert!(far < 1e-8);
        let farther = m.density(&sv(0.0), &cb(8.0));
        assert!(farther < far);
    }

    #[test]
    fn sampler_prefers_better_candidate() {
        let m = SelectionWalk::new(Objective::sphere());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sv(2.0);
        // Selected steps from x=2 should move the state toward 0 on average.
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| m.sample_control(&x, &mut rng).coords()[0])
            .sum::<f64>()
            / n as f64;
        assert!(mean < -0.2, "selection should pull toward the optimum, mean {mean}");
    }

    #[test]
    fn monte_carlo_density_close_to_exact_for_custom_sphere() {
        // Same function declared custom: Monte-Carlo path against closed form.
        let exact = SelectionWalk::new(Objective::sphere());
        let custom = SelectionWalk::new(Objective::custom(
            "sphere-mc",
            |x| x[0] * x[0],
            true,
            true,
        ));
        for &(x, w) in &[(0.0, 0.5), (1.0, -0.3), (-2.0, 1.0)] {
            let a = exact.density(&sv(x), &cb(w));
            let b = custom.density(&sv(x), &cb(w));
            assert!((a - b).abs() < 0.02, "x={x} w={w}: exact {a} vs mc {b}");
        }
    }
}

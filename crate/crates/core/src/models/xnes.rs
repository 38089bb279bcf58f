//! The xNES normalized chain Z_{k+1} = F(Z_k, W_{k+1}) on scaling-invariant
//! objectives, with the selection density of the mu best of lambda
//! standard normal steps.

use alloc::vec::Vec;
use num_traits::Float;
use rand::RngCore;

use crate::dual::{Dual, StepScalar};
use crate::error::{CoreError, Result};
use crate::model::{ControlBlock, ControlSequence, Model, StateVector};
use crate::models::{
    draw_normal_pool, log_selection_density_with, log_sphere_q_tail, select_candidates,
    standard_normal_vec, tail_from_pool, LogTail, XnesParams, MC_POOL_SEED,
};

/// The normalized state update: numerator recenters by the weighted mean of
/// the selected steps, denominator applies the step-size response.
fn xnes_step_generic<S: StepScalar>(params: &XnesParams, z: &[S], w: &[S]) -> Vec<S> {
    let (n, mu) = (params.n, params.mu);
    // sum_i beta_i (||w^i||^2 - n), kept literal.
    let mut response = S::lift(0.0, &z[0]);
    for j in 0..mu {
        let mut sq = S::lift(0.0, &z[0]);
        for i in 0..n {
            let v = &w[j * n + i];
            sq = sq.add(&v.mul(v));
        }
        let centered = sq.sub(&S::lift(n as f64, &z[0]));
        response = response.add(&centered.scale(params.weights[j]));
    }
    let denom = response
        .scale(params.kappa_sigma / (2.0 * n as f64))
        .exp();
    (0..n)
        .map(|i| {
            let mut mean_step = S::lift(0.0, &z[0]);
            for j in 0..mu {
                mean_step = mean_step.add(&w[j * n + i].scale(params.weights[j]));
            }
            z[i].add(&mean_step.scale(params.kappa_m)).div(&denom)
        })
        .collect()
}

/// The xNES chain as a [`Model`]: state z in R^n, control block the
/// concatenated mu selected steps in R^{n mu}.
pub struct XnesChain {
    params: XnesParams,
    mc_pool: Option<Vec<f64>>,
}

impl XnesChain {
    pub fn new(params: XnesParams) -> Result<Self> {
        let mc_pool = if params.objective.has_exact_q() || params.lambda == params.mu {
            None
        } else {
            Some(draw_normal_pool(params.q_samples, params.n, MC_POOL_SEED))
        };
        Ok(XnesChain { params, mc_pool })
    }

    pub fn params(&self) -> &XnesParams {
        &self.params
    }

    fn log_tail(&self, z: &[f64], block: &[f64]) -> LogTail {
        if self.params.objective.has_exact_q() {
            LogTail {
                log_value: log_sphere_q_tail(z, block),
                linear_se: 0.0,
            }
        } else {
            let pool = self.mc_pool.as_ref().expect("pool built when inexact");
            tail_from_pool(&self.params.objective, z, block, pool, self.params.n)
        }
    }

    fn objective_at(&self, z: &[f64], block: &[f64]) -> f64 {
        let shifted: Vec<f64> = z.iter().zip(block).map(|(a, b)| a + b).collect();
        self.params.objective.eval(&shifted)
    }
}

impl core::fmt::Debug for XnesChain {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("XnesChain").field("params", &self.params).finish()
    }
}

impl Model for XnesChain {
    fn state_dim(&self) -> usize {
        self.params.n
    }

    fn control_dim(&self) -> usize {
        self.params.n * self.params.mu
    }

    fn noise_dim(&self) -> usize {
        self.params.n * self.params.lambda
    }

    fn step(&self, x: &StateVector, w: &ControlBlock) -> StateVector {
        let out = xnes_step_generic::<f64>(&self.params, x.coords(), w.coords());
        StateVector::new_unchecked(out)
    }

    fn sample_control(&self, x: &StateVector, rng: &mut dyn RngCore) -> ControlBlock {
        let candidates: Vec<Vec<f64>> = (0..self.params.lambda)
            .map(|_| standard_normal_vec(rng, self.params.n))
            .collect();
        let outcome =
            select_candidates(&self.params.objective, x.coords(), &candidates, self.params.mu);
        let flat: Vec<f64> = outcome.selected.into_iter().flatten().collect();
        ControlBlock::new(flat).expect("normal draws are finite")
    }

    fn density(&self, x: &StateVector, w: &ControlBlock) -> f64 {
        Float::exp(self.log_density(x, w))
    }

    fn log_density(&self, x: &StateVector, w: &ControlBlock) -> f64 {
        let blocks: Vec<&[f64]> = w.coords().chunks(self.params.n).collect();
        log_selection_density_with(&self.params, x.coords(), &blocks, |b| {
            self.log_tail(x.coords(), b)
        })
    }

    fn step_dual(&self, x: &[Dual], w: &[Dual]) -> Option<Vec<Dual>> {
        Some(xnes_step_generic::<Dual>(&self.params, x, w))
    }

    /// Differentiation treats the selection ranking as fixed, which is only
    /// justified where the mu objective values are pairwise distinct.
    fn check_differentiable(&self, x: &StateVector, w: &ControlBlock) -> Result<()> {
        if self.params.mu > 1 {
            let values: Vec<f64> = w
                .coords()
                .chunks(self.params.n)
                .map(|b| self.objective_at(x.coords(), b))
                .collect();
            for i in 0..values.len() {
                for j in (i + 1)..values.len() {
                    if values[i] == values[j] {
                        return Err(CoreError::TiedRanking);
                    }
                }
            }
        }
        Ok(())
    }

    /// Construction from the steady-attraction proof: the denominator beats
    /// the numerator as the selected steps grow, so one large, strictly
    /// f-ordered block lands any state near 0. For k > 1, take a sampled
    /// prefix and finish with the same one-step block.
    fn path_hint(
        &self,
        y: &StateVector,
        center: &StateVector,
        radius: f64,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Option<ControlSequence> {
        if center.norm() > 0.0 {
            return None;
        }
        let mut blocks = Vec::with_capacity(k);
        let mut state = y.clone();
        for _ in 0..k - 1 {
            let w = self.sample_control(&state, rng);
            state = self.step(&state, &w);
            blocks.push(w);
        }
        let kill = self.kill_block(&state, radius, rng)?;
        blocks.push(kill);
        ControlSequence::new(blocks).ok()
    }

    fn name(&self) -> &'static str {
        "xnes"
    }
}

impl XnesChain {
    /// One control block of growing norm until the step lands in
    /// B(0, radius), resampled if the objective values tie.
    fn kill_block(
        &self,
        from: &StateVector,
        radius: f64,
        rng: &mut dyn RngCore,
    ) -> Option<ControlBlock> {
        let (n, mu) = (self.params.n, self.params.mu);
        let mut scale = (from.norm() + 1.0).max(4.0 * Float::sqrt(n as f64));
        for _ in 0..64 {
            let mut vectors: Vec<Vec<f64>> = (0..mu)
                .map(|j| {
                    let dir = standard_normal_vec(rng, n);
                    let norm = Float::sqrt(dir.iter().map(|v| v * v).sum::<f64>()).max(1e-12);
                    let len = scale * (1.0 + 0.1 * j as f64);
                    dir.into_iter().map(|v| v * len / norm).collect()
                })
                .collect();
            vectors.sort_by(|a, b| {
                self.objective_at(from.coords(), a)
                    .total_cmp(&self.objective_at(from.coords(), b))
            });
            let distinct = vectors
                .windows(2)
                .all(|p| self.objective_at(from.coords(), &p[0]) != self.objective_at(from.coords(), &p[1]));
            if !distinct {
                continue;
            }
            let flat: Vec<f64> = vectors.into_iter().flatten().collect();
            let block = ControlBlock::new(flat).ok()?;
            let reached = self.step(from, &block);
            if reached.norm() < radius {
                return Some(block);
            }
            scale *= 2.0;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Objective;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain_1d() -> XnesChain {
        let params =
            XnesParams::new(1, 1, 1, alloc::vec![1.0], 1.0, 1.0, Objective::sphere()).unwrap();
        XnesChain::new(params).unwrap()
    }

    fn sv(c: &[f64]) -> StateVector {
        StateVector::from_slice(c).unwrap()
    }

    fn cb(c: &[f64]) -> ControlBlock {
        ControlBlock::from_slice(c).unwrap()
    }

    #[test]
    fn zero_state_zero_block_stays_at_zero() {
        let m = chain_1d();
        let out = m.step(&sv(&[0.0]), &cb(&[0.0]));
        assert_eq!(out.coords(), &[0.0]);
    }

    #[test]
    fn unit_state_zero_block_scales_by_exp_half() {
        let m = chain_1d();
        let out = m.step(&sv(&[1.0]), &cb(&[0.0]));
        assert!((out.coords()[0] - 1.6487212707001282).abs() < 1e-14);
    }

    #[test]
    fn unit_state_unit_block_reaches_two() {
        // (1 + 1) / exp(0) = 2.
        let m = chain_1d();
        let out = m.step(&sv(&[1.0]), &cb(&[1.0]));
        assert!((out.coords()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_blocks_contract_toward_zero() {
        let m = chain_1d();
        let y = sv(&[5.0]);
        let at10 = m.step(&y, &cb(&[10.0])).norm();
        let at100 = m.step(&y, &cb(&[100.0])).norm();
        assert!(at10 < 1e-3, "norm at 10: {at10}");
        assert!(at100 < at10);
    }

    #[test]
    fn step_is_odd_in_state_and_control() {
        let params = XnesParams::new(
            2,
            4,
            2,
            alloc::vec![0.7, 0.3],
            1.3,
            0.8,
            Objective::sphere(),
        )
        .unwrap();
        let m = XnesChain::new(params).unwrap();
        let z = sv(&[0.4, -1.1]);
        let w = cb(&[0.3, -0.2, 1.0, 0.5]);
        let pos = m.step(&z, &w);
        let neg = m.step(
            &sv(&z.coords().iter().map(|v| -v).collect::<Vec<_>>()),
            &cb(&w.coords().iter().map(|v| -v).collect::<Vec<_>>()),
        );
        for (a, b) in pos.coords().iter().zip(neg.coords()) {
            assert_eq!(*a, -b);
        }
    }

    #[test]
    fn sampled_controls_are_ranked_and_positive_density() {
        let params = XnesParams::new(
            2,
            4,
            2,
            alloc::vec![0.5, 0.5],
            1.0,
            1.0,
            Objective::sphere(),
        )
        .unwrap();
        let m = XnesChain::new(params).unwrap();
        let z = sv(&[1.0, -0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let w = m.sample_control(&z, &mut rng);
            let f1 = m.objective_at(z.coords(), &w.coords()[..2]);
            let f2 = m.objective_at(z.coords(), &w.coords()[2..]);
            assert!(f1 <= f2);
            assert!(m.density(&z, &w) > 0.0);
        }
    }

    #[test]
    fn density_rejects_misordered_blocks() {
        let params = XnesParams::new(
            1,
            3,
            2,
            alloc::vec![0.5, 0.5],
            1.0,
            1.0,
            Objective::sphere(),
        )
        .unwrap();
        let m = XnesChain::new(params).unwrap();
        let z = sv(&[0.0]);
        // f(0 + 2) > f(0 + 1): wrong order.
        assert_eq!(m.density(&z, &cb(&[2.0, 1.0])), 0.0);
        assert!(m.density(&z, &cb(&[1.0, 2.0])) > 0.0);
    }

    #[test]
    fn tied_blocks_refuse_differentiation() {
        let params = XnesParams::new(
            1,
            3,
            2,
            alloc::vec![0.5, 0.5],
            1.0,
            1.0,
            Objective::sphere(),
        )
        .unwrap();
        let m = XnesChain::new(params).unwrap();
        let z = sv(&[0.0]);
        assert_eq!(
            m.check_differentiable(&z, &cb(&[1.0, -1.0])),
            Err(CoreError::TiedRanking)
        );
        assert!(m.check_differentiable(&z, &cb(&[0.5, 1.0])).is_ok());
    }

    #[test]
    fn hint_lands_any_state_near_zero() {
        let params = XnesParams::new(
            3,
            4,
            2,
            alloc::vec![0.5, 0.5],
            1.0,
            1.0,
            Objective::sphere(),
        )
        .unwrap();
        let m = XnesChain::new(params).unwrap();
        let y = sv(&[10.0, 10.0, 10.0]);
        let center = sv(&[0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=3 {
            let ws = m.path_hint(&y, &center, 0.1, k, &mut rng).expect("hint");
            assert_eq!(ws.len(), k);
            let ok = crate::model::is_path(&m, &y, &ws, &center, 0.1).unwrap();
            assert!(ok, "hint must be a valid path at k={k}");
        }
    }
}

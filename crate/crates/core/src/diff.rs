//! Jacobians of the step map, the generalized controllability matrix along
//! a control sequence, and the numerical rank condition.
//!
//! The controllability matrix stacks the column blocks
//! `A_{k-1}...A_{i+1} B_i`, where `A_j` and `B_j` are the state and control
//! Jacobians of the step evaluated along the trajectory; it equals the
//! Jacobian of the whole sequence-to-state map, which is what the
//! independent finite-difference cross-check differentiates.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{CoreError, Result};
use crate::linalg::{numeric_rank, Matrix, RankReport};
use crate::model::{in_control_set, ControlBlock, ControlSequence, Model, StateVector};

/// How the Jacobians behind a matrix were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JacobianMethod {
    /// Forward-mode dual numbers through a generic-scalar step.
    Dual,
    /// Central finite differences on the plain step.
    FiniteDifference,
}

/// Central finite-difference step for one coordinate.
fn fd_step(coord: f64) -> f64 {
    1e-6_f64.max(1e-6 * coord.abs())
}

fn finite_jacobians(
    model: &dyn Model,
    x: &StateVector,
    w: &ControlBlock,
) -> Result<(Matrix, Matrix)> {
    let (n, p) = (model.state_dim(), model.control_dim());
    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, p);
    let mut xm = x.coords().to_vec();
    for j in 0..n {
        let h = fd_step(xm[j]);
        let orig = xm[j];
        xm[j] = orig + h;
        let up = model.step(&StateVector::new(xm.clone())?, w);
        xm[j] = orig - h;
        let dn = model.step(&StateVector::new(xm.clone())?, w);
        xm[j] = orig;
        for i in 0..n {
            a.set(i, j, (up.coords()[i] - dn.coords()[i]) / (2.0 * h));
        }
    }
    let mut wm = w.coords().to_vec();
    for j in 0..p {
        let h = fd_step(wm[j]);
        let orig = wm[j];
        wm[j] = orig + h;
        let up = model.step(x, &ControlBlock::new(wm.clone())?);
        wm[j] = orig - h;
        let dn = model.step(x, &ControlBlock::new(wm.clone())?);
        wm[j] = orig;
        for i in 0..n {
            b.set(i, j, (up.coords()[i] - dn.coords()[i]) / (2.0 * h));
        }
    }
    Ok((a, b))
}

fn dual_jacobians(
    model: &dyn Model,
    x: &StateVector,
    w: &ControlBlock,
) -> Result<Option<(Matrix, Matrix)>> {
    let (n, p) = (model.state_dim(), model.control_dim());
    let dirs = n + p;
    let xs: Vec<Dual> = x
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::seeded(v, dirs, i))
        .collect();
    let ws: Vec<Dual> = w
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::seeded(v, dirs, n + i))
        .collect();
    let out = match model.step_dual(&xs, &ws) {
        Some(out) => out,
        None => return Ok(None),
    };
    let a = Matrix::from_fn(n, n, |i, j| out[i].eps[j]);
    let b = Matrix::from_fn(n, p, |i, j| out[i].eps[n + j]);
    Ok(Some((a, b)))
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite("derivative entry"));
    }
    Ok(())
}

/// Both step Jacobians at (x, w), with the method that produced them.
pub fn step_jacobians(
    model: &dyn Model,
    x: &StateVector,
    w: &ControlBlock,
) -> Result<(Matrix, Matrix, JacobianMethod)> {
    if x.dim() != model.state_dim() {
        return Err(CoreError::DimensionMismatch {
            what: "state vector",
            expected: model.state_dim(),
            got: x.dim(),
        });
    }
    if w.dim() != model.control_dim() {
        return Err(CoreError::DimensionMismatch {
            what: "control block",
            expected: model.control_dim(),
            got: w.dim(),
        });
    }
    model.check_differentiable(x, w)?;
    let (a, b, method) = match dual_jacobians(model, x, w)? {
        Some((a, b)) => (a, b, JacobianMethod::Dual),
        None => {
            let (a, b) = finite_jacobians(model, x, w)?;
            (a, b, JacobianMethod::FiniteDifference)
        }
    };
    check_finite(&a)?;
    check_finite(&b)?;
    Ok((a, b, method))
}

/// Jacobian of the step with respect to the state, an n-by-n matrix.
pub fn jacobian_x(model: &dyn Model, x: &StateVector, w: &ControlBlock) -> Result<Matrix> {
    Ok(step_jacobians(model, x, w)?.0)
}

/// Jacobian of the step with respect to the control, an n-by-p matrix.
pub fn jacobian_w(model: &dyn Model, x: &StateVector, w: &ControlBlock) -> Result<Matrix> {
    Ok(step_jacobians(model, x, w)?.1)
}

/// The generalized controllability matrix along a control sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllabilityMatrix {
    pub mat: Matrix,
    pub base_point: StateVector,
    pub sequence: ControlSequence,
    pub method: JacobianMethod,
}

/// Assemble the controllability matrix by the block recursion: the
/// rightmost block is `B_{k-1}` and block i collects `A_{k-1}...A_{i+1} B_i`,
/// with the A-products accumulated right to left so each A enters once.
pub fn controllability_matrix(
    model: &dyn Model,
    x: &StateVector,
    ws: &ControlSequence,
) -> Result<ControllabilityMatrix> {
    let k = ws.len();
    let n = model.state_dim();

    // Trajectory states S_x^0 .. S_x^{k-1}.
    let mut states = Vec::with_capacity(k);
    let mut state = x.clone();
    for (idx, w) in ws.blocks().iter().enumerate() {
        states.push(state.clone());
        if idx + 1 < k {
            state = model.step(&state, w);
        }
    }

    let mut method = JacobianMethod::Dual;
    let mut a_mats = Vec::with_capacity(k);
    let mut b_mats = Vec::with_capacity(k);
    for j in 0..k {
        let (a, b, m) = step_jacobians(model, &states[j], &ws.blocks()[j])?;
        if m == JacobianMethod::FiniteDifference {
            method = JacobianMethod::FiniteDifference;
        }
        a_mats.push(a);
        b_mats.push(b);
    }

    let mut blocks: Vec<Matrix> = alloc::vec![Matrix::zeros(0, 0); k];
    blocks[k - 1] = b_mats[k - 1].clone();
    let mut acc = Matrix::identity(n);
    for i in (0..k.saturating_sub(1)).rev() {
        acc = acc.matmul(&a_mats[i + 1]);
        blocks[i] = acc.matmul(&b_mats[i]);
    }

    Ok(ControllabilityMatrix {
        mat: Matrix::hstack(&blocks),
        base_point: x.clone(),
        sequence: ws.clone(),
        method,
    })
}

/// Independent cross-check: the full Jacobian of the map from the flattened
/// control sequence to the final state, by central finite differences on
/// the extended transition itself. This deliberately shares no arithmetic
/// with [`controllability_matrix`].
pub fn fd_path_jacobian(model: &dyn Model, x: &StateVector, ws: &ControlSequence) -> Result<Matrix> {
    let p = model.control_dim();
    let n = model.state_dim();
    let flat = ws.flatten();
    let eval = |coords: &[f64]| -> Result<StateVector> {
        let seq = ControlSequence::from_flat(coords, p)?;
        crate::model::extended_transition(model, x, &seq)
    };
    let mut jac = Matrix::zeros(n, flat.len());
    let mut work = flat.clone();
    for c in 0..flat.len() {
        let h = fd_step(work[c]);
        let orig = work[c];
        work[c] = orig + h;
        let up = eval(&work)?;
        work[c] = orig - h;
        let dn = eval(&work)?;
        work[c] = orig;
        for r in 0..n {
            jac.set(r, c, (up.coords()[r] - dn.coords()[r]) / (2.0 * h));
        }
    }
    Ok(jac)
}

/// Decide the rank condition `rank C_x^k(ws) = n` at a witness sequence.
/// The witness must lie in the control set; a witness outside it is an
/// error, not a negative answer.
pub fn rank_condition(
    model: &dyn Model,
    x: &StateVector,
    ws: &ControlSequence,
    rel_tol: f64,
) -> Result<bool> {
    Ok(rank_evidence(model, x, ws, rel_tol)?.ok)
}

/// Rank evidence bundled for verdict assembly and reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankEvidence {
    pub ok: bool,
    pub base_point: StateVector,
    pub sequence: ControlSequence,
    pub report: RankReport,
    pub method: JacobianMethod,
}

/// Rank condition with the full evidence kept for the report.
pub fn rank_evidence(
    model: &dyn Model,
    x: &StateVector,
    ws: &ControlSequence,
    rel_tol: f64,
) -> Result<RankEvidence> {
    if !in_control_set(model, x, ws)? {
        let density = crate::model::extended_density(model, x, ws)?;
        return Err(CoreError::InvalidWitness {
            density,
            threshold: model.positivity_threshold(),
        });
    }
    let c = controllability_matrix(model, x, ws)?;
    let report = numeric_rank(&c.mat, rel_tol)?;
    Ok(RankEvidence {
        ok: report.numeric_rank == model.state_dim(),
        base_point: x.clone(),
        sequence: ws.clone(),
        report,
        method: c.method,
    })
}

/// Search a rank witness at `x`: control sequences sampled along the
/// trajectory (first one step, then two) until one is full rank. Returns
/// the best evidence seen when none is, `None` when every sampled sequence
/// was inadmissible (outside the control set or with tied rankings).
pub fn find_rank_witness(
    model: &dyn Model,
    x: &StateVector,
    rel_tol: f64,
    seed: u64,
) -> Result<Option<RankEvidence>> {
    use rand::SeedableRng;
    let mut best: Option<RankEvidence> = None;
    for attempt in 0..12u64 {
        let k = if attempt < 8 { 1 } else { 2 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::stats::derive_seed(
            seed, attempt, 0xC4,
        ));
        let mut blocks = Vec::with_capacity(k);
        let mut state = x.clone();
        for _ in 0..k {
            let w = model.sample_control(&state, &mut rng);
            state = model.step(&state, &w);
            blocks.push(w);
        }
        let ws = ControlSequence::new(blocks)?;
        match rank_evidence(model, x, &ws, rel_tol) {
            Ok(ev) => {
                if ev.ok {
                    return Ok(Some(ev));
                }
                let better = match &best {
                    Some(b) => ev.report.numeric_rank > b.report.numeric_rank,
                    None => true,
                };
                if better {
                    best = Some(ev);
                }
            }
            Err(CoreError::InvalidWitness { .. }) | Err(CoreError::TiedRanking) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Objective, RandomWalk, XnesChain, XnesParams};

    fn sv(c: &[f64]) -> StateVector {
        StateVector::from_slice(c).unwrap()
    }

    fn cb(c: &[f64]) -> ControlBlock {
        ControlBlock::from_slice(c).unwrap()
    }

    fn seq(blocks: &[&[f64]]) -> ControlSequence {
        ControlSequence::new(blocks.iter().map(|b| cb(b)).collect()).unwrap()
    }

    #[test]
    fn random_walk_jacobians_are_identity() {
        let m = RandomWalk::new(1);
        let a = jacobian_x(&m, &sv(&[0.3]), &cb(&[0.7])).unwrap();
        let b = jacobian_w(&m, &sv(&[0.3]), &cb(&[0.7])).unwrap();
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(b.get(0, 0), 1.0);
    }

    #[test]
    fn xnes_state_jacobian_at_origin() {
        let params =
            XnesParams::new(1, 1, 1, alloc::vec![1.0], 1.0, 1.0, Objective::sphere()).unwrap();
        let m = XnesChain::new(params).unwrap();
        let a = jacobian_x(&m, &sv(&[0.0]), &cb(&[0.0])).unwrap();
        assert!((a.get(0, 0) - 1.6487212707001282).abs() < 1e-12);
        let b = jacobian_w(&m, &sv(&[0.0]), &cb(&[0.0])).unwrap();
        assert!((b.get(0, 0) - 1.6487212707001282).abs() < 1e-12);
    }

    #[test]
    fn dual_and_finite_difference_agree() {
        struct FdOnly(XnesChain);
        impl Model for FdOnly {
            fn state_dim(&self) -> usize {
                self.0.state_dim()
            }
            fn control_dim(&self) -> usize {
                self.0.control_dim()
            }
            fn noise_dim(&self) -> usize {
                self.0.noise_dim()
            }
            fn step(&self, x: &StateVector, w: &ControlBlock) -> StateVector {
                self.0.step(x, w)
            }
            fn sample_control(
                &self,
                x: &StateVector,
                rng: &mut dyn rand::RngCore,
            ) -> ControlBlock {
                self.0.sample_control(x, rng)
            }
            fn density(&self, x: &StateVector, w: &ControlBlock) -> f64 {
                self.0.density(x, w)
            }
        }

        let mk = || {
            XnesChain::new(
                XnesParams::new(
                    2,
                    4,
                    2,
                    alloc::vec![0.6, 0.4],
                    1.2,
                    0.9,
                    Objective::sphere(),
                )
                .unwrap(),
            )
            .unwrap()
        };
        let dual_model = mk();
        let fd_model = FdOnly(mk());
        let x = sv(&[0.7, -0.4]);
        let w = cb(&[0.2, 0.1, -0.5, 0.8]);
        let (a_dual, b_dual, m1) = step_jacobians(&dual_model, &x, &w).unwrap();
        let (a_fd, b_fd, m2) = step_jacobians(&fd_model, &x, &w).unwrap();
        assert_eq!(m1, JacobianMethod::Dual);
        assert_eq!(m2, JacobianMethod::FiniteDifference);
        for (d, f) in a_dual.data().iter().zip(a_fd.data()) {
            assert!((d - f).abs() <= 1e-5 * (1.0 + d.abs()), "A: {d} vs {f}");
        }
        for (d, f) in b_dual.data().iter().zip(b_fd.data()) {
            assert!((d - f).abs() <= 1e-5 * (1.0 + d.abs()), "B: {d} vs {f}");
        }
    }

    #[test]
    fn random_walk_controllability_is_all_ones() {
        let m = RandomWalk::new(1);
        let ws = seq(&[&[0.1], &[0.2], &[0.3]]);
        let c = controllability_matrix(&m, &sv(&[0.0]), &ws).unwrap();
        assert_eq!(c.mat.rows(), 1);
        assert_eq!(c.mat.cols(), 3);
        assert_eq!(c.mat.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn controllability_matches_fd_path_jacobian() {
        let params = XnesParams::new(
            2,
            4,
            2,
            alloc::vec![0.6, 0.4],
            1.0,
            1.0,
            Objective::sphere(),
        )
        .unwrap();
        let m = XnesChain::new(params).unwrap();
        let x = sv(&[1.0, -2.0]);
        let ws = seq(&[&[0.3, 0.1, 0.9, -0.4], &[0.2, -0.6, 1.1, 0.5]]);
        let c = controllability_matrix(&m, &x, &ws).unwrap();
        let fd = fd_path_jacobian(&m, &x, &ws).unwrap();
        for (a, b) in c.mat.data().iter().zip(fd.data()) {
            assert!((a - b).abs() <= 1e-4 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn recursion_suffix_is_submatrix() {
        let params = XnesParams::new(
            2,
            4,
            2,
            alloc::vec![0.6, 0.4],
            1.0,
            1.0,
            Objective::sphere(),
        )
        .unwrap();
        let m = XnesChain::new(params).unwrap();
        let x = sv(&[0.5, 0.5]);
        let ws = seq(&[&[0.3, 0.1, 0.9, -0.4], &[0.2, -0.6, 1.1, 0.5], &[-0.2, 0.4, 0.7, 0.9]]);
        let full = controllability_matrix(&m, &x, &ws).unwrap();
        let shifted = m.step(&x, &ws.blocks()[0]);
        let tail = ControlSequence::new(ws.blocks()[1..].to_vec()).unwrap();
        let sub = controllability_matrix(&m, &shifted, &tail).unwrap();
        let p = m.control_dim();
        let suffix = full.mat.columns(p, 3 * p);
        assert_eq!(suffix, sub.mat);
    }

    #[test]
    fn rank_condition_on_random_walk() {
        let m = RandomWalk::new(1);
        let ws = seq(&[&[0.0]]);
        assert!(rank_condition(&m, &sv(&[2.0]), &ws, 1e-8).unwrap());
    }

    #[test]
    fn invalid_witness_is_an_error_not_false() {
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
        // Misordered blocks have zero density: not a witness at all.
        let ws = seq(&[&[2.0, 1.0]]);
        let err = rank_condition(&m, &sv(&[0.0]), &ws, 1e-8).unwrap_err();
        assert!(matches!(err, CoreError::InvalidWitness { .. }));
    }
}

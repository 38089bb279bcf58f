//! Property tests for the structural invariants of the model operations:
//! fold composition, density factorization, the Jacobian identity of the
//! controllability matrix, and the gcd machinery.

use chainverifier_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sv(c: &[f64]) -> StateVector {
    StateVector::from_slice(c).unwrap()
}

fn xnes_2d() -> XnesChain {
    XnesChain::new(
        XnesParams::new(2, 4, 2, vec![0.6, 0.4], 1.0, 1.0, Objective::sphere()).unwrap(),
    )
    .unwrap()
}

/// Controls sampled along the trajectory, so sequences are almost surely in
/// the control set.
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

fn random_state(model: &dyn Model, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    let coords: Vec<f64> = (0..model.state_dim()).map(|_| rng.gen_range(-5.0..5.0)).collect();
    StateVector::new(coords).unwrap()
}

fn models_under_test() -> Vec<Box<dyn Model>> {
    vec![
        Box::new(RandomWalk::new(3)),
        Box::new(SelectionWalk::new(Objective::sphere())),
        Box::new(xnes_2d()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transition_composes_exactly(seed in any::<u64>(), split in 1usize..4, extra in 1usize..3) {
        let total = split + extra;
        for model in models_under_test() {
            let x = random_state(model.as_ref(), seed);
            let ws = sampled_sequence(model.as_ref(), &x, total, seed ^ 0x51);
            let whole = extended_transition(model.as_ref(), &x, &ws).unwrap();

            let head = ControlSequence::new(ws.blocks()[..split].to_vec()).unwrap();
            let tail = ControlSequence::new(ws.blocks()[split..].to_vec()).unwrap();
            let mid = extended_transition(model.as_ref(), &x, &head).unwrap();
            let two_stage = extended_transition(model.as_ref(), &mid, &tail).unwrap();
            // Same left fold, so bitwise identical.
            prop_assert_eq!(whole, two_stage);
        }
    }

    #[test]
    fn density_factorizes(seed in any::<u64>(), split in 1usize..4, extra in 1usize..3) {
        let total = split + extra;
        for model in models_under_test() {
            let x = random_state(model.as_ref(), seed);
            let ws = sampled_sequence(model.as_ref(), &x, total, seed ^ 0x52);
            let whole = extended_density(model.as_ref(), &x, &ws).unwrap();
            prop_assert!(whole >= 0.0);

            let head = ControlSequence::new(ws.blocks()[..split].to_vec()).unwrap();
            let tail = ControlSequence::new(ws.blocks()[split..].to_vec()).unwrap();
            let mid = extended_transition(model.as_ref(), &x, &head).unwrap();
            let product = extended_density(model.as_ref(), &x, &head).unwrap()
                * extended_density(model.as_ref(), &mid, &tail).unwrap();
            prop_assert!(
                (whole - product).abs() <= 1e-12 * whole.abs().max(product.abs()).max(1e-300),
                "{} vs {}", whole, product
            );
        }
    }

    #[test]
    fn random_walk_density_is_state_independent(seed in any::<u64>(), k in 1usize..5) {
        let m = RandomWalk::new(2);
        let x = random_state(&m, seed);
        let y = random_state(&m, seed ^ 0x99);
        let ws = sampled_sequence(&m, &x, k, seed ^ 0x53);
        let at_x = extended_density(&m, &x, &ws).unwrap();
        let at_y = extended_density(&m, &y, &ws).unwrap();
        prop_assert_eq!(at_x, at_y);
    }

    #[test]
    fn controllability_equals_path_jacobian(seed in any::<u64>(), k in 1usize..5) {
        for model in models_under_test() {
            let x = random_state(model.as_ref(), seed);
            let ws = sampled_sequence(model.as_ref(), &x, k, seed ^ 0x54);
            let c = controllability_matrix(model.as_ref(), &x, &ws).unwrap();
            let fd = fd_path_jacobian(model.as_ref(), &x, &ws).unwrap();
            for (a, b) in c.mat.data().iter().zip(fd.data()) {
                prop_assert!(
                    (a - b).abs() <= 1e-4 * (1.0 + b.abs()),
                    "assembled {} vs finite-difference {}", a, b
                );
            }
        }
    }

    #[test]
    fn xnes_step_is_odd(seed in any::<u64>()) {
        let m = xnes_2d();
        let z = random_state(&m, seed);
        let ws = sampled_sequence(&m, &z, 1, seed ^ 0x55);
        let w = &ws.blocks()[0];
        let pos = m.step(&z, w);
        let neg_z = sv(&z.coords().iter().map(|v| -v).collect::<Vec<_>>());
        let neg_w = ControlBlock::from_slice(&w.coords().iter().map(|v| -v).collect::<Vec<_>>())
            .unwrap();
        let neg = m.step(&neg_z, &neg_w);
        for (a, b) in pos.coords().iter().zip(neg.coords()) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn gcd_divides_every_member(lengths in proptest::collection::btree_set(1u64..=64, 1..8)) {
        let g = gcd_of(lengths.iter().copied());
        prop_assert!(g >= 1);
        for l in &lengths {
            prop_assert_eq!(l % g, 0);
        }
        // Brute-force oracle: largest d dividing every member.
        let oracle = (1..=*lengths.iter().min().unwrap())
            .filter(|d| lengths.iter().all(|l| l % d == 0))
            .max()
            .unwrap();
        prop_assert_eq!(g, oracle);
    }

    #[test]
    fn coprime_member_forces_gcd_one(lengths in proptest::collection::btree_set(1u64..=64, 1..8), extra in 1u64..=64) {
        let g = gcd_of(lengths.iter().copied());
        if gcd(g, extra) == 1 {
            let mut with_extra = lengths.clone();
            with_extra.insert(extra);
            prop_assert_eq!(gcd_of(with_extra), 1);
        }
    }

    #[test]
    fn sampled_controls_have_positive_density(seed in any::<u64>()) {
        for model in models_under_test() {
            let x = random_state(model.as_ref(), seed);
            let ws = sampled_sequence(model.as_ref(), &x, 1, seed ^ 0x56);
            prop_assert!(in_control_set(model.as_ref(), &x, &ws).unwrap());
        }
    }
}

#[test]
fn path_certificates_revalidate_against_the_oracle() {
    // The searcher can only emit certificates the path predicate accepts.
    let budget = SearchBudget::default();
    let m = SelectionWalk::new(Objective::sphere());
    for seed in 0..8u64 {
        if let Some(cert) = find_path(
            &m,
            &sv(&[3.0]),
            &sv(&[0.0]),
            0.1,
            2,
            &budget,
            seed,
        )
        .unwrap()
        {
            assert!(is_path(&m, &cert.origin, &cert.sequence, &cert.target_center, cert.radius)
                .unwrap());
            assert!(cert.achieved_distance < cert.radius);
            assert!(cert.log_density_value.is_finite());
        }
    }
}

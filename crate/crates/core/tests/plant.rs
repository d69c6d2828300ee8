use flexwing_rl::harness::presets::{self, Subsystem};
use flexwing_rl::plant::{simulate, CostWeights, DisturbanceSpec, InputForm, LinearFeedback, PlantModel, StateVector};
use flexwing_rl::{Matrix, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0..10.0f64, n)
}

fn close(a: &Vector, b: &Vector, tol: f64) -> bool {
    (a - b).amax() <= tol * (1.0 + a.amax().max(b.amax()))
}

#[test]
fn longitudinal_step_matches_hand_multiplication() {
    let p = presets::longitudinal();
    #[rustfmt::skip]
    let a = [
        [0.9982, 0.0065, 0.0012, -0.0971],
        [-0.0139, 0.9774, 0.1055, 0.0136],
        [0.0027, -0.0043, 0.9858, -0.0002],
        [0.0, 0.0, 0.0099, 1.0],
    ];
    let b = [0.0, 0.0040, 0.0741, 0.0004];
    let z = [28.0, -1.0, -0.6, 1.0];
    let u = 0.3;
    let next = p
        .model
        .step(&StateVector::from_slice(&z), &Vector::from_element(1, u))
        .unwrap();
    for i in 0..4 {
        let expected: f64 = (0..4).map(|j| a[i][j] * z[j]).sum::<f64>() + b[i] * u;
        assert!((next.z[i] - expected).abs() < 1e-14, "row {i}");
    }
    assert_eq!(next.k, 1);
}

#[test]
fn preset_entries_match_published_values() {
    let lon = presets::longitudinal();
    let lat = presets::lateral();
    assert_eq!(lon.model.a()[(1, 2)], 0.1055);
    assert_eq!(lon.model.a()[(0, 3)], -0.0971);
    assert_eq!(lon.model.b()[(2, 0)], 0.0741);
    assert_eq!(lat.model.a()[(1, 1)], 0.8092);
    assert_eq!(lat.model.a()[(0, 2)], -0.1069);
    assert_eq!(lat.model.b()[(1, 0)], 0.0327);
    assert_eq!(lon.cost.q[(1, 1)], 0.04);
    assert_eq!(lat.cost.q[(2, 2)], 0.25);
    assert_eq!(lon.cost.r[(0, 0)], 0.9803);
    assert_eq!(lon.z0.as_slice(), &[28.0, -1.0, -0.6, 1.0]);
    assert_eq!(lat.z0.as_slice(), &[10.0, 0.9, 0.9, 1.0, -0.5]);
    assert_eq!(lon.actor0.as_slice(), &[0.0317, 0.0014, -2.4171, -3.0740]);
    assert_eq!(lat.actor0.as_slice(), &[0.0404, -0.6407, -2.2064, -1.8473, -1.8872]);
    assert_eq!(lon.critic0(), Matrix::identity(5, 5) * 10.0);
    assert_eq!(lat.critic0(), Matrix::identity(6, 6) * 10.0);
    assert_eq!(
        presets::final_actor(Subsystem::Longitudinal).as_slice(),
        &[0.5229, -0.9582, -2.6512, -2.5554]
    );
}

#[test]
fn scalar_disturbed_step_replays_draw_order() {
    let (a, b) = (0.9, 0.5);
    let model = PlantModel::new(Matrix::from_element(1, 1, a), Matrix::from_element(1, 1, b)).unwrap();
    let (z, ur, umf) = (2.0, 0.3, -0.7);
    for form in [InputForm::Literal, InputForm::Additive] {
        let spec = DisturbanceSpec::new(0.2, 0.5, 99).unwrap().with_input_form(form);
        let mut rng = spec.rng();
        let (next, _) = model
            .disturbed_step(
                &StateVector::from_slice(&[z]),
                &Vector::from_element(1, ur),
                &Vector::from_element(1, umf),
                &spec,
                &mut rng,
            )
            .unwrap();

        let mut replay = ChaCha8Rng::seed_from_u64(99);
        let na: f64 = replay.sample(StandardNormal);
        let nb: f64 = replay.sample(StandardNormal);
        let nz: f64 = replay.sample(StandardNormal);
        let db = 0.5 * b * nb;
        let mf = match form {
            InputForm::Literal => db,
            InputForm::Additive => b + db,
        };
        let expected = (a + 0.5 * a * na) * (z + 0.2 * z * nz) + b * ur + mf * umf;
        assert!((next.z[0] - expected).abs() < 1e-14, "{form}");
    }
}

#[test]
fn seeded_disturbed_simulation_is_reproducible() {
    let p = presets::lateral();
    let run = || {
        let spec = DisturbanceSpec::new(0.2, 0.5, 5).unwrap();
        simulate(
            &p.model,
            &mut LinearFeedback(-p.actor0.transpose()),
            &p.cost,
            &p.z0,
            200,
            0.01,
            Some(&spec),
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn step_is_linear(z1 in vec_of(4), z2 in vec_of(4), u1 in -1.0..1.0f64, u2 in -1.0..1.0f64) {
        let model = presets::longitudinal().model;
        let (z1, z2) = (Vector::from_vec(z1), Vector::from_vec(z2));
        let (u1, u2) = (Vector::from_element(1, u1), Vector::from_element(1, u2));
        let sum = model.step(&StateVector::new(&z1 + &z2), &(&u1 + &u2)).unwrap().z;
        let parts = model.step(&StateVector::new(z1), &u1).unwrap().z + model.step(&StateVector::new(z2), &u2).unwrap().z;
        prop_assert!(close(&sum, &parts, 1e-12));
    }

    #[test]
    fn zero_disturbance_is_nominal(z in vec_of(5), ur in -1.0..1.0f64, umf in -1.0..1.0f64, seed in any::<u64>()) {
        let model = presets::lateral().model;
        let z = StateVector::new(Vector::from_vec(z));
        let (ur, umf) = (Vector::from_element(1, ur), Vector::from_element(1, umf));
        let spec = DisturbanceSpec::new(0.0, 0.0, seed).unwrap();
        let (next, d) = model.disturbed_step(&z, &ur, &umf, &spec, &mut spec.rng()).unwrap();
        prop_assert!(d.delta_a.iter().chain(d.delta_b.iter()).chain(d.delta_z.iter()).all(|x| *x == 0.0));
        prop_assert!(close(&next.z, &model.step(&z, &ur).unwrap().z, 1e-14));
    }

    #[test]
    fn saturation_is_idempotent_and_bounded(u in -10.0..10.0f64) {
        let model = presets::longitudinal().model;
        let once = model.saturate(&Vector::from_element(1, u));
        prop_assert_eq!(model.saturate(&once), once.clone());
        prop_assert!(once[0].abs() <= presets::CONTROL_BOUND);
        if u.abs() <= presets::CONTROL_BOUND {
            prop_assert_eq!(once[0], u);
        }
    }

    #[test]
    fn utility_is_half_quadratic(z in vec_of(4), u in -2.0..2.0f64) {
        let cost = CostWeights::diagonal(&[0.0006, 0.04, 1.0, 1.0], &[0.9803]);
        let expected = 0.5 * (0.0006 * z[0] * z[0] + 0.04 * z[1] * z[1] + z[2] * z[2] + z[3] * z[3] + 0.9803 * u * u);
        let got = cost.utility(&Vector::from_vec(z), &Vector::from_element(1, u));
        prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected));
        prop_assert!(got >= 0.0);
    }

    #[test]
    fn total_cost_is_sum_of_utilities(steps in 1usize..200, gain in proptest::collection::vec(-1.0..1.0f64, 4)) {
        let p = presets::longitudinal();
        let k = Matrix::from_row_slice(1, 4, &gain);
        let traj = simulate(&p.model, &mut LinearFeedback(k), &p.cost, &p.z0, steps, 0.01, None).unwrap();
        prop_assert_eq!(traj.len(), steps);
        let sum: f64 = traj.samples.iter().map(|s| s.utility).sum();
        prop_assert!((traj.total_cost() - sum).abs() <= 1e-9 * (1.0 + sum));
        for s in &traj.samples {
            prop_assert!(s.u[0].abs() <= presets::CONTROL_BOUND);
        }
    }
}

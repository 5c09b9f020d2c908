mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use rigidkit::dynamics::gradient_flow;
use rigidkit::modes::{
    check_decomposition, local_rotational_subspace_from_constraints, uncontrollable_zero_modes,
};
use rigidkit::rigidity::rigidity_summary;
use rigidkit::subspace::equal;
use rigidkit::*;

use common::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 100,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn rank_nullity_and_rigid_motions(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.random_range(2..=8);
        let d = rng.random_range(2..=3);
        let p = rng.random_range(0.2..1.0);
        let fw = random_framework(&mut rng, n, d, p);
        let s = rigidity_summary(&fw, &tol());
        prop_assert_eq!(s.rank + s.flex_dim, fw.dim());
        prop_assert_eq!(s.rank + s.self_stress_dim, fw.m());
        prop_assert_eq!(s.deformation_dim, s.rank);
        prop_assert!(s.flex_dim >= s.trivial_dim);

        let rm = rigidity_matrix(&fw, fw.positions()).unwrap();
        let flex = flex_space(&rm, &tol());
        for v in rbm_basis(&fw).unwrap().all() {
            prop_assert!(flex.residual(v).unwrap() < 1e-10);
        }
        prop_assert!(gradient_flow(&fw, &rigidity_function(&fw, fw.positions()).unwrap(), fw.positions()).amax() == 0.0);
    }

    #[test]
    fn mode_accounting(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.random_range(3..=7);
        let p = rng.random_range(0.3..1.0);
        let fw = random_framework(&mut rng, n, 2, p);
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let sys = linearize(&fw, i, j).unwrap();
        let report = classify_modes(&sys, &tol()).unwrap();
        prop_assert_eq!(report.four_way.total(), fw.dim());
        prop_assert!(sys.eigenvalues().iter().all(|&l| l <= 1e-10));

        let same = linearize(&fw, i, i).unwrap();
        let c = uncontrollable_subspace(&same, &tol());
        let o = unobservable_subspace(&same, &tol());
        prop_assert!(equal(&c, &o).unwrap());

        let split = check_decomposition(&same, &fw, &tol()).unwrap();
        prop_assert!(split.holds);
        prop_assert_eq!(split.rbm_part_dim + split.deformation_part_dim, split.uncontrollable_dim);

        let hidden_zero = uncontrollable_zero_modes(&same, &tol());
        let local = local_rotational_subspace(&fw, i, &tol()).unwrap();
        prop_assert!(contains(&local, &hidden_zero).unwrap());
    }

    #[test]
    fn local_rotations_two_ways(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.random_range(2..=7);
        let d = rng.random_range(2..=3);
        let p = rng.random_range(0.2..0.9);
        let fw = random_framework(&mut rng, n, d, p);
        let i = rng.random_range(0..n);
        let direct = local_rotational_subspace(&fw, i, &tol()).unwrap();
        let stacked = local_rotational_subspace_from_constraints(&fw, i, &tol()).unwrap();
        prop_assert!(equal(&direct, &stacked).unwrap());
        prop_assert_eq!(direct.dim(), d * (n - 1) - fw.degree(i));
        prop_assert!(contains(&direct, &global_rotational_subspace(&fw, i, &tol()).unwrap()).unwrap());
    }

    #[test]
    fn dichotomy_soundness(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let fw = random_rigid(&mut rng, 2, 4..=6, 1e-2);
        let i = rng.random_range(0..fw.n());
        let sys = linearize(&fw, i, i).unwrap();
        let rbm = rbm_basis(&fw).unwrap();
        let vr = rbm.rotation().unwrap();
        let (a, b) = (vr[2 * i], vr[2 * i + 1]);
        let target = rigidity_function(&fw, fw.positions()).unwrap();
        let edge_errors = |w: &[f64]| {
            let ss = steady_state(&sys, w, &tol()).unwrap();
            rigidity_function(&fw, &(fw.positions() + ss)).unwrap() - &target
        };

        let orth = [-b, a];
        prop_assert!(edge_errors(&orth).amax() <= 1e-12);

        let w = random_unit(&mut rng, 2);
        let alignment = a * w[0] + b * w[1];
        if alignment.abs() > 0.1 {
            let rate = rbm_coefficients(&rbm, &fw, i, &w).unwrap().c_r / rbm.rotation_norm().unwrap();
            let errs = edge_errors(&w);
            let hit = (0..fw.m()).any(|k| {
                let x = fw.edge_vector(k).unwrap();
                errs[k] >= 0.9 * rate * rate * x.norm_squared()
            });
            prop_assert!(hit);
        }
    }

    #[test]
    fn lyapunov_decrease(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let fw = random_rigid(&mut rng, 2, 4..=5, 5e-2);
        let p0 = fw.positions() + random_direction(&mut rng, fw.dim(), 1e-2);
        let settings = SimSettings { dt: 1e-3, t_end: 2.0, method: Method::Rk4 };
        let traj = simulate_nonlinear(&fw, &p0, &settings).unwrap();
        prop_assert_eq!(traj.first_potential_increase(1e-12), None);
        prop_assert!(traj.warnings.is_empty());
    }

    #[test]
    fn scenario_text_round_trip(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.random_range(2..=6);
        let d = rng.random_range(2..=3);
        let fw = random_framework(&mut rng, n, d, 0.5);
        let scenario = Scenario {
            actuator: rng.random_range(0..n),
            sensor: rng.random_range(0..n),
            w0: random_unit(&mut rng, d),
            impulse: rng.random_range(0.1..3.0),
            sim: SimSettings { dt: 1e-2, t_end: rng.random_range(1.0..10.0), method: Method::Euler },
            tol: Tolerances { rank: Some(1e-9), subspace: 1e-7 },
            framework: fw,
        };
        let back = Scenario::from_json_str(&scenario.to_json_string()).unwrap();
        prop_assert_eq!(back, scenario);
    }
}

#[test]
fn scenario_file_is_loaded_with_one_based_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("triangle.json");
    std::fs::write(
        &path,
        r#"{"n": 3, "d": 2, "edges": [[2, 1], [1, 3], [2, 3]],
            "positions": [0, 0, 1, 0, 0, 1],
            "actuator": 1, "sensor": 2, "w0": [1, 0]}"#,
    )
    .unwrap();
    let s = load_scenario(&path).unwrap();
    assert_eq!(s.framework.edges(), &[(0, 1), (0, 2), (1, 2)]);
    assert_eq!((s.actuator, s.sensor), (0, 1));
    assert_eq!(s.impulse, 1.0);
    assert_eq!(s.sim, SimSettings::default());
    assert_eq!(
        classify_rigidity(&s.framework, &s.tol),
        RigidityClass::MinimallyRigid
    );

    let missing = load_scenario(dir.path().join("absent.json")).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
}

#[test]
fn triangle_hidden_modes_end_to_end() {
    let fw = triangle();
    let sys = linearize(&fw, 0, 1).unwrap();
    let report = classify_modes(&sys, &tol()).unwrap();
    assert_eq!(report.uncontrollable_dim, 1);
    let c = &report.uncontrollable;
    let rotation = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, -1.0, 0.0]) / 2f64.sqrt();
    assert!(c.residual(&rotation).unwrap() < 1e-12);
}

//! Deterministic workloads for the criterion benches.

use rigidkit::{Framework, Scenario, SimSettings, Tolerances};

/// Minimally rigid planar strip: agent `k` is braced to agents `k - 1` and `k - 2`.
pub fn strip(n: usize) -> Framework {
    assert!(n >= 3, "strip needs at least three agents");
    let points: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let k = k as f64;
            vec![
                k * 0.5 + 0.1 * (1.3 * k).sin(),
                (k as usize % 2) as f64 + 0.1 * (0.7 * k).cos(),
            ]
        })
        .collect();
    let mut edges = vec![(0, 1)];
    for k in 2..n {
        edges.push((k - 2, k));
        edges.push((k - 1, k));
    }
    Framework::from_points(&points, edges).expect("strip geometry is valid")
}

pub fn strip_scenario(n: usize, t_end: f64) -> Scenario {
    Scenario {
        framework: strip(n),
        actuator: 0,
        sensor: n - 1,
        w0: vec![1.0, 0.0],
        impulse: 1.0,
        sim: SimSettings {
            t_end,
            ..SimSettings::default()
        },
        tol: Tolerances::default(),
    }
}

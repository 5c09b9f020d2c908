//! Gradient formation dynamics: nonlinear flow, linearized LTI response to an
//! impulse at the actuated node, steady-state projection, and the shape
//! recovery/distortion verdict.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{Framework, Method, Scenario, SimSettings, Tolerances};
use crate::modes::{linearize, LinearizedSystem};
use crate::rigidity::{flex_space, rbm_basis, rigidity_function, rigidity_summary, RbmBasis, RigidityClass};

/// Fraction of samples averaged for the steady-state estimate of a trajectory.
pub const TAIL_FRACTION: f64 = 0.05;

/// Potential increase per step tolerated before a step-size warning.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    /// States are absolute positions `p(t)`.
    Nonlinear,
    /// States are deviations `δp(t)` from the reference configuration.
    Linearized,
}

/// Uniformly sampled solution with per-sample edge errors and potential.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub edge_errors: Vec<DVector<f64>>,
    pub potential: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states
            .last()
            .expect("trajectory has at least the initial sample")
    }

    /// Mean state over the last [`TAIL_FRACTION`] of samples (at least one).
    pub fn tail_mean(&self) -> DVector<f64> {
        let count = ((self.len() as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, self.len());
        let mut acc = DVector::zeros(self.final_state().len());
        for s in &self.states[self.len() - count..] {
            acc += s;
        }
        acc / count as f64
    }

    /// First step at which the potential rose by more than `slack`.
    pub fn first_potential_increase(&self, slack: f64) -> Option<usize> {
        self.potential
            .windows(2)
            .position(|w| w[1] > w[0] + slack)
            .map(|k| k + 1)
    }
}

/// One fixed step of `ẋ = f(x)`.
pub fn integrate_step<F>(method: Method, x: &DVector<f64>, dt: f64, f: &F) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    match method {
        Method::Euler => x + f(x) * dt,
        Method::Rk4 => {
            let k1 = f(x);
            let k2 = f(&(x + &k1 * (0.5 * dt)));
            let k3 = f(&(x + &k2 * (0.5 * dt)));
            let k4 = f(&(x + &k3 * dt));
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
        }
    }
}

fn integrate<F, G>(
    x0: DVector<f64>,
    settings: &SimSettings,
    f: F,
    observe: G,
) -> Result<(Vec<f64>, Vec<DVector<f64>>)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> bool,
{
    settings.validate()?;
    let steps = settings.steps();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0);
    for k in 1..=steps {
        let next = integrate_step(settings.method, &states[k - 1], settings.dt, &f);
        if !observe(&next) || next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        times.push(k as f64 * settings.dt);
        states.push(next);
    }
    Ok((times, states))
}

/// `-R(p)^T (r(p) - r(p*))` evaluated edge by edge.
pub fn gradient_flow(fw: &Framework, target: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let d = fw.d();
    let mut out = DVector::zeros(p.len());
    for (k, &(i, j)) in fw.edges().iter().enumerate() {
        let diff = p.rows(i * d, d) - p.rows(j * d, d);
        let err = diff.norm_squared() - target[k];
        let push = diff * (2.0 * err);
        let mut bi = out.rows_mut(i * d, d);
        bi -= &push;
        let mut bj = out.rows_mut(j * d, d);
        bj += &push;
    }
    out
}

/// Integrates the closed-loop gradient flow from `p0`.
pub fn simulate_nonlinear(fw: &Framework, p0: &DVector<f64>, settings: &SimSettings) -> Result<Trajectory> {
    fw.check_state(p0)?;
    let target = rigidity_function(fw, fw.positions())?;
    let (times, states) = integrate(p0.clone(), settings, |p| gradient_flow(fw, &target, p), |_| true)?;
    let edge_errors: Vec<DVector<f64>> = states
        .iter()
        .map(|p| rigidity_function(fw, p).map(|r| r - &target))
        .collect::<Result<_>>()?;
    let potential = edge_errors.iter().map(|e| 0.5 * e.norm_squared()).collect();
    let mut traj = Trajectory {
        kind: TrajectoryKind::Nonlinear,
        times,
        states,
        edge_errors,
        potential,
        warnings: Vec::new(),
    };
    if let Some(k) = traj.first_potential_increase(MONOTONICITY_SLACK) {
        traj.warnings.push(format!(
            "potential increased at step {k}; dt = {} may be too large",
            settings.dt
        ));
    }
    Ok(traj)
}

/// Integrates `δṗ = A δp` from `dp0`; edge errors are the linearized `R(p*) δp`.
pub fn simulate_lti(
    sys: &LinearizedSystem,
    dp0: &DVector<f64>,
    settings: &SimSettings,
) -> Result<Trajectory> {
    if dp0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.state_dim(),
            actual: dp0.len(),
        });
    }
    let a = sys.a();
    let (times, states) = integrate(dp0.clone(), settings, |x| a * x, |_| true)?;
    let r = sys.rigidity().entries();
    let edge_errors: Vec<DVector<f64>> = states.iter().map(|x| r * x).collect();
    let potential = edge_errors.iter().map(|e| 0.5 * e.norm_squared()).collect();
    Ok(Trajectory {
        kind: TrajectoryKind::Linearized,
        times,
        states,
        edge_errors,
        potential,
        warnings: Vec::new(),
    })
}

fn input_vector(sys: &LinearizedSystem, w: &[f64]) -> Result<DVector<f64>> {
    if w.len() != sys.d() {
        return Err(Error::DimensionMismatch {
            expected: sys.d(),
            actual: w.len(),
        });
    }
    Ok(sys.b() * DVector::from_column_slice(w))
}

/// `lim δp(t) = P_0 B w` with `P_0` the projector onto `ker R(p*)`.
pub fn steady_state(sys: &LinearizedSystem, w: &[f64], tol: &Tolerances) -> Result<DVector<f64>> {
    let bw = input_vector(sys, w)?;
    flex_space(sys.rigidity(), tol).project(&bw)
}

/// Coefficients of a rigid-body motion in the orthonormal basis `{v_x, v_y, v_r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RbmCoefficients {
    pub c_x: f64,
    pub c_y: f64,
    pub c_r: f64,
}

fn require_planar(d: usize) -> Result<()> {
    if d == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "planar (d = 2) analysis only, got d = {d}"
        )))
    }
}

/// `c_a = <v_a, B w> = <[v_a]_i, w>`.
pub fn rbm_coefficients(rbm: &RbmBasis, fw: &Framework, i: usize, w: &[f64]) -> Result<RbmCoefficients> {
    require_planar(fw.d())?;
    fw.check_node(i)?;
    if w.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: w.len(),
        });
    }
    let at = |v: &DVector<f64>| v[2 * i] * w[0] + v[2 * i + 1] * w[1];
    Ok(RbmCoefficients {
        c_x: at(&rbm.translations[0]),
        c_y: at(&rbm.translations[1]),
        c_r: at(rbm.rotation()?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Impulse orthogonal to the local rotational direction: pure translation.
    Recovery,
    /// Impulse excites the rotation: persistent edge-length error.
    Distortion,
    /// Framework is flexible; the rigid-body dichotomy does not apply.
    Withheld,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearSummary {
    pub final_edge_errors: Vec<f64>,
    pub final_potential: f64,
    pub warnings: Vec<String>,
}

/// Everything measured by one impulse experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ImpulseOutcome {
    pub actuator: usize,
    pub w0: Vec<f64>,
    pub w0_normalized: bool,
    pub impulse: f64,
    pub rigidity: RigidityClass,
    /// `[v_r]_i`, the block of the unit rotational mode at the actuator.
    pub local_rotation: Vec<f64>,
    /// `<[v_r]_i, w0>`.
    pub alignment: f64,
    /// Coefficients of the steady state in the orthonormal rigid-body basis.
    pub coefficients: Option<RbmCoefficients>,
    /// Angular amplitude of the steady-state rotation about the center of mass:
    /// the steady state is `b + rotation_rate * Ω (p*_k - p_cm)` per agent.
    pub rotation_rate: Option<f64>,
    pub steady_state: Vec<f64>,
    pub simulated_steady_state: Vec<f64>,
    pub tail_vs_projection: f64,
    /// Largest distance of an agent's simulated steady displacement from the mean displacement.
    pub translation_spread: f64,
    pub predicted_edge_sq_lengths: Vec<f64>,
    /// `rotation_rate^2 * ||Ω x||^2` per edge.
    pub predicted_edge_errors: Vec<f64>,
    /// Exact `r(p* + δp) - r(p*)` at the simulated steady state.
    pub simulated_final_edge_errors: Vec<f64>,
    /// `R(p*) δp` at the simulated steady state.
    pub simulated_final_linear_edge_errors: Vec<f64>,
    pub max_final_edge_error: f64,
    pub verdict: Verdict,
    /// Norm of the non-rigid flex component of `P_0 B w` (flexible frameworks).
    pub flex_excitation: Option<f64>,
    pub nonlinear: Option<NonlinearSummary>,
}

/// The outcome plus the trajectories behind it.
#[derive(Debug, Clone)]
pub struct DichotomyRun {
    pub outcome: ImpulseOutcome,
    pub linear: Trajectory,
    pub nonlinear: Option<Trajectory>,
}

pub fn dichotomy_experiment(scenario: &Scenario) -> Result<ImpulseOutcome> {
    Ok(run_dichotomy(scenario, false)?.outcome)
}

/// Same as [`dichotomy_experiment`] with an arbitrary input direction.
pub fn dichotomy_with_input(scenario: &Scenario, w0: &[f64]) -> Result<ImpulseOutcome> {
    let mut s = scenario.clone();
    s.w0 = w0.to_vec();
    dichotomy_experiment(&s)
}

/// Applies the impulse as a state jump `δp(0+) = B w0 * impulse`, simulates the
/// linearized system, and compares with the analytic steady state. With
/// `nonlinear` the same jump is also fed to the gradient flow.
pub fn run_dichotomy(scenario: &Scenario, nonlinear: bool) -> Result<DichotomyRun> {
    let fw = &scenario.framework;
    require_planar(fw.d())?;
    let tol = &scenario.tol;
    let i = scenario.actuator;
    let sys = linearize(fw, i, scenario.sensor)?;
    let class = rigidity_summary(fw, tol).class;
    let rbm = rbm_basis(fw)?;

    let w: Vec<f64> = scenario.w0.iter().map(|x| x * scenario.impulse).collect();
    let w0_norm = scenario.w0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let vr = rbm.rotation()?;
    let local_rotation = vec![vr[2 * i], vr[2 * i + 1]];
    let alignment = local_rotation[0] * scenario.w0[0] + local_rotation[1] * scenario.w0[1];

    let dp0 = input_vector(&sys, &w)?;
    let steady = steady_state(&sys, &w, tol)?;
    let linear = simulate_lti(&sys, &dp0, &scenario.sim)?;
    let sim_steady = linear.tail_mean();

    let target = rigidity_function(fw, fw.positions())?;
    let final_exact = rigidity_function(fw, &(fw.positions() + &sim_steady))? - &target;
    let final_linear = sys.rigidity().entries() * &sim_steady;

    let n = fw.n();
    let mean_disp = (0..n).fold(DVector::zeros(2), |acc, k| acc + sim_steady.rows(2 * k, 2)) / n as f64;
    let translation_spread = (0..n)
        .map(|k| (sim_steady.rows(2 * k, 2) - &mean_disp).norm())
        .fold(0.0, f64::max);

    let (coefficients, rotation_rate, verdict, flex_excitation) = if class == RigidityClass::Flexible {
        let rigid_part = rbm.subspace(tol.subspace).project(&dp0)?;
        let flex_part = flex_space(sys.rigidity(), tol).project(&dp0)?;
        (
            None,
            None,
            Verdict::Withheld,
            Some((flex_part - rigid_part).norm()),
        )
    } else {
        let c = rbm_coefficients(&rbm, fw, i, &w)?;
        let rate = c.c_r / rbm.rotation_norm()?;
        let verdict = if alignment.abs() <= tol.subspace {
            Verdict::Recovery
        } else {
            Verdict::Distortion
        };
        (Some(c), Some(rate), verdict, None)
    };

    let rate = rotation_rate.unwrap_or(0.0);
    let mut predicted_edge_sq_lengths = Vec::with_capacity(fw.m());
    let mut predicted_edge_errors = Vec::with_capacity(fw.m());
    for k in 0..fw.m() {
        let x = fw.edge_vector(k)?;
        // ||Ω x|| = ||x|| in the plane.
        let rotated_sq = x.norm_squared();
        predicted_edge_sq_lengths.push(x.norm_squared() + rate * rate * rotated_sq);
        predicted_edge_errors.push(rate * rate * rotated_sq);
    }

    let nonlinear_traj = if nonlinear {
        Some(simulate_nonlinear(fw, &(fw.positions() + &dp0), &scenario.sim)?)
    } else {
        None
    };
    let nonlinear_summary = nonlinear_traj.as_ref().map(|t| NonlinearSummary {
        final_edge_errors: t.edge_errors.last().unwrap().iter().copied().collect(),
        final_potential: *t.potential.last().unwrap(),
        warnings: t.warnings.clone(),
    });

    let outcome = ImpulseOutcome {
        actuator: i,
        w0: scenario.w0.clone(),
        w0_normalized: (w0_norm - 1.0).abs() <= 1e-12,
        impulse: scenario.impulse,
        rigidity: class,
        local_rotation,
        alignment,
        coefficients,
        rotation_rate,
        tail_vs_projection: (&sim_steady - &steady).norm(),
        steady_state: steady.iter().copied().collect(),
        simulated_steady_state: sim_steady.iter().copied().collect(),
        translation_spread,
        predicted_edge_sq_lengths,
        predicted_edge_errors,
        max_final_edge_error: final_exact.amax(),
        simulated_final_edge_errors: final_exact.iter().copied().collect(),
        simulated_final_linear_edge_errors: final_linear.iter().copied().collect(),
        verdict,
        flex_excitation,
        nonlinear: nonlinear_summary,
    };
    Ok(DichotomyRun {
        outcome,
        linear,
        nonlinear: nonlinear_traj,
    })
}

/// The plane of rigid-body coordinates reachable from one planar actuator.
///
/// Coordinates are taken against the basis `{t_x, t_y, v_r}` where `t_x, t_y`
/// are the translations with unit blocks (`[t_x]_i = (1, 0)`) and `v_r` is the
/// unit rotation. The normal is the coordinate vector `(-[v_r]_i, 1)` of the
/// rigid-body motion that leaves node `i` fixed.
#[derive(Debug, Clone, Serialize)]
pub struct ControllablePlane {
    pub actuator: usize,
    pub normal: [f64; 3],
    pub plane_basis: [[f64; 3]; 2],
    /// Direction of the recovery line `plane ∩ {c_r = 0}`; absent when the
    /// actuator sits at the center of mass and the whole `c_r = 0` plane is reachable.
    pub recovery_line: Option<[f64; 3]>,
    /// Blocks of `t_x`, `t_y`, `v_r` at the actuator.
    pub coordinate_blocks: [[f64; 2]; 3],
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl ControllablePlane {
    /// `c_a = <b_a, B w>` against the plane's coordinate basis.
    pub fn coordinates(&self, w: &[f64]) -> [f64; 3] {
        self.coordinate_blocks.map(|b| b[0] * w[0] + b[1] * w[1])
    }

    /// The motion `c_x t_x + c_y t_y + c_r v_r`.
    pub fn motion(&self, rbm: &RbmBasis, c: &[f64; 3]) -> Result<DVector<f64>> {
        let t = rbm.unit_block_translations();
        Ok(&t[0] * c[0] + &t[1] * c[1] + rbm.rotation()? * c[2])
    }
}

pub fn controllable_plane(rbm: &RbmBasis, fw: &Framework, i: usize) -> Result<ControllablePlane> {
    require_planar(fw.d())?;
    fw.check_node(i)?;
    let t = rbm.unit_block_translations();
    let vr = rbm.rotation()?;
    let blk = |v: &DVector<f64>| [v[2 * i], v[2 * i + 1]];
    let blocks = [blk(&t[0]), blk(&t[1]), blk(vr)];
    let normal = [-blocks[2][0], -blocks[2][1], 1.0];

    let unit = normalize3(normal);
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut plane: Vec<[f64; 3]> = Vec::with_capacity(2);
    for e in axes {
        let mut v = e;
        for q in std::iter::once(&unit).chain(plane.iter()) {
            let c = dot3(q, &v);
            v = [v[0] - c * q[0], v[1] - c * q[1], v[2] - c * q[2]];
        }
        if dot3(&v, &v).sqrt() > 1e-8 && plane.len() < 2 {
            plane.push(normalize3(v));
        }
    }

    let line = cross3(&normal, &[0.0, 0.0, 1.0]);
    // `+ 0.0` folds a negative zero into zero.
    let recovery_line = (dot3(&line, &line) > 0.0).then(|| normalize3(line).map(|x| x + 0.0));
    Ok(ControllablePlane {
        actuator: i,
        normal,
        plane_basis: [plane[0], plane[1]],
        recovery_line,
        coordinate_blocks: blocks,
    })
}

/// Edge-length errors along a trajectory.
#[derive(Debug, Clone)]
pub struct EdgeErrorSeries {
    pub times: Vec<f64>,
    /// Exact `r(p(t)) - r(p*)`.
    pub exact: Vec<DVector<f64>>,
    /// `R(p*) δp(t)`, for linearized trajectories only.
    pub linearized: Option<Vec<DVector<f64>>>,
}

pub fn edge_error_series(fw: &Framework, traj: &Trajectory) -> Result<EdgeErrorSeries> {
    let target = rigidity_function(fw, fw.positions())?;
    match traj.kind {
        TrajectoryKind::Nonlinear => Ok(EdgeErrorSeries {
            times: traj.times.clone(),
            exact: traj
                .states
                .iter()
                .map(|p| rigidity_function(fw, p).map(|r| r - &target))
                .collect::<Result<_>>()?,
            linearized: None,
        }),
        TrajectoryKind::Linearized => {
            let r = crate::rigidity::reference_rigidity_matrix(fw);
            Ok(EdgeErrorSeries {
                times: traj.times.clone(),
                exact: traj
                    .states
                    .iter()
                    .map(|dp| rigidity_function(fw, &(fw.positions() + dp)).map(|x| x - &target))
                    .collect::<Result<_>>()?,
                linearized: Some(traj.states.iter().map(|dp| r.entries() * dp).collect()),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::linearize;
    use crate::rigidity::rbm_basis;
    use nalgebra::SymmetricEigen;

    fn braced_square() -> Framework {
        Framework::from_points(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)],
        )
        .unwrap()
    }

    fn rotated(fw: &Framework, angle: f64) -> DVector<f64> {
        let rbm = rbm_basis(fw).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let p = fw.positions();
        DVector::from_fn(p.len(), |r, _| {
            let k = r / 2;
            let x = p[2 * k] - rbm.center[0];
            let y = p[2 * k + 1] - rbm.center[1];
            if r % 2 == 0 {
                rbm.center[0] + c * x - s * y
            } else {
                rbm.center[1] + s * x + c * y
            }
        })
    }

    fn short(t_end: f64) -> SimSettings {
        SimSettings {
            dt: 1e-3,
            t_end,
            method: Method::Rk4,
        }
    }

    #[test]
    fn equilibria_stay_put() {
        let fw = braced_square();
        let traj = simulate_nonlinear(&fw, fw.positions(), &short(1.0)).unwrap();
        assert!(traj.edge_errors.iter().all(|e| e.amax() == 0.0));
        assert_eq!(traj.len(), 1001);

        let spun = rotated(&fw, 10f64.to_radians());
        let traj = simulate_nonlinear(&fw, &spun, &short(1.0)).unwrap();
        assert!(traj.edge_errors.iter().all(|e| e.amax() < 1e-12));
    }

    #[test]
    fn lti_kernel_is_constant_and_modes_decay_exponentially() {
        let fw = braced_square();
        let sys = linearize(&fw, 0, 0).unwrap();
        let rbm = rbm_basis(&fw).unwrap();
        let v = rbm.rotation().unwrap().clone();
        let traj = simulate_lti(&sys, &v, &short(2.0)).unwrap();
        assert!((traj.final_state() - &v).norm() < 1e-14);

        let eig = SymmetricEigen::new(sys.a().clone());
        let k = eig.eigenvalues.imin();
        let lambda = eig.eigenvalues[k];
        let u = eig.eigenvectors.column(k).into_owned();
        let traj = simulate_lti(
            &sys,
            &u,
            &SimSettings {
                dt: 1e-3,
                t_end: 1.0,
                method: Method::Rk4,
            },
        )
        .unwrap();
        let expect = lambda.exp();
        assert!(((traj.final_state().norm() - expect) / expect).abs() < 1e-6);
    }

    #[test]
    fn nonfinite_state_is_reported() {
        let fw = braced_square();
        let huge = fw.positions() * 1e100;
        let err = simulate_nonlinear(&fw, &huge, &short(1.0)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step } if step >= 1));
    }

    #[test]
    fn steady_state_cases() {
        let fw = braced_square();
        let t = Tolerances::default();
        let sys = linearize(&fw, 0, 0).unwrap();
        assert_eq!(steady_state(&sys, &[0.0, 0.0], &t).unwrap().norm(), 0.0);

        let loose = Framework::new(2, 2, vec![], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let sys = linearize(&loose, 1, 1).unwrap();
        let ss = steady_state(&sys, &[0.3, -0.4], &t).unwrap();
        assert_eq!(ss.as_slice(), &[0.0, 0.0, 0.3, -0.4]);
    }

    #[test]
    fn coefficients_reconstruct_steady_state() {
        let fw = braced_square();
        let t = Tolerances::default();
        let rbm = rbm_basis(&fw).unwrap();
        let sys = linearize(&fw, 0, 0).unwrap();
        let vr_i = [rbm.rotation().unwrap()[0], rbm.rotation().unwrap()[1]];
        let norm = (vr_i[0] * vr_i[0] + vr_i[1] * vr_i[1]).sqrt();

        let ortho = [-vr_i[1], vr_i[0]];
        assert!(rbm_coefficients(&rbm, &fw, 0, &ortho).unwrap().c_r.abs() < 1e-16);
        let along = [vr_i[0] / norm, vr_i[1] / norm];
        assert!((rbm_coefficients(&rbm, &fw, 0, &along).unwrap().c_r - norm).abs() < 1e-15);

        let w = [0.7, -0.2];
        let c = rbm_coefficients(&rbm, &fw, 0, &w).unwrap();
        let rebuilt =
            &rbm.translations[0] * c.c_x + &rbm.translations[1] * c.c_y + rbm.rotation().unwrap() * c.c_r;
        let ss = steady_state(&sys, &w, &t).unwrap();
        assert!((rebuilt - ss).norm() < 1e-10);
    }

    #[test]
    fn plane_geometry() {
        let fw = braced_square();
        let rbm = rbm_basis(&fw).unwrap();
        let plane = controllable_plane(&rbm, &fw, 0).unwrap();
        let vr = rbm.rotation().unwrap();
        assert_eq!(plane.normal, [-vr[0], -vr[1], 1.0]);
        for b in &plane.plane_basis {
            assert!(dot3(b, &plane.normal).abs() < 1e-15);
        }
        assert!(dot3(&plane.plane_basis[0], &plane.plane_basis[1]).abs() < 1e-15);
        let line = plane.recovery_line.unwrap();
        assert_eq!(line[2], 0.0);
        let motion = plane.motion(&rbm, &plane.normal).unwrap();
        assert!(motion.rows(0, 2).norm() < 1e-15);

        let fw3 =
            Framework::complete(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(controllable_plane(&rbm_basis(&fw3).unwrap(), &fw3, 0).is_err());
    }

    #[test]
    fn edge_error_series_variants() {
        let fw = braced_square();
        let sys = linearize(&fw, 0, 0).unwrap();
        let rbm = rbm_basis(&fw).unwrap();
        let still = simulate_lti(&sys, &DVector::zeros(8), &short(0.1)).unwrap();
        let s = edge_error_series(&fw, &still).unwrap();
        assert!(s.exact.iter().all(|e| e.amax() == 0.0));

        let shift = &rbm.translations[0] * 0.3 + &rbm.translations[1] * 0.1;
        let moved = simulate_lti(&sys, &shift, &short(0.1)).unwrap();
        let s = edge_error_series(&fw, &moved).unwrap();
        assert!(s.exact.last().unwrap().amax() < 1e-14);
        assert_eq!(s.linearized.as_ref().unwrap().len(), moved.len());

        // A rotation at rate c about the center changes each squared length by c^2 ||x||^2.
        let c = 0.2;
        let spin = rbm.rotation().unwrap() * (c * rbm.rotation_norm().unwrap());
        let spun = simulate_lti(&sys, &spin, &short(0.1)).unwrap();
        let s = edge_error_series(&fw, &spun).unwrap();
        let last = s.exact.last().unwrap();
        for k in 0..fw.m() {
            let x = fw.edge_vector(k).unwrap();
            assert!((last[k] - c * c * x.norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // ẋ = -x^3 on a scalar state, no closed form needed: compare against dt/8.
        let f = |x: &DVector<f64>| x.map(|v| -v * v * v + (3.0 * v).sin());
        let run = |dt: f64| {
            let mut x = DVector::from_vec(vec![1.2]);
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                x = integrate_step(Method::Rk4, &x, dt, &f);
            }
            x[0]
        };
        let reference = run(0.1 / 8.0);
        let e1 = (run(0.1) - reference).abs();
        let e2 = (run(0.05) - reference).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn euler_runs() {
        let fw = braced_square();
        let sys = linearize(&fw, 0, 0).unwrap();
        let dp0 = DVector::from_fn(8, |r, _| if r == 0 { 1.0 } else { 0.0 });
        let s = SimSettings {
            dt: 1e-3,
            t_end: 20.0,
            method: Method::Euler,
        };
        let traj = simulate_lti(&sys, &dp0, &s).unwrap();
        let ss = steady_state(&sys, &[1.0, 0.0], &Tolerances::default()).unwrap();
        assert!((traj.tail_mean() - ss).norm() < 1e-8);
    }
}

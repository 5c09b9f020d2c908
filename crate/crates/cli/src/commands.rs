use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::{json, Value};

use rigidkit::dynamics::{dichotomy_experiment, dichotomy_with_input, run_dichotomy, Trajectory};
use rigidkit::modes::{check_corollaries, check_decomposition, check_unified_theorem};
use rigidkit::rigidity::{reference_rigidity_matrix, rigidity_summary};
use rigidkit::subspace::equal;
use rigidkit::{
    classify_modes, controllable_plane, deformation_space, flex_space, global_rotational_subspace, linearize,
    local_rotational_subspace, rbm_basis, rigidity_function, self_stress_space, uncontrollable_subspace,
    unobservable_subspace, Framework, LinearizedSystem, Scenario, Subspace,
};

use crate::output::{float, to_labeled_value, Artifact, Table};
use crate::CliError;

pub const SCENARIO_ECHO: &str = "scenario.json";
pub const LTI_TRAJECTORY: &str = "trajectory_lti.csv";
pub const NONLINEAR_TRAJECTORY: &str = "trajectory_nonlinear.csv";

/// Command output plus diagnostics destined for stderr.
pub struct Produced {
    pub artifacts: Vec<Artifact>,
    pub warnings: Vec<String>,
}

fn echo(s: &Scenario) -> Artifact {
    let mut text = s.to_json_string();
    text.push('\n');
    Artifact {
        name: SCENARIO_ECHO.to_string(),
        bytes: text.into_bytes(),
    }
}

fn echo_value(s: &Scenario) -> Value {
    serde_json::from_str(&s.to_json_string()).expect("scenario echo is valid JSON")
}

fn axis(a: usize) -> String {
    match a {
        0 => "x".into(),
        1 => "y".into(),
        2 => "z".into(),
        _ => format!("_{}", a + 1),
    }
}

fn coordinate_names(fw: &Framework, prefix: &str) -> Vec<String> {
    (0..fw.n())
        .flat_map(|k| (0..fw.d()).map(move |a| format!("{prefix}{}{}", k + 1, axis(a))))
        .collect()
}

fn edge_names(fw: &Framework, prefix: &str) -> Vec<String> {
    (1..=fw.m()).map(|k| format!("{prefix}{k}")).collect()
}

fn basis_value(s: &Subspace) -> Value {
    let vectors: Vec<Vec<f64>> = s.vectors().map(|v| v.iter().copied().collect()).collect();
    json!({ "dim": s.dim(), "ambient_dim": s.ambient_dim(), "basis": vectors })
}

fn verdicts(s: &Scenario, sys: &LinearizedSystem) -> Result<Value, CliError> {
    let fw = &s.framework;
    let tol = &s.tol;
    Ok(json!({
        "decomposition": to_labeled_value(&check_decomposition(sys, fw, tol)?),
        "theorem": to_labeled_value(&check_unified_theorem(sys, fw, tol)?),
        "corollaries": to_labeled_value(&check_corollaries(fw, s.actuator, tol)?),
    }))
}

pub fn analyze(s: &Scenario) -> Result<Produced, CliError> {
    let fw = &s.framework;
    let tol = &s.tol;
    let summary = rigidity_summary(fw, tol);
    let sys = linearize(fw, s.actuator, s.sensor)?;
    let modes = classify_modes(&sys, tol)?;
    let mut warnings = Vec::new();
    let impulse = if fw.d() == 2 {
        to_labeled_value(&dichotomy_experiment(s)?)
    } else {
        warnings.push(format!(
            "impulse experiment skipped: needs d = 2, got d = {}",
            fw.d()
        ));
        Value::Null
    };

    let rm = reference_rigidity_matrix(fw);
    let mut matrix = Table::new(&coordinate_names(fw, "p"));
    for row in rm.entries().row_iter() {
        matrix.row(row.iter().map(|&x| float(x)));
    }

    let local = local_rotational_subspace(fw, s.actuator, tol)?;
    let global = global_rotational_subspace(fw, s.actuator, tol)?;
    let rbm = rbm_basis(fw)?;
    let subspaces = json!({
        "flex": basis_value(&flex_space(&rm, tol)),
        "deformation": basis_value(&deformation_space(&rm, tol)),
        "self_stress": basis_value(&self_stress_space(&rm, tol)),
        "rigid_body_motions": basis_value(&rbm.subspace(tol.subspace)),
        "uncontrollable": basis_value(&modes.uncontrollable),
        "unobservable": basis_value(&modes.unobservable),
        "local_rotational": basis_value(&local),
        "global_rotational": basis_value(&global),
    });

    let names = [
        "report.json",
        "rigidity_matrix.csv",
        "subspaces.json",
        SCENARIO_ECHO,
    ];
    let report = json!({
        "scenario": echo_value(s),
        "rigidity": summary,
        "modes": to_labeled_value(&modes),
        "verdicts": verdicts(s, &sys)?,
        "impulse": impulse,
        "artifacts": names,
    });
    Ok(Produced {
        artifacts: vec![
            Artifact::json(names[0], &report),
            Artifact::csv(names[1], matrix),
            Artifact::json(names[2], &subspaces),
            echo(s),
        ],
        warnings,
    })
}

pub fn modes(s: &Scenario) -> Result<Produced, CliError> {
    let tol = &s.tol;
    let sys = linearize(&s.framework, s.actuator, s.sensor)?;
    let report = classify_modes(&sys, tol)?;
    let same_node = s.actuator == s.sensor;
    let c_equals_o = equal(
        &uncontrollable_subspace(&sys, tol),
        &unobservable_subspace(&sys, tol),
    )?;
    let value = json!({
        "actuator": s.actuator + 1,
        "sensor": s.sensor + 1,
        "modes": to_labeled_value(&report),
        "uncontrollable_equals_unobservable": c_equals_o,
        "verdicts": verdicts(s, &sys)?,
    });
    let mut warnings = Vec::new();
    if same_node && !c_equals_o {
        warnings.push("actuator equals sensor but uncontrollable and unobservable subspaces differ".into());
    }
    Ok(Produced {
        artifacts: vec![Artifact::json("modes.json", &value), echo(s)],
        warnings,
    })
}

/// `t, p.., e.., V` with absolute positions; `offset` is added to each state.
fn trajectory_table(fw: &Framework, traj: &Trajectory, offset: Option<&DVector<f64>>) -> Table {
    let mut header = vec!["t".to_string()];
    header.extend(coordinate_names(fw, "p"));
    header.extend(edge_names(fw, "e"));
    header.push("V".into());
    let mut table = Table::new(&header);
    for k in 0..traj.len() {
        let state = match offset {
            Some(p) => &traj.states[k] + p,
            None => traj.states[k].clone(),
        };
        let mut row = vec![float(traj.times[k])];
        row.extend(state.iter().map(|&x| float(x)));
        row.extend(traj.edge_errors[k].iter().map(|&x| float(x)));
        row.push(float(traj.potential[k]));
        table.row(row);
    }
    table
}

pub fn dichotomy(s: &Scenario, sweep: Option<usize>, nonlinear: bool) -> Result<Produced, CliError> {
    let fw = &s.framework;
    let run = run_dichotomy(s, nonlinear)?;
    let mut warnings = Vec::new();
    let mut artifacts = vec![
        Artifact::json("outcome.json", &to_labeled_value(&run.outcome)),
        Artifact::csv(
            LTI_TRAJECTORY,
            trajectory_table(fw, &run.linear, Some(fw.positions())),
        ),
    ];
    if let Some(traj) = &run.nonlinear {
        warnings.extend(traj.warnings.iter().cloned());
        artifacts.push(Artifact::csv(
            NONLINEAR_TRAJECTORY,
            trajectory_table(fw, traj, None),
        ));
    }
    if let Some(n) = sweep {
        if n == 0 {
            return Err(CliError::input("--sweep needs at least one angle"));
        }
        let rows = (0..n)
            .into_par_iter()
            .map(|k| {
                let angle = TAU * k as f64 / n as f64;
                dichotomy_with_input(s, &[angle.cos(), angle.sin()]).map(|o| (angle, o))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut table = Table::new(&["angle", "alignment", "c_r", "max_final_edge_error"]);
        for (angle, o) in rows {
            let c_r = o.coefficients.map_or(f64::NAN, |c| c.c_r);
            table.row([
                float(angle),
                float(o.alignment),
                float(c_r),
                float(o.max_final_edge_error),
            ]);
        }
        artifacts.push(Artifact::csv("sweep.csv", table));
    }
    if run.outcome.verdict == rigidkit::Verdict::Withheld {
        warnings.push("framework is flexible: verdict withheld, see flex_excitation".into());
    }
    artifacts.push(echo(s));
    Ok(Produced { artifacts, warnings })
}

fn read_run_file(dir: &Path, name: &str) -> Result<Vec<u8>, CliError> {
    let path = dir.join(name);
    fs::read(&path).map_err(|e| CliError::input(format!("missing run artifact {}: {e}", path.display())))
}

/// Reads the state columns of a trajectory CSV.
fn read_states(bytes: &[u8], name: &str, dim: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>), CliError> {
    let bad = |msg: String| CliError::input(format!("{name}: {msg}"));
    let mut reader = csv::Reader::from_reader(bytes);
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() < dim + 1 {
            return Err(bad(format!(
                "row {} has {} columns, expected at least {}",
                line + 1,
                record.len(),
                dim + 1
            )));
        }
        let parse = |f: &str| {
            f.parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", line + 1)))
        };
        times.push(parse(&record[0])?);
        let state = (1..=dim)
            .map(|c| parse(&record[c]))
            .collect::<Result<Vec<_>, _>>()?;
        states.push(DVector::from_vec(state));
    }
    if times.is_empty() {
        return Err(bad("no samples".into()));
    }
    Ok((times, states))
}

fn arrows(fw: &Framework, space: &Subspace) -> Table {
    let mut table = Table::new(&["mode", "node", "x", "y", "dx", "dy"]);
    for (m, v) in space.vectors().enumerate() {
        for k in 0..fw.n() {
            table.row([
                (m + 1).to_string(),
                (k + 1).to_string(),
                float(fw.positions()[2 * k]),
                float(fw.positions()[2 * k + 1]),
                float(v[2 * k]),
                float(v[2 * k + 1]),
            ]);
        }
    }
    table
}

fn edge_error_table(
    fw: &Framework,
    times: &[f64],
    positions: &[DVector<f64>],
    linear: bool,
) -> Result<Table, CliError> {
    let target = rigidity_function(fw, fw.positions())?;
    let rm = reference_rigidity_matrix(fw);
    let mut header = vec!["t".to_string()];
    header.extend(edge_names(fw, "e"));
    if linear {
        header.extend(edge_names(fw, "lin"));
    }
    let mut table = Table::new(&header);
    for (t, p) in times.iter().zip(positions) {
        let exact = rigidity_function(fw, p)? - &target;
        let mut row = vec![float(*t)];
        row.extend(exact.iter().map(|&x| float(x)));
        if linear {
            let lin = rm.entries() * (p - fw.positions());
            row.extend(lin.iter().map(|&x| float(x)));
        }
        table.row(row);
    }
    Ok(table)
}

pub fn plotdata(run_dir: &Path) -> Result<Produced, CliError> {
    let text = read_run_file(run_dir, SCENARIO_ECHO)?;
    let text = String::from_utf8(text).map_err(|e| CliError::input(format!("{SCENARIO_ECHO}: {e}")))?;
    let s = Scenario::from_json_str(&text)?;
    let fw = &s.framework;
    if fw.d() != 2 {
        return Err(CliError::input(format!(
            "plot data needs d = 2, got d = {}",
            fw.d()
        )));
    }
    let tol = &s.tol;
    let i = s.actuator;

    let lti = read_run_file(run_dir, LTI_TRAJECTORY)?;
    let (times, positions) = read_states(&lti, LTI_TRAJECTORY, fw.dim())?;

    let global = global_rotational_subspace(fw, i, tol)?;
    let local = local_rotational_subspace(fw, i, tol)?;
    let rbm = rbm_basis(fw)?;
    let plane = controllable_plane(&rbm, fw, i)?;

    let mut artifacts = vec![
        Artifact::csv("arrows_Ri.csv", arrows(fw, &global)),
        Artifact::csv("arrows_Ti.csv", arrows(fw, &local)),
        Artifact::csv("edge_errors.csv", edge_error_table(fw, &times, &positions, true)?),
        Artifact::json("plane.json", &to_labeled_value(&plane)),
    ];
    if let Ok(bytes) = fs::read(run_dir.join(NONLINEAR_TRAJECTORY)) {
        let (times, positions) = read_states(&bytes, NONLINEAR_TRAJECTORY, fw.dim())?;
        artifacts.push(Artifact::csv(
            "edge_errors_nonlinear.csv",
            edge_error_table(fw, &times, &positions, false)?,
        ));
    }
    Ok(Produced {
        artifacts,
        warnings: Vec::new(),
    })
}

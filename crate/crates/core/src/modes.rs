//! Linearized formation dynamics with one actuated node `i` and one measured
//! node `j`: eigenspace-wise PBH analysis, the rotational subspaces about a
//! node, and numerical checks of how they relate to the uncontrollable subspace.
//!
//! With `B = e_i ⊗ I_d`, an eigenvector is uncontrollable exactly when its
//! block at node `i` vanishes, so every PBH split here is a "pinning" of a
//! whole eigenspace at one node.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{Framework, Tolerances};
use crate::linalg::null_basis;
use crate::rigidity::{
    deformation_space, flex_space, reference_rigidity_matrix, rigidity_summary, skew_basis, RigidityClass,
    RigidityMatrix,
};
use crate::subspace::{contains, direct_sum_check, intersect, orthonormalize, Relation, Subspace};

/// Relative gap below which two nonzero eigenvalues are treated as one.
pub const EIGEN_GROUPING_REL_TOL: f64 = 1e-7;

/// `δṗ = A δp + B w`, `y = C δp` with `A = -R^T R` at the reference configuration.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    rigidity: RigidityMatrix,
    actuator: usize,
    sensor: usize,
    d: usize,
}

fn selector(n: usize, d: usize, node: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n * d, d);
    for a in 0..d {
        s[(node * d + a, a)] = 1.0;
    }
    s
}

pub fn linearize(fw: &Framework, actuator: usize, sensor: usize) -> Result<LinearizedSystem> {
    fw.check_node(actuator)?;
    fw.check_node(sensor)?;
    let rigidity = reference_rigidity_matrix(fw);
    let r = rigidity.entries();
    let a = -(r.transpose() * r);
    Ok(LinearizedSystem {
        a,
        b: selector(fw.n(), fw.d(), actuator),
        c: selector(fw.n(), fw.d(), sensor).transpose(),
        rigidity,
        actuator,
        sensor,
        d: fw.d(),
    })
}

/// One eigenvalue (or a cluster of numerically equal ones) with its eigenspace.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub value: f64,
    pub space: Subspace,
    pub is_zero: bool,
}

impl LinearizedSystem {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn rigidity(&self) -> &RigidityMatrix {
        &self.rigidity
    }

    pub fn actuator(&self) -> usize {
        self.actuator
    }

    pub fn sensor(&self) -> usize {
        self.sensor
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Eigenspaces of `A`, ascending by eigenvalue.
    ///
    /// The zero eigenspace has exactly `nd - rank R` vectors (the numerical rank
    /// of `R` decides which eigenvalues are zero). Nonzero eigenvalues closer than
    /// [`EIGEN_GROUPING_REL_TOL`]` * max|λ|` to their neighbour share one eigenspace.
    pub fn eigenspaces(&self, tol: &Tolerances) -> Vec<Eigenspace> {
        let nd = self.state_dim();
        if nd == 0 {
            return Vec::new();
        }
        let eig = SymmetricEigen::new(self.a.clone());
        let mut order: Vec<usize> = (0..nd).collect();
        // A is negative semidefinite: the zero cluster sits at the top.
        order.sort_by(|&x, &y| eig.eigenvalues[x].abs().total_cmp(&eig.eigenvalues[y].abs()));
        let zero_count = nd - self.rigidity.rank(tol);
        let (zero_idx, rest) = order.split_at(zero_count);

        let column_space = |idx: &[usize]| {
            Subspace::from_orthonormal(eig.eigenvectors.select_columns(idx.iter()), tol.subspace)
        };

        let mut rest: Vec<usize> = rest.to_vec();
        rest.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let scale = eig.eigenvalues.amax();
        let gap = EIGEN_GROUPING_REL_TOL * scale;

        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=rest.len() {
            let split = k == rest.len() || eig.eigenvalues[rest[k]] - eig.eigenvalues[rest[k - 1]] > gap;
            if split {
                let group = &rest[start..k];
                let mean = group.iter().map(|&g| eig.eigenvalues[g]).sum::<f64>() / group.len() as f64;
                out.push(Eigenspace {
                    value: mean,
                    space: column_space(group),
                    is_zero: false,
                });
                start = k;
            }
        }
        if zero_count > 0 {
            out.push(Eigenspace {
                value: 0.0,
                space: column_space(zero_idx),
                is_zero: true,
            });
        }
        out
    }

    /// Eigenvalues of `A`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.a.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Vectors of `space` whose block at `node` vanishes (`space ∩ ker(e_node^T ⊗ I_d)`).
///
/// Solved in the coordinates of the basis: a `d x r` nullspace problem.
pub fn pin(space: &Subspace, node: usize, d: usize) -> Subspace {
    let q = space.basis();
    let blk = q.rows(node * d, d).into_owned();
    let coeffs = null_basis(&blk, space.tol());
    Subspace::from_orthonormal(q * coeffs, space.tol())
}

/// The coordinate subspace of motions that keep node `node` fixed.
pub fn fixed_node_space(n: usize, d: usize, node: usize, tol: f64) -> Subspace {
    let cols: Vec<usize> = (0..n * d).filter(|r| r / d != node).collect();
    Subspace::from_orthonormal(DMatrix::identity(n * d, n * d).select_columns(cols.iter()), tol)
}

fn pinned_sum(spaces: &[Eigenspace], node: usize, d: usize, nd: usize, tol: f64) -> Subspace {
    let parts: Vec<DVector<f64>> = spaces
        .iter()
        .flat_map(|e| pin(&e.space, node, d).vectors().collect::<Vec<_>>())
        .collect();
    // Eigenspaces of a symmetric matrix are orthogonal, so the parts already are.
    if parts.is_empty() {
        Subspace::zero(nd, tol)
    } else {
        Subspace::from_orthonormal(DMatrix::from_columns(&parts), tol)
    }
}

/// Uncontrollable subspace: the orthogonal sum over eigenspaces of the part pinned at the actuator.
pub fn uncontrollable_subspace(sys: &LinearizedSystem, tol: &Tolerances) -> Subspace {
    pinned_sum(
        &sys.eigenspaces(tol),
        sys.actuator,
        sys.d,
        sys.state_dim(),
        tol.subspace,
    )
}

/// Unobservable subspace: as above, pinned at the sensor.
pub fn unobservable_subspace(sys: &LinearizedSystem, tol: &Tolerances) -> Subspace {
    pinned_sum(
        &sys.eigenspaces(tol),
        sys.sensor,
        sys.d,
        sys.state_dim(),
        tol.subspace,
    )
}

/// Uncontrollable part of the zero eigenspace (hidden rigid-body and flex modes).
pub fn uncontrollable_zero_modes(sys: &LinearizedSystem, tol: &Tolerances) -> Subspace {
    let zero: Vec<Eigenspace> = sys.eigenspaces(tol).into_iter().filter(|e| e.is_zero).collect();
    pinned_sum(&zero, sys.actuator, sys.d, sys.state_dim(), tol.subspace)
}

/// Rotations of the whole framework about node `i`: blocks `Ω (p*_k - p*_i)`.
pub fn global_rotational_subspace(fw: &Framework, i: usize, tol: &Tolerances) -> Result<Subspace> {
    fw.check_node(i)?;
    let d = fw.d();
    let pivot = DVector::from_column_slice(fw.point(i)?);
    let raw: Vec<DVector<f64>> = skew_basis(d)
        .iter()
        .map(|omega| crate::rigidity::rotation_field(fw, omega, &pivot))
        .collect();
    if raw.iter().all(|v| v.norm() == 0.0) {
        return Err(Error::Degenerate(format!(
            "every agent coincides with node {}; rotations about it vanish",
            i + 1
        )));
    }
    Ok(orthonormalize(fw.dim(), &raw, tol.subspace))
}

/// Motion in which only neighbour `k` rotates about node `i`: block `k` is
/// `Ω (p*_k - p*_i)`, everything else zero. Planar only.
pub fn elementary_rotation(fw: &Framework, i: usize, k: usize) -> Result<DVector<f64>> {
    if fw.d() != 2 {
        return Err(Error::Unsupported("elementary rotations are planar".into()));
    }
    fw.check_node(i)?;
    fw.check_node(k)?;
    let (pi, pk) = (fw.point(i)?, fw.point(k)?);
    let (ex, ey) = (pk[0] - pi[0], pk[1] - pi[1]);
    let mut v = DVector::zeros(fw.dim());
    v[2 * k] = -ey;
    v[2 * k + 1] = ex;
    Ok(v)
}

/// Orthonormal basis of the directions in `R^d` orthogonal to `e`.
fn normal_directions(e: &DVector<f64>) -> Vec<DVector<f64>> {
    let d = e.len();
    if d == 2 {
        let u = DVector::from_vec(vec![-e[1], e[0]]);
        return vec![u.normalize()];
    }
    let mut vs = vec![e.clone()];
    vs.extend((0..d).map(|a| DVector::from_fn(d, |r, _| if r == a { 1.0 } else { 0.0 })));
    orthonormalize(d, &vs, 1e-10).vectors().skip(1).collect()
}

/// Motions that fix node `i` and keep every incident edge length to first order:
/// `{v : v_i = 0, (p*_k - p*_i)^T v_k = 0 for each neighbour k}`.
///
/// Built blockwise: the directions normal to the edge in each neighbour block
/// (for `d = 2` exactly the normalized elementary rotation), and all of `R^d`
/// in every other block except `i`.
pub fn local_rotational_subspace(fw: &Framework, i: usize, tol: &Tolerances) -> Result<Subspace> {
    fw.check_node(i)?;
    let (n, d) = (fw.n(), fw.d());
    let pi = DVector::from_column_slice(fw.point(i)?);
    let neighbors = fw.neighbors(i);
    let mut cols = Vec::new();
    for k in 0..n {
        if k == i {
            continue;
        }
        let dirs = if neighbors.binary_search(&k).is_ok() {
            let e = DVector::from_column_slice(fw.point(k)?) - &pi;
            normal_directions(&e)
        } else {
            (0..d)
                .map(|a| DVector::from_fn(d, |r, _| if r == a { 1.0 } else { 0.0 }))
                .collect()
        };
        for u in dirs {
            let mut v = DVector::zeros(n * d);
            v.rows_mut(k * d, d).copy_from(&u);
            cols.push(v);
        }
    }
    let basis = if cols.is_empty() {
        DMatrix::zeros(n * d, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok(Subspace::from_orthonormal(basis, tol.subspace))
}

/// The stacked constraints defining the local rotational subspace:
/// `d` rows selecting `v_i`, then one row `(p*_k - p*_i)^T` at block `k` per neighbour.
pub fn local_rotational_constraints(fw: &Framework, i: usize) -> Result<DMatrix<f64>> {
    fw.check_node(i)?;
    let (n, d) = (fw.n(), fw.d());
    let neighbors = fw.neighbors(i);
    let pi = fw.point(i)?;
    let mut m = DMatrix::zeros(d + neighbors.len(), n * d);
    for a in 0..d {
        m[(a, i * d + a)] = 1.0;
    }
    for (row, &k) in neighbors.iter().enumerate() {
        let pk = fw.point(k)?;
        for a in 0..d {
            m[(d + row, k * d + a)] = pk[a] - pi[a];
        }
    }
    Ok(m)
}

/// Nullspace of [`local_rotational_constraints`]; an independent route to the
/// same subspace as [`local_rotational_subspace`].
pub fn local_rotational_subspace_from_constraints(
    fw: &Framework,
    i: usize,
    tol: &Tolerances,
) -> Result<Subspace> {
    let m = local_rotational_constraints(fw, i)?;
    let sigma_max = m.norm();
    let threshold = tol
        .rank
        .unwrap_or(m.nrows().max(m.ncols()) as f64 * sigma_max * f64::EPSILON);
    Ok(Subspace::from_orthonormal(
        null_basis(&m, threshold),
        tol.subspace,
    ))
}

/// Kalman-style dimension counts of the four controllability/observability classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FourWay {
    pub controllable_observable: usize,
    pub uncontrollable_observable: usize,
    pub controllable_unobservable: usize,
    pub uncontrollable_unobservable: usize,
}

impl FourWay {
    pub fn total(&self) -> usize {
        self.controllable_observable
            + self.uncontrollable_observable
            + self.controllable_unobservable
            + self.uncontrollable_unobservable
    }

    fn add(&mut self, o: &FourWay) {
        self.controllable_observable += o.controllable_observable;
        self.uncontrollable_observable += o.uncontrollable_observable;
        self.controllable_unobservable += o.controllable_unobservable;
        self.uncontrollable_unobservable += o.uncontrollable_unobservable;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenspaceReport {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub is_zero: bool,
    pub uncontrollable_dim: usize,
    pub unobservable_dim: usize,
    pub four_way: FourWay,
}

/// Four-way split of every eigenspace. Within `E_λ`:
/// uncontrollable-unobservable is `C̄ ∩ Ō`; uncontrollable-observable is the rest
/// of `C̄`; controllable-unobservable the rest of `Ō`; and the remainder of
/// `E_λ` is controllable and observable.
#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub actuator: usize,
    pub sensor: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenspaces: Vec<EigenspaceReport>,
    pub four_way: FourWay,
    pub uncontrollable_dim: usize,
    pub unobservable_dim: usize,
    /// Largest block norm at the actuator over the uncontrollable basis.
    pub actuator_pinning_residual: f64,
    /// Largest block norm at the sensor over the unobservable basis.
    pub sensor_pinning_residual: f64,
    pub subspace_tol: f64,
    #[serde(skip)]
    pub uncontrollable: Subspace,
    #[serde(skip)]
    pub unobservable: Subspace,
    /// Uncontrollable and unobservable modes.
    #[serde(skip)]
    pub hidden_both: Subspace,
}

fn max_block_norm(s: &Subspace, node: usize, d: usize) -> f64 {
    s.basis()
        .column_iter()
        .map(|c| c.rows(node * d, d).norm())
        .fold(0.0, f64::max)
}

pub fn classify_modes(sys: &LinearizedSystem, tol: &Tolerances) -> Result<ModeReport> {
    let (d, nd) = (sys.d, sys.state_dim());
    let spaces = sys.eigenspaces(tol);
    let mut total = FourWay::default();
    let mut reports = Vec::with_capacity(spaces.len());
    let mut unc = Vec::new();
    let mut unobs = Vec::new();
    let mut both = Vec::new();

    for e in &spaces {
        let cbar = pin(&e.space, sys.actuator, d);
        let obar = pin(&e.space, sys.sensor, d);
        let uu = intersect(&cbar, &obar)?;
        let span = cbar.sum(&obar)?;
        let split = FourWay {
            uncontrollable_unobservable: uu.dim(),
            uncontrollable_observable: cbar.dim() - uu.dim(),
            controllable_unobservable: obar.dim() - uu.dim(),
            controllable_observable: e.space.dim() - span.dim(),
        };
        total.add(&split);
        reports.push(EigenspaceReport {
            eigenvalue: e.value,
            multiplicity: e.space.dim(),
            is_zero: e.is_zero,
            uncontrollable_dim: cbar.dim(),
            unobservable_dim: obar.dim(),
            four_way: split,
        });
        unc.extend(cbar.vectors());
        unobs.extend(obar.vectors());
        both.extend(uu.vectors());
    }

    let gather = |vs: Vec<DVector<f64>>| orthonormalize(nd, &vs, tol.subspace);
    let uncontrollable = gather(unc);
    let unobservable = gather(unobs);
    Ok(ModeReport {
        actuator: sys.actuator,
        sensor: sys.sensor,
        eigenvalues: sys.eigenvalues(),
        eigenspaces: reports,
        four_way: total,
        uncontrollable_dim: uncontrollable.dim(),
        unobservable_dim: unobservable.dim(),
        actuator_pinning_residual: max_block_norm(&uncontrollable, sys.actuator, d),
        sensor_pinning_residual: max_block_norm(&unobservable, sys.sensor, d),
        subspace_tol: tol.subspace,
        uncontrollable,
        unobservable,
        hidden_both: gather(both),
    })
}

/// Split of the uncontrollable subspace into its zero-eigenspace (rigid-body and
/// flex) part and its deformational part.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub uncontrollable_dim: usize,
    /// `dim(ker R ∩ ker B^T)`.
    pub rbm_part_dim: usize,
    /// Uncontrollable modes of the nonzero eigenspaces, i.e. `C̄ ∩ Im R^T`.
    pub deformation_part_dim: usize,
    /// The two parts are orthogonal and sum to `C̄`.
    pub holds: bool,
    pub part_angles: Vec<f64>,
    /// Dimension of the ambient intersection `Im R^T ∩ ker B^T`, which is in
    /// general larger than the deformational uncontrollable part.
    pub ambient_deformation_intersection_dim: usize,
    /// Whether the ambient intersection coincides with the deformational part.
    pub ambient_intersection_matches: bool,
}

pub fn check_decomposition(
    sys: &LinearizedSystem,
    fw: &Framework,
    tol: &Tolerances,
) -> Result<DecompositionReport> {
    let cbar = uncontrollable_subspace(sys, tol);
    let fixed = fixed_node_space(fw.n(), fw.d(), sys.actuator, tol.subspace);
    let flex = flex_space(sys.rigidity(), tol);
    let deform = deformation_space(sys.rigidity(), tol);

    let rbm_part = intersect(&flex, &fixed)?;
    let spectral_deform = pinned_sum(
        &sys.eigenspaces(tol)
            .into_iter()
            .filter(|e| !e.is_zero)
            .collect::<Vec<_>>(),
        sys.actuator,
        fw.d(),
        fw.dim(),
        tol.subspace,
    );
    let deform_part = intersect(&cbar, &deform)?;
    let ambient = intersect(&deform, &fixed)?;

    let holds = direct_sum_check(&rbm_part, &deform_part, &cbar)?
        && crate::subspace::equal(&deform_part, &spectral_deform)?;
    let part_angles = if rbm_part.dim() > 0 && deform_part.dim() > 0 {
        crate::subspace::principal_angles(&rbm_part, &deform_part)?
    } else {
        Vec::new()
    };
    Ok(DecompositionReport {
        uncontrollable_dim: cbar.dim(),
        rbm_part_dim: rbm_part.dim(),
        deformation_part_dim: deform_part.dim(),
        holds,
        part_angles,
        ambient_deformation_intersection_dim: ambient.dim(),
        ambient_intersection_matches: crate::subspace::equal(&ambient, &deform_part)?,
    })
}

/// Pairwise relations between the uncontrollable subspace `C̄`, the local
/// rotational subspace `T_i` and the global rotational subspace `R_i`.
/// Nothing here is asserted; the verdicts are data.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub actuator: usize,
    pub uncontrollable_vs_local: Relation,
    pub uncontrollable_vs_global: Relation,
    pub local_vs_global: Relation,
    /// `T_i ⊇ (C̄ ∩ E_0)`.
    pub local_contains_hidden_zero_modes: bool,
    /// `C̄ = T_i` numerically.
    pub uncontrollable_equals_local: bool,
}

pub fn check_unified_theorem(
    sys: &LinearizedSystem,
    fw: &Framework,
    tol: &Tolerances,
) -> Result<TheoremReport> {
    let i = sys.actuator;
    let cbar = uncontrollable_subspace(sys, tol);
    let local = local_rotational_subspace(fw, i, tol)?;
    let global = global_rotational_subspace(fw, i, tol)?;
    let hidden_zero = uncontrollable_zero_modes(sys, tol);
    let uncontrollable_vs_local = Relation::between(&cbar, &local)?;
    Ok(TheoremReport {
        actuator: i,
        uncontrollable_equals_local: uncontrollable_vs_local.equal,
        uncontrollable_vs_local,
        uncontrollable_vs_global: Relation::between(&cbar, &global)?,
        local_vs_global: Relation::between(&local, &global)?,
        local_contains_hidden_zero_modes: contains(&local, &hidden_zero)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidCorollary {
    /// `dim(T_i ∩ Im R^T)`.
    pub local_deformation_dim: usize,
    /// `dim(R_i ⊕ (T_i ∩ Im R^T))`.
    pub predicted_dim: usize,
    pub uncontrollable_dim: usize,
    pub components_orthogonal: bool,
    /// `C̄` vs `R_i ⊕ (T_i ∩ Im R^T)`.
    pub relation: Relation,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompleteCorollary {
    pub local_dim: usize,
    pub global_dim: usize,
    /// `T_i` vs `R_i`.
    pub local_vs_global: Relation,
    /// `C̄` vs `R_i`.
    pub uncontrollable_vs_global: Relation,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    pub actuator: usize,
    pub rigidity: RigidityClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rigid: Option<RigidCorollary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complete: Option<CompleteCorollary>,
    pub skipped: Vec<String>,
}

pub fn check_corollaries(fw: &Framework, i: usize, tol: &Tolerances) -> Result<CorollaryReport> {
    let sys = linearize(fw, i, i)?;
    let class = rigidity_summary(fw, tol).class;
    let cbar = uncontrollable_subspace(&sys, tol);
    let local = local_rotational_subspace(fw, i, tol)?;
    let global = global_rotational_subspace(fw, i, tol)?;
    let mut skipped = Vec::new();

    let rigid = if class == RigidityClass::Flexible {
        skipped.push("rigid-framework decomposition: framework is flexible".to_string());
        None
    } else {
        let deform = deformation_space(sys.rigidity(), tol);
        let local_deform = intersect(&local, &deform)?;
        let predicted = global.sum(&local_deform)?;
        let components_orthogonal = local_deform.dim() == 0
            || (global.basis().transpose() * local_deform.basis()).amax() <= tol.subspace;
        let relation = Relation::between(&cbar, &predicted)?;
        Some(RigidCorollary {
            local_deformation_dim: local_deform.dim(),
            predicted_dim: predicted.dim(),
            uncontrollable_dim: cbar.dim(),
            components_orthogonal,
            holds: relation.equal,
            relation,
        })
    };

    let complete = if !fw.is_complete() {
        skipped.push("complete-graph reduction: graph is not complete".to_string());
        None
    } else if fw.n() < fw.d() + 1 {
        skipped.push(format!(
            "complete-graph reduction: needs n >= d + 1 = {}",
            fw.d() + 1
        ));
        None
    } else {
        let local_vs_global = Relation::between(&local, &global)?;
        Some(CompleteCorollary {
            local_dim: local.dim(),
            global_dim: global.dim(),
            holds: local_vs_global.equal,
            uncontrollable_vs_global: Relation::between(&cbar, &global)?,
            local_vs_global,
        })
    };

    Ok(CorollaryReport {
        actuator: i,
        rigidity: class,
        rigid,
        complete,
        skipped,
    })
}

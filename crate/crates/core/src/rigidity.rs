//! Rigidity function, rigidity matrix and its four fundamental subspaces.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{Framework, Tolerances};
use crate::linalg::{default_rank_tol, right_svd};
use crate::subspace::{orthonormalize, Subspace};

/// Squared edge lengths of configuration `p`, one entry per canonical edge.
pub fn rigidity_function(fw: &Framework, p: &DVector<f64>) -> Result<DVector<f64>> {
    fw.check_state(p)?;
    let d = fw.d();
    Ok(DVector::from_iterator(
        fw.m(),
        fw.edges()
            .iter()
            .map(|&(i, j)| (p.rows(i * d, d) - p.rows(j * d, d)).norm_squared()),
    ))
}

/// Jacobian of [`rigidity_function`], `m x nd`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityMatrix {
    entries: DMatrix<f64>,
    fingerprint: u64,
}

impl RigidityMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// Fingerprint of the framework the matrix was built from.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.entries.ncols()
    }

    /// All `nd` singular values (zero-padded when `m < nd`), descending.
    pub fn singular_values(&self) -> Vec<f64> {
        right_svd(&self.entries).singular_values
    }

    /// The rank threshold in effect: the override if given, else the SVD policy.
    pub fn rank_tol(&self, tol: &Tolerances) -> f64 {
        tol.rank.unwrap_or_else(|| {
            let sigma_max = self.singular_values().first().copied().unwrap_or(0.0);
            default_rank_tol(self.m(), self.state_dim(), sigma_max)
        })
    }

    pub fn rank(&self, tol: &Tolerances) -> usize {
        let threshold = self.rank_tol(tol);
        self.singular_values()
            .into_iter()
            .filter(|&s| s > threshold)
            .count()
    }

    /// Splits the right singular basis into (row space, nullspace).
    fn split_right(mat: &DMatrix<f64>, threshold: f64, tol: f64) -> (Subspace, Subspace) {
        let svd = right_svd(mat);
        let (live, dead): (Vec<usize>, Vec<usize>) =
            (0..svd.singular_values.len()).partition(|&k| svd.singular_values[k] > threshold);
        (
            Subspace::from_orthonormal(svd.v.select_columns(live.iter()), tol),
            Subspace::from_orthonormal(svd.v.select_columns(dead.iter()), tol),
        )
    }
}

pub fn rigidity_matrix(fw: &Framework, p: &DVector<f64>) -> Result<RigidityMatrix> {
    fw.check_state(p)?;
    let d = fw.d();
    let mut entries = DMatrix::zeros(fw.m(), fw.dim());
    for (k, &(i, j)) in fw.edges().iter().enumerate() {
        for a in 0..d {
            let diff = 2.0 * (p[i * d + a] - p[j * d + a]);
            entries[(k, i * d + a)] = diff;
            entries[(k, j * d + a)] = -diff;
        }
    }
    Ok(RigidityMatrix {
        entries,
        fingerprint: fw.fingerprint(),
    })
}

/// Rigidity matrix at the reference configuration.
pub fn reference_rigidity_matrix(fw: &Framework) -> RigidityMatrix {
    rigidity_matrix(fw, fw.positions()).expect("reference positions have the right length")
}

/// Infinitesimal flexes, `ker R`.
pub fn flex_space(rm: &RigidityMatrix, tol: &Tolerances) -> Subspace {
    RigidityMatrix::split_right(&rm.entries, rm.rank_tol(tol), tol.subspace).1
}

/// Infinitesimal deformations, `Im R^T`.
pub fn deformation_space(rm: &RigidityMatrix, tol: &Tolerances) -> Subspace {
    RigidityMatrix::split_right(&rm.entries, rm.rank_tol(tol), tol.subspace).0
}

/// Self-stresses, `ker R^T` (a subspace of `R^m`).
pub fn self_stress_space(rm: &RigidityMatrix, tol: &Tolerances) -> Subspace {
    RigidityMatrix::split_right(&rm.entries.transpose(), rm.rank_tol(tol), tol.subspace).1
}

/// Basis of infinitesimal rotation generators: `E_ba - E_ab` for `a < b`.
/// For `d = 2` this is the single matrix `[[0, -1], [1, 0]]`.
pub fn skew_basis(d: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for a in 0..d {
        for b in a + 1..d {
            let mut omega = DMatrix::zeros(d, d);
            omega[(b, a)] = 1.0;
            omega[(a, b)] = -1.0;
            out.push(omega);
        }
    }
    out
}

/// Stacks `omega (p_k - center)` over all agents.
pub(crate) fn rotation_field(fw: &Framework, omega: &DMatrix<f64>, center: &DVector<f64>) -> DVector<f64> {
    let d = fw.d();
    let p = fw.positions();
    let mut v = DVector::zeros(fw.dim());
    for k in 0..fw.n() {
        let rel = p.rows(k * d, d) - center;
        v.rows_mut(k * d, d).copy_from(&(omega * rel));
    }
    v
}

/// Orthonormal basis of the rigid-body motions: one translation per axis and
/// the rotations about the center of mass.
#[derive(Debug, Clone)]
pub struct RbmBasis {
    pub translations: Vec<DVector<f64>>,
    pub rotations: Vec<DVector<f64>>,
    pub center: DVector<f64>,
    n: usize,
    d: usize,
    rotation_norm: f64,
}

impl RbmBasis {
    pub fn all(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.translations.iter().chain(&self.rotations)
    }

    pub fn subspace(&self, tol: f64) -> Subspace {
        let vs: Vec<_> = self.all().cloned().collect();
        orthonormalize(self.n * self.d, &vs, tol)
    }

    /// Planar rotation `v_r`.
    pub fn rotation(&self) -> Result<&DVector<f64>> {
        if self.d != 2 {
            return Err(Error::Unsupported(format!(
                "a single rotational mode exists only for d = 2 (d = {})",
                self.d
            )));
        }
        Ok(&self.rotations[0])
    }

    /// `||Omega (p_k - p_cm)||` stacked over agents, i.e. the factor between the
    /// unit rotational mode and the unit-rate rotation about the center. Planar only.
    pub fn rotation_norm(&self) -> Result<f64> {
        self.rotation()?;
        Ok(self.rotation_norm)
    }

    /// Translations rescaled so that each agent block is a standard basis vector.
    pub fn unit_block_translations(&self) -> Vec<DVector<f64>> {
        let scale = (self.n as f64).sqrt();
        self.translations.iter().map(|t| t * scale).collect()
    }
}

pub fn rbm_basis(fw: &Framework) -> Result<RbmBasis> {
    let (n, d) = (fw.n(), fw.d());
    let p = fw.positions();
    let mut center = DVector::zeros(d);
    for k in 0..n {
        center += p.rows(k * d, d);
    }
    center /= n as f64;

    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let translations = (0..d)
        .map(|a| DVector::from_fn(n * d, |r, _| if r % d == a { inv_sqrt_n } else { 0.0 }))
        .collect();

    let raw: Vec<DVector<f64>> = skew_basis(d)
        .iter()
        .map(|omega| rotation_field(fw, omega, &center))
        .collect();
    let rotation_norm = raw[0].norm();
    let scale = raw.iter().map(DVector::norm).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Degenerate(
            "every agent sits at the center of mass; no rotational mode".into(),
        ));
    }
    // Relative tolerance: rotations that vanish on the configuration are dropped.
    let rotations = orthonormalize(n * d, &raw, 1e-10).vectors().collect();

    Ok(RbmBasis {
        translations,
        rotations,
        center,
        n,
        d,
        rotation_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RigidityClass {
    Flexible,
    /// Infinitesimally rigid with no self-stress.
    MinimallyRigid,
    /// Infinitesimally rigid with at least one self-stress.
    RigidWithRedundancy,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigiditySummary {
    pub class: RigidityClass,
    pub rank: usize,
    pub rank_tol: f64,
    pub m: usize,
    pub flex_dim: usize,
    pub self_stress_dim: usize,
    pub deformation_dim: usize,
    /// Dimension of the rigid-body motions of this configuration.
    pub trivial_dim: usize,
}

/// Dimension of the infinitesimal rigid motions. `d(d+1)/2` once the agents
/// can span `R^d`; for fewer agents it is measured from the motions themselves.
fn trivial_motion_dim(fw: &Framework) -> usize {
    let d = fw.d();
    if fw.n() > d {
        return d * (d + 1) / 2;
    }
    let origin = DVector::zeros(d);
    let mut vs: Vec<DVector<f64>> = (0..d)
        .map(|a| DVector::from_fn(fw.dim(), |r, _| if r % d == a { 1.0 } else { 0.0 }))
        .collect();
    vs.extend(skew_basis(d).iter().map(|o| rotation_field(fw, o, &origin)));
    orthonormalize(fw.dim(), &vs, 1e-10).dim()
}

pub fn rigidity_summary(fw: &Framework, tol: &Tolerances) -> RigiditySummary {
    let rm = reference_rigidity_matrix(fw);
    let rank = rm.rank(tol);
    let m = fw.m();
    let flex_dim = fw.dim() - rank;
    let trivial_dim = trivial_motion_dim(fw);
    let class = if flex_dim > trivial_dim {
        RigidityClass::Flexible
    } else if m == rank {
        RigidityClass::MinimallyRigid
    } else {
        RigidityClass::RigidWithRedundancy
    };
    RigiditySummary {
        class,
        rank,
        rank_tol: rm.rank_tol(tol),
        m,
        flex_dim,
        self_stress_dim: m - rank,
        deformation_dim: rank,
        trivial_dim,
    }
}

pub fn classify_rigidity(fw: &Framework, tol: &Tolerances) -> RigidityClass {
    rigidity_summary(fw, tol).class
}

pub fn is_infinitesimally_rigid(fw: &Framework, tol: &Tolerances) -> bool {
    classify_rigidity(fw, tol) != RigidityClass::Flexible
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[[f64; 2]]) -> Vec<Vec<f64>> {
        xs.iter().map(|p| p.to_vec()).collect()
    }

    fn triangle() -> Framework {
        Framework::complete(&pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])).unwrap()
    }

    fn square(edges: Vec<(usize, usize)>) -> Framework {
        Framework::from_points(&pts(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), edges).unwrap()
    }

    fn braced_square() -> Framework {
        square(vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)])
    }

    fn four_cycle() -> Framework {
        square(vec![(0, 1), (1, 2), (2, 3), (0, 3)])
    }

    fn k4_generic() -> Framework {
        Framework::complete(&pts(&[[0.0, 0.0], [1.3, 0.1], [0.9, 1.1], [-0.2, 0.8]])).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn rigidity_function_values() {
        let fw = triangle();
        let r = rigidity_function(&fw, fw.positions()).unwrap();
        assert_eq!(r.as_slice(), &[1.0, 1.0, 2.0]);
        let zero = rigidity_function(&fw, &DVector::from_element(6, 0.7)).unwrap();
        assert_eq!(zero.norm(), 0.0);

        // Edges (1,2),(1,3),(1,4),(2,3),(3,4), evaluated by hand.
        let sq = braced_square();
        assert_eq!(sq.edges(), &[(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]);
        let r = rigidity_function(&sq, sq.positions()).unwrap();
        assert_eq!(r.as_slice(), &[1.0, 2.0, 1.0, 1.0, 1.0]);
        assert!(rigidity_function(&sq, &DVector::zeros(7)).is_err());
    }

    #[test]
    fn rigidity_matrix_rows() {
        let fw = triangle();
        let rm = reference_rigidity_matrix(&fw);
        let row: Vec<f64> = rm.entries().row(0).iter().copied().collect();
        assert_eq!(row, vec![-2.0, 0.0, 2.0, 0.0, 0.0, 0.0]);

        let doubled = rigidity_matrix(&fw, &(fw.positions() * 2.0)).unwrap();
        assert_eq!(doubled.entries(), &(rm.entries() * 2.0));
        assert_eq!(rm.fingerprint(), fw.fingerprint());
    }

    #[test]
    fn rbm_basis_triangle() {
        let fw = triangle();
        let rbm = rbm_basis(&fw).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let vx: Vec<f64> = rbm.translations[0].iter().copied().collect();
        for (a, b) in vx.iter().zip([s, 0.0, s, 0.0, s, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((rbm.center[0] - 1.0 / 3.0).abs() < 1e-15);
        // Unnormalized first block is Omega (p_1 - p_cm) = (1/3, -1/3).
        let vr = rbm.rotation().unwrap() * rbm.rotation_norm().unwrap();
        assert!((vr[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((vr[1] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rbm_basis_is_flex_and_orthonormal() {
        let fw = braced_square();
        let rm = reference_rigidity_matrix(&fw);
        let rbm = rbm_basis(&fw).unwrap();
        let vs: Vec<_> = rbm.all().collect();
        assert_eq!(vs.len(), 3);
        for (a, u) in vs.iter().enumerate() {
            assert!((rm.entries() * *u).norm() < 1e-10);
            for (b, w) in vs.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((u.dot(w) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rbm_basis_rejects_collapsed_configuration() {
        let fw = Framework::new(2, 2, vec![], vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!(matches!(rbm_basis(&fw), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fundamental_subspace_dimensions() {
        let t = tol();
        let tri = reference_rigidity_matrix(&triangle());
        assert_eq!(flex_space(&tri, &t).dim(), 3);
        assert_eq!(deformation_space(&tri, &t).dim(), 3);

        let bar = Framework::complete(&pts(&[[0.0, 0.0], [1.0, 0.0]])).unwrap();
        let bar_rm = reference_rigidity_matrix(&bar);
        assert_eq!(flex_space(&bar_rm, &t).dim(), 3);
        assert_eq!(self_stress_space(&bar_rm, &t).dim(), 0);

        let path = Framework::from_points(&pts(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), vec![(0, 1), (1, 2)])
            .unwrap();
        assert_eq!(flex_space(&reference_rigidity_matrix(&path), &t).dim(), 4);

        let sq = reference_rigidity_matrix(&braced_square());
        assert_eq!(self_stress_space(&sq, &t).dim(), 0);
        assert_eq!(deformation_space(&sq, &t).dim(), 5);

        let k4 = reference_rigidity_matrix(&k4_generic());
        assert_eq!(self_stress_space(&k4, &t).dim(), 1);
    }

    #[test]
    fn flex_and_deformation_split_the_state_space() {
        let t = tol();
        for fw in [triangle(), braced_square(), four_cycle(), k4_generic()] {
            let rm = reference_rigidity_matrix(&fw);
            let flex = flex_space(&rm, &t);
            let def = deformation_space(&rm, &t);
            let whole = Subspace::full(fw.dim(), t.subspace);
            assert!(crate::subspace::direct_sum_check(&flex, &def, &whole).unwrap());
        }
    }

    #[test]
    fn classification() {
        let t = tol();
        assert_eq!(
            classify_rigidity(&braced_square(), &t),
            RigidityClass::MinimallyRigid
        );
        assert_eq!(
            classify_rigidity(&k4_generic(), &t),
            RigidityClass::RigidWithRedundancy
        );
        assert_eq!(classify_rigidity(&four_cycle(), &t), RigidityClass::Flexible);
        assert_eq!(classify_rigidity(&triangle(), &t), RigidityClass::MinimallyRigid);
        let summary = rigidity_summary(&braced_square(), &t);
        assert_eq!(summary.rank, 5);
        assert_eq!(summary.flex_dim, 3);

        let collinear = Framework::complete(&pts(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])).unwrap();
        assert_eq!(classify_rigidity(&collinear, &t), RigidityClass::Flexible);
        let bar = Framework::complete(&pts(&[[0.0, 0.0], [1.0, 0.0]])).unwrap();
        assert_eq!(classify_rigidity(&bar, &t), RigidityClass::MinimallyRigid);
    }

    #[test]
    fn planar_skew_matches_standard_rotation() {
        let omega = &skew_basis(2)[0];
        assert_eq!(omega.as_slice(), &[0.0, 1.0, -1.0, 0.0]); // column-major [[0,-1],[1,0]]
        assert_eq!(skew_basis(3).len(), 3);
    }
}

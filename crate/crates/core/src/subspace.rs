//! Subspaces as orthonormal bases, and the comparisons used to test every
//! geometric claim numerically: projection, intersection, principal angles,
//! containment and orthogonal direct sums.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{null_basis, right_svd};

/// A linear subspace of `R^N` held as an `N x r` matrix with orthonormal
/// columns, plus the tolerance used when comparing it with other subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
    tol: f64,
}

impl Subspace {
    pub fn zero(ambient_dim: usize, tol: f64) -> Self {
        Self {
            basis: DMatrix::zeros(ambient_dim, 0),
            tol,
        }
    }

    pub fn full(ambient_dim: usize, tol: f64) -> Self {
        Self {
            basis: DMatrix::identity(ambient_dim, ambient_dim),
            tol,
        }
    }

    /// Wraps a basis that is already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>, tol: f64) -> Self {
        debug_assert!(
            basis.ncols() == 0
                || (basis.transpose() * &basis - DMatrix::identity(basis.ncols(), basis.ncols())).amax()
                    < 1e-10,
            "basis is not orthonormal"
        );
        Self { basis, tol }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn vectors(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.basis.column_iter().map(|c| c.into_owned())
    }

    fn check_vec(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() == self.ambient_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                actual: v.len(),
            })
        }
    }

    fn check_pair(&self, other: &Subspace) -> Result<()> {
        if other.ambient_dim() == self.ambient_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                actual: other.ambient_dim(),
            })
        }
    }

    /// Orthogonal projection `Q Q^T v`.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vec(v)?;
        Ok(&self.basis * (self.basis.transpose() * v))
    }

    /// Norm of the component of `v` outside the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> Result<f64> {
        Ok((v - self.project(v)?).norm())
    }

    /// Span of both subspaces.
    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.check_pair(other)?;
        let vectors: Vec<_> = self.vectors().chain(other.vectors()).collect();
        Ok(orthonormalize(
            self.ambient_dim(),
            &vectors,
            self.tol.max(other.tol),
        ))
    }

    /// The part of `whole` orthogonal to `self`.
    pub fn complement_in(&self, whole: &Subspace) -> Result<Subspace> {
        self.check_pair(whole)?;
        let tol = self.tol.max(whole.tol);
        if whole.dim() == 0 {
            return Ok(Subspace::zero(self.ambient_dim(), tol));
        }
        // Coefficients y with (W y) orthogonal to every column of Q.
        let coupling = self.basis.transpose() * &whole.basis;
        let coeffs = null_basis(&coupling, tol);
        Ok(Subspace::from_orthonormal(&whole.basis * coeffs, tol))
    }

    /// Orthogonal complement in the ambient space.
    pub fn orthogonal_complement(&self) -> Subspace {
        self.complement_in(&Subspace::full(self.ambient_dim(), self.tol))
            .expect("same ambient dimension")
    }
}

/// Orthonormal basis of the span of `vectors` by twice-iterated modified
/// Gram-Schmidt. A vector is dropped when less than `tol` of its norm survives
/// orthogonalization against the ones already kept.
pub fn orthonormalize(ambient_dim: usize, vectors: &[DVector<f64>], tol: f64) -> Subspace {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        assert_eq!(v.len(), ambient_dim, "vector length must match ambient dimension");
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        let mut w = v / norm;
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let rest = w.norm();
        if rest > tol {
            kept.push(w / rest);
        }
    }
    let basis = if kept.is_empty() {
        DMatrix::zeros(ambient_dim, 0)
    } else {
        DMatrix::from_columns(&kept)
    };
    Subspace { basis, tol }
}

/// Cosines and sines of the principal angles between `a` and `b`
/// (`dim b <= dim a`), each sorted so that the angles ascend.
fn cos_sin(a: &Subspace, b: &Subspace) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
    let cross = a.basis.transpose() * &b.basis;
    let mut cosines = right_svd(&cross.transpose()).singular_values;
    cosines.truncate(b.dim());
    cosines.sort_by(|x, y| y.total_cmp(x));

    let outside = &b.basis - &a.basis * &cross;
    let svd = right_svd(&outside);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let sines = order.iter().map(|&k| svd.singular_values[k]).collect();
    let dirs = svd.v.select_columns(order.iter());
    (cosines, sines, dirs)
}

fn ordered<'a>(s1: &'a Subspace, s2: &'a Subspace) -> (&'a Subspace, &'a Subspace) {
    if s2.dim() <= s1.dim() {
        (s1, s2)
    } else {
        (s2, s1)
    }
}

/// Principal angles in radians, ascending, `min(dim s1, dim s2)` of them.
///
/// Small angles come from the sines (residual of one basis against the other)
/// and large ones from the cosines, so both ends are resolved to near machine
/// precision rather than the `sqrt(eps)` an arccos alone gives near zero.
pub fn principal_angles(s1: &Subspace, s2: &Subspace) -> Result<Vec<f64>> {
    s1.check_pair(s2)?;
    if s1.dim() == 0 || s2.dim() == 0 {
        return Err(Error::Degenerate(
            "principal angles need two non-trivial subspaces".into(),
        ));
    }
    let (a, b) = ordered(s1, s2);
    let (cosines, sines, _) = cos_sin(a, b);
    let angles = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            if s < FRAC_1_SQRT_2 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.clamp(-1.0, 1.0).acos()
            }
        })
        .collect();
    Ok(angles)
}

/// Intersection via principal vectors whose angle is below the tolerance.
pub fn intersect(s1: &Subspace, s2: &Subspace) -> Result<Subspace> {
    s1.check_pair(s2)?;
    let tol = s1.tol.max(s2.tol);
    if s1.dim() == 0 || s2.dim() == 0 {
        return Ok(Subspace::zero(s1.ambient_dim(), tol));
    }
    let (a, b) = ordered(s1, s2);
    let (_, sines, dirs) = cos_sin(a, b);
    let keep: Vec<usize> = (0..sines.len()).filter(|&k| sines[k] <= tol).collect();
    let coeffs = dirs.select_columns(keep.iter());
    Ok(Subspace::from_orthonormal(&b.basis * coeffs, tol))
}

/// True iff every basis vector of `inner` lies in `outer` up to the tolerance.
pub fn contains(outer: &Subspace, inner: &Subspace) -> Result<bool> {
    outer.check_pair(inner)?;
    let tol = outer.tol.max(inner.tol);
    for v in inner.vectors() {
        if outer.residual(&v)? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Mutual containment.
pub fn equal(s1: &Subspace, s2: &Subspace) -> Result<bool> {
    Ok(s1.dim() == s2.dim() && contains(s1, s2)? && contains(s2, s1)?)
}

/// True iff `s1` and `s2` are orthogonal, both lie in `whole`, and their
/// dimensions add up to `dim whole`.
pub fn direct_sum_check(s1: &Subspace, s2: &Subspace, whole: &Subspace) -> Result<bool> {
    s1.check_pair(s2)?;
    s1.check_pair(whole)?;
    let tol = s1.tol.max(s2.tol).max(whole.tol);
    let orthogonal = s1.dim() == 0 || s2.dim() == 0 || (s1.basis.transpose() * &s2.basis).amax() <= tol;
    Ok(orthogonal && s1.dim() + s2.dim() == whole.dim() && contains(whole, s1)? && contains(whole, s2)?)
}

/// Serializable description of how two subspaces relate.
#[derive(Debug, Clone, Serialize)]
pub struct Relation {
    pub dim_a: usize,
    pub dim_b: usize,
    pub a_contains_b: bool,
    pub b_contains_a: bool,
    pub equal: bool,
    pub principal_angles: Vec<f64>,
    pub tol: f64,
}

impl Relation {
    pub fn between(a: &Subspace, b: &Subspace) -> Result<Self> {
        let a_contains_b = contains(a, b)?;
        let b_contains_a = contains(b, a)?;
        let principal_angles = if a.dim() > 0 && b.dim() > 0 {
            principal_angles(a, b)?
        } else {
            Vec::new()
        };
        Ok(Self {
            dim_a: a.dim(),
            dim_b: b.dim(),
            a_contains_b,
            b_contains_a,
            equal: a_contains_b && b_contains_a && a.dim() == b.dim(),
            principal_angles,
            tol: a.tol.max(b.tol),
        })
    }
}

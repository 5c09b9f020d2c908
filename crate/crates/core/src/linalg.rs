//! Small dense helpers on top of nalgebra's SVD.

use nalgebra::DMatrix;

/// Right singular structure of a matrix: all `ncols` singular values in
/// descending order with the matching right singular vectors as columns of `v`.
///
/// Matrices with fewer rows than columns are zero-padded so that the full
/// right basis (including the nullspace) is available.
pub(crate) struct RightSvd {
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn right_svd(mat: &DMatrix<f64>) -> RightSvd {
    let (rows, cols) = mat.shape();
    if cols == 0 {
        return RightSvd {
            singular_values: Vec::new(),
            v: DMatrix::zeros(0, 0),
        };
    }
    if rows == 0 {
        return RightSvd {
            singular_values: vec![0.0; cols],
            v: DMatrix::identity(cols, cols),
        };
    }
    let padded;
    let target = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(mat);
        padded = p;
        &padded
    } else {
        mat
    };
    let svd = target.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut v = DMatrix::zeros(cols, cols);
    let mut singular_values = Vec::with_capacity(cols);
    for (dst, &src) in order.iter().enumerate() {
        singular_values.push(svd.singular_values[src]);
        v.set_column(dst, &v_t.row(src).transpose());
    }
    RightSvd { singular_values, v }
}

/// Scale-aware rank threshold `max(rows, cols) * sigma_max * eps`.
pub(crate) fn default_rank_tol(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * f64::EPSILON
}

/// Orthonormal basis (as columns) of the right nullspace of `mat`, with
/// singular values `<= tol` counted as zero.
pub(crate) fn null_basis(mat: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let svd = right_svd(mat);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= tol)
        .collect();
    svd.v.select_columns(keep.iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_matrix_gets_full_right_basis() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let svd = right_svd(&m);
        assert_eq!(svd.singular_values.len(), 3);
        assert!((svd.singular_values[0] - 1.0).abs() < 1e-15);
        let null = null_basis(&m, 1e-12);
        assert_eq!(null.ncols(), 2);
        assert!((m * null).norm() < 1e-15);
    }

    #[test]
    fn empty_rows_mean_everything_is_null() {
        let m = DMatrix::<f64>::zeros(0, 4);
        assert_eq!(null_basis(&m, 0.0).ncols(), 4);
    }
}

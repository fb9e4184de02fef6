//! Dense f64 helpers on top of nalgebra: rank, nullspace, least squares.

use nalgebra::{DMatrix, DVector};

/// Singular values, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Numeric rank with singular values below `rel_tol·σ_max` treated as zero.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_tol * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the right nullspace of `m`.
pub fn nullspace(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to at least n rows so V is square
    let mut a = DMatrix::zeros(m.nrows().max(n), n);
    a.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = a.svd(false, true);
    let vt = svd.v_t.unwrap();
    let s = &svd.singular_values;
    let top = s.iter().fold(0.0f64, |x, &y| x.max(y));
    let cols: Vec<DVector<f64>> = (0..s.len())
        .filter(|&i| top == 0.0 || s[i] <= rel_tol * top)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the complement of span(`sub`) inside span(`full`).
/// Both are column bases of the same ambient space; `sub ⊂ full` is assumed.
pub fn complement_in(full: &DMatrix<f64>, sub: &DMatrix<f64>) -> DMatrix<f64> {
    if sub.ncols() == 0 {
        return full.clone();
    }
    // coordinates of sub in the full basis, then their orthogonal complement
    let coords = full.transpose() * sub;
    let comp = nullspace(&coords.transpose(), 1e-10);
    full * comp
}

/// Canonical basis of a column space: reduced row echelon form of the
/// transposed basis, so each vector has a leading unit entry.
pub fn canonical_basis(cols: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let mut m = cols.transpose();
    let (r, c) = m.shape();
    let mut row = 0;
    for col in 0..c {
        if row == r {
            break;
        }
        let (piv, val) = (row..r).map(|i| (i, m[(i, col)].abs())).fold((row, -1.0), |b, x| if x.1 > b.1 { x } else { b });
        if val <= tol {
            continue;
        }
        m.swap_rows(row, piv);
        let p = m[(row, col)];
        for j in 0..c {
            m[(row, j)] /= p;
        }
        for i in 0..r {
            if i != row {
                let f = m[(i, col)];
                if f != 0.0 {
                    for j in 0..c {
                        let v = m[(row, j)];
                        m[(i, j)] -= f * v;
                    }
                }
            }
        }
        row += 1;
    }
    (0..row)
        .map(|i| {
            let mut v = m.row(i).transpose();
            for x in v.iter_mut() {
                if x.abs() < 1e-13 {
                    *x = 0.0;
                }
            }
            v
        })
        .collect()
}

/// ‖Ax − b‖ relative to the size of the terms, max(‖b‖, ‖A‖·max(‖x‖, 1)).
/// The floor keeps an exactly cancelling right side from turning roundoff
/// into an O(1) relative error.
pub fn relative_residual(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = (a * x - b).norm();
    let scale = b.norm().max(a.norm() * x.norm().max(1.0));
    if scale == 0.0 {
        0.0
    } else {
        r / scale
    }
}

/// Least squares solution and its [`relative_residual`].
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE)).unwrap_or_else(|_| DVector::zeros(a.ncols()));
    let r = relative_residual(a, &x, b);
    (x, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_colinear_rows() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(rank(&m, 1e-8), 1);
    }

    #[test]
    fn nullspace_is_orthogonal_to_rows() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = nullspace(&m, 1e-10);
        assert_eq!(n.ncols(), 2);
        assert!((m * n).norm() < 1e-14);
    }

    #[test]
    fn canonical_basis_has_unit_pivots() {
        let cols = DMatrix::from_column_slice(3, 2, &[2.0, 0.0, 2.0, 1.0, 1.0, 1.0]);
        let b = canonical_basis(&cols, 1e-12);
        assert_eq!(b.len(), 2);
        assert!((b[0][0] - 1.0).abs() < 1e-15 && b[0][1] == 0.0);
        assert!(b[1][0] == 0.0 && (b[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_removes_subspace() {
        let full = DMatrix::<f64>::identity(3, 3);
        let sub = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let c = complement_in(&full, &sub);
        assert_eq!(c.ncols(), 2);
        assert!((sub.transpose() * c).norm() < 1e-14);
    }

    #[test]
    fn least_squares_exact_fit() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0, 1.0]);
        let (x, r) = lstsq(&a, &b);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12 && r < 1e-14);
    }
}

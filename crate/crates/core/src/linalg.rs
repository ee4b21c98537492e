//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};

/// Singular values in descending order. Empty for a matrix with no rows or
/// no columns.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Ratio of the smallest to the largest of the `ncols` leading singular
/// values; 1 for a matrix without columns, 0 when the matrix has fewer rows
/// than columns or is zero. A matrix has numerically full column rank when
/// this ratio exceeds the chosen tolerance.
pub fn column_rank_ratio(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    let sv = singular_values(m);
    let largest = sv[0];
    if largest == 0.0 {
        return 0.0;
    }
    sv[m.ncols() - 1] / largest
}

/// Orthonormal basis of the column space of `m`: left singular vectors whose
/// singular value exceeds `rel_tol` times the largest.
pub fn orthonormal_range(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let largest = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| largest > 0.0 && svd.singular_values[k] > rel_tol * largest)
        .collect();
    u.select_columns(&keep)
}

/// 0/1 matrix with one row per entry of `picks`, selecting that column of an
/// `n`-vector.
pub fn selection(picks: &[usize], n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(picks.len(), n);
    for (r, &c) in picks.iter().enumerate() {
        s[(r, c)] = 1.0;
    }
    s
}

/// Writes `block` into `target` with its top-left corner at `(row, col)`.
pub fn put(target: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>) {
    if block.nrows() == 0 || block.ncols() == 0 {
        return;
    }
    target
        .view_mut((row, col), (block.nrows(), block.ncols()))
        .copy_from(block);
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        put(&mut out, r, c, b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn concat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let data: Vec<f64> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    DVector::from_vec(data)
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_ratio_edge_cases() {
        assert_eq!(column_rank_ratio(&DMatrix::zeros(3, 0)), 1.0);
        assert_eq!(column_rank_ratio(&DMatrix::from_element(1, 2, 1.0)), 0.0);
        assert_eq!(column_rank_ratio(&DMatrix::zeros(2, 2)), 0.0);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0]));
        assert!((column_rank_ratio(&diag) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn range_of_triangle_incidence_transpose_is_two_dimensional() {
        // Transposed incidence of a 3-cycle: rank 2.
        let bt = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0, -1.0, 0.0, 1.0]);
        let q = orthonormal_range(&bt, 1e-12);
        assert_eq!(q.ncols(), 2);
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn block_diag_places_blocks() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let b = DMatrix::from_element(2, 1, 3.0);
        let m = block_diag(&[&a, &b]);
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(2, 1)], 3.0);
        assert_eq!(m[(1, 0)], 0.0);
    }
}

//! Fixed-order pairwise reductions.
//!
//! The reduction tree depends only on the slice length, never on thread
//! scheduling, so ensemble results are bitwise reproducible at any thread
//! count and the rounding error stays O(log N).

const LEAF: usize = 8;

/// Sum of `values` over a fixed binary tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Component-wise pairwise sum of equally sized rows.
pub fn pairwise_sum_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    assert!(!rows.is_empty(), "cannot reduce zero rows");
    let width = rows[0].len();
    if rows.len() <= LEAF {
        let mut acc = vec![0.0; width];
        for row in rows {
            debug_assert_eq!(row.len(), width);
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        return acc;
    }
    let mid = rows.len() / 2;
    let mut left = pairwise_sum_rows(&rows[..mid]);
    let right = pairwise_sum_rows(&rows[mid..]);
    for (a, b) in left.iter_mut().zip(&right) {
        *a += b;
    }
    left
}

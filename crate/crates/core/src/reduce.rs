//! Order-fixed parallel maps and pairwise summation.
//!
//! Results never depend on the number of worker threads: maps collect into
//! index order and sums use a fixed binary tree over that order.

use rayon::prelude::*;

/// Pairwise (cascade) sum with a fixed split rule.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// `(0..n).map(f)` evaluated in parallel, returned in index order.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

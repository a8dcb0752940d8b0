//! Reproducible floating point reductions.
//!
//! Sums are evaluated as fixed-shape pairwise trees over fixed-size blocks, so
//! the result depends only on the input order and never on how many worker
//! threads took part.

use rayon::prelude::*;

/// Block length of the leaves of the pairwise tree.
const BLOCK: usize = 256;

/// Pairwise (cascade) summation with a sequential leaf of [`BLOCK`] values.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = split_point(values.len());
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n`, with the same tree shape as
/// [`pairwise_sum`] over the materialized values.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    sum_range(0, n, f)
}

fn sum_range<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
    let len = hi - lo;
    if len <= BLOCK {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        return acc;
    }
    let mid = lo + split_point(len);
    sum_range(lo, mid, f) + sum_range(mid, hi, f)
}

/// Parallel variant of [`pairwise_sum_by`]; bitwise identical to it.
pub fn par_pairwise_sum_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: &F) -> f64 {
    par_sum_range(0, n, f)
}

fn par_sum_range<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
    let len = hi - lo;
    if len <= 64 * BLOCK {
        return sum_range(lo, hi, f);
    }
    let mid = lo + split_point(len);
    let (a, b) = rayon::join(|| par_sum_range(lo, mid, f), || par_sum_range(mid, hi, f));
    a + b
}

/// Sum of squares, reproducible.
pub fn sum_sq(values: &[f64]) -> f64 {
    par_pairwise_sum_by(values.len(), &|i| values[i] * values[i])
}

/// Dot product, reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    par_pairwise_sum_by(a.len(), &|i| a[i] * b[i])
}

/// Maximum of |v|; NaN propagates as NaN.
pub fn max_abs(values: &[f64]) -> f64 {
    values
        .par_iter()
        .map(|v| v.abs())
        .reduce(|| 0.0, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

// Split so that the left part is a whole number of blocks: the tree shape is
// then a function of the length alone.
fn split_point(len: usize) -> usize {
    let blocks = len.div_ceil(BLOCK);
    (blocks / 2) * BLOCK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_integers() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 49_995_000.0);
    }

    #[test]
    fn parallel_is_bitwise_sequential() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64)).collect();
        let seq = pairwise_sum(&v);
        let by = pairwise_sum_by(v.len(), &|i| v[i]);
        let par = par_pairwise_sum_by(v.len(), &|i| v[i]);
        assert_eq!(seq.to_bits(), by.to_bits());
        assert_eq!(seq.to_bits(), par.to_bits());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let v: Vec<f64> = (0..300_000u64).map(|i| ((i * 7919) % 1013) as f64 * 1e-7 + 0.1).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sum_sq(&v));
        let b = four.install(|| sum_sq(&v));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

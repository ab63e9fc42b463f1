//! Order-fixed pairwise (tree) summation used for empirical means.

const BLOCK: usize = 8;

/// Pairwise sum of `f(0) + ... + f(n - 1)`.
pub fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= BLOCK {
            let mut s = 0.0;
            for k in lo..hi {
                s += f(k);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    if n == 0 {
        0.0
    } else {
        rec(0, n, f)
    }
}

/// Pairwise mean of `f(0), ..., f(n - 1)`; zero for `n == 0`.
pub fn pairwise_mean<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    if n == 0 {
        0.0
    } else {
        pairwise_sum(n, f) / n as f64
    }
}

/// Coordinate-wise pairwise sum of vectors: `f(k, buf)` must write term `k` into `buf`.
pub fn pairwise_sum_vec<F: Fn(usize, &mut [f64])>(n: usize, dim: usize, f: &F) -> Vec<f64> {
    fn rec<F: Fn(usize, &mut [f64])>(lo: usize, hi: usize, dim: usize, f: &F) -> Vec<f64> {
        if hi - lo <= BLOCK {
            let mut acc = vec![0.0; dim];
            let mut buf = vec![0.0; dim];
            for k in lo..hi {
                f(k, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            let mut left = rec(lo, mid, dim, f);
            let right = rec(mid, hi, dim, f);
            for (a, b) in left.iter_mut().zip(&right) {
                *a += b;
            }
            left
        }
    }
    if n == 0 {
        vec![0.0; dim]
    } else {
        rec(0, n, dim, f)
    }
}

/// Coordinate-wise pairwise mean of vectors.
pub fn pairwise_mean_vec<F: Fn(usize, &mut [f64])>(n: usize, dim: usize, f: &F) -> Vec<f64> {
    let mut s = pairwise_sum_vec(n, dim, f);
    if n > 0 {
        let inv = n as f64;
        s.iter_mut().for_each(|v| *v /= inv);
    }
    s
}

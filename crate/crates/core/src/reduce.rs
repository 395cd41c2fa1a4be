//! Reductions whose result does not depend on the number of worker threads.
//!
//! Values are split into fixed-size blocks, each block is summed pairwise,
//! and block sums are combined pairwise in index order. The tree shape is a
//! function of the input length only.

use rayon::prelude::*;

const BLOCK: usize = 256;

fn pairwise(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            pairwise(&v[..mid]) + pairwise(&v[mid..])
        }
    }
}

/// Fixed-tree sum.
pub fn det_sum(values: &[f64]) -> f64 {
    let blocks: Vec<f64> = values.chunks(BLOCK).map(pairwise).collect();
    pairwise(&blocks)
}

/// Same tree as [`det_sum`], blocks summed in parallel.
pub fn det_sum_par(values: &[f64]) -> f64 {
    let blocks: Vec<f64> = values.par_chunks(BLOCK).map(pairwise).collect();
    pairwise(&blocks)
}

/// Fixed-tree sum of `f(i)` over `0..n`.
pub fn det_sum_map<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    let v: Vec<f64> = (0..n).map(f).collect();
    det_sum(&v)
}

pub fn det_max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn det_min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Trapezoid rule over `(t, v)` samples, accumulated left to right.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
    }
    acc
}

/// Running trapezoid integrals `∫_{t_0}^{t_k}` for every `k`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parallel_sum_is_bitwise_identical_across_pools() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..10_007).map(|_| rng.random_range(-1e3..1e3)).collect();
        let serial = det_sum(&v);
        for threads in [1, 2, 3, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let par = pool.install(|| det_sum_par(&v));
            assert_eq!(serial.to_bits(), par.to_bits(), "threads = {threads}");
        }
    }

    #[test]
    fn small_sums() {
        assert_eq!(det_sum(&[]), 0.0);
        assert_eq!(det_sum(&[2.5]), 2.5);
        assert_eq!(det_sum(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(det_sum_map(4, |i| i as f64), 6.0);
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let t = [0.0, 0.5, 2.0];
        let v = [1.0, 2.0, 5.0];
        assert!((trapezoid(&t, &v) - 6.0).abs() < 1e-15);
        assert_eq!(cumulative_trapezoid(&t, &v), vec![0.0, 0.75, 6.0]);
    }
}

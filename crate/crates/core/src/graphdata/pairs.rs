//! Linear indexing of unordered node pairs and uniform sampling over them.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// `n (n - 1) / 2`.
pub fn num_pairs(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

fn row_start(n: u64, u: u64) -> u64 {
    u * (2 * n - u - 1) / 2
}

/// Position of `(u, v)`, `u < v`, in row-major order of the strict upper triangle.
pub fn pair_index(n: usize, u: usize, v: usize) -> u64 {
    debug_assert!(u < v && v < n);
    row_start(n as u64, u as u64) + (v - u - 1) as u64
}

/// Inverse of [`pair_index`].
pub fn pair_at(n: usize, k: u64) -> (usize, usize) {
    let nn = n as u64;
    debug_assert!(k < num_pairs(n));
    // invert the row start quadratic, then repair floating-point rounding
    let b = 2.0 * nn as f64 - 1.0;
    let guess = ((b - (b * b - 8.0 * k as f64).max(0.0).sqrt()) / 2.0).floor();
    let mut u = (guess.max(0.0) as u64).min(nn.saturating_sub(2));
    while u > 0 && row_start(nn, u) > k {
        u -= 1;
    }
    while u + 1 < nn && row_start(nn, u + 1) <= k {
        u += 1;
    }
    let v = u + 1 + (k - row_start(nn, u));
    (u as usize, v as usize)
}

/// Draws `k` distinct unordered pairs uniformly from the pairs of `n` nodes
/// for which `excluded` is false. `num_excluded` must count those pairs.
///
/// Sparse requests use rejection sampling; when `k` is more than half the
/// available pairs the available set is enumerated instead. With
/// `max_attempts`, rejection sampling gives up after that many draws.
/// Output is sorted.
pub fn sample_distinct_pairs<R: Rng + ?Sized>(
    n: usize,
    k: u64,
    num_excluded: u64,
    excluded: impl Fn(usize, usize) -> bool,
    max_attempts: Option<u64>,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let total = num_pairs(n);
    let available = total.saturating_sub(num_excluded);
    if k > available {
        return Err(Error::Sampling(format!(
            "requested {k} pairs but only {available} are available"
        )));
    }
    let mut out = Vec::with_capacity(k as usize);
    if 2 * k <= available {
        let mut seen = HashSet::with_capacity(k as usize);
        let mut attempts = 0u64;
        while (out.len() as u64) < k {
            if max_attempts.is_some_and(|m| attempts >= m) {
                return Err(Error::Sampling(format!(
                    "found {} of {k} pairs after {attempts} attempts",
                    out.len()
                )));
            }
            attempts += 1;
            let idx = rng.random_range(0..total);
            let (u, v) = pair_at(n, idx);
            if !excluded(u, v) && seen.insert(idx) {
                out.push((u, v));
            }
        }
    } else {
        let mut pool = Vec::with_capacity(available as usize);
        for u in 0..n {
            for v in u + 1..n {
                if !excluded(u, v) {
                    pool.push((u, v));
                }
            }
        }
        out = index::sample(rng, pool.len(), k as usize)
            .into_iter()
            .map(|i| pool[i])
            .collect();
    }
    out.sort_unstable();
    Ok(out)
}

use rayon::prelude::*;

use crate::error::Result;

/// Items per work unit. Fixed so that the summation tree never depends on the
/// number of worker threads.
pub(crate) const CHUNK: usize = 16;

/// Map `0..n` in parallel and fold the results in index order.
pub(crate) fn ordered_reduce<T, M, Z, A>(n: usize, map: M, zero: Z, add: A) -> Result<T>
where
    T: Send,
    M: Fn(usize) -> Result<T> + Sync,
    Z: Fn() -> T + Sync,
    A: Fn(&mut T, T) + Sync,
{
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials: Vec<Result<T>> = starts
        .par_iter()
        .map(|&start| {
            let mut acc = zero();
            for i in start..(start + CHUNK).min(n) {
                add(&mut acc, map(i)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = zero();
    for p in partials {
        add(&mut total, p?);
    }
    Ok(total)
}

/// Parallel map preserving order.
pub(crate) fn ordered_map<T, M>(n: usize, map: M) -> Result<Vec<T>>
where
    T: Send,
    M: Fn(usize) -> Result<T> + Sync,
{
    (0..n).into_par_iter().map(&map).collect()
}

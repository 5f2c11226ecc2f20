//! Execution policy for the data-parallel inner loops.
//!
//! Every parallel loop in the crate produces its results in index order, so a
//! computation gives bit-identical output whether it runs on one thread, many
//! threads, or with the `parallel` feature disabled.

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing over the current thread pool. Falls back to
    /// sequential execution when the `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this policy actually runs on more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel, always in index order.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fills `out[i] = f(i)` for every index, possibly in parallel.
pub fn fill_indexed<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i));
        return;
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Fills consecutive `chunk`-sized rows of `out` with `f(row, &mut row_slice)`.
pub fn for_each_row<T, F>(exec: Execution, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    for (i, row) in out.chunks_mut(chunk).enumerate() {
        f(i, row);
    }
}

/// Maximum of `f(i)` over `0..n` (NaN-free inputs assumed), `f64::NEG_INFINITY` when empty.
pub fn max_over<F>(exec: Execution, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    // max is associative and commutative, so the reduction order cannot change the result
    map_indices(exec, n, f)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indices(Execution::Sequential, 1000, f);
        let b = map_indices(Execution::Parallel, 1000, f);
        assert_eq!(a, b);

        let mut rows_a = vec![0.0; 60];
        let mut rows_b = vec![0.0; 60];
        let g = |r: usize, row: &mut [f64]| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (r * 10 + j) as f64;
            }
        };
        for_each_row(Execution::Sequential, &mut rows_a, 10, g);
        for_each_row(Execution::Parallel, &mut rows_b, 10, g);
        assert_eq!(rows_a, rows_b);
        assert_eq!(rows_a[37], 37.0);
    }
}

//! Data-parallel kernels with a sequential fallback.
//!
//! Every kernel partitions work by output index and computes each output in a
//! fixed order, so the parallel and sequential paths produce bit-identical
//! results. Building without the `parallel` feature removes rayon entirely and
//! [`Execution::Parallel`] degrades to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many work items the parallel path is not worth the fork/join.
pub const PARALLEL_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode will actually fan out on a workload of `len` items.
    pub fn fans_out(self, len: usize) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel && len >= PARALLEL_THRESHOLD
    }
}

/// Fill `out` in chunks of `chunk` elements; `f(chunk_index, chunk)`.
pub fn for_each_chunk_mut<T, F>(exec: Execution, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        if exec.fans_out(out.len() / chunk) {
            out.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
    }
    let _ = exec;
    for (i, c) in out.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Order-preserving map over `0..len`.
pub fn map_indices<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel && len > 1 {
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Order-preserving fallible map over `0..len`; the first error by index wins.
pub fn try_map_indices<T, E, F>(exec: Execution, len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indices(exec, len, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_fill_matches_sequential() {
        let fill = |exec| {
            let mut v = vec![0u64; 10_000];
            for_each_chunk_mut(exec, &mut v, 100, |ci, c| {
                for (k, x) in c.iter_mut().enumerate() {
                    *x = (ci * 100 + k) as u64 * 3;
                }
            });
            v
        };
        assert_eq!(fill(Execution::Sequential), fill(Execution::Parallel));
    }

    #[test]
    fn map_preserves_order() {
        let v = map_indices(Execution::Parallel, 500, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        let r: Result<Vec<usize>, usize> =
            try_map_indices(Execution::Parallel, 100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}

//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces results in index order, so the output is
//! bit-identical whichever execution mode runs it. Without the `parallel`
//! feature, [`Execution::Parallel`] silently runs sequentially.

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
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

/// Like [`map_indexed`] but short-circuits on the first error (lowest index
/// wins in sequential mode; in parallel mode any failing index may be
/// reported).
pub fn try_map_indexed<T, E, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Runs `f(chunk_index, chunk)` over consecutive `chunk_len`-sized chunks.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Parallel mode only pays off above this many scalar multiply-adds.
pub(crate) const PAR_WORK_THRESHOLD: usize = 1 << 16;

pub(crate) fn for_work(work: usize) -> Execution {
    if work >= PAR_WORK_THRESHOLD {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indexed(1000, Execution::Sequential, f);
        let b = map_indexed(1000, Execution::Parallel, f);
        assert_eq!(a, b);
    }

    #[test]
    fn chunk_indices_are_in_order() {
        let mut v = vec![0usize; 40];
        for_each_chunk_mut(&mut v, 4, Execution::Parallel, |i, c| c.fill(i));
        for (k, x) in v.iter().enumerate() {
            assert_eq!(*x, k / 4);
        }
    }

    #[test]
    fn try_map_propagates_error() {
        let r: Result<Vec<usize>, String> = try_map_indexed(10, Execution::Sequential, |i| {
            if i == 7 {
                Err("seven".into())
            } else {
                Ok(i)
            }
        });
        assert_eq!(r.unwrap_err(), "seven");
    }
}

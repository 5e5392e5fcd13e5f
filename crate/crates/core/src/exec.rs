//! Sequential/parallel dispatch for the data-parallel inner loops.
//!
//! Every parallel path returns results in index order and callers reduce them
//! sequentially, so both modes produce bit-identical output. Without the
//! `parallel` feature, [`Execution::Parallel`] silently runs sequentially.

/// How an embarrassingly parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0..n)` and collects the results in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over fixed-size chunks of `items`, preserving chunk order.
    pub fn map_chunks<'a, I, T, F>(self, items: &'a [I], chunk: usize, f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&'a [I]) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = items.len().div_ceil(chunk);
        self.map_range(n_chunks, |c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(items.len());
            f(&items[lo..hi])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map_chunks(&items, 64, |c| c.iter().sum::<u64>());
        let par = Execution::Parallel.map_chunks(&items, 64, |c| c.iter().sum::<u64>());
        assert_eq!(seq, par);
        assert_eq!(seq.len(), 16);
        assert_eq!(seq.iter().sum::<u64>(), 999 * 1000 / 2);
    }

    #[test]
    fn empty_input() {
        let items: Vec<u8> = Vec::new();
        assert!(Execution::Parallel.map_chunks(&items, 8, |c| c.len()).is_empty());
    }
}

/// Execution strategy for data-parallel batch work.
///
/// `Parallel` runs on the rayon global pool when the `parallel` feature is
/// enabled. Without the feature it degrades to the sequential path, so callers
/// never need their own `cfg` switches. Output order always matches input order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Like [`Exec::map`] but with at most `threads` workers in flight.
    ///
    /// Used for provider calls, where the bound is a rate limit rather than a
    /// CPU budget.
    pub fn map_bounded<T, R, F>(self, items: &[T], threads: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && threads > 1 {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => return pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => return items.iter().map(f).collect(),
            }
        }
        let _ = threads;
        items.iter().map(f).collect()
    }

    /// Maps then concatenates, preserving input order.
    pub fn flat_map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Vec<R> + Sync + Send,
    {
        self.map(items, f).into_iter().flatten().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Exec::Sequential.map(&items, |x| x * x);
        let par = Exec::Parallel.map(&items, |x| x * x);
        let bounded = Exec::Parallel.map_bounded(&items, 4, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq, bounded);
        assert_eq!(seq[999], 998_001);
    }

    #[test]
    fn flat_map_concatenates_in_order() {
        let items = vec![1usize, 2, 3];
        let out = Exec::Parallel.flat_map(&items, |&n| vec![n; n]);
        assert_eq!(out, vec![1, 2, 2, 3, 3, 3]);
    }
}

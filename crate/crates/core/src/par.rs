//! Data-parallel evaluation of independent trials.
//!
//! Work items are indexed, and results are always combined in index order,
//! so both strategies produce identical output.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled and falls back to
    /// sequential evaluation otherwise.
    Parallel,
}

impl Default for Strategy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Strategy::Parallel
        } else {
            Strategy::Sequential
        }
    }
}

pub fn map_range<T, F>(n: u64, strategy: Strategy, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// The lowest index for which `f` returns `Some`, with its value.
pub fn find_first<T, F>(n: u64, strategy: Strategy, f: F) -> Option<(u64, T)>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().find_map_first(|i| f(i).map(|v| (i, v)))
        }
        _ => (0..n).find_map(|i| f(i).map(|v| (i, v))),
    }
}

/// Maps over a slice, keeping input order.
pub fn map_slice<'a, I, T, F>(items: &'a [I], strategy: Strategy, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&'a I) -> T + Sync + Send,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let f = |i: u64| i * i % 7;
        assert_eq!(map_range(100, Strategy::Sequential, f), map_range(100, Strategy::Parallel, f));
        let g = |i: u64| (i % 13 == 12).then_some(i);
        assert_eq!(find_first(100, Strategy::Sequential, g), Some((12, 12)));
        assert_eq!(find_first(100, Strategy::Parallel, g), Some((12, 12)));
    }
}

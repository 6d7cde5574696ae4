//! Thin switch between rayon and plain iterators.

use crate::Execution;

/// Maps `f` over `0..len`, preserving index order in the output.
pub(crate) fn map_range<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Returns the first (lowest index) `Some` produced by `f` over `0..len`.
///
/// In parallel mode all indices may be evaluated, but the reported result is
/// always the one with the smallest index.
pub(crate) fn find_map_first<T, F>(exec: Execution, len: usize, f: F) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().find_map_first(f)
        }
        _ => (0..len).find_map(f),
    }
}

//! Indexed map helpers that run on the rayon pool when the `parallel`
//! feature is enabled and sequentially otherwise.
//!
//! Both versions produce the output in index order with one slot per index,
//! and no floating-point accumulation crosses task boundaries, so the
//! parallel and sequential results are bitwise identical.

/// Applies `f` to 0..len, collecting results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

/// Applies `f` to 0..len, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Always-sequential twin of [`map_indexed`], kept callable regardless of
/// features so the two execution modes can be compared directly.
pub(crate) fn map_indexed_seq<U, F>(len: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..len).map(f).collect()
}

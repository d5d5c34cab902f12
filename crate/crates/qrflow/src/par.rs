//! Data-parallel map over independent work items.
//!
//! With the default `parallel` feature, [`par_map`] fans work out over a
//! rayon thread pool; compiled without it, the same call degrades to the
//! sequential loop. [`seq_map`] always runs sequentially, so a binary
//! built with the feature can benchmark one against the other. Both
//! preserve input order, so results are bit-identical whichever path ran.

#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Send + Sync,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Send + Sync,
{
    seq_map(items, f)
}

pub fn seq_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

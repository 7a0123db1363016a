//! Serial / data-parallel dispatch.
//!
//! Kernels take an [`Exec`] and route their inner loops through the helpers
//! here. Without the `parallel` feature every mode runs serially. The helpers
//! only parallelize order-free work (maps, sorts over unique keys); callers do
//! their floating-point reductions in a fixed order afterwards.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Serial,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub(crate) fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub(crate) fn map_slice<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Unstable sort; callers guarantee keys are unique so the result is the
/// same in either mode.
pub(crate) fn sort_unique_by_key<T, K, F>(exec: Exec, items: &mut [T], key: F)
where
    T: Send,
    K: Ord,
    F: Fn(&T) -> K + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        items.par_sort_unstable_by_key(key);
        return;
    }
    let _ = exec;
    items.sort_unstable_by_key(key);
}

pub(crate) fn sort_unique_by<T, F>(exec: Exec, items: &mut [T], cmp: F)
where
    T: Send,
    F: Fn(&T, &T) -> std::cmp::Ordering + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        items.par_sort_unstable_by(cmp);
        return;
    }
    let _ = exec;
    items.sort_unstable_by(cmp);
}

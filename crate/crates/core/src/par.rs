//! Execution switch for the embarrassingly parallel loops (probe trials,
//! parameter sweeps, re-runs at several resolutions).
//!
//! With the `parallel` feature disabled every [`Exec`] behaves as
//! [`Exec::Sequential`]. Results always come back in input order, so
//! reductions performed afterwards are deterministic regardless of mode.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..len`.
pub fn map_range<R, F>(exec: Exec, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Fill the rows of a row-major buffer, one closure call per row.
pub fn fill_rows<F>(exec: Exec, buf: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        buf.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    buf.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Exec::Sequential, &xs, |x| x * x);
        let b = map(Exec::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[999], 999 * 999);
        let c = map_range(Exec::Parallel, 10, |i| i + 1);
        assert_eq!(c, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn fill_rows_indexes_rows() {
        let mut buf = vec![0.0; 12];
        fill_rows(Exec::Parallel, &mut buf, 4, |i, row| {
            row.iter_mut().for_each(|v| *v = i as f64)
        });
        assert_eq!(&buf[8..], &[2.0; 4]);
    }
}

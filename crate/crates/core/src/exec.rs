//! Execution strategy for replicate-level and row-level loops.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it, or with [`Execution::Sequential`], the same closures run in a
//! plain loop. Results are always collected in index order and reductions use
//! fixed chunk boundaries, so both strategies produce bit-identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::numeric::ExactSum;

/// Rows per reduction chunk. Fixed so that chunk boundaries never depend on
/// the thread count.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// `f(0..n)` collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Maps over a slice, preserving order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Sums `dim`-dimensional vectors `f(i)` for `i in 0..n` exactly.
    ///
    /// `f` writes its contribution into the provided buffer (zeroed first).
    pub fn sum_vectors<F>(self, n: usize, dim: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let chunks = n.div_ceil(CHUNK);
        let partials = self.map(chunks, |c| {
            let mut acc = vec![ExactSum::new(); dim];
            let mut buf = vec![0.0; dim];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                buf.iter_mut().for_each(|b| *b = 0.0);
                f(i, &mut buf);
                for (a, &b) in acc.iter_mut().zip(&buf) {
                    if b != 0.0 {
                        a.add(b);
                    }
                }
            }
            acc
        });
        let mut total = vec![ExactSum::new(); dim];
        for part in &partials {
            for (t, p) in total.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        total.iter().map(ExactSum::value).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let out = Execution::default().map(10_000, |i| i * 2);
        assert!(out.iter().enumerate().all(|(i, &v)| v == 2 * i));
    }

    #[test]
    fn vector_sums_match_across_strategies() {
        let f = |i: usize, out: &mut [f64]| {
            out[0] = (i as f64).sin();
            out[1] = 1.0 / (i as f64 + 1.0);
        };
        let seq = Execution::Sequential.sum_vectors(10_001, 2, f);
        let dflt = Execution::default().sum_vectors(10_001, 2, f);
        assert_eq!(seq, dflt);
    }
}

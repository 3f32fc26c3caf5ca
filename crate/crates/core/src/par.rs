//! Execution mode for the data-parallel loops.

use serde::{Deserialize, Serialize};

/// How batch work (ensemble members, DMD rows, Monte Carlo trials) is scheduled.
///
/// `Parallel` uses the rayon global pool when the crate is built with the `parallel`
/// feature and silently degrades to sequential iteration otherwise. Every caller collects
/// results in index order, so both modes produce identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// `f(0), f(1), …, f(n-1)` collected in order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Maps over a slice, preserving order.
    pub fn map_slice<A, T, F>(self, items: &[A], f: F) -> Vec<T>
    where
        A: Sync,
        T: Send,
        F: Fn(usize, &A) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().enumerate().map(|(i, a)| f(i, a)).collect()
            }
            _ => items.iter().enumerate().map(|(i, a)| f(i, a)).collect(),
        }
    }

    /// Maps over a mutable slice, preserving order.
    pub fn map_slice_mut<A, T, F>(self, items: &mut [A], f: F) -> Vec<T>
    where
        A: Send,
        T: Send,
        F: Fn(usize, &mut A) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter_mut().enumerate().map(|(i, a)| f(i, a)).collect()
            }
            _ => items.iter_mut().enumerate().map(|(i, a)| f(i, a)).collect(),
        }
    }
}

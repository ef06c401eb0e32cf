//! Serial/parallel dispatch for the data-parallel loops (subset enumeration,
//! per-orientation estimation, seed sweeps).
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] silently runs
//! serially. Every caller maps over independent items and collects in input
//! order, so both modes return identical results.

/// How the data-parallel loops are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }
}

impl Execution {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
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

    /// Maps `f` over `items` and folds the results with an associative,
    /// commutative `pick`. `pick` must define a total order for the result to be
    /// independent of evaluation order.
    pub fn map_reduce<T, R, F, P>(self, items: &[T], f: F, pick: P) -> Option<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
        P: Fn(R, R) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).reduce_with(pick)
            }
            _ => items.iter().map(f).reduce(pick),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Execution::Serial.map(&xs, |x| x * x);
        let b = Execution::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
        let ra = Execution::Serial.map_reduce(&xs, |x| (*x % 17, *x), |p, q| p.max(q));
        let rb = Execution::Parallel.map_reduce(&xs, |x| (*x % 17, *x), |p, q| p.max(q));
        assert_eq!(ra, rb);
        assert_eq!(Execution::Parallel.map_range(5, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }
}

//! Data-parallel helpers with a sequential fallback.
//!
//! Everything downstream of corpus generation is a map over independent
//! utterances or training examples, so the hot loops funnel through these
//! helpers. With the `parallel` feature (the default) they fan out over
//! rayon; without it they run sequentially. Both paths visit items in index
//! order and collect results in index order, and every floating-point
//! reduction in the crate happens after collection, in a fixed order, so the
//! two builds produce bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Ordered map over a slice.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Ordered indexed map over a slice.
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Sequential map, kept for benchmark comparisons against [`map_slice`].
pub fn map_slice_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let a = map_slice(&xs, |x| x.sin() * x.cos());
        let b = map_slice_seq(&xs, |x| x.sin() * x.cos());
        assert_eq!(a, b);
    }
}

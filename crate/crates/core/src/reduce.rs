//! Blocked pairwise reduction of sample moments.
//!
//! Data are cut into fixed blocks of [`BLOCK`] values; each block yields
//! `(n, mean, M2)` and blocks are merged along a balanced binary tree whose
//! shape depends only on the number of blocks. The result is therefore
//! bit-identical no matter how the work is scheduled.

pub const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl Moments {
    pub fn of_block(values: &[f64]) -> Self {
        if values.is_empty() {
            return Moments::default();
        }
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let m2 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Moments { n, mean, m2 }
    }

    /// Chan et al. parallel merge.
    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        Moments { n, mean, m2 }
    }

    /// Bessel-corrected sample variance; zero for fewer than two values.
    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sample_variance() / self.n as f64).sqrt()
        }
    }
}

/// Merges per-block moments along a fixed balanced tree.
pub fn tree_merge(blocks: &[Moments]) -> Moments {
    match blocks.len() {
        0 => Moments::default(),
        1 => blocks[0],
        n => {
            let mid = n / 2;
            tree_merge(&blocks[..mid]).merge(tree_merge(&blocks[mid..]))
        }
    }
}

/// Moments of `n` values produced by `f(i)`, reduced in fixed blocks.
pub fn blocked_moments(n: usize, mut f: impl FnMut(usize) -> f64) -> Moments {
    let mut buf = Vec::with_capacity(BLOCK.min(n));
    let mut blocks = Vec::with_capacity(n.div_ceil(BLOCK));
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        buf.clear();
        buf.extend((start..end).map(&mut f));
        blocks.push(Moments::of_block(&buf));
        start = end;
    }
    tree_merge(&blocks)
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_two_pass_statistics() {
        let v: Vec<f64> = (0..10_001).map(|i| ((i as f64) * 0.37).sin() * 3.0 + 0.1).collect();
        let m = blocked_moments(v.len(), |i| v[i]);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert_eq!(m.n, v.len());
        assert!((m.mean - mean).abs() < 1e-14);
        assert!((m.sample_variance() - var).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sizes() {
        assert_eq!(blocked_moments(0, |_| 1.0), Moments::default());
        let one = blocked_moments(1, |_| 2.5);
        assert_eq!(one.mean, 2.5);
        assert_eq!(one.std_err(), 0.0);
    }

    proptest! {
        #[test]
        fn merge_order_of_blocks_is_fixed(values in prop::collection::vec(-1e3f64..1e3, 1..20_000)) {
            let a = blocked_moments(values.len(), |i| values[i]);
            let b = blocked_moments(values.len(), |i| values[i]);
            prop_assert_eq!(a, b);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            prop_assert!((a.mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        }
    }
}

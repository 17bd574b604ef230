use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

/// Untrainable vectors for proof-introduced variables, fixed for one
/// episode. Vector `k` is a deterministic function of the episode seed and
/// `k`, so a context is fully described by its seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeContext<T> {
    seed: u64,
    n: usize,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Scalar> EpisodeContext<T> {
    pub fn new(seed: u64, n: usize) -> Self {
        EpisodeContext {
            seed,
            n,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Standard-normal vector for fresh variable `v<k>`.
    pub fn vector(&self, k: u32) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from(k) + 1);
        (0..self.n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::from_f64_lossy(z)
            })
            .collect()
    }
}

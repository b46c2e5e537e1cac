use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A per-sample random stream. The ChaCha block function is counter based,
/// so each `(master_seed, stream_index)` pair selects a disjoint keystream.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

/// Deterministic stream number `index` under `master_seed`.
///
/// ```
/// use sle_lab::numerics::derive_stream;
/// let mut a = derive_stream(42, 0);
/// let mut b = derive_stream(42, 0);
/// assert_eq!(a.gaussian(), b.gaussian());
/// ```
pub fn derive_stream(master_seed: u64, index: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
    inner.set_stream(index);
    RngStream {
        master_seed,
        stream_index: index,
        inner,
    }
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Standard normal variate.
    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform variate on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

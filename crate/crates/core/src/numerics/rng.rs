use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::real::Real;

/// Reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the 64-bit stream selector, so distinct ids give
/// non-overlapping keystreams of period 2⁶⁸ each. A stream is single-owner;
/// parallel work takes one stream per replication index.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn standard_normal<T: Real>(&mut self) -> T {
        T::standard_normal(&mut self.rng)
    }

    #[inline]
    pub fn open01<T: Real>(&mut self) -> T {
        T::open01(&mut self.rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// One Normal(mean, variance) draw. Zero variance returns `mean` exactly.
pub fn next_gaussian<T: Real>(stream: &mut RngStream, mean: T, variance: T) -> Result<T> {
    ensure!(variance >= T::zero(), "variance={variance} must be >= 0");
    if variance == T::zero() {
        return Ok(mean);
    }
    Ok(mean + variance.sqrt() * stream.standard_normal::<T>())
}

/// Stream-id namespaces so different simulation purposes never share a stream.
pub mod streams {
    pub const FIRST_PASSAGE: u64 = 1 << 56;
    pub const RENEWAL: u64 = 2 << 56;
    pub const MOMENTS: u64 = 3 << 56;
}

/// Evaluates `job(i)` for `i in 0..n` on `workers` threads, returning results
/// in index order. The output does not depend on `workers`.
pub fn run_indexed<R, F>(workers: usize, n: usize, job: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    ensure!(workers >= 1, "workers={workers} must be >= 1");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&job).collect())
}

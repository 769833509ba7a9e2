//! Seeded standard-normal draws that do not depend on thread count.
//!
//! Rows are generated in fixed-size chunks; chunk `c` draws from a ChaCha8
//! stream keyed by `(seed, c)`, so any parallel schedule reproduces the same
//! matrix bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub const CHUNK_ROWS: usize = 4096;

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Fills chunk `chunk` (at most `CHUNK_ROWS` rows of width `cols`).
pub(crate) fn fill_chunk(seed: u64, chunk: usize, cols: usize, out: &mut [f64]) {
    let mut rng = chunk_rng(seed, chunk);
    let len = out.len() / cols * cols;
    for v in out[..len].iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

/// `n × d` matrix of i.i.d. standard normals, row-major.
pub fn standard_normal_rows(seed: u64, n: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * d];
    if d == 0 {
        return out;
    }
    out.par_chunks_mut(CHUNK_ROWS * d)
        .enumerate()
        .for_each(|(c, chunk)| fill_chunk(seed, c, d, chunk));
    out
}

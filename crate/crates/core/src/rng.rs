//! Deterministic per-simulation random streams.
//!
//! Every simulation owns a ChaCha8 stream keyed by `(base_seed, cell_id)`
//! with `sim_index` selecting the ChaCha stream number. Streams can be
//! constructed in any order, on any thread, and always yield the same
//! sequence for the same triple.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_probability, Result};

#[derive(Clone, Debug)]
pub struct RngStream {
    base_seed: u64,
    cell_id: u64,
    sim_index: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds the stream for simulation `sim_index` of cell `cell_id`.
pub fn derive_stream(base_seed: u64, cell_id: u64, sim_index: u64) -> RngStream {
    let mut state = base_seed ^ splitmix64(&mut cell_id.wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(sim_index);
    RngStream {
        base_seed,
        cell_id,
        sim_index,
        rng,
    }
}

impl RngStream {
    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn cell_id(&self) -> u64 {
        self.cell_id
    }

    pub fn sim_index(&self) -> u64 {
        self.sim_index
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// One uniform compared against `p`: returns 1 with probability `p`.
pub fn bernoulli_draw(p: f64, stream: &mut RngStream) -> Result<u8> {
    check_probability("p", p)?;
    Ok(u8::from(stream.uniform() < p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_triple_same_draws() {
        let mut a = derive_stream(42, 0, 0);
        let mut b = derive_stream(42, 0, 0);
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn neighbouring_streams_differ() {
        let a: Vec<f64> = {
            let mut s = derive_stream(42, 0, 0);
            (0..16).map(|_| s.uniform()).collect()
        };
        for (cell, sim) in [(0, 1), (1, 0), (1, 1)] {
            let mut s = derive_stream(42, cell, sim);
            let b: Vec<f64> = (0..16).map(|_| s.uniform()).collect();
            assert_ne!(a, b, "cell {cell} sim {sim}");
        }
    }

    #[test]
    fn uniform_mean_within_three_se() {
        // SE of the mean of 1e6 Uniform(0,1) draws is sqrt(1/12)/1000 ~ 2.9e-4.
        let mut s = derive_stream(7, 3, 11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.uniform()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn bernoulli_degenerate_and_fair() {
        let mut s = derive_stream(1, 0, 0);
        for _ in 0..1000 {
            assert_eq!(bernoulli_draw(0.0, &mut s).unwrap(), 0);
            assert_eq!(bernoulli_draw(1.0, &mut s).unwrap(), 1);
        }
        let n = 100_000;
        let hits: u32 = (0..n)
            .map(|_| u32::from(bernoulli_draw(0.5, &mut s).unwrap()))
            .sum();
        let frac = f64::from(hits) / f64::from(n);
        assert!((frac - 0.5).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn bernoulli_rejects_bad_probability() {
        let mut s = derive_stream(1, 0, 0);
        assert!(bernoulli_draw(1.5, &mut s).is_err());
        assert!(bernoulli_draw(-0.1, &mut s).is_err());
        assert!(bernoulli_draw(f64::NAN, &mut s).is_err());
    }
}

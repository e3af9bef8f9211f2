//! Deterministic, labeled random-bit streams.
//!
//! Each consumer of randomness (Alice's data bits, Bob's basis choice,
//! detector noise, Eve's station) owns a named sub-stream derived from the
//! session master seed by hashing `(seed, label)`. Draws in one stream never
//! perturb another, so transcripts replay bit for bit from a seed, and the
//! per-gate draw discipline of any module can change without invalidating
//! seeds used elsewhere.
//!
//! A stream is `Private` (normal case) or `Compromised` (an adversary can
//! read the next bit ahead of time or dictate it). Dictation and read-ahead
//! on a `Private` stream are modeling violations and return an error.
//!
//! The generator behind every stream is ChaCha8: counter-based, period far
//! beyond 2^128, cheap to seed per label. Cryptographic strength is not a
//! requirement here, only stream independence and speed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Ownership mode of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceMode {
    Private,
    Compromised,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapses `(seed, label)` to a single deterministic 64-bit sub-seed.
/// Used to give batch sessions independent master seeds.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut state = seed ^ fnv1a(label.as_bytes());
    splitmix64(&mut state)
}

fn derive_seed_bytes(seed: u64, label: &str) -> [u8; 32] {
    let mut state = seed ^ fnv1a(label.as_bytes());
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// A single-owner random stream identified by `(seed, label)`.
#[derive(Debug, Clone)]
pub struct RandomSource {
    label: String,
    mode: SourceMode,
    rng: ChaCha8Rng,
    // Set by override_bit on a compromised stream; consumed by next_bit.
    forced: Option<u8>,
}

impl RandomSource {
    pub fn new(seed: u64, label: &str, mode: SourceMode) -> Self {
        RandomSource {
            label: label.to_string(),
            mode,
            rng: ChaCha8Rng::from_seed(derive_seed_bytes(seed, label)),
            forced: None,
        }
    }

    pub fn private(seed: u64, label: &str) -> Self {
        Self::new(seed, label, SourceMode::Private)
    }

    pub fn compromised(seed: u64, label: &str) -> Self {
        Self::new(seed, label, SourceMode::Compromised)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mode(&self) -> SourceMode {
        self.mode
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Draws one fair bit, honoring a pending override on a compromised
    /// stream. One underlying u64 is consumed per undictated bit.
    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        if let Some(bit) = self.forced.take() {
            return bit;
        }
        (self.next_u64() & 1) as u8
    }

    /// Uniform draw in [0, 1) at 53-bit resolution, then narrowed to `F`.
    #[inline]
    pub fn next_real<F: Scalar>(&mut self) -> F {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        F::real((self.next_u64() >> 11) as f64 * SCALE)
    }

    /// True with probability `p` (clamped by the [0,1) draw semantics:
    /// p <= 0 never fires, p >= 1 always fires). Consumes one draw.
    #[inline]
    pub fn bernoulli<F: Scalar>(&mut self, p: F) -> bool {
        self.next_real::<F>() < p
    }

    /// Dictates the next bit. Only a compromised stream accepts this.
    pub fn override_bit(&mut self, value: u8) -> Result<()> {
        debug_assert!(value <= 1);
        match self.mode {
            SourceMode::Compromised => {
                self.forced = Some(value & 1);
                Ok(())
            }
            SourceMode::Private => Err(Error::PrivateSource(self.label.clone())),
        }
    }

    /// Reads the bit the next `next_bit` call will return, without
    /// advancing the stream. Only a compromised stream exposes this.
    pub fn peek_bit(&self) -> Result<u8> {
        match self.mode {
            SourceMode::Compromised => Ok(match self.forced {
                Some(bit) => bit,
                // ChaCha8Rng is cheap to clone; peeking must not advance.
                None => (self.rng.clone().next_u64() & 1) as u8,
            }),
            SourceMode::Private => Err(Error::PrivateSource(self.label.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_label_reproduce_bits() {
        let mut a = RandomSource::private(42, "bob-basis");
        let mut b = RandomSource::private(42, "bob-basis");
        let first: Vec<u8> = (0..1000).map(|_| a.next_bit()).collect();
        let second: Vec<u8> = (0..1000).map(|_| b.next_bit()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn bit_mean_is_fair() {
        // binomial 3 sigma over 1e6 draws is ~0.0015; the stated bound 0.002
        let mut src = RandomSource::private(7, "alice");
        let n = 1_000_000u64;
        let ones: u64 = (0..n).map(|_| u64::from(src.next_bit())).sum();
        let mean = ones as f64 / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn labels_give_independent_streams() {
        // sample correlation of paired +/-1 bits, 3 sigma ~ 0.003
        let mut a = RandomSource::private(42, "alice");
        let mut e = RandomSource::private(42, "eve");
        let n = 1_000_000i64;
        let mut acc = 0i64;
        let mut any_diff = false;
        for _ in 0..n {
            let x = i64::from(a.next_bit()) * 2 - 1;
            let y = i64::from(e.next_bit()) * 2 - 1;
            acc += x * y;
            any_diff |= x != y;
        }
        let corr = acc as f64 / n as f64;
        assert!(any_diff);
        assert!(corr.abs() < 0.005, "correlation {corr}");
    }

    #[test]
    fn next_real_is_uniform_in_unit_interval() {
        let mut src = RandomSource::private(3, "detector-noise");
        let n = 1_000_000u64;
        let mut sum = 0.0f64;
        for _ in 0..n {
            let u: f64 = src.next_real();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        // sigma of the mean is 1/sqrt(12 n) ~ 2.9e-4
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.001, "mean {mean}");
    }

    #[test]
    fn override_dictates_next_bit() {
        let mut src = RandomSource::compromised(1, "bob-basis");
        src.override_bit(0).unwrap();
        assert_eq!(src.next_bit(), 0);
        src.override_bit(1).unwrap();
        assert_eq!(src.next_bit(), 1);
    }

    #[test]
    fn override_is_single_shot() {
        let mut src = RandomSource::compromised(1, "bob-basis");
        src.override_bit(1).unwrap();
        assert_eq!(src.next_bit(), 1);
        // a dictated bit consumes no stream state, so the draw after it
        // matches a fresh stream's first draw
        let mut fresh = RandomSource::compromised(1, "bob-basis");
        assert_eq!(src.next_bit(), fresh.next_bit());
    }

    #[test]
    fn private_source_rejects_control() {
        let mut src = RandomSource::private(1, "bob-basis");
        let err = src.override_bit(0).unwrap_err();
        assert!(err.to_string().contains("private source not controllable"));
        assert!(src.peek_bit().is_err());
    }

    #[test]
    fn peek_does_not_advance_compromised_stream() {
        let mut src = RandomSource::compromised(9, "bob-basis");
        let peeked = src.peek_bit().unwrap();
        assert_eq!(src.peek_bit().unwrap(), peeked);
        assert_eq!(src.next_bit(), peeked);
        src.override_bit(1).unwrap();
        assert_eq!(src.peek_bit().unwrap(), 1);
    }

    #[test]
    fn derive_seed_separates_labels() {
        let a = derive_seed(5, "session-0");
        let b = derive_seed(5, "session-1");
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(5, "session-0"));
    }
}

//! Binary-input AWGN channel with BPSK signalling.
//!
//! SNR convention: `snr_db` is the symbol SNR Es/N0 with unit-energy BPSK
//! symbols, so `sigma^2 = 1 / (2 * 10^(snr_db / 10))`. For a code carrying
//! `k` information bits in `n` channel uses, the rate-normalized SNR is
//! `Eb/N0 [dB] = Es/N0 [dB] - 10 log10(k / n)`; see [`ChannelParams::ebn0_db`].
//!
//! Randomness comes from ChaCha8 streams. A single transmission seeded with `s`
//! uses `ChaCha8Rng::seed_from_u64(s)` on stream 0. Monte Carlo trial `i` of a
//! campaign with base seed `b` uses `ChaCha8Rng::seed_from_u64(b)` switched to
//! stream `i` (see [`trial_rng`]), so trials are independent of scheduling.

use crate::error::{domain, Result};
use crate::reliability::LlrDistribution;
use crate::scalar::Real;
use crate::special::{expect_standard_normal, log2_one_plus_exp_neg};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Saturation bound applied to every channel LLR.
pub const LLR_CLAMP: f64 = 40.0;

/// Noise level of the channel, kept in both dB and linear form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    snr_db: f64,
    sigma: f64,
}

impl ChannelParams {
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return domain(format!("snr_db must be finite, got {snr_db}"));
        }
        let sigma = (1.0 / (2.0 * 10f64.powf(snr_db / 10.0))).sqrt();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("snr_db {snr_db} gives degenerate sigma {sigma}"));
        }
        Ok(Self { snr_db, sigma })
    }

    pub fn from_sigma(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive and finite, got {sigma}"));
        }
        let snr_db = 10.0 * (1.0 / (2.0 * sigma * sigma)).log10();
        Ok(Self { snr_db, sigma })
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Eb/N0 in dB for a code of rate `k / n` information bits per channel use.
    pub fn ebn0_db(&self, k: usize, n: usize) -> f64 {
        self.snr_db - 10.0 * (k as f64 / n as f64).log10()
    }
}

/// Received LLRs, one per channel use.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrWord<T> {
    pub values: Vec<T>,
}

impl<T: Real> LlrWord<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// A word of `len` erasures.
    pub fn erased(len: usize) -> Self {
        Self {
            values: vec![T::zero(); len],
        }
    }

    pub fn extend_from(&mut self, other: &LlrWord<T>) {
        self.values.extend_from_slice(&other.values);
    }
}

/// LLR of one received sample, saturated at [`LLR_CLAMP`].
pub fn llr_from_received(y: f64, sigma: f64) -> f64 {
    (2.0 * y / (sigma * sigma)).clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// RNG for trial `trial_index` of a campaign seeded with `base_seed`.
pub fn trial_rng(base_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial_index);
    rng
}

/// Send `bits` over the channel and return their LLRs. Pure in `(bits, params, rng_seed)`.
pub fn transmit<T: Real>(bits: &[u8], params: &ChannelParams, rng_seed: u64) -> Result<LlrWord<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    transmit_with_rng(bits, params, &mut rng)
}

/// As [`transmit`], drawing noise from a caller-supplied generator.
pub fn transmit_with_rng<T: Real, R: Rng + ?Sized>(
    bits: &[u8],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<LlrWord<T>> {
    if bits.is_empty() {
        return domain("cannot transmit an empty word");
    }
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return domain(format!("non-binary symbol {b}"));
    }
    let sigma = params.sigma();
    let values = bits
        .iter()
        .map(|&b| {
            let z: f64 = rng.sample(StandardNormal);
            let y = 1.0 - 2.0 * f64::from(b) + sigma * z;
            T::lit(llr_from_received(y, sigma))
        })
        .collect();
    Ok(LlrWord { values })
}

/// GA description of the channel LLR under an all-zero input: `Normal(m, 2m)`, `m = 2 / sigma^2`.
pub fn channel_llr_distribution<T: Real>(params: &ChannelParams) -> LlrDistribution<T> {
    let s = params.sigma();
    LlrDistribution::new_unchecked(T::lit(2.0 / (s * s)))
}

/// Symmetric capacity of the BPSK-input AWGN channel in bits per use.
pub fn bawgn_capacity(params: &ChannelParams) -> f64 {
    let s = params.sigma();
    let m = 2.0 / (s * s);
    // LLR of the all-zero symbol is m * (1 + sigma z).
    let loss = expect_standard_normal(|z| log2_one_plus_exp_neg(m * (1.0 + s * z)));
    (1.0 - loss).clamp(0.0, 1.0)
}

/// Smallest symbol SNR (dB) whose capacity reaches `rate`, by bisection.
pub fn snr_db_for_capacity(rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return domain(format!("rate must lie in (0, 1), got {rate}"));
    }
    let cap = |db: f64| bawgn_capacity(&ChannelParams::from_snr_db(db).expect("finite snr"));
    let (mut lo, mut hi) = (-40.0, 40.0);
    if cap(hi) < rate {
        return domain(format!("rate {rate} beyond reachable capacity"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cap(mid) >= rate {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(hi)
}

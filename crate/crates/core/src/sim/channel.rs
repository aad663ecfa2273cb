use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Noise variance per real dimension for BPSK at `ebn0_db` and code `rate`.
pub fn noise_variance(ebn0_db: f64, rate: f64) -> f64 {
    1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))
}

/// Per-frame seed derived from the master seed and the frame coordinates.
/// Two runs that share a master seed see identical noise on frame `(snr, frame)`
/// whatever the decoder or the scheduling.
pub fn frame_seed(master: u64, snr_index: u64, frame_index: u64) -> u64 {
    // splitmix64 finaliser over a simple combination
    let mut z = master
        ^ snr_index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ frame_index.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(29);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn frame_rng(master: u64, snr_index: u64, frame_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(frame_seed(master, snr_index, frame_index))
}

pub fn random_bits<R: Rng>(len: usize, rng: &mut R) -> Vec<u8> {
    (0..len).map(|_| u8::from(rng.random::<bool>())).collect()
}

/// BPSK (`0 -> +1`) over AWGN; returns channel LLRs `2y / sigma^2`.
pub fn awgn_bpsk_llrs<R: Rng>(x: &[u8], ebn0_db: f64, rate: f64, rng: &mut R) -> Vec<f64> {
    assert!(rate > 0.0 && rate <= 1.0, "rate must lie in (0, 1]");
    let var = noise_variance(ebn0_db, rate);
    let sigma = var.sqrt();
    x.iter()
        .map(|&b| {
            let n: f64 = StandardNormal.sample(rng);
            let y = 1.0 - 2.0 * f64::from(b) + sigma * n;
            2.0 * y / var
        })
        .collect()
}

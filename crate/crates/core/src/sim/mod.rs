//! AWGN/BPSK Monte-Carlo harness.

mod channel;
mod harness;

pub use channel::{awgn_bpsk_llrs, frame_rng, frame_seed, noise_variance, random_bits};
pub use harness::{
    compare_decoders, crossing_snr, default_perm_set, run_bler, write_csv, BlerRow, Comparison, CsvSink,
    DecoderConfig, DecoderFactory, DecoderKind, FrameDecoder, GapEstimate, SimConfig, CSV_HEADER,
};

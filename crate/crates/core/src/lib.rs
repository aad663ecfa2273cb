//! CRC-aided belief propagation list decoding of polar codes.
//!
//! The crate is organised bottom-up:
//!
//! * [`polar`]: code construction (5G NR reliability order), encoding and the
//!   generator-matrix consistency check.
//! * [`crc`]: CRC encoding, the CRC trellis with log-domain BCJR decoding,
//!   parity-check derivation with greedy density reduction and sum-product
//!   decoding.
//! * [`bp`]: belief propagation on stage-permuted polar factor graphs with an
//!   optional soft-in/soft-out CRC component attached to the information bits.
//! * [`list`]: BPL and CRC-aided BPL list decoding plus SC, CA-SCL and OSD
//!   reference decoders.
//! * [`perm`]: failure-dataset collection and genetic selection of
//!   permutation sets.
//! * [`sim`]: AWGN/BPSK Monte-Carlo harness with CSV output.

pub mod bp;
pub mod concat;
pub mod crc;
pub mod error;
pub mod gf2;
pub mod list;
pub mod llr;
mod par;
pub mod perm;
pub mod polar;
pub mod sim;

pub use error::{Error, Result};
pub use par::with_workers;

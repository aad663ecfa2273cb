//! CRC codes: LFSR encoding and checking, the code trellis with log-domain
//! BCJR decoding, parity-check matrix derivation and sum-product decoding.

mod parity;
mod spa;
mod trellis;

pub use parity::{degree_distribution, derive_h, reduce_density, CrcParityMatrix, DegreeDistribution};
pub use spa::{spa_decode, SpaDecoder};
pub use trellis::{bcjr_decode, BcjrDecoder, Trellis, MAX_TRELLIS_DEGREE};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported CRC degree for encoding and checking.
pub const MAX_DEGREE: usize = 32;

/// Generator polynomial of a CRC code, coefficients stored constant term first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CrcPoly {
    coeffs: Vec<u8>,
}

impl CrcPoly {
    pub fn from_coeffs(coeffs: Vec<u8>) -> Result<Self> {
        let r = coeffs.len().saturating_sub(1);
        if r == 0 || r > MAX_DEGREE {
            return Err(Error::InvalidDimension(format!(
                "CRC degree must be in 1..={MAX_DEGREE}, got {r}"
            )));
        }
        if coeffs.iter().any(|&c| c > 1) {
            return Err(Error::ContractViolation("coefficients must be 0 or 1".into()));
        }
        if coeffs[0] != 1 || coeffs[r] != 1 {
            return Err(Error::ContractViolation(
                "leading and constant coefficients must be 1".into(),
            ));
        }
        Ok(CrcPoly { coeffs })
    }

    /// From the exponents of the nonzero terms, e.g. `[6, 5, 0]` for `x^6 + x^5 + 1`.
    pub fn from_exponents(exponents: &[usize]) -> Result<Self> {
        let degree = exponents.iter().copied().max().unwrap_or(0);
        if degree > MAX_DEGREE {
            return Err(Error::InvalidDimension(format!("degree {degree} too large")));
        }
        let mut coeffs = vec![0u8; degree + 1];
        for &e in exponents {
            coeffs[e] ^= 1;
        }
        Self::from_coeffs(coeffs)
    }

    /// `x^2 + x + 1`.
    pub fn crc2() -> Self {
        Self::from_exponents(&[2, 1, 0]).unwrap()
    }

    /// The 5G NR CRC-6, `x^6 + x^5 + 1`.
    pub fn nr_crc6() -> Self {
        Self::from_exponents(&[6, 5, 0]).unwrap()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[u8] {
        &self.coeffs
    }

    /// Coefficient word with bit `j` holding the coefficient of `x^j`.
    pub fn word(&self) -> u64 {
        self.coeffs
            .iter()
            .enumerate()
            .fold(0u64, |w, (j, &c)| w | (u64::from(c) << j))
    }

    pub fn exponents(&self) -> Vec<usize> {
        (0..=self.degree()).rev().filter(|&j| self.coeffs[j] == 1).collect()
    }
}

impl FromStr for CrcPoly {
    type Err = Error;

    /// Accepts `0x`-prefixed hex of the coefficient word (`0x61`) or an
    /// exponent list (`6,5,0`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            let word = u64::from_str_radix(hex, 16)
                .map_err(|e| Error::Parse(format!("CRC polynomial {s:?}: {e}")))?;
            let exponents: Vec<usize> = (0..64).filter(|&j| (word >> j) & 1 == 1).collect();
            return Self::from_exponents(&exponents);
        }
        let exponents = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("CRC exponent {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sorted = exponents.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != exponents.len() {
            return Err(Error::Parse(format!("repeated exponent in {s:?}")));
        }
        Self::from_exponents(&exponents)
    }
}

impl fmt::Display for CrcPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.exponents().iter().map(usize::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl fmt::Debug for CrcPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CrcPoly({self})")
    }
}

/// A CRC code: generator polynomial of degree `r` and codeword length `n_crc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrcSpec {
    poly: CrcPoly,
    n_crc: usize,
}

impl CrcSpec {
    pub fn new(poly: CrcPoly, n_crc: usize) -> Result<Self> {
        if n_crc <= poly.degree() {
            return Err(Error::InvalidDimension(format!(
                "codeword length {n_crc} must exceed CRC degree {}",
                poly.degree()
            )));
        }
        Ok(CrcSpec { poly, n_crc })
    }

    pub fn poly(&self) -> &CrcPoly {
        &self.poly
    }

    /// CRC length `r`.
    pub fn r(&self) -> usize {
        self.poly.degree()
    }

    pub fn n_crc(&self) -> usize {
        self.n_crc
    }

    pub fn payload_len(&self) -> usize {
        self.n_crc - self.r()
    }

    /// One LFSR step: shift `bit` in, reduce modulo `g`.
    #[inline]
    pub fn step(&self, state: u64, bit: u8) -> u64 {
        let r = self.r();
        let t = (state << 1) | u64::from(bit & 1);
        if (t >> r) & 1 == 1 {
            t ^ self.poly.word()
        } else {
            t
        }
    }

    /// Register contents after feeding `bits` from the all-zero state.
    pub fn remainder(&self, bits: &[u8]) -> u64 {
        bits.iter().fold(0, |s, &b| self.step(s, b))
    }

    /// Appends the `r` remainder bits so that the codeword polynomial is divisible by `g`.
    pub fn encode(&self, payload: &[u8]) -> Result<Vec<u8>> {
        if payload.len() != self.payload_len() {
            return Err(Error::InvalidDimension(format!(
                "payload of length {} for CRC({}, {})",
                payload.len(),
                self.n_crc,
                self.payload_len()
            )));
        }
        let r = self.r();
        let rem = (0..r).fold(self.remainder(payload), |s, _| self.step(s, 0));
        let mut out = payload.to_vec();
        out.extend((0..r).rev().map(|j| ((rem >> j) & 1) as u8));
        Ok(out)
    }

    /// True iff the LFSR driven by `bits` returns to the all-zero state.
    pub fn check(&self, bits: &[u8]) -> bool {
        bits.len() == self.n_crc && self.remainder(bits) == 0
    }
}

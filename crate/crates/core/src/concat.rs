//! A polar code with an optional outer CRC: payload bits followed by CRC bits,
//! mapped in ascending order onto the information set.

use crate::crc::{CrcPoly, CrcSpec};
use crate::error::{Error, Result};
use crate::gf2::Gf2Matrix;
use crate::polar::PolarCode;

#[derive(Debug, Clone, PartialEq)]
pub struct ConcatenatedCode {
    polar: PolarCode,
    crc: Option<CrcSpec>,
}

impl ConcatenatedCode {
    pub fn new(polar: PolarCode, crc: Option<CrcSpec>) -> Result<Self> {
        if let Some(spec) = &crc {
            if spec.n_crc() != polar.k_outer() {
                return Err(Error::InvalidDimension(format!(
                    "CRC codeword length {} must equal the {} non-frozen positions",
                    spec.n_crc(),
                    polar.k_outer()
                )));
            }
        }
        Ok(ConcatenatedCode { polar, crc })
    }

    /// 5G construction: `payload_len + r` non-frozen positions chosen by the NR sequence.
    pub fn nr(len: usize, payload_len: usize, poly: Option<CrcPoly>) -> Result<Self> {
        let r = poly.as_ref().map_or(0, CrcPoly::degree);
        let polar = PolarCode::nr(len, payload_len + r)?;
        let crc = poly.map(|p| CrcSpec::new(p, payload_len + r)).transpose()?;
        Self::new(polar, crc)
    }

    pub fn polar(&self) -> &PolarCode {
        &self.polar
    }

    pub fn crc(&self) -> Option<&CrcSpec> {
        self.crc.as_ref()
    }

    pub fn len(&self) -> usize {
        self.polar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polar.is_empty()
    }

    pub fn payload_len(&self) -> usize {
        self.crc
            .as_ref()
            .map_or(self.polar.k_outer(), CrcSpec::payload_len)
    }

    /// Payload bits per channel bit.
    pub fn rate(&self) -> f64 {
        self.payload_len() as f64 / self.len() as f64
    }

    /// Information-set bits (payload plus CRC) for a payload.
    pub fn outer_encode(&self, payload: &[u8]) -> Result<Vec<u8>> {
        match &self.crc {
            Some(spec) => spec.encode(payload),
            None if payload.len() == self.polar.k_outer() => Ok(payload.to_vec()),
            None => Err(Error::InvalidDimension(format!(
                "payload length {} for {} information bits",
                payload.len(),
                self.polar.k_outer()
            ))),
        }
    }

    /// `(u, x)` for a payload.
    pub fn encode(&self, payload: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
        let u = self.polar.embed(&self.outer_encode(payload)?)?;
        let x = self.polar.encode(&u)?;
        Ok((u, x))
    }

    pub fn payload_of(&self, u_hat: &[u8]) -> Vec<u8> {
        let mut bits = self.polar.extract(u_hat);
        bits.truncate(self.payload_len());
        bits
    }

    /// True iff the information bits of `u_hat` pass the CRC (always true without one).
    pub fn crc_ok(&self, u_hat: &[u8]) -> bool {
        self.crc
            .as_ref()
            .is_none_or(|spec| spec.check(&self.polar.extract(u_hat)))
    }

    /// `payload_len x N` generator of the concatenated code.
    pub fn generator(&self) -> Gf2Matrix {
        let k = self.payload_len();
        let rows: Vec<Vec<u8>> = (0..k)
            .map(|j| {
                let mut unit = vec![0u8; k];
                unit[j] = 1;
                self.encode(&unit).expect("unit payload").1
            })
            .collect();
        Gf2Matrix::from_rows(&rows).expect("rows of equal length")
    }
}

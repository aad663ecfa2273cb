use crate::crc::CrcParityMatrix;
use crate::llr::{boxplus, saturate, LLR_MAX};

/// Flooding sum-product decoder on the Tanner graph of a parity-check matrix.
///
/// Messages start from zero on every call, so the decoder is a pure function
/// of its input; the struct only owns scratch memory.
#[derive(Debug, Clone)]
pub struct SpaDecoder {
    checks: Vec<Vec<usize>>,
    cols: usize,
    inner_iters: usize,
    /// check-to-variable messages, laid out per check in `checks` order
    c2v: Vec<Vec<f64>>,
    prefix: Vec<f64>,
}

impl SpaDecoder {
    pub fn new(h: &CrcParityMatrix, inner_iters: usize) -> Self {
        let checks = h.check_neighbours();
        let c2v = checks.iter().map(|c| vec![0.0; c.len()]).collect();
        let widest = checks.iter().map(Vec::len).max().unwrap_or(0);
        SpaDecoder {
            checks,
            cols: h.cols(),
            inner_iters: inner_iters.max(1),
            c2v,
            prefix: vec![0.0; widest + 1],
        }
    }

    pub fn inner_iters(&self) -> usize {
        self.inner_iters
    }

    /// Extrinsic LLRs: per variable, the sum of incoming check messages.
    pub fn decode(&mut self, l_in: &[f64], l_out: &mut [f64]) {
        assert_eq!(l_in.len(), self.cols, "input length must equal H columns");
        assert_eq!(l_out.len(), self.cols, "output length must equal H columns");
        for m in &mut self.c2v {
            m.fill(0.0);
        }
        // running total of check messages per variable
        l_out.fill(0.0);
        for _ in 0..self.inner_iters {
            let totals = l_out.to_vec();
            l_out.fill(0.0);
            for (vars, msgs) in self.checks.iter().zip(self.c2v.iter_mut()) {
                let deg = vars.len();
                // variable-to-check: channel plus all other checks
                let v2c: Vec<f64> = vars
                    .iter()
                    .zip(msgs.iter())
                    .map(|(&v, &m)| saturate(l_in[v] + totals[v] - m))
                    .collect();
                // exclusive box-plus via prefix and suffix accumulation;
                // +inf is the box-plus identity for finite operands
                let prefix = &mut self.prefix;
                prefix[0] = f64::INFINITY;
                for j in 0..deg {
                    prefix[j + 1] = boxplus(prefix[j], v2c[j]);
                }
                let mut suffix = f64::INFINITY;
                for j in (0..deg).rev() {
                    msgs[j] = match (j, suffix == f64::INFINITY) {
                        // degree-one check: the bit is pinned to zero
                        (0, true) => LLR_MAX,
                        (0, false) => suffix,
                        (_, true) => prefix[j],
                        (_, false) => saturate(boxplus(prefix[j], suffix)),
                    };
                    suffix = boxplus(suffix, v2c[j]);
                }
                for (&v, &m) in vars.iter().zip(msgs.iter()) {
                    l_out[v] += m;
                }
            }
        }
        l_out.iter_mut().for_each(|x| *x = saturate(*x));
    }
}

/// One-shot SPA decoding; see [`SpaDecoder::decode`].
pub fn spa_decode(l_in: &[f64], h: &CrcParityMatrix, inner_iters: usize) -> Vec<f64> {
    let mut dec = SpaDecoder::new(h, inner_iters);
    let mut out = vec![0.0; l_in.len()];
    dec.decode(l_in, &mut out);
    out
}

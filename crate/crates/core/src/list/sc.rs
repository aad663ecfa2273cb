use crate::bp::DecodeResult;
use crate::llr::{boxplus, hard};
use crate::polar::PolarCode;

/// Successive cancellation decoding with exact check-node updates.
/// Frozen bits are decided zero.
pub fn sc_decode(channel_llrs: &[f64], code: &PolarCode) -> DecodeResult {
    assert_eq!(channel_llrs.len(), code.len(), "channel length must equal N");
    let mut u_hat = vec![0u8; code.len()];
    let x_hat = descend(channel_llrs, 0, code, &mut u_hat);
    let left_llrs = Vec::new();
    DecodeResult {
        u_hat,
        right_llrs: channel_llrs.to_vec(),
        x_hat,
        converged: true,
        iterations_used: 1,
        left_llrs,
    }
}

/// Decodes the subtree whose leaves start at `first`; returns its partial sums.
fn descend(llrs: &[f64], first: usize, code: &PolarCode, u_hat: &mut [u8]) -> Vec<u8> {
    if llrs.len() == 1 {
        let bit = if code.is_frozen(first) { 0 } else { hard(llrs[0]) };
        u_hat[first] = bit;
        return vec![bit];
    }
    let half = llrs.len() / 2;
    let (a, b) = llrs.split_at(half);
    let left_in: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| boxplus(x, y)).collect();
    let left = descend(&left_in, first, code, u_hat);
    let right_in: Vec<f64> = a
        .iter()
        .zip(b)
        .zip(&left)
        .map(|((&x, &y), &v)| if v == 0 { y + x } else { y - x })
        .collect();
    let right = descend(&right_in, first + half, code, u_hat);
    let mut out: Vec<u8> = left.iter().zip(&right).map(|(l, r)| l ^ r).collect();
    out.extend_from_slice(&right);
    out
}

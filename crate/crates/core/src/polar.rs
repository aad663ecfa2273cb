//! Polar code construction and GF(2) encoding.
//!
//! Bit index 0 is the top row of the factor graph. Codewords are
//! `x = u * G_N` with `G_N` the n-fold Kronecker power of `[[1,0],[1,1]]`,
//! in natural (non bit-reversed) order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gf2::Gf2Matrix;

/// Largest stage count accepted by the constructors.
pub const MAX_STAGES: usize = 20;

const NR_SEQUENCE_TEXT: &str = include_str!("../data/nr_reliability_1024.txt");

/// The 1024-entry universal reliability sequence of the 5G NR polar code,
/// least reliable first.
pub fn nr_reliability_sequence() -> Vec<usize> {
    parse_reliability(NR_SEQUENCE_TEXT).expect("embedded reliability table is well formed")
}

/// Parses a reliability table: one index per line, most reliable last.
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_reliability(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<usize>()
                .map_err(|e| Error::Parse(format!("reliability entry {l:?}: {e}")))
        })
        .collect()
}

pub fn load_reliability(path: &Path) -> Result<Vec<usize>> {
    parse_reliability(&std::fs::read_to_string(path)?)
}

/// Restricts a (possibly longer) reliability sequence to indices below `len`.
pub fn restrict_order(order: &[usize], len: usize) -> Result<Vec<usize>> {
    let restricted: Vec<usize> = order.iter().copied().filter(|&i| i < len).collect();
    let mut seen = vec![false; len];
    for &i in &restricted {
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Parse(format!("index {i} repeated in reliability order")));
        }
    }
    if restricted.len() != len {
        return Err(Error::InvalidDimension(format!(
            "reliability order covers {} of {len} positions",
            restricted.len()
        )));
    }
    Ok(restricted)
}

/// Bhattacharyya parameters of the bit channels for an erasure channel with
/// erasure probability `epsilon`; smaller is more reliable.
pub fn bhattacharyya(stages: usize, epsilon: f64) -> Vec<f64> {
    let len = 1usize << stages;
    (0..len)
        .map(|i| {
            // the most significant index bit is polarized first
            (0..stages).rev().fold(epsilon, |z, b| {
                if (i >> b) & 1 == 1 {
                    z * z
                } else {
                    2.0 * z - z * z
                }
            })
        })
        .collect()
}

/// Reliability order (least reliable first) from Bhattacharyya parameters.
/// Ties are broken towards the larger index being more reliable.
pub fn bhattacharyya_order(stages: usize, epsilon: f64) -> Vec<usize> {
    let z = bhattacharyya(stages, epsilon);
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    order
}

/// `F^{⊗n}` with `F = [[1,0],[1,1]]`.
pub fn kron_power(stages: usize) -> Gf2Matrix {
    let len = 1usize << stages;
    let mut g = Gf2Matrix::zeros(len, len);
    // entry (r, c) is 1 iff the bits of c are a subset of the bits of r
    for r in 0..len {
        for c in 0..len {
            if r & c == c {
                g.set(r, c, 1);
            }
        }
    }
    g
}

/// In-place `x = u * G_N` over GF(2).
pub fn polar_transform_in_place(v: &mut [u8]) {
    let len = v.len();
    debug_assert!(len.is_power_of_two());
    let mut span = 1;
    while span < len {
        for block in (0..len).step_by(2 * span) {
            for i in block..block + span {
                v[i] ^= v[i + span];
            }
        }
        span <<= 1;
    }
}

/// A polar code of length `N = 2^n` with information set `A` and frozen set `A_c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCode {
    stages: usize,
    info_set: Vec<usize>,
    frozen: Vec<bool>,
}

impl PolarCode {
    /// Takes the `k_outer` most reliable positions of `reliability_order`
    /// (least reliable first), restricted to indices below `len`.
    pub fn construct(len: usize, k_outer: usize, reliability_order: &[usize]) -> Result<Self> {
        if !len.is_power_of_two() || !(2..=1 << MAX_STAGES).contains(&len) {
            return Err(Error::InvalidDimension(format!(
                "block length {len} is not a power of two in [2, 2^{MAX_STAGES}]"
            )));
        }
        if k_outer > len {
            return Err(Error::InvalidDimension(format!(
                "{k_outer} information bits exceed block length {len}"
            )));
        }
        let order = restrict_order(reliability_order, len)?;
        let mut info_set: Vec<usize> = order[len - k_outer..].to_vec();
        info_set.sort_unstable();
        Self::from_info_set(len, info_set)
    }

    /// Construction from the embedded 5G NR sequence.
    pub fn nr(len: usize, k_outer: usize) -> Result<Self> {
        if len > 1024 {
            return Err(Error::InvalidDimension(format!(
                "5G reliability sequence covers N <= 1024, got {len}"
            )));
        }
        Self::construct(len, k_outer, &nr_reliability_sequence())
    }

    /// Construction by Bhattacharyya ranking at design erasure probability `epsilon`.
    pub fn bhattacharyya(len: usize, k_outer: usize, epsilon: f64) -> Result<Self> {
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::InvalidDimension(format!("block length {len}")));
        }
        let stages = len.trailing_zeros() as usize;
        Self::construct(len, k_outer, &bhattacharyya_order(stages, epsilon))
    }

    pub fn from_info_set(len: usize, mut info_set: Vec<usize>) -> Result<Self> {
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::InvalidDimension(format!("block length {len}")));
        }
        info_set.sort_unstable();
        info_set.dedup();
        if info_set.last().is_some_and(|&i| i >= len) {
            return Err(Error::InvalidDimension("information index out of range".into()));
        }
        let mut frozen = vec![true; len];
        for &i in &info_set {
            frozen[i] = false;
        }
        Ok(PolarCode {
            stages: len.trailing_zeros() as usize,
            info_set,
            frozen,
        })
    }

    /// Block length `N`.
    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    /// `n = log2(N)`.
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Number of non-frozen positions.
    pub fn k_outer(&self) -> usize {
        self.info_set.len()
    }

    /// Ascending information set.
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.frozen[i]).collect()
    }

    #[inline]
    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen
    }

    /// Places `bits` on the information set (ascending) of an otherwise zero `u`.
    pub fn embed(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.k_outer() {
            return Err(Error::InvalidDimension(format!(
                "{} bits for {} information positions",
                bits.len(),
                self.k_outer()
            )));
        }
        let mut u = vec![0u8; self.len()];
        for (&pos, &b) in self.info_set.iter().zip(bits) {
            u[pos] = b;
        }
        Ok(u)
    }

    pub fn extract(&self, u: &[u8]) -> Vec<u8> {
        self.info_set.iter().map(|&i| u[i]).collect()
    }

    /// `x = u * G_N` in `O(N log N)`. Frozen positions of `u` must be zero.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>> {
        if u.len() != self.len() {
            return Err(Error::InvalidDimension(format!(
                "u has length {}, code length is {}",
                u.len(),
                self.len()
            )));
        }
        if let Some(i) = (0..self.len()).find(|&i| self.frozen[i] && u[i] != 0) {
            return Err(Error::ContractViolation(format!("frozen bit {i} is nonzero")));
        }
        let mut x = u.to_vec();
        polar_transform_in_place(&mut x);
        Ok(x)
    }

    /// True iff `x_hat == u_hat * G_N` after forcing frozen positions of `u_hat` to zero.
    pub fn gmatrix_check(&self, u_hat: &[u8], x_hat: &[u8]) -> bool {
        if u_hat.len() != self.len() || x_hat.len() != self.len() {
            return false;
        }
        let mut v: Vec<u8> = u_hat
            .iter()
            .zip(&self.frozen)
            .map(|(&b, &f)| if f { 0 } else { b })
            .collect();
        polar_transform_in_place(&mut v);
        v == x_hat
    }

    /// `k_outer x N` generator: the rows of `G_N` indexed by the information set.
    pub fn generator(&self) -> Gf2Matrix {
        let g = kron_power(self.stages);
        let rows: Vec<&[u8]> = self.info_set.iter().map(|&i| g.row(i)).collect();
        Gf2Matrix::from_rows(&rows).expect("rows of equal length")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kron_power_small() {
        assert_eq!(kron_power(0), Gf2Matrix::identity(1));
        assert_eq!(kron_power(1), Gf2Matrix::from_rows(&[[1, 0], [1, 1]]).unwrap());
        let expected =
            Gf2Matrix::from_rows(&[[1, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]])
                .unwrap();
        assert_eq!(kron_power(2), expected);
    }

    /// Kronecker product computed by definition, independent of the subset rule.
    fn kron_by_definition(stages: usize) -> Gf2Matrix {
        let mut m = Gf2Matrix::identity(1);
        for _ in 0..stages {
            let s = m.rows();
            let mut next = Gf2Matrix::zeros(2 * s, 2 * s);
            for (bi, bj, f) in [(0, 0, 1), (0, 1, 0), (1, 0, 1), (1, 1, 1)] {
                for r in 0..s {
                    for c in 0..s {
                        next.set(bi * s + r, bj * s + c, f & m.get(r, c));
                    }
                }
            }
            m = next;
        }
        m
    }

    #[test]
    fn kron_power_matches_definition_and_is_involution() {
        for n in 0..=6 {
            assert_eq!(kron_power(n), kron_by_definition(n), "n={n}");
        }
        for n in 0..=10 {
            let g = kron_power(n);
            assert_eq!(g.mul(&g).unwrap(), Gf2Matrix::identity(1 << n), "n={n}");
        }
    }

    #[test]
    fn construct_edges() {
        let order = nr_reliability_sequence();
        let full = PolarCode::construct(8, 8, &order).unwrap();
        assert_eq!(full.info_set(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        let empty = PolarCode::construct(8, 0, &order).unwrap();
        assert!(empty.info_set().is_empty());
        assert_eq!(empty.frozen_set().len(), 8);
        assert!(matches!(
            PolarCode::construct(8, 9, &order),
            Err(Error::InvalidDimension(_))
        ));
        assert!(PolarCode::construct(12, 4, &order).is_err());
    }

    #[test]
    fn construct_n8_k4_matches_both_rankings() {
        // sequence restricted to < 8 is 0 1 2 4 3 5 6 7; the four most reliable sorted
        let code = PolarCode::nr(8, 4).unwrap();
        assert_eq!(code.info_set(), &[3, 5, 6, 7]);
        let bh = PolarCode::bhattacharyya(8, 4, 0.5).unwrap();
        assert_eq!(bh.info_set(), code.info_set());
    }

    #[test]
    fn nr_table_is_permutation() {
        let seq = nr_reliability_sequence();
        assert_eq!(seq.len(), 1024);
        assert!(restrict_order(&seq, 1024).is_ok());
        assert_eq!(&seq[..8], &[0, 1, 2, 4, 8, 16, 32, 3]);
        assert_eq!(seq[1023], 1023);
    }

    #[test]
    fn nr_128_70_information_set() {
        let code = PolarCode::nr(128, 70).unwrap();
        assert_eq!(code.k_outer(), 70);
        assert_eq!(code.frozen_set().len(), 58);
        assert!(!code.is_frozen(127));
        assert!(code.is_frozen(0));
    }

    #[test]
    fn construct_is_monotone() {
        let order = nr_reliability_sequence();
        for len in [16usize, 64, 128] {
            for k in 0..len {
                let a = PolarCode::construct(len, k, &order).unwrap();
                let b = PolarCode::construct(len, k + 1, &order).unwrap();
                assert!(a.info_set().iter().all(|i| b.info_set().contains(i)));
            }
        }
    }

    #[test]
    fn encode_examples() {
        let code = PolarCode::from_info_set(4, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(code.encode(&[0, 1, 0, 1]).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(code.encode(&[0; 4]).unwrap(), vec![0; 4]);
        let g = kron_power(3);
        let full = PolarCode::from_info_set(8, (0..8).collect()).unwrap();
        for i in 0..8 {
            let mut u = vec![0u8; 8];
            u[i] = 1;
            assert_eq!(full.encode(&u).unwrap(), g.row(i));
            assert!(full.gmatrix_check(&u, g.row(i)));
        }
        let frozen = PolarCode::nr(8, 4).unwrap();
        assert!(matches!(
            frozen.encode(&[1, 0, 0, 0, 0, 0, 0, 0]),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn butterfly_matches_matrix_product() {
        // exhaustive for N <= 16
        for n in 1..=4 {
            let len = 1 << n;
            let g = kron_power(n);
            let code = PolarCode::from_info_set(len, (0..len).collect()).unwrap();
            for word in 0..(1u32 << len) {
                let u: Vec<u8> = (0..len).map(|i| ((word >> i) & 1) as u8).collect();
                assert_eq!(code.encode(&u).unwrap(), g.vec_mul(&u).unwrap());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 5..=8 {
            let len = 1 << n;
            let g = kron_power(n);
            let code = PolarCode::from_info_set(len, (0..len).collect()).unwrap();
            for _ in 0..20 {
                let u: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
                assert_eq!(code.encode(&u).unwrap(), g.vec_mul(&u).unwrap());
            }
        }
    }

    #[test]
    fn gmatrix_check_detects_flips() {
        let code = PolarCode::nr(32, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let bits: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
            let u = code.embed(&bits).unwrap();
            let mut x = code.encode(&u).unwrap();
            assert!(code.gmatrix_check(&u, &x));
            let flip = rng.random_range(0..32);
            x[flip] ^= 1;
            assert!(!code.gmatrix_check(&u, &x));
        }
        assert!(code.gmatrix_check(&[0; 32], &[0; 32]));
    }

    #[test]
    fn generator_rows_encode() {
        let code = PolarCode::nr(16, 8).unwrap();
        let g = code.generator();
        let bits = [1, 0, 1, 1, 0, 0, 1, 0];
        let via_matrix = g.vec_mul(&bits).unwrap();
        let via_transform = code.encode(&code.embed(&bits).unwrap()).unwrap();
        assert_eq!(via_matrix, via_transform);
    }

    proptest::proptest! {
        #[test]
        fn encode_is_linear(a in proptest::collection::vec(0u8..2, 64), b in proptest::collection::vec(0u8..2, 64)) {
            let code = PolarCode::from_info_set(64, (0..64).collect()).unwrap();
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let lhs = code.encode(&sum).unwrap();
            let rhs: Vec<u8> = code.encode(&a).unwrap().iter().zip(code.encode(&b).unwrap()).map(|(x, y)| x ^ y).collect();
            proptest::prop_assert_eq!(lhs, rhs);
        }
    }
}

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordering of the `n` stages of the polar factor graph. Entry `c` is the
/// index-bit dimension combined by graph column `c` (column 0 touches `u`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorGraphPermutation {
    stage_order: Vec<usize>,
}

/// Direction of [`permute_bits`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From the permuted graph's labels into the canonical graph's labels.
    ToCanonical,
    /// Back from canonical labels; inverse of `ToCanonical`.
    FromCanonical,
}

impl FactorGraphPermutation {
    pub fn new(stage_order: Vec<usize>) -> Result<Self> {
        let n = stage_order.len();
        if n == 0 {
            return Err(Error::InvalidDimension("empty stage order".into()));
        }
        let mut seen = vec![false; n];
        for &s in &stage_order {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return Err(Error::ContractViolation(format!(
                    "{stage_order:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(FactorGraphPermutation { stage_order })
    }

    /// The default graph.
    pub fn identity(stages: usize) -> Self {
        FactorGraphPermutation {
            stage_order: (0..stages).collect(),
        }
    }

    pub fn stages(&self) -> usize {
        self.stage_order.len()
    }

    pub fn stage_order(&self) -> &[usize] {
        &self.stage_order
    }

    pub fn is_identity(&self) -> bool {
        self.stage_order.iter().enumerate().all(|(c, &s)| c == s)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.stages()];
        for (c, &s) in self.stage_order.iter().enumerate() {
            inv[s] = c;
        }
        FactorGraphPermutation { stage_order: inv }
    }

    /// Stage order rotated left by `shift`.
    pub fn rotate_left(&self, shift: usize) -> Self {
        let mut order = self.stage_order.clone();
        let n = order.len();
        order.rotate_left(shift % n);
        FactorGraphPermutation { stage_order: order }
    }

    /// Node label in the canonical graph of node `index` of this graph: bit
    /// `stage_order[c]` of `index` moves to bit `c`.
    #[inline]
    pub fn map_index(&self, index: usize) -> usize {
        self.stage_order
            .iter()
            .enumerate()
            .fold(0, |acc, (c, &s)| acc | (((index >> s) & 1) << c))
    }

    /// `map_index` for every index of a length-`2^n` vector.
    pub fn index_table(&self) -> Vec<usize> {
        (0..1usize << self.stages()).map(|i| self.map_index(i)).collect()
    }

    /// All `n!` permutations in lexicographic order, identity first.
    pub fn all(stages: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..stages).collect();
        loop {
            out.push(FactorGraphPermutation {
                stage_order: current.clone(),
            });
            // next lexicographic permutation
            let Some(i) = (1..stages).rev().find(|&i| current[i - 1] < current[i]) else {
                break;
            };
            let j = (i..stages).rev().find(|&j| current[j] > current[i - 1]).unwrap();
            current.swap(i - 1, j);
            current[i..].reverse();
        }
        out
    }
}

/// Relabels `v` between this permutation's graph and the canonical graph.
/// The same relabeling applies to the `u` side and the `x` side.
pub fn permute_bits<T: Clone>(perm: &FactorGraphPermutation, v: &[T], direction: Direction) -> Vec<T> {
    assert_eq!(v.len(), 1 << perm.stages(), "vector length must be 2^n");
    let table = perm.index_table();
    match direction {
        Direction::ToCanonical => {
            let mut out = v.to_vec();
            for (i, x) in v.iter().enumerate() {
                out[table[i]] = x.clone();
            }
            out
        }
        Direction::FromCanonical => table.iter().map(|&j| v[j].clone()).collect(),
    }
}

impl fmt::Display for FactorGraphPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.stage_order.iter().map(usize::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl fmt::Debug for FactorGraphPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Perm({self})")
    }
}

impl FromStr for FactorGraphPermutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let order = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("stage index {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_noop() {
        let v: Vec<u32> = (0..16).collect();
        let id = FactorGraphPermutation::identity(4);
        assert!(id.is_identity());
        assert_eq!(permute_bits(&id, &v, Direction::ToCanonical), v);
        assert_eq!(permute_bits(&id, &v, Direction::FromCanonical), v);
    }

    #[test]
    fn swap_on_four() {
        let p = FactorGraphPermutation::new(vec![1, 0]).unwrap();
        let v = ['a', 'b', 'c', 'd'];
        assert_eq!(permute_bits(&p, &v, Direction::ToCanonical), vec!['a', 'c', 'b', 'd']);
    }

    #[test]
    fn round_trips() {
        for p in FactorGraphPermutation::all(4) {
            let v: Vec<u32> = (0..16).map(|i| i * 7 + 3).collect();
            let there = permute_bits(&p, &v, Direction::ToCanonical);
            assert_eq!(permute_bits(&p, &there, Direction::FromCanonical), v);
            // relabeling by the inverse permutation undoes it as well
            let inv = p.inverse();
            assert_eq!(permute_bits(&inv, &there, Direction::ToCanonical), v);
        }
    }

    #[test]
    fn enumeration() {
        let all = FactorGraphPermutation::all(5);
        assert_eq!(all.len(), 120);
        assert!(all[0].is_identity());
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 120);
        assert_eq!(FactorGraphPermutation::all(7).len(), 5040);
    }

    #[test]
    fn parse_and_validate() {
        let p: FactorGraphPermutation = "2,0,1".parse().unwrap();
        assert_eq!(p.stage_order(), &[2, 0, 1]);
        assert_eq!(p.to_string(), "2,0,1");
        assert!("0,0,1".parse::<FactorGraphPermutation>().is_err());
        assert!("0,3,1".parse::<FactorGraphPermutation>().is_err());
        assert!("".parse::<FactorGraphPermutation>().is_err());
        assert_eq!(
            FactorGraphPermutation::identity(3).rotate_left(1).stage_order(),
            &[1, 2, 0]
        );
    }
}

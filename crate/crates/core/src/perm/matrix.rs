use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::dataset::{FailureDataset, PoolConfig};
use crate::bp::{BpDecoder, FactorGraphPermutation};
use crate::error::{Error, Result};
use crate::par;

/// Boolean permutation-by-frame matrix; entry `(p, f)` is set iff BP on
/// permutation `p` recovers frame `f`. Rows are bit-packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvergenceMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    bits: Vec<u64>,
}

impl ConvergenceMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let words = cols.div_ceil(64);
        let mut bits = vec![0u64; rows * words];
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    bits[r * words + c / 64] |= 1 << (c % 64);
                }
            }
        }
        ConvergenceMatrix { rows, cols, words, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.words + col / 64] >> (col % 64) & 1 == 1
    }

    fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words..(row + 1) * self.words]
    }

    pub fn row_successes(&self, row: usize) -> usize {
        self.row_words(row).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of frames on which every row of `subset` fails.
    pub fn joint_failures(&self, subset: &[usize]) -> usize {
        let mut covered = 0usize;
        for w in 0..self.words {
            let any = subset.iter().fold(0u64, |acc, &r| acc | self.bits[r * self.words + w]);
            covered += any.count_ones() as usize;
        }
        self.cols - covered
    }

    /// Fraction of frames on which every row of `subset` fails.
    pub fn joint_failure(&self, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return Err(Error::ContractViolation("joint failure of an empty subset".into()));
        }
        if let Some(&r) = subset.iter().find(|&&r| r >= self.rows) {
            return Err(Error::ContractViolation(format!("row {r} out of {}", self.rows)));
        }
        if self.cols == 0 {
            return Err(Error::ContractViolation("matrix has no frames".into()));
        }
        Ok(self.joint_failures(subset) as f64 / self.cols as f64)
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        Self::from_fn(self.rows, end - start, |r, c| self.get(r, start + c))
    }

    /// Writes a one-line text header followed by the packed rows (little endian).
    pub fn save(&self, path: &Path, pool_hash: u64, dataset_hash: u64) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "cabpl-convergence rows={} cols={} pool={pool_hash:016x} dataset={dataset_hash:016x}",
            self.rows, self.cols
        )?;
        for w in &self.bits {
            out.write_all(&w.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Loads a cached matrix; fails if it was built for another pool or dataset.
    pub fn load(path: &Path, pool_hash: u64, dataset_hash: u64) -> Result<Self> {
        let mut input = BufReader::new(std::fs::File::open(path)?);
        let mut header = String::new();
        input.read_line(&mut header)?;
        let bad = |what: &str| Error::Parse(format!("convergence cache {}: {what}", path.display()));
        let field = |key: &str| {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| bad(&format!("header lacks {key}")))
        };
        if !header.starts_with("cabpl-convergence ") {
            return Err(bad("not a convergence cache"));
        }
        let rows: usize = field("rows")?.parse().map_err(|_| bad("rows"))?;
        let cols: usize = field("cols")?.parse().map_err(|_| bad("cols"))?;
        let hex = |s: &str| u64::from_str_radix(s, 16).map_err(|_| bad("hash"));
        if hex(field("pool")?)? != pool_hash || hex(field("dataset")?)? != dataset_hash {
            return Err(Error::Config(format!(
                "convergence cache {} belongs to a different pool or dataset",
                path.display()
            )));
        }
        let words = cols.div_ceil(64);
        let mut raw = Vec::new();
        input.read_to_end(&mut raw)?;
        if raw.len() != rows * words * 8 {
            return Err(bad("truncated body"));
        }
        let bits = raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(ConvergenceMatrix { rows, cols, words, bits })
    }
}

/// Fingerprint of a permutation pool, for cache validation.
pub fn pool_fingerprint(pool: &[FactorGraphPermutation]) -> u64 {
    let text: Vec<String> = pool.iter().map(ToString::to_string).collect();
    par::fnv1a(text.join("\n").as_bytes())
}

/// Decodes every dataset frame with every pool permutation.
pub fn evaluate_pool(
    dataset: &FailureDataset,
    pool: &[FactorGraphPermutation],
    cfg: &PoolConfig,
) -> Result<ConvergenceMatrix> {
    if pool.is_empty() {
        return Err(Error::Config("permutation pool is empty".into()));
    }
    if dataset.len != cfg.code.len() {
        return Err(Error::InvalidDimension(format!(
            "dataset has length {}, code has {}",
            dataset.len,
            cfg.code.len()
        )));
    }
    let stages = cfg.code.polar().stages();
    if let Some(p) = pool.iter().find(|p| p.stages() != stages) {
        return Err(Error::InvalidDimension(format!("permutation {p} does not have {stages} stages")));
    }
    let bp = cfg.bp_config();
    let frames = &dataset.frames;
    let cells = par::map_init(
        pool.len() * frames.len(),
        || None::<(usize, BpDecoder)>,
        |slot, cell| {
            let (p, f) = (cell / frames.len(), cell % frames.len());
            if slot.as_ref().is_none_or(|(q, _)| *q != p) {
                *slot = Some((p, BpDecoder::new(cfg.code.polar(), &pool[p])));
            }
            let dec = &mut slot.as_mut().expect("decoder initialised").1;
            cfg.succeeds(dec, &bp, &frames[f].llrs, &frames[f].codeword)
        },
    );
    Ok(ConvergenceMatrix::from_fn(pool.len(), frames.len(), |p, f| cells[p * frames.len() + f]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concat::ConcatenatedCode;
    use crate::perm::collect_failures;
    use proptest::prelude::*;

    fn small() -> ConvergenceMatrix {
        ConvergenceMatrix::from_fn(4, 70, |r, c| r > 0 && (c * (r + 2)) % 7 < r)
    }

    #[test]
    fn joint_failure_basics() {
        let m = small();
        assert_eq!(m.joint_failure(&[0]).unwrap(), 1.0);
        assert!(m.joint_failure(&[0, 1, 2, 3]).unwrap() < 1.0);
        assert!(m.joint_failure(&[]).is_err());
        assert!(m.joint_failure(&[4]).is_err());
    }

    #[test]
    fn cache_round_trip_and_validation() {
        let m = small();
        let dir = std::env::temp_dir().join(format!("cabpl-matrix-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.bin");
        m.save(&path, 11, 22).unwrap();
        assert_eq!(ConvergenceMatrix::load(&path, 11, 22).unwrap(), m);
        assert!(matches!(ConvergenceMatrix::load(&path, 11, 23), Err(Error::Config(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn pool_evaluation_rows() {
        let cfg = PoolConfig::new(ConcatenatedCode::nr(16, 8, None).unwrap(), 30).unwrap();
        let d = FactorGraphPermutation::identity(4);
        let ds = collect_failures(&cfg, &d, 1.5, 30, 3, 50_000).unwrap();
        let pool = vec![d.clone(), FactorGraphPermutation::new(vec![3, 2, 1, 0]).unwrap(), d.clone()];
        let m = evaluate_pool(&ds, &pool, &cfg).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 30));
        assert_eq!(m.row_successes(0), 0);
        assert!((0..30).all(|f| m.get(0, f) == m.get(2, f)));
        assert_eq!(evaluate_pool(&ds, &pool, &cfg).unwrap(), m);
    }

    proptest! {
        /// Adding rows never increases the joint failure (all subsets of a
        /// pool of eight rows).
        #[test]
        fn joint_failure_is_monotone(seed in any::<u64>()) {
            let m = ConvergenceMatrix::from_fn(8, 40, |r, c| {
                crate::sim::frame_seed(seed, r as u64, c as u64).is_multiple_of(5)
            });
            for mask in 1u32..256 {
                let set: Vec<usize> = (0..8).filter(|&r| mask >> r & 1 == 1).collect();
                let jf = m.joint_failures(&set);
                for extra in (0..8).filter(|&r| mask >> r & 1 == 0) {
                    let mut bigger = set.clone();
                    bigger.push(extra);
                    prop_assert!(m.joint_failures(&bigger) <= jf);
                }
            }
        }
    }
}

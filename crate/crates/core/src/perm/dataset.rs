use std::fmt::Write as _;
use std::path::Path;

use crate::bp::{BpConfig, BpDecoder, FactorGraphPermutation, Stopping};
use crate::concat::ConcatenatedCode;
use crate::error::{Error, Result};
use crate::par;
use crate::sim::{awgn_bpsk_llrs, frame_rng, random_bits};

/// Plain BP setup under which permutations are judged: the CRC (if any)
/// joins the G-matrix check as stopping condition.
#[derive(Debug, Clone)]
pub struct PoolConfig {
    pub code: ConcatenatedCode,
    pub max_iters: usize,
}

impl PoolConfig {
    pub fn new(code: ConcatenatedCode, max_iters: usize) -> Result<Self> {
        if max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(PoolConfig { code, max_iters })
    }

    pub fn bp_config(&self) -> BpConfig {
        let stopping = match self.code.crc() {
            Some(spec) => Stopping::Crc(spec.clone()),
            None => Stopping::GMatrix,
        };
        BpConfig::new(self.max_iters, stopping)
    }

    /// True iff BP on `perm` stops on the transmitted codeword.
    pub fn succeeds(&self, dec: &mut BpDecoder, cfg: &BpConfig, llrs: &[f64], codeword: &[u8]) -> bool {
        let res = dec.decode(llrs, cfg, None);
        res.converged && res.reencoded() == codeword
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureFrame {
    pub codeword: Vec<u8>,
    pub llrs: Vec<f64>,
}

/// Channel outputs on which the default-permutation BP decoder failed.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureDataset {
    pub len: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub frames: Vec<FailureFrame>,
}

/// LLRs are stored with this many decimals; collection decodes the stored
/// values so that replay from file is exact.
const LLR_DECIMALS: usize = 6;

fn quantize(v: f64) -> f64 {
    format!("{v:.LLR_DECIMALS$}").parse().expect("formatted float parses")
}

/// Frames per parallel batch during collection.
const BATCH: usize = 256;

/// Simulates random payloads at `snr_db` until `target` default failures are
/// found. Gives up with `BudgetExhausted` after `max_frames` frames.
pub fn collect_failures(
    cfg: &PoolConfig,
    default_perm: &FactorGraphPermutation,
    snr_db: f64,
    target: usize,
    seed: u64,
    max_frames: u64,
) -> Result<FailureDataset> {
    if target == 0 {
        return Err(Error::Config("target count must be at least 1".into()));
    }
    let code = &cfg.code;
    let bp_cfg = cfg.bp_config();
    let mut frames = Vec::with_capacity(target);
    let mut next: u64 = 0;
    while frames.len() < target {
        if next >= max_frames {
            return Err(Error::BudgetExhausted(format!(
                "{} of {target} failures after {max_frames} frames",
                frames.len()
            )));
        }
        let batch = BATCH.min((max_frames - next) as usize);
        let found = par::map_init(
            batch,
            || BpDecoder::new(code.polar(), default_perm),
            |dec, i| {
                let mut rng = frame_rng(seed, 0, next + i as u64);
                let payload = random_bits(code.payload_len(), &mut rng);
                let (_, x) = code.encode(&payload).expect("payload length matches");
                let llrs = awgn_bpsk_llrs(&x, snr_db, code.rate(), &mut rng);
                if cfg.succeeds(dec, &bp_cfg, &llrs, &x) {
                    return None;
                }
                let stored: Vec<f64> = llrs.iter().map(|&v| quantize(v)).collect();
                (!cfg.succeeds(dec, &bp_cfg, &stored, &x)).then_some(FailureFrame { codeword: x, llrs: stored })
            },
        );
        frames.extend(found.into_iter().flatten());
        next += batch as u64;
    }
    frames.truncate(target);
    Ok(FailureDataset { len: code.len(), snr_db, seed, frames })
}

impl FailureDataset {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "N={} snr_db={} count={} seed={}\n",
            self.len,
            self.snr_db,
            self.frames.len(),
            self.seed
        );
        for f in &self.frames {
            s.extend(f.codeword.iter().map(|&b| char::from(b'0' + b)));
            for v in &f.llrs {
                write!(s, " {v:.LLR_DECIMALS$}").expect("writing to a String");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("failure dataset: {what}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let field = |key: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| bad(&format!("header lacks {key}")))
        };
        let len: usize = field("N")?.parse().map_err(|_| bad("N"))?;
        let snr_db: f64 = field("snr_db")?.parse().map_err(|_| bad("snr_db"))?;
        let count: usize = field("count")?.parse().map_err(|_| bad("count"))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("seed"))?;
        let mut frames = Vec::with_capacity(count);
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let mut parts = line.split_whitespace();
            let bits = parts.next().ok_or_else(|| bad("empty record"))?;
            let codeword = bits
                .bytes()
                .map(|c| match c {
                    b'0' | b'1' => Ok(c - b'0'),
                    _ => Err(bad(&format!("record {i}: bad codeword bit"))),
                })
                .collect::<Result<Vec<u8>>>()?;
            let llrs = parts
                .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("record {i}: bad LLR {t:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            if codeword.len() != len || llrs.len() != len {
                return Err(bad(&format!("record {i} does not have length {len}")));
            }
            frames.push(FailureFrame { codeword, llrs });
        }
        if frames.len() != count {
            return Err(bad(&format!("header says {count} frames, found {}", frames.len())));
        }
        Ok(FailureDataset { len, snr_db, seed, frames })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn fingerprint(&self) -> u64 {
        par::fnv1a(self.to_text().as_bytes())
    }

    /// Splits off frames `at..`, keeping `..at` in `self`.
    pub fn split_off(&mut self, at: usize) -> FailureDataset {
        FailureDataset {
            len: self.len,
            snr_db: self.snr_db,
            seed: self.seed,
            frames: self.frames.split_off(at),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> PoolConfig {
        PoolConfig::new(ConcatenatedCode::nr(32, 16, None).unwrap(), 30).unwrap()
    }

    #[test]
    fn stored_frames_refail_after_round_trip() {
        let cfg = toy();
        let d = FactorGraphPermutation::identity(5);
        let ds = collect_failures(&cfg, &d, 2.0, 40, 5, 100_000).unwrap();
        assert_eq!(ds.frames.len(), 40);
        let back = FailureDataset::parse(&ds.to_text()).unwrap();
        assert_eq!(back, ds);
        let mut dec = BpDecoder::new(cfg.code.polar(), &d);
        let bp = cfg.bp_config();
        for f in &back.frames {
            assert!(!cfg.succeeds(&mut dec, &bp, &f.llrs, &f.codeword));
        }
        let again = collect_failures(&cfg, &d, 2.0, 40, 5, 100_000).unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn noiseless_exhausts_budget() {
        let cfg = toy();
        let d = FactorGraphPermutation::identity(5);
        let err = collect_failures(&cfg, &d, 60.0, 1, 1, 300).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted(_)));
    }

    #[test]
    fn parse_rejects_short_record() {
        let text = "N=4 snr_db=3 count=1 seed=0\n0101 1.0 2.0 3.0\n";
        assert!(FailureDataset::parse(text).is_err());
    }
}

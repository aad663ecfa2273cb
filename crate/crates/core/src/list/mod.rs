//! List decoding over sets of permuted BP decoders, and the reference
//! decoders used for benchmarking.

mod osd;
mod sc;
mod scl;

pub use osd::{osd_decode, OsdResult, MAX_OSD_DIMENSION, MAX_OSD_ORDER};
pub use sc::sc_decode;
pub use scl::ca_scl_decode;

use std::path::Path;

use crate::bp::{BpConfig, BpDecoder, DecodeResult, FactorGraphPermutation, SisoHook, Stopping};
use crate::concat::ConcatenatedCode;
use crate::crc::{derive_h, reduce_density, BcjrDecoder, CrcSpec, SpaDecoder, Trellis};
use crate::error::{Error, Result};
use crate::llr::CheckRule;
use crate::polar::PolarCode;

/// An ordered set of distinct factor-graph permutations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermSet {
    perms: Vec<FactorGraphPermutation>,
}

impl PermSet {
    pub fn new(perms: Vec<FactorGraphPermutation>) -> Result<Self> {
        if perms.is_empty() {
            return Err(Error::ContractViolation("permutation set is empty".into()));
        }
        let stages = perms[0].stages();
        if perms.iter().any(|p| p.stages() != stages) {
            return Err(Error::InvalidDimension("permutations differ in stage count".into()));
        }
        for (i, p) in perms.iter().enumerate() {
            if perms[..i].contains(p) {
                return Err(Error::ContractViolation(format!("permutation {p} repeated")));
            }
        }
        Ok(PermSet { perms })
    }

    /// The set containing only the default graph.
    pub fn single(stages: usize) -> Self {
        PermSet {
            perms: vec![FactorGraphPermutation::identity(stages)],
        }
    }

    pub fn perms(&self) -> &[FactorGraphPermutation] {
        &self.perms
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn stages(&self) -> usize {
        self.perms[0].stages()
    }

    pub fn contains_default(&self) -> bool {
        self.perms.iter().any(FactorGraphPermutation::is_identity)
    }

    /// The first `len` members.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        Self::new(self.perms[..len.min(self.perms.len())].to_vec())
    }

    /// One permutation per line as comma-separated stage indices; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let perms = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(perms)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.perms.iter().map(|p| format!("{p}\n")).collect()
    }
}

/// Soft-in/soft-out CRC decoder attached to each list member.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum CrcMode {
    /// Trellis MAP decoding; `max_log` selects the max-log approximation.
    Bcjr { max_log: bool },
    /// Sum-product on the density-reduced parity-check matrix.
    Spa { inner_iters: usize },
}

impl CrcMode {
    pub const BCJR: CrcMode = CrcMode::Bcjr { max_log: false };
    pub const SPA: CrcMode = CrcMode::Spa { inner_iters: 1 };
}

/// Per-member CRC decoder instance.
#[derive(Debug, Clone)]
pub enum CrcSiso {
    Bcjr(BcjrDecoder),
    Spa(SpaDecoder),
}

impl CrcSiso {
    pub fn new(spec: &CrcSpec, mode: CrcMode) -> Result<Self> {
        Ok(match mode {
            CrcMode::Bcjr { max_log } => {
                CrcSiso::Bcjr(BcjrDecoder::new(Trellis::build(spec)?).with_max_log(max_log))
            }
            CrcMode::Spa { inner_iters } => {
                CrcSiso::Spa(SpaDecoder::new(&reduce_density(&derive_h(spec)), inner_iters))
            }
        })
    }
}

impl SisoHook for CrcSiso {
    fn update(&mut self, l_in: &[f64], l_out: &mut [f64]) {
        match self {
            CrcSiso::Bcjr(d) => d.decode(l_in, l_out),
            CrcSiso::Spa(d) => d.decode(l_in, l_out),
        }
    }
}

/// Result of a list decoding run.
#[derive(Debug, Clone, PartialEq)]
pub struct ListOutcome {
    pub candidates: Vec<DecodeResult>,
    pub valid_mask: Vec<bool>,
    /// `sum_i (1 - 2 x_i) * L_ch,i` of each candidate's re-encoded codeword.
    pub selection_metric: Vec<f64>,
    /// Index of the chosen candidate.
    pub winner_index: usize,
    /// False when no candidate was valid and the best-metric one was returned.
    pub winner_valid: bool,
}

impl ListOutcome {
    pub fn winner(&self) -> &DecodeResult {
        &self.candidates[self.winner_index]
    }

    /// Winner as `Some` only when it passed validation.
    pub fn valid_winner(&self) -> Option<&DecodeResult> {
        self.winner_valid.then(|| self.winner())
    }
}

/// Correlation of a hard codeword with the channel LLRs; maximizing it is
/// equivalent to minimizing the Euclidean distance of the BPSK image to `y`.
pub fn correlation(x: &[u8], channel_llrs: &[f64]) -> f64 {
    x.iter()
        .zip(channel_llrs)
        .map(|(&b, &l)| if b == 0 { l } else { -l })
        .sum()
}

/// Picks the valid candidate of largest metric, lowest index on ties; falls
/// back to the largest metric overall.
fn select(metric: &[f64], valid: &[bool]) -> (usize, bool) {
    let best = |filter: &dyn Fn(usize) -> bool| {
        (0..metric.len())
            .filter(|&i| filter(i))
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(b) if metric[b] >= metric[i] => Some(b),
                _ => Some(i),
            })
    };
    match best(&|i| valid[i]) {
        Some(i) => (i, true),
        None => (best(&|_| true).expect("non-empty list"), false),
    }
}

/// List decoder: one BP decoder (and optionally one CRC SISO instance) per permutation.
#[derive(Debug, Clone)]
pub struct ListDecoder {
    code: ConcatenatedCode,
    members: Vec<BpDecoder>,
    hooks: Option<Vec<CrcSiso>>,
    cfg: BpConfig,
    crc_filter: bool,
}

impl ListDecoder {
    /// BPL: G-matrix stopping, or CRC stopping and filtering when
    /// `crc_as_stopping` is set and the code has a CRC.
    pub fn bpl(code: &ConcatenatedCode, set: &PermSet, max_iters: usize, crc_as_stopping: bool) -> Result<Self> {
        Self::check_set(code, set, max_iters)?;
        let stopping = match (crc_as_stopping, code.crc()) {
            (true, Some(spec)) => Stopping::Crc(spec.clone()),
            _ => Stopping::GMatrix,
        };
        let crc_filter = matches!(stopping, Stopping::Crc(_));
        Ok(ListDecoder {
            code: code.clone(),
            members: set.perms().iter().map(|p| BpDecoder::new(code.polar(), p)).collect(),
            hooks: None,
            cfg: BpConfig::new(max_iters, stopping),
            crc_filter,
        })
    }

    /// CA-BPL: each member carries its own CRC SISO decoder on the information bits.
    pub fn ca_bpl(code: &ConcatenatedCode, set: &PermSet, max_iters: usize, mode: CrcMode) -> Result<Self> {
        Self::check_set(code, set, max_iters)?;
        let spec = code
            .crc()
            .ok_or_else(|| Error::Config("CRC-aided decoding needs a CRC".into()))?;
        let hooks = set
            .perms()
            .iter()
            .map(|_| CrcSiso::new(spec, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(ListDecoder {
            code: code.clone(),
            members: set.perms().iter().map(|p| BpDecoder::new(code.polar(), p)).collect(),
            hooks: Some(hooks),
            cfg: BpConfig::new(max_iters, Stopping::Crc(spec.clone())),
            crc_filter: true,
        })
    }

    fn check_set(code: &ConcatenatedCode, set: &PermSet, max_iters: usize) -> Result<()> {
        if set.stages() != code.polar().stages() {
            return Err(Error::InvalidDimension(format!(
                "permutations have {} stages, code has {}",
                set.stages(),
                code.polar().stages()
            )));
        }
        if max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_rule(mut self, rule: CheckRule) -> Self {
        self.cfg.rule = rule;
        self
    }

    pub fn code(&self) -> &ConcatenatedCode {
        &self.code
    }

    pub fn list_size(&self) -> usize {
        self.members.len()
    }

    pub fn decode(&mut self, channel_llrs: &[f64]) -> ListOutcome {
        let cfg = &self.cfg;
        let candidates: Vec<DecodeResult> = match &mut self.hooks {
            Some(hooks) => self
                .members
                .iter_mut()
                .zip(hooks.iter_mut())
                .map(|(m, h)| m.decode(channel_llrs, cfg, Some(h)))
                .collect(),
            None => self
                .members
                .iter_mut()
                .map(|m| m.decode(channel_llrs, cfg, None))
                .collect(),
        };
        let polar = self.code.polar();
        let valid_mask: Vec<bool> = candidates
            .iter()
            .map(|c| {
                polar.gmatrix_check(&c.u_hat, &c.x_hat) && (!self.crc_filter || self.code.crc_ok(&c.u_hat))
            })
            .collect();
        let selection_metric: Vec<f64> = candidates
            .iter()
            .map(|c| correlation(&c.reencoded(), channel_llrs))
            .collect();
        let (winner_index, winner_valid) = select(&selection_metric, &valid_mask);
        ListOutcome {
            candidates,
            valid_mask,
            selection_metric,
            winner_index,
            winner_valid,
        }
    }
}

/// One-shot BPL decoding. With `crc` given, the CRC acts as stopping
/// condition and validity filter only.
pub fn bpl_decode(
    channel_llrs: &[f64],
    code: &PolarCode,
    set: &PermSet,
    max_iters: usize,
    crc: Option<&CrcSpec>,
) -> Result<ListOutcome> {
    let concat = ConcatenatedCode::new(code.clone(), crc.cloned())?;
    Ok(ListDecoder::bpl(&concat, set, max_iters, crc.is_some())?.decode(channel_llrs))
}

/// One-shot CA-BPL decoding.
pub fn ca_bpl_decode(
    channel_llrs: &[f64],
    code: &PolarCode,
    set: &PermSet,
    max_iters: usize,
    crc: &CrcSpec,
    mode: CrcMode,
) -> Result<ListOutcome> {
    let concat = ConcatenatedCode::new(code.clone(), Some(crc.clone()))?;
    Ok(ListDecoder::ca_bpl(&concat, set, max_iters, mode)?.decode(channel_llrs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::bp_decode;
    use crate::crc::CrcPoly;
    use crate::llr::LLR_MAX;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn frame(code: &ConcatenatedCode, sigma: f64, rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<f64>) {
        let payload: Vec<u8> = (0..code.payload_len()).map(|_| rng.random_range(0..2)).collect();
        let (_, x) = code.encode(&payload).unwrap();
        let llrs = x
            .iter()
            .map(|&b| {
                let n: f64 = StandardNormal.sample(rng);
                2.0 * (1.0 - 2.0 * f64::from(b) + sigma * n) / (sigma * sigma)
            })
            .collect();
        (payload, llrs)
    }

    fn some_perms(stages: usize, count: usize) -> PermSet {
        let all = FactorGraphPermutation::all(stages);
        let step = all.len() / count;
        PermSet::new((0..count).map(|i| all[i * step].clone()).collect()).unwrap()
    }

    #[test]
    fn perm_set_parsing() {
        let set = PermSet::parse("0,1,2\n# comment\n2,1,0  # reversed\n\n").unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains_default());
        assert_eq!(PermSet::parse(&set.to_text()).unwrap(), set);
        assert!(PermSet::parse("0,1,2\n0,1,2\n").is_err());
        assert!(PermSet::parse("0,1,2\n0,1\n").is_err());
        assert!(PermSet::parse("").is_err());
    }

    #[test]
    fn selection_rules() {
        assert_eq!(select(&[1.0, 3.0, 3.0], &[true, true, true]), (1, true));
        assert_eq!(select(&[1.0, 3.0, 2.0], &[true, false, true]), (2, true));
        assert_eq!(select(&[1.0, 3.0, 2.0], &[false, false, false]), (1, false));
    }

    #[test]
    fn single_member_equals_bp() {
        let code = ConcatenatedCode::nr(64, 32, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let set = PermSet::single(6);
        let mut dec = ListDecoder::bpl(&code, &set, 30, false).unwrap();
        for _ in 0..20 {
            let (_, llrs) = frame(&code, 0.8, &mut rng);
            let out = dec.decode(&llrs);
            let plain = bp_decode(
                &llrs,
                code.polar(),
                &set.perms()[0],
                &BpConfig::new(30, Stopping::GMatrix),
                None,
            );
            assert_eq!(out.winner(), &plain);
            assert_eq!(out.winner_valid, plain.converged);
        }
    }

    #[test]
    fn noiseless_all_candidates_agree() {
        let code = ConcatenatedCode::nr(32, 16, Some(CrcPoly::nr_crc6())).unwrap();
        let payload: Vec<u8> = (0..16).map(|i| (i * 5 % 3 == 1) as u8).collect();
        let (_, x) = code.encode(&payload).unwrap();
        let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { LLR_MAX } else { -LLR_MAX }).collect();
        let set = some_perms(5, 6);
        for mut dec in [
            ListDecoder::bpl(&code, &set, 20, true).unwrap(),
            ListDecoder::ca_bpl(&code, &set, 20, CrcMode::BCJR).unwrap(),
            ListDecoder::ca_bpl(&code, &set, 20, CrcMode::SPA).unwrap(),
        ] {
            let out = dec.decode(&llrs);
            assert!(out.valid_mask.iter().all(|&v| v));
            assert!(out.candidates.iter().all(|c| c.x_hat == x && c.iterations_used == 1));
            assert_eq!(code.payload_of(&out.winner().u_hat), payload);
        }
    }

    #[test]
    fn winner_dominates_valid_candidates() {
        let code = ConcatenatedCode::nr(64, 32, Some(CrcPoly::nr_crc6())).unwrap();
        let set = some_perms(6, 8);
        let mut dec = ListDecoder::ca_bpl(&code, &set, 25, CrcMode::BCJR).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let (_, llrs) = frame(&code, 0.85, &mut rng);
            let out = dec.decode(&llrs);
            let w = out.selection_metric[out.winner_index];
            for (m, &v) in out.selection_metric.iter().zip(&out.valid_mask) {
                if v || !out.winner_valid {
                    assert!(w >= *m);
                }
            }
            assert_eq!(out.winner_valid, out.valid_mask.iter().any(|&v| v));
        }
    }

    #[test]
    fn toy_wiring_touches_five_positions() {
        let polar = PolarCode::nr(8, 5).unwrap();
        let spec = CrcSpec::new(CrcPoly::crc2(), 5).unwrap();
        let code = ConcatenatedCode::new(polar.clone(), Some(spec.clone())).unwrap();
        let (_, x) = code.encode(&[1, 0, 1]).unwrap();
        let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { 8.0 } else { -8.0 }).collect();
        let set = PermSet::new(FactorGraphPermutation::all(3)).unwrap();
        let out = ca_bpl_decode(&llrs, &polar, &set, 5, &spec, CrcMode::BCJR).unwrap();
        assert!(out.candidates.iter().all(|c| c.left_llrs.len() == 5));
        assert_eq!(code.payload_of(&out.winner().u_hat), vec![1, 0, 1]);
    }

    #[test]
    fn bcjr_needs_small_crc() {
        let poly: CrcPoly = "24,23,6,5,1,0".parse().unwrap();
        let code = ConcatenatedCode::nr(128, 40, Some(poly)).unwrap();
        let set = PermSet::single(7);
        assert!(matches!(
            ListDecoder::ca_bpl(&code, &set, 5, CrcMode::BCJR),
            Err(Error::Capability(_))
        ));
        assert!(ListDecoder::ca_bpl(&code, &set, 5, CrcMode::SPA).is_ok());
    }
}

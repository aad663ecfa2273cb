use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::{awgn_bpsk_llrs, frame_rng, random_bits};
use crate::bp::{BpConfig, BpDecoder, FactorGraphPermutation, Stopping};
use crate::concat::ConcatenatedCode;
use crate::crc::CrcPoly;
use crate::error::{Error, Result};
use crate::gf2::Gf2Matrix;
use crate::list::{ca_scl_decode, osd_decode, sc_decode, CrcMode, ListDecoder, PermSet};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Bp,
    Bpl,
    CaBpl,
    Sc,
    CaScl,
    Osd,
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bp" => DecoderKind::Bp,
            "bpl" => DecoderKind::Bpl,
            "ca-bpl" => DecoderKind::CaBpl,
            "sc" => DecoderKind::Sc,
            "ca-scl" | "scl" => DecoderKind::CaScl,
            "osd" => DecoderKind::Osd,
            other => {
                return Err(Error::Config(format!(
                    "unknown decoder {other:?} (expected bp, bpl, ca-bpl, ca-bpl-bcjr, ca-bpl-spa, sc, ca-scl or osd)"
                )))
            }
        })
    }
}

/// One decoder of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub kind: DecoderKind,
    /// list size for BPL, CA-BPL and CA-SCL
    pub list_size: usize,
    /// BP iterations per list member
    pub iters: usize,
    pub crc_mode: CrcMode,
    pub osd_order: usize,
    pub perm_file: Option<PathBuf>,
}

impl DecoderConfig {
    pub fn new(kind: DecoderKind) -> Self {
        DecoderConfig {
            kind,
            list_size: 8,
            iters: 50,
            crc_mode: CrcMode::BCJR,
            osd_order: 2,
            perm_file: None,
        }
    }

    /// Parses a label; `ca-bpl-bcjr` and `ca-bpl-spa` also set the CRC mode.
    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "ca-bpl-bcjr" => Ok(DecoderConfig { crc_mode: CrcMode::BCJR, ..Self::new(DecoderKind::CaBpl) }),
            "ca-bpl-spa" => Ok(DecoderConfig { crc_mode: CrcMode::SPA, ..Self::new(DecoderKind::CaBpl) }),
            other => Ok(Self::new(other.parse()?)),
        }
    }

    /// Label written to the CSV.
    pub fn label(&self) -> String {
        match self.kind {
            DecoderKind::Bp => "bp".into(),
            DecoderKind::Bpl => "bpl".into(),
            DecoderKind::CaBpl => match self.crc_mode {
                CrcMode::Bcjr { .. } => "ca-bpl-bcjr".into(),
                CrcMode::Spa { .. } => "ca-bpl-spa".into(),
            },
            DecoderKind::Sc => "sc".into(),
            DecoderKind::CaScl => "ca-scl".into(),
            DecoderKind::Osd => "osd".into(),
        }
    }
}

impl fmt::Display for DecoderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DecoderKind::Bp => write!(f, "bp({} iters)", self.iters),
            DecoderKind::Bpl | DecoderKind::CaBpl => {
                write!(f, "{}(L={}, {} iters)", self.label(), self.list_size, self.iters)
            }
            DecoderKind::Sc => write!(f, "sc"),
            DecoderKind::CaScl => write!(f, "ca-scl(L={})", self.list_size),
            DecoderKind::Osd => write!(f, "osd(order {})", self.osd_order),
        }
    }
}

/// Code, channel sweep and stopping rules of a Monte-Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub len: usize,
    pub payload_len: usize,
    pub crc: Option<CrcPoly>,
    pub snr_start: f64,
    pub snr_stop: f64,
    pub snr_step: f64,
    /// an SNR point ends once this many block errors are seen ...
    pub min_errors: u64,
    /// ... or this many frames are simulated
    pub max_frames: u64,
    pub seed: u64,
    /// worker threads (`None`: all cores); results do not depend on it
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            len: 128,
            payload_len: 64,
            crc: Some(CrcPoly::nr_crc6()),
            snr_start: 1.0,
            snr_stop: 4.0,
            snr_step: 0.5,
            min_errors: 100,
            max_frames: 1_000_000,
            seed: 1,
            workers: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr_step > 0.0) {
            return Err(Error::Config("SNR step must be positive".into()));
        }
        if self.snr_stop < self.snr_start {
            return Err(Error::Config("SNR stop lies below SNR start".into()));
        }
        if self.min_errors == 0 || self.max_frames == 0 {
            return Err(Error::Config("min errors and max frames must be at least 1".into()));
        }
        Ok(())
    }

    pub fn snr_points(&self) -> Vec<f64> {
        let count = ((self.snr_stop - self.snr_start) / self.snr_step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.snr_start + i as f64 * self.snr_step).collect()
    }

    pub fn code(&self) -> Result<ConcatenatedCode> {
        ConcatenatedCode::nr(self.len, self.payload_len, self.crc.clone())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerRow {
    pub decoder: String,
    pub snr_db: f64,
    pub frames: u64,
    pub block_errors: u64,
    pub bit_errors: u64,
    pub bler: f64,
    pub ber: f64,
    /// BP iterations per frame, summed over list members
    pub avg_iters: f64,
    pub seconds: f64,
}

pub const CSV_HEADER: &str = "decoder,snr_db,frames,block_errors,bit_errors,bler,ber,avg_iters,seconds";

/// Deterministic set of `list_size` distinct permutations starting with the
/// default graph. Used when no permutation file is given.
pub fn default_perm_set(stages: usize, list_size: usize) -> Result<PermSet> {
    if list_size == 0 {
        return Err(Error::Config("list size must be at least 1".into()));
    }
    let default = FactorGraphPermutation::identity(stages);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut perms = vec![default];
    let mut order: Vec<usize> = (0..stages).collect();
    let mut attempts = 0;
    while perms.len() < list_size {
        order.shuffle(&mut rng);
        let p = FactorGraphPermutation::new(order.clone())?;
        if !perms.contains(&p) {
            perms.push(p);
        }
        attempts += 1;
        if attempts > 100 * list_size + 1000 {
            return Err(Error::Config(format!("no {list_size} distinct permutations of {stages} stages")));
        }
    }
    PermSet::new(perms)
}

/// Builds per-worker decoder instances. Construction validates everything
/// (permutation files, CRC capability) so errors surface before simulation.
#[derive(Debug, Clone)]
pub struct DecoderFactory {
    code: ConcatenatedCode,
    cfg: DecoderConfig,
    set: Option<PermSet>,
    generator: Option<Gf2Matrix>,
}

impl DecoderFactory {
    pub fn new(code: &ConcatenatedCode, cfg: &DecoderConfig) -> Result<Self> {
        let mut set = None;
        let mut generator = None;
        match cfg.kind {
            DecoderKind::Bp | DecoderKind::Bpl | DecoderKind::CaBpl => {
                if cfg.iters == 0 {
                    return Err(Error::Config("iterations must be at least 1".into()));
                }
                let size = if cfg.kind == DecoderKind::Bp { 1 } else { cfg.list_size };
                let s = match &cfg.perm_file {
                    Some(path) => {
                        if !path.exists() {
                            return Err(Error::Config(format!("permutation file {} not found", path.display())));
                        }
                        let full = PermSet::load(path)?;
                        if full.len() < size {
                            return Err(Error::Config(format!(
                                "permutation file {} holds {} permutations, list size is {size}",
                                path.display(),
                                full.len()
                            )));
                        }
                        full.truncated(size)?
                    }
                    None => default_perm_set(code.polar().stages(), size)?,
                };
                if s.stages() != code.polar().stages() {
                    return Err(Error::Config(format!(
                        "permutations have {} stages, code has {}",
                        s.stages(),
                        code.polar().stages()
                    )));
                }
                set = Some(s);
            }
            DecoderKind::CaScl if cfg.list_size == 0 => {
                return Err(Error::Config("list size must be at least 1".into()));
            }
            DecoderKind::Osd => generator = Some(code.generator()),
            DecoderKind::Sc | DecoderKind::CaScl => {}
        }
        let factory = DecoderFactory { code: code.clone(), cfg: cfg.clone(), set, generator };
        factory.build()?;
        if let Some(g) = &factory.generator {
            osd_decode(&vec![1.0; code.len()], g, cfg.osd_order)?;
        }
        Ok(factory)
    }

    pub fn build(&self) -> Result<FrameDecoder> {
        let code = &self.code;
        Ok(match self.cfg.kind {
            DecoderKind::Bp => {
                let perm = &self.set.as_ref().expect("set built").perms()[0];
                let stopping = match code.crc() {
                    Some(spec) => Stopping::Crc(spec.clone()),
                    None => Stopping::GMatrix,
                };
                FrameDecoder::Bp(BpDecoder::new(code.polar(), perm), BpConfig::new(self.cfg.iters, stopping))
            }
            DecoderKind::Bpl => FrameDecoder::List(Box::new(ListDecoder::bpl(
                code,
                self.set.as_ref().expect("set built"),
                self.cfg.iters,
                true,
            )?)),
            DecoderKind::CaBpl => FrameDecoder::List(Box::new(ListDecoder::ca_bpl(
                code,
                self.set.as_ref().expect("set built"),
                self.cfg.iters,
                self.cfg.crc_mode,
            )?)),
            DecoderKind::Sc => FrameDecoder::Sc,
            DecoderKind::CaScl => FrameDecoder::CaScl(self.cfg.list_size),
            DecoderKind::Osd => FrameDecoder::Osd(self.cfg.osd_order),
        })
    }

    pub fn code(&self) -> &ConcatenatedCode {
        &self.code
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    /// Decodes one frame: `(payload estimate, BP iterations spent)`.
    pub fn decode(&self, dec: &mut FrameDecoder, llrs: &[f64]) -> Result<(Vec<u8>, usize)> {
        let code = &self.code;
        Ok(match dec {
            FrameDecoder::Bp(bp, cfg) => {
                let res = bp.decode(llrs, cfg, None);
                (code.payload_of(&res.u_hat), res.iterations_used)
            }
            FrameDecoder::List(list) => {
                let out = list.decode(llrs);
                let iters = out.candidates.iter().map(|c| c.iterations_used).sum();
                (code.payload_of(&out.winner().u_hat), iters)
            }
            FrameDecoder::Sc => (code.payload_of(&sc_decode(llrs, code.polar()).u_hat), 0),
            FrameDecoder::CaScl(l) => (code.payload_of(&ca_scl_decode(llrs, code.polar(), *l, code.crc()).u_hat), 0),
            FrameDecoder::Osd(order) => {
                let g = self.generator.as_ref().expect("generator built");
                (osd_decode(llrs, g, *order)?.message, 0)
            }
        })
    }
}

/// A decoder instance owning its scratch memory.
#[derive(Debug, Clone)]
pub enum FrameDecoder {
    Bp(BpDecoder, BpConfig),
    List(Box<ListDecoder>),
    Sc,
    CaScl(usize),
    Osd(usize),
}

/// Frames per parallel batch; fixed so that stopping decisions, and hence
/// the output, do not depend on the worker count.
const BATCH: u64 = 200;

struct FrameStats {
    block_error: bool,
    bit_errors: u64,
    iters: usize,
}

fn simulate_point(factory: &DecoderFactory, sim: &SimConfig, snr_index: usize, snr_db: f64) -> Result<BlerRow> {
    let code = factory.code();
    let start = Instant::now();
    let (mut frames, mut block_errors, mut bit_errors, mut iters) = (0u64, 0u64, 0u64, 0u64);
    while block_errors < sim.min_errors && frames < sim.max_frames {
        let batch = BATCH.min(sim.max_frames - frames);
        let base = frames;
        let stats = par::map_init(
            batch as usize,
            || factory.build().expect("validated at construction"),
            |dec, i| -> Result<FrameStats> {
                let mut rng = frame_rng(sim.seed, snr_index as u64, base + i as u64);
                let payload = random_bits(code.payload_len(), &mut rng);
                let (_, x) = code.encode(&payload)?;
                let llrs = awgn_bpsk_llrs(&x, snr_db, code.rate(), &mut rng);
                let (estimate, it) = factory.decode(dec, &llrs)?;
                let errs = estimate.iter().zip(&payload).filter(|(a, b)| a != b).count() as u64;
                Ok(FrameStats { block_error: errs > 0, bit_errors: errs, iters: it })
            },
        );
        for s in stats {
            let s = s?;
            block_errors += u64::from(s.block_error);
            bit_errors += s.bit_errors;
            iters += s.iters as u64;
        }
        frames += batch;
    }
    Ok(BlerRow {
        decoder: factory.config().label(),
        snr_db,
        frames,
        block_errors,
        bit_errors,
        bler: block_errors as f64 / frames as f64,
        ber: bit_errors as f64 / (frames as f64 * code.payload_len() as f64),
        avg_iters: iters as f64 / frames as f64,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// BLER sweep of one decoder; each finished row is passed to `on_row`
/// (e.g. to append it to a CSV file).
pub fn run_bler(
    sim: &SimConfig,
    decoder: &DecoderConfig,
    on_row: &mut dyn FnMut(&BlerRow) -> Result<()>,
) -> Result<Vec<BlerRow>> {
    sim.validate()?;
    let factory = DecoderFactory::new(&sim.code()?, decoder)?;
    sweep(sim, &factory, on_row)
}

fn sweep(sim: &SimConfig, factory: &DecoderFactory, on_row: &mut dyn FnMut(&BlerRow) -> Result<()>) -> Result<Vec<BlerRow>> {
    let mut rows = Vec::new();
    for (i, snr) in sim.snr_points().into_iter().enumerate() {
        let row = par::with_workers(sim.workers, || simulate_point(factory, sim, i, snr))??;
        on_row(&row)?;
        rows.push(row);
    }
    Ok(rows)
}

/// SNR gap between two decoders at a common BLER.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate {
    pub reference: String,
    pub other: String,
    pub target_bler: f64,
    /// SNR(other) - SNR(reference) in dB; positive when `other` is worse
    pub gap_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<BlerRow>,
    pub gaps: Vec<GapEstimate>,
}

/// SNR at which a BLER curve crosses `target`, interpolating log10(BLER)
/// linearly between neighbouring points.
pub fn crossing_snr(rows: &[BlerRow], target: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.bler > 0.0)
        .map(|r| (r.snr_db, r.bler.log10()))
        .collect();
    let t = target.log10();
    pts.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if (b0 - t) * (b1 - t) > 0.0 || b0 == b1 {
            return (b0 == t).then_some(s0);
        }
        Some(s0 + (t - b0) / (b1 - b0) * (s1 - s0))
    })
}

/// Runs every decoder on identical noise (paired seeds) and reports gaps of
/// each decoder against the first one at `target_bler`.
pub fn compare_decoders(
    sim: &SimConfig,
    decoders: &[DecoderConfig],
    target_bler: f64,
    on_row: &mut dyn FnMut(&BlerRow) -> Result<()>,
) -> Result<Comparison> {
    if decoders.len() < 2 {
        return Err(Error::Config("comparison needs at least two decoders".into()));
    }
    sim.validate()?;
    let code = sim.code()?;
    let factories = decoders
        .iter()
        .map(|d| DecoderFactory::new(&code, d))
        .collect::<Result<Vec<_>>>()?;
    let mut curves = Vec::new();
    for f in &factories {
        curves.push(sweep(sim, f, on_row)?);
    }
    let gaps = curves
        .iter()
        .zip(decoders)
        .skip(1)
        .map(|(curve, d)| GapEstimate {
            reference: decoders[0].to_string(),
            other: d.to_string(),
            target_bler,
            gap_db: crossing_snr(&curves[0], target_bler)
                .zip(crossing_snr(curve, target_bler))
                .map(|(a, b)| b - a),
        })
        .collect();
    Ok(Comparison { rows: curves.concat(), gaps })
}

/// Writes rows as CSV.
pub fn write_csv<W: std::io::Write>(out: W, rows: &[BlerRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows to a CSV stream, writing the header before the first row.
pub struct CsvSink<W: std::io::Write> {
    writer: csv::Writer<W>,
}

impl<W: std::io::Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        CsvSink { writer: csv::Writer::from_writer(out) }
    }

    pub fn push(&mut self, row: &BlerRow) -> Result<()> {
        self.writer
            .serialize(row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        self.writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sim() -> SimConfig {
        SimConfig {
            len: 32,
            payload_len: 10,
            crc: Some(CrcPoly::nr_crc6()),
            snr_start: 1.0,
            snr_stop: 2.0,
            snr_step: 1.0,
            min_errors: 20,
            max_frames: 600,
            seed: 3,
            workers: None,
        }
    }

    #[test]
    fn csv_header_matches() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        let row = BlerRow {
            decoder: "bp".into(),
            snr_db: 1.0,
            frames: 1,
            block_errors: 0,
            bit_errors: 0,
            bler: 0.0,
            ber: 0.0,
            avg_iters: 1.0,
            seconds: 0.0,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn snr_grid() {
        let s = SimConfig { snr_start: 1.0, snr_stop: 2.0, snr_step: 0.25, ..SimConfig::default() };
        assert_eq!(s.snr_points(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(SimConfig { snr_step: 0.0, ..s }.validate().is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(DecoderConfig::from_label("ca-bpl-spa").unwrap().label(), "ca-bpl-spa");
        assert_eq!(DecoderConfig::from_label("ca-bpl").unwrap().label(), "ca-bpl-bcjr");
        assert!(matches!(DecoderConfig::from_label("turbo"), Err(Error::Config(_))));
    }

    #[test]
    fn missing_perm_file_is_config_error() {
        let d = DecoderConfig { perm_file: Some("/nonexistent/perms.txt".into()), ..DecoderConfig::new(DecoderKind::Bpl) };
        let err = run_bler(&small_sim(), &d, &mut |_| Ok(())).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn noiseless_point_is_error_free() {
        let sim = SimConfig { snr_start: 50.0, snr_stop: 50.0, max_frames: 200, ..small_sim() };
        for label in ["bp", "bpl", "ca-bpl-bcjr", "ca-bpl-spa", "sc", "ca-scl", "osd"] {
            let rows = run_bler(&sim, &DecoderConfig::from_label(label).unwrap(), &mut |_| Ok(())).unwrap();
            assert_eq!(rows[0].block_errors, 0, "{label}");
            assert_eq!(rows[0].frames, 200);
        }
    }

    #[test]
    fn identical_decoders_give_identical_rows() {
        let d = DecoderConfig::from_label("bp").unwrap();
        let cmp = compare_decoders(&small_sim(), &[d.clone(), d], 0.1, &mut |_| Ok(())).unwrap();
        let strip = |r: &BlerRow| BlerRow { seconds: 0.0, ..r.clone() };
        assert_eq!(strip(&cmp.rows[0]), strip(&cmp.rows[2]));
        assert_eq!(strip(&cmp.rows[1]), strip(&cmp.rows[3]));
        for r in &cmp.rows {
            assert!(r.frames >= r.block_errors && r.ber <= r.bler);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let d = DecoderConfig::from_label("ca-bpl-bcjr").unwrap();
        let strip = |rows: Vec<BlerRow>| rows.into_iter().map(|r| BlerRow { seconds: 0.0, ..r }).collect::<Vec<_>>();
        let one = strip(run_bler(&SimConfig { workers: Some(1), ..small_sim() }, &d, &mut |_| Ok(())).unwrap());
        let three = strip(run_bler(&SimConfig { workers: Some(3), ..small_sim() }, &d, &mut |_| Ok(())).unwrap());
        assert_eq!(one, three);
    }

    #[test]
    fn crossing_interpolates_in_log_domain() {
        let row = |snr: f64, bler: f64| BlerRow {
            decoder: String::new(),
            snr_db: snr,
            frames: 1,
            block_errors: 0,
            bit_errors: 0,
            bler,
            ber: 0.0,
            avg_iters: 0.0,
            seconds: 0.0,
        };
        let rows = [row(1.0, 1e-1), row(2.0, 1e-3)];
        assert!((crossing_snr(&rows, 1e-2).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(crossing_snr(&rows, 1e-5), None);
    }

    #[test]
    fn default_sets_are_distinct() {
        let s = default_perm_set(7, 32).unwrap();
        assert_eq!(s.len(), 32);
        assert!(s.perms()[0].is_identity());
        assert!(default_perm_set(3, 7).is_err());
    }
}

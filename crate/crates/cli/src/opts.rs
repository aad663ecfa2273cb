use std::path::{Path, PathBuf};

use cabpl::crc::CrcPoly;
use cabpl::list::CrcMode;
use cabpl::perm::GaParams;
use cabpl::sim::{DecoderConfig, SimConfig};
use cabpl::{Error, Result};
use clap::Args;
use serde::Deserialize;

/// Every setting of every subcommand. Each can come from the `--config`
/// file (same names, with underscores) or from a flag; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opts {
    /// Key-value (TOML) configuration file
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Code length N
    #[arg(long, help_heading = "Code")]
    pub n: Option<usize>,
    /// Payload bits (excluding the CRC)
    #[arg(long, help_heading = "Code")]
    pub k: Option<usize>,
    /// CRC polynomial: exponents ("6,5,0"), hex ("0x61") or "none"
    #[arg(long, help_heading = "Code")]
    pub crc: Option<String>,

    /// Decoder: bp, bpl, ca-bpl, ca-bpl-bcjr, ca-bpl-spa, sc, ca-scl, osd
    #[arg(long, help_heading = "Decoder")]
    pub decoder: Option<String>,
    /// Decoders to compare, comma separated
    #[arg(long, value_delimiter = ',', help_heading = "Decoder")]
    pub decoders: Option<Vec<String>>,
    #[arg(long, help_heading = "Decoder")]
    pub list_size: Option<usize>,
    /// Maximum BP iterations per list member
    #[arg(long, help_heading = "Decoder")]
    pub iters: Option<usize>,
    /// CRC soft decoder for ca-bpl: bcjr, bcjr-maxlog or spa
    #[arg(long, help_heading = "Decoder")]
    pub crc_mode: Option<String>,
    /// Flooding iterations of the SPA CRC decoder per BP iteration
    #[arg(long, help_heading = "Decoder")]
    pub spa_iters: Option<usize>,
    #[arg(long, help_heading = "Decoder")]
    pub osd_order: Option<usize>,
    /// Permutation set, one stage order per line ("0,1,2,...")
    #[arg(long, help_heading = "Decoder")]
    pub perm_file: Option<PathBuf>,

    /// Eb/N0 in dB (single point)
    #[arg(long, help_heading = "Channel")]
    pub snr: Option<f64>,
    #[arg(long, help_heading = "Channel")]
    pub snr_start: Option<f64>,
    #[arg(long, help_heading = "Channel")]
    pub snr_stop: Option<f64>,
    #[arg(long, help_heading = "Channel")]
    pub snr_step: Option<f64>,
    #[arg(long, help_heading = "Channel")]
    pub min_errors: Option<u64>,
    #[arg(long, help_heading = "Channel")]
    pub max_frames: Option<u64>,
    /// Master seed
    #[arg(long, help_heading = "Channel")]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it)
    #[arg(long, help_heading = "Channel")]
    pub workers: Option<usize>,
    /// Target BLER for gap estimates in `compare`
    #[arg(long, help_heading = "Channel")]
    pub target_bler: Option<f64>,

    /// Failure-dataset file
    #[arg(long, help_heading = "Permutation selection")]
    pub dataset: Option<PathBuf>,
    /// Frames to collect
    #[arg(long, help_heading = "Permutation selection")]
    pub count: Option<usize>,
    /// Candidate pool: a permutation file, or "all" for every stage order
    #[arg(long, help_heading = "Permutation selection")]
    pub pool: Option<String>,
    /// Convergence-matrix cache file
    #[arg(long, help_heading = "Permutation selection")]
    pub cache: Option<PathBuf>,
    #[arg(long, help_heading = "Permutation selection")]
    pub train_fraction: Option<f64>,
    #[arg(long, help_heading = "Permutation selection")]
    pub population: Option<usize>,
    #[arg(long, help_heading = "Permutation selection")]
    pub generations: Option<usize>,
    #[arg(long, help_heading = "Permutation selection")]
    pub tournament: Option<usize>,
    #[arg(long, help_heading = "Permutation selection")]
    pub mutation_rate: Option<f64>,
    #[arg(long, help_heading = "Permutation selection")]
    pub elitism: Option<usize>,
    /// Random sets drawn as a baseline by `select-perms`
    #[arg(long, help_heading = "Permutation selection")]
    pub random_sets: Option<usize>,

    /// Payload bits for `encode` ("0110...")
    #[arg(long, help_heading = "Single frame")]
    pub payload: Option<String>,
    /// Whitespace-separated channel LLRs for `decode-one`
    #[arg(long, help_heading = "Single frame")]
    pub llr_file: Option<PathBuf>,
    /// Write BP message memory of `decode-one` here
    #[arg(long, help_heading = "Single frame")]
    pub dump: Option<PathBuf>,

    /// Output file (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => { $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )* };
}

impl Opts {
    /// Fills unset flags from the configuration file, if one was given.
    pub fn resolve(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut file: Opts =
            toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        // relative paths in the file are relative to the file; flags stay as given
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut file.perm_file, &mut file.dataset, &mut file.cache, &mut file.llr_file, &mut file.dump, &mut file.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(pool) = file.pool.as_mut().filter(|p| *p != "all" && Path::new(p.as_str()).is_relative()) {
            *pool = base.join(&*pool).to_string_lossy().into_owned();
        }
        merge_fields!(self, file; n, k, crc, decoder, decoders, list_size, iters, crc_mode, spa_iters,
            osd_order, perm_file, snr, snr_start, snr_stop, snr_step, min_errors, max_frames, seed,
            workers, target_bler, dataset, count, pool, cache, train_fraction, population, generations,
            tournament, mutation_rate, elitism, random_sets, payload, llr_file, dump, out);
        Ok(self)
    }

    pub fn crc_poly(&self) -> Result<Option<CrcPoly>> {
        match self.crc.as_deref() {
            None => Ok(Some(CrcPoly::nr_crc6())),
            Some("none") => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e| Error::Config(format!("--crc: {e}"))),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let snr = self.snr;
        let cfg = SimConfig {
            len: self.n.unwrap_or(d.len),
            payload_len: self.k.unwrap_or(d.payload_len),
            crc: self.crc_poly()?,
            snr_start: self.snr_start.or(snr).unwrap_or(d.snr_start),
            snr_stop: self.snr_stop.or(snr).unwrap_or(d.snr_stop),
            snr_step: self.snr_step.unwrap_or(d.snr_step),
            min_errors: self.min_errors.unwrap_or(d.min_errors),
            max_frames: self.max_frames.unwrap_or(d.max_frames),
            seed: self.seed.unwrap_or(d.seed),
            workers: self.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn crc_mode(&self) -> Result<CrcMode> {
        let spa_iters = self.spa_iters.unwrap_or(1);
        match self.crc_mode.as_deref().unwrap_or("bcjr") {
            "bcjr" => Ok(CrcMode::Bcjr { max_log: false }),
            "bcjr-maxlog" => Ok(CrcMode::Bcjr { max_log: true }),
            "spa" if spa_iters >= 1 => Ok(CrcMode::Spa { inner_iters: spa_iters }),
            "spa" => Err(Error::Config("--spa-iters must be at least 1".into())),
            other => Err(Error::Config(format!(
                "unknown CRC mode {other:?} (expected bcjr, bcjr-maxlog or spa)"
            ))),
        }
    }

    pub fn decoder_config(&self, label: &str) -> Result<DecoderConfig> {
        let mut d = DecoderConfig::from_label(label)?;
        // `ca-bpl` takes its CRC decoder from --crc-mode; the suffixed labels fix it
        match label {
            "ca-bpl" => d.crc_mode = self.crc_mode()?,
            "ca-bpl-spa" => d.crc_mode = CrcMode::Spa { inner_iters: self.spa_iters.unwrap_or(1).max(1) },
            _ => {}
        }
        if let Some(l) = self.list_size {
            d.list_size = l;
        }
        if let Some(it) = self.iters {
            d.iters = it;
        }
        if let Some(o) = self.osd_order {
            d.osd_order = o;
        }
        d.perm_file = self.perm_file.clone();
        Ok(d)
    }

    pub fn ga_params(&self) -> GaParams {
        let d = GaParams::default();
        GaParams {
            population: self.population.unwrap_or(d.population),
            tournament: self.tournament.unwrap_or(d.tournament),
            mutation_rate: self.mutation_rate.unwrap_or(d.mutation_rate),
            generations: self.generations.unwrap_or(d.generations),
            elitism: self.elitism.unwrap_or(d.elitism),
        }
    }

    pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
    }
}

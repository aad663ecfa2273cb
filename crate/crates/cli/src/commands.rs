use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use cabpl::bp::FactorGraphPermutation;
use cabpl::concat::ConcatenatedCode;
use cabpl::list::PermSet;
use cabpl::perm::{
    collect_failures, cyclic_shift_set, evaluate_pool, genetic_select, pool_fingerprint, random_subsets,
    ConvergenceMatrix, FailureDataset, PoolConfig,
};
use cabpl::sim::{
    awgn_bpsk_llrs, compare_decoders, frame_rng, random_bits, run_bler, CsvSink, DecoderFactory, FrameDecoder,
};
use cabpl::{Error, Result};

use crate::opts::Opts;

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| char::from(b'0' + b)).collect()
}

fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.trim()
        .bytes()
        .map(|c| match c {
            b'0' | b'1' => Ok(c - b'0'),
            _ => Err(Error::Config(format!("bit string {s:?} may only hold 0 and 1"))),
        })
        .collect()
}

fn code(opts: &Opts) -> Result<ConcatenatedCode> {
    opts.sim_config()?.code()
}

pub fn simulate(opts: &Opts) -> Result<()> {
    let sim = opts.sim_config()?;
    let decoder = opts.decoder_config(Opts::require(&opts.decoder, "decoder")?)?;
    // build (and so validate) everything before the output file is touched
    DecoderFactory::new(&sim.code()?, &decoder)?;
    let mut sink = CsvSink::new(output(opts.out.as_deref())?);
    run_bler(&sim, &decoder, &mut |row| {
        eprintln!("{decoder} {:.2} dB: {}/{} errors, BLER {:.3e}", row.snr_db, row.block_errors, row.frames, row.bler);
        sink.push(row)
    })?;
    Ok(())
}

pub fn compare(opts: &Opts) -> Result<()> {
    let sim = opts.sim_config()?;
    let labels = Opts::require(&opts.decoders, "decoders")?;
    let decoders = labels
        .iter()
        .map(|l| opts.decoder_config(l))
        .collect::<Result<Vec<_>>>()?;
    let code = sim.code()?;
    for d in &decoders {
        DecoderFactory::new(&code, d)?;
    }
    let mut sink = CsvSink::new(output(opts.out.as_deref())?);
    let cmp = compare_decoders(&sim, &decoders, opts.target_bler.unwrap_or(1e-2), &mut |row| {
        eprintln!("{} {:.2} dB: {}/{} errors, BLER {:.3e}", row.decoder, row.snr_db, row.block_errors, row.frames, row.bler);
        sink.push(row)
    })?;
    eprintln!("gap at BLER {:.1e} relative to {}:", cmp.gaps[0].target_bler, cmp.gaps[0].reference);
    for g in &cmp.gaps {
        match g.gap_db {
            Some(db) => eprintln!("  {:<28} {:+.3} dB", g.other, db),
            None => eprintln!("  {:<28} n/a (curves do not both cross the target)", g.other),
        }
    }
    Ok(())
}

fn pool_config(opts: &Opts) -> Result<PoolConfig> {
    PoolConfig::new(code(opts)?, opts.iters.unwrap_or(50))
}

fn load_pool(opts: &Opts, stages: usize) -> Result<Vec<FactorGraphPermutation>> {
    match opts.pool.as_deref().unwrap_or("all") {
        "all" => Ok(FactorGraphPermutation::all(stages)),
        path => {
            let p = Path::new(path);
            if !p.exists() {
                return Err(Error::Config(format!("pool file {path} not found")));
            }
            Ok(PermSet::load(p)?.perms().to_vec())
        }
    }
}

fn load_dataset(opts: &Opts) -> Result<FailureDataset> {
    let path = Opts::require(&opts.dataset, "dataset")?;
    if !path.exists() {
        return Err(Error::Config(format!("dataset {} not found", path.display())));
    }
    FailureDataset::load(path)
}

pub fn collect(opts: &Opts) -> Result<()> {
    let cfg = pool_config(opts)?;
    let default = FactorGraphPermutation::identity(cfg.code.polar().stages());
    let snr = opts.snr.unwrap_or(4.0);
    let count = opts.count.unwrap_or(1000);
    let ds = collect_failures(&cfg, &default, snr, count, opts.seed.unwrap_or(1), opts.max_frames.unwrap_or(10_000_000))?;
    output(opts.out.as_deref())?.write_all(ds.to_text().as_bytes())?;
    eprintln!("collected {} default-graph failures at {snr} dB", ds.frames.len());
    Ok(())
}

/// Convergence matrix from the cache when it matches, else computed (and cached).
fn matrix(opts: &Opts, ds: &FailureDataset, pool: &[FactorGraphPermutation], cfg: &PoolConfig) -> Result<ConvergenceMatrix> {
    let (ph, dh) = (pool_fingerprint(pool), ds.fingerprint());
    if let Some(cache) = &opts.cache {
        if cache.exists() {
            match ConvergenceMatrix::load(cache, ph, dh) {
                Ok(m) => return Ok(m),
                Err(e) => eprintln!("ignoring cache: {e}"),
            }
        }
    }
    let m = evaluate_pool(ds, pool, cfg)?;
    if let Some(cache) = &opts.cache {
        m.save(cache, ph, dh)?;
    }
    Ok(m)
}

pub fn eval_perms(opts: &Opts) -> Result<()> {
    let cfg = pool_config(opts)?;
    let ds = load_dataset(opts)?;
    let pool = load_pool(opts, cfg.code.polar().stages())?;
    let m = matrix(opts, &ds, &pool, &cfg)?;
    if let Some(out) = &opts.out {
        m.save(out, pool_fingerprint(&pool), ds.fingerprint())?;
    }
    let mut ranked: Vec<usize> = (0..m.rows()).collect();
    ranked.sort_by_key(|&r| (std::cmp::Reverse(m.row_successes(r)), r));
    let mut w = io::stdout().lock();
    writeln!(w, "permutation\trecovered\tof")?;
    for &r in ranked.iter().take(20) {
        writeln!(w, "{}\t{}\t{}", pool[r], m.row_successes(r), m.cols())?;
    }
    Ok(())
}

pub fn select_perms(opts: &Opts) -> Result<()> {
    let cfg = pool_config(opts)?;
    let stages = cfg.code.polar().stages();
    let ds = load_dataset(opts)?;
    let pool = load_pool(opts, stages)?;
    let default = FactorGraphPermutation::identity(stages);
    let default_row = pool
        .iter()
        .position(|p| *p == default)
        .ok_or_else(|| Error::Config("the pool must contain the default permutation".into()))?;
    let list_size = opts.list_size.unwrap_or(8);
    if list_size < 2 {
        return Err(Error::Config("--list-size must be at least 2 for selection".into()));
    }
    let m = matrix(opts, &ds, &pool, &cfg)?;
    let seed = opts.seed.unwrap_or(1);
    let sel = genetic_select(&m, default_row, list_size - 1, opts.train_fraction.unwrap_or(0.75), &opts.ga_params(), seed)?;
    let set = cabpl::perm::rows_to_set(&pool, &sel.rows)?;
    output(opts.out.as_deref())?.write_all(set.to_text().as_bytes())?;

    let valid = m.columns(sel.train_cols, m.cols());
    eprintln!(
        "selected L = {list_size}: joint failure train {:.4}, validation {:.4}",
        sel.train_joint_failure, sel.validation_joint_failure
    );
    if list_size <= stages {
        let rows: Option<Vec<usize>> = cyclic_shift_set(&default, list_size)?
            .perms()
            .iter()
            .map(|p| pool.iter().position(|q| q == p))
            .collect();
        if let Some(rows) = rows {
            eprintln!("cyclic shifts: validation {:.4}", valid.joint_failure(&rows)?);
        }
    }
    let n_random = opts.random_sets.unwrap_or(100);
    if n_random > 0 {
        let sets = random_subsets(m.rows(), default_row, list_size - 1, n_random, seed ^ 0xA5A5);
        let mean = sets.iter().map(|s| valid.joint_failure(s)).sum::<Result<f64>>()? / n_random as f64;
        eprintln!("{n_random} random sets: mean validation {mean:.4}");
    }
    Ok(())
}

pub fn encode(opts: &Opts) -> Result<()> {
    let code = code(opts)?;
    let payload = match &opts.payload {
        Some(p) => parse_bits(p)?,
        None => random_bits(code.payload_len(), &mut frame_rng(opts.seed.unwrap_or(1), 0, 0)),
    };
    let (u, x) = code.encode(&payload)?;
    let mut w = output(opts.out.as_deref())?;
    writeln!(w, "payload {}", bits_to_string(&payload))?;
    writeln!(w, "u       {}", bits_to_string(&u))?;
    writeln!(w, "x       {}", bits_to_string(&x))?;
    Ok(())
}

pub fn decode_one(opts: &Opts) -> Result<()> {
    let code = code(opts)?;
    let decoder = opts.decoder_config(Opts::require(&opts.decoder, "decoder")?)?;
    let factory = DecoderFactory::new(&code, &decoder)?;
    let mut w = output(opts.out.as_deref())?;
    let (llrs, sent) = match &opts.llr_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let llrs = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad LLR {t:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            if llrs.len() != code.len() {
                return Err(Error::InvalidDimension(format!("{} LLRs for N = {}", llrs.len(), code.len())));
            }
            (llrs, None)
        }
        None => {
            let snr = opts.snr.unwrap_or(4.0);
            let mut rng = frame_rng(opts.seed.unwrap_or(1), 0, 0);
            let payload = random_bits(code.payload_len(), &mut rng);
            let (_, x) = code.encode(&payload)?;
            (awgn_bpsk_llrs(&x, snr, code.rate(), &mut rng), Some(payload))
        }
    };
    if let Some(p) = &sent {
        writeln!(w, "sent     {}", bits_to_string(p))?;
    }
    let mut dec = factory.build()?;
    match &mut dec {
        FrameDecoder::List(list) => {
            let out = list.decode(&llrs);
            writeln!(w, "member\tpermutation\tconverged\titerations\tvalid\tcorrelation")?;
            for (i, (c, perm)) in out.candidates.iter().zip(list_perms(opts, &code, &decoder)?).enumerate() {
                writeln!(
                    w,
                    "{i}\t{perm}\t{}\t{}\t{}\t{:.3}",
                    c.converged, c.iterations_used, out.valid_mask[i], out.selection_metric[i]
                )?;
            }
            writeln!(w, "winner   {} (valid: {})", out.winner_index, out.winner_valid)?;
            writeln!(w, "decoded  {}", bits_to_string(&code.payload_of(&out.winner().u_hat)))?;
        }
        _ => {
            let (payload, iters) = factory.decode(&mut dec, &llrs)?;
            writeln!(w, "decoded  {}", bits_to_string(&payload))?;
            if iters > 0 {
                writeln!(w, "iterations {iters}")?;
            }
            if let (FrameDecoder::Bp(bp, _), Some(path)) = (&dec, &opts.dump) {
                bp.messages().dump(BufWriter::new(File::create(path)?))?;
            }
        }
    }
    if let Some(p) = &sent {
        let ok = factory.decode(&mut factory.build()?, &llrs)?.0 == *p;
        writeln!(w, "correct  {ok}")?;
    }
    Ok(())
}

fn list_perms(opts: &Opts, code: &ConcatenatedCode, d: &cabpl::sim::DecoderConfig) -> Result<Vec<FactorGraphPermutation>> {
    let set = match &opts.perm_file {
        Some(p) => PermSet::load(p)?.truncated(d.list_size)?,
        None => cabpl::sim::default_perm_set(code.polar().stages(), d.list_size)?,
    };
    Ok(set.perms().to_vec())
}

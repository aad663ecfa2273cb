//! Browser demo: three operations on top of `cabpl`, each returning JSON.
//!
//! The plain functions are usable (and tested) natively; the `wasm` module
//! only adapts them to `wasm-bindgen`.

use cabpl::bp::{BpConfig, BpDecoder, FactorGraphPermutation, Stopping};
use cabpl::concat::ConcatenatedCode;
use cabpl::crc::{derive_h, reduce_density, spa_decode, BcjrDecoder, CrcPoly, CrcSpec, Trellis};
use cabpl::list::{CrcMode, ListDecoder};
use cabpl::sim::{awgn_bpsk_llrs, default_perm_set, frame_rng, random_bits, DecoderConfig, DecoderFactory};
use serde::Serialize;

type Out = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse_poly(name: &str) -> Result<Option<CrcPoly>, String> {
    match name.trim() {
        "none" | "" => Ok(None),
        "crc2" => Ok(Some(CrcPoly::crc2())),
        "crc6" => Ok(Some(CrcPoly::nr_crc6())),
        other => {
            let exps = other
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| format!("bad polynomial {other:?}: use crc2, crc6, none or exponents like 6,5,0"))?;
            CrcPoly::from_exponents(&exps).map(Some).map_err(err)
        }
    }
}

fn parse_llrs(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect()
}

fn bits(v: &[u8]) -> String {
    v.iter().map(|b| char::from(b'0' + b)).collect()
}

#[derive(Serialize)]
struct CrcReport {
    n: usize,
    r: usize,
    input_passes_crc: bool,
    bcjr: Vec<f64>,
    bcjr_max_log: Vec<f64>,
    spa: Vec<f64>,
    /// hard decisions of input + BCJR extrinsic
    posterior_bits: String,
    h_rows: Vec<String>,
}

/// Extrinsic LLRs of the CRC code (length = number of LLRs) for a received
/// vector, from exact BCJR, max-log BCJR and SPA on the reduced H.
pub fn crc_extrinsic(poly: &str, llrs: &str, spa_iters: usize) -> Out {
    let poly = parse_poly(poly)?.ok_or("a CRC polynomial is required")?;
    let l_in = parse_llrs(llrs)?;
    let spec = CrcSpec::new(poly, l_in.len()).map_err(err)?;
    let trellis = Trellis::build(&spec).map_err(err)?;
    let run = |max_log| {
        let mut out = vec![0.0; l_in.len()];
        BcjrDecoder::new(trellis.clone()).with_max_log(max_log).decode(&l_in, &mut out);
        out
    };
    let bcjr = run(false);
    let h = reduce_density(&derive_h(&spec));
    let hard: Vec<u8> = l_in.iter().map(|&l| u8::from(l < 0.0)).collect();
    let report = CrcReport {
        n: spec.n_crc(),
        r: spec.r(),
        input_passes_crc: spec.check(&hard),
        posterior_bits: bits(&l_in.iter().zip(&bcjr).map(|(a, b)| u8::from(a + b < 0.0)).collect::<Vec<_>>()),
        bcjr_max_log: run(true),
        spa: spa_decode(&l_in, &h, spa_iters.max(1)),
        bcjr,
        h_rows: h.matrix().row_vecs().iter().map(|r| bits(r)).collect(),
    };
    serde_json::to_string(&report).map_err(err)
}

#[derive(Serialize)]
struct Member {
    stage_order: Vec<usize>,
    converged: bool,
    iterations: usize,
    valid: bool,
    metric: f64,
    payload: String,
}

#[derive(Serialize)]
struct FrameReport {
    sent: String,
    decoded: String,
    block_error: bool,
    channel_hard_errors: usize,
    winner: usize,
    winner_valid: bool,
    members: Vec<Member>,
}

fn code_for(len: usize, payload_len: usize, crc: &str) -> Result<ConcatenatedCode, String> {
    ConcatenatedCode::nr(len, payload_len, parse_poly(crc)?).map_err(err)
}

/// Encodes a random payload, sends it over AWGN and decodes it with `decoder`
/// (`bp`, `bpl`, `ca-bpl-bcjr` or `ca-bpl-spa`), reporting every list member.
#[allow(clippy::too_many_arguments)]
pub fn decode_frame(len: usize, payload_len: usize, crc: &str, snr_db: f64, seed: u64, decoder: &str, list_size: usize, iters: usize) -> Out {
    let code = code_for(len, payload_len, crc)?;
    let mut rng = frame_rng(seed, 0, 0);
    let payload = random_bits(code.payload_len(), &mut rng);
    let (_, x) = code.encode(&payload).map_err(err)?;
    let llrs = awgn_bpsk_llrs(&x, snr_db, code.rate(), &mut rng);
    let stages = code.polar().stages();
    let outcome = match decoder {
        "bp" => {
            let stopping = code.crc().map_or(Stopping::GMatrix, |s| Stopping::Crc(s.clone()));
            let res = BpDecoder::new(code.polar(), &FactorGraphPermutation::identity(stages))
                .decode(&llrs, &BpConfig::new(iters, stopping), None);
            let metric = cabpl::list::correlation(&res.reencoded(), &llrs);
            (vec![(FactorGraphPermutation::identity(stages), res.clone(), res.converged, metric)], 0, res.converged)
        }
        "bpl" | "ca-bpl-bcjr" | "ca-bpl-spa" => {
            let set = default_perm_set(stages, list_size).map_err(err)?;
            let mut dec = match decoder {
                "bpl" => ListDecoder::bpl(&code, &set, iters, true),
                "ca-bpl-bcjr" => ListDecoder::ca_bpl(&code, &set, iters, CrcMode::BCJR),
                _ => ListDecoder::ca_bpl(&code, &set, iters, CrcMode::SPA),
            }
            .map_err(err)?;
            let out = dec.decode(&llrs);
            let members = set
                .perms()
                .iter()
                .zip(&out.candidates)
                .zip(out.valid_mask.iter().zip(&out.selection_metric))
                .map(|((p, c), (&v, &m))| (p.clone(), c.clone(), v, m))
                .collect();
            (members, out.winner_index, out.winner_valid)
        }
        other => return Err(format!("unknown decoder {other:?}")),
    };
    let (members, winner, winner_valid) = outcome;
    let decoded = code.payload_of(&members[winner].1.u_hat);
    let report = FrameReport {
        sent: bits(&payload),
        block_error: decoded != payload,
        decoded: bits(&decoded),
        channel_hard_errors: x.iter().zip(&llrs).filter(|(&b, &l)| u8::from(l < 0.0) != b).count(),
        winner,
        winner_valid,
        members: members
            .into_iter()
            .map(|(p, c, valid, metric)| Member {
                stage_order: p.stage_order().to_vec(),
                converged: c.converged,
                iterations: c.iterations_used,
                valid,
                metric,
                payload: bits(&code.payload_of(&c.u_hat)),
            })
            .collect(),
    };
    serde_json::to_string(&report).map_err(err)
}

#[derive(Serialize)]
struct BlerReport {
    decoder: String,
    snr_db: f64,
    frames: u64,
    block_errors: u64,
    bler: f64,
    avg_iters: f64,
}

/// Block error rate of one decoder at one SNR over `frames` frames.
#[allow(clippy::too_many_arguments)]
pub fn bler_point(len: usize, payload_len: usize, crc: &str, snr_db: f64, frames: u64, seed: u64, decoder: &str, list_size: usize, iters: usize) -> Out {
    let code = code_for(len, payload_len, crc)?;
    let cfg = DecoderConfig { list_size, iters, ..DecoderConfig::from_label(decoder).map_err(err)? };
    let factory = DecoderFactory::new(&code, &cfg).map_err(err)?;
    let mut dec = factory.build().map_err(err)?;
    let (mut errors, mut total_iters) = (0u64, 0u64);
    for f in 0..frames {
        let mut rng = frame_rng(seed, 0, f);
        let payload = random_bits(code.payload_len(), &mut rng);
        let (_, x) = code.encode(&payload).map_err(err)?;
        let llrs = awgn_bpsk_llrs(&x, snr_db, code.rate(), &mut rng);
        let (est, it) = factory.decode(&mut dec, &llrs).map_err(err)?;
        errors += u64::from(est != payload);
        total_iters += it as u64;
    }
    let report = BlerReport {
        decoder: cfg.label(),
        snr_db,
        frames,
        block_errors: errors,
        bler: errors as f64 / frames.max(1) as f64,
        avg_iters: total_iters as f64 / frames.max(1) as f64,
    };
    serde_json::to_string(&report).map_err(err)
}

mod wasm {
    use wasm_bindgen::prelude::*;

    fn js(r: super::Out) -> Result<String, JsError> {
        r.map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = crcExtrinsic)]
    pub fn crc_extrinsic(poly: &str, llrs: &str, spa_iters: usize) -> Result<String, JsError> {
        js(super::crc_extrinsic(poly, llrs, spa_iters))
    }

    #[wasm_bindgen(js_name = decodeFrame)]
    #[allow(clippy::too_many_arguments)]
    pub fn decode_frame(len: usize, payload_len: usize, crc: &str, snr_db: f64, seed: u64, decoder: &str, list_size: usize, iters: usize) -> Result<String, JsError> {
        js(super::decode_frame(len, payload_len, crc, snr_db, seed, decoder, list_size, iters))
    }

    #[wasm_bindgen(js_name = blerPoint)]
    #[allow(clippy::too_many_arguments)]
    pub fn bler_point(len: usize, payload_len: usize, crc: &str, snr_db: f64, frames: u64, seed: u64, decoder: &str, list_size: usize, iters: usize) -> Result<String, JsError> {
        js(super::bler_point(len, payload_len, crc, snr_db, frames, seed, decoder, list_size, iters))
    }
}

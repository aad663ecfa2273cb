//! Belief propagation decoding on stage-permuted polar factor graphs.
//!
//! The graph has `n + 1` node columns. Column 0 carries `u`, column `n`
//! carries `x`. Between columns `c` and `c + 1` sit `N/2` processing elements,
//! each joining the two nodes whose indices differ only in bit
//! `stage_order[c]`. Messages `L` flow right to left, `R` left to right.
//!
//! A permuted graph is decoded by relabeling the inputs into the canonical
//! graph, running the canonical kernel and relabeling the outputs back. The
//! kernel can also run directly on the permuted layout, which the tests use
//! to check that the two agree.

mod permutation;

pub use permutation::{permute_bits, Direction, FactorGraphPermutation};

use std::io::{self, Write};

use crate::crc::{BcjrDecoder, CrcSpec, SpaDecoder};
use crate::llr::{hard, saturate, CheckRule, LLR_MAX};
use crate::polar::{polar_transform_in_place, PolarCode};

/// Early termination rule evaluated after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Stopping {
    /// Run all iterations.
    None,
    /// Stop when `x_hat == u_hat * G_N`.
    GMatrix,
    /// Stop when the G-matrix condition holds and the information bits pass the CRC.
    Crc(CrcSpec),
}

/// Soft-in/soft-out component attached to the information-bit edge of the
/// graph. Receives `L_{0,A}` (payload order) and writes its extrinsic output,
/// which overwrites `R_{0,A}`.
pub trait SisoHook {
    fn update(&mut self, l_in: &[f64], l_out: &mut [f64]);
}

impl SisoHook for BcjrDecoder {
    fn update(&mut self, l_in: &[f64], l_out: &mut [f64]) {
        self.decode(l_in, l_out)
    }
}

impl SisoHook for SpaDecoder {
    fn update(&mut self, l_in: &[f64], l_out: &mut [f64]) {
        self.decode(l_in, l_out)
    }
}

impl<T: SisoHook + ?Sized> SisoHook for &mut T {
    fn update(&mut self, l_in: &[f64], l_out: &mut [f64]) {
        (**self).update(l_in, l_out)
    }
}

/// Outcome of one BP decoding run, in the caller's labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Hard decisions on the left edge; frozen positions are zero.
    pub u_hat: Vec<u8>,
    /// Hard decisions on the right edge.
    pub x_hat: Vec<u8>,
    pub converged: bool,
    pub iterations_used: usize,
    /// Total LLRs of the information positions, ascending order.
    pub left_llrs: Vec<f64>,
    /// Total LLRs on the right edge.
    pub right_llrs: Vec<f64>,
}

impl DecodeResult {
    /// `u_hat * G_N`, the codeword implied by the left decisions.
    pub fn reencoded(&self) -> Vec<u8> {
        let mut x = self.u_hat.clone();
        polar_transform_in_place(&mut x);
        x
    }
}

/// BP decoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BpConfig {
    pub max_iters: usize,
    pub stopping: Stopping,
    pub rule: CheckRule,
}

impl BpConfig {
    pub fn new(max_iters: usize, stopping: Stopping) -> Self {
        BpConfig {
            max_iters,
            stopping,
            rule: CheckRule::Exact,
        }
    }
}

/// Left-to-right and right-to-left message arrays, `(n + 1) x N` each,
/// row `c` holding graph column `c`.
#[derive(Debug, Clone)]
pub struct MessageMemory {
    len: usize,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
}

impl MessageMemory {
    fn new(stages: usize) -> Self {
        let len = 1 << stages;
        MessageMemory {
            len,
            l: vec![0.0; (stages + 1) * len],
            r: vec![0.0; (stages + 1) * len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn columns(&self) -> usize {
        self.l.len() / self.len
    }

    pub fn l_col(&self, c: usize) -> &[f64] {
        &self.l[c * self.len..(c + 1) * self.len]
    }

    pub fn r_col(&self, c: usize) -> &[f64] {
        &self.r[c * self.len..(c + 1) * self.len]
    }

    /// Tab-separated dump: one line per graph column for `L`, then for `R`.
    pub fn dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (name, data) in [("L", &self.l), ("R", &self.r)] {
            for c in 0..self.columns() {
                let row: Vec<String> = data[c * self.len..(c + 1) * self.len]
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect();
                writeln!(w, "{name}{c}\t{}", row.join("\t"))?;
            }
        }
        Ok(())
    }
}

/// Reusable BP kernel for one graph layout and frozen pattern.
#[derive(Debug, Clone)]
pub struct BpKernel {
    stages: usize,
    /// bit dimension per column
    dims: Vec<usize>,
    frozen: Vec<bool>,
    /// information positions in payload order
    info: Vec<usize>,
    mem: MessageMemory,
    u_hat: Vec<u8>,
    x_hat: Vec<u8>,
    scratch_in: Vec<f64>,
    scratch_out: Vec<f64>,
}

/// Hard decisions and stopping state after one iteration.
struct Snapshot {
    converged: bool,
    iterations_used: usize,
}

impl BpKernel {
    /// Kernel with column dimensions `dims`, frozen mask and information
    /// positions (in payload order), all in the kernel's own labeling.
    pub fn new(dims: Vec<usize>, frozen: Vec<bool>, info: Vec<usize>) -> Self {
        let stages = dims.len();
        let len = 1 << stages;
        assert_eq!(frozen.len(), len);
        BpKernel {
            stages,
            dims,
            frozen,
            scratch_in: vec![0.0; info.len()],
            scratch_out: vec![0.0; info.len()],
            info,
            mem: MessageMemory::new(stages),
            u_hat: vec![0; len],
            x_hat: vec![0; len],
        }
    }

    /// Canonical kernel for `code` viewed through `perm`.
    pub fn canonical(code: &PolarCode, perm: &FactorGraphPermutation) -> Self {
        let table = perm.index_table();
        let mut frozen = vec![true; code.len()];
        for &i in code.info_set() {
            frozen[table[i]] = false;
        }
        let info = code.info_set().iter().map(|&i| table[i]).collect();
        Self::new((0..code.stages()).collect(), frozen, info)
    }

    /// Kernel laid out as the permuted graph itself, in the code's labeling.
    pub fn permuted_layout(code: &PolarCode, perm: &FactorGraphPermutation) -> Self {
        Self::new(
            perm.stage_order().to_vec(),
            code.frozen_mask().to_vec(),
            code.info_set().to_vec(),
        )
    }

    pub fn messages(&self) -> &MessageMemory {
        &self.mem
    }

    fn len(&self) -> usize {
        self.mem.len
    }

    fn reset(&mut self, channel: &[f64]) {
        let len = self.len();
        let n = self.stages;
        self.mem.l.fill(0.0);
        self.mem.r.fill(0.0);
        for (dst, &ch) in self.mem.l[n * len..].iter_mut().zip(channel) {
            *dst = saturate(ch);
        }
        for (dst, &f) in self.mem.r[..len].iter_mut().zip(&self.frozen) {
            *dst = if f { LLR_MAX } else { 0.0 };
        }
    }

    fn right_to_left(&mut self, rule: CheckRule) {
        let len = self.len();
        let MessageMemory { l, r, .. } = &mut self.mem;
        for c in (0..self.stages).rev() {
            let span = 1 << self.dims[c];
            let (l_here, l_next) = l[c * len..(c + 2) * len].split_at_mut(len);
            let r_here = &r[c * len..(c + 1) * len];
            for i in (0..len).filter(|i| i & span == 0) {
                let j = i | span;
                let a = l_next[i];
                let b = l_next[j];
                l_here[i] = saturate(rule.combine(a, b + r_here[j]));
                l_here[j] = saturate(rule.combine(r_here[i], a) + b);
            }
        }
    }

    fn left_to_right(&mut self, rule: CheckRule) {
        let len = self.len();
        let MessageMemory { l, r, .. } = &mut self.mem;
        for c in 0..self.stages {
            let span = 1 << self.dims[c];
            let (r_here, r_next) = r[c * len..(c + 2) * len].split_at_mut(len);
            let l_next = &l[(c + 1) * len..(c + 2) * len];
            for i in (0..len).filter(|i| i & span == 0) {
                let j = i | span;
                let a = r_here[i];
                let b = r_here[j];
                r_next[i] = saturate(rule.combine(a, b + l_next[j]));
                r_next[j] = saturate(rule.combine(a, l_next[i]) + b);
            }
        }
    }

    fn decide(&mut self) {
        let len = self.len();
        let n = self.stages;
        for i in 0..len {
            self.u_hat[i] = if self.frozen[i] {
                0
            } else {
                hard(self.mem.l[i] + self.mem.r[i])
            };
            self.x_hat[i] = hard(self.mem.l[n * len + i] + self.mem.r[n * len + i]);
        }
    }

    fn gmatrix_holds(&self) -> bool {
        // encoding is invariant under the kernel's relabeling, so the plain
        // transform applies to any column layout
        let mut v = self.u_hat.clone();
        polar_transform_in_place(&mut v);
        v == self.x_hat
    }

    fn crc_holds(&self, spec: &CrcSpec) -> bool {
        let bits: Vec<u8> = self.info.iter().map(|&i| self.u_hat[i]).collect();
        spec.check(&bits)
    }

    fn stop_now(&self, stopping: &Stopping) -> bool {
        match stopping {
            Stopping::None => false,
            Stopping::GMatrix => self.gmatrix_holds(),
            Stopping::Crc(spec) => self.gmatrix_holds() && self.crc_holds(spec),
        }
    }

    fn apply_hook(&mut self, hook: &mut dyn SisoHook) {
        let len = self.len();
        for (t, &pos) in self.info.iter().enumerate() {
            self.scratch_in[t] = self.mem.l[pos];
        }
        hook.update(&self.scratch_in, &mut self.scratch_out);
        for (t, &pos) in self.info.iter().enumerate() {
            self.mem.r[pos] = saturate(self.scratch_out[t]);
        }
        debug_assert!(self.mem.r[..len].iter().all(|v| v.abs() <= LLR_MAX));
    }

    fn iterate(
        &mut self,
        channel: &[f64],
        cfg: &BpConfig,
        mut hook: Option<&mut dyn SisoHook>,
    ) -> Snapshot {
        assert!(cfg.max_iters >= 1, "at least one iteration");
        assert_eq!(channel.len(), self.len(), "channel length must equal N");
        self.reset(channel);
        for it in 1..=cfg.max_iters {
            self.right_to_left(cfg.rule);
            if let Some(h) = hook.as_deref_mut() {
                self.apply_hook(h);
            }
            self.left_to_right(cfg.rule);
            self.decide();
            if self.stop_now(&cfg.stopping) {
                return Snapshot {
                    converged: true,
                    iterations_used: it,
                };
            }
        }
        Snapshot {
            converged: false,
            iterations_used: cfg.max_iters,
        }
    }

    /// Decodes in the kernel's own labeling.
    pub fn decode(
        &mut self,
        channel: &[f64],
        cfg: &BpConfig,
        hook: Option<&mut dyn SisoHook>,
    ) -> DecodeResult {
        let snap = self.iterate(channel, cfg, hook);
        let len = self.len();
        let n = self.stages;
        let mut info_sorted = self.info.clone();
        info_sorted.sort_unstable();
        DecodeResult {
            u_hat: self.u_hat.clone(),
            x_hat: self.x_hat.clone(),
            converged: snap.converged,
            iterations_used: snap.iterations_used,
            left_llrs: info_sorted
                .iter()
                .map(|&i| self.mem.l[i] + self.mem.r[i])
                .collect(),
            right_llrs: (0..len)
                .map(|i| self.mem.l[n * len + i] + self.mem.r[n * len + i])
                .collect(),
        }
    }
}

/// A BP decoder for one code and one graph permutation, realized by
/// relabeling into the canonical graph. Buffers are reused across frames.
#[derive(Debug, Clone)]
pub struct BpDecoder {
    perm: FactorGraphPermutation,
    table: Vec<usize>,
    info_set: Vec<usize>,
    kernel: BpKernel,
    channel: Vec<f64>,
}

impl BpDecoder {
    pub fn new(code: &PolarCode, perm: &FactorGraphPermutation) -> Self {
        assert_eq!(perm.stages(), code.stages(), "permutation must have n stages");
        BpDecoder {
            perm: perm.clone(),
            table: perm.index_table(),
            info_set: code.info_set().to_vec(),
            kernel: BpKernel::canonical(code, perm),
            channel: vec![0.0; code.len()],
        }
    }

    pub fn permutation(&self) -> &FactorGraphPermutation {
        &self.perm
    }

    /// Message memory of the last run, in canonical labeling.
    pub fn messages(&self) -> &MessageMemory {
        self.kernel.messages()
    }

    pub fn decode(
        &mut self,
        channel_llrs: &[f64],
        cfg: &BpConfig,
        hook: Option<&mut dyn SisoHook>,
    ) -> DecodeResult {
        for (i, &v) in channel_llrs.iter().enumerate() {
            self.channel[self.table[i]] = v;
        }
        let channel = std::mem::take(&mut self.channel);
        let snap = self.kernel.iterate(&channel, cfg, hook);
        self.channel = channel;

        let k = &self.kernel;
        let len = k.len();
        let n = k.stages;
        let from = |i: usize| self.table[i];
        DecodeResult {
            u_hat: (0..len).map(|i| k.u_hat[from(i)]).collect(),
            x_hat: (0..len).map(|i| k.x_hat[from(i)]).collect(),
            converged: snap.converged,
            iterations_used: snap.iterations_used,
            left_llrs: self
                .info_set
                .iter()
                .map(|&i| k.mem.l[from(i)] + k.mem.r[from(i)])
                .collect(),
            right_llrs: (0..len)
                .map(|i| k.mem.l[n * len + from(i)] + k.mem.r[n * len + from(i)])
                .collect(),
        }
    }
}

/// Single-shot BP decoding of `code` on the graph permuted by `perm`.
pub fn bp_decode(
    channel_llrs: &[f64],
    code: &PolarCode,
    perm: &FactorGraphPermutation,
    cfg: &BpConfig,
    hook: Option<&mut dyn SisoHook>,
) -> DecodeResult {
    BpDecoder::new(code, perm).decode(channel_llrs, cfg, hook)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crc::{derive_h, reduce_density, CrcPoly, Trellis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy_frame(code: &PolarCode, sigma: f64, rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<f64>) {
        let bits: Vec<u8> = (0..code.k_outer()).map(|_| rng.random_range(0..2)).collect();
        let x = code.encode(&code.embed(&bits).unwrap()).unwrap();
        let llrs = x
            .iter()
            .map(|&b| {
                let n: f64 = StandardNormal.sample(rng);
                let y = 1.0 - 2.0 * f64::from(b) + sigma * n;
                2.0 * y / (sigma * sigma)
            })
            .collect();
        (x, llrs)
    }

    #[test]
    fn noiseless_converges_first_iteration() {
        let code = PolarCode::nr(32, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for perm in FactorGraphPermutation::all(5).iter().step_by(7) {
            let bits: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
            let u = code.embed(&bits).unwrap();
            let x = code.encode(&u).unwrap();
            let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { LLR_MAX } else { -LLR_MAX }).collect();
            let res = bp_decode(&llrs, &code, perm, &BpConfig::new(10, Stopping::GMatrix), None);
            assert!(res.converged);
            assert_eq!(res.iterations_used, 1);
            assert_eq!(res.x_hat, x);
            assert_eq!(res.u_hat, u);
            assert!(code.gmatrix_check(&res.u_hat, &res.x_hat));
        }
    }

    #[test]
    fn stopping_none_runs_all_iterations() {
        let code = PolarCode::nr(16, 8).unwrap();
        let llrs = vec![3.0; 16];
        let res = bp_decode(
            &llrs,
            &code,
            &FactorGraphPermutation::identity(4),
            &BpConfig::new(7, Stopping::None),
            None,
        );
        assert!(!res.converged);
        assert_eq!(res.iterations_used, 7);
        assert!(res.u_hat.iter().enumerate().all(|(i, &b)| !code.is_frozen(i) || b == 0));
    }

    #[test]
    fn permuted_layout_matches_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for len in [8usize, 16, 32] {
            let code = PolarCode::nr(len, len / 2).unwrap();
            let perms = FactorGraphPermutation::all(code.stages());
            for trial in 0..40 {
                let perm = &perms[trial % perms.len()];
                let (_, llrs) = noisy_frame(&code, 0.9, &mut rng);
                let cfg = BpConfig::new(15, Stopping::GMatrix);
                let direct = BpKernel::permuted_layout(&code, perm).decode(&llrs, &cfg, None);
                let mapped = bp_decode(&llrs, &code, perm, &cfg, None);
                assert_eq!(direct.u_hat, mapped.u_hat);
                assert_eq!(direct.x_hat, mapped.x_hat);
                assert_eq!(direct.iterations_used, mapped.iterations_used);
                for (a, b) in direct.right_llrs.iter().zip(&mapped.right_llrs) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn messages_stay_bounded_under_stress() {
        let code = PolarCode::nr(64, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = CrcSpec::new(CrcPoly::nr_crc6(), 32).unwrap();
        let mut bcjr = BcjrDecoder::new(Trellis::build(&spec).unwrap());
        for trial in 0..30 {
            let llrs: Vec<f64> = (0..64).map(|_| rng.random_range(-1e6..1e6)).collect();
            let mut dec = BpDecoder::new(&code, &FactorGraphPermutation::identity(6));
            let hook: Option<&mut dyn SisoHook> = if trial % 2 == 0 { Some(&mut bcjr) } else { None };
            dec.decode(&llrs, &BpConfig::new(20, Stopping::None), hook);
            let m = dec.messages();
            assert!(m.l.iter().chain(&m.r).all(|v| v.is_finite() && v.abs() <= LLR_MAX));
        }
    }

    #[test]
    fn hook_sees_information_positions_only() {
        struct Probe {
            calls: usize,
            width: usize,
        }
        impl SisoHook for Probe {
            fn update(&mut self, l_in: &[f64], l_out: &mut [f64]) {
                self.calls += 1;
                self.width = l_in.len();
                l_out.fill(0.0);
            }
        }
        let code = PolarCode::nr(8, 5).unwrap();
        let mut probe = Probe { calls: 0, width: 0 };
        let res = bp_decode(
            &[1.0; 8],
            &code,
            &FactorGraphPermutation::identity(3),
            &BpConfig::new(4, Stopping::None),
            Some(&mut probe),
        );
        assert_eq!(probe.calls, 4);
        assert_eq!(probe.width, 5);
        assert_eq!(res.left_llrs.len(), 5);
    }

    #[test]
    fn crc_stopping_requires_crc() {
        let code = PolarCode::nr(16, 8).unwrap();
        let spec = CrcSpec::new(CrcPoly::crc2(), 8).unwrap();
        let payload = [1, 0, 1, 1, 0, 1];
        let cw = spec.encode(&payload).unwrap();
        let x = code.encode(&code.embed(&cw).unwrap()).unwrap();
        let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { 9.0 } else { -9.0 }).collect();
        let res = bp_decode(
            &llrs,
            &code,
            &FactorGraphPermutation::identity(4),
            &BpConfig::new(5, Stopping::Crc(spec.clone())),
            None,
        );
        assert!(res.converged);
        assert_eq!(code.extract(&res.u_hat), cw);

        // a valid polar codeword whose information bits fail the CRC never stops
        let mut bad = cw.clone();
        bad[0] ^= 1;
        let x = code.encode(&code.embed(&bad).unwrap()).unwrap();
        let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { 9.0 } else { -9.0 }).collect();
        let res = bp_decode(
            &llrs,
            &code,
            &FactorGraphPermutation::identity(4),
            &BpConfig::new(5, Stopping::Crc(spec)),
            None,
        );
        assert!(!res.converged);
    }

    #[test]
    fn spa_hook_runs() {
        let code = PolarCode::nr(32, 16).unwrap();
        let spec = CrcSpec::new(CrcPoly::nr_crc6(), 16).unwrap();
        let mut spa = SpaDecoder::new(&reduce_density(&derive_h(&spec)), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let payload: Vec<u8> = (0..10).map(|_| rng.random_range(0..2)).collect();
        let cw = spec.encode(&payload).unwrap();
        let x = code.encode(&code.embed(&cw).unwrap()).unwrap();
        let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { 6.0 } else { -6.0 }).collect();
        let res = bp_decode(
            &llrs,
            &code,
            &FactorGraphPermutation::identity(5),
            &BpConfig::new(10, Stopping::Crc(spec)),
            Some(&mut spa),
        );
        assert!(res.converged);
        assert_eq!(res.x_hat, x);
    }

    #[test]
    fn dump_format() {
        let code = PolarCode::nr(4, 2).unwrap();
        let mut dec = BpDecoder::new(&code, &FactorGraphPermutation::identity(2));
        dec.decode(&[1.0, -1.0, 2.0, 0.5], &BpConfig::new(1, Stopping::None), None);
        let mut out = Vec::new();
        dec.messages().dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("L0\t"));
        assert!(lines[3].starts_with("R0\t"));
        assert_eq!(lines[2].split('\t').count(), 5);
    }
}

use crate::crc::CrcSpec;
use crate::error::{Error, Result};
use crate::llr::{maxlog2, maxstar2, saturate};

/// Largest CRC degree for which a trellis (2^r states) is built.
pub const MAX_TRELLIS_DEGREE: usize = 16;

/// Time-invariant trellis of a CRC code. State `s` is the LFSR register
/// contents; every state has one outgoing edge per bit value.
#[derive(Debug, Clone)]
pub struct Trellis {
    n_crc: usize,
    /// `next[s][b]`: state reached from `s` on input bit `b`.
    next: Vec<[u32; 2]>,
}

impl Trellis {
    pub fn build(spec: &CrcSpec) -> Result<Self> {
        let r = spec.r();
        if r > MAX_TRELLIS_DEGREE {
            return Err(Error::Capability(format!(
                "trellis decoding needs 2^{r} states; degree above {MAX_TRELLIS_DEGREE} \
                 is only supported by the sum-product decoder"
            )));
        }
        let next = (0..1u64 << r)
            .map(|s| [spec.step(s, 0) as u32, spec.step(s, 1) as u32])
            .collect();
        Ok(Trellis {
            n_crc: spec.n_crc(),
            next,
        })
    }

    pub fn num_states(&self) -> usize {
        self.next.len()
    }

    pub fn n_crc(&self) -> usize {
        self.n_crc
    }

    #[inline]
    pub fn next_state(&self, state: usize, bit: u8) -> usize {
        self.next[state][bit as usize] as usize
    }

    /// Edges `(s', s)` labelled with `bit` (the sets `U0` / `U1`); identical at
    /// every time index.
    pub fn edges(&self, bit: u8) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.next
            .iter()
            .enumerate()
            .map(move |(s, n)| (s, n[bit as usize] as usize))
    }

    /// Number of paths from state 0 back to state 0 over `n_crc` steps.
    pub fn count_terminated_paths(&self) -> u128 {
        let mut counts = vec![0u128; self.num_states()];
        counts[0] = 1;
        for _ in 0..self.n_crc {
            let mut nxt = vec![0u128; self.num_states()];
            for (s, &c) in counts.iter().enumerate() {
                if c > 0 {
                    nxt[self.next[s][0] as usize] += c;
                    nxt[self.next[s][1] as usize] += c;
                }
            }
            counts = nxt;
        }
        counts[0]
    }
}

/// BCJR decoder with reusable forward/backward buffers.
#[derive(Debug, Clone)]
pub struct BcjrDecoder {
    trellis: Trellis,
    max_log: bool,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BcjrDecoder {
    pub fn new(trellis: Trellis) -> Self {
        let size = (trellis.n_crc + 1) * trellis.num_states();
        BcjrDecoder {
            trellis,
            max_log: false,
            alpha: vec![f64::NEG_INFINITY; size],
            beta: vec![f64::NEG_INFINITY; size],
        }
    }

    /// Replace the Jacobian logarithm by `max` (max-log-MAP).
    pub fn with_max_log(mut self, max_log: bool) -> Self {
        self.max_log = max_log;
        self
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }

    /// Extrinsic LLRs for each of the `n_crc` code bits given channel-side
    /// LLRs `l_in`. Output is saturated at `±LLR_MAX`.
    pub fn decode(&mut self, l_in: &[f64], l_out: &mut [f64]) {
        if self.max_log {
            self.run(l_in, l_out, maxlog2)
        } else if !self.run_scaled(l_in, l_out) {
            self.run(l_in, l_out, maxstar2)
        }
    }

    /// Exact MAP in the probability domain with per-step normalisation, which
    /// replaces every Jacobian logarithm by an addition. Returns false (and
    /// leaves `l_out` unspecified) when a posterior sum approaches underflow;
    /// the caller then repeats the work in the log domain.
    fn run_scaled(&mut self, l_in: &[f64], l_out: &mut [f64]) -> bool {
        /// posterior sums below this lose precision in subnormal range
        const FLOOR: f64 = 1e-200;
        let t = &self.trellis;
        let ns = t.num_states();
        let n = t.n_crc;
        assert_eq!(l_in.len(), n, "input length must equal n_crc");
        assert_eq!(l_out.len(), n, "output length must equal n_crc");
        // branch weights (bit 0, bit 1) scaled so the larger is one
        let gamma = |l: f64| if l >= 0.0 { (1.0, (-l).exp()) } else { (l.exp(), 1.0) };
        let alpha = &mut self.alpha;
        let beta = &mut self.beta;
        alpha.fill(0.0);
        beta.fill(0.0);

        alpha[0] = 1.0;
        for i in 0..n {
            let (cur, nxt) = alpha[i * ns..(i + 2) * ns].split_at_mut(ns);
            let nxt = &mut nxt[..ns];
            let (g0, g1) = gamma(l_in[i]);
            for (s, &a) in cur.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let [s0, s1] = t.next[s];
                nxt[s0 as usize] += a * g0;
                nxt[s1 as usize] += a * g1;
            }
            let m = nxt.iter().copied().fold(0.0, f64::max);
            nxt.iter_mut().for_each(|v| *v /= m);
        }

        beta[n * ns] = 1.0;
        for i in (0..n).rev() {
            let (cur, nxt) = beta[i * ns..(i + 2) * ns].split_at_mut(ns);
            let (g0, g1) = gamma(l_in[i]);
            let mut m = 0.0f64;
            for (s, b) in cur.iter_mut().enumerate() {
                let [s0, s1] = t.next[s];
                *b = g0 * nxt[s0 as usize] + g1 * nxt[s1 as usize];
                m = m.max(*b);
            }
            cur.iter_mut().for_each(|v| *v /= m);
        }

        for i in 0..n {
            let a = &alpha[i * ns..(i + 1) * ns];
            let b = &beta[(i + 1) * ns..(i + 2) * ns];
            let (mut zero, mut one) = (0.0, 0.0);
            for (s, &av) in a.iter().enumerate() {
                let [s0, s1] = t.next[s];
                zero += av * b[s0 as usize];
                one += av * b[s1 as usize];
            }
            if zero.max(one) < FLOOR {
                return false;
            }
            l_out[i] = saturate(zero.ln() - one.ln());
        }
        true
    }

    fn run(&mut self, l_in: &[f64], l_out: &mut [f64], op: impl Fn(f64, f64) -> f64) {
        let t = &self.trellis;
        let ns = t.num_states();
        let n = t.n_crc;
        assert_eq!(l_in.len(), n, "input length must equal n_crc");
        assert_eq!(l_out.len(), n, "output length must equal n_crc");
        let alpha = &mut self.alpha;
        let beta = &mut self.beta;
        alpha.fill(f64::NEG_INFINITY);
        beta.fill(f64::NEG_INFINITY);

        // forward: a_{i+1}(s) = max*_{s'} (a_i(s') - L_i * bit(s', s))
        alpha[0] = 0.0;
        for i in 0..n {
            let (cur, nxt) = alpha[i * ns..(i + 2) * ns].split_at_mut(ns);
            let li = l_in[i];
            for (s, &a) in cur.iter().enumerate() {
                if a == f64::NEG_INFINITY {
                    continue;
                }
                let [s0, s1] = t.next[s];
                nxt[s0 as usize] = op(nxt[s0 as usize], a);
                nxt[s1 as usize] = op(nxt[s1 as usize], a - li);
            }
        }

        // backward: b_i(s') = max*_s (b_{i+1}(s) - L_i * bit(s', s))
        beta[n * ns] = 0.0;
        for i in (0..n).rev() {
            let (cur, nxt) = beta[i * ns..(i + 2) * ns].split_at_mut(ns);
            let li = l_in[i];
            for (s, b) in cur.iter_mut().enumerate() {
                let [s0, s1] = t.next[s];
                *b = op(nxt[s0 as usize], nxt[s1 as usize] - li);
            }
        }

        // extrinsic: max*_{U0}(a_i(s') + b_{i+1}(s)) - max*_{U1}(...)
        for i in 0..n {
            let a = &alpha[i * ns..(i + 1) * ns];
            let b = &beta[(i + 1) * ns..(i + 2) * ns];
            let mut zero = f64::NEG_INFINITY;
            let mut one = f64::NEG_INFINITY;
            for (s, &av) in a.iter().enumerate() {
                if av == f64::NEG_INFINITY {
                    continue;
                }
                let [s0, s1] = t.next[s];
                zero = op(zero, av + b[s0 as usize]);
                one = op(one, av + b[s1 as usize]);
            }
            l_out[i] = match (zero == f64::NEG_INFINITY, one == f64::NEG_INFINITY) {
                (true, true) => 0.0,
                _ => saturate(zero - one),
            };
        }
    }
}

/// One-shot BCJR decoding; see [`BcjrDecoder::decode`].
pub fn bcjr_decode(l_in: &[f64], trellis: &Trellis) -> Vec<f64> {
    let mut dec = BcjrDecoder::new(trellis.clone());
    let mut out = vec![0.0; l_in.len()];
    dec.decode(l_in, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crc::CrcPoly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn codewords(spec: &CrcSpec) -> Vec<Vec<u8>> {
        let k = spec.payload_len();
        (0..1u32 << k)
            .map(|w| {
                let payload: Vec<u8> = (0..k).map(|j| ((w >> j) & 1) as u8).collect();
                spec.encode(&payload).unwrap()
            })
            .collect()
    }

    fn log_sum_exp(xs: &[f64]) -> f64 {
        let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    /// Exhaustive-codeword extrinsic MAP.
    fn map_oracle(spec: &CrcSpec, l_in: &[f64]) -> Vec<f64> {
        let words = codewords(spec);
        (0..spec.n_crc())
            .map(|i| {
                let mut sums = [Vec::new(), Vec::new()];
                for c in &words {
                    let metric: f64 = (0..c.len())
                        .filter(|&j| j != i)
                        .map(|j| -l_in[j] * f64::from(c[j]))
                        .sum();
                    sums[c[i] as usize].push(metric);
                }
                log_sum_exp(&sums[0]) - log_sum_exp(&sums[1])
            })
            .collect()
    }

    /// Enumerate all input words, keep those whose trellis path ends in state 0.
    fn trellis_paths(t: &Trellis) -> Vec<Vec<u8>> {
        let n = t.n_crc();
        (0..1u32 << n)
            .filter_map(|w| {
                let bits: Vec<u8> = (0..n).map(|j| ((w >> (n - 1 - j)) & 1) as u8).collect();
                let end = bits.iter().fold(0, |s, &b| t.next_state(s, b));
                (end == 0).then_some(bits)
            })
            .collect()
    }

    #[test]
    fn crc2_trellis_structure() {
        let spec = CrcSpec::new(CrcPoly::crc2(), 5).unwrap();
        let t = Trellis::build(&spec).unwrap();
        assert_eq!(t.num_states(), 4);
        assert_eq!(t.next_state(0, 0), 0);
        // shifting a 1 into the empty register
        assert_eq!(t.next_state(0, 1), 1);
        // register 10 overflows on the next shift and is reduced by g
        assert_eq!(t.next_state(2, 0), 0b100 ^ 0b111);
        for bit in 0..2 {
            let mut targets: Vec<usize> = t.edges(bit).map(|(_, s)| s).collect();
            targets.sort_unstable();
            assert_eq!(targets, vec![0, 1, 2, 3], "each bit label is a bijection");
        }
        assert_eq!(t.edges(0).count() + t.edges(1).count(), 2 * t.num_states());
    }

    #[test]
    fn path_set_equals_codeword_set() {
        for (poly, lens) in [
            (CrcPoly::crc2(), 3..=12),
            (CrcPoly::nr_crc6(), 7..=12),
            ("3,1,0".parse().unwrap(), 4..=12),
        ] {
            for n in lens {
                let spec = CrcSpec::new(poly.clone(), n).unwrap();
                let t = Trellis::build(&spec).unwrap();
                let mut paths = trellis_paths(&t);
                let mut words = codewords(&spec);
                paths.sort();
                words.sort();
                assert_eq!(paths, words, "{poly} n={n}");
                assert_eq!(t.count_terminated_paths(), 1u128 << spec.payload_len());
            }
        }
    }

    #[test]
    fn capability_limit() {
        let spec = CrcSpec::new("24,23,6,5,1,0".parse().unwrap(), 40).unwrap();
        assert!(matches!(Trellis::build(&spec), Err(Error::Capability(_))));
    }

    #[test]
    fn strong_codeword_signs() {
        let spec = CrcSpec::new(CrcPoly::nr_crc6(), 20).unwrap();
        let t = Trellis::build(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let payload: Vec<u8> = (0..14).map(|_| rng.random_range(0..2)).collect();
        let cw = spec.encode(&payload).unwrap();
        let l_in: Vec<f64> = cw.iter().map(|&b| if b == 0 { 100.0 } else { -100.0 }).collect();
        let out = bcjr_decode(&l_in, &t);
        for (o, &b) in out.iter().zip(&cw) {
            assert_eq!(u8::from(*o < 0.0), b);
        }
    }

    #[test]
    fn matches_map_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (poly, n) in [(CrcPoly::crc2(), 5), (CrcPoly::crc2(), 9), (CrcPoly::nr_crc6(), 11)] {
            let spec = CrcSpec::new(poly, n).unwrap();
            let t = Trellis::build(&spec).unwrap();
            let zero = bcjr_decode(&vec![0.0; n], &t);
            for (a, b) in zero.iter().zip(map_oracle(&spec, &vec![0.0; n])) {
                assert!((a - b).abs() < 1e-9);
            }
            for _ in 0..100 {
                let l_in: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
                let got = bcjr_decode(&l_in, &t);
                for (a, b) in got.iter().zip(map_oracle(&spec, &l_in)) {
                    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn scaled_recursion_agrees_with_log_domain() {
        let spec = CrcSpec::new(CrcPoly::nr_crc6(), 70).unwrap();
        let mut dec = BcjrDecoder::new(Trellis::build(&spec).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let (mut scaled, mut log) = (vec![0.0; 70], vec![0.0; 70]);
        for trial in 0..400 {
            // the second half uses saturated inputs that contradict the CRC
            let l_in: Vec<f64> = (0..70)
                .map(|_| match trial < 200 {
                    true => rng.random_range(-6.0..6.0),
                    false => if rng.random_bool(0.5) { 40.0 } else { -40.0 },
                })
                .collect();
            dec.run(&l_in, &mut log, maxstar2);
            assert!(dec.run_scaled(&l_in, &mut scaled));
            for (a, b) in scaled.iter().zip(&log) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn falls_back_to_log_domain_near_underflow() {
        let spec = CrcSpec::new(CrcPoly::nr_crc6(), 70).unwrap();
        let mut dec = BcjrDecoder::new(Trellis::build(&spec).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l_in: Vec<f64> = (0..70).map(|_| if rng.random_bool(0.5) { 700.0 } else { -700.0 }).collect();
        let mut out = vec![0.0; 70];
        assert!(!dec.run_scaled(&l_in, &mut out));
        let mut log = vec![0.0; 70];
        dec.run(&l_in, &mut log, maxstar2);
        dec.decode(&l_in, &mut out);
        assert_eq!(out, log);
    }

    #[test]
    fn max_log_is_close_at_high_snr() {
        let spec = CrcSpec::new(CrcPoly::crc2(), 6).unwrap();
        let t = Trellis::build(&spec).unwrap();
        let l_in = [9.0, -8.0, 7.5, 10.0, -9.5, 8.0];
        let exact = bcjr_decode(&l_in, &t);
        let mut approx = vec![0.0; 6];
        BcjrDecoder::new(t).with_max_log(true).decode(&l_in, &mut approx);
        for (a, b) in exact.iter().zip(&approx) {
            assert_eq!(a.signum(), b.signum());
            assert!((a - b).abs() < 1.0);
        }
    }
}

use crate::bp::DecodeResult;
use crate::crc::CrcSpec;
use crate::llr::{boxplus, softplus_neg};
use crate::polar::PolarCode;

/// Decoding state of one list path. Level `d` holds a node of size `N >> d`.
#[derive(Debug, Clone)]
struct Path {
    alpha: Vec<Vec<f64>>,
    /// partial sums returned by the most recently finished node per level
    ret: Vec<Vec<u8>>,
    /// left-child partial sums kept while the right child is decoded
    left: Vec<Vec<u8>>,
    u: Vec<u8>,
    metric: f64,
}

impl Path {
    fn root(channel: &[f64], stages: usize) -> Self {
        let len = channel.len();
        let mut alpha: Vec<Vec<f64>> = (0..=stages).map(|d| vec![0.0; len >> d]).collect();
        alpha[0].copy_from_slice(channel);
        Path {
            alpha,
            ret: (0..=stages).map(|d| vec![0; len >> d]).collect(),
            left: (0..=stages).map(|d| vec![0; (len >> d) / 2]).collect(),
            u: vec![0; len],
            metric: 0.0,
        }
    }
}

struct Scl<'a> {
    code: &'a PolarCode,
    list_size: usize,
    stages: usize,
    paths: Vec<Path>,
}

impl Scl<'_> {
    fn node(&mut self, depth: usize, first: usize) {
        if depth == self.stages {
            self.leaf(first);
            return;
        }
        let half = (self.code.len() >> depth) / 2;
        for p in &mut self.paths {
            let (parent, child) = p.alpha.split_at_mut(depth + 1);
            let (a, b) = parent[depth].split_at(half);
            for ((c, &x), &y) in child[0].iter_mut().zip(a).zip(b) {
                *c = boxplus(x, y);
            }
        }
        self.node(depth + 1, first);
        for p in &mut self.paths {
            let finished = std::mem::take(&mut p.ret[depth + 1]);
            p.left[depth].copy_from_slice(&finished);
            p.ret[depth + 1] = finished;
            let (parent, child) = p.alpha.split_at_mut(depth + 1);
            let (a, b) = parent[depth].split_at(half);
            for (((c, &x), &y), &v) in child[0].iter_mut().zip(a).zip(b).zip(&p.left[depth]) {
                *c = if v == 0 { y + x } else { y - x };
            }
        }
        self.node(depth + 1, first + half);
        for p in &mut self.paths {
            let (upper, lower) = p.ret.split_at_mut(depth + 1);
            let out = &mut upper[depth];
            let right = &lower[0];
            for k in 0..half {
                out[k] = p.left[depth][k] ^ right[k];
                out[k + half] = right[k];
            }
        }
    }

    fn leaf(&mut self, index: usize) {
        let depth = self.stages;
        if self.code.is_frozen(index) {
            for p in &mut self.paths {
                p.metric += softplus_neg(p.alpha[depth][0]);
                p.ret[depth][0] = 0;
                p.u[index] = 0;
            }
            return;
        }
        // (metric, path, bit), best first; ties keep path order with bit 0 first
        let mut forks: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * self.paths.len());
        for (i, p) in self.paths.iter().enumerate() {
            let llr = p.alpha[depth][0];
            forks.push((p.metric + softplus_neg(llr), i, 0));
            forks.push((p.metric + softplus_neg(-llr), i, 1));
        }
        forks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        forks.truncate(self.list_size);
        let mut next = Vec::with_capacity(forks.len());
        for (metric, i, bit) in forks {
            let mut p = self.paths[i].clone();
            p.metric = metric;
            p.ret[depth][0] = bit;
            p.u[index] = bit;
            next.push(p);
        }
        self.paths = next;
    }
}

/// Successive cancellation list decoding. The final decision is the most
/// likely path whose information bits pass `crc`, else the most likely path;
/// `converged` reports whether a CRC-passing path existed (always true
/// without a CRC).
pub fn ca_scl_decode(
    channel_llrs: &[f64],
    code: &PolarCode,
    list_size: usize,
    crc: Option<&CrcSpec>,
) -> DecodeResult {
    assert_eq!(channel_llrs.len(), code.len(), "channel length must equal N");
    let stages = code.stages();
    let mut scl = Scl {
        code,
        list_size: list_size.max(1),
        stages,
        paths: vec![Path::root(channel_llrs, stages)],
    };
    scl.node(0, 0);
    // paths are sorted by metric after the last information leaf only if one
    // exists, so pick explicitly
    let passes = |p: &Path| crc.is_none_or(|spec| spec.check(&code.extract(&p.u)));
    let best_by = |filter: &dyn Fn(&Path) -> bool| {
        scl.paths
            .iter()
            .filter(|p| filter(p))
            .fold(None, |acc: Option<&Path>, p| match acc {
                Some(b) if b.metric <= p.metric => Some(b),
                _ => Some(p),
            })
    };
    let (chosen, converged) = match best_by(&passes) {
        Some(p) => (p, true),
        None => (best_by(&|_| true).expect("list is never empty"), false),
    };
    DecodeResult {
        u_hat: chosen.u.clone(),
        x_hat: chosen.ret[0].clone(),
        converged,
        iterations_used: 1,
        left_llrs: Vec::new(),
        right_llrs: channel_llrs.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concat::ConcatenatedCode;
    use crate::crc::CrcPoly;
    use crate::list::{correlation, sc_decode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy(x: &[u8], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        x.iter()
            .map(|&b| {
                let n: f64 = StandardNormal.sample(rng);
                2.0 * (1.0 - 2.0 * f64::from(b) + sigma * n) / (sigma * sigma)
            })
            .collect()
    }

    #[test]
    fn list_one_equals_sc() {
        let code = PolarCode::nr(64, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let bits: Vec<u8> = (0..32).map(|_| rng.random_range(0..2)).collect();
            let x = code.encode(&code.embed(&bits).unwrap()).unwrap();
            let llrs = noisy(&x, 0.9, &mut rng);
            let sc = sc_decode(&llrs, &code);
            let scl = ca_scl_decode(&llrs, &code, 1, None);
            assert_eq!(sc.u_hat, scl.u_hat);
            assert_eq!(sc.x_hat, scl.x_hat);
        }
    }

    #[test]
    fn full_list_is_ml_with_crc() {
        let code = ConcatenatedCode::nr(8, 3, Some(CrcPoly::crc2())).unwrap();
        let words: Vec<(Vec<u8>, Vec<u8>)> = (0..8u8)
            .map(|w| {
                let payload: Vec<u8> = (0..3).map(|j| (w >> j) & 1).collect();
                let x = code.encode(&payload).unwrap().1;
                (payload, x)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let sent = &words[rng.random_range(0..8)].1;
            let llrs = noisy(sent, 1.0, &mut rng);
            let ml = words
                .iter()
                .max_by(|a, b| correlation(&a.1, &llrs).total_cmp(&correlation(&b.1, &llrs)))
                .unwrap();
            let res = ca_scl_decode(&llrs, code.polar(), 32, code.crc());
            assert!(res.converged);
            assert_eq!(code.payload_of(&res.u_hat), ml.0);
            assert_eq!(res.x_hat, ml.1);
        }
    }

    #[test]
    fn larger_list_never_hurts_much() {
        let code = ConcatenatedCode::nr(64, 26, Some(CrcPoly::nr_crc6())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut errors = [0usize; 2];
        for _ in 0..300 {
            let payload: Vec<u8> = (0..26).map(|_| rng.random_range(0..2)).collect();
            let x = code.encode(&payload).unwrap().1;
            let llrs = noisy(&x, 0.8, &mut rng);
            for (slot, l) in [1usize, 8].into_iter().enumerate() {
                let res = ca_scl_decode(&llrs, code.polar(), l, code.crc());
                errors[slot] += usize::from(code.payload_of(&res.u_hat) != payload);
            }
        }
        assert!(errors[1] <= errors[0], "{errors:?}");
    }
}

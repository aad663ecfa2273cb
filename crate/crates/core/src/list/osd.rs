use crate::error::{Error, Result};
use crate::gf2::Gf2Matrix;

/// Largest supported reprocessing order.
pub const MAX_OSD_ORDER: usize = 4;
/// Largest supported code dimension (message transforms are kept in a `u128`).
pub const MAX_OSD_DIMENSION: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct OsdResult {
    pub message: Vec<u8>,
    pub codeword: Vec<u8>,
    /// `sum (1 - 2 c_i) L_i` of the chosen codeword
    pub correlation: f64,
}

struct Row {
    bits: Vec<u64>,
    /// combination of original generator rows forming this row
    combo: u128,
}

impl Row {
    fn get(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    fn xor(&mut self, other: &Row) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a ^= b;
        }
        self.combo ^= other.combo;
    }
}

/// Ordered statistics decoding of order `order` for the code generated by the
/// rows of `generator` (which must be linearly independent).
pub fn osd_decode(channel_llrs: &[f64], generator: &Gf2Matrix, order: usize) -> Result<OsdResult> {
    let (k, n) = (generator.rows(), generator.cols());
    if order > MAX_OSD_ORDER {
        return Err(Error::Capability(format!("OSD order {order} exceeds {MAX_OSD_ORDER}")));
    }
    if k > MAX_OSD_DIMENSION {
        return Err(Error::Capability(format!(
            "OSD dimension {k} exceeds {MAX_OSD_DIMENSION}"
        )));
    }
    if channel_llrs.len() != n {
        return Err(Error::InvalidDimension(format!(
            "{} LLRs for a length-{n} code",
            channel_llrs.len()
        )));
    }
    let words = n.div_ceil(64);
    let mut rows: Vec<Row> = (0..k)
        .map(|r| {
            let mut bits = vec![0u64; words];
            for (c, &b) in generator.row(r).iter().enumerate() {
                if b != 0 {
                    bits[c / 64] |= 1 << (c % 64);
                }
            }
            Row { bits, combo: 1u128 << r }
        })
        .collect();

    let mut order_idx: Vec<usize> = (0..n).collect();
    order_idx.sort_by(|&a, &b| channel_llrs[b].abs().total_cmp(&channel_llrs[a].abs()).then(a.cmp(&b)));

    // reduce to systematic form on the most reliable independent positions
    let mut basis = Vec::with_capacity(k);
    for &col in &order_idx {
        let rank = basis.len();
        if rank == k {
            break;
        }
        let Some(p) = (rank..k).find(|&r| rows[r].get(col)) else {
            continue;
        };
        rows.swap(rank, p);
        let (head, tail) = rows.split_at_mut(rank);
        let (pivot, rest) = tail.split_first_mut().expect("pivot row exists");
        for r in head.iter_mut().chain(rest.iter_mut()) {
            if r.get(col) {
                r.xor(pivot);
            }
        }
        basis.push(col);
    }
    if basis.len() < k {
        return Err(Error::ContractViolation("generator rows are linearly dependent".into()));
    }

    // order-0 candidate: hard decisions on the basis
    let mut base = Row { bits: vec![0; words], combo: 0 };
    for (r, &col) in basis.iter().enumerate() {
        if channel_llrs[col] < 0.0 {
            base.xor(&rows[r]);
        }
    }
    let score = |row: &Row| -> f64 {
        channel_llrs
            .iter()
            .enumerate()
            .map(|(i, &l)| if row.get(i) { -l } else { l })
            .sum()
    };
    let mut best_combo = base.combo;
    let mut best_bits = base.bits.clone();
    let mut best = score(&base);

    // flip patterns of weight 1..=order, least reliable basis bits last
    let mut pattern: Vec<usize> = Vec::with_capacity(order);
    let mut cand = Row { bits: base.bits.clone(), combo: base.combo };
    fn visit(
        start: usize,
        left: usize,
        k: usize,
        rows: &[Row],
        cand: &mut Row,
        pattern: &mut Vec<usize>,
        on: &mut dyn FnMut(&Row),
    ) {
        if left == 0 {
            return;
        }
        for r in start..k {
            cand.xor(&rows[r]);
            pattern.push(r);
            on(cand);
            visit(r + 1, left - 1, k, rows, cand, pattern, on);
            pattern.pop();
            cand.xor(&rows[r]);
        }
    }
    visit(0, order, k, &rows, &mut cand, &mut pattern, &mut |c: &Row| {
        let s = score(c);
        if s > best {
            best = s;
            best_combo = c.combo;
            best_bits.copy_from_slice(&c.bits);
        }
    });

    let message = (0..k).map(|r| (best_combo >> r & 1) as u8).collect();
    let codeword = (0..n).map(|i| (best_bits[i / 64] >> (i % 64) & 1) as u8).collect();
    Ok(OsdResult { message, codeword, correlation: best })
}

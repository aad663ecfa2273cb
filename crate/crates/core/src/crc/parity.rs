use crate::crc::CrcSpec;
use crate::error::{Error, Result};
use crate::gf2::Gf2Matrix;

/// Parity-check matrix of a CRC code: `r` rows, `n_crc` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrcParityMatrix {
    h: Gf2Matrix,
}

impl CrcParityMatrix {
    pub fn new(h: Gf2Matrix) -> Self {
        CrcParityMatrix { h }
    }

    pub fn matrix(&self) -> &Gf2Matrix {
        &self.h
    }

    pub fn rows(&self) -> usize {
        self.h.rows()
    }

    pub fn cols(&self) -> usize {
        self.h.cols()
    }

    pub fn weight(&self) -> usize {
        self.h.weight()
    }

    /// Sparse view: for each check, the variables it touches.
    pub fn check_neighbours(&self) -> Vec<Vec<usize>> {
        (0..self.h.rows())
            .map(|r| (0..self.h.cols()).filter(|&c| self.h.get(r, c) == 1).collect())
            .collect()
    }
}

/// Parity-check matrix `[P^T | I_r]` from the systematic generator `[I_k | P]`
/// whose rows are the CRC codewords of the unit payloads.
pub fn derive_h(spec: &CrcSpec) -> CrcParityMatrix {
    let k = spec.payload_len();
    let r = spec.r();
    let mut h = Gf2Matrix::zeros(r, spec.n_crc());
    for j in 0..k {
        let mut unit = vec![0u8; k];
        unit[j] = 1;
        let cw = spec.encode(&unit).expect("unit payload has the right length");
        for (p, &bit) in cw[k..].iter().enumerate() {
            h.set(p, j, bit);
        }
    }
    for p in 0..r {
        h.set(p, k + p, 1);
    }
    CrcParityMatrix { h }
}

/// Greedy density reduction: scan row pairs in row-major order; whenever the
/// sum of two rows is lighter than the heavier of the two, replace the heavier
/// row by the sum and restart the scan. Stops when no pair improves.
pub fn reduce_density(h: &CrcParityMatrix) -> CrcParityMatrix {
    let mut m = h.h.clone();
    let rows = m.rows();
    let mut weights: Vec<usize> = (0..rows).map(|r| m.row_weight(r)).collect();
    'scan: loop {
        for a in 0..rows {
            for b in a + 1..rows {
                let sum_weight = m
                    .row(a)
                    .iter()
                    .zip(m.row(b))
                    .filter(|(x, y)| x != y)
                    .count();
                let heavier = if weights[b] >= weights[a] { b } else { a };
                if sum_weight < weights[heavier] {
                    let lighter = if heavier == a { b } else { a };
                    m.xor_row_into(lighter, heavier);
                    weights[heavier] = sum_weight;
                    continue 'scan;
                }
            }
        }
        break;
    }
    CrcParityMatrix { h: m }
}

/// Edge-perspective degree distributions. `lambda[d]` is the fraction of edges
/// attached to variable nodes of degree `d + 1` (the coefficient of `Z^d`);
/// `rho` likewise for check nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
}

impl DegreeDistribution {
    fn poly_string(coeffs: &[f64]) -> String {
        let terms: Vec<String> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(d, c)| match d {
                0 => format!("{c:.3}"),
                _ => format!("{c:.3}Z^{d}"),
            })
            .collect();
        terms.join(" + ")
    }

    pub fn lambda_string(&self) -> String {
        Self::poly_string(&self.lambda)
    }

    pub fn rho_string(&self) -> String {
        Self::poly_string(&self.rho)
    }
}

pub fn degree_distribution(h: &CrcParityMatrix) -> Result<DegreeDistribution> {
    let m = &h.h;
    let edges = m.weight();
    if edges == 0 {
        return Err(Error::ContractViolation("parity-check matrix has no edges".into()));
    }
    let fractions = |degrees: Vec<usize>| {
        let max = degrees.iter().copied().max().unwrap_or(0);
        let mut coeffs = vec![0.0; max];
        for d in degrees.into_iter().filter(|&d| d > 0) {
            coeffs[d - 1] += d as f64;
        }
        coeffs.iter_mut().for_each(|c| *c /= edges as f64);
        coeffs
    };
    let var_degrees = (0..m.cols()).map(|c| (0..m.rows()).filter(|&r| m.get(r, c) == 1).count());
    let check_degrees = (0..m.rows()).map(|r| m.row_weight(r));
    Ok(DegreeDistribution {
        lambda: fractions(var_degrees.collect()),
        rho: fractions(check_degrees.collect()),
    })
}

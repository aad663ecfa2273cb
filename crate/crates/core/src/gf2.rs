use std::fmt;

use crate::error::{Error, Result};

/// Dense binary matrix, row-major, one byte per entry.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Gf2Matrix {
            rows,
            cols,
            bits: vec![0; rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from equally long rows. Every entry must be 0 or 1.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::InvalidDimension(format!(
                    "ragged rows: expected {cols} columns, got {}",
                    row.len()
                )));
            }
            if row.iter().any(|&b| b > 1) {
                return Err(Error::ContractViolation("entries must be 0 or 1".into()));
            }
            bits.extend_from_slice(row);
        }
        Ok(Gf2Matrix {
            rows: rows.len(),
            cols,
            bits,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.bits[r * self.cols + c] = v & 1;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u8] {
        &mut self.bits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// `dst ^= src` on rows.
    pub fn xor_row_into(&mut self, src: usize, dst: usize) {
        assert_ne!(src, dst);
        for c in 0..self.cols {
            let v = self.bits[src * self.cols + c];
            self.bits[dst * self.cols + c] ^= v;
        }
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row(r).iter().map(|&b| b as usize).sum()
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, other: &Gf2Matrix) -> Result<Gf2Matrix> {
        if self.cols != other.rows {
            return Err(Error::InvalidDimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) == 1 {
                    for c in 0..other.cols {
                        out.bits[r * other.cols + c] ^= other.get(k, c);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[u8]) -> Result<Vec<u8>> {
        if v.len() != self.rows {
            return Err(Error::InvalidDimension(format!(
                "vector of length {} against {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut out = vec![0u8; self.cols];
        for (r, &b) in v.iter().enumerate() {
            if b & 1 == 1 {
                for (o, &g) in out.iter_mut().zip(self.row(r)) {
                    *o ^= g;
                }
            }
        }
        Ok(out)
    }

    /// Matrix times column vector (syndrome).
    pub fn syndrome(&self, v: &[u8]) -> Vec<u8> {
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(0u8, |acc, (&h, &x)| acc ^ (h & x))
            })
            .collect()
    }

    pub fn rank(&self) -> usize {
        reduced_rows(self.row_vecs()).len()
    }

    /// True iff `v` lies in the row space.
    pub fn spans(&self, v: &[u8]) -> bool {
        let mut rows = reduced_rows(self.row_vecs());
        let before = rows.len();
        rows.push(v.to_vec());
        reduced_rows(rows).len() == before
    }

    pub fn same_row_space(&self, other: &Gf2Matrix) -> bool {
        self.cols == other.cols
            && self.rank() == other.rank()
            && (0..other.rows).all(|r| self.spans(other.row(r)))
    }
}

/// Gaussian elimination; returns a basis of the row space.
fn reduced_rows(mut rows: Vec<Vec<u8>>) -> Vec<Vec<u8>> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][c] == 1) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[c] == 1 {
                row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
            }
        }
        rank += 1;
    }
    rows.truncate(rank);
    rows
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = self.row(r).iter().map(|&b| (b'0' + b) as char).collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

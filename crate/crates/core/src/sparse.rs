//! Compressed sparse row storage and a deterministic triplet builder.

use std::fmt::Write as _;

/// Accumulates `(row, col, value)` entries; duplicates are summed in
/// insertion order when converted.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, it: impl IntoIterator<Item = (usize, usize, f64)>) {
        for (r, c, v) in it {
            self.push(r, c, v);
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable sort: duplicates are summed in insertion order.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuilder::new(n, n);
        (0..n).for_each(|i| t.push(i, i, 1.0));
        t.build()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mat-vec");
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `self^T x`.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "dimension mismatch in transposed mat-vec");
        let mut y = vec![0.0; self.ncols];
        for (r, xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    /// `x^T self y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        t.extend(self.triplets().map(|(r, c, v)| (c, r, v)));
        t.build()
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        CsrMatrix {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `a * self + b * other` over the union pattern.
    pub fn add(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "shape mismatch in add"
        );
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.extend(self.triplets().map(|(r, c, v)| (r, c, a * v)));
        t.extend(other.triplets().map(|(r, c, v)| (r, c, b * v)));
        t.build()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    /// MatrixMarket coordinate text (1-based, general real).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:e}", r + 1, c + 1, v);
        }
        s
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 3);
        t.push(1, 2, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 2, 0.5);
        let m = t.build();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![2.0, 3.0]);
    }

    #[test]
    fn transpose_and_add() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 3.0);
        t.push(1, 1, 1.0);
        let m = t.build();
        let mt = m.transpose();
        assert_eq!(mt.get(1, 0), 3.0);
        let s = m.add(1.0, &mt, 1.0);
        assert_eq!(s.asymmetry(), 0.0);
        assert_eq!(s.get(1, 1), 2.0);
        assert_eq!(m.mul_vec_transpose(&[1.0, 2.0]), mt.mul_vec(&[1.0, 2.0]));
    }

    #[test]
    fn matrix_market_header() {
        let m = CsrMatrix::identity(3);
        let s = m.to_matrix_market();
        assert!(s.starts_with("%%MatrixMarket"));
        assert!(s.contains("3 3 3\n"));
    }
}

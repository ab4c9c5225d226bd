//! Compressed sparse row matrices, a coordinate-format builder, and
//! MatrixMarket import/export for debugging interop.

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry ({row},{col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("malformed MatrixMarket input: {0}")]
    MatrixMarket(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sparse matrix in CSR form. Column indices are strictly increasing within
/// each row; explicit zeros are allowed (boundary elimination keeps the
/// pattern of the entries it clears).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if row_offsets.len() != nrows + 1
            || col_indices.len() != values.len()
            || *row_offsets.last().unwrap_or(&0) != col_indices.len()
        {
            return Err(SparseError::DimensionMismatch(
                "row offsets / index / value arrays are inconsistent".into(),
            ));
        }
        for r in 0..nrows {
            if row_offsets[r] > row_offsets[r + 1] {
                return Err(SparseError::DimensionMismatch(
                    "row offsets must be nondecreasing".into(),
                ));
            }
            let cols = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(SparseError::DimensionMismatch(
                        "column indices must be strictly increasing within a row".into(),
                    ));
                }
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(SparseError::IndexOutOfBounds {
                        row: r,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Mutable access to a stored entry; `None` if (i,j) is not in the pattern.
    pub fn get_mut(&mut self, i: usize, j: usize) -> Option<&mut f64> {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        match self.col_indices[lo..hi].binary_search(&j) {
            Ok(k) => Some(&mut self.values[lo + k]),
            Err(_) => None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "spmv input length");
        assert_eq!(y.len(), self.nrows, "spmv output length");
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = counts.clone();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let k = cursor[*c];
                col_indices[k] = i;
                values[k] = *v;
                cursor[*c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// C = A B by row-wise sparse accumulation.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix, SparseError> {
        if self.ncols != other.nrows {
            return Err(SparseError::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut builder = CooBuilder::new(self.nrows, other.ncols);
        let mut acc = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let (bcols, bvals) = other.row(*c);
                for (bc, bv) in bcols.iter().zip(bvals) {
                    if acc[*bc] == 0.0 && !touched.contains(bc) {
                        touched.push(*bc);
                    }
                    acc[*bc] += v * bv;
                }
            }
            for &j in &touched {
                builder.push(i, j, acc[j]);
                acc[j] = 0.0;
            }
            touched.clear();
        }
        Ok(builder.build())
    }

    /// self + alpha·other, patterns merged.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix, SparseError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SparseError::DimensionMismatch(format!(
                "add: {}x{} plus {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut builder = CooBuilder::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                builder.push(i, *c, *v);
            }
            let (cols, vals) = other.row(i);
            for (c, v) in cols.iter().zip(vals) {
                builder.push(i, *c, alpha * v);
            }
        }
        Ok(builder.build())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest |a_ij - a_ji| over the union pattern; 0 for a symmetric matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut defect = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                defect = defect.max((v - t.get(i, *c)).abs());
            }
            let (tcols, tvals) = t.row(i);
            for (c, v) in tcols.iter().zip(tvals) {
                defect = defect.max((v - self.get(i, *c)).abs());
            }
        }
        defect
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        self.row_offsets == t.row_offsets && self.col_indices == t.col_indices
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                dense[i * self.ncols + c] = *v;
            }
        }
        dense
    }

    /// Writes coordinate-format MatrixMarket (`real general`, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<(), SparseError> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix, SparseError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| SparseError::MatrixMarket("empty input".into()))??;
        let h = header.to_ascii_lowercase();
        if !h.starts_with("%%matrixmarket") || !h.contains("coordinate") || !h.contains("real") {
            return Err(SparseError::MatrixMarket(format!(
                "unsupported header: {header}"
            )));
        }
        if h.contains("complex") || h.contains("pattern") || h.contains("symmetric") {
            return Err(SparseError::MatrixMarket(
                "only `coordinate real general` is supported".into(),
            ));
        }
        let mut size_line = None;
        for line in lines.by_ref() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            size_line = Some(t.to_string());
            break;
        }
        let size_line =
            size_line.ok_or_else(|| SparseError::MatrixMarket("missing size line".into()))?;
        let dims: Vec<usize> = size_line
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| SparseError::MatrixMarket(format!("bad size line: {e}")))?;
        if dims.len() != 3 {
            return Err(SparseError::MatrixMarket(
                "size line must be `nrows ncols nnz`".into(),
            ));
        }
        let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
        let mut builder = CooBuilder::new(nrows, ncols);
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let mut parts = t.split_whitespace();
            let i: usize = parts
                .next()
                .ok_or_else(|| SparseError::MatrixMarket("short entry line".into()))?
                .parse()
                .map_err(|e| SparseError::MatrixMarket(format!("bad row index: {e}")))?;
            let j: usize = parts
                .next()
                .ok_or_else(|| SparseError::MatrixMarket("short entry line".into()))?
                .parse()
                .map_err(|e| SparseError::MatrixMarket(format!("bad col index: {e}")))?;
            let v: f64 = parts
                .next()
                .ok_or_else(|| SparseError::MatrixMarket("short entry line".into()))?
                .parse()
                .map_err(|e| SparseError::MatrixMarket(format!("bad value: {e}")))?;
            if i == 0 || j == 0 || i > nrows || j > ncols {
                return Err(SparseError::MatrixMarket(format!(
                    "entry ({i},{j}) outside declared {nrows}x{ncols} (indices are 1-based)"
                )));
            }
            builder.push(i - 1, j - 1, v);
            seen += 1;
        }
        if seen != nnz {
            return Err(SparseError::MatrixMarket(format!(
                "declared {nnz} entries, found {seen}"
            )));
        }
        Ok(builder.build())
    }
}

/// Accumulates (row, col, value) triplets; `build` sorts them and sums
/// duplicates, which is exactly what scatter-add element assembly needs.
#[derive(Debug, Clone)]
pub struct CooBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            row < self.nrows && col < self.ncols,
            "COO entry ({row},{col}) outside {}x{}",
            self.nrows,
            self.ncols
        );
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_offsets = vec![0usize; self.nrows + 1];
        for &(r, _, _) in &merged {
            row_offsets[r + 1] += 1;
        }
        for r in 0..self.nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices: merged.iter().map(|e| e.1).collect(),
            values: merged.iter().map(|e| e.2).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_build_sums_duplicates_and_sorts() {
        let mut b = CooBuilder::new(3, 3);
        b.push(1, 2, 1.0);
        b.push(0, 0, 2.0);
        b.push(1, 2, 0.5);
        b.push(1, 0, -1.0);
        let a = b.build();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 2), 1.5);
        assert_eq!(a.get(2, 2), 0.0);
    }

    #[test]
    fn spmv_matches_dense() {
        let mut b = CooBuilder::new(2, 3);
        b.push(0, 0, 1.0);
        b.push(0, 2, 2.0);
        b.push(1, 1, 3.0);
        let a = b.build();
        let y = a.mul_vec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![7.0, 6.0]);
    }

    #[test]
    fn transpose_round_trip() {
        let mut b = CooBuilder::new(2, 3);
        b.push(0, 1, 4.0);
        b.push(1, 0, -2.0);
        b.push(1, 2, 5.0);
        let a = b.build();
        let t = a.transpose();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.get(1, 0), 4.0);
        assert_eq!(t.get(0, 1), -2.0);
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn matmul_against_dense() {
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(0, 1, 2.0);
        b.push(1, 1, 3.0);
        let a = b.build();
        let c = a.matmul(&a).unwrap();
        // [[1,2],[0,3]]^2 = [[1,8],[0,9]]
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 8.0);
        assert_eq!(c.get(1, 0), 0.0);
        assert_eq!(c.get(1, 1), 9.0);
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 1, 1.0);
        b.push(1, 0, -1.0);
        let a = b.build();
        assert_eq!(a.symmetry_defect(), 2.0);
        assert_eq!(CsrMatrix::identity(4).symmetry_defect(), 0.0);
    }

    #[test]
    fn matrix_market_round_trip() {
        let mut b = CooBuilder::new(3, 2);
        b.push(0, 0, 1.5);
        b.push(2, 1, -2.25e-3);
        let a = b.build();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let back = CsrMatrix::read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn matrix_market_rejects_garbage() {
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 3.0\n";
        assert!(CsrMatrix::read_matrix_market(bad.as_bytes()).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 3.0\n";
        assert!(CsrMatrix::read_matrix_market(short.as_bytes()).is_err());
    }
}

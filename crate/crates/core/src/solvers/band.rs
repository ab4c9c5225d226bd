//! Banded LU with partial pivoting (LAPACK band layout).
//!
//! Storage is column-major with leading dimension 2·kl+ku+1: entry (i,j)
//! lives at ab[j·ldab + kl+ku+i−j]. The extra kl rows above the band absorb
//! the fill created by row interchanges. For the mesh-ordered potentials the
//! bandwidth is n+2, so factoring costs O(N·b²) instead of dense O(N³).

use super::SolveError;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factors the leading `size`×`size` principal block of a CSR matrix.
    pub fn factor_block(a: &CsrMatrix, size: usize) -> Result<Self, SolveError> {
        assert!(size <= a.nrows().min(a.ncols()));
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..size {
            let (cols, _) = a.row(i);
            for &j in cols {
                if j >= size {
                    continue;
                }
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * size];
        for i in 0..size {
            let (cols, vals) = a.row(i);
            for (j, v) in cols.iter().zip(vals) {
                if *j < size {
                    ab[j * ldab + (kl + ku + i - j)] = *v;
                }
            }
        }
        Self::factor_storage(size, kl, ku, ab)
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self, SolveError> {
        if a.nrows() != a.ncols() {
            return Err(SolveError::DimensionMismatch(format!(
                "banded factorization needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Self::factor_block(a, a.nrows())
    }

    fn factor_storage(
        n: usize,
        kl: usize,
        ku: usize,
        mut ab: Vec<f64>,
    ) -> Result<Self, SolveError> {
        let ldab = 2 * kl + ku + 1;
        let kv = kl + ku; // row offset of the diagonal in each column
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut pmax = ab[j * ldab + kv].abs();
            for i in j + 1..=j + km {
                let m = ab[j * ldab + kv + i - j].abs();
                if m > pmax {
                    pmax = m;
                    p = i;
                }
            }
            if pmax < 1e-300 {
                return Err(SolveError::SingularPivot {
                    index: j,
                    magnitude: pmax,
                });
            }
            ipiv[j] = p;
            let ju = (j + kv).min(n - 1);
            if p != j {
                for c in j..=ju {
                    ab.swap(c * ldab + kv + j - c, c * ldab + kv + p - c);
                }
            }
            let piv = ab[j * ldab + kv];
            for i in j + 1..=j + km {
                ab[j * ldab + kv + i - j] /= piv;
            }
            for c in j + 1..=ju {
                let ajc = ab[c * ldab + kv + j - c];
                if ajc != 0.0 {
                    for i in j + 1..=j + km {
                        ab[c * ldab + kv + i - c] -= ab[j * ldab + kv + i - j] * ajc;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let kv = self.kl + self.ku;
        for j in 0..self.n {
            if self.ipiv[j] != j {
                x.swap(j, self.ipiv[j]);
            }
            let km = self.kl.min(self.n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..=j + km {
                    x[i] -= self.ab[j * self.ldab + kv + i - j] * xj;
                }
            }
        }
        for j in (0..self.n).rev() {
            x[j] /= self.ab[j * self.ldab + kv];
            let xj = x[j];
            if xj != 0.0 {
                let start = j.saturating_sub(kv);
                for i in start..j {
                    x[i] -= self.ab[j * self.ldab + kv + i - j] * xj;
                }
            }
        }
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

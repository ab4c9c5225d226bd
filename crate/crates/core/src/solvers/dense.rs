//! Dense LU with partial pivoting, for the small Schur complements of the
//! bordered systems and the coarsest multigrid level.

use super::SolveError;

/// Row-major LU factors of a small dense matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    ipiv: Vec<usize>,
}

impl DenseLu {
    /// Factors a row-major n×n matrix. `regularize` shifts a vanishing pivot
    /// to a tiny multiple of the matrix scale instead of failing; this keeps
    /// a merely ill-posed coarse correction usable as a preconditioner.
    pub fn factor(mut lu: Vec<f64>, n: usize, regularize: bool) -> Result<Self, SolveError> {
        assert_eq!(lu.len(), n * n, "row-major n×n storage");
        let scale = lu.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut ipiv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[k * n + k].abs();
            for i in k + 1..n {
                let m = lu[i * n + k].abs();
                if m > pmax {
                    pmax = m;
                    p = i;
                }
            }
            if pmax < 1e-300 {
                if regularize {
                    lu[p * n + k] = 1e-12 * scale;
                } else {
                    return Err(SolveError::SingularPivot {
                        index: k,
                        magnitude: pmax,
                    });
                }
            }
            ipiv[k] = p;
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
            }
            let piv = lu[k * n + k];
            for i in k + 1..n {
                let m = lu[i * n + k] / piv;
                lu[i * n + k] = m;
                for c in k + 1..n {
                    lu[i * n + c] -= m * lu[k * n + c];
                }
            }
        }
        Ok(Self { n, lu, ipiv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        // The factorization swaps whole rows, multipliers included, so the
        // permutation must be applied in full before the triangular sweeps.
        for k in 0..self.n {
            if self.ipiv[k] != k {
                x.swap(k, self.ipiv[k]);
            }
        }
        for k in 0..self.n {
            for i in k + 1..self.n {
                x[i] -= self.lu[i * self.n + k] * x[k];
            }
        }
        for k in (0..self.n).rev() {
            x[k] /= self.lu[k * self.n + k];
            for i in 0..k {
                x[i] -= self.lu[i * self.n + k] * x[k];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // [[2,1],[1,3]] x = (3,5) → x = (0.8, 1.4)
        let lu = DenseLu::factor(vec![2.0, 1.0, 1.0, 3.0], 2, false).unwrap();
        let x = lu.solve(&[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-15);
        assert!((x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn pivots_through_zero_diagonal() {
        // [[0,1],[1,0]] needs the row swap
        let lu = DenseLu::factor(vec![0.0, 1.0, 1.0, 0.0], 2, false).unwrap();
        let x = lu.solve(&[2.0, 7.0]);
        assert_eq!(x, vec![7.0, 2.0]);
    }

    #[test]
    fn reports_singular_matrix() {
        let err = DenseLu::factor(vec![1.0, 2.0, 2.0, 4.0], 2, false).unwrap_err();
        assert!(matches!(err, SolveError::SingularPivot { index: 1, .. }));
        // with regularization the factorization still completes
        assert!(DenseLu::factor(vec![1.0, 2.0, 2.0, 4.0], 2, true).is_ok());
    }

    #[test]
    fn random_residuals_are_tiny() {
        // deterministic congruential fill; residual should be near roundoff
        let n = 24;
        let mut state = 1234567u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..n * n).map(|_| next()).collect();
        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let lu = DenseLu::factor(a.clone(), n, false).unwrap();
        let x = lu.solve(&b);
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-10);
        }
    }
}

//! Linear solvers for the assembled systems: a banded direct factorization
//! with bordered and rank-one handling, restarted GMRES with a true-residual
//! stopping test, and a smoothed-aggregation algebraic multigrid
//! preconditioner with a Woodbury correction for the rank-one coupling.

mod amg;
mod band;
mod dense;
mod direct;
mod gmres;

pub use amg::{AmgConfig, AmgHierarchy, WoodburyPreconditioner};
pub use band::BandedLu;
pub use dense::DenseLu;
pub use direct::{direct_solve, DIRECT_RESIDUAL_TARGET};
pub use gmres::{gmres, GmresConfig};

use std::time::Duration;

use thiserror::Error;

use crate::sparse::{CooBuilder, CsrMatrix};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("singular pivot at row {index}: |pivot| = {magnitude:.3e}")]
    SingularPivot { index: usize, magnitude: f64 },
    #[error("rank-one update is numerically singular: |1 + vᵀA⁻¹u| = {0:.3e}")]
    SingularUpdate(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Sparse operator plus an optional rank-one coupling u·vᵀ, applied
/// matrix-free so the sparse part keeps its band structure.
#[derive(Clone, Copy)]
pub struct LinearOperator<'a> {
    pub sparse: &'a CsrMatrix,
    pub rank_one: Option<(&'a [f64], &'a [f64])>,
}

impl<'a> LinearOperator<'a> {
    pub fn from_matrix(sparse: &'a CsrMatrix) -> Self {
        Self {
            sparse,
            rank_one: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.sparse.nrows()
    }

    /// y = (A + u vᵀ) x. The rank-one inner product is compensated so the
    /// large 1/ε factors in u do not amplify summation noise.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.sparse.mul_vec_into(x, y);
        if let Some((u, v)) = self.rank_one {
            let dot = compensated_dot(v, x);
            for (yi, ui) in y.iter_mut().zip(u) {
                *yi += ui * dot;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.sparse.nrows()];
        self.apply_into(x, &mut y);
        y
    }

    /// Residual b − (A + u vᵀ)x.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = self.apply(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    /// Merges the rank-one part into the sparse pattern. Intended for
    /// diagnostics; the result loses the band structure on coupled rows.
    pub fn to_csr(&self) -> CsrMatrix {
        let Some((u, v)) = self.rank_one else {
            return self.sparse.clone();
        };
        let mut builder = CooBuilder::new(self.sparse.nrows(), self.sparse.ncols());
        for i in 0..self.sparse.nrows() {
            let (cols, vals) = self.sparse.row(i);
            for (c, val) in cols.iter().zip(vals) {
                builder.push(i, *c, *val);
            }
            if u[i] != 0.0 {
                for (j, vj) in v.iter().enumerate() {
                    if *vj != 0.0 {
                        builder.push(i, j, u[i] * vj);
                    }
                }
            }
        }
        builder.build()
    }
}

/// Outcome bookkeeping shared by the direct and iterative paths.
#[derive(Debug, Clone)]
pub struct SolveStats {
    /// Krylov steps for GMRES; refinement sweeps for the direct solver.
    pub iterations: usize,
    /// Final true residual: ‖b−Ax‖₂ for the iterative path; the normwise
    /// backward error ‖b−Ax‖₂/(‖A‖_F‖x‖₂+‖b‖₂) for the direct path.
    pub residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
    /// Set when the Woodbury denominator guard fell back to the plain cycle.
    pub woodbury_guard_triggered: bool,
    /// True residual at each restart boundary, starting with ‖b‖.
    pub restart_residuals: Vec<f64>,
}

impl SolveStats {
    fn new() -> Self {
        Self {
            iterations: 0,
            residual: f64::NAN,
            converged: false,
            wall_time: Duration::ZERO,
            woodbury_guard_triggered: false,
            restart_residuals: Vec::new(),
        }
    }
}

/// Application of an approximate inverse, z ≈ A⁻¹r.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
    /// Whether a numerical guard degraded the preconditioner.
    fn guard_triggered(&self) -> bool {
        false
    }
}

/// Compensated (Kahan–Babuška–Neumaier) dot product: the running
/// compensation survives even when a term dwarfs the running sum, so exact
/// cancellations of large terms are recovered.
pub(crate) fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let term = x * y;
        let tmp = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - tmp) + term;
        } else {
            comp += (term - tmp) + sum;
        }
        sum = tmp;
    }
    sum + comp
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_applies_rank_one() {
        let a = CsrMatrix::identity(3);
        let u = [1.0, 0.0, 2.0];
        let v = [0.0, 1.0, 1.0];
        let op = LinearOperator {
            sparse: &a,
            rank_one: Some((&u, &v)),
        };
        // (I + u vᵀ)x with x = (1,2,3): vᵀx = 5, x + u·5 = (6, 2, 13)
        assert_eq!(op.apply(&[1.0, 2.0, 3.0]), vec![6.0, 2.0, 13.0]);
        let dense = op.to_csr();
        assert_eq!(dense.get(0, 1), 1.0);
        assert_eq!(dense.get(2, 2), 3.0);
        assert_eq!(dense.get(1, 1), 1.0);
    }

    #[test]
    fn compensated_dot_matches_exact_on_adversarial_sum() {
        let big = 1e16;
        let a = vec![1.0, 1.0, 1.0, 1.0];
        let b = vec![big, 1.0, -big, 1.0];
        assert_eq!(compensated_dot(&a, &b), 2.0);
    }
}

//! Smoothed-aggregation algebraic multigrid.
//!
//! Setup per level: a strength graph keeps the couplings with
//! max(|a_ij|,|a_ji|) ≥ θ·√(|a_ii·a_jj|) (symmetrized, so mildly
//! nonsymmetric systems get a usable graph; a zero diagonal makes every
//! coupling of that row strong). Greedy aggregation runs in three passes —
//! seed aggregates around nodes whose strong neighbourhood is untouched,
//! attach leftovers to their strongest phase-one aggregate, then sweep up
//! stragglers — all in ascending index order, so the hierarchy is
//! deterministic. The tentative prolongator carries 1/√|aggregate| per
//! column and is smoothed by one damped-Jacobi step, P = (I − ωD⁻¹A)T,
//! skipping rows without a diagonal. Coarse operators are Galerkin
//! products PᵀAP; coarsening stops under a size floor, or earlier if a
//! pass fails to shrink the matrix (an identity block coarsens to itself).
//! The coarsest level is factored densely with regularization so that a
//! singular coarse operator still yields a usable (if weak) cycle.
//!
//! The solve phase is one V(1,1)-cycle with symmetric Gauss–Seidel
//! smoothing that skips zero-diagonal rows; the map r ↦ z is linear and
//! fixed for a given hierarchy, as restarted GMRES requires of a
//! preconditioner.

use super::dense::DenseLu;
use super::{compensated_dot, Preconditioner};
use crate::sparse::{CooBuilder, CsrMatrix};

#[derive(Debug, Clone)]
pub struct AmgConfig {
    /// Strength-of-connection threshold θ.
    pub theta: f64,
    /// Damping ω of the prolongator-smoothing Jacobi step.
    pub jacobi_omega: f64,
    /// Stop coarsening once a level is smaller than this.
    pub coarsest_size: usize,
    /// Hard cap on the number of levels.
    pub max_levels: usize,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            theta: 0.08,
            jacobi_omega: 2.0 / 3.0,
            coarsest_size: 64,
            max_levels: 25,
        }
    }
}

pub struct AmgHierarchy {
    matrices: Vec<CsrMatrix>,
    diagonals: Vec<Vec<f64>>,
    /// prolongators[l] maps level l+1 corrections up to level l.
    prolongators: Vec<CsrMatrix>,
    restrictions: Vec<CsrMatrix>,
    coarse_lu: DenseLu,
}

/// Strong couplings of each row, with the symmetrized magnitude
/// max(|a_ij|, |a_ji|) kept for the aggregation tie-breaks.
fn strength_graph(a: &CsrMatrix, theta: f64) -> Vec<Vec<(usize, f64)>> {
    let n = a.nrows();
    let diag = a.diagonal();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            if *j == i || *v == 0.0 {
                continue;
            }
            if v.abs() >= theta * (diag[i].abs() * diag[*j].abs()).sqrt() {
                adj[i].push((*j, v.abs()));
                adj[*j].push((i, v.abs()));
            }
        }
    }
    for row in &mut adj {
        row.sort_by_key(|entry| entry.0);
        row.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 = b.1.max(a.1);
                true
            } else {
                false
            }
        });
    }
    adj
}

/// Greedy three-pass aggregation; returns the aggregate index of every node
/// and the number of aggregates.
fn aggregate(strength: &[Vec<(usize, f64)>]) -> (Vec<usize>, usize) {
    let n = strength.len();
    const UNSET: usize = usize::MAX;
    let mut agg = vec![UNSET; n];
    let mut count = 0usize;

    for i in 0..n {
        if agg[i] == UNSET && strength[i].iter().all(|(j, _)| agg[*j] == UNSET) {
            agg[i] = count;
            for (j, _) in &strength[i] {
                agg[*j] = count;
            }
            count += 1;
        }
    }

    let seeded = agg.clone();
    for i in 0..n {
        if agg[i] != UNSET {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, w) in &strength[i] {
            if seeded[*j] != UNSET && best.is_none_or(|(_, bw)| *w > bw) {
                best = Some((seeded[*j], *w));
            }
        }
        if let Some((target, _)) = best {
            agg[i] = target;
        }
    }

    for i in 0..n {
        if agg[i] == UNSET {
            agg[i] = count;
            for (j, _) in &strength[i] {
                if agg[*j] == UNSET {
                    agg[*j] = count;
                }
            }
            count += 1;
        }
    }
    (agg, count)
}

/// Tentative prolongator: column a of size s carries 1/√s on its aggregate.
fn tentative(agg: &[usize], n_agg: usize) -> CsrMatrix {
    let mut sizes = vec![0usize; n_agg];
    for &a in agg {
        sizes[a] += 1;
    }
    let mut b = CooBuilder::new(agg.len(), n_agg);
    for (i, &a) in agg.iter().enumerate() {
        b.push(i, a, 1.0 / (sizes[a] as f64).sqrt());
    }
    b.build()
}

/// One damped-Jacobi smoothing operator I − ωD⁻¹A; rows without a diagonal
/// pass through unchanged.
fn jacobi_smoother(a: &CsrMatrix, diag: &[f64], omega: f64) -> CsrMatrix {
    let n = a.nrows();
    let mut b = CooBuilder::new(n, n);
    for i in 0..n {
        if diag[i] == 0.0 {
            b.push(i, i, 1.0);
            continue;
        }
        let (cols, vals) = a.row(i);
        let mut saw_diag = false;
        for (j, v) in cols.iter().zip(vals) {
            if *j == i {
                saw_diag = true;
                b.push(i, i, 1.0 - omega * v / diag[i]);
            } else {
                b.push(i, *j, -omega * v / diag[i]);
            }
        }
        if !saw_diag {
            b.push(i, i, 1.0);
        }
    }
    b.build()
}

fn sgs_sweep(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    let n = a.nrows();
    let relax = |i: usize, x: &mut [f64]| {
        if diag[i] == 0.0 {
            return;
        }
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        for (j, v) in cols.iter().zip(vals) {
            if *j != i {
                s -= v * x[*j];
            }
        }
        x[i] = s / diag[i];
    };
    for i in 0..n {
        relax(i, x);
    }
    for i in (0..n).rev() {
        relax(i, x);
    }
}

impl AmgHierarchy {
    pub fn setup(a: &CsrMatrix, config: &AmgConfig) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "multigrid needs a square operator");
        let mut matrices = vec![a.clone()];
        let mut prolongators = Vec::new();
        let mut restrictions = Vec::new();
        while matrices.last().unwrap().nrows() >= config.coarsest_size.max(1)
            && matrices.len() < config.max_levels
        {
            let fine = matrices.last().unwrap();
            let strength = strength_graph(fine, config.theta);
            let (agg, n_agg) = aggregate(&strength);
            if n_agg >= fine.nrows() {
                break; // nothing aggregated beyond singletons
            }
            let t = tentative(&agg, n_agg);
            let diag = fine.diagonal();
            let p = jacobi_smoother(fine, &diag, config.jacobi_omega)
                .matmul(&t)
                .expect("smoother and tentative prolongator dimensions agree");
            let r = p.transpose();
            let coarse = r
                .matmul(fine)
                .and_then(|ra| ra.matmul(&p))
                .expect("Galerkin product dimensions agree");
            prolongators.push(p);
            restrictions.push(r);
            matrices.push(coarse);
        }
        let diagonals = matrices.iter().map(|m| m.diagonal()).collect();
        let coarsest = matrices.last().unwrap();
        let coarse_lu = DenseLu::factor(coarsest.to_dense(), coarsest.nrows(), true)
            .expect("regularized factorization cannot fail");
        Self {
            matrices,
            diagonals,
            prolongators,
            restrictions,
            coarse_lu,
        }
    }

    pub fn num_levels(&self) -> usize {
        self.matrices.len()
    }

    pub fn level_dims(&self) -> Vec<usize> {
        self.matrices.iter().map(|m| m.nrows()).collect()
    }

    /// Σ rows over all levels, relative to the finest.
    pub fn grid_complexity(&self) -> f64 {
        let total: usize = self.matrices.iter().map(|m| m.nrows()).sum();
        total as f64 / self.matrices[0].nrows() as f64
    }

    /// Σ nonzeros over all levels, relative to the finest.
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.matrices.iter().map(|m| m.nnz()).sum();
        total as f64 / self.matrices[0].nnz() as f64
    }

    /// One V(1,1)-cycle approximating A⁻¹b from a zero initial guess.
    pub fn vcycle(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.matrices[0].nrows());
        self.cycle_at(0, b)
    }

    fn cycle_at(&self, level: usize, b: &[f64]) -> Vec<f64> {
        if level + 1 == self.matrices.len() {
            return self.coarse_lu.solve(b);
        }
        let a = &self.matrices[level];
        let diag = &self.diagonals[level];
        let mut x = vec![0.0; a.nrows()];
        sgs_sweep(a, diag, b, &mut x);
        let mut res = a.mul_vec(&x);
        for (ri, bi) in res.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let coarse_res = self.restrictions[level].mul_vec(&res);
        let coarse_x = self.cycle_at(level + 1, &coarse_res);
        let corr = self.prolongators[level].mul_vec(&coarse_x);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        sgs_sweep(a, diag, b, &mut x);
        x
    }
}

/// AMG preconditioner for an operator A + u·vᵀ: the cycle approximates A⁻¹
/// and the rank-one part is folded in by the Woodbury identity
/// (A + u vᵀ)⁻¹ = A⁻¹ − A⁻¹u vᵀA⁻¹ / (1 + vᵀA⁻¹u), with the cycle standing
/// in for A⁻¹. The correction data is fixed at construction, so the
/// preconditioner stays a fixed linear map. A near-zero Woodbury
/// denominator disables the correction and flags the degradation instead
/// of producing garbage.
pub struct WoodburyPreconditioner {
    hierarchy: AmgHierarchy,
    correction: Option<(Vec<f64>, Vec<f64>, f64)>,
    guard_triggered: bool,
}

impl WoodburyPreconditioner {
    pub fn new(hierarchy: AmgHierarchy, rank_one: Option<(&[f64], &[f64])>) -> Self {
        let (correction, guard_triggered) = match rank_one {
            None => (None, false),
            Some((u, v)) => {
                let zu = hierarchy.vcycle(u);
                let denom = 1.0 + compensated_dot(v, &zu);
                if denom.abs() < 1e-12 {
                    (None, true)
                } else {
                    (Some((zu, v.to_vec(), denom)), false)
                }
            }
        };
        Self {
            hierarchy,
            correction,
            guard_triggered,
        }
    }

    pub fn hierarchy(&self) -> &AmgHierarchy {
        &self.hierarchy
    }
}

impl Preconditioner for WoodburyPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut z = self.hierarchy.vcycle(r);
        if let Some((zu, v, denom)) = &self.correction {
            let scale = compensated_dot(v, &z) / denom;
            for (zi, zui) in z.iter_mut().zip(zu) {
                *zi -= scale * zui;
            }
        }
        z
    }

    fn guard_triggered(&self) -> bool {
        self.guard_triggered
    }
}

//! Discretizations of the integral boundary condition
//! Φ = V − R·∫_{Γ1} σ ∂Φ/∂n ds on the contact side.
//!
//! Two routes to a linear system:
//!
//! * **Penalized / Nitsche-style.** The condition is perturbed to
//!   Φ + ε ∂Φ/∂n = V − R·∫_{Γ1} σ ∂Φ/∂n, the boundary flux is solved for
//!   analytically, and the result is a boundary penalty term plus a rank-one
//!   nonlocal coupling: with S_σ = ∫_{Γ1} σ,
//!
//!   a(Φ,v) = ∫_Ω ∇Φ·∇v + (1/ε)∫_{Γ1} Φ v − (1/ε)·R/(R·S_σ+ε)·(∫_{Γ1} σΦ)(∫_{Γ1} v),
//!   L(v)   = ∫_Ω f v + V/(R·S_σ+ε)·∫_{Γ1} v.
//!
//!   The rank-one part is kept as an explicit (u, vᵀ) pair so the sparse part
//!   stays symmetric and banded. A bordered variant keeps the boundary
//!   integral w = ∫_{Γ1} σΦ as one extra unknown instead.
//!
//! * **Lagrange multiplier.** The condition is enforced weakly with a
//!   multiplier λ on Γ1 and a scalar current unknown w, giving a saddle
//!   system over [Φ; λ; w]:
//!
//!   Φ rows:  ∫_Ω ∇Φ·∇v₁ + ∫_{Γ1} λ v₁ = ∫_Ω f v₁
//!   λ rows:  ∫_{Γ1} Φ v₂ + R·w·∫_{Γ1} v₂ = V·∫_{Γ1} v₂
//!   w row:   R·∫_{Γ1} λ + |Γ1|·w − |Γ1|·∫_{Γ1} σ ∂Φ/∂n = 0
//!
//! Dirichlet data on Γ3 is eliminated symmetrically in both cases.

use std::sync::Arc;

use thiserror::Error;

use crate::assembly::{
    assemble_gamma1_mass, assemble_gamma1_vector, assemble_load,
    assemble_normal_derivative_vector, assemble_stiffness, eliminate_dirichlet, AssemblyError,
    DofMap,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::QuadratureRules;
use crate::solvers::LinearOperator;
use crate::sparse::{CooBuilder, CsrMatrix};

pub type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Field1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type GradientField = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("penalty parameter must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("resistance must be nonnegative and finite, got {0}")]
    BadResistance(f64),
    #[error("voltage must be finite, got {0}")]
    BadVoltage(f64),
    #[error("conductivity must be positive on Γ1: σ({y}) = {value}")]
    NonPositiveSigma { y: f64, value: f64 },
    #[error("problem is posed on a square of side {spec} but the mesh has side {mesh}")]
    DomainMismatch { spec: f64, mesh: f64 },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Exact solution attached to a manufactured problem.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: Field2,
    pub gradient: GradientField,
}

/// Data of one boundary-value problem: −ΔΦ = f on (0,side)², the integral
/// condition with contact conductivity σ(y), applied voltage V, and lumped
/// resistance R on Γ1, and Dirichlet trace Φ_D(y) on Γ3.
#[derive(Clone)]
pub struct ProblemSpec {
    pub f: Field2,
    pub sigma: Field1,
    pub voltage: f64,
    pub resistance: f64,
    pub phi_d: Field1,
    pub side: f64,
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        voltage: f64,
        resistance: f64,
        phi_d: impl Fn(f64) -> f64 + Send + Sync + 'static,
        side: f64,
    ) -> Self {
        Self {
            f: Arc::new(f),
            sigma: Arc::new(sigma),
            voltage,
            resistance,
            phi_d: Arc::new(phi_d),
            side,
            exact: None,
        }
    }

    pub fn with_exact(
        mut self,
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(ExactSolution {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        });
        self
    }

    fn validate(&self, mesh: &Mesh, quad: &QuadratureRules) -> Result<(), BuildError> {
        if !self.resistance.is_finite() || self.resistance < 0.0 {
            return Err(BuildError::BadResistance(self.resistance));
        }
        if !self.voltage.is_finite() {
            return Err(BuildError::BadVoltage(self.voltage));
        }
        if (self.side - mesh.side).abs() > 1e-12 * self.side.abs().max(1.0) {
            return Err(BuildError::DomainMismatch {
                spec: self.side,
                mesh: mesh.side,
            });
        }
        for edge in mesh.edges_on(BoundaryTag::Gamma1) {
            let ya = mesh.vertices[edge.vertices[0]][1];
            let yb = mesh.vertices[edge.vertices[1]][1];
            for t in &quad.edge.points {
                let y = ya + t * (yb - ya);
                let s = (self.sigma)(y);
                if !s.is_finite() || s <= 0.0 {
                    return Err(BuildError::NonPositiveSigma { y, value: s });
                }
            }
        }
        Ok(())
    }
}

/// Unknown ordering of an assembled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemLayout {
    /// Plain vertex potentials.
    PhiOnly,
    /// [Φ (n_phi) | λ (n_lambda) | one auxiliary scalar].
    PhiLambdaW { n_phi: usize, n_lambda: usize },
}

/// A linear system ready for a solver: sparse matrix, optional rank-one
/// coupling u·vᵀ kept out of the pattern, right-hand side, and the Dirichlet
/// bookkeeping that produced it.
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rank_one: Option<(Vec<f64>, Vec<f64>)>,
    pub rhs: Vec<f64>,
    pub dofmap: DofMap,
    pub layout: SystemLayout,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Length of the leading potential block.
    pub fn phi_len(&self) -> usize {
        match self.layout {
            SystemLayout::PhiOnly => self.matrix.nrows(),
            SystemLayout::PhiLambdaW { n_phi, .. } => n_phi,
        }
    }

    /// The full operator, sparse part plus rank-one coupling.
    pub fn operator(&self) -> LinearOperator<'_> {
        LinearOperator {
            sparse: &self.matrix,
            rank_one: self
                .rank_one
                .as_ref()
                .map(|(u, v)| (u.as_slice(), v.as_slice())),
        }
    }

    /// Dense-pattern merge of the rank-one part into the sparse matrix, for
    /// diagnostics (symmetry/SPD checks, MatrixMarket dumps).
    pub fn operator_csr(&self) -> CsrMatrix {
        self.operator().to_csr()
    }

    /// Symmetric Dirichlet elimination over the potential block, including
    /// the rank-one vectors. Idempotent.
    pub fn apply_dirichlet(&mut self) -> Result<(), AssemblyError> {
        if let Some((u, v)) = self.rank_one.as_mut() {
            // fold the known boundary values of the rank-one coupling into
            // the rhs, then cut those rows/columns out of u and v
            let folded: f64 = v
                .iter()
                .enumerate()
                .filter_map(|(j, vj)| self.dofmap.dirichlet_value(j).map(|g| vj * g))
                .sum();
            if folded != 0.0 {
                for (i, ui) in u.iter().enumerate() {
                    if !self.dofmap.is_dirichlet(i) {
                        self.rhs[i] -= ui * folded;
                    }
                }
            }
            for i in 0..u.len() {
                if self.dofmap.is_dirichlet(i) {
                    u[i] = 0.0;
                    v[i] = 0.0;
                }
            }
        }
        eliminate_dirichlet(&mut self.matrix, &mut self.rhs, &self.dofmap)
    }
}

/// Penalized formulation with the nonlocal term kept as a rank-one pair:
/// sparse = stiffness + (1/ε)·M_Γ1, rank_one = (−(1/ε)·c, R/(R·S_σ+ε)·s),
/// rhs = load + V/(R·S_σ+ε)·c, then Dirichlet elimination. Here c and s are
/// the Γ1 functionals of 1 and σ, and S_σ = ∫_{Γ1} σ.
pub fn build_nitsche_system(
    spec: &ProblemSpec,
    mesh: &Mesh,
    eps: f64,
) -> Result<AssembledSystem, BuildError> {
    let quad = QuadratureRules::default();
    spec.validate(mesh, &quad)?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(BuildError::BadEpsilon(eps));
    }
    let stiffness = assemble_stiffness(mesh)?;
    let mass = assemble_gamma1_mass(mesh, None, &quad);
    let matrix = stiffness
        .add_scaled(1.0 / eps, &mass)
        .expect("stiffness and boundary mass share dimensions");
    let c = assemble_gamma1_vector(mesh, |_| 1.0, &quad);
    let s = assemble_gamma1_vector(mesh, &*spec.sigma, &quad);
    let s_sigma: f64 = s.iter().sum();
    let denom = spec.resistance * s_sigma + eps;
    let u: Vec<f64> = c.iter().map(|ci| -ci / eps).collect();
    let v: Vec<f64> = s.iter().map(|si| spec.resistance / denom * si).collect();
    let mut rhs = assemble_load(mesh, &*spec.f, &quad);
    // (1/ε)(V − R·S_σ·V/(R·S_σ+ε)) collapses to V/(R·S_σ+ε): no cancellation
    let boundary_coef = spec.voltage / denom;
    for (r, ci) in rhs.iter_mut().zip(&c) {
        *r += boundary_coef * ci;
    }
    let mut system = AssembledSystem {
        matrix,
        rank_one: Some((u, v)),
        rhs,
        dofmap: DofMap::new(mesh, &*spec.phi_d),
        layout: SystemLayout::PhiOnly,
    };
    system.apply_dirichlet()?;
    Ok(system)
}

/// Bordered variant of the penalized formulation: the boundary integral
/// w = ∫_{Γ1} σΦ stays as one extra unknown with constraint row
/// |Γ1|·w − |Γ1|·sᵀΦ = 0, and the Φ rows carry the w-column
/// −(1/ε)·R/(R·S_σ+ε)·c. Eliminating w reproduces `build_nitsche_system`.
pub fn build_nitsche_bordered(
    spec: &ProblemSpec,
    mesh: &Mesh,
    eps: f64,
) -> Result<AssembledSystem, BuildError> {
    let quad = QuadratureRules::default();
    spec.validate(mesh, &quad)?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(BuildError::BadEpsilon(eps));
    }
    let n = mesh.vertices.len();
    let stiffness = assemble_stiffness(mesh)?;
    let mass = assemble_gamma1_mass(mesh, None, &quad);
    let phi_block = stiffness
        .add_scaled(1.0 / eps, &mass)
        .expect("matching dimensions");
    let c = assemble_gamma1_vector(mesh, |_| 1.0, &quad);
    let s = assemble_gamma1_vector(mesh, &*spec.sigma, &quad);
    let s_sigma: f64 = s.iter().sum();
    let denom = spec.resistance * s_sigma + eps;
    let gamma_len = mesh.gamma1_length();

    let mut builder = CooBuilder::new(n + 1, n + 1);
    for i in 0..n {
        let (cols, vals) = phi_block.row(i);
        for (cc, vv) in cols.iter().zip(vals) {
            builder.push(i, *cc, *vv);
        }
        if c[i] != 0.0 {
            builder.push(i, n, -(1.0 / eps) * (spec.resistance / denom) * c[i]);
        }
    }
    for (j, sj) in s.iter().enumerate() {
        if *sj != 0.0 {
            builder.push(n, j, -gamma_len * sj);
        }
    }
    builder.push(n, n, gamma_len);

    let mut rhs = assemble_load(mesh, &*spec.f, &quad);
    let boundary_coef = spec.voltage / denom;
    for (r, ci) in rhs.iter_mut().zip(&c) {
        *r += boundary_coef * ci;
    }
    rhs.push(0.0);

    let mut system = AssembledSystem {
        matrix: builder.build(),
        rank_one: None,
        rhs,
        dofmap: DofMap::new(mesh, &*spec.phi_d),
        layout: SystemLayout::PhiLambdaW {
            n_phi: n,
            n_lambda: 0,
        },
    };
    system.apply_dirichlet()?;
    Ok(system)
}

/// Saddle-point Lagrange system over [Φ; λ; w] with λ the P1 multiplier on
/// the Γ1 vertices and w the scalar current unknown. Block structure:
///
/// * Φ rows:  K·Φ + M·λ = F          (λ carries the boundary flux weakly)
/// * λ rows:  M·Φ + R·c·w = V·c      (trace condition with the resistive drop)
/// * w row:   |Γ1|·w − |Γ1|·gᵀΦ = 0  (w is the flux integral of the discrete
///   solution, reconstructed from the owner triangles)
///
/// The w row is the plain current definition and deliberately carries no
/// multiplier term, which keeps every block equation consistent with the
/// continuous solution; the resulting system is unsymmetric.
pub fn build_lagrange_system(
    spec: &ProblemSpec,
    mesh: &Mesh,
) -> Result<AssembledSystem, BuildError> {
    let quad = QuadratureRules::default();
    spec.validate(mesh, &quad)?;
    let n = mesh.vertices.len();
    let gamma1 = mesh.gamma1_vertices();
    let m = gamma1.len();
    let dim = n + m + 1;
    let w_idx = n + m;
    let mut lambda_pos = vec![usize::MAX; n];
    for (k, &vtx) in gamma1.iter().enumerate() {
        lambda_pos[vtx] = n + k;
    }

    let stiffness = assemble_stiffness(mesh)?;
    let mass = assemble_gamma1_mass(mesh, None, &quad);
    let c = assemble_gamma1_vector(mesh, |_| 1.0, &quad);
    let g = assemble_normal_derivative_vector(mesh, &*spec.sigma, &quad)?;
    let gamma_len = mesh.gamma1_length();

    let mut builder = CooBuilder::new(dim, dim);
    for i in 0..n {
        let (cols, vals) = stiffness.row(i);
        for (cc, vv) in cols.iter().zip(vals) {
            builder.push(i, *cc, *vv);
        }
    }
    // multiplier coupling ∫_{Γ1} λ v₁ and its transpose ∫_{Γ1} Φ v₂
    for i in 0..n {
        let (cols, vals) = mass.row(i);
        for (cc, vv) in cols.iter().zip(vals) {
            builder.push(i, lambda_pos[*cc], *vv);
            builder.push(lambda_pos[*cc], i, *vv);
        }
    }
    for &vtx in &gamma1 {
        builder.push(lambda_pos[vtx], w_idx, spec.resistance * c[vtx]);
    }
    for (j, gj) in g.iter().enumerate() {
        if *gj != 0.0 {
            builder.push(w_idx, j, -gamma_len * gj);
        }
    }
    builder.push(w_idx, w_idx, gamma_len);

    let mut rhs = assemble_load(mesh, &*spec.f, &quad);
    rhs.resize(dim, 0.0);
    for &vtx in &gamma1 {
        rhs[lambda_pos[vtx]] = spec.voltage * c[vtx];
    }

    let mut system = AssembledSystem {
        matrix: builder.build(),
        rank_one: None,
        rhs,
        dofmap: DofMap::new(mesh, &*spec.phi_d),
        layout: SystemLayout::PhiLambdaW {
            n_phi: n,
            n_lambda: m,
        },
    };
    system.apply_dirichlet()?;
    Ok(system)
}

/// Discrete contact current recovered from a penalized solution:
/// I_h = (V·S_σ − ∫_{Γ1} σΦ_h)/(R·S_σ + ε).
pub fn reconstruct_current(phi: &[f64], spec: &ProblemSpec, mesh: &Mesh, eps: f64) -> f64 {
    let quad = QuadratureRules::default();
    let s = assemble_gamma1_vector(mesh, &*spec.sigma, &quad);
    let s_sigma: f64 = s.iter().sum();
    let flux: f64 = s.iter().zip(phi).map(|(si, p)| si * p).sum();
    (spec.voltage * s_sigma - flux) / (spec.resistance * s_sigma + eps)
}

/// Integral mean of a potential over Γ1: (∫_{Γ1} Φ_h)/|Γ1|.
pub fn gamma1_mean(phi: &[f64], mesh: &Mesh) -> f64 {
    let quad = QuadratureRules::default();
    let c = assemble_gamma1_vector(mesh, |_| 1.0, &quad);
    let integral: f64 = c.iter().zip(phi).map(|(ci, p)| ci * p).sum();
    integral / mesh.gamma1_length()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Diagonal;

    fn toy_problem() -> ProblemSpec {
        ProblemSpec::new(
            |x, y| -4.0 * x * y + 2.0 * x,
            |_| 1.0,
            1.0,
            1.0,
            |y| 2.0 / 3.0 * y.powi(3) - y * y + 5.0 / 6.0,
            1.0,
        )
    }

    #[test]
    fn nitsche_rank_one_is_symmetric_for_constant_sigma() {
        let mesh = Mesh::square(4, 1.0, Diagonal::Right).unwrap();
        let sys = build_nitsche_system(&toy_problem(), &mesh, 1e-9).unwrap();
        let (u, v) = sys.rank_one.as_ref().unwrap();
        // σ ≡ 1 makes u and v parallel, so u·vᵀ is symmetric
        let full = sys.operator_csr();
        let defect = full.symmetry_defect() / full.max_abs();
        assert!(defect < 1e-14, "relative defect {defect}");
        // and both vectors vanish off Γ1 and on the Dirichlet side
        for (i, p) in mesh.vertices.iter().enumerate() {
            if p[0] != 0.0 {
                assert_eq!(u[i], 0.0);
                assert_eq!(v[i], 0.0);
            }
        }
    }

    #[test]
    fn nitsche_dirichlet_rows_are_identity() {
        let mesh = Mesh::square(3, 1.0, Diagonal::Right).unwrap();
        let spec = toy_problem();
        let sys = build_nitsche_system(&spec, &mesh, 1e-6).unwrap();
        for vtx in mesh.gamma3_vertices() {
            let (cols, vals) = sys.matrix.row(vtx);
            for (c, v) in cols.iter().zip(vals) {
                let want = if *c == vtx { 1.0 } else { 0.0 };
                assert_eq!(*v, want);
            }
            let y = mesh.vertices[vtx][1];
            assert!((sys.rhs[vtx] - (spec.phi_d)(y)).abs() < 1e-15);
        }
    }

    #[test]
    fn builders_validate_inputs() {
        let mesh = Mesh::square(2, 1.0, Diagonal::Right).unwrap();
        let spec = toy_problem();
        assert!(matches!(
            build_nitsche_system(&spec, &mesh, 0.0),
            Err(BuildError::BadEpsilon(_))
        ));
        assert!(matches!(
            build_nitsche_system(&spec, &mesh, -1e-9),
            Err(BuildError::BadEpsilon(_))
        ));
        let mut negative_r = toy_problem();
        negative_r.resistance = -1.0;
        assert!(matches!(
            build_lagrange_system(&negative_r, &mesh),
            Err(BuildError::BadResistance(_))
        ));
        let bad_sigma = ProblemSpec::new(|_, _| 0.0, |y| 0.5 - y, 1.0, 1.0, |_| 0.0, 1.0);
        assert!(matches!(
            build_nitsche_system(&bad_sigma, &mesh, 1e-9),
            Err(BuildError::NonPositiveSigma { .. })
        ));
        let wrong_side = ProblemSpec::new(|_, _| 0.0, |_| 1.0, 1.0, 1.0, |_| 0.0, 2.0);
        assert!(matches!(
            build_nitsche_bordered(&wrong_side, &mesh, 1e-9),
            Err(BuildError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn lagrange_layout_and_blocks() {
        let mesh = Mesh::square(2, 1.0, Diagonal::Right).unwrap();
        let sys = build_lagrange_system(&toy_problem(), &mesh).unwrap();
        let n = mesh.vertices.len();
        assert_eq!(
            sys.layout,
            SystemLayout::PhiLambdaW {
                n_phi: n,
                n_lambda: 3
            }
        );
        assert_eq!(sys.dim(), n + 3 + 1);
        // λ-λ block is zero: multipliers never couple to themselves
        for k in 0..3 {
            for l in 0..3 {
                assert_eq!(sys.matrix.get(n + k, n + l), 0.0);
            }
        }
        // w row carries |Γ1| on its diagonal
        assert_eq!(sys.matrix.get(n + 3, n + 3), 1.0);
        // Φ rows have no w column
        for i in 0..n {
            assert_eq!(sys.matrix.get(i, n + 3), 0.0);
        }
    }

    #[test]
    fn bordered_layout() {
        let mesh = Mesh::square(2, 1.0, Diagonal::Right).unwrap();
        let sys = build_nitsche_bordered(&toy_problem(), &mesh, 1e-9).unwrap();
        let n = mesh.vertices.len();
        assert_eq!(
            sys.layout,
            SystemLayout::PhiLambdaW {
                n_phi: n,
                n_lambda: 0
            }
        );
        assert_eq!(sys.dim(), n + 1);
        assert!(sys.rank_one.is_none());
        assert_eq!(sys.matrix.get(n, n), 1.0);
    }
}

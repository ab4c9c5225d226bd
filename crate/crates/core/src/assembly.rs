//! P1 finite element assembly on triangle meshes: stiffness and load,
//! the Γ1 boundary functionals used by the integral boundary condition,
//! and symmetric Dirichlet elimination.
//!
//! Basis gradients on a triangle with corners p0,p1,p2 are ∇φ_k = (b_k, c_k)/(2A)
//! with b_k = y_{k+1}−y_{k+2}, c_k = x_{k+2}−x_{k+1} (indices mod 3), so the
//! element stiffness is K_ij = (b_i b_j + c_i c_j)/(4A).

use thiserror::Error;

use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::QuadratureRules;
use crate::sparse::{CooBuilder, CsrMatrix};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("degenerate triangle {index:?}: area {area:.3e}")]
    DegenerateTriangle { index: Option<usize>, area: f64 },
    #[error("matrix row {0} has no stored diagonal to pin a Dirichlet value to")]
    MissingDiagonal(usize),
}

/// 3x3 stiffness block ∫_K ∇φ_i·∇φ_j for one triangle.
pub fn element_stiffness(coords: &[[f64; 2]; 3]) -> Result<[[f64; 3]; 3], AssemblyError> {
    let (b, c, area) = basis_gradients(coords, None)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    Ok(k)
}

/// Unscaled gradient coefficients (b, c) and the positive triangle area;
/// ∇φ_k = (b_k, c_k)/(2·area).
fn basis_gradients(
    coords: &[[f64; 2]; 3],
    index: Option<usize>,
) -> Result<([f64; 3], [f64; 3], f64), AssemblyError> {
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for k in 0..3 {
        let p1 = coords[(k + 1) % 3];
        let p2 = coords[(k + 2) % 3];
        b[k] = p1[1] - p2[1];
        c[k] = p2[0] - p1[0];
    }
    let twice_area = coords[1][0] * coords[2][1] - coords[2][0] * coords[1][1]
        + coords[0][0] * (coords[1][1] - coords[2][1])
        + coords[0][1] * (coords[2][0] - coords[1][0]);
    let scale = coords
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let area = twice_area.abs() / 2.0;
    if area < 1e-14 * scale * scale {
        return Err(AssemblyError::DegenerateTriangle { index, area });
    }
    Ok((b, c, area))
}

/// Global stiffness matrix ∫_Ω ∇Φ·∇v (no boundary terms).
pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix, AssemblyError> {
    let n = mesh.vertices.len();
    let mut builder = CooBuilder::new(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let coords = mesh.triangle_coords(t);
        let k = element_stiffness(&coords).map_err(|e| match e {
            AssemblyError::DegenerateTriangle { area, .. } => AssemblyError::DegenerateTriangle {
                index: Some(t),
                area,
            },
            other => other,
        })?;
        for i in 0..3 {
            for j in 0..3 {
                builder.push(tri[i], tri[j], k[i][j]);
            }
        }
    }
    Ok(builder.build())
}

/// Load vector ∫_Ω f φ_i.
pub fn assemble_load(
    mesh: &Mesh,
    f: impl Fn(f64, f64) -> f64,
    quad: &QuadratureRules,
) -> Vec<f64> {
    let mut load = vec![0.0; mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let coords = mesh.triangle_coords(t);
        let two_area = 2.0 * mesh.triangle_area(t);
        for (p, w) in quad.triangle.points.iter().zip(&quad.triangle.weights) {
            let x = p[0] * coords[0][0] + p[1] * coords[1][0] + p[2] * coords[2][0];
            let y = p[0] * coords[0][1] + p[1] * coords[1][1] + p[2] * coords[2][1];
            let fv = f(x, y) * w * two_area;
            for k in 0..3 {
                load[tri[k]] += fv * p[k];
            }
        }
    }
    load
}

/// Boundary mass matrix on Γ1: ∫_{Γ1} w φ_i φ_j (w ≡ 1 when no weight is
/// given). Full vertex dimension; rows and columns are nonzero only for Γ1
/// vertices. Fields on Γ1 are functions of y.
pub fn assemble_gamma1_mass(
    mesh: &Mesh,
    weight: Option<&dyn Fn(f64) -> f64>,
    quad: &QuadratureRules,
) -> CsrMatrix {
    let n = mesh.vertices.len();
    let mut builder = CooBuilder::new(n, n);
    for edge in mesh.edges_on(BoundaryTag::Gamma1) {
        let [a, b] = edge.vertices;
        let (ya, yb) = (mesh.vertices[a][1], mesh.vertices[b][1]);
        let mut block = [[0.0; 2]; 2];
        for (t, w) in quad.edge.points.iter().zip(&quad.edge.weights) {
            let y = ya + t * (yb - ya);
            let wv = weight.map_or(1.0, |f| f(y)) * w * edge.length;
            let phi = [1.0 - t, *t];
            for p in 0..2 {
                for q in 0..2 {
                    block[p][q] += wv * phi[p] * phi[q];
                }
            }
        }
        let idx = [a, b];
        for p in 0..2 {
            for q in 0..2 {
                builder.push(idx[p], idx[q], block[p][q]);
            }
        }
    }
    builder.build()
}

/// Boundary functional vector on Γ1: entry i is ∫_{Γ1} w φ_i.
pub fn assemble_gamma1_vector(
    mesh: &Mesh,
    w: impl Fn(f64) -> f64,
    quad: &QuadratureRules,
) -> Vec<f64> {
    let mut vec = vec![0.0; mesh.vertices.len()];
    for edge in mesh.edges_on(BoundaryTag::Gamma1) {
        let [a, b] = edge.vertices;
        let (ya, yb) = (mesh.vertices[a][1], mesh.vertices[b][1]);
        for (t, wq) in quad.edge.points.iter().zip(&quad.edge.weights) {
            let y = ya + t * (yb - ya);
            let wv = w(y) * wq * edge.length;
            vec[a] += wv * (1.0 - t);
            vec[b] += wv * t;
        }
    }
    vec
}

/// Discrete normal-flux functional: g with gᵀΦ = ∫_{Γ1} σ ∂Φ_h/∂n, where the
/// (elementwise constant) normal derivative comes from each edge's owner
/// triangle and n is the outward normal.
pub fn assemble_normal_derivative_vector(
    mesh: &Mesh,
    sigma: impl Fn(f64) -> f64,
    quad: &QuadratureRules,
) -> Result<Vec<f64>, AssemblyError> {
    let mut g = vec![0.0; mesh.vertices.len()];
    for edge in mesh.edges_on(BoundaryTag::Gamma1) {
        let tri = mesh.triangles[edge.owner_triangle];
        let coords = mesh.triangle_coords(edge.owner_triangle);
        let (b, c, area) = basis_gradients(&coords, Some(edge.owner_triangle))?;
        let [a, bb] = edge.vertices;
        let (ya, yb) = (mesh.vertices[a][1], mesh.vertices[bb][1]);
        let mut sigma_int = 0.0;
        for (t, wq) in quad.edge.points.iter().zip(&quad.edge.weights) {
            sigma_int += sigma(ya + t * (yb - ya)) * wq * edge.length;
        }
        let n = edge.outward_normal;
        for k in 0..3 {
            let dn = (b[k] * n[0] + c[k] * n[1]) / (2.0 * area);
            g[tri[k]] += dn * sigma_int;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofStatus {
    Free,
    Dirichlet(f64),
}

/// Per-vertex constraint status. For bordered systems whose unknown vector is
/// longer than the vertex count, indices past the vertex block are always free.
#[derive(Debug, Clone)]
pub struct DofMap {
    status: Vec<DofStatus>,
}

impl DofMap {
    /// Marks Γ3 vertices as Dirichlet with values Φ_D(y).
    pub fn new(mesh: &Mesh, phi_d: impl Fn(f64) -> f64) -> Self {
        let mut status = vec![DofStatus::Free; mesh.vertices.len()];
        for v in mesh.gamma3_vertices() {
            status[v] = DofStatus::Dirichlet(phi_d(mesh.vertices[v][1]));
        }
        Self { status }
    }

    pub fn from_status(status: Vec<DofStatus>) -> Self {
        Self { status }
    }

    pub fn n_vertices(&self) -> usize {
        self.status.len()
    }

    pub fn is_dirichlet(&self, i: usize) -> bool {
        matches!(self.status.get(i), Some(DofStatus::Dirichlet(_)))
    }

    pub fn dirichlet_value(&self, i: usize) -> Option<f64> {
        match self.status.get(i) {
            Some(DofStatus::Dirichlet(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn free_count(&self) -> usize {
        self.status
            .iter()
            .filter(|s| matches!(s, DofStatus::Free))
            .count()
    }

    pub fn dirichlet_count(&self) -> usize {
        self.status.len() - self.free_count()
    }
}

/// Symmetric Dirichlet elimination in place: constrained rows become identity
/// rows with the boundary value on the right-hand side, constrained columns
/// are folded into the right-hand side and zeroed (pattern kept). The matrix
/// may be larger than the dof map; extra indices are unconstrained.
pub fn eliminate_dirichlet(
    matrix: &mut CsrMatrix,
    rhs: &mut [f64],
    dofmap: &DofMap,
) -> Result<(), AssemblyError> {
    let n = matrix.nrows();
    assert_eq!(rhs.len(), n, "rhs length must match the matrix");
    // fold constrained columns into the rhs of free rows
    for i in 0..n {
        if dofmap.is_dirichlet(i) {
            continue;
        }
        let row: Vec<(usize, f64)> = {
            let (cols, vals) = matrix.row(i);
            cols.iter()
                .zip(vals)
                .filter_map(|(c, v)| dofmap.dirichlet_value(*c).map(|g| (*c, v * g)))
                .collect()
        };
        for (c, contrib) in row {
            rhs[i] -= contrib;
            *matrix.get_mut(i, c).expect("entry just read") = 0.0;
        }
    }
    // replace constrained rows by identity rows
    for i in 0..n {
        let Some(g) = dofmap.dirichlet_value(i) else {
            continue;
        };
        let cols: Vec<usize> = matrix.row(i).0.to_vec();
        if !cols.contains(&i) {
            return Err(AssemblyError::MissingDiagonal(i));
        }
        for c in cols {
            *matrix.get_mut(i, c).unwrap() = if c == i { 1.0 } else { 0.0 };
        }
        rhs[i] = g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Diagonal;

    const UNIT_RIGHT: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn quad() -> QuadratureRules {
        QuadratureRules::default()
    }

    #[test]
    fn element_stiffness_unit_right_triangle() {
        let k = element_stiffness(&UNIT_RIGHT).unwrap();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - want[i][j]).abs() < 1e-15, "K[{i}][{j}]");
            }
        }
    }

    #[test]
    fn element_stiffness_scale_and_translation_invariant() {
        let base = element_stiffness(&UNIT_RIGHT).unwrap();
        for h in [0.1, 0.7, 3.0] {
            for shift in [[0.0, 0.0], [2.5, -1.25]] {
                let coords = [
                    [shift[0], shift[1]],
                    [shift[0] + h, shift[1]],
                    [shift[0], shift[1] + h],
                ];
                let k = element_stiffness(&coords).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        assert!((k[i][j] - base[i][j]).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn element_stiffness_rejects_degenerate() {
        let flat = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(
            element_stiffness(&flat),
            Err(AssemblyError::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_energy_of_linear_field() {
        for diag in [Diagonal::Right, Diagonal::Left] {
            let mesh = Mesh::square(3, 1.0, diag).unwrap();
            let a = assemble_stiffness(&mesh).unwrap();
            let ones = vec![1.0; mesh.vertices.len()];
            for r in a.mul_vec(&ones) {
                assert!(r.abs() < 1e-13, "constants in the kernel");
            }
            // Φ = x is reproduced exactly by P1, and ∫|∇x|² = 1
            let phi: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
            let energy: f64 = a
                .mul_vec(&phi)
                .iter()
                .zip(&phi)
                .map(|(ap, p)| ap * p)
                .sum();
            assert!((energy - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn load_of_unit_f_is_vertex_areas() {
        let mesh = Mesh::square(1, 1.0, Diagonal::Right).unwrap();
        let load = assemble_load(&mesh, |_, _| 1.0, &quad());
        let want = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        for (got, want) in load.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        let total: f64 = load.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma1_mass_single_edge_block() {
        let mesh = Mesh::square(1, 1.0, Diagonal::Right).unwrap();
        let m = assemble_gamma1_mass(&mesh, None, &quad());
        // one edge of length 1 between vertices 0 and 2: ℓ/6·[[2,1],[1,2]]
        assert!((m.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.get(0, 2) - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.get(2, 0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.get(2, 2) - 1.0 / 3.0).abs() < 1e-15);
        // nothing off Γ1
        assert!(m.get(1, 1) == 0.0 && m.get(3, 3) == 0.0 && m.get(0, 1) == 0.0);
    }

    #[test]
    fn gamma1_vector_partitions_boundary_length() {
        let mesh = Mesh::square(10, 1.0, Diagonal::Right).unwrap();
        let c = assemble_gamma1_vector(&mesh, |_| 1.0, &quad());
        let h = mesh.h();
        for (i, v) in c.iter().enumerate() {
            let p = mesh.vertices[i];
            if p[0] != 0.0 {
                assert_eq!(*v, 0.0);
            } else if p[1] == 0.0 || p[1] == 1.0 {
                assert!((v - h / 2.0).abs() < 1e-15);
            } else {
                assert!((v - h).abs() < 1e-14);
            }
        }
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gamma1_vector_weighted_total() {
        let mesh = Mesh::square(8, 1.0, Diagonal::Right).unwrap();
        let s = assemble_gamma1_vector(&mesh, |y| y + 1.0, &quad());
        // ∫_0^1 (y+1) dy = 3/2, exactly integrated by the edge rule
        assert!((s.iter().sum::<f64>() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn gamma1_vector_consistent_with_weighted_mass() {
        let mesh = Mesh::square(4, 1.0, Diagonal::Right).unwrap();
        let w = |y: f64| 1.0 + 0.5 * y * y;
        let vec = assemble_gamma1_vector(&mesh, w, &quad());
        let mass = assemble_gamma1_mass(&mesh, Some(&w), &quad());
        let ones = vec![1.0; mesh.vertices.len()];
        let via_mass = mass.mul_vec(&ones);
        for (a, b) in vec.iter().zip(&via_mass) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn normal_derivative_of_linear_field_is_exact() {
        for diag in [Diagonal::Right, Diagonal::Left] {
            for n in [1usize, 4, 9] {
                let mesh = Mesh::square(n, 1.0, diag).unwrap();
                let g = assemble_normal_derivative_vector(&mesh, |_| 1.0, &quad()).unwrap();
                // Φ_h = x has ∂Φ/∂n = -1 on Γ1, so gᵀΦ = -|Γ1| = -1
                let phi: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
                let flux: f64 = g.iter().zip(&phi).map(|(gi, p)| gi * p).sum();
                assert!((flux + 1.0).abs() < 1e-12, "n={n}, {diag:?}");
            }
        }
    }

    #[test]
    fn dof_map_marks_gamma3() {
        let mesh = Mesh::square(3, 1.0, Diagonal::Right).unwrap();
        let dm = DofMap::new(&mesh, |y| 2.0 * y);
        assert_eq!(dm.dirichlet_count(), 4);
        for v in mesh.gamma3_vertices() {
            assert!(dm.is_dirichlet(v));
            let y = mesh.vertices[v][1];
            assert_eq!(dm.dirichlet_value(v), Some(2.0 * y));
        }
        assert!(!dm.is_dirichlet(0));
        // indices past the vertex block are never constrained
        assert!(!dm.is_dirichlet(mesh.vertices.len() + 5));
    }

    #[test]
    fn eliminate_dirichlet_small_system() {
        // [[2,1],[1,3]] with x1 fixed to 2: row 0 becomes 2 x0 = b0 - 2
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 0, 2.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        b.push(1, 1, 3.0);
        let mut m = b.build();
        let mut rhs = vec![5.0, 7.0];
        let dm = DofMap::from_status(vec![DofStatus::Free, DofStatus::Dirichlet(2.0)]);
        eliminate_dirichlet(&mut m, &mut rhs, &dm).unwrap();
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(rhs, vec![3.0, 2.0]);
        assert_eq!(m.symmetry_defect(), 0.0);
    }

    #[test]
    fn all_dirichlet_yields_interpolant() {
        let mesh = Mesh::square(1, 1.0, Diagonal::Right).unwrap();
        let mut m = assemble_stiffness(&mesh).unwrap();
        let mut rhs = vec![0.0; 4];
        let status: Vec<DofStatus> = mesh
            .vertices
            .iter()
            .map(|p| DofStatus::Dirichlet(p[0] + 10.0 * p[1]))
            .collect();
        let dm = DofMap::from_status(status);
        eliminate_dirichlet(&mut m, &mut rhs, &dm).unwrap();
        for (i, p) in mesh.vertices.iter().enumerate() {
            assert_eq!(m.get(i, i), 1.0);
            assert_eq!(rhs[i], p[0] + 10.0 * p[1]);
        }
    }
}

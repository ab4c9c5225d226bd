//! Shared fixtures for the integration suites: an independent quadrature
//! oracle (conical-product Gauss on subdivided triangles, composite Gauss on
//! segments) and dense reference assemblies. The oracle shares mesh
//! *topology* with the library but none of its quadrature or basis code —
//! hat functions are recovered by solving the 3×3 Vandermonde system per
//! element instead of through the closed-form gradients the assembly uses.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use ibc_fem::assembly::DofMap;
use ibc_fem::bc_methods::{
    build_lagrange_system, build_nitsche_system, reconstruct_current, AssembledSystem,
};
use ibc_fem::mesh::BoundaryTag;
use ibc_fem::solvers::{direct_solve, SolveStats};
use ibc_fem::{CsrMatrix, Mesh, ProblemSpec};

/// 5-point Gauss–Legendre nodes and weights on (0,1).
pub const GL5: [(f64, f64); 5] = [
    (0.046910077030668, 0.118463442528095),
    (0.230765344947158, 0.239314335249683),
    (0.5, 0.284444444444444),
    (0.769234655052842, 0.239314335249683),
    (0.953089922969332, 0.118463442528095),
];

/// ∫_T f over one triangle by the conical-product (Duffy) 5×5 rule.
fn duffy(coords: &[[f64; 2]; 3], f: &dyn Fn(f64, f64) -> f64) -> f64 {
    let jac = ((coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
        - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]))
        .abs();
    let mut total = 0.0;
    for (xi, wx) in GL5 {
        for (eta, we) in GL5 {
            let lam = [1.0 - xi, xi * (1.0 - eta), xi * eta];
            let x = lam[0] * coords[0][0] + lam[1] * coords[1][0] + lam[2] * coords[2][0];
            let y = lam[0] * coords[0][1] + lam[1] * coords[1][1] + lam[2] * coords[2][1];
            total += wx * we * xi * jac * f(x, y);
        }
    }
    total
}

/// ∫_T f with two levels of midpoint subdivision under the Duffy rule, so
/// trigonometric integrands on coarse test meshes still come out well below
/// the comparison tolerances.
pub fn tri_integral(coords: &[[f64; 2]; 3], f: &dyn Fn(f64, f64) -> f64) -> f64 {
    fn split(coords: &[[f64; 2]; 3], level: usize, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        if level == 0 {
            return duffy(coords, f);
        }
        let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let [p0, p1, p2] = *coords;
        let (m01, m12, m20) = (mid(p0, p1), mid(p1, p2), mid(p2, p0));
        split(&[p0, m01, m20], level - 1, f)
            + split(&[m01, p1, m12], level - 1, f)
            + split(&[m20, m12, p2], level - 1, f)
            + split(&[m01, m12, m20], level - 1, f)
    }
    split(coords, 2, f)
}

/// ∫ over the segment a→b of g(t), t the normalized arclength parameter,
/// by 64-panel composite 5-point Gauss.
pub fn edge_integral_param(a: [f64; 2], b: [f64; 2], g: &dyn Fn(f64) -> f64) -> f64 {
    const PANELS: usize = 64;
    let length = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for k in 0..PANELS {
        let t0 = k as f64 / PANELS as f64;
        for (t, w) in GL5 {
            total += w * g(t0 + t / PANELS as f64);
        }
    }
    total * length / PANELS as f64
}

/// ∫ over the segment a→b of f(x,y).
pub fn edge_integral(a: [f64; 2], b: [f64; 2], f: &dyn Fn(f64, f64) -> f64) -> f64 {
    edge_integral_param(a, b, &|t| {
        f(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
    })
}

/// Coefficients (α, β, γ) of hat function k on a triangle, i.e. the affine
/// function α + βx + γy that is 1 at vertex k and 0 at the others, found by
/// Gaussian elimination on the Vandermonde system.
fn p1_coeffs(coords: &[[f64; 2]; 3], k: usize) -> [f64; 3] {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][0] = 1.0;
        m[i][1] = coords[i][0];
        m[i][2] = coords[i][1];
        m[i][3] = if i == k { 1.0 } else { 0.0 };
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for c in col..4 {
                m[row][c] -= factor * m[col][c];
            }
        }
    }
    let mut sol = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut v = m[row][3];
        for c in row + 1..3 {
            v -= m[row][c] * sol[c];
        }
        sol[row] = v / m[row][row];
    }
    sol
}

pub fn hat_value(coords: &[[f64; 2]; 3], k: usize, x: f64, y: f64) -> f64 {
    let [a, b, c] = p1_coeffs(coords, k);
    a + b * x + c * y
}

pub fn hat_gradient(coords: &[[f64; 2]; 3], k: usize) -> [f64; 2] {
    let [_, b, c] = p1_coeffs(coords, k);
    [b, c]
}

fn triangle_coords(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let tri = mesh.triangles[t];
    [
        mesh.vertices[tri[0]],
        mesh.vertices[tri[1]],
        mesh.vertices[tri[2]],
    ]
}

/// Dense reference stiffness: ∫_Ω ∇φ_i·∇φ_j assembled element by element
/// through the oracle quadrature.
pub fn oracle_stiffness(mesh: &Mesh) -> Vec<Vec<f64>> {
    let n = mesh.vertices.len();
    let mut a = vec![vec![0.0; n]; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let coords = triangle_coords(mesh, t);
        for p in 0..3 {
            let gp = hat_gradient(&coords, p);
            for q in 0..3 {
                let gq = hat_gradient(&coords, q);
                let dot = gp[0] * gq[0] + gp[1] * gq[1];
                a[tri[p]][tri[q]] += tri_integral(&coords, &|_, _| dot);
            }
        }
    }
    a
}

/// Dense reference load vector ∫_Ω f φ_i.
pub fn oracle_load(mesh: &Mesh, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = mesh.vertices.len();
    let mut load = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let coords = triangle_coords(mesh, t);
        for p in 0..3 {
            load[tri[p]] += tri_integral(&coords, &|x, y| f(x, y) * hat_value(&coords, p, x, y));
        }
    }
    load
}

/// Dense reference contact-side mass ∫_{Γ1} w φ_i φ_j (w ≡ 1 without a
/// weight). Hats restricted to a boundary edge are 1−t and t.
pub fn oracle_gamma1_mass(mesh: &Mesh, weight: Option<&dyn Fn(f64) -> f64>) -> Vec<Vec<f64>> {
    let n = mesh.vertices.len();
    let mut m = vec![vec![0.0; n]; n];
    for edge in mesh.edges_on(BoundaryTag::Gamma1) {
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let trace = [
            |t: f64| 1.0 - t,
            |t: f64| t,
        ];
        for p in 0..2 {
            for q in 0..2 {
                let val = edge_integral_param(pa, pb, &|t| {
                    let y = pa[1] + t * (pb[1] - pa[1]);
                    weight.map_or(1.0, |w| w(y)) * trace[p](t) * trace[q](t)
                });
                let idx = [a, b];
                m[idx[p]][idx[q]] += val;
            }
        }
    }
    m
}

/// Dense reference functional ∫_{Γ1} w φ_i.
pub fn oracle_gamma1_vector(mesh: &Mesh, w: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let n = mesh.vertices.len();
    let mut v = vec![0.0; n];
    for edge in mesh.edges_on(BoundaryTag::Gamma1) {
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        v[a] += edge_integral_param(pa, pb, &|t| w(pa[1] + t * (pb[1] - pa[1])) * (1.0 - t));
        v[b] += edge_integral_param(pa, pb, &|t| w(pa[1] + t * (pb[1] - pa[1])) * t);
    }
    v
}

/// Dense reference normal-flux functional: entry j accumulates, per contact
/// edge, (∇φ_j·n over the owner triangle)·∫_edge σ.
pub fn oracle_normal_flux_vector(mesh: &Mesh, sigma: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let n = mesh.vertices.len();
    let mut g = vec![0.0; n];
    for edge in mesh.edges_on(BoundaryTag::Gamma1) {
        let tri = mesh.triangles[edge.owner_triangle];
        let coords = triangle_coords(mesh, edge.owner_triangle);
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let sigma_int = edge_integral_param(pa, pb, &|t| sigma(pa[1] + t * (pb[1] - pa[1])));
        let nrm = edge.outward_normal;
        for k in 0..3 {
            let grad = hat_gradient(&coords, k);
            g[tri[k]] += (grad[0] * nrm[0] + grad[1] * nrm[1]) * sigma_int;
        }
    }
    g
}

pub fn max_abs_diff_matrix(a: &CsrMatrix, dense: &[Vec<f64>]) -> f64 {
    let flat = a.to_dense();
    let ncols = a.ncols();
    let mut worst = 0.0f64;
    for (i, row) in dense.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((flat[i * ncols + j] - v).abs());
        }
    }
    worst
}

pub fn max_abs_diff_vec(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Penalized build + direct solve; panics on any failure so tests read flat.
pub fn solve_nitsche(spec: &ProblemSpec, mesh: &Mesh, eps: f64) -> (Vec<f64>, SolveStats) {
    let system = build_nitsche_system(spec, mesh, eps).expect("penalized build");
    direct_solve(&system).expect("penalized direct solve")
}

/// Saddle build + direct solve.
pub fn solve_lagrange(spec: &ProblemSpec, mesh: &Mesh) -> (Vec<f64>, SolveStats) {
    let system = build_lagrange_system(spec, mesh).expect("saddle build");
    direct_solve(&system).expect("saddle direct solve")
}

/// Contact current of a penalized solution.
pub fn nitsche_current(phi: &[f64], spec: &ProblemSpec, mesh: &Mesh, eps: f64) -> f64 {
    reconstruct_current(phi, spec, mesh, eps)
}

pub fn energy_norm(a: &CsrMatrix, d: &[f64]) -> f64 {
    let ad = a.mul_vec(d);
    d.iter().zip(&ad).map(|(x, y)| x * y).sum::<f64>().sqrt()
}

/// Interpolates the exact solution at the mesh vertices.
pub fn exact_vertex_values(spec: &ProblemSpec, mesh: &Mesh) -> Vec<f64> {
    let exact = spec.exact.as_ref().expect("problem carries an exact solution");
    mesh.vertices
        .iter()
        .map(|v| (exact.value)(v[0], v[1]))
        .collect()
}

pub fn dirichlet_free_count(system: &AssembledSystem) -> usize {
    system.dofmap.free_count()
}

pub fn dofmap_of(mesh: &Mesh, spec: &ProblemSpec) -> DofMap {
    DofMap::new(mesh, &*spec.phi_d)
}

//! Error measurement against manufactured solutions, matrix property
//! checks, and the report plumbing for convergence experiments.
//!
//! The error norms mirror the assembly quadrature: ‖Φ_e−Φ_h‖_{L²(Ω)} and the
//! H¹ seminorm use the degree-4 triangle rule with Φ_h interpolated linearly
//! (its gradient is constant per element); the contact-side error
//! ‖Φ_e−Φ_h‖_{L²(Γ1)} uses the 3-point edge rule. Observed orders are
//! log₂(e_coarse/e_fine) under mesh halving.

use serde::Serialize;

use crate::bc_methods::ProblemSpec;
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::QuadratureRules;
use crate::solvers::SolveStats;
use crate::sparse::CsrMatrix;

/// ‖Φ_e − Φ_h‖_{L²(Ω)} with Φ_h the P1 coefficient vector.
pub fn l2_error_domain(
    mesh: &Mesh,
    phi_h: &[f64],
    exact: impl Fn(f64, f64) -> f64,
    quad: &QuadratureRules,
) -> f64 {
    assert!(
        phi_h.len() >= mesh.vertices.len(),
        "coefficient vector shorter than the vertex count"
    );
    let mut total = 0.0;
    for tri in &mesh.triangles {
        let coords = [
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        ];
        let vals = [phi_h[tri[0]], phi_h[tri[1]], phi_h[tri[2]]];
        let det = (coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
            - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]);
        let mut acc = 0.0;
        for (p, w) in quad.triangle.points.iter().zip(&quad.triangle.weights) {
            let x = p[0] * coords[0][0] + p[1] * coords[1][0] + p[2] * coords[2][0];
            let y = p[0] * coords[0][1] + p[1] * coords[1][1] + p[2] * coords[2][1];
            let uh = p[0] * vals[0] + p[1] * vals[1] + p[2] * vals[2];
            let d = exact(x, y) - uh;
            acc += w * d * d;
        }
        total += det.abs() * acc;
    }
    total.sqrt()
}

/// ‖∇(Φ_e − Φ_h)‖_{L²(Ω)}; ∇Φ_h is constant on each triangle.
pub fn h1_seminorm_error(
    mesh: &Mesh,
    phi_h: &[f64],
    exact_gradient: impl Fn(f64, f64) -> [f64; 2],
    quad: &QuadratureRules,
) -> f64 {
    let mut total = 0.0;
    for tri in &mesh.triangles {
        let coords = [
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        ];
        let vals = [phi_h[tri[0]], phi_h[tri[1]], phi_h[tri[2]]];
        let det = (coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
            - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]);
        // ∇φ_k = (b_k, c_k)/det with the cyclic difference coefficients
        let mut gh = [0.0f64; 2];
        for k in 0..3 {
            let (p1, p2) = (coords[(k + 1) % 3], coords[(k + 2) % 3]);
            gh[0] += vals[k] * (p1[1] - p2[1]) / det;
            gh[1] += vals[k] * (p2[0] - p1[0]) / det;
        }
        let mut acc = 0.0;
        for (p, w) in quad.triangle.points.iter().zip(&quad.triangle.weights) {
            let x = p[0] * coords[0][0] + p[1] * coords[1][0] + p[2] * coords[2][0];
            let y = p[0] * coords[0][1] + p[1] * coords[1][1] + p[2] * coords[2][1];
            let ge = exact_gradient(x, y);
            let dx = ge[0] - gh[0];
            let dy = ge[1] - gh[1];
            acc += w * (dx * dx + dy * dy);
        }
        total += det.abs() * acc;
    }
    total.sqrt()
}

/// ‖Φ_e − Φ_h‖_{L²(Γ1)} over the contact side.
pub fn l2_error_gamma1(
    mesh: &Mesh,
    phi_h: &[f64],
    exact: impl Fn(f64, f64) -> f64,
    quad: &QuadratureRules,
) -> f64 {
    let mut total = 0.0;
    for edge in mesh.edges_on(BoundaryTag::Gamma1) {
        let a = mesh.vertices[edge.vertices[0]];
        let b = mesh.vertices[edge.vertices[1]];
        let (va, vb) = (phi_h[edge.vertices[0]], phi_h[edge.vertices[1]]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let mut acc = 0.0;
        for (t, w) in quad.edge.points.iter().zip(&quad.edge.weights) {
            let x = a[0] + t * (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            let uh = (1.0 - t) * va + t * vb;
            let d = exact(x, y) - uh;
            acc += w * d * d;
        }
        total += len * acc;
    }
    total.sqrt()
}

/// Observed orders log₂(e_{k−1}/e_k) for a sequence of errors under mesh
/// halving. Every error must be strictly positive.
pub fn convergence_orders(errors: &[f64]) -> Vec<f64> {
    assert!(
        errors.iter().all(|e| *e > 0.0),
        "convergence orders need strictly positive errors, got {errors:?}"
    );
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Outcome of the symmetry/positivity probe of a matrix.
#[derive(Debug, Clone, Copy)]
pub struct SpdReport {
    /// max |a_ij − a_ji| / max|a_ij| ≤ 1e-9.
    pub symmetric: bool,
    /// Smallest observed Rayleigh quotient is strictly positive.
    pub positive: bool,
    pub min_rayleigh: f64,
}

/// Probes symmetry exactly (over the sparsity pattern) and positive
/// definiteness statistically: Rayleigh quotients of `trials` seeded random
/// unit vectors, then 50 power-iteration steps on σI − A (σ a Gershgorin
/// bound) steer the probe toward the minimal eigenpair.
pub fn check_spd(a: &CsrMatrix, trials: usize) -> SpdReport {
    use rand::{Rng, SeedableRng};
    assert_eq!(a.nrows(), a.ncols(), "SPD probe needs a square matrix");
    let n = a.nrows();
    let max_abs = a.max_abs();
    let symmetric = max_abs == 0.0 || a.symmetry_defect() / max_abs <= 1e-9;

    let rayleigh = |x: &[f64]| {
        let ax = a.mul_vec(x);
        let num: f64 = x.iter().zip(&ax).map(|(xi, yi)| xi * yi).sum();
        let den: f64 = x.iter().map(|xi| xi * xi).sum();
        num / den
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51d_ba5e);
    let mut min_rayleigh = f64::INFINITY;
    let mut probe = vec![0.0; n];
    for _ in 0..trials.max(1) {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = rayleigh(&x);
        if r < min_rayleigh {
            min_rayleigh = r;
            probe = x;
        }
    }

    // Gershgorin upper bound on the spectrum
    let mut sigma = 0.0f64;
    for i in 0..n {
        let (_, vals) = a.row(i);
        sigma = sigma.max(vals.iter().map(|v| v.abs()).sum());
    }
    for _ in 0..50 {
        let ax = a.mul_vec(&probe);
        let mut next: Vec<f64> = probe
            .iter()
            .zip(&ax)
            .map(|(xi, axi)| sigma * xi - axi)
            .collect();
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break; // A = σI exactly; the probe is already an eigenvector
        }
        for v in &mut next {
            *v /= norm;
        }
        probe = next;
    }
    min_rayleigh = min_rayleigh.min(rayleigh(&probe));

    SpdReport {
        symmetric,
        positive: min_rayleigh > 0.0,
        min_rayleigh,
    }
}

/// A problem with a known exact solution. Registration cross-checks the
/// ingredients against each other so a transcription slip in any one of
/// f, σ, V, R, Φ_D, Φ_e, or ∇Φ_e cannot survive unnoticed.
pub struct ManufacturedProblem {
    pub name: String,
    pub spec: ProblemSpec,
}

impl ManufacturedProblem {
    /// Number of panels for the composite contact-integral quadrature.
    const CURRENT_PANELS: usize = 400;

    pub fn register(name: impl Into<String>, spec: ProblemSpec) -> Self {
        let problem = Self {
            name: name.into(),
            spec,
        };
        problem.check_consistency();
        problem
    }

    /// ∫_{Γ1} σ ∂Φ_e/∂n ds by composite Gauss quadrature; the outward normal
    /// on the contact side is (−1, 0).
    pub fn exact_current(&self) -> f64 {
        let exact = self
            .spec
            .exact
            .as_ref()
            .expect("manufactured problems carry an exact solution");
        let rule = QuadratureRules::default().edge;
        let side = self.spec.side;
        let panel = side / Self::CURRENT_PANELS as f64;
        let mut total = 0.0;
        for k in 0..Self::CURRENT_PANELS {
            let y0 = k as f64 * panel;
            for (t, w) in rule.points.iter().zip(&rule.weights) {
                let y = y0 + t * panel;
                total += w * panel * (self.spec.sigma)(y) * -(exact.gradient)(0.0, y)[0];
            }
        }
        total
    }

    fn check_consistency(&self) {
        let exact = self
            .spec
            .exact
            .as_ref()
            .expect("manufactured problems carry an exact solution");
        let side = self.spec.side;
        let samples = 33usize;

        // PDE: −ΔΦ_e = f, Laplacian by central differences
        let delta = 1e-4 * side;
        for i in 1..samples {
            for j in 1..samples {
                let x = side * i as f64 / samples as f64;
                let y = side * j as f64 / samples as f64;
                let lap = ((exact.value)(x + delta, y)
                    + (exact.value)(x - delta, y)
                    + (exact.value)(x, y + delta)
                    + (exact.value)(x, y - delta)
                    - 4.0 * (exact.value)(x, y))
                    / (delta * delta);
                let miss = (-lap - (self.spec.f)(x, y)).abs();
                assert!(
                    miss < 1e-5,
                    "{}: −ΔΦ_e ≠ f at ({x}, {y}): difference {miss}",
                    self.name
                );
            }
        }

        // gradient consistency with the value field
        for i in 1..samples {
            for j in 1..samples {
                let x = side * i as f64 / samples as f64;
                let y = side * j as f64 / samples as f64;
                let g = (exact.gradient)(x, y);
                let gx = ((exact.value)(x + delta, y) - (exact.value)(x - delta, y))
                    / (2.0 * delta);
                let gy = ((exact.value)(x, y + delta) - (exact.value)(x, y - delta))
                    / (2.0 * delta);
                assert!(
                    (g[0] - gx).abs() < 1e-6 && (g[1] - gy).abs() < 1e-6,
                    "{}: ∇Φ_e mismatch at ({x}, {y})",
                    self.name
                );
            }
        }

        // Γ3 trace equals the Dirichlet data
        for j in 0..=samples {
            let y = side * j as f64 / samples as f64;
            let miss = ((exact.value)(side, y) - (self.spec.phi_d)(y)).abs();
            assert!(
                miss < 1e-10,
                "{}: Φ_e(L, {y}) does not match Φ_D: {miss}",
                self.name
            );
        }

        // insulation: ∂Φ_e/∂y = 0 on both Γ2 sides
        for i in 0..=samples {
            let x = side * i as f64 / samples as f64;
            for y in [0.0, side] {
                let flux = (exact.gradient)(x, y)[1].abs();
                assert!(
                    flux < 1e-10,
                    "{}: nonzero normal flux {flux} on Γ2 at x = {x}",
                    self.name
                );
            }
        }

        // circuit relation: Φ_e on Γ1 is the constant V − R·I
        let current = self.exact_current();
        let target = self.spec.voltage - self.spec.resistance * current;
        for j in 0..=samples {
            let y = side * j as f64 / samples as f64;
            let miss = ((exact.value)(0.0, y) - target).abs();
            assert!(
                miss < 1e-10,
                "{}: Φ_e(0, {y}) = {} but V − R·I = {target}",
                self.name,
                (exact.value)(0.0, y)
            );
        }
    }
}

/// Cubic-solution problem: f = −4xy + 2x, σ = 1, V = 1, R = 1,
/// Φ_e = (2/3)xy³ − xy² + 5/6, contact current I = 1/6.
pub fn test1() -> ManufacturedProblem {
    let spec = ProblemSpec::new(
        |x, y| -4.0 * x * y + 2.0 * x,
        |_| 1.0,
        1.0,
        1.0,
        |y| 2.0 / 3.0 * y.powi(3) - y * y + 5.0 / 6.0,
        1.0,
    )
    .with_exact(
        |x, y| 2.0 / 3.0 * x * y.powi(3) - x * y * y + 5.0 / 6.0,
        |x, y| [2.0 / 3.0 * y.powi(3) - y * y, 2.0 * x * y * y - 2.0 * x * y],
    );
    ManufacturedProblem::register("test1", spec)
}

/// Trigonometric-solution problem: f = (1 + π²)·sin x cos πy, σ = y + 1,
/// V = 1 + 2/π², R = 1, Φ_e = sin x cos πy + 1, contact current I = 2/π².
pub fn test2() -> ManufacturedProblem {
    use std::f64::consts::PI;
    let spec = ProblemSpec::new(
        |x: f64, y: f64| x.sin() * (PI * y).cos() + PI * PI * x.sin() * (PI * y).cos(),
        |y| y + 1.0,
        1.0 + 2.0 / (PI * PI),
        1.0,
        |y: f64| 1.0 + 1.0f64.sin() * (PI * y).cos(),
        1.0,
    )
    .with_exact(
        |x: f64, y: f64| x.sin() * (PI * y).cos() + 1.0,
        |x: f64, y: f64| {
            [
                x.cos() * (PI * y).cos(),
                -PI * x.sin() * (PI * y).sin(),
            ]
        },
    );
    ManufacturedProblem::register("test2", spec)
}

pub fn builtin_problems() -> Vec<ManufacturedProblem> {
    vec![test1(), test2()]
}

/// One mesh line of a convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct MeshResult {
    pub n: usize,
    pub h: f64,
    pub l2_domain: f64,
    pub order_l2: Option<f64>,
    pub h1_seminorm: f64,
    pub order_h1: Option<f64>,
    pub l2_gamma1: f64,
    pub order_gamma1: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Errors and solver statistics across a mesh family, with the observed
/// orders filled in between consecutive rows.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub method: String,
    pub problem: String,
    pub epsilon: Option<f64>,
    pub rows: Vec<MeshResult>,
}

fn order_between(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).log2())
}

fn fmt_order(o: Option<f64>) -> String {
    match o {
        Some(v) => format!("{v:.2}"),
        None => "n/a".to_string(),
    }
}

impl ConvergenceReport {
    pub fn new(
        method: impl Into<String>,
        problem: impl Into<String>,
        epsilon: Option<f64>,
    ) -> Self {
        Self {
            method: method.into(),
            problem: problem.into(),
            epsilon,
            rows: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        n: usize,
        h: f64,
        l2_domain: f64,
        h1_seminorm: f64,
        l2_gamma1: f64,
        stats: &SolveStats,
    ) {
        let prev = self.rows.last();
        let row = MeshResult {
            n,
            h,
            l2_domain,
            order_l2: prev.and_then(|p| order_between(p.l2_domain, l2_domain)),
            h1_seminorm,
            order_h1: prev.and_then(|p| order_between(p.h1_seminorm, h1_seminorm)),
            l2_gamma1,
            order_gamma1: prev.and_then(|p| order_between(p.l2_gamma1, l2_gamma1)),
            iterations: stats.iterations,
            residual: stats.residual,
            converged: stats.converged,
        };
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,h,l2_domain,order_l2,h1_seminorm,order_h1,l2_gamma1,order_gamma1,iterations,residual,converged\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6e},{:.12e},{},{:.12e},{},{:.12e},{},{},{:.6e},{}\n",
                r.n,
                r.h,
                r.l2_domain,
                fmt_order(r.order_l2),
                r.h1_seminorm,
                fmt_order(r.order_h1),
                r.l2_gamma1,
                fmt_order(r.order_gamma1),
                r.iterations,
                r.residual,
                r.converged,
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let eps = match self.epsilon {
            Some(e) => format!(", ε = {e:.0e}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "### {} / {}{eps}\n\n",
            self.problem, self.method
        ));
        out.push_str("| h | L²(Ω) error | order | H¹₀(Ω) error | order | L²(Γ1) error | order |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {:.4} | {:.2e} | {} | {:.2e} | {} | {:.2e} | {} |\n",
                r.h,
                r.l2_domain,
                fmt_order(r.order_l2),
                r.h1_seminorm,
                fmt_order(r.order_h1),
                r.l2_gamma1,
                fmt_order(r.order_gamma1),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Diagonal;
    use crate::sparse::CooBuilder;

    fn interpolant(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        mesh.vertices.iter().map(|p| f(p[0], p[1])).collect()
    }

    #[test]
    fn linear_solutions_are_reproduced_exactly() {
        let mesh = Mesh::square(5, 1.0, Diagonal::Right).unwrap();
        let quad = QuadratureRules::default();
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - 3.0 * y;
        let phi = interpolant(&mesh, f);
        assert!(l2_error_domain(&mesh, &phi, f, &quad) < 1e-14);
        assert!(h1_seminorm_error(&mesh, &phi, |_, _| [2.0, -3.0], &quad) < 1e-13);
        assert!(l2_error_gamma1(&mesh, &phi, f, &quad) < 1e-14);
    }

    #[test]
    fn constant_offset_has_unit_norms() {
        let mesh = Mesh::square(4, 1.0, Diagonal::Right).unwrap();
        let quad = QuadratureRules::default();
        let phi = vec![0.0; mesh.vertices.len()];
        let err = l2_error_domain(&mesh, &phi, |_, _| 1.0, &quad);
        assert!((err - 1.0).abs() < 1e-13);
        let err_b = l2_error_gamma1(&mesh, &phi, |_, _| 1.0, &quad);
        assert!((err_b - 1.0).abs() < 1e-13);
        assert!(h1_seminorm_error(&mesh, &phi, |_, _| [0.0, 0.0], &quad) < 1e-14);
    }

    #[test]
    fn interpolation_errors_shrink_at_known_rates() {
        let quad = QuadratureRules::default();
        let f = |x: f64, y: f64| x * x + 0.5 * y * y;
        let g = |x: f64, y: f64| [2.0 * x, y];
        let mut l2 = Vec::new();
        let mut h1 = Vec::new();
        for n in [4, 8, 16] {
            let mesh = Mesh::square(n, 1.0, Diagonal::Right).unwrap();
            let phi = interpolant(&mesh, f);
            l2.push(l2_error_domain(&mesh, &phi, f, &quad));
            h1.push(h1_seminorm_error(&mesh, &phi, g, &quad));
        }
        for o in convergence_orders(&l2) {
            assert!((o - 2.0).abs() < 0.05, "L2 order {o}");
        }
        for o in convergence_orders(&h1) {
            assert!((o - 1.0).abs() < 0.05, "H1 order {o}");
        }
    }

    #[test]
    fn orders_from_simple_ratios() {
        assert!((convergence_orders(&[8e-3, 2e-3])[0] - 2.0).abs() < 1e-12);
        assert_eq!(convergence_orders(&[5e-4, 5e-4]), vec![0.0]);
    }

    #[test]
    #[should_panic(expected = "strictly positive")]
    fn orders_reject_zero_errors() {
        convergence_orders(&[1e-3, 0.0]);
    }

    #[test]
    fn spd_probe_on_identity() {
        let report = check_spd(&CsrMatrix::identity(40), 10);
        assert!(report.symmetric);
        assert!(report.positive);
        assert!((report.min_rayleigh - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spd_probe_flags_skew_matrix() {
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 1, 1.0);
        b.push(1, 0, -1.0);
        let report = check_spd(&b.build(), 5);
        assert!(!report.symmetric);
        assert!(!report.positive);
        assert!(report.min_rayleigh.abs() < 1e-9);
    }

    #[test]
    fn spd_probe_finds_small_and_negative_eigenvalues() {
        let mut b = CooBuilder::new(3, 3);
        b.push(0, 0, 1.0);
        b.push(1, 1, 1e-6);
        b.push(2, 2, 5.0);
        let report = check_spd(&b.build(), 8);
        assert!(report.positive);
        assert!(report.min_rayleigh < 2e-6, "missed: {}", report.min_rayleigh);

        let mut b = CooBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(1, 1, -0.5);
        let report = check_spd(&b.build(), 8);
        assert!(report.symmetric);
        assert!(!report.positive);
        assert!((report.min_rayleigh + 0.5).abs() < 1e-9);
    }

    #[test]
    fn builtin_problems_register_and_integrate() {
        let p1 = test1();
        assert_eq!(p1.name, "test1");
        assert!((p1.exact_current() - 1.0 / 6.0).abs() < 1e-12);
        let p2 = test2();
        let want = 2.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((p2.exact_current() - want).abs() < 1e-12);
        assert_eq!(builtin_problems().len(), 2);
    }

    #[test]
    fn report_formats_orders_and_serializes() {
        let mut report = ConvergenceReport::new("penalized", "test1", Some(1e-9));
        let stats = SolveStats {
            iterations: 0,
            residual: 1e-12,
            converged: true,
            wall_time: std::time::Duration::ZERO,
            woodbury_guard_triggered: false,
            restart_residuals: vec![],
        };
        report.push(10, 0.1, 8e-3, 4e-2, 1e-7, &stats);
        report.push(20, 0.05, 2e-3, 2e-2, 1e-7, &stats);
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("n,h,"));
        assert!(lines.next().unwrap().contains("n/a"));
        assert!(lines.next().unwrap().contains("2.00"));

        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["rows"][1]["order_l2"], 2.0);
        assert_eq!(json["method"], "penalized");

        let md = report.to_markdown();
        assert!(md.contains("| h | L²(Ω) error | order |"));
        assert!(md.contains("| 0.0500 |"));
    }
}

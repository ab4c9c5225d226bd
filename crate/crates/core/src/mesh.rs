//! Structured triangulations of the square (0,L)^2.
//!
//! Vertices are numbered lexicographically by (row, column): vertex (i,j)
//! sits at (i·h, j·h) with index j·(n+1)+i. Every grid cell splits into two
//! counterclockwise triangles along the chosen diagonal. Boundary edges are
//! tagged by side: Γ1 is x=0 (the contact electrode), Γ2 is y=0 and y=L
//! (insulated), Γ3 is x=L (fixed potential).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivisions,
    #[error("side length must be positive, got {0}")]
    NonPositiveSide(f64),
    #[error("unsupported diagonal `{0}` (use `right` or `left`)")]
    UnsupportedDiagonal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// x = 0, carries the integral boundary condition.
    Gamma1,
    /// y = 0 and y = L, homogeneous Neumann.
    Gamma2,
    /// x = L, Dirichlet.
    Gamma3,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryTag::Gamma1 => "gamma1",
            BoundaryTag::Gamma2 => "gamma2",
            BoundaryTag::Gamma3 => "gamma3",
        };
        f.write_str(s)
    }
}

/// Cell split direction: `Right` runs the diagonal from the lower-left to
/// the upper-right corner, `Left` from the lower-right to the upper-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    #[default]
    Right,
    Left,
}

impl FromStr for Diagonal {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "right" => Ok(Diagonal::Right),
            "left" => Ok(Diagonal::Left),
            other => Err(MeshError::UnsupportedDiagonal(other.into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryEdge {
    /// Endpoint vertex indices, ascending.
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// The unique triangle that owns this edge.
    pub owner_triangle: usize,
    /// Unit outward normal of the domain along this edge.
    pub outward_normal: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Subdivisions per side.
    pub n: usize,
    /// Side length L of the square.
    pub side: f64,
}

impl Mesh {
    /// Builds the structured n×n triangulation of (0,side)^2.
    pub fn square(n: usize, side: f64, diagonal: Diagonal) -> Result<Mesh, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        if !side.is_finite() || side <= 0.0 {
            return Err(MeshError::NonPositiveSide(side));
        }
        let h = side / n as f64;
        let np = n + 1;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * np + i;
                let v10 = v00 + 1;
                let v01 = v00 + np;
                let v11 = v01 + 1;
                match diagonal {
                    Diagonal::Right => {
                        triangles.push([v00, v10, v11]);
                        triangles.push([v00, v11, v01]);
                    }
                    Diagonal::Left => {
                        triangles.push([v00, v10, v01]);
                        triangles.push([v10, v11, v01]);
                    }
                }
            }
        }
        let mut mesh = Mesh {
            vertices,
            triangles,
            boundary_edges: Vec::with_capacity(4 * n),
            n,
            side,
        };
        // Γ1 ascending y, Γ2 bottom then top ascending x, Γ3 ascending y.
        for j in 0..n {
            let a = j * np;
            mesh.push_boundary_edge(a, a + np, BoundaryTag::Gamma1, (0, j));
        }
        for i in 0..n {
            mesh.push_boundary_edge(i, i + 1, BoundaryTag::Gamma2, (i, 0));
        }
        for i in 0..n {
            let a = n * np + i;
            mesh.push_boundary_edge(a, a + 1, BoundaryTag::Gamma2, (i, n - 1));
        }
        for j in 0..n {
            let a = j * np + n;
            mesh.push_boundary_edge(a, a + np, BoundaryTag::Gamma3, (n - 1, j));
        }
        debug_assert!(mesh.triangles.iter().all(|t| mesh.signed_area(t) > 0.0));
        Ok(mesh)
    }

    fn push_boundary_edge(&mut self, a: usize, b: usize, tag: BoundaryTag, cell: (usize, usize)) {
        let (ci, cj) = cell;
        let lower = 2 * (cj * self.n + ci);
        let owner = [lower, lower + 1]
            .into_iter()
            .find(|&t| {
                let tri = &self.triangles[t];
                tri.contains(&a) && tri.contains(&b)
            })
            .expect("boundary edge must lie in one triangle of its cell");
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        // Of the two unit normals, keep the one pointing away from the owner.
        let mut normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        let tri = &self.triangles[owner];
        let cx = (0..3).map(|k| self.vertices[tri[k]][0]).sum::<f64>() / 3.0;
        let cy = (0..3).map(|k| self.vertices[tri[k]][1]).sum::<f64>() / 3.0;
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        if normal[0] * (mid[0] - cx) + normal[1] * (mid[1] - cy) < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        self.boundary_edges.push(BoundaryEdge {
            vertices: [a, b],
            tag,
            owner_triangle: owner,
            outward_normal: normal,
            length: len,
        });
    }

    /// Uniform mesh spacing L/n.
    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = &self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    fn signed_area(&self, tri: &[usize; 3]) -> f64 {
        let [a, b, c] = [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ];
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.signed_area(&self.triangles[t])
    }

    pub fn edges_on(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> + '_ {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Vertex indices on Γ1, ascending in y.
    pub fn gamma1_vertices(&self) -> Vec<usize> {
        (0..=self.n).map(|j| j * (self.n + 1)).collect()
    }

    /// Vertex indices on Γ3 (the Dirichlet side), ascending in y.
    pub fn gamma3_vertices(&self) -> Vec<usize> {
        (0..=self.n).map(|j| j * (self.n + 1) + self.n).collect()
    }

    /// |Γ1|, the length of the contact side.
    pub fn gamma1_length(&self) -> f64 {
        self.side
    }

    /// Plain-text dump: vertex lines "x y", then triangle lines "i j k",
    /// then boundary edge lines "i j tag". Debugging and golden tests only.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "{} {}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        for e in &self.boundary_edges {
            writeln!(w, "{} {} {}", e.vertices[0], e.vertices[1], e.tag)?;
        }
        Ok(())
    }
}

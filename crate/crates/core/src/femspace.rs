//! Quadratic element spaces for the three discretisations.
//!
//! Every local basis function, Morley or Lagrange, is stored by its
//! coefficients in the element's Lagrange P2 frame. Fields are converted to
//! per-element Lagrange coefficients ([`BrokenP2`]) before any norm, jump or
//! estimator is evaluated, so that code is shared by all methods.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix6;

use crate::error::{Error, Result};
use crate::geom::{dot, Jet, Point, Sym2};
use crate::mesh::Triangulation;
use crate::quadrature::{edge_rule, MAX_DEGREE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Morley,
    C0ip,
    Dg,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Morley, Method::C0ip, Method::Dg];

    pub fn name(self) -> &'static str {
        match self {
            Method::Morley => "morley",
            Method::C0ip => "c0ip",
            Method::Dg => "dg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "morley" | "m" | "nc" => Ok(Method::Morley),
            "c0ip" | "ip" => Ok(Method::C0ip),
            "dg" | "dgfem" => Ok(Method::Dg),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Affine geometry of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub points: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [Point; 3],
    pub diameter: f64,
}

impl ElementGeometry {
    pub fn new(mesh: &Triangulation, k: usize) -> Self {
        let p = mesh.triangle_points(k);
        let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grad_lambda = [0, 1, 2].map(|i| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area]
        });
        ElementGeometry {
            points: p,
            area: 0.5 * two_area,
            grad_lambda,
            diameter: mesh.diameter(k),
        }
    }

    pub fn to_physical(&self, l: [f64; 3]) -> Point {
        let p = &self.points;
        [
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ]
    }

    /// Barycentric coordinates of the point at parameter `t` along local
    /// edge `i`, measured from vertex `i+1` towards vertex `i+2`.
    pub fn edge_point(i: usize, t: f64) -> [f64; 3] {
        let mut l = [0.0; 3];
        l[(i + 1) % 3] = 1.0 - t;
        l[(i + 2) % 3] = t;
        l
    }
}

/// Barycentric coordinates, in element `k`, of the point at parameter `s`
/// along global edge `e` (from `edges[e].v[0]` to `edges[e].v[1]`).
pub fn edge_barycentric(mesh: &Triangulation, k: usize, e: usize, s: f64) -> [f64; 3] {
    let i = mesh.tri_to_edge[k]
        .iter()
        .position(|&x| x == e)
        .expect("edge belongs to the element");
    let t = if mesh.triangles[k].v[(i + 1) % 3] == mesh.edges[e].v[0] { s } else { 1.0 - s };
    ElementGeometry::edge_point(i, t)
}

/// Lagrange P2 frame on one element: vertex functions `l_i (2 l_i - 1)` then
/// edge-midpoint functions `4 l_{i+1} l_{i+2}` for the edge opposite vertex `i`.
pub mod lagrange {
    use super::*;

    pub fn values(l: [f64; 3]) -> [f64; 6] {
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
            4.0 * l[0] * l[1],
        ]
    }

    pub fn grads(g: &ElementGeometry, l: [f64; 3]) -> [Point; 6] {
        let gl = &g.grad_lambda;
        let vert = |i: usize| {
            let s = 4.0 * l[i] - 1.0;
            [s * gl[i][0], s * gl[i][1]]
        };
        let edge = |i: usize| {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            [
                4.0 * (l[a] * gl[b][0] + l[b] * gl[a][0]),
                4.0 * (l[a] * gl[b][1] + l[b] * gl[a][1]),
            ]
        };
        [vert(0), vert(1), vert(2), edge(0), edge(1), edge(2)]
    }

    pub fn hessians(g: &ElementGeometry) -> [Sym2; 6] {
        let gl = &g.grad_lambda;
        let vert = |i: usize| Sym2::sym_outer(gl[i], gl[i]).scale(2.0);
        let edge = |i: usize| Sym2::sym_outer(gl[(i + 1) % 3], gl[(i + 2) % 3]).scale(4.0);
        [vert(0), vert(1), vert(2), edge(0), edge(1), edge(2)]
    }

    /// `int_K phi_i dx`: zero for vertex functions, `|K|/3` for edge functions.
    pub fn moments(g: &ElementGeometry) -> [f64; 6] {
        let m = g.area / 3.0;
        [0.0, 0.0, 0.0, m, m, m]
    }

    /// Barycentric coordinates of the six nodes.
    pub const NODES: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ];
}

/// Maps each element's six local functions to global unknowns.
/// `None` marks a local function constrained to zero by the boundary conditions.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub method: Method,
    pub n_global: usize,
    pub element_dofs: Vec<[Option<usize>; 6]>,
}

pub fn build_dofmap(mesh: &Triangulation, method: Method) -> DofMap {
    let element_dofs: Vec<[Option<usize>; 6]> = match method {
        Method::Dg => (0..mesh.n_triangles())
            .map(|k| std::array::from_fn(|i| Some(6 * k + i)))
            .collect(),
        Method::Morley | Method::C0ip => {
            // Interior vertices first, then interior edges.
            let mut vertex_dof = vec![None; mesh.n_vertices()];
            let mut n = 0;
            for v in mesh.interior_vertices() {
                vertex_dof[v] = Some(n);
                n += 1;
            }
            let mut edge_dof = vec![None; mesh.n_edges()];
            for e in mesh.interior_edges() {
                edge_dof[e] = Some(n);
                n += 1;
            }
            mesh.triangles
                .iter()
                .zip(&mesh.tri_to_edge)
                .map(|(t, edges)| {
                    [
                        vertex_dof[t.v[0]],
                        vertex_dof[t.v[1]],
                        vertex_dof[t.v[2]],
                        edge_dof[edges[0]],
                        edge_dof[edges[1]],
                        edge_dof[edges[2]],
                    ]
                })
                .collect()
        }
    };
    let n_global = element_dofs
        .iter()
        .flat_map(|d: &[Option<usize>; 6]| d.iter().flatten())
        .map(|&g| g + 1)
        .max()
        .unwrap_or(0);
    DofMap {
        method,
        n_global,
        element_dofs,
    }
}

/// Coefficients of a local basis in the Lagrange frame: `coef[i][j]` is the
/// weight of Lagrange function `i` in local function `j`.
pub type LocalFrame = [[f64; 6]; 6];

const IDENTITY_FRAME: LocalFrame = {
    let mut m = [[0.0; 6]; 6];
    let mut i = 0;
    while i < 6 {
        m[i][i] = 1.0;
        i += 1;
    }
    m
};

/// Morley dual functionals applied to the Lagrange frame: rows 0..3 are
/// vertex values, rows 3..6 are edge means of the derivative along the
/// global edge normal.
pub fn morley_dual_matrix(mesh: &Triangulation, k: usize, g: &ElementGeometry) -> Matrix6<f64> {
    let rule = edge_rule(3).expect("static degree");
    let mut d = Matrix6::zeros();
    for i in 0..3 {
        d[(i, i)] = 1.0;
    }
    for i in 0..3 {
        let normal = mesh.edges[mesh.tri_to_edge[k][i]].normal;
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let grads = lagrange::grads(g, ElementGeometry::edge_point(i, t));
            for j in 0..6 {
                d[(3 + i, j)] += w * dot(grads[j], normal);
            }
        }
    }
    d
}

fn morley_frame(mesh: &Triangulation, k: usize, g: &ElementGeometry) -> LocalFrame {
    let inv = morley_dual_matrix(mesh, k, g)
        .try_inverse()
        .expect("Morley dual matrix is invertible on non-degenerate triangles");
    std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)]))
}

/// A discrete space: mesh, dof map, element geometry and local frames.
#[derive(Clone, Debug)]
pub struct FeSpace<'m> {
    pub mesh: &'m Triangulation,
    pub dofmap: DofMap,
    pub geometry: Vec<ElementGeometry>,
    frames: Vec<LocalFrame>,
}

impl<'m> FeSpace<'m> {
    pub fn new(mesh: &'m Triangulation, method: Method) -> Self {
        let geometry: Vec<_> = (0..mesh.n_triangles()).map(|k| ElementGeometry::new(mesh, k)).collect();
        let frames = match method {
            Method::Morley => geometry.iter().enumerate().map(|(k, g)| morley_frame(mesh, k, g)).collect(),
            Method::C0ip | Method::Dg => vec![IDENTITY_FRAME; mesh.n_triangles()],
        };
        FeSpace {
            mesh,
            dofmap: build_dofmap(mesh, method),
            geometry,
            frames,
        }
    }

    pub fn method(&self) -> Method {
        self.dofmap.method
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_global
    }

    pub fn frame(&self, k: usize) -> &LocalFrame {
        &self.frames[k]
    }

    pub fn local_dofs(&self, k: usize) -> &[Option<usize>; 6] {
        &self.dofmap.element_dofs[k]
    }

    /// Hessians of the six local basis functions on element `k`.
    pub fn local_hessians(&self, k: usize) -> [Sym2; 6] {
        let lh = lagrange::hessians(&self.geometry[k]);
        let f = &self.frames[k];
        std::array::from_fn(|j| {
            let mut h = Sym2::ZERO;
            for i in 0..6 {
                h.axpy(f[i][j], &lh[i]);
            }
            h
        })
    }

    /// `int_K phi_j dx` for the six local basis functions.
    pub fn local_moments(&self, k: usize) -> [f64; 6] {
        let m = lagrange::moments(&self.geometry[k]);
        let f = &self.frames[k];
        std::array::from_fn(|j| (0..6).map(|i| f[i][j] * m[i]).sum())
    }

    /// Values, gradients and Hessians of the local basis at barycentric `l`.
    pub fn eval_local(&self, k: usize, l: [f64; 3]) -> [Jet; 6] {
        let g = &self.geometry[k];
        let (lv, lg, lh) = (lagrange::values(l), lagrange::grads(g, l), lagrange::hessians(g));
        let f = &self.frames[k];
        std::array::from_fn(|j| {
            let mut jet = Jet::default();
            for i in 0..6 {
                let c = f[i][j];
                if c != 0.0 {
                    jet.value += c * lv[i];
                    jet.grad[0] += c * lg[i][0];
                    jet.grad[1] += c * lg[i][1];
                    jet.hess.axpy(c, &lh[i]);
                }
            }
            jet
        })
    }

    /// Basis evaluation at a point `(xi, eta)` of the reference triangle.
    pub fn eval_basis(&self, k: usize, p: Point) -> [Jet; 6] {
        self.eval_local(k, [1.0 - p[0] - p[1], p[0], p[1]])
    }

    /// Per-element Lagrange coefficients of a global coefficient vector.
    pub fn to_broken(&self, coeffs: &[f64]) -> BrokenP2 {
        assert_eq!(coeffs.len(), self.n_dofs(), "coefficient vector length");
        let coeffs = self
            .dofmap
            .element_dofs
            .iter()
            .zip(&self.frames)
            .map(|(dofs, f)| {
                let local: [f64; 6] = dofs.map(|d| d.map_or(0.0, |g| coeffs[g]));
                std::array::from_fn(|i| (0..6).map(|j| f[i][j] * local[j]).sum())
            })
            .collect();
        BrokenP2 { coeffs }
    }
}

/// A piecewise quadratic field stored by per-element Lagrange coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenP2 {
    pub coeffs: Vec<[f64; 6]>,
}

impl BrokenP2 {
    pub fn zeros(n_triangles: usize) -> Self {
        BrokenP2 {
            coeffs: vec![[0.0; 6]; n_triangles],
        }
    }

    /// Element-wise nodal interpolation of `f` (discontinuous in general
    /// only if `f` is).
    pub fn interpolate(mesh: &Triangulation, f: impl Fn(Point) -> f64) -> Self {
        let coeffs = (0..mesh.n_triangles())
            .map(|k| {
                let g = ElementGeometry::new(mesh, k);
                lagrange::NODES.map(|l| f(g.to_physical(l)))
            })
            .collect();
        BrokenP2 { coeffs }
    }

    pub fn value(&self, k: usize, l: [f64; 3]) -> f64 {
        let v = lagrange::values(l);
        (0..6).map(|i| self.coeffs[k][i] * v[i]).sum()
    }

    pub fn grad(&self, g: &ElementGeometry, k: usize, l: [f64; 3]) -> Point {
        let gr = lagrange::grads(g, l);
        let c = &self.coeffs[k];
        [
            (0..6).map(|i| c[i] * gr[i][0]).sum(),
            (0..6).map(|i| c[i] * gr[i][1]).sum(),
        ]
    }

    pub fn hessian(&self, g: &ElementGeometry, k: usize) -> Sym2 {
        let h = lagrange::hessians(g);
        let mut out = Sym2::ZERO;
        for i in 0..6 {
            out.axpy(self.coeffs[k][i], &h[i]);
        }
        out
    }

    pub fn add_scaled(&mut self, a: f64, other: &BrokenP2) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for i in 0..6 {
                c[i] += a * o[i];
            }
        }
    }
}

/// Morley interpolation: vertex values at interior vertices and edge means
/// of the normal derivative on interior edges. `v` returns value and gradient.
/// Boundary degrees of freedom are constrained to zero.
pub fn morley_interpolate(space: &FeSpace<'_>, v: impl Fn(Point) -> (f64, Point)) -> Result<Vec<f64>> {
    if space.method() != Method::Morley {
        return Err(Error::MethodMismatch {
            expected: Method::Morley,
            found: space.method(),
        });
    }
    let mesh = space.mesh;
    let rule = edge_rule(MAX_DEGREE)?;
    let mut out = vec![0.0; space.n_dofs()];
    for (k, dofs) in space.dofmap.element_dofs.iter().enumerate() {
        let t = &mesh.triangles[k];
        for i in 0..3 {
            if let Some(d) = dofs[i] {
                out[d] = v(mesh.point(t.v[i])).0;
            }
            if let Some(d) = dofs[3 + i] {
                let e = &mesh.edges[mesh.tri_to_edge[k][i]];
                let (a, b) = (mesh.point(e.v[0]), mesh.point(e.v[1]));
                out[d] = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| w * dot(v(crate::geom::lerp(a, b, s)).1, e.normal))
                    .sum();
            }
        }
    }
    Ok(out)
}

/// Nodal interpolation into the C0IP or DG space; nodes on the boundary are
/// dropped for C0IP.
pub fn lagrange_interpolate(space: &FeSpace<'_>, f: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    if space.method() == Method::Morley {
        return Err(Error::MethodMismatch {
            expected: Method::C0ip,
            found: Method::Morley,
        });
    }
    let mut out = vec![0.0; space.n_dofs()];
    for (k, dofs) in space.dofmap.element_dofs.iter().enumerate() {
        let g = &space.geometry[k];
        for (i, d) in dofs.iter().enumerate() {
            if let Some(d) = d {
                out[*d] = f(g.to_physical(lagrange::NODES[i]));
            }
        }
    }
    Ok(out)
}

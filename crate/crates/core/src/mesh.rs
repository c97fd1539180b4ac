//! Conforming triangulations of polygonal domains.
//!
//! A [`Triangulation`] is immutable once built. Refinement (red or newest
//! vertex bisection) always returns a new mesh with recomputed topology.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{cross, dot, norm, sub, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub on_boundary: bool,
}

impl Vertex {
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

/// A counterclockwise triangle. Local edge `i` joins `v[i+1]` and `v[i+2]`,
/// i.e. it is the edge opposite local vertex `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub v: [usize; 3],
    /// Local index of the refinement edge; the newest vertex is `v[refinement_edge]`.
    pub refinement_edge: usize,
}

impl Triangle {
    pub fn newest_vertex(&self) -> usize {
        self.v[self.refinement_edge]
    }

    /// Endpoints of local edge `i` in counterclockwise order.
    pub fn edge_vertices(&self, i: usize) -> (usize, usize) {
        (self.v[(i + 1) % 3], self.v[(i + 2) % 3])
    }

    pub fn local_index(&self, vertex: usize) -> Option<usize> {
        self.v.iter().position(|&w| w == vertex)
    }
}

/// Mesh edge. `plus` is the lower-indexed adjacent triangle and the normal
/// points out of it; on the boundary the normal is the outward normal.
/// Jumps across the edge are `trace(plus) - trace(minus)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    /// Vertex indices, sorted ascending.
    pub v: [usize; 2],
    pub plus: usize,
    pub minus: Option<usize>,
    pub normal: Point,
    /// Normal rotated 90 degrees counterclockwise.
    pub tangent: Point,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    pub fn adjacent(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.plus).chain(self.minus)
    }
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// Per triangle, the global edge index of each local edge.
    pub tri_to_edge: Vec<[usize; 3]>,
    pub h_max: f64,
}

/// Output of a bisection sweep together with the parent of every new triangle.
#[derive(Clone, Debug)]
pub struct Refined {
    pub mesh: Triangulation,
    pub parent: Vec<usize>,
}

const SQUARE_MESH: &str = include_str!("../meshes/square.mesh");
const LSHAPE_MESH: &str = include_str!("../meshes/lshape.mesh");

impl Triangulation {
    /// Unit square split into four sub-squares, each cut by its
    /// bottom-left to top-right diagonal.
    pub fn unit_square() -> Triangulation {
        Self::from_text(SQUARE_MESH).expect("bundled square mesh is valid")
    }

    /// L-shaped domain `(-1,1)^2` minus `[0,1) x (-1,0]`, six triangles.
    pub fn lshape() -> Triangulation {
        Self::from_text(LSHAPE_MESH).expect("bundled L-shape mesh is valid")
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn point(&self, i: usize) -> Point {
        self.vertices[i].point()
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = &self.triangles[k];
        [self.point(t.v[0]), self.point(t.v[1]), self.point(t.v[2])]
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        0.5 * cross(sub(b, a), sub(c, a))
    }

    /// Diameter `h_K`, i.e. the longest edge.
    pub fn diameter(&self, k: usize) -> f64 {
        self.tri_to_edge[k]
            .iter()
            .map(|&e| self.edges[e].length)
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.triangle_points(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&i| !self.vertices[i].on_boundary)
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| !self.edges[e].is_boundary())
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.interior_vertices().count()
    }

    pub fn n_interior_edges(&self) -> usize {
        self.interior_edges().count()
    }

    /// Parses the plain-text mesh format: `nv nt`, then `nv` lines `x y`,
    /// then `nt` lines `i j k` (0-based, counterclockwise).
    pub fn from_text(text: &str) -> Result<Triangulation> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (line, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty mesh file".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(line, format!("bad header: {e}")))?;
        let [nv, nt] = counts[..] else {
            return Err(parse_err(line, "header must be `nv nt`".into()));
        };

        let mut coords = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("expected {nv} vertex lines")))?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(line, format!("bad vertex: {e}")))?;
            match xy[..] {
                [x, y] if x.is_finite() && y.is_finite() => coords.push([x, y]),
                _ => return Err(parse_err(line, "vertex must be two finite reals".into())),
            }
        }
        let mut tris = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("expected {nt} triangle lines")))?;
            let ijk: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(line, format!("bad triangle: {e}")))?;
            match ijk[..] {
                [i, j, k] => tris.push([i, j, k]),
                _ => return Err(parse_err(line, "triangle must be three indices".into())),
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_err(line, "trailing data after triangle list".into()));
        }
        build_topology(&coords, &tris)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Triangulation> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e}", v.x, v.y);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t.v[0], t.v[1], t.v[2]);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Builds a triangulation from coordinates and counterclockwise index
/// triples. Refinement edges are initialised to the longest edge of each
/// triangle, ties going to the lowest opposite-vertex index.
pub fn build_topology(coords: &[Point], triangles: &[[usize; 3]]) -> Result<Triangulation> {
    let mut tris = Vec::with_capacity(triangles.len());
    for (k, &v) in triangles.iter().enumerate() {
        for &w in &v {
            if w >= coords.len() {
                return Err(Error::VertexOutOfRange {
                    triangle: k,
                    vertex: w,
                    n_vertices: coords.len(),
                });
            }
        }
        let len2 = |i: usize| {
            let d = sub(coords[v[(i + 1) % 3]], coords[v[(i + 2) % 3]]);
            dot(d, d)
        };
        let longest = (0..3).map(len2).fold(0.0, f64::max);
        let refinement_edge = (0..3)
            .filter(|&i| len2(i) >= longest * (1.0 - 1e-12))
            .min_by_key(|&i| v[i])
            .unwrap_or(0);
        tris.push(Triangle { v, refinement_edge });
    }
    from_parts(coords.to_vec(), tris)
}

/// Builds topology for triangles whose refinement edges are already set.
fn from_parts(coords: Vec<Point>, triangles: Vec<Triangle>) -> Result<Triangulation> {
    for (k, t) in triangles.iter().enumerate() {
        if t.v[0] == t.v[1] || t.v[1] == t.v[2] || t.v[0] == t.v[2] {
            return Err(Error::NonConforming(format!(
                "triangle {k} repeats a vertex: {:?}",
                t.v
            )));
        }
        let [a, b, c] = t.v.map(|i| coords[i]);
        let area = 0.5 * cross(sub(b, a), sub(c, a));
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { triangle: k, area });
        }
    }

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut tri_to_edge = vec![[0usize; 3]; triangles.len()];
    // Direction in which the `plus` triangle traverses each edge.
    let mut plus_dir: Vec<(usize, usize)> = Vec::new();

    for (k, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = t.edge_vertices(i);
            let key = (a.min(b), a.max(b));
            match edge_index.get(&key) {
                None => {
                    let d = sub(coords[b], coords[a]);
                    let length = norm(d);
                    let normal = [d[1] / length, -d[0] / length];
                    edges.push(Edge {
                        v: [key.0, key.1],
                        plus: k,
                        minus: None,
                        normal,
                        tangent: [-normal[1], normal[0]],
                        length,
                    });
                    plus_dir.push((a, b));
                    edge_index.insert(key, edges.len() - 1);
                    tri_to_edge[k][i] = edges.len() - 1;
                }
                Some(&e) => {
                    if edges[e].minus.is_some() {
                        return Err(Error::NonConforming(format!(
                            "edge {:?} is shared by more than two triangles",
                            key
                        )));
                    }
                    if plus_dir[e] == (a, b) {
                        return Err(Error::NonConforming(format!(
                            "triangles {} and {k} overlap along edge {:?}",
                            edges[e].plus, key
                        )));
                    }
                    edges[e].minus = Some(k);
                    tri_to_edge[k][i] = e;
                }
            }
        }
    }

    let mut vertices: Vec<Vertex> = coords
        .iter()
        .map(|p| Vertex {
            x: p[0],
            y: p[1],
            on_boundary: false,
        })
        .collect();
    let mut boundary_incident: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (e, edge) in edges.iter().enumerate() {
        if edge.is_boundary() {
            for &w in &edge.v {
                vertices[w].on_boundary = true;
                boundary_incident[w].push(e);
            }
        }
    }

    // A hanging vertex shows up as two collinear, overlapping boundary edges
    // that share an endpoint.
    for (w, inc) in boundary_incident.iter().enumerate() {
        for (n, &e1) in inc.iter().enumerate() {
            for &e2 in &inc[n + 1..] {
                let dir = |e: usize| {
                    let other = if edges[e].v[0] == w { edges[e].v[1] } else { edges[e].v[0] };
                    let d = sub(coords[other], coords[w]);
                    let l = norm(d);
                    [d[0] / l, d[1] / l]
                };
                let (d1, d2) = (dir(e1), dir(e2));
                if cross(d1, d2).abs() < 1e-12 && dot(d1, d2) > 0.0 {
                    return Err(Error::NonConforming(format!(
                        "hanging vertex near vertex {w}: edges {:?} and {:?} overlap",
                        edges[e1].v, edges[e2].v
                    )));
                }
            }
        }
    }

    let h_max = edges.iter().map(|e| e.length).fold(0.0, f64::max);
    Ok(Triangulation {
        vertices,
        triangles,
        edges,
        tri_to_edge,
        h_max,
    })
}

/// Red refinement: every triangle is split into four similar children through
/// its edge midpoints. Children keep the parent's local refinement-edge index,
/// which maps each child onto the parent's similarity class.
pub fn uniform_refine(mesh: &Triangulation) -> Triangulation {
    let nv = mesh.n_vertices();
    let mut coords: Vec<Point> = mesh.vertices.iter().map(Vertex::point).collect();
    for e in &mesh.edges {
        let (a, b) = (mesh.point(e.v[0]), mesh.point(e.v[1]));
        coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mut tris = Vec::with_capacity(4 * mesh.n_triangles());
    for (k, t) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = t.v;
        let m = mesh.tri_to_edge[k].map(|e| nv + e);
        let r = t.refinement_edge;
        for v in [[a, m[2], m[1]], [m[2], b, m[0]], [m[1], m[0], c], [m[0], m[1], m[2]]] {
            tris.push(Triangle {
                v,
                refinement_edge: r,
            });
        }
    }
    from_parts(coords, tris).expect("red refinement of a valid mesh is valid")
}

/// Newest vertex bisection of the marked triangles plus the closure needed
/// to keep the mesh conforming.
pub fn nvb_refine(mesh: &Triangulation, marked: &[usize]) -> Result<Triangulation> {
    nvb_refine_tracked(mesh, marked).map(|r| r.mesh)
}

/// As [`nvb_refine`], also returning the parent triangle of every output triangle.
pub fn nvb_refine_tracked(mesh: &Triangulation, marked: &[usize]) -> Result<Refined> {
    let mut split = vec![false; mesh.n_edges()];
    for &k in marked {
        if k >= mesh.n_triangles() {
            return Err(Error::InvalidParameter(format!(
                "marked triangle {k} out of range ({} triangles)",
                mesh.n_triangles()
            )));
        }
        split[mesh.tri_to_edge[k][mesh.triangles[k].refinement_edge]] = true;
    }

    // Closure: any triangle with a split edge must also split its refinement edge.
    let max_sweeps = 10 * mesh.n_vertices().max(1);
    let mut sweeps = 0;
    loop {
        let mut changed = false;
        for (k, t) in mesh.triangles.iter().enumerate() {
            let edges = &mesh.tri_to_edge[k];
            let ref_edge = edges[t.refinement_edge];
            if !split[ref_edge] && edges.iter().any(|&e| split[e]) {
                split[ref_edge] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(Error::ClosureDiverged(sweeps));
        }
    }

    let mut coords: Vec<Point> = mesh.vertices.iter().map(Vertex::point).collect();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if split[e] {
            let (a, b) = (mesh.point(edge.v[0]), mesh.point(edge.v[1]));
            coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            midpoint.insert((edge.v[0], edge.v[1]), coords.len() - 1);
        }
    }

    let mut tris = Vec::with_capacity(mesh.n_triangles() + 2 * midpoint.len());
    let mut parent = Vec::with_capacity(tris.capacity());
    for (k, t) in mesh.triangles.iter().enumerate() {
        bisect(*t, &midpoint, &mut |child| {
            tris.push(child);
            parent.push(k);
        });
    }
    Ok(Refined {
        mesh: from_parts(coords, tris)?,
        parent,
    })
}

fn bisect(t: Triangle, midpoint: &HashMap<(usize, usize), usize>, emit: &mut impl FnMut(Triangle)) {
    let r = t.refinement_edge;
    let (a, b, c) = (t.v[r], t.v[(r + 1) % 3], t.v[(r + 2) % 3]);
    match midpoint.get(&(b.min(c), b.max(c))) {
        None => emit(t),
        Some(&m) => {
            bisect(
                Triangle {
                    v: [a, b, m],
                    refinement_edge: 2,
                },
                midpoint,
                emit,
            );
            bisect(
                Triangle {
                    v: [a, m, c],
                    refinement_edge: 1,
                },
                midpoint,
                emit,
            );
        }
    }
}

/// Smallest interior angle of any triangle, in radians.
pub fn shape_regularity(mesh: &Triangulation) -> f64 {
    (0..mesh.n_triangles())
        .map(|k| {
            let p = mesh.triangle_points(k);
            (0..3)
                .map(|i| {
                    let d1 = sub(p[(i + 1) % 3], p[i]);
                    let d2 = sub(p[(i + 2) % 3], p[i]);
                    (dot(d1, d2) / (norm(d1) * norm(d2))).clamp(-1.0, 1.0).acos()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

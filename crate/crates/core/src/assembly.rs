//! Sparse assembly of the biharmonic forms, the von Karman trilinear form,
//! its linearisation and the load vector.
//!
//! Block vectors store the `u` component in `0..n` and the `v` component in
//! `n..2n`, where `n` is the scalar dof count.

use crate::error::{Error, Result};
use crate::femspace::{edge_barycentric, FeSpace, Method};
use crate::geom::{dot, Point, Sym2};
use crate::quadrature::{edge_rule, triangle_rule};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Stabilisation parameters of the C0IP and DG forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub sigma_ip: f64,
    pub sigma_dg: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            sigma_ip: 20.0,
            sigma_dg: 20.0,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("sigma_ip", self.sigma_ip), ("sigma_dg", self.sigma_dg)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self, method: Method) -> f64 {
        match method {
            Method::Morley => 0.0,
            Method::C0ip => self.sigma_ip,
            Method::Dg => self.sigma_dg,
        }
    }
}

/// Right-hand sides of the two plate equations.
pub trait Loads {
    fn f(&self, p: Point) -> f64;
    fn g(&self, p: Point) -> f64;
}

/// Loads given by two closures.
pub struct FnLoads<F, G>(pub F, pub G);

impl<F: Fn(Point) -> f64, G: Fn(Point) -> f64> Loads for FnLoads<F, G> {
    fn f(&self, p: Point) -> f64 {
        (self.0)(p)
    }
    fn g(&self, p: Point) -> f64 {
        (self.1)(p)
    }
}

/// Identically vanishing loads.
pub struct ZeroLoads;

impl Loads for ZeroLoads {
    fn f(&self, _: Point) -> f64 {
        0.0
    }
    fn g(&self, _: Point) -> f64 {
        0.0
    }
}

/// Coefficients of the deflection `u` and Airy stress `v` in one space.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolution {
    pub method: Method,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl DiscreteSolution {
    pub fn zeros(space: &FeSpace<'_>) -> Self {
        DiscreteSolution {
            method: space.method(),
            u: vec![0.0; space.n_dofs()],
            v: vec![0.0; space.n_dofs()],
        }
    }

    pub fn from_block(method: Method, x: &[f64]) -> Self {
        let n = x.len() / 2;
        DiscreteSolution {
            method,
            u: x[..n].to_vec(),
            v: x[n..].to_vec(),
        }
    }

    pub fn to_block(&self) -> Vec<f64> {
        let mut x = self.u.clone();
        x.extend_from_slice(&self.v);
        x
    }

    pub(crate) fn check(&self, space: &FeSpace<'_>) -> Result<()> {
        if self.method != space.method() {
            return Err(Error::MethodMismatch {
                expected: space.method(),
                found: self.method,
            });
        }
        let n = space.n_dofs();
        if self.u.len() != n || self.v.len() != n {
            return Err(Error::Dimension(format!(
                "solution has {} + {} coefficients, space has {n} dofs",
                self.u.len(),
                self.v.len()
            )));
        }
        Ok(())
    }
}

/// Traces of one local basis function on one side of an edge, already
/// multiplied by the jump sign and the average weight.
#[derive(Clone, Copy)]
struct SideTrace {
    dof: usize,
    jump: f64,
    jump_grad: Point,
    jump_dn: f64,
    avg_hn: Point,
    avg_nn: f64,
}

/// Scalar stiffness matrix of `a_NC`, `a_IP` or `a_dG`, depending on the space.
pub fn assemble_biharmonic(space: &FeSpace<'_>, penalty: &PenaltyConfig) -> Result<SparseMatrix> {
    penalty.validate()?;
    let method = space.method();
    let n = space.n_dofs();
    let mesh = space.mesh;
    let mut b = TripletBuilder::new(n, n);

    for k in 0..mesh.n_triangles() {
        let hess = space.local_hessians(k);
        let area = space.geometry[k].area;
        let dofs = space.local_dofs(k);
        for (i, di) in dofs.iter().enumerate() {
            let Some(di) = di else { continue };
            for (j, dj) in dofs.iter().enumerate() {
                let Some(dj) = dj else { continue };
                b.push(*di, *dj, area * hess[i].ddot(&hess[j]));
            }
        }
    }

    if method == Method::Morley {
        return Ok(b.build());
    }

    let sigma = penalty.sigma(method);
    let rule = edge_rule(5)?;
    let mut traces: Vec<SideTrace> = Vec::with_capacity(12);
    let mut local_dofs: Vec<usize> = Vec::with_capacity(12);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let h = edge.length;
        let nu = edge.normal;
        let avg_w = if edge.is_boundary() { 1.0 } else { 0.5 };
        let mut local = [[0.0f64; 12]; 12];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let wq = w * h;
            traces.clear();
            for (k, sign) in side_signs(edge.plus, edge.minus) {
                let jets = space.eval_local(k, edge_barycentric(mesh, k, e, s));
                for (j, d) in space.local_dofs(k).iter().enumerate() {
                    let Some(d) = d else { continue };
                    let jet = &jets[j];
                    let hn = jet.hess.apply(nu);
                    traces.push(SideTrace {
                        dof: *d,
                        jump: sign * jet.value,
                        jump_grad: [sign * jet.grad[0], sign * jet.grad[1]],
                        jump_dn: sign * dot(jet.grad, nu),
                        avg_hn: [avg_w * hn[0], avg_w * hn[1]],
                        avg_nn: avg_w * dot(hn, nu),
                    });
                }
            }
            for (i, ti) in traces.iter().enumerate() {
                for (j, tj) in traces.iter().enumerate() {
                    // Row: test function ti, column: trial function tj.
                    let val = match method {
                        Method::C0ip => {
                            -tj.avg_nn * ti.jump_dn - ti.avg_nn * tj.jump_dn + sigma / h * tj.jump_dn * ti.jump_dn
                        }
                        Method::Dg => {
                            -dot(tj.avg_hn, ti.jump_grad) - dot(ti.avg_hn, tj.jump_grad)
                                + sigma / (h * h * h) * tj.jump * ti.jump
                                + sigma / h * tj.jump_dn * ti.jump_dn
                        }
                        Method::Morley => unreachable!(),
                    };
                    local[i][j] += wq * val;
                }
            }
        }
        // The dof list is the same at every quadrature point of the edge.
        local_dofs.clear();
        local_dofs.extend(traces.iter().map(|t| t.dof));
        for (i, &di) in local_dofs.iter().enumerate() {
            for (j, &dj) in local_dofs.iter().enumerate() {
                b.push(di, dj, local[i][j]);
            }
        }
    }
    Ok(b.build())
}

/// The elements adjacent to an edge with their jump signs.
pub(crate) fn side_signs(plus: usize, minus: Option<usize>) -> impl Iterator<Item = (usize, f64)> {
    std::iter::once((plus, 1.0)).chain(minus.map(|m| (m, -1.0)))
}

/// Block-diagonal `diag(a, a)`.
pub fn block_diagonal(a: &SparseMatrix) -> SparseMatrix {
    let n = a.n_rows;
    let mut b = TripletBuilder::new(2 * n, 2 * a.n_cols);
    for i in 0..n {
        for (j, v) in a.row(i) {
            b.push(i, j, v);
            b.push(n + i, a.n_cols + j, v);
        }
    }
    b.build()
}

/// Hessian of the field with coefficients `x` on element `k`.
fn element_hessian(space: &FeSpace<'_>, x: &[f64], k: usize) -> Sym2 {
    let hess = space.local_hessians(k);
    let mut h = Sym2::ZERO;
    for (i, d) in space.local_dofs(k).iter().enumerate() {
        if let Some(d) = d {
            h.axpy(x[*d], &hess[i]);
        }
    }
    h
}

/// The constant `[xi, theta]` on element `k`.
pub fn assemble_bracket_element(space: &FeSpace<'_>, xi: &[f64], theta: &[f64], k: usize) -> f64 {
    element_hessian(space, xi, k).bracket(&element_hessian(space, theta, k))
}

/// `B_h(xi, theta, phi_i)` for every test function, as a block vector.
pub fn assemble_trilinear_vector(
    space: &FeSpace<'_>,
    xi: &DiscreteSolution,
    theta: &DiscreteSolution,
) -> Result<Vec<f64>> {
    xi.check(space)?;
    theta.check(space)?;
    let n = space.n_dofs();
    let mut out = vec![0.0; 2 * n];
    for k in 0..space.mesh.n_triangles() {
        let (x1, x2) = (element_hessian(space, &xi.u, k), element_hessian(space, &xi.v, k));
        let (t1, t2) = (element_hessian(space, &theta.u, k), element_hessian(space, &theta.v, k));
        let cu = -0.5 * (x1.bracket(&t2) + x2.bracket(&t1));
        let cv = 0.5 * x1.bracket(&t1);
        let m = space.local_moments(k);
        for (i, d) in space.local_dofs(k).iter().enumerate() {
            if let Some(d) = d {
                out[*d] += cu * m[i];
                out[n + *d] += cv * m[i];
            }
        }
    }
    Ok(out)
}

/// Pushes the matrix of `(theta, phi) -> 2 B_h(psi, theta, phi)` into `b`.
fn push_trilinear_jacobian(space: &FeSpace<'_>, psi: &DiscreteSolution, b: &mut TripletBuilder) {
    let n = space.n_dofs();
    for k in 0..space.mesh.n_triangles() {
        let (hu, hv) = (element_hessian(space, &psi.u, k), element_hessian(space, &psi.v, k));
        let hess = space.local_hessians(k);
        let m = space.local_moments(k);
        let dofs = space.local_dofs(k);
        for (i, di) in dofs.iter().enumerate() {
            let Some(di) = *di else { continue };
            if m[i] == 0.0 {
                continue;
            }
            for (j, dj) in dofs.iter().enumerate() {
                let Some(dj) = *dj else { continue };
                let bu = hu.bracket(&hess[j]) * m[i];
                let bv = hv.bracket(&hess[j]) * m[i];
                // u-test row: -([u, theta_2] + [v, theta_1]); v-test row: [u, theta_1].
                b.push(di, dj, -bv);
                b.push(di, n + dj, -bu);
                b.push(n + di, dj, bu);
            }
        }
    }
}

/// Block matrix of the linearised trilinear term `2 B_h(psi, ., .)`.
pub fn assemble_trilinear_jacobian(space: &FeSpace<'_>, psi: &DiscreteSolution) -> Result<SparseMatrix> {
    psi.check(space)?;
    let n = space.n_dofs();
    let mut b = TripletBuilder::new(2 * n, 2 * n);
    push_trilinear_jacobian(space, psi, &mut b);
    Ok(b.build())
}

/// Newton matrix `diag(a, a) + 2 B_h(psi, ., .)`.
pub fn assemble_newton_matrix(space: &FeSpace<'_>, a: &SparseMatrix, psi: &DiscreteSolution) -> Result<SparseMatrix> {
    psi.check(space)?;
    let n = space.n_dofs();
    let mut b = TripletBuilder::new(2 * n, 2 * n);
    for i in 0..n {
        for (j, v) in a.row(i) {
            b.push(i, j, v);
            b.push(n + i, n + j, v);
        }
    }
    push_trilinear_jacobian(space, psi, &mut b);
    Ok(b.build())
}

/// Load vector `((f, phi_i), (g, phi_i))` with a triangle rule of the given degree.
pub fn assemble_load(space: &FeSpace<'_>, loads: &dyn Loads, degree: usize) -> Result<Vec<f64>> {
    let rule = triangle_rule(degree)?;
    let n = space.n_dofs();
    let mut out = vec![0.0; 2 * n];
    for k in 0..space.mesh.n_triangles() {
        let g = &space.geometry[k];
        let dofs = space.local_dofs(k);
        let mut lf = [0.0; 6];
        let mut lg = [0.0; 6];
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            let p = g.to_physical(*l);
            let (fv, gv) = (loads.f(p), loads.g(p));
            let jets = space.eval_local(k, *l);
            for j in 0..6 {
                lf[j] += w * fv * jets[j].value;
                lg[j] += w * gv * jets[j].value;
            }
        }
        for (j, d) in dofs.iter().enumerate() {
            if let Some(d) = d {
                out[*d] += g.area * lf[j];
                out[n + *d] += g.area * lg[j];
            }
        }
    }
    Ok(out)
}

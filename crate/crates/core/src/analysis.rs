//! Discrete norms, errors against exact solutions, data oscillation, the
//! best-approximation term and empirical convergence rates.

use crate::assembly::{side_signs, DiscreteSolution, Loads};
use crate::error::{Error, Result};
use crate::femspace::{edge_barycentric, BrokenP2, ElementGeometry, FeSpace, Method};
use crate::geom::{dot, Jet, Point, Sym2};
use crate::mesh::Triangulation;
use crate::quadrature::{edge_rule, triangle_rule, TriangleRule};
use crate::solver::linear_solve_ctx;
use crate::sparse::TripletBuilder;

/// An exact solution `(u, v)` with value, gradient and Hessian, together with
/// the loads it induces.
pub trait ExactSolutionPair: Loads {
    fn u(&self, p: Point) -> Jet;
    fn v(&self, p: Point) -> Jet;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// Broken H2 seminorm.
    Nc,
    /// Broken seminorm plus `h_E^-1`-weighted normal-derivative jumps.
    Ip,
    /// IP norm plus `h_E^-3`-weighted value jumps.
    Dg,
    /// Broken seminorm plus squared edge means of normal-derivative jumps
    /// plus `h_E^-2`-weighted squared vertex-value jumps; defined for all three methods.
    UnifiedH,
}

impl NormKind {
    /// The energy norm naturally associated with a method.
    pub fn of_method(method: Method) -> NormKind {
        match method {
            Method::Morley => NormKind::Nc,
            Method::C0ip => NormKind::Ip,
            Method::Dg => NormKind::Dg,
        }
    }
}

fn geometries(mesh: &Triangulation) -> Vec<ElementGeometry> {
    (0..mesh.n_triangles()).map(|k| ElementGeometry::new(mesh, k)).collect()
}

/// Jump of value and gradient of `field` across edge `e` at parameter `s`,
/// with the trace convention on boundary edges.
fn edge_jump(mesh: &Triangulation, geo: &[ElementGeometry], field: &BrokenP2, e: usize, s: f64) -> (f64, Point) {
    let edge = &mesh.edges[e];
    let mut val = 0.0;
    let mut grad = [0.0, 0.0];
    for (k, sign) in side_signs(edge.plus, edge.minus) {
        let l = edge_barycentric(mesh, k, e, s);
        val += sign * field.value(k, l);
        let g = field.grad(&geo[k], k, l);
        grad[0] += sign * g[0];
        grad[1] += sign * g[1];
    }
    (val, grad)
}

/// Squared edge terms of a norm, attributed per edge.
fn jump_terms_sq(mesh: &Triangulation, geo: &[ElementGeometry], field: &BrokenP2, kind: NormKind) -> Vec<f64> {
    let rule = edge_rule(5).expect("static degree");
    mesh.edges
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let h = edge.length;
            match kind {
                NormKind::Nc => 0.0,
                NormKind::Ip | NormKind::Dg => {
                    let mut dn2 = 0.0;
                    let mut v2 = 0.0;
                    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                        let (jv, jg) = edge_jump(mesh, geo, field, e, s);
                        dn2 += w * h * dot(jg, edge.normal).powi(2);
                        v2 += w * h * jv * jv;
                    }
                    let mut t = dn2 / h;
                    if kind == NormKind::Dg {
                        t += v2 / (h * h * h);
                    }
                    t
                }
                NormKind::UnifiedH => {
                    let mean_dn: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&s, &w)| w * dot(edge_jump(mesh, geo, field, e, s).1, edge.normal))
                        .sum();
                    let vz: f64 = [0.0, 1.0].iter().map(|&s| edge_jump(mesh, geo, field, e, s).0.powi(2)).sum();
                    mean_dn * mean_dn + vz / (h * h)
                }
            }
        })
        .collect()
}

fn broken_seminorm_sq(
    geo: &[ElementGeometry],
    field: &BrokenP2,
    exact_hess: Option<&dyn Fn(Point) -> Sym2>,
    rule: &TriangleRule,
) -> f64 {
    geo.iter()
        .enumerate()
        .map(|(k, g)| {
            let hk = field.hessian(g, k);
            match exact_hess {
                None => g.area * hk.frobenius_sq(),
                Some(h) => {
                    g.area
                        * rule
                            .physical_points(&g.points)
                            .map(|(p, w)| w * h(p).sub(&hk).frobenius_sq())
                            .sum::<f64>()
                }
            }
        })
        .sum()
}

/// Norm of a piecewise quadratic field.
pub fn broken_norm(mesh: &Triangulation, field: &BrokenP2, kind: NormKind) -> f64 {
    let geo = geometries(mesh);
    let rule = triangle_rule(2).expect("static degree");
    let vol = broken_seminorm_sq(&geo, field, None, &rule);
    (vol + jump_terms_sq(mesh, &geo, field, kind).iter().sum::<f64>()).sqrt()
}

/// Unified norm of a coefficient vector of any of the three spaces.
pub fn unified_h_norm(space: &FeSpace<'_>, coeffs: &[f64]) -> f64 {
    broken_norm(space.mesh, &space.to_broken(coeffs), NormKind::UnifiedH)
}

/// Norm of `w - field` where `w` is smooth with vanishing trace and
/// gradient on the boundary, so that its own jumps vanish.
pub fn smooth_minus_discrete_norm(
    mesh: &Triangulation,
    exact_hess: &dyn Fn(Point) -> Sym2,
    field: &BrokenP2,
    kind: NormKind,
    degree: usize,
) -> Result<f64> {
    let geo = geometries(mesh);
    let rule = triangle_rule(degree)?;
    let vol = broken_seminorm_sq(&geo, field, Some(exact_hess), &rule);
    Ok((vol + jump_terms_sq(mesh, &geo, field, kind).iter().sum::<f64>()).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub u: f64,
    pub v: f64,
    /// `sqrt(u^2 + v^2)`.
    pub total: f64,
}

/// Errors `u - u_h`, `v - v_h` in the chosen norm.
pub fn error_norm(
    space: &FeSpace<'_>,
    sol: &DiscreteSolution,
    exact: &dyn ExactSolutionPair,
    kind: NormKind,
    degree: usize,
) -> Result<ErrorNorms> {
    sol.check(space)?;
    let eu = smooth_minus_discrete_norm(space.mesh, &|p| exact.u(p).hess, &space.to_broken(&sol.u), kind, degree)?;
    let ev = smooth_minus_discrete_norm(space.mesh, &|p| exact.v(p).hess, &space.to_broken(&sol.v), kind, degree)?;
    Ok(ErrorNorms {
        u: eu,
        v: ev,
        total: eu.hypot(ev),
    })
}

/// Local oscillations `h_K^4 |f - mean_K f|^2_{L2(K)}`.
pub fn local_oscillation_sq(mesh: &Triangulation, f: &dyn Fn(Point) -> f64, degree: usize) -> Result<Vec<f64>> {
    let rule = triangle_rule(degree)?;
    Ok((0..mesh.n_triangles())
        .map(|k| {
            let tri = mesh.triangle_points(k);
            let vals: Vec<(f64, f64)> = rule.physical_points(&tri).map(|(p, w)| (f(p), w)).collect();
            let mean: f64 = vals.iter().map(|(v, w)| v * w).sum();
            let l2: f64 = mesh.area(k) * vals.iter().map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>();
            mesh.diameter(k).powi(4) * l2
        })
        .collect())
}

/// `osc(f) = sqrt(sum_K h_K^4 |f - mean_K f|^2)`.
pub fn oscillation(mesh: &Triangulation, f: &dyn Fn(Point) -> f64, degree: usize) -> Result<f64> {
    Ok(local_oscillation_sq(mesh, f, degree)?.iter().sum::<f64>().sqrt())
}

/// `sqrt(osc(f)^2 + osc(g)^2)` for both loads.
pub fn load_oscillation(mesh: &Triangulation, loads: &dyn Loads, degree: usize) -> Result<f64> {
    let of = oscillation(mesh, &|p| loads.f(p), degree)?;
    let og = oscillation(mesh, &|p| loads.g(p), degree)?;
    Ok(of.hypot(og))
}

/// `|(1 - Pi_0) D^2 w|` over the mesh for a scalar function with Hessian `hess`.
pub fn hessian_deviation(mesh: &Triangulation, hess: &dyn Fn(Point) -> Sym2, degree: usize) -> Result<f64> {
    let rule = triangle_rule(degree)?;
    let mut total = 0.0;
    for k in 0..mesh.n_triangles() {
        let tri = mesh.triangle_points(k);
        let vals: Vec<(Sym2, f64)> = rule.physical_points(&tri).map(|(p, w)| (hess(p), w)).collect();
        let mut mean = Sym2::ZERO;
        for (h, w) in &vals {
            mean.axpy(*w, h);
        }
        total += mesh.area(k) * vals.iter().map(|(h, w)| w * h.sub(&mean).frobenius_sq()).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Best-approximation term `|(1 - Pi_0) D^2 Psi|` over both components.
pub fn best_approx_term(mesh: &Triangulation, exact: &dyn ExactSolutionPair, degree: usize) -> Result<f64> {
    let a = hessian_deviation(mesh, &|p| exact.u(p).hess, degree)?;
    let b = hessian_deviation(mesh, &|p| exact.v(p).hess, degree)?;
    Ok(a.hypot(b))
}

/// `min |w - w_dG|_h` over all discontinuous P2 functions, for a smooth `w`
/// vanishing with its gradient on the boundary. Solves the normal equations
/// of the quadratic program and evaluates the norm of the minimiser directly.
pub fn best_dg_approximation(mesh: &Triangulation, w: &dyn Fn(Point) -> Jet, degree: usize) -> Result<f64> {
    let space = FeSpace::new(mesh, Method::Dg);
    let n = space.n_dofs();
    let rule = triangle_rule(degree)?;
    let mut b = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    for k in 0..mesh.n_triangles() {
        let g = &space.geometry[k];
        let hess = space.local_hessians(k);
        let mut mean = Sym2::ZERO;
        for (p, wq) in rule.physical_points(&g.points) {
            mean.axpy(wq, &w(p).hess);
        }
        for i in 0..6 {
            rhs[6 * k + i] = g.area * mean.ddot(&hess[i]);
            for j in 0..6 {
                b.push(6 * k + i, 6 * k + j, g.area * hess[i].ddot(&hess[j]));
            }
        }
    }
    // Each jump term is a squared linear functional: add l l^T.
    let erule = edge_rule(3)?;
    for (e, edge) in mesh.edges.iter().enumerate() {
        let h = edge.length;
        let mut mean_dn: Vec<(usize, f64)> = Vec::with_capacity(12);
        let mut vjump: [Vec<(usize, f64)>; 2] = [Vec::with_capacity(12), Vec::with_capacity(12)];
        for (k, sign) in side_signs(edge.plus, edge.minus) {
            for (&s, &wq) in erule.points.iter().zip(&erule.weights) {
                let jets = space.eval_local(k, edge_barycentric(mesh, k, e, s));
                for j in 0..6 {
                    mean_dn.push((6 * k + j, sign * wq * dot(jets[j].grad, edge.normal)));
                }
            }
            for (z, s) in [0.0, 1.0].into_iter().enumerate() {
                let jets = space.eval_local(k, edge_barycentric(mesh, k, e, s));
                for j in 0..6 {
                    vjump[z].push((6 * k + j, sign * jets[j].value / h));
                }
            }
        }
        for l in std::iter::once(&mean_dn).chain(vjump.iter()) {
            for &(i, a) in l {
                for &(j, c) in l {
                    b.push(i, j, a * c);
                }
            }
        }
    }
    let c = linear_solve_ctx(&b.build(), &rhs, "best approximation")?;
    let field = space.to_broken(&c);
    smooth_minus_discrete_norm(mesh, &|p| w(p).hess, &field, NormKind::UnifiedH, degree)
}

/// One row of a convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub method: Method,
    pub level: usize,
    pub ndof: usize,
    /// Error of `u` in the unified norm.
    pub error_u: f64,
    /// Error of `v` in the unified norm.
    pub error_v: f64,
    pub error_h_norm: f64,
    /// Total error in the method's own energy norm.
    pub error_method_norm: f64,
    pub estimator: f64,
    pub oscillation: f64,
    /// Trailing empirical rate of `error_h_norm` against `ndof`; NaN on the first level.
    pub rate: f64,
    pub newton_iterations: usize,
}

/// Least-squares slope `s` in `err ~ C ndof^(-s)`.
pub fn fit_rate(ndof: &[usize], err: &[f64]) -> Result<f64> {
    if ndof.len() != err.len() {
        return Err(Error::Dimension("ndof and error columns differ in length".into()));
    }
    if ndof.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: ndof.len() });
    }
    let xs: Vec<f64> = ndof.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("ndof must vary to fit a rate".into()));
    }
    Ok(-sxy / sxx)
}

/// Per-column slopes over the trailing window of a history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRates {
    pub error_u: f64,
    pub error_v: f64,
    pub error_h_norm: f64,
    pub error_method_norm: f64,
    pub estimator: f64,
}

/// Slopes fitted to the last `window` records; at least three records are required.
pub fn convergence_rates(records: &[ConvergenceRecord], window: usize) -> Result<ConvergenceRates> {
    if records.len() < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: records.len() });
    }
    let tail = &records[records.len() - window.clamp(3, records.len())..];
    let ndof: Vec<usize> = tail.iter().map(|r| r.ndof).collect();
    let col = |f: fn(&ConvergenceRecord) -> f64| fit_rate(&ndof, &tail.iter().map(f).collect::<Vec<_>>());
    Ok(ConvergenceRates {
        error_u: col(|r| r.error_u)?,
        error_v: col(|r| r.error_v)?,
        error_h_norm: col(|r| r.error_h_norm)?,
        error_method_norm: col(|r| r.error_method_norm)?,
        estimator: col(|r| r.estimator)?,
    })
}

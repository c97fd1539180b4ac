//! Residual a posteriori error estimators and Doerfler marking.

use crate::assembly::{side_signs, DiscreteSolution, Loads};
use crate::error::{Error, Result};
use crate::femspace::{edge_barycentric, BrokenP2, FeSpace, Method};
use crate::geom::dot;
use crate::quadrature::{edge_rule, triangle_rule};

/// Squared local error indicators `eta^2(K)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEstimates {
    pub method: Method,
    pub eta_sq: Vec<f64>,
}

impl LocalEstimates {
    pub fn total_sq(&self) -> f64 {
        self.eta_sq.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.total_sq().sqrt()
    }
}

/// Edge contribution of one scalar field to the estimator of `method`.
fn edge_term(space: &FeSpace<'_>, field: &BrokenP2, e: usize, rule: &crate::quadrature::EdgeRule) -> f64 {
    let mesh = space.mesh;
    let edge = &mesh.edges[e];
    let h = edge.length;
    let method = space.method();
    let mut out = 0.0;

    // Hessians are constant on each element, so Hessian jumps are constant along the edge.
    if let Some(minus) = edge.minus {
        let jump_h = field
            .hessian(&space.geometry[edge.plus], edge.plus)
            .sub(&field.hessian(&space.geometry[minus], minus));
        match method {
            Method::Morley => {
                let t = jump_h.apply(edge.tangent);
                out += h * h * dot(t, t);
            }
            Method::C0ip => out += h * h * jump_h.quad(edge.normal).powi(2),
            Method::Dg => {}
        }
    }

    if method != Method::Morley {
        let mut grad_sq = 0.0;
        let mut val_sq = 0.0;
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let mut jv = 0.0;
            let mut jg = [0.0, 0.0];
            for (k, sign) in side_signs(edge.plus, edge.minus) {
                let l = edge_barycentric(mesh, k, e, s);
                jv += sign * field.value(k, l);
                let g = field.grad(&space.geometry[k], k, l);
                jg[0] += sign * g[0];
                jg[1] += sign * g[1];
            }
            grad_sq += w * h * dot(jg, jg);
            val_sq += w * h * jv * jv;
        }
        out += grad_sq / h;
        if method == Method::Dg {
            out += val_sq / (h * h * h);
        }
    }
    out
}

/// Local indicators of the residual estimator matching the space's method.
///
/// Volume terms are `h_K^4 (|f + [u_h, v_h]|^2 + |2 g - [u_h, u_h]|^2)`. Edge
/// terms are split equally between the two neighbours of an interior edge and
/// given in full to the element of a boundary edge.
pub fn estimate(space: &FeSpace<'_>, sol: &DiscreteSolution, loads: &dyn Loads, degree: usize) -> Result<LocalEstimates> {
    sol.check(space)?;
    let mesh = space.mesh;
    let rule = triangle_rule(degree)?;
    let erule = edge_rule(5)?;
    let (bu, bv) = (space.to_broken(&sol.u), space.to_broken(&sol.v));
    let mut eta_sq: Vec<f64> = (0..mesh.n_triangles())
        .map(|k| {
            let g = &space.geometry[k];
            let (hu, hv) = (bu.hessian(g, k), bv.hessian(g, k));
            let (uv, uu) = (hu.bracket(&hv), hu.bracket(&hu));
            let res: f64 = rule
                .physical_points(&g.points)
                .map(|(p, w)| w * ((loads.f(p) + uv).powi(2) + (2.0 * loads.g(p) - uu).powi(2)))
                .sum();
            g.diameter.powi(4) * g.area * res
        })
        .collect();
    for (e, edge) in mesh.edges.iter().enumerate() {
        let t = edge_term(space, &bu, e, &erule) + edge_term(space, &bv, e, &erule);
        match edge.minus {
            Some(m) => {
                eta_sq[edge.plus] += 0.5 * t;
                eta_sq[m] += 0.5 * t;
            }
            None => eta_sq[edge.plus] += t,
        }
    }
    Ok(LocalEstimates {
        method: space.method(),
        eta_sq,
    })
}

/// Minimal set of elements carrying a `theta` fraction of the total `eta^2`,
/// chosen greedily by decreasing `eta^2` with ties broken by ascending index.
/// Returned in ascending index order.
pub fn dorfler_mark(eta_sq: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("bulk parameter must lie in (0, 1], got {theta}")));
    }
    if let Some(bad) = eta_sq.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("indicators must be finite and nonnegative, got {bad}")));
    }
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&k| eta_sq[k]).sum();
    let goal = theta * total;
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for &k in &order {
        if acc >= goal {
            break;
        }
        acc += eta_sq[k];
        marked.push(k);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Checks the bulk criterion for a marked set.
pub fn satisfies_bulk(eta_sq: &[f64], marked: &[usize], theta: f64) -> bool {
    let total: f64 = eta_sq.iter().sum();
    marked.iter().map(|&k| eta_sq[k]).sum::<f64>() >= theta * total * (1.0 - 1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::FnLoads;
    use crate::femspace::lagrange_interpolate;
    use crate::geom::Point;
    use crate::mesh::{uniform_refine, Triangulation};

    #[test]
    fn marking_examples() {
        assert_eq!(dorfler_mark(&[4.0, 3.0, 2.0, 1.0], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(dorfler_mark(&[1.0, 0.0, 3.0, 2.0], 1.0).unwrap(), vec![0, 2, 3]);
        assert_eq!(dorfler_mark(&[2.0, 2.0, 2.0], 0.34).unwrap(), vec![0, 1]);
        assert!(dorfler_mark(&[0.0, 0.0], 0.5).unwrap().is_empty());
        assert!(dorfler_mark(&[1.0], 0.0).is_err());
        assert!(dorfler_mark(&[1.0], 1.5).is_err());
        assert!(dorfler_mark(&[-1.0], 0.5).is_err());
    }

    #[test]
    fn global_quadratic_with_matching_loads_has_zero_estimate() {
        // u = v = x^2 + y^2 everywhere: [u, v] = 8, so f = -8 and g = 4 remove the
        // volume residuals, and continuous quadratics have no jumps inside.
        let m = uniform_refine(&Triangulation::unit_square());
        let s = FeSpace::new(&m, Method::Dg);
        let c = lagrange_interpolate(&s, |p| p[0] * p[0] + p[1] * p[1]).unwrap();
        let sol = DiscreteSolution { method: Method::Dg, u: c.clone(), v: c };
        let est = estimate(&s, &sol, &FnLoads(|_| -8.0, |_| 4.0), 8).unwrap();
        // Only boundary traces remain; interior elements are exact.
        for (k, &e) in est.eta_sq.iter().enumerate() {
            let touches_boundary = m.tri_to_edge[k].iter().any(|&e| m.edges[e].is_boundary());
            if !touches_boundary {
                assert!(e < 1e-20, "element {k}: {e}");
            }
        }
    }

    #[test]
    fn zero_solution_gives_volume_terms_only() {
        let m = uniform_refine(&Triangulation::lshape());
        let f = |p: Point| 1.0 + p[0] * p[1];
        for method in Method::ALL {
            let s = FeSpace::new(&m, method);
            let est = estimate(&s, &DiscreteSolution::zeros(&s), &FnLoads(f, |_| 0.0), 8).unwrap();
            let rule = triangle_rule(8).unwrap();
            for k in 0..m.n_triangles() {
                let tri = m.triangle_points(k);
                let want = m.diameter(k).powi(4) * crate::quadrature::integrate_triangle(&rule, |p| f(p).powi(2), &tri).unwrap();
                assert!((est.eta_sq[k] - want).abs() < 1e-12 * want, "{method} {k}");
            }
        }
    }
}

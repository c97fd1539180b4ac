//! Gauss rules on the reference edge `[0,1]` and the reference triangle.
//!
//! Triangle rules are conical (collapsed) products of Gauss-Legendre rules,
//! so every weight is positive and every point lies strictly inside.

use crate::error::{Error, Result};
use crate::geom::{cross, sub, Point};

pub const MAX_DEGREE: usize = 10;

#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    /// Weights sum to 1, the length of `[0,1]`.
    pub weights: Vec<f64>,
    pub degree: usize,
}

#[derive(Clone, Debug)]
pub struct TriangleRule {
    /// Barycentric coordinates `(l0, l1, l2)`.
    pub points: Vec<[f64; 3]>,
    /// Weights sum to 1; multiply by the triangle area to integrate.
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Gauss-Legendre nodes and weights on `[0,1]` with `n` points.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(z) and its derivative.
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    let (points, weights) = gauss_legendre(degree / 2 + 1);
    Ok(EdgeRule {
        points,
        weights,
        degree,
    })
}

pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    // x = s, y = (1 - s) t with Jacobian (1 - s): one extra degree in s.
    let (s, ws) = gauss_legendre((degree + 2).div_ceil(2));
    let (t, wt) = gauss_legendre((degree + 1).div_ceil(2));
    let mut points = Vec::with_capacity(s.len() * t.len());
    let mut weights = Vec::with_capacity(s.len() * t.len());
    for (si, wsi) in s.iter().zip(&ws) {
        for (tj, wtj) in t.iter().zip(&wt) {
            let x = *si;
            let y = (1.0 - si) * tj;
            points.push([1.0 - x - y, x, y]);
            weights.push(2.0 * wsi * wtj * (1.0 - si));
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        degree,
    })
}

impl TriangleRule {
    /// Quadrature points mapped onto the triangle with the given vertices.
    pub fn physical_points(&self, tri: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let tri = *tri;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            (
                [
                    l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
                    l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
                ],
                w,
            )
        })
    }
}

/// Integrates `f` over the triangle with vertices `tri` (any orientation).
pub fn integrate_triangle(rule: &TriangleRule, f: impl Fn(Point) -> f64, tri: &[Point; 3]) -> Result<f64> {
    let area = 0.5 * cross(sub(tri[1], tri[0]), sub(tri[2], tri[0])).abs();
    if !(area > 0.0) {
        return Err(Error::DegenerateTriangle { triangle: 0, area });
    }
    Ok(area * rule.physical_points(tri).map(|(p, w)| w * f(p)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn reference_values() {
        let r2 = triangle_rule(2).unwrap();
        assert!((integrate_triangle(&r2, |_| 1.0, &REF).unwrap() - 0.5).abs() < 1e-15);
        assert!((integrate_triangle(&r2, |p| p[0] * p[0], &REF).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        let r4 = triangle_rule(4).unwrap();
        let v = integrate_triangle(&r4, |p| (p[0] * p[1]).powi(2), &REF).unwrap();
        assert!((v - 1.0 / 180.0).abs() < 1e-15);
        let r1 = triangle_rule(1).unwrap();
        assert!((integrate_triangle(&r1, |p| p[0], &REF).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn edge_values() {
        let apply = |deg, f: fn(f64) -> f64| {
            let r = edge_rule(deg).unwrap();
            r.points.iter().zip(&r.weights).map(|(t, w)| w * f(*t)).sum::<f64>()
        };
        assert!((apply(3, |t| t.powi(3)) - 0.25).abs() < 1e-15);
        assert!((apply(1, |t| t) - 0.5).abs() < 1e-15);
        assert!((apply(5, |t| t.powi(5)) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(edge_rule(3).unwrap().points.len(), 2);
        assert_eq!(edge_rule(1).unwrap().points.len(), 1);
        assert_eq!(edge_rule(5).unwrap().points.len(), 3);
    }

    #[test]
    fn exact_on_monomials_reference_and_mapped() {
        let mapped = [[0.3, -0.2], [1.7, 0.4], [0.1, 1.1]];
        for deg in 1..=MAX_DEGREE {
            let rule = triangle_rule(deg).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let er = edge_rule(deg).unwrap();
            assert!(er.weights.iter().all(|&w| w > 0.0));
            for a in 0..=deg as u32 {
                let t = er.points.iter().zip(&er.weights).map(|(t, w)| w * t.powi(a as i32)).sum::<f64>();
                assert!((t - 1.0 / (a as f64 + 1.0)).abs() < 1e-13, "edge deg {deg} t^{a}");
                for b in 0..=(deg as u32 - a) {
                    let f = |p: Point| p[0].powi(a as i32) * p[1].powi(b as i32);
                    let got = integrate_triangle(&rule, f, &REF).unwrap();
                    assert!((got - monomial_exact(a, b)).abs() < 1e-13, "deg {deg} x^{a} y^{b}");
                    // Mapped element: pull back through the affine map and use the
                    // reference formula on the expanded polynomial via a fine rule.
                    let fine = triangle_rule(MAX_DEGREE).unwrap();
                    let want = integrate_triangle(&fine, f, &mapped).unwrap();
                    let got = integrate_triangle(&rule, f, &mapped).unwrap();
                    assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert!(matches!(triangle_rule(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(triangle_rule(11), Err(Error::UnsupportedDegree(11))));
        assert!(edge_rule(0).is_err());
    }

    #[test]
    fn linearity_and_constants() {
        let rule = triangle_rule(6).unwrap();
        let tri = [[0.0, 0.0], [2.0, 0.5], [0.5, 1.5]];
        let area = 0.5 * cross(sub(tri[1], tri[0]), sub(tri[2], tri[0]));
        assert!((integrate_triangle(&rule, |_| 3.0, &tri).unwrap() - 3.0 * area).abs() < 1e-14);
        let f = |p: Point| (p[0] * 3.0).sin();
        let g = |p: Point| p[1].exp();
        let lhs = integrate_triangle(&rule, |p| 2.0 * f(p) - 0.7 * g(p), &tri).unwrap();
        let rhs = 2.0 * integrate_triangle(&rule, f, &tri).unwrap() - 0.7 * integrate_triangle(&rule, g, &tri).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(integrate_triangle(&rule, f, &flat).is_err());
    }
}

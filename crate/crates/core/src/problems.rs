//! Manufactured solutions used by the convergence studies.

use std::f64::consts::PI;

use crate::analysis::ExactSolutionPair;
use crate::assembly::Loads;
use crate::geom::{Jet, Point, Sym2};

/// Smooth pair on the unit square: `u = sin^2(pi x) sin^2(pi y)` and
/// `v = x^2 y^2 (1-x)^2 (1-y)^2`, with loads `f = lap^2 u - [u, v]` and
/// `g = lap^2 v + [u, u] / 2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SquareSolution;

pub fn exact_square() -> SquareSolution {
    SquareSolution
}

/// Derivatives 0..=4 of `sin^2(pi t)`.
fn sin2(t: f64) -> [f64; 5] {
    let s = (PI * t).sin();
    let (s2, c2) = (2.0 * PI * t).sin_cos();
    [s * s, PI * s2, 2.0 * PI * PI * c2, -4.0 * PI.powi(3) * s2, -8.0 * PI.powi(4) * c2]
}

/// Derivatives 0..=4 of `t^2 (1-t)^2`.
fn quartic(t: f64) -> [f64; 5] {
    [
        t * t * (1.0 - t) * (1.0 - t),
        2.0 * t - 6.0 * t * t + 4.0 * t * t * t,
        2.0 - 12.0 * t + 12.0 * t * t,
        -12.0 + 24.0 * t,
        24.0,
    ]
}

fn tensor_jet(a: [f64; 5], b: [f64; 5]) -> Jet {
    Jet {
        value: a[0] * b[0],
        grad: [a[1] * b[0], a[0] * b[1]],
        hess: Sym2::new(a[2] * b[0], a[1] * b[1], a[0] * b[2]),
    }
}

fn tensor_bilaplacian(a: [f64; 5], b: [f64; 5]) -> f64 {
    a[4] * b[0] + 2.0 * a[2] * b[2] + a[0] * b[4]
}

impl SquareSolution {
    pub fn bilaplacian_u(&self, p: Point) -> f64 {
        tensor_bilaplacian(sin2(p[0]), sin2(p[1]))
    }

    pub fn bilaplacian_v(&self, p: Point) -> f64 {
        tensor_bilaplacian(quartic(p[0]), quartic(p[1]))
    }
}

impl Loads for SquareSolution {
    fn f(&self, p: Point) -> f64 {
        self.bilaplacian_u(p) - self.u(p).hess.bracket(&self.v(p).hess)
    }

    fn g(&self, p: Point) -> f64 {
        let hu = self.u(p).hess;
        self.bilaplacian_v(p) + 0.5 * hu.bracket(&hu)
    }
}

impl ExactSolutionPair for SquareSolution {
    fn u(&self, p: Point) -> Jet {
        tensor_jet(sin2(p[0]), sin2(p[1]))
    }

    fn v(&self, p: Point) -> Jet {
        tensor_jet(quartic(p[0]), quartic(p[1]))
    }
}

/// Exponent and opening angle of the corner singularity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularSolutionParams {
    pub alpha: f64,
    pub omega: f64,
}

impl Default for SingularSolutionParams {
    fn default() -> Self {
        SingularSolutionParams {
            alpha: 0.5444837367,
            omega: 1.5 * PI,
        }
    }
}

impl SingularSolutionParams {
    /// `|sin^2(alpha omega) - alpha^2 sin^2(omega)|`, zero for an exact root.
    pub fn residual(&self) -> f64 {
        let (a, w) = (self.alpha, self.omega);
        ((a * w).sin().powi(2) - a * a * w.sin().powi(2)).abs()
    }

    /// Angular factor and its first two derivatives.
    pub fn angular(&self, theta: f64) -> [f64; 3] {
        let (a, w) = (self.alpha, self.omega);
        let (am, ap) = (a - 1.0, a + 1.0);
        let c1 = (am * w).sin() / am - (ap * w).sin() / ap;
        let c2 = (am * w).cos() - (ap * w).cos();
        let (sm, cm) = (am * theta).sin_cos();
        let (sp, cp) = (ap * theta).sin_cos();
        [
            c1 * (cm - cp) - (sm / am - sp / ap) * c2,
            c1 * (-am * sm + ap * sp) - (cm - cp) * c2,
            c1 * (-am * am * cm + ap * ap * cp) - (-am * sm + ap * sp) * c2,
        ]
    }
}

/// Corner singularity on the L-shaped domain `(-1,1)^2` minus `[0,1) x (-1,0]`:
/// `u = v = (1-x^2)^2 (1-y^2)^2 r^(1+alpha) g(theta)` with `theta` measured
/// counterclockwise from the positive x-axis, `theta` in `[0, 3 pi / 2]` on
/// the domain. Loads are `f = lap^2 u - [u, u]` and `g = lap^2 u + [u, u] / 2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LshapeSolution {
    pub params: SingularSolutionParams,
}

pub fn exact_lshape() -> LshapeSolution {
    LshapeSolution::default()
}

impl LshapeSolution {
    /// Polar angle with the branch cut at `-pi/4`, inside the removed quadrant,
    /// so that finite-difference stencils near the slit edges see a smooth function.
    pub fn angle(p: Point) -> f64 {
        let t = p[1].atan2(p[0]);
        if t < -0.25 * PI {
            t + 2.0 * PI
        } else {
            t
        }
    }

    /// Value, gradient and Hessian of the singular part `r^(1+alpha) g(theta)`.
    /// The Hessian is unbounded at the corner and is returned as NaN there.
    pub fn singular_part(&self, p: Point) -> Jet {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            let nan = f64::NAN;
            return Jet {
                value: 0.0,
                grad: [0.0, 0.0],
                hess: Sym2::new(nan, nan, nan),
            };
        }
        let theta = Self::angle(p);
        let beta = 1.0 + self.params.alpha;
        let [g0, g1, g2] = self.params.angular(theta);
        let rb = r.powf(beta);
        let s = rb * g0;
        let s_r = beta * rb / r * g0;
        let s_rr = beta * (beta - 1.0) * rb / (r * r) * g0;
        let s_t = rb * g1;
        let s_tt = rb * g2;
        let s_rt = beta * rb / r * g1;
        let (c, sn) = (theta.cos(), theta.sin());
        let (er, et) = ([c, sn], [-sn, c]);
        let grad = [s_r * er[0] + s_t / r * et[0], s_r * er[1] + s_t / r * et[1]];
        let h_rr = s_rr;
        let h_rt = s_rt / r - s_t / (r * r);
        let h_tt = s_r / r + s_tt / (r * r);
        // H = h_rr er er^T + h_rt (er et^T + et er^T) + h_tt et et^T
        let hess = Sym2::new(
            h_rr * er[0] * er[0] + 2.0 * h_rt * er[0] * et[0] + h_tt * et[0] * et[0],
            h_rr * er[0] * er[1] + h_rt * (er[0] * et[1] + et[0] * er[1]) + h_tt * et[0] * et[1],
            h_rr * er[1] * er[1] + 2.0 * h_rt * er[1] * et[1] + h_tt * et[1] * et[1],
        );
        Jet { value: s, grad, hess }
    }

    /// The cutoff `(1-x^2)^2 (1-y^2)^2`.
    pub fn cutoff(p: Point) -> Jet {
        let d = |t: f64| {
            let q = 1.0 - t * t;
            [q * q, -4.0 * t * q, 12.0 * t * t - 4.0]
        };
        let (a, b) = (d(p[0]), d(p[1]));
        Jet {
            value: a[0] * b[0],
            grad: [a[1] * b[0], a[0] * b[1]],
            hess: Sym2::new(a[2] * b[0], a[1] * b[1], a[0] * b[2]),
        }
    }

    fn jet(&self, p: Point) -> Jet {
        let (s, c) = (self.singular_part(p), Self::cutoff(p));
        let mut hess = s.hess.scale(c.value);
        hess.axpy(s.value, &c.hess);
        hess = hess.add(&Sym2::sym_outer(c.grad, s.grad));
        Jet {
            value: c.value * s.value,
            grad: [
                c.value * s.grad[0] + s.value * c.grad[0],
                c.value * s.grad[1] + s.value * c.grad[1],
            ],
            hess,
        }
    }

    fn laplacian(&self, p: Point) -> f64 {
        self.jet(p).hess.trace()
    }

    /// `lap^2 u` by fourth-order central differences of the exact Laplacian,
    /// with step `1e-4 r`.
    pub fn bilaplacian(&self, p: Point) -> f64 {
        let r = p[0].hypot(p[1]);
        let h = 1e-4 * r;
        let mut out = 0.0;
        for d in 0..2 {
            let at = |k: f64| {
                let mut q = p;
                q[d] += k * h;
                self.laplacian(q)
            };
            out += (-at(2.0) + 16.0 * at(1.0) - 30.0 * at(0.0) + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * h * h);
        }
        out
    }
}

impl Loads for LshapeSolution {
    fn f(&self, p: Point) -> f64 {
        let h = self.jet(p).hess;
        self.bilaplacian(p) - h.bracket(&h)
    }

    fn g(&self, p: Point) -> f64 {
        let h = self.jet(p).hess;
        self.bilaplacian(p) + 0.5 * h.bracket(&h)
    }
}

impl ExactSolutionPair for LshapeSolution {
    fn u(&self, p: Point) -> Jet {
        self.jet(p)
    }

    fn v(&self, p: Point) -> Jet {
        self.jet(p)
    }
}

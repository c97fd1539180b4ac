//! Small fixed-size geometry helpers shared by every module.

/// A point or vector in the plane.
pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Symmetric 2x2 matrix, used for Hessians.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    /// Symmetrised outer product `a b^T + b a^T`.
    pub fn sym_outer(a: Point, b: Point) -> Self {
        Sym2 {
            xx: 2.0 * a[0] * b[0],
            xy: a[0] * b[1] + a[1] * b[0],
            yy: 2.0 * a[1] * b[1],
        }
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.ddot(self)
    }

    pub fn apply(&self, p: Point) -> Point {
        [self.xx * p[0] + self.xy * p[1], self.xy * p[0] + self.yy * p[1]]
    }

    /// `n^T A n`.
    pub fn quad(&self, n: Point) -> f64 {
        dot(n, self.apply(n))
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Von Karman bracket `[a, b] = a_xx b_yy + a_yy b_xx - 2 a_xy b_xy`.
    pub fn bracket(&self, other: &Sym2) -> f64 {
        self.xx * other.yy + self.yy * other.xx - 2.0 * self.xy * other.xy
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn axpy(&mut self, a: f64, o: &Sym2) {
        self.xx += a * o.xx;
        self.xy += a * o.xy;
        self.yy += a * o.yy;
    }
}

/// Value, gradient and Hessian of a scalar function at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Point,
    pub hess: Sym2,
}

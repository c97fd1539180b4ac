//! Sparse linear solves and Newton's method for the discrete plate equations.

use faer::prelude::*;
use faer::{Col, Side};

use crate::assembly::{
    assemble_biharmonic, assemble_load, assemble_newton_matrix, assemble_trilinear_vector, DiscreteSolution,
    Loads, PenaltyConfig,
};
use crate::error::{Error, Result};
use crate::femspace::FeSpace;
use crate::sparse::SparseMatrix;

/// Relative residual target of the iterative refinement in [`linear_solve`].
pub const LINEAR_TOL: f64 = 1e-10;

/// Relative residual below which a stagnating Newton iteration counts as converged.
const STAGNATION_TOL: f64 = 1e-6;

/// Largest relative residual [`linear_solve`] accepts once refinement stagnates.
/// Fine-mesh fourth-order systems have condition numbers near `1e10`, so the
/// target above is not always reachable in double precision.
pub const LINEAR_ACCEPT: f64 = 1e-6;

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual_of(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

fn fail(context: &str, reason: impl Into<String>) -> Error {
    Error::LinearSolve {
        context: context.to_string(),
        reason: reason.into(),
    }
}

/// Solves `A x = b` by sparse LU with a few steps of iterative refinement.
/// Refinement stops at `|A x - b| <= 1e-10 |b|` or when it stops improving;
/// the solve fails if the final relative residual exceeds [`LINEAR_ACCEPT`].
pub fn linear_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    linear_solve_ctx(a, b, "linear system")
}

pub(crate) fn linear_solve_ctx(a: &SparseMatrix, b: &[f64], context: &str) -> Result<Vec<f64>> {
    let mut x = linear_solve_many(a, &[b], context)?;
    Ok(x.pop().expect("one solution per right-hand side"))
}

/// Solves `A x = b` for several right-hand sides with a single factorisation.
pub(crate) fn linear_solve_many(a: &SparseMatrix, rhs: &[&[f64]], context: &str) -> Result<Vec<Vec<f64>>> {
    let n = a.n_rows;
    if a.n_cols != n || rhs.iter().any(|b| b.len() != n) {
        return Err(Error::Dimension(format!(
            "{}x{} matrix with right-hand sides of length {:?}",
            a.n_rows,
            a.n_cols,
            rhs.iter().map(|b| b.len()).collect::<Vec<_>>()
        )));
    }
    if n == 0 || rhs.iter().all(|b| norm2(b) == 0.0) {
        return Ok(vec![vec![0.0; n]; rhs.len()]);
    }
    let lu = a
        .to_faer()
        .sp_lu()
        .map_err(|e| fail(context, format!("LU factorisation failed: {e:?}")))?;
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let col = Col::<f64>::from_fn(n, |i| rhs[i]);
        let x = lu.solve(&col);
        (0..n).map(|i| x[i]).collect()
    };
    rhs.iter()
        .map(|&b| {
            let bnorm = norm2(b);
            if bnorm == 0.0 {
                return Ok(vec![0.0; n]);
            }
            let mut x = solve(b);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(fail(context, "matrix is singular"));
            }
            let mut r = residual_of(a, &x, b);
            let mut rn = norm2(&r);
            for _ in 0..5 {
                if rn <= LINEAR_TOL * bnorm {
                    break;
                }
                let dx = solve(&r);
                let y: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + di).collect();
                let ry = residual_of(a, &y, b);
                let ryn = norm2(&ry);
                if !(ryn < 0.9 * rn) {
                    break;
                }
                (x, r, rn) = (y, ry, ryn);
            }
            let rel = rn / bnorm;
            if rel <= LINEAR_ACCEPT {
                Ok(x)
            } else {
                Err(fail(context, format!("relative residual {rel:e} after refinement")))
            }
        })
        .collect()
}

/// Attempts a sparse Cholesky factorisation of the lower triangle of `a`.
/// Success certifies that the symmetric matrix is positive definite.
pub fn cholesky_check(a: &SparseMatrix) -> Result<()> {
    if a.n_rows != a.n_cols {
        return Err(Error::Dimension("Cholesky needs a square matrix".into()));
    }
    a.to_faer()
        .sp_cholesky(Side::Lower)
        .map(|_| ())
        .map_err(|e| fail("Cholesky", format!("{e:?}")))
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite systems.
/// Returns the iterate and the number of iterations.
pub fn pcg(a: &SparseMatrix, b: &[f64], rel_tol: f64, maxit: usize) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=maxit {
        let ap = a.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(fail("conjugate gradients", "matrix is not positive definite"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= rel_tol * bnorm {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(fail("conjugate gradients", format!("no convergence in {maxit} iterations")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Relative stopping tolerance: `|N(psi)| <= tol * max(1, |L|)`. The iteration
    /// also stops when the residual stagnates below `1e-6 * max(1, |L|)`.
    pub tol: f64,
    pub maxit: usize,
    /// Degree of the triangle rule for the loads.
    pub quad_degree: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            maxit: 50,
            quad_degree: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    /// Number of Newton corrections applied after the initial guess.
    pub iterations: usize,
    /// Euclidean norms of the block residual, starting at the initial guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

/// Block residual `N_h(psi; phi_i) = A psi + B_h(psi, psi, phi_i) - L_h(phi_i)`.
pub fn residual(
    space: &FeSpace<'_>,
    a: &SparseMatrix,
    psi: &DiscreteSolution,
    load: &[f64],
) -> Result<Vec<f64>> {
    let mut r = assemble_trilinear_vector(space, psi, psi)?;
    let n = space.n_dofs();
    let (au, av) = (a.mul_vec(&psi.u), a.mul_vec(&psi.v));
    for i in 0..n {
        r[i] += au[i] - load[i];
        r[n + i] += av[i] - load[n + i];
    }
    Ok(r)
}

/// Newton's method started from the solution of the decoupled linear problem
/// `diag(A, A) psi = L`. `level` only labels errors.
pub fn newton_solve(
    space: &FeSpace<'_>,
    penalty: &PenaltyConfig,
    loads: &dyn Loads,
    config: &NewtonConfig,
    level: usize,
) -> Result<(DiscreteSolution, NewtonReport)> {
    let method = space.method();
    let err = |reason: String| Error::Newton { method, level, reason };
    if !(config.tol > 0.0) || config.maxit == 0 {
        return Err(Error::InvalidParameter("Newton needs tol > 0 and maxit >= 1".into()));
    }
    let a = assemble_biharmonic(space, penalty)?;
    let load = assemble_load(space, loads, config.quad_degree)?;
    newton_with(space, &a, &load, config).map_err(|e| match e {
        Error::LinearSolve { context, reason } => err(format!("{context}: {reason}")),
        other => other,
    })
}

/// Newton iteration for a given stiffness matrix and load vector.
pub fn newton_with(
    space: &FeSpace<'_>,
    a: &SparseMatrix,
    load: &[f64],
    config: &NewtonConfig,
) -> Result<(DiscreteSolution, NewtonReport)> {
    let method = space.method();
    let n = space.n_dofs();
    let scale = norm2(load).max(1.0);
    let target = config.tol * scale;

    let mut guess = linear_solve_many(a, &[&load[..n], &load[n..]], "initial guess")?;
    let v0 = guess.pop().expect("two solutions");
    let u0 = guess.pop().expect("two solutions");
    let mut psi = DiscreteSolution { method, u: u0, v: v0 };
    let mut r = residual(space, a, &psi, load)?;
    let mut history = vec![norm2(&r)];
    let mut iterations = 0;
    let mut stagnated = false;
    let rn_ok = |h: &[f64], t: f64| h.last().is_some_and(|&x| x <= t);
    while *history.last().expect("nonempty") > target && iterations < config.maxit {
        let jac = assemble_newton_matrix(space, a, &psi)?;
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = linear_solve_ctx(&jac, &rhs, "Newton step")?;
        for i in 0..n {
            psi.u[i] += delta[i];
            psi.v[i] += delta[n + i];
        }
        iterations += 1;
        r = residual(space, a, &psi, load)?;
        let rn = norm2(&r);
        history.push(rn);
        if !rn.is_finite() {
            break;
        }
        // Once the residual is small and stops decreasing it sits at the rounding floor.
        let prev = history[history.len() - 2];
        if rn <= STAGNATION_TOL * scale && rn > 0.5 * prev {
            stagnated = true;
            break;
        }
    }
    let converged = rn_ok(&history, target) || stagnated;
    Ok((
        psi,
        NewtonReport {
            iterations,
            residual_history: history,
            converged,
        },
    ))
}

/// Estimated order `p` in `r_{k+1} ~ C r_k^p`, from a least-squares fit over
/// consecutive residual pairs that lie above `floor`. The slope does not
/// depend on the scaling of the residuals.
pub fn convergence_order(history: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = history
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{FnLoads, ZeroLoads};
    use crate::femspace::Method;
    use crate::mesh::{build_topology, uniform_refine, Triangulation};
    use crate::sparse::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_system() {
        let a = SparseMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(linear_solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn one_by_one_morley_system() {
        let m = build_topology(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], &[[0, 1, 2], [0, 2, 3]]).unwrap();
        let s = FeSpace::new(&m, Method::Morley);
        let a = assemble_biharmonic(&s, &PenaltyConfig::default()).unwrap();
        let x = linear_solve(&a, &[3.0]).unwrap();
        assert!((x[0] - 3.0 / a.get(0, 0)).abs() < 1e-15 * x[0].abs());
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> (SparseMatrix, Vec<Vec<f64>>) {
        let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dense[i][j] = (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            for j in 0..n {
                b.push(i, j, dense[i][j]);
            }
        }
        (b.build(), dense)
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            x[r] = (b[r] - (r + 1..n).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
        }
        x
    }

    #[test]
    fn random_spd_against_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (a, dense) = random_spd(&mut rng, 50);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let want = dense_solve(dense, b.clone());
        let got = linear_solve(&a, &b).unwrap();
        let (cg, _) = pcg(&a, &b, 1e-13, 1000).unwrap();
        for i in 0..50 {
            assert!((got[i] - want[i]).abs() < 1e-9 * want[i].abs().max(1.0));
            assert!((cg[i] - want[i]).abs() < 1e-9 * want[i].abs().max(1.0));
        }
        assert!(cholesky_check(&a).is_ok());
    }

    #[test]
    fn singular_and_indefinite_matrices_are_reported() {
        let mut b = TripletBuilder::new(2, 2);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            b.push(i, j, 1.0);
        }
        let a = b.build();
        assert!(matches!(linear_solve(&a, &[1.0, 2.0]), Err(Error::LinearSolve { .. })));
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, -1.0);
        b.push(1, 1, 1.0);
        assert!(cholesky_check(&b.build()).is_err());
    }

    #[test]
    fn zero_loads_give_zero_solution() {
        let m = uniform_refine(&Triangulation::unit_square());
        for method in Method::ALL {
            let s = FeSpace::new(&m, method);
            let (sol, rep) =
                newton_solve(&s, &PenaltyConfig::default(), &ZeroLoads, &NewtonConfig::default(), 0).unwrap();
            assert!(rep.converged && rep.iterations <= 1);
            assert!(sol.u.iter().chain(&sol.v).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn residual_at_zero_is_minus_load() {
        let m = uniform_refine(&Triangulation::lshape());
        let s = FeSpace::new(&m, Method::Dg);
        let a = assemble_biharmonic(&s, &PenaltyConfig::default()).unwrap();
        let load = assemble_load(&s, &FnLoads(|p: [f64; 2]| p[0] + 1.0, |p: [f64; 2]| p[1]), 8).unwrap();
        let r = residual(&s, &a, &DiscreteSolution::zeros(&s), &load).unwrap();
        assert!(r.iter().zip(&load).all(|(r, l)| *r == -l));
    }

    #[test]
    fn tiny_loads_converge_fast() {
        let m = uniform_refine(&Triangulation::unit_square());
        for method in Method::ALL {
            let s = FeSpace::new(&m, method);
            let loads = FnLoads(|_: [f64; 2]| 1e-8, |_: [f64; 2]| 1e-8);
            let (_, rep) = newton_solve(&s, &PenaltyConfig::default(), &loads, &NewtonConfig::default(), 0).unwrap();
            assert!(rep.converged && rep.iterations <= 2, "{method}: {rep:?}");
        }
    }

    #[test]
    fn moderate_loads_converge_and_residual_is_small() {
        let m = uniform_refine(&uniform_refine(&Triangulation::unit_square()));
        for method in Method::ALL {
            let s = FeSpace::new(&m, method);
            let loads = FnLoads(|p: [f64; 2]| 2000.0 * p[0], |_: [f64; 2]| 500.0);
            let cfg = NewtonConfig::default();
            let (sol, rep) = newton_solve(&s, &PenaltyConfig::default(), &loads, &cfg, 2).unwrap();
            assert!(rep.converged, "{method}: {rep:?}");
            assert!(rep.iterations >= 2);
            let a = assemble_biharmonic(&s, &PenaltyConfig::default()).unwrap();
            let load = assemble_load(&s, &loads, 8).unwrap();
            let r = residual(&s, &a, &sol, &load).unwrap();
            assert!(norm2(&r) <= cfg.tol * norm2(&load).max(1.0));
        }
    }

    #[test]
    fn order_estimate() {
        let h: Vec<f64> = [1e-1, 1e-2, 1e-4, 1e-8, 1e-16].to_vec();
        assert!((convergence_order(&h, 1e-20).unwrap() - 2.0).abs() < 1e-12);
        assert!(convergence_order(&[1.0], 0.0).is_none());
        let scaled: Vec<f64> = h.iter().map(|r| 1e6 * r).collect();
        assert!((convergence_order(&scaled, 1e-10).unwrap() - 2.0).abs() < 1e-12);
    }
}

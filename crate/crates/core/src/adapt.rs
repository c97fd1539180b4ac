//! Convergence studies: uniform refinement and the adaptive
//! solve, estimate, mark, refine loop.

use crate::analysis::{
    error_norm, fit_rate, load_oscillation, ConvergenceRecord, ExactSolutionPair, NormKind,
};
use crate::assembly::{DiscreteSolution, PenaltyConfig};
use crate::error::{Error, Result};
use crate::estimate::{dorfler_mark, estimate, LocalEstimates};
use crate::femspace::{FeSpace, Method};
use crate::mesh::{nvb_refine, uniform_refine, Triangulation};
use crate::solver::{newton_solve, NewtonConfig, NewtonReport};

/// Number of trailing levels in the rate column.
pub const RATE_WINDOW: usize = 3;

/// Settings shared by uniform and adaptive studies.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    /// Number of meshes, counting the initial one.
    pub levels: usize,
    pub penalty: PenaltyConfig,
    pub newton: NewtonConfig,
    /// Triangle rule degree for loads, errors, estimators and oscillation.
    pub quad_degree: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            levels: 5,
            penalty: PenaltyConfig::default(),
            newton: NewtonConfig::default(),
            quad_degree: 8,
        }
    }
}

/// Settings of the adaptive loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    /// Bulk parameter in `(0, 1]`.
    pub theta: f64,
    /// The method whose estimator drives the refinement.
    pub estimator: Method,
    /// Stop before solving on a mesh whose estimator space exceeds this many dofs.
    pub max_ndof: Option<usize>,
}

impl AdaptiveConfig {
    pub fn new(theta: f64, estimator: Method) -> Self {
        AdaptiveConfig {
            theta,
            estimator,
            max_ndof: None,
        }
    }
}

/// Everything computed for one method on one mesh.
#[derive(Clone, Debug)]
pub struct LevelSolution {
    pub solution: DiscreteSolution,
    pub report: NewtonReport,
    pub estimates: LocalEstimates,
    pub record: ConvergenceRecord,
}

/// Solves, estimates and measures errors for one method on one mesh.
/// The `rate` field is left as NaN.
pub fn solve_level(
    mesh: &Triangulation,
    method: Method,
    exact: &dyn ExactSolutionPair,
    config: &StudyConfig,
    level: usize,
) -> Result<LevelSolution> {
    let space = FeSpace::new(mesh, method);
    let newton = NewtonConfig {
        quad_degree: config.quad_degree,
        ..config.newton
    };
    let (solution, report) = newton_solve(&space, &config.penalty, exact, &newton, level)?;
    if !report.converged {
        return Err(Error::Newton {
            method,
            level,
            reason: format!(
                "no convergence in {} iterations, residual {:e}",
                report.iterations,
                report.residual_history.last().copied().unwrap_or(f64::NAN)
            ),
        });
    }
    let h = error_norm(&space, &solution, exact, NormKind::UnifiedH, config.quad_degree)?;
    let own = error_norm(&space, &solution, exact, NormKind::of_method(method), config.quad_degree)?;
    let estimates = estimate(&space, &solution, exact, config.quad_degree)?;
    let record = ConvergenceRecord {
        method,
        level,
        ndof: space.n_dofs(),
        error_u: h.u,
        error_v: h.v,
        error_h_norm: h.total,
        error_method_norm: own.total,
        estimator: estimates.total(),
        oscillation: load_oscillation(mesh, exact, config.quad_degree)?,
        rate: f64::NAN,
        newton_iterations: report.iterations,
    };
    Ok(LevelSolution {
        solution,
        report,
        estimates,
        record,
    })
}

/// Result of a study. On failure the records computed so far are kept.
#[derive(Debug)]
pub struct StudyOutcome {
    /// Grouped by method in the requested order, then by level.
    pub records: Vec<ConvergenceRecord>,
    /// The meshes, one per completed level.
    pub meshes: Vec<Triangulation>,
    pub error: Option<Error>,
}

impl StudyOutcome {
    pub fn records_for(&self, method: Method) -> Vec<&ConvergenceRecord> {
        self.records.iter().filter(|r| r.method == method).collect()
    }
}

/// Fills the trailing-window rate column of each method's history.
fn fill_rates(records: &mut [ConvergenceRecord]) {
    for i in 0..records.len() {
        let method = records[i].method;
        let hist: Vec<(usize, f64)> = records[..=i]
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.ndof, r.error_h_norm))
            .collect();
        let tail = &hist[hist.len().saturating_sub(RATE_WINDOW)..];
        records[i].rate = if tail.len() < 2 {
            f64::NAN
        } else {
            let (n, e): (Vec<usize>, Vec<f64>) = tail.iter().copied().unzip();
            fit_rate(&n, &e).unwrap_or(f64::NAN)
        };
    }
}

fn finish(methods: &[Method], mut records: Vec<ConvergenceRecord>, meshes: Vec<Triangulation>, error: Option<Error>) -> StudyOutcome {
    let pos = |m: Method| methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (pos(r.method), r.level));
    fill_rates(&mut records);
    StudyOutcome { records, meshes, error }
}

fn check_methods(methods: &[Method], config: &StudyConfig) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no method selected".into()));
    }
    if config.levels == 0 {
        return Err(Error::InvalidParameter("at least one level is required".into()));
    }
    config.penalty.validate()
}

/// Solves every method on `levels` successive red refinements of `initial`.
pub fn run_uniform(
    initial: &Triangulation,
    exact: &dyn ExactSolutionPair,
    methods: &[Method],
    config: &StudyConfig,
) -> StudyOutcome {
    if let Err(e) = check_methods(methods, config) {
        return finish(methods, Vec::new(), Vec::new(), Some(e));
    }
    let mut records = Vec::new();
    let mut meshes = Vec::new();
    let mut mesh = initial.clone();
    for level in 0..config.levels {
        if level > 0 {
            mesh = uniform_refine(&mesh);
        }
        for &method in methods {
            match solve_level(&mesh, method, exact, config, level) {
                Ok(s) => records.push(s.record),
                Err(e) => return finish(methods, records, meshes, Some(e)),
            }
        }
        meshes.push(mesh.clone());
    }
    finish(methods, records, meshes, None)
}

/// Adaptive loop: on each mesh all `methods` are solved; the estimator of
/// `adaptive.estimator` (solved as well if not among `methods`) is used for
/// Doerfler marking and newest vertex bisection.
pub fn run_adaptive(
    initial: &Triangulation,
    exact: &dyn ExactSolutionPair,
    methods: &[Method],
    config: &StudyConfig,
    adaptive: &AdaptiveConfig,
) -> StudyOutcome {
    if let Err(e) = check_methods(methods, config) {
        return finish(methods, Vec::new(), Vec::new(), Some(e));
    }
    if !(adaptive.theta > 0.0 && adaptive.theta <= 1.0) {
        let e = Error::InvalidParameter(format!("bulk parameter must lie in (0, 1], got {}", adaptive.theta));
        return finish(methods, Vec::new(), Vec::new(), Some(e));
    }
    let mut records = Vec::new();
    let mut meshes = Vec::new();
    let mut mesh = initial.clone();
    for level in 0..config.levels {
        if let Some(max) = adaptive.max_ndof {
            if level > 0 && FeSpace::new(&mesh, adaptive.estimator).n_dofs() > max {
                break;
            }
        }
        let mut driver: Option<LocalEstimates> = None;
        for &method in methods {
            match solve_level(&mesh, method, exact, config, level) {
                Ok(s) => {
                    if method == adaptive.estimator {
                        driver = Some(s.estimates);
                    }
                    records.push(s.record);
                }
                Err(e) => return finish(methods, records, meshes, Some(e)),
            }
        }
        let driver = match driver {
            Some(d) => d,
            None => match solve_level(&mesh, adaptive.estimator, exact, config, level) {
                Ok(s) => s.estimates,
                Err(e) => return finish(methods, records, meshes, Some(e)),
            },
        };
        meshes.push(mesh.clone());
        if level + 1 == config.levels {
            break;
        }
        let refined = dorfler_mark(&driver.eta_sq, adaptive.theta).and_then(|marked| nvb_refine(&mesh, &marked));
        match refined {
            Ok(m) => mesh = m,
            Err(e) => return finish(methods, records, meshes, Some(e)),
        }
    }
    finish(methods, records, meshes, None)
}

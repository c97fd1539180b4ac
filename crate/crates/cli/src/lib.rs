//! Driver for the convergence studies: argument types, CSV and gnuplot output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vonkarman::adapt::{run_adaptive, run_uniform, AdaptiveConfig, StudyConfig, StudyOutcome};
use vonkarman::analysis::ConvergenceRecord;
use vonkarman::mesh::build_topology;
use vonkarman::problems::{exact_lshape, exact_square};
use vonkarman::{Error, ExactSolutionPair, Method, NewtonConfig, PenaltyConfig, Triangulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Example {
    /// Smooth solution on the unit square, uniform refinement.
    #[value(name = "square_analytic", alias = "square-analytic")]
    SquareAnalytic,
    /// Corner singularity on the L-shaped domain, uniform refinement.
    #[value(name = "lshape_uniform", alias = "lshape-uniform")]
    LshapeUniform,
    /// Corner singularity on the L-shaped domain, adaptive refinement.
    #[value(name = "lshape_adaptive", alias = "lshape-adaptive")]
    LshapeAdaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Morley,
    C0ip,
    Dg,
    All,
}

impl MethodArg {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Morley => vec![Method::Morley],
            MethodArg::C0ip => vec![Method::C0ip],
            MethodArg::Dg => vec![Method::Dg],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Morley,
    C0ip,
    Dg,
}

impl From<EstimatorArg> for Method {
    fn from(e: EstimatorArg) -> Method {
        match e {
            EstimatorArg::Morley => Method::Morley,
            EstimatorArg::C0ip => Method::C0ip,
            EstimatorArg::Dg => Method::Dg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Refine {
    Uniform,
    Adaptive,
}

/// Convergence studies for Morley, C0 interior penalty and DG
/// discretisations of the von Karman plate equations.
#[derive(Clone, Debug, Parser)]
#[command(name = "vonkarman", version)]
pub struct Cli {
    #[arg(long, value_enum)]
    pub example: Example,
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodArg,
    /// Number of meshes including the initial one [default: 5 uniform, 20 adaptive].
    #[arg(long)]
    pub levels: Option<usize>,
    /// Bulk parameter of the Doerfler marking.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 20.0)]
    pub sigma_ip: f64,
    #[arg(long, default_value_t = 20.0)]
    pub sigma_dg: f64,
    /// Refinement strategy [default: adaptive for lshape_adaptive, uniform otherwise].
    #[arg(long, value_enum)]
    pub refine: Option<Refine>,
    /// Estimator driving adaptive refinement.
    #[arg(long, value_enum, default_value = "morley")]
    pub estimator: EstimatorArg,
    /// Stop adaptive refinement once the estimator space exceeds this many dofs.
    #[arg(long)]
    pub max_ndof: Option<usize>,
    /// CSV output file; the CSV goes to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Triangle quadrature degree for loads, errors and estimators (1..=10).
    #[arg(long, default_value_t = 8)]
    pub quad_degree: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub newton_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub newton_maxit: usize,
    /// Initial mesh file replacing the built-in mesh of the example's domain.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Shuffles the element order of the initial mesh; results must not depend on it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write a gnuplot script next to the CSV file.
    #[arg(long)]
    pub emit_plot: bool,
}

/// Failures of a run, mapped to process exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Exit code 1: the solver failed; rows computed before the failure were written.
    Solver(Error),
    /// Exit code 2: invalid input.
    Input(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(_) => 1,
            RunError::Input(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
            RunError::Input(m) => write!(f, "invalid input: {m}"),
        }
    }
}

pub const CSV_HEADER: &str =
    "method,level,ndof,error_u,error_v,error_h_norm,error_method_norm,estimator,oscillation,rate";

/// C-style `%.12e`: twelve fraction digits and an exponent of at least two digits.
pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

pub fn csv_row(r: &ConvergenceRecord) -> String {
    let mut s = format!("{},{},{}", r.method, r.level, r.ndof);
    for x in [
        r.error_u,
        r.error_v,
        r.error_h_norm,
        r.error_method_norm,
        r.estimator,
        r.oscillation,
        r.rate,
    ] {
        let _ = write!(s, ",{}", format_sci(x));
    }
    s
}

pub fn write_csv(mut w: impl Write, records: &[ConvergenceRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", csv_row(r))?;
    }
    w.flush()
}

/// A gnuplot script plotting the unified-norm error and the estimator
/// against the number of unknowns, one curve per method.
pub fn gnuplot_script(csv: &Path, methods: &[Method], title: &str) -> String {
    let file = csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = csv.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| "convergence".into());
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 900,650");
    let _ = writeln!(s, "set output '{stem}.png'");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'ndof'");
    let _ = writeln!(s, "set ylabel 'error'");
    let _ = writeln!(s, "set key bottom left");
    let _ = writeln!(s, "set grid");
    let mut curves = Vec::new();
    for m in methods {
        let name = m.name();
        curves.push(format!(
            "'{file}' using (strcol(1) eq '{name}' ? $3 : NaN):6 skip 1 with linespoints title '{name} error'"
        ));
        curves.push(format!(
            "'{file}' using (strcol(1) eq '{name}' ? $3 : NaN):8 skip 1 with lines dashtype 2 title '{name} estimator'"
        ));
    }
    curves.push(format!("'{file}' using 3:(10*$3**-0.5) skip 1 with lines lc rgb 'gray' title 'ndof^(-1/2)'"));
    let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    s
}

/// Rebuilds `mesh` with its elements in a random order.
pub fn shuffle_elements(mesh: &Triangulation, seed: u64) -> vonkarman::Result<Triangulation> {
    let coords: Vec<_> = (0..mesh.n_vertices()).map(|i| mesh.point(i)).collect();
    let mut tris: Vec<[usize; 3]> = mesh.triangles.iter().map(|t| t.v).collect();
    tris.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    build_topology(&coords, &tris)
}

/// Result of a CLI run.
pub struct RunSummary {
    pub outcome: StudyOutcome,
    pub methods: Vec<Method>,
}

impl Cli {
    pub fn refine(&self) -> Refine {
        self.refine.unwrap_or(match self.example {
            Example::LshapeAdaptive => Refine::Adaptive,
            _ => Refine::Uniform,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels.unwrap_or(match self.refine() {
            Refine::Uniform => 5,
            Refine::Adaptive => 20,
        })
    }

    fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Input(m));
        if self.levels() == 0 {
            return bad("--levels must be at least 1".into());
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("--theta must lie in (0, 1], got {}", self.theta));
        }
        for (name, s) in [("--sigma-ip", self.sigma_ip), ("--sigma-dg", self.sigma_dg)] {
            if !(s.is_finite() && s >= 1.0) {
                return bad(format!("{name} must be at least 1, got {s}"));
            }
        }
        if !(1..=10).contains(&self.quad_degree) {
            return bad(format!("--quad-degree must lie in 1..=10, got {}", self.quad_degree));
        }
        if !(self.newton_tol > 0.0) || self.newton_maxit == 0 {
            return bad("--newton-tol must be positive and --newton-maxit at least 1".into());
        }
        if self.emit_plot && self.out.is_none() {
            return bad("--emit-plot needs --out".into());
        }
        Ok(())
    }

    fn initial_mesh(&self) -> Result<Triangulation, RunError> {
        let mesh = match &self.mesh {
            Some(p) => Triangulation::read(p).map_err(|e| RunError::Input(format!("{}: {e}", p.display())))?,
            None => match self.example {
                Example::SquareAnalytic => Triangulation::unit_square(),
                Example::LshapeUniform | Example::LshapeAdaptive => Triangulation::lshape(),
            },
        };
        match self.seed {
            Some(seed) => shuffle_elements(&mesh, seed).map_err(|e| RunError::Input(e.to_string())),
            None => Ok(mesh),
        }
    }

    /// Runs the study. On solver failure the partial outcome is returned with the error.
    pub fn run(&self) -> Result<RunSummary, RunError> {
        self.validate()?;
        let mesh = self.initial_mesh()?;
        let methods = self.method.methods();
        let config = StudyConfig {
            levels: self.levels(),
            penalty: PenaltyConfig {
                sigma_ip: self.sigma_ip,
                sigma_dg: self.sigma_dg,
            },
            newton: NewtonConfig {
                tol: self.newton_tol,
                maxit: self.newton_maxit,
                quad_degree: self.quad_degree,
            },
            quad_degree: self.quad_degree,
        };
        let square = exact_square();
        let lshape = exact_lshape();
        let exact: &dyn ExactSolutionPair = match self.example {
            Example::SquareAnalytic => &square,
            Example::LshapeUniform | Example::LshapeAdaptive => &lshape,
        };
        let outcome = match self.refine() {
            Refine::Uniform => run_uniform(&mesh, exact, &methods, &config),
            Refine::Adaptive => {
                let adaptive = AdaptiveConfig {
                    theta: self.theta,
                    estimator: self.estimator.into(),
                    max_ndof: self.max_ndof,
                };
                run_adaptive(&mesh, exact, &methods, &config, &adaptive)
            }
        };
        Ok(RunSummary { outcome, methods })
    }
}

/// Human-readable summary: final row and rate per method.
pub fn summary(run: &RunSummary) -> String {
    let mut s = String::new();
    for &m in &run.methods {
        let recs = run.outcome.records_for(m);
        if let Some(last) = recs.last() {
            let _ = writeln!(
                s,
                "{:<7} levels {:>2}  ndof {:>7}  h-norm error {}  estimator {}  rate {}",
                m.name(),
                recs.len(),
                last.ndof,
                format_sci(last.error_h_norm),
                format_sci(last.estimator),
                format_sci(last.rate)
            );
        }
    }
    s
}

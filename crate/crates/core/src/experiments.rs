//! End-to-end runs on the L-shaped domain and the backward-facing-step channel,
//! writing one CSV row per iteration.
//!
//! Configurations are flat `key = value` files; see [`ExperimentConfig::apply`] for
//! the accepted keys. Energy errors are reported against `j_ref`, the smallest primal
//! energy seen along a long reference run of the applicable scheme.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::fem::{interpolate_boundary, FemError, Problem, Space, SpaceKind};
use crate::gub;
use crate::mesh::{channel_mesh, grade_toward, lshape_mesh, Mesh, MeshError};
use crate::nfunction::{NFunction, NFunctionError};
use crate::solver::{iterate, Controls, EpsilonPolicy, IterationRecord, Scheme, SolverError};

pub const SCALAR_HEADER: &str = "Iter,EnergyError,DualEnergyError,EfficiencyIndex";
pub const BINGHAM_HEADER: &str = "Iter,Energy0Error,DualEnergy0Error,eps";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment '{0}' (expected plaplace, optdesign, pstokes or bingham)")]
    UnknownExperiment(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    NFunction(#[from] NFunctionError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    PLaplace,
    OptDesign,
    PStokes,
    Bingham,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::PLaplace => "plaplace",
            Experiment::OptDesign => "optdesign",
            Experiment::PStokes => "pstokes",
            Experiment::Bingham => "bingham",
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, Experiment::PStokes | Experiment::Bingham)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plaplace" => Ok(Experiment::PLaplace),
            "optdesign" => Ok(Experiment::OptDesign),
            "pstokes" => Ok(Experiment::PStokes),
            "bingham" => Ok(Experiment::Bingham),
            _ => Err(ExperimentError::UnknownExperiment(s.into())),
        }
    }
}

/// Regularization schedule for Bingham runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsMode {
    /// `ε_n = 1/n`.
    Fixed,
    /// Start at `epsilon`, halve when `GUB/GUB_ε > 100`.
    Adaptive,
    /// `ε ≡ epsilon`.
    Constant,
}

impl FromStr for EpsMode {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" | "fixed-sequence" | "1/n" => Ok(EpsMode::Fixed),
            "adaptive" => Ok(EpsMode::Adaptive),
            "constant" => Ok(EpsMode::Constant),
            _ => Err(ExperimentError::Invalid(format!("unknown epsilon policy '{s}'"))),
        }
    }
}

impl EpsMode {
    pub fn name(self) -> &'static str {
        match self {
            EpsMode::Fixed => "fixed",
            EpsMode::Adaptive => "adaptive",
            EpsMode::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub p: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub viscosity: f64,
    pub yield_stress: f64,
    pub scheme: Scheme,
    pub space: SpaceKind,
    /// Uniform refinement level of the initial structured mesh.
    pub levels: u32,
    /// Rounds of refinement toward the re-entrant corner.
    pub grade_depth: u32,
    pub f: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub eps_policy: EpsMode,
    pub epsilon: f64,
    pub reference_tol: f64,
    /// Iteration cap of the reference run; `0` means ten times `max_iter`.
    pub reference_max_iter: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, ExperimentError> {
        let experiment: Experiment = name.parse()?;
        let mut c = ExperimentConfig {
            experiment,
            p: 1.5,
            kappa: 0.1,
            lambda: 0.0145,
            mu1: 1.0,
            mu2: 2.0,
            viscosity: 1.0,
            yield_stress: 0.3,
            scheme: Scheme::PrimalKacanov,
            space: SpaceKind::P1Zero,
            levels: 5,
            grade_depth: 10,
            f: 2.0,
            max_iter: 60,
            tol: 1e-12,
            eps_policy: EpsMode::Adaptive,
            epsilon: 1.0,
            reference_tol: 1e-12,
            reference_max_iter: 0,
            out: None,
            seed: 0,
        };
        match experiment {
            Experiment::PLaplace => {}
            Experiment::OptDesign => {
                c.f = 1.0;
                c.max_iter = 100;
            }
            Experiment::PStokes => {
                c.space = SpaceKind::KouhiaStenberg;
                c.f = 0.0;
                c.levels = 4;
                c.grade_depth = 1;
                c.max_iter = 40;
                c.tol = 1e-10;
            }
            Experiment::Bingham => {
                c.space = SpaceKind::KouhiaStenberg;
                c.f = 0.0;
                c.levels = 4;
                c.grade_depth = 1;
                c.max_iter = 60;
                c.tol = 1e-10;
            }
        }
        c.scheme = c.applicable_scheme();
        Ok(c)
    }

    /// Primal Kačanov except for `p > 2` power laws, where only the dual scheme converges.
    pub fn applicable_scheme(&self) -> Scheme {
        match self.experiment {
            Experiment::PLaplace | Experiment::PStokes if self.p > 2.0 => Scheme::DualKacanov,
            _ => Scheme::PrimalKacanov,
        }
    }

    /// Overrides from `key = value` lines. `#` starts a comment.
    pub fn apply(&mut self, text: &str) -> Result<(), ExperimentError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Parse { line: i + 1, message: format!("expected key = value, got '{line}'") })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| ExperimentError::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    /// Parses a config file; its `experiment` key selects the preset that the
    /// remaining keys override.
    pub fn from_text(text: &str) -> Result<Self, ExperimentError> {
        let experiment = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "experiment")
            .map(|(_, v)| v.trim().to_string())
            .ok_or_else(|| ExperimentError::Invalid("missing 'experiment' key".into()))?;
        let mut c = Self::preset(&experiment)?;
        c.apply(text)?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        fn num<V: FromStr>(key: &str, value: &str) -> Result<V, ExperimentError> {
            value.parse().map_err(|_| ExperimentError::Invalid(format!("{key}: cannot parse '{value}'")))
        }
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    *self = Self::preset(value)?;
                }
            }
            "p" => {
                self.p = num(key, value)?;
                self.scheme = self.applicable_scheme();
            }
            "kappa" => self.kappa = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "mu1" => self.mu1 = num(key, value)?,
            "mu2" => self.mu2 = num(key, value)?,
            "nu" | "viscosity" => self.viscosity = num(key, value)?,
            "sigma_y" | "yield_stress" => self.yield_stress = num(key, value)?,
            "scheme" => self.scheme = value.parse().map_err(ExperimentError::Invalid)?,
            "space" => {
                self.space = match value {
                    "p1" | "p1-lagrange-zero" => SpaceKind::P1Zero,
                    "cr" | "crouzeix-raviart-zero" => SpaceKind::CrZero,
                    "ks" | "kouhia-stenberg" => SpaceKind::KouhiaStenberg,
                    _ => return Err(ExperimentError::Invalid(format!("unknown space '{value}'"))),
                }
            }
            "levels" => self.levels = num(key, value)?,
            "grade_depth" => self.grade_depth = num(key, value)?,
            "f" => self.f = num(key, value)?,
            "max_iter" => self.max_iter = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "eps_policy" => self.eps_policy = value.parse()?,
            "epsilon" => self.epsilon = num(key, value)?,
            "reference_tol" => self.reference_tol = num(key, value)?,
            "reference_max_iter" => self.reference_max_iter = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = num(key, value)?,
            _ => return Err(ExperimentError::Invalid(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Invalid(m.into()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self.experiment {
            Experiment::PLaplace | Experiment::PStokes => {
                if !(self.p.is_finite() && self.p > 1.0) {
                    return bad("p must lie in (1, inf)");
                }
                if !positive(self.kappa) {
                    return bad("kappa must be positive");
                }
            }
            Experiment::OptDesign => {
                if !(positive(self.lambda) && positive(self.mu1) && positive(self.mu2) && self.mu1 < self.mu2) {
                    return bad("optimal design needs lambda > 0 and 0 < mu1 < mu2");
                }
            }
            Experiment::Bingham => {
                if !positive(self.viscosity) {
                    return bad("viscosity must be positive");
                }
                if !(self.yield_stress.is_finite() && self.yield_stress >= 0.0) {
                    return bad("yield stress must be non-negative");
                }
                if !positive(self.epsilon) {
                    return bad("epsilon must be positive");
                }
            }
        }
        let vector_space = self.space == SpaceKind::KouhiaStenberg;
        if vector_space != self.experiment.is_vector() {
            return Err(ExperimentError::Invalid(format!("space {} is not compatible with {}", self.space, self.experiment)));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) || !(self.reference_tol.is_finite() && self.reference_tol >= 0.0) {
            return bad("tolerances must be finite and non-negative");
        }
        if !self.f.is_finite() {
            return bad("f must be finite");
        }
        Ok(())
    }

    pub fn model(&self) -> Result<NFunction<f64>, ExperimentError> {
        Ok(match self.experiment {
            Experiment::PLaplace | Experiment::PStokes => NFunction::shifted_p_laplace(self.kappa, self.p)?,
            Experiment::OptDesign => NFunction::optimal_design(self.lambda, self.mu1, self.mu2)?,
            Experiment::Bingham => NFunction::bingham(self.viscosity, self.yield_stress)?,
        })
    }

    pub fn mesh(&self) -> Result<Mesh<f64>, ExperimentError> {
        let base = if self.experiment.is_vector() { channel_mesh(self.levels)? } else { lshape_mesh(self.levels)? };
        Ok(grade_toward(&base, [0.0, 0.0], self.grade_depth)?)
    }

    pub fn problem(&self, mesh: Arc<Mesh<f64>>) -> Result<Problem<f64>, ExperimentError> {
        let space = Space::new(self.space, mesh);
        Ok(if self.experiment.is_vector() {
            let lift = interpolate_boundary(&space, channel_inflow_outflow);
            Problem::with_lift(space, self.f, lift)
        } else {
            Problem::new(space, self.f)
        })
    }

    pub fn epsilon_policy(&self) -> EpsilonPolicy<f64> {
        if self.experiment != Experiment::Bingham {
            return EpsilonPolicy::None;
        }
        match self.eps_policy {
            EpsMode::Fixed => EpsilonPolicy::FixedSequence,
            EpsMode::Adaptive => EpsilonPolicy::Adaptive(self.epsilon),
            EpsMode::Constant => EpsilonPolicy::Constant(self.epsilon),
        }
    }

    fn reference_cap(&self) -> usize {
        if self.reference_max_iter == 0 {
            self.max_iter.saturating_mul(10)
        } else {
            self.reference_max_iter
        }
    }
}

/// Boundary velocity of the channel: parabolic inflow at `x = −2`, parabolic outflow
/// at `x = 8` with the same flux, no slip elsewhere.
pub fn channel_inflow_outflow(z: [f64; 2]) -> [f64; 2] {
    let [x, y] = z;
    if x == -2.0 {
        [(1.0 - y) * y / 10.0, 0.0]
    } else if x == 8.0 {
        [(1.0 + y) * (1.0 - y) / 80.0, 0.0]
    } else {
        [0.0, 0.0]
    }
}

/// Result of [`run_config`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<IterationRecord<f64>>,
    pub j_ref: f64,
    pub n_triangles: usize,
    pub n_dofs: usize,
}

impl RunSummary {
    pub fn energy_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.primal - self.j_ref).collect()
    }

    pub fn dual_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dual + self.j_ref).collect()
    }

    /// `None` where `J(u_n)` is already at reference accuracy.
    pub fn efficiency(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| gub::efficiency_index(r.gub, r.primal, self.j_ref).ok()).collect()
    }
}

fn truncate_display(records: &[IterationRecord<f64>], max_iter: usize, tol: f64) -> Vec<IterationRecord<f64>> {
    let mut out = Vec::new();
    for r in records.iter().take(max_iter) {
        out.push(r.clone());
        if r.gub <= tol {
            break;
        }
    }
    out
}

/// Runs the configured iteration plus the reference run that fixes `j_ref`.
///
/// When the configured scheme and regularization coincide with the reference ones the
/// displayed history is a prefix of the reference run and only one run is made.
pub fn run_config(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    config.validate()?;
    let mesh = Arc::new(config.mesh()?);
    run_on_mesh(config, mesh)
}

pub fn run_on_mesh(config: &ExperimentConfig, mesh: Arc<Mesh<f64>>) -> Result<RunSummary, ExperimentError> {
    config.validate()?;
    let model = config.model()?;
    let problem = config.problem(mesh)?;
    let reference_scheme = config.applicable_scheme();
    let reference_policy = match config.experiment {
        Experiment::Bingham => EpsilonPolicy::Adaptive(config.epsilon),
        _ => EpsilonPolicy::None,
    };
    let reference_controls =
        Controls { max_iter: config.reference_cap(), tol: config.reference_tol, epsilon: reference_policy, ..Controls::default() };
    let reference = iterate(reference_scheme, &model, &problem, &reference_controls)?;
    let j_ref = reference.iter().map(|r| r.primal).fold(f64::INFINITY, f64::min);

    let same = config.scheme == reference_scheme && config.epsilon_policy() == reference_policy;
    let (records, j_ref) = if same && config.reference_tol <= config.tol && config.reference_cap() >= config.max_iter {
        (truncate_display(&reference, config.max_iter, config.tol), j_ref)
    } else {
        let controls =
            Controls { max_iter: config.max_iter, tol: config.tol, epsilon: config.epsilon_policy(), ..Controls::default() };
        let records = iterate(config.scheme, &model, &problem, &controls)?;
        let own_min = records.iter().map(|r| r.primal).fold(f64::INFINITY, f64::min);
        (records, j_ref.min(own_min))
    };
    Ok(RunSummary { records, j_ref, n_triangles: problem.n_triangles(), n_dofs: problem.space().n_dofs() })
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

/// Writes the history with the experiment's header and a `# jref = …` footer.
pub fn write_csv<W: Write>(out: W, experiment: Experiment, summary: &RunSummary) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let header: Vec<&str> = if experiment == Experiment::Bingham { BINGHAM_HEADER } else { SCALAR_HEADER }.split(',').collect();
    w.write_record(&header)?;
    let efficiency = summary.efficiency();
    for (i, r) in summary.records.iter().enumerate() {
        let last = if experiment == Experiment::Bingham {
            fmt_value(r.epsilon.unwrap_or(f64::NAN))
        } else {
            fmt_value(efficiency[i].unwrap_or(f64::NAN))
        };
        w.write_record([
            r.n.to_string(),
            fmt_value(r.primal - summary.j_ref),
            fmt_value(r.dual + summary.j_ref),
            last,
        ])?;
    }
    let mut out = w.into_inner().map_err(|e| ExperimentError::Io(e.into_error()))?;
    writeln!(out, "# jref = {}", fmt_value(summary.j_ref))?;
    out.flush()?;
    Ok(())
}

/// Runs `config` and writes the CSV to `config.out` (or `path` if given).
pub fn run(config: &ExperimentConfig, path: Option<&Path>) -> Result<RunSummary, ExperimentError> {
    let summary = run_config(config)?;
    if let Some(p) = path.or(config.out.as_deref()) {
        let file = std::io::BufWriter::new(std::fs::File::create(p)?);
        write_csv(file, config.experiment, &summary)?;
    }
    Ok(summary)
}

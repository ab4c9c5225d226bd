//! Run configuration: command-line flags, the optional config file, and the
//! merge of the two into a fully resolved experiment description.
//!
//! Precedence is defaults < config file < flags. The config file is a flat
//! `key = value` list (no sections); `#` and `;` start whole-line comments.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ibc_fem::analysis::{test1, test2, ManufacturedProblem};
use ibc_fem::solvers::GmresConfig;
use ibc_fem::ProblemSpec;

use crate::expr::{self, Expr};

#[derive(Parser)]
#[command(
    name = "ibc-fem",
    version,
    about = "Finite-element experiments for the Poisson problem with a \
             resistive integral boundary condition on the contact side"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Mesh-refinement study of the discretization errors
    Convergence(RunArgs),
    /// Error versus penalty parameter on a fixed mesh
    EpsilonSweep(RunArgs),
    /// Iteration counts of the preconditioned iterative solver
    SolverStudy(RunArgs),
    /// One solve with nodal output and contact diagnostics
    Solve(RunArgs),
}

impl Command {
    pub fn split(&self) -> (ExperimentKind, &RunArgs) {
        match self {
            Command::Convergence(a) => (ExperimentKind::Convergence, a),
            Command::EpsilonSweep(a) => (ExperimentKind::EpsilonSweep, a),
            Command::SolverStudy(a) => (ExperimentKind::SolverStudy, a),
            Command::Solve(a) => (ExperimentKind::Solve, a),
        }
    }
}

#[derive(Args, Clone, Default)]
pub struct RunArgs {
    /// Problem: test1, test2, or custom (custom needs --config with f,
    /// sigma, phi_d, voltage, resistance)
    #[arg(long)]
    problem: Option<Problem>,

    /// Boundary treatment: nitsche, nitsche-bordered, or lagrange
    #[arg(long)]
    method: Option<Method>,

    /// Mesh subdivisions per side, comma-separated (e.g. 10,20,40,80)
    #[arg(long, value_delimiter = ',')]
    meshes: Option<Vec<usize>>,

    /// Penalty parameter, or a comma-separated list for epsilon-sweep
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,

    /// Linear solver: direct or gmres-amg
    #[arg(long)]
    solver: Option<SolverKind>,

    /// Absolute residual tolerance for the iterative solver
    #[arg(long)]
    tol: Option<f64>,

    /// Krylov steps per restart cycle
    #[arg(long)]
    restart: Option<usize>,

    /// Total Krylov-step budget across restarts
    #[arg(long)]
    max_iter: Option<usize>,

    /// Output base path; the run writes <out>.csv, <out>.md, <out>.json
    /// (plus <out>.txt with nodal values for solve)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Config file with flat key = value lines; flags override it
    #[arg(long)]
    config: Option<PathBuf>,

    /// Seed recorded in the run metadata
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    EpsilonSweep,
    SolverStudy,
    Solve,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::EpsilonSweep => "epsilon-sweep",
            ExperimentKind::SolverStudy => "solver-study",
            ExperimentKind::Solve => "solve",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "convergence" => Some(ExperimentKind::Convergence),
            "epsilon-sweep" => Some(ExperimentKind::EpsilonSweep),
            "solver-study" => Some(ExperimentKind::SolverStudy),
            "solve" | "single-solve" => Some(ExperimentKind::Solve),
            _ => None,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Test1,
    Test2,
    Custom,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Penalized contact condition eliminated to sparse + rank-one
    Nitsche,
    /// Penalized condition with the contact integral as an extra unknown
    NitscheBordered,
    /// Saddle-point system with a multiplier for the boundary flux
    Lagrange,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Nitsche => "nitsche",
            Method::NitscheBordered => "nitsche-bordered",
            Method::Lagrange => "lagrange",
        }
    }

    pub fn is_penalized(&self) -> bool {
        !matches!(self, Method::Lagrange)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    GmresAmg,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::GmresAmg => "gmres-amg",
        }
    }
}

/// A problem ready to assemble, with the name used in reports.
pub struct NamedProblem {
    pub name: String,
    pub spec: ProblemSpec,
}

impl From<ManufacturedProblem> for NamedProblem {
    fn from(p: ManufacturedProblem) -> Self {
        NamedProblem {
            name: p.name,
            spec: p.spec,
        }
    }
}

/// Everything a runner needs, fully validated.
pub struct Experiment {
    pub kind: ExperimentKind,
    pub problem: NamedProblem,
    pub method: Method,
    /// Methods the solver study compares; other experiments ignore this.
    pub study_methods: Vec<Method>,
    pub meshes: Vec<usize>,
    /// Descending; a single entry except for epsilon-sweep.
    pub epsilons: Vec<f64>,
    pub solver: SolverKind,
    pub gmres: GmresConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Experiment {
    pub fn epsilon(&self) -> f64 {
        self.epsilons[0]
    }
}

#[derive(Debug)]
pub struct ConfigError(String);

impl ConfigError {
    fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Settings read from a config file; every field optional.
#[derive(Default)]
struct FileSettings {
    experiment: Option<ExperimentKind>,
    problem: Option<Problem>,
    method: Option<Method>,
    meshes: Option<Vec<usize>>,
    epsilon: Option<Vec<f64>>,
    solver: Option<SolverKind>,
    tol: Option<f64>,
    restart: Option<usize>,
    max_iter: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    f: Option<String>,
    sigma: Option<String>,
    phi_d: Option<String>,
    voltage: Option<String>,
    resistance: Option<String>,
    side: Option<String>,
}

fn parse_enum<T: ValueEnum>(value: &str, key: &str) -> Result<T, ConfigError> {
    T::from_str(value, true)
        .map_err(|_| ConfigError::new(format!("invalid value {value:?} for key '{key}'")))
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(|item| {
            item.trim().parse::<T>().map_err(|_| {
                ConfigError::new(format!(
                    "invalid entry {:?} in list for key '{key}'",
                    item.trim()
                ))
            })
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| ConfigError::new(format!("invalid value {value:?} for key '{key}'")))
}

impl FileSettings {
    fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
            .map_err(|e| ConfigError::new(format!("config file {}: {e}", path.display())))
    }

    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut settings = FileSettings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let lineno = idx + 1;
            if line.starts_with('[') {
                return Err(ConfigError::new(format!(
                    "line {lineno}: sections are not supported; use flat key = value lines"
                )));
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(format!(
                    "line {lineno}: expected key = value, got {line:?}"
                )));
            };
            let key = key.trim().to_ascii_lowercase().replace('-', "_");
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError::new(format!(
                    "line {lineno}: key '{key}' has no value"
                )));
            }
            settings
                .apply(&key, value)
                .map_err(|e| ConfigError::new(format!("line {lineno}: {e}")))?;
        }
        Ok(settings)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "experiment" => {
                self.experiment = Some(ExperimentKind::parse(value).ok_or_else(|| {
                    ConfigError::new(format!("invalid value {value:?} for key 'experiment'"))
                })?);
            }
            "problem" => self.problem = Some(parse_enum(value, key)?),
            "method" => self.method = Some(parse_enum(value, key)?),
            "meshes" => self.meshes = Some(parse_list(value, key)?),
            "epsilon" => self.epsilon = Some(parse_list(value, key)?),
            "solver" => self.solver = Some(parse_enum(value, key)?),
            "tol" => self.tol = Some(parse_one(value, key)?),
            "restart" => self.restart = Some(parse_one(value, key)?),
            "max_iter" => self.max_iter = Some(parse_one(value, key)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = Some(parse_one(value, key)?),
            "f" => self.f = Some(value.to_string()),
            "sigma" => self.sigma = Some(value.to_string()),
            "phi_d" => self.phi_d = Some(value.to_string()),
            "voltage" => self.voltage = Some(value.to_string()),
            "resistance" => self.resistance = Some(value.to_string()),
            "side" => self.side = Some(value.to_string()),
            _ => return Err(ConfigError::new(format!("unknown key '{key}'"))),
        }
        Ok(())
    }
}

/// Merges defaults, config file, and flags into a validated experiment.
pub fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<Experiment, ConfigError> {
    let file = match &args.config {
        Some(path) => FileSettings::load(path)?,
        None => FileSettings::default(),
    };
    resolve_with(kind, args, file)
}

fn resolve_with(
    kind: ExperimentKind,
    args: &RunArgs,
    file: FileSettings,
) -> Result<Experiment, ConfigError> {
    if let Some(file_kind) = file.experiment {
        if file_kind != kind {
            return Err(ConfigError::new(format!(
                "config file requests experiment '{}' but the command line says '{}'",
                file_kind.as_str(),
                kind.as_str()
            )));
        }
    }

    let problem_kind = args.problem.or(file.problem).unwrap_or(Problem::Test1);
    let method = args.method.or(file.method).unwrap_or(Method::Nitsche);
    let method_given = args.method.is_some() || file.method.is_some();

    let default_solver = match kind {
        ExperimentKind::SolverStudy => SolverKind::GmresAmg,
        _ => SolverKind::Direct,
    };
    let solver = args.solver.or(file.solver).unwrap_or(default_solver);

    let default_meshes = match kind {
        ExperimentKind::Convergence | ExperimentKind::SolverStudy => vec![10, 20, 40, 80],
        ExperimentKind::EpsilonSweep | ExperimentKind::Solve => vec![80],
    };
    let mut meshes = args
        .meshes
        .clone()
        .or_else(|| file.meshes.clone())
        .unwrap_or(default_meshes);
    meshes.sort_unstable();
    meshes.dedup();
    if meshes.is_empty() {
        return Err(ConfigError::new("the mesh list is empty"));
    }
    if meshes[0] == 0 {
        return Err(ConfigError::new(
            "mesh subdivision counts must be at least 1",
        ));
    }

    let default_epsilons: Vec<f64> = match kind {
        ExperimentKind::EpsilonSweep => (2..=14).map(|k| 10f64.powi(-k)).collect(),
        _ => vec![1e-9],
    };
    let mut epsilons = args
        .epsilon
        .clone()
        .or_else(|| file.epsilon.clone())
        .unwrap_or(default_epsilons);
    if epsilons.iter().any(|&e| !e.is_finite() || e <= 0.0) {
        return Err(ConfigError::new("epsilon values must be positive"));
    }
    epsilons.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    epsilons.dedup();

    let defaults = GmresConfig::default();
    let tol = args.tol.or(file.tol).unwrap_or(defaults.tol_abs);
    let restart = args.restart.or(file.restart).unwrap_or(defaults.restart);
    let max_iter = args.max_iter.or(file.max_iter).unwrap_or(defaults.max_iter);
    if !tol.is_finite() || tol <= 0.0 {
        return Err(ConfigError::new("tol must be positive"));
    }
    if restart == 0 || max_iter == 0 {
        return Err(ConfigError::new("restart and max-iter must be at least 1"));
    }

    let problem: NamedProblem = match problem_kind {
        Problem::Test1 => test1().into(),
        Problem::Test2 => test2().into(),
        Problem::Custom => build_custom_problem(&file)?,
    };

    match kind {
        ExperimentKind::Convergence | ExperimentKind::EpsilonSweep => {
            if problem.spec.exact.is_none() {
                return Err(ConfigError::new(format!(
                    "{} measures errors against a known solution; \
                     it supports the built-in problems only",
                    kind.as_str()
                )));
            }
        }
        ExperimentKind::SolverStudy | ExperimentKind::Solve => {}
    }
    match kind {
        ExperimentKind::EpsilonSweep => {
            if !method.is_penalized() {
                return Err(ConfigError::new(
                    "the multiplier method has no penalty parameter to sweep; \
                     use --method nitsche or nitsche-bordered",
                ));
            }
            if meshes.len() != 1 {
                return Err(ConfigError::new("epsilon-sweep runs on a single mesh"));
            }
        }
        ExperimentKind::SolverStudy => {
            if solver != SolverKind::GmresAmg {
                return Err(ConfigError::new(
                    "the solver study measures the iterative solver; \
                     it does not accept --solver direct",
                ));
            }
            if epsilons.len() != 1 {
                return Err(ConfigError::new("solver-study takes a single epsilon"));
            }
        }
        ExperimentKind::Convergence | ExperimentKind::Solve => {
            if epsilons.len() != 1 {
                return Err(ConfigError::new(format!(
                    "{} takes a single epsilon",
                    kind.as_str()
                )));
            }
            if kind == ExperimentKind::Solve && meshes.len() != 1 {
                return Err(ConfigError::new("solve runs on a single mesh"));
            }
        }
    }

    let study_methods = if method_given {
        vec![method]
    } else {
        vec![Method::Nitsche, Method::Lagrange]
    };

    Ok(Experiment {
        kind,
        problem,
        method,
        study_methods,
        meshes,
        epsilons,
        solver,
        gmres: GmresConfig {
            tol_abs: tol,
            restart,
            max_iter,
        },
        out: args.out.clone().or(file.out),
        seed: args.seed.or(file.seed).unwrap_or(0),
    })
}

fn parse_scalar(value: &str, key: &str) -> Result<f64, ConfigError> {
    if let Ok(v) = value.trim().parse::<f64>() {
        return Ok(v);
    }
    let e = expr::parse(value)
        .map_err(|e| ConfigError::new(format!("key '{key}': invalid expression {e}")))?;
    if e.uses_variables() {
        return Err(ConfigError::new(format!(
            "key '{key}' must be a constant, not a function of x or y"
        )));
    }
    Ok(e.eval(0.0, 0.0))
}

fn parse_field(value: &str, key: &str) -> Result<Expr, ConfigError> {
    expr::parse(value)
        .map_err(|e| ConfigError::new(format!("key '{key}': invalid expression {e}")))
}

fn build_custom_problem(file: &FileSettings) -> Result<NamedProblem, ConfigError> {
    let require = |opt: &Option<String>, key: &str| {
        opt.clone().ok_or_else(|| {
            ConfigError::new(format!(
                "the custom problem needs '{key}' in the config file \
                 (required keys: f, sigma, phi_d, voltage, resistance)"
            ))
        })
    };
    let f = parse_field(&require(&file.f, "f")?, "f")?;
    let sigma = parse_field(&require(&file.sigma, "sigma")?, "sigma")?;
    let phi_d = parse_field(&require(&file.phi_d, "phi_d")?, "phi_d")?;
    let voltage = parse_scalar(&require(&file.voltage, "voltage")?, "voltage")?;
    let resistance = parse_scalar(&require(&file.resistance, "resistance")?, "resistance")?;
    let side = match &file.side {
        Some(v) => parse_scalar(v, "side")?,
        None => 1.0,
    };

    if sigma.uses_x() {
        return Err(ConfigError::new(
            "sigma lives on the contact side; write it as a function of y only",
        ));
    }
    if phi_d.uses_x() {
        return Err(ConfigError::new(
            "phi_d lives on the far side; write it as a function of y only",
        ));
    }
    if !side.is_finite() || side <= 0.0 {
        return Err(ConfigError::new("side must be positive"));
    }
    if !resistance.is_finite() || resistance < 0.0 {
        return Err(ConfigError::new("resistance must be non-negative"));
    }
    for k in 0..=100 {
        let y = side * k as f64 / 100.0;
        let s = sigma.eval(0.0, y);
        if !s.is_finite() || s <= 0.0 {
            return Err(ConfigError::new(format!(
                "sigma must be positive on the contact side; sigma({y:.3}) = {s:.3e}"
            )));
        }
    }

    let spec = ProblemSpec::new(
        move |x, y| f.eval(x, y),
        move |y| sigma.eval(0.0, y),
        voltage,
        resistance,
        move |y| phi_d.eval(0.0, y),
        side,
    );
    Ok(NamedProblem {
        name: "custom".to_string(),
        spec,
    })
}

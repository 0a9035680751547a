//! TOML experiment configs.
//!
//! ```toml
//! [problem]
//! horizon = 1.0
//! u0 = [0.0]
//! v0 = [1.0]
//! forcing = ["0"]                          # one expression in t per component
//! potential = { kind = "quadratic", scale = 1.0 }
//! coupling = { kind = "linear", matrix = [[2.0]] }
//!
//! [solver]
//! mode = "global"                          # or "local"
//! n_steps = 1000
//!
//! [output]
//! dir = "out/manufactured"
//! ```
//!
//! See the README for every key.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use evoinc_core::pde1d::{assemble_problem, Pde1dProblem, Reaction};
use evoinc_core::potentials::{RadialOracle, SeparableBlock};
use evoinc_core::{Coupling, DMatrix, DVector, Forcing, Mode, Potential, ProblemSpec, SolverConfig};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::expr::Expr;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    pub stability: Option<StabilitySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub horizon: f64,
    pub u0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    pub forcing: Option<Vec<String>>,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    pub pde1d: Option<Pde1dSection>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    Zero,
    Quadratic {
        #[serde(default = "one")]
        scale: f64,
    },
    AbsValue,
    XLogX,
    XExpX,
    PowerPlusAbs {
        p: f64,
    },
    ExpPower {
        p: f64,
    },
    ExpXLogX,
    Separable {
        dim: usize,
        blocks: Vec<BlockConfig>,
    },
    /// Radial profile from a piecewise-linear slope table.
    Table {
        knots: Vec<f64>,
        slopes: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub coords: Vec<usize>,
    pub potential: PotentialConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingConfig {
    #[default]
    Zero,
    /// Inline `matrix` rows or a headerless CSV `matrix_file`, relative to the config.
    Linear {
        matrix: Option<Vec<Vec<f64>>>,
        matrix_file: Option<String>,
    },
    /// `B(u)_i = sign * coeff * u_i^3`.
    Cubic {
        #[serde(default = "one")]
        sign: f64,
        coeff: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pde1dSection {
    pub n_cells: usize,
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default)]
    pub left: f64,
    #[serde(default)]
    pub right: f64,
    /// Expression in `x`.
    pub u0: String,
    /// Expression in `x`.
    #[serde(default = "zero_expr")]
    pub v0: String,
    /// Expression in `t, x`.
    #[serde(default = "zero_expr")]
    pub forcing: String,
    pub reaction: Option<ReactionSection>,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSection {
    /// Expression in `t, x, u`.
    pub expr: String,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Local,
    #[default]
    Global,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Local => Mode::LocalBall,
            ModeName::Global => Mode::GlobalWeighted,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub mode: ModeName,
    pub n_steps: Option<usize>,
    pub picard_tol: Option<f64>,
    pub picard_max_iter: Option<usize>,
    pub prox_tol: Option<f64>,
    pub ball_radius: Option<f64>,
    pub blowup_threshold: Option<f64>,
    /// Run maximal continuation in local windows instead of one solve.
    #[serde(default)]
    pub continuation: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub trajectory: bool,
    #[serde(default = "yes")]
    pub summary: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            trajectory: true,
            summary: true,
        }
    }
}

/// Second data set for a stability comparison; omitted fields reuse the problem's.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub u0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    pub forcing: Option<Vec<String>>,
    pub m_max: f64,
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_steps: Option<usize>,
    pub tol: Option<f64>,
    pub mode: Option<ModeName>,
    pub out: Option<PathBuf>,
}

/// A validated, ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub spec: ProblemSpec,
    pub cfg: SolverConfig,
    pub continuation: bool,
    pub pde: Option<Pde1dProblem>,
    pub stability: Option<(ProblemSpec, f64)>,
    pub output: OutputSection,
}

fn config_err<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

impl PotentialConfig {
    pub fn build(&self) -> CliResult<Potential> {
        let p = match self {
            PotentialConfig::Zero => Ok(Potential::zero()),
            PotentialConfig::Quadratic { scale } => Potential::quadratic(*scale),
            PotentialConfig::AbsValue => Ok(Potential::abs_value()),
            PotentialConfig::XLogX => Ok(Potential::x_log_x()),
            PotentialConfig::XExpX => Ok(Potential::x_exp_x()),
            PotentialConfig::PowerPlusAbs { p } => Potential::power_plus_abs(*p),
            PotentialConfig::ExpPower { p } => Potential::exp_power(*p),
            PotentialConfig::ExpXLogX => Ok(Potential::exp_x_log_x()),
            PotentialConfig::Separable { dim, blocks } => {
                let built = blocks
                    .iter()
                    .map(|b| {
                        Ok(SeparableBlock {
                            potential: b.potential.build()?,
                            coords: b.coords.clone(),
                        })
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                Potential::separable(*dim, built)
            }
            PotentialConfig::Table { knots, slopes } => {
                RadialOracle::from_slope_table(knots.clone(), slopes.clone()).map(Potential::radial)
            }
        };
        p.map_err(config_err("potential"))
    }
}

fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read matrix file {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(config_err("matrix file"))?;
        let row = record
            .iter()
            .map(|x| x.parse::<f64>().map_err(config_err("matrix entry")))
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    matrix_from_rows(&rows)
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> CliResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config("coupling matrix must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl CouplingConfig {
    pub fn build(&self, base: &Path) -> CliResult<Coupling> {
        match self {
            CouplingConfig::Zero => Ok(Coupling::zero()),
            CouplingConfig::Linear { matrix, matrix_file } => {
                let m = match (matrix, matrix_file) {
                    (Some(rows), None) => matrix_from_rows(rows)?,
                    (None, Some(file)) => {
                        let path = base.join(file);
                        if !path.is_file() {
                            return Err(CliError::Config(format!(
                                "matrix file {} does not exist",
                                path.display()
                            )));
                        }
                        read_matrix(&path)?
                    }
                    _ => {
                        return Err(CliError::Config(
                            "linear coupling needs exactly one of `matrix` and `matrix_file`".into(),
                        ))
                    }
                };
                Coupling::linear(m).map_err(config_err("coupling"))
            }
            CouplingConfig::Cubic { sign, coeff } => Coupling::cubic(*sign, *coeff).map_err(config_err("coupling")),
        }
    }
}

fn forcing_from(exprs: Option<&[String]>, dim: usize) -> CliResult<Forcing> {
    let Some(exprs) = exprs else {
        return Ok(Forcing::zero(dim));
    };
    if exprs.len() != dim {
        return Err(CliError::Config(format!(
            "forcing has {} components but the problem has dimension {dim}",
            exprs.len()
        )));
    }
    let compiled = exprs
        .iter()
        .map(|s| Expr::parse(s, &["t"]))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Forcing::from_fn(
        dim,
        Arc::new(move |t| DVector::from_iterator(compiled.len(), compiled.iter().map(|e| e.eval(&[t])))),
    ))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(config_err("invalid config"))
    }

    /// Builds the experiment; `base` resolves relative file references.
    pub fn build(&self, name: &str, base: &Path, overrides: &Overrides) -> CliResult<Experiment> {
        let p = &self.problem;
        let potential = p.potential.build()?;
        let coupling = p.coupling.build(base)?;
        let built = |e: evoinc_core::Error| CliError::Config(format!("problem: {e}"));

        let (spec, pde) = match &p.pde1d {
            Some(pde) => {
                if p.u0.is_some() || p.v0.is_some() || p.forcing.is_some() {
                    return Err(CliError::Config(
                        "with [problem.pde1d], give u0, v0 and forcing inside that section".into(),
                    ));
                }
                if !matches!(p.coupling, CouplingConfig::Zero) {
                    return Err(CliError::Config(
                        "with [problem.pde1d], use `reaction` instead of `coupling`".into(),
                    ));
                }
                let mesh = evoinc_core::pde1d::Mesh1D::new(pde.n_cells, pde.length, pde.left, pde.right)
                    .map_err(config_err("pde1d mesh"))?;
                let u0 = Expr::parse(&pde.u0, &["x"])?;
                let v0 = Expr::parse(&pde.v0, &["x"])?;
                let f = Expr::parse(&pde.forcing, &["t", "x"])?;
                let reaction = match &pde.reaction {
                    Some(r) => {
                        let b = Expr::parse(&r.expr, &["t", "x", "u"])?;
                        Some(Reaction {
                            b: Arc::new(move |t, x, u| b.eval(&[t, x, u])),
                            c_b: r.lipschitz,
                        })
                    }
                    None => None,
                };
                let prob = assemble_problem(
                    mesh,
                    potential,
                    reaction,
                    Arc::new(move |t, x| f.eval(&[t, x])),
                    &|x| u0.eval(&[x]),
                    &|x| v0.eval(&[x]),
                    p.horizon,
                )
                .map_err(built)?;
                (prob.spec.clone(), Some(prob))
            }
            None => {
                let u0 =
                    p.u0.clone()
                        .ok_or_else(|| CliError::Config("problem.u0 is required".into()))?;
                let dim = u0.len();
                let v0 = p.v0.clone().unwrap_or_else(|| vec![0.0; dim]);
                let forcing = forcing_from(p.forcing.as_deref(), dim)?;
                let spec = ProblemSpec::new(
                    Arc::new(potential),
                    coupling,
                    forcing,
                    DVector::from_vec(u0),
                    DVector::from_vec(v0),
                    p.horizon,
                )
                .map_err(built)?;
                (spec, None)
            }
        };

        let s = &self.solver;
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            n_steps: overrides.n_steps.or(s.n_steps).unwrap_or(d.n_steps),
            picard_tol: overrides.tol.or(s.picard_tol).unwrap_or(d.picard_tol),
            picard_max_iter: s.picard_max_iter.unwrap_or(d.picard_max_iter),
            prox_tol: s.prox_tol.unwrap_or(d.prox_tol),
            ball_radius: s.ball_radius.unwrap_or(d.ball_radius),
            blowup_threshold: s.blowup_threshold.unwrap_or(d.blowup_threshold),
            mode: overrides.mode.unwrap_or(s.mode).into(),
        };
        cfg.validate(&spec.u0).map_err(config_err("solver"))?;

        let stability = match &self.stability {
            Some(st) => {
                if pde.is_some() {
                    return Err(CliError::Config(
                        "[stability] is not supported with [problem.pde1d]".into(),
                    ));
                }
                if !(st.m_max > 0.0 && st.m_max.is_finite()) {
                    return Err(CliError::Config("stability.m_max must be positive".into()));
                }
                let dim = spec.dim();
                let u0 = st.u0.clone().map_or_else(|| spec.u0.clone(), DVector::from_vec);
                let v0 = st.v0.clone().map_or_else(|| spec.v0.clone(), DVector::from_vec);
                let forcing = match &st.forcing {
                    Some(f) => forcing_from(Some(f), dim)?,
                    None => spec.forcing.clone(),
                };
                let other = spec
                    .with_forcing(forcing)
                    .and_then(|o| o.with_initial(u0, v0))
                    .map_err(|e| CliError::Config(format!("stability: {e}")))?;
                Some((other, st.m_max))
            }
            None => None,
        };

        let mut output = self.output.clone();
        if let Some(out) = &overrides.out {
            output.dir = out.clone();
        }
        Ok(Experiment {
            name: name.to_string(),
            spec,
            cfg,
            continuation: s.continuation,
            pde,
            stability,
            output,
        })
    }
}

/// Reads, parses and validates a config file.
pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Experiment> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = ExperimentConfig::from_toml(&text)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    let base = path.parent().unwrap_or(Path::new("."));
    config.build(name, base, overrides)
}

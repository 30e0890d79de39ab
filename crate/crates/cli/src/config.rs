//! Command-line arguments, the key=value config file, and their validation
//! into a [`RunConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rho1d::analytic::{AnalyticSystem, SystemKind};
use rho1d::{FamilyIndex, Grid1D, PhysicalConstants, ScfParams};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "rho1d",
    version,
    about = "One-dimensional one-particle density functional toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground-state density and energy of one system.
    Solve(RunArgs),
    /// Build and verify the density-generated potentials V_n.
    Family(RunArgs),
    /// Check the three reference systems against their closed forms.
    Table1(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemName {
    Box,
    Oscillator,
    Delta,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Scf,
    Minimize,
    Eigensolve,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Scf => "scf",
            Solver::Minimize => "minimize",
            Solver::Eigensolve => "eigensolve",
        }
    }
}

/// Flags shared by every subcommand. Any of them may also come from
/// `--config FILE`; flags given on the command line win.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key=value file with defaults for any of the flags below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub system: Option<SystemName>,
    /// Box width.
    #[arg(long = "L", value_name = "L")]
    pub length: Option<f64>,
    /// Oscillator frequency.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Delta-well strength.
    #[arg(long)]
    pub g: Option<f64>,
    /// Two-column CSV (x, V) for `--system file`.
    #[arg(long, value_name = "PATH")]
    pub potential_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub xmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub xmax: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    /// Comma-separated family indices, e.g. `1,2,4`.
    #[arg(long, value_name = "LIST")]
    pub n: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for family verification.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub mixing: Option<f64>,
    #[arg(long)]
    pub tol_density: Option<f64>,
    #[arg(long)]
    pub tol_lambda: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

/// Keys accepted in a config file; the flag names without dashes.
const KEYS: &[&str] = &[
    "system",
    "L",
    "omega",
    "g",
    "potential-file",
    "xmin",
    "xmax",
    "grid-points",
    "hbar",
    "mass",
    "solver",
    "n",
    "out",
    "seed",
    "jobs",
    "mixing",
    "tol-density",
    "tol-lambda",
    "max-iter",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
/// Unknown or repeated keys are errors.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected key=value",
                lineno + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "line {}: unknown key `{key}`",
                lineno + 1
            )));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!(
                "line {}: `{key}` given twice",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, false)
        .map_err(|_| CliError::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunArgs {
    /// Fills every unset field from the config file named by `--config`.
    pub fn merged(&self) -> Result<RunArgs, CliError> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.merged_with(&parse_config_file(&text)?)
    }

    pub fn merged_with(&self, file: &BTreeMap<String, String>) -> Result<RunArgs, CliError> {
        let mut out = self.clone();
        for (key, value) in file {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "system" => fill(&mut out.system, || parse_enum(k, v))?,
                "L" => fill(&mut out.length, || parse_value(k, v))?,
                "omega" => fill(&mut out.omega, || parse_value(k, v))?,
                "g" => fill(&mut out.g, || parse_value(k, v))?,
                "potential-file" => fill(&mut out.potential_file, || Ok(PathBuf::from(v)))?,
                "xmin" => fill(&mut out.xmin, || parse_value(k, v))?,
                "xmax" => fill(&mut out.xmax, || parse_value(k, v))?,
                "grid-points" => fill(&mut out.grid_points, || parse_value(k, v))?,
                "hbar" => fill(&mut out.hbar, || parse_value(k, v))?,
                "mass" => fill(&mut out.mass, || parse_value(k, v))?,
                "solver" => fill(&mut out.solver, || parse_enum(k, v))?,
                "n" => fill(&mut out.n, || Ok(v.to_string()))?,
                "out" => fill(&mut out.out, || Ok(PathBuf::from(v)))?,
                "seed" => fill(&mut out.seed, || parse_value(k, v))?,
                "jobs" => fill(&mut out.jobs, || parse_value(k, v))?,
                "mixing" => fill(&mut out.mixing, || parse_value(k, v))?,
                "tol-density" => fill(&mut out.tol_density, || parse_value(k, v))?,
                "tol-lambda" => fill(&mut out.tol_lambda, || parse_value(k, v))?,
                "max-iter" => fill(&mut out.max_iter, || parse_value(k, v))?,
                _ => return Err(CliError::Config(format!("unknown key `{k}`"))),
            }
        }
        Ok(out)
    }
}

/// Sets `slot` from the file only when the flag left it empty. The file
/// value is still parsed so that malformed entries are reported.
fn fill<T>(
    slot: &mut Option<T>,
    parse: impl FnOnce() -> Result<T, CliError>,
) -> Result<(), CliError> {
    let value = parse()?;
    if slot.is_none() {
        *slot = Some(value);
    }
    Ok(())
}

/// A system to solve: a reference system with known closed forms, or a
/// tabulated potential.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    Analytic(AnalyticSystem),
    Tabulated {
        path: PathBuf,
        x: Vec<f64>,
        v: Vec<f64>,
    },
}

impl SystemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Analytic(s) => s.name(),
            SystemSpec::Tabulated { .. } => "file",
        }
    }
}

/// Validated settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Systems in run order: one for `solve`/`family`, three for `table1`.
    pub systems: Vec<SystemSpec>,
    /// Explicit grid; `None` uses each analytic system's default domain.
    pub grid: GridSpec,
    pub constants: PhysicalConstants,
    pub solver: Solver,
    pub scf: ScfParams,
    pub family: Vec<FamilyIndex>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridSpec {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub points: Option<usize>,
}

impl GridSpec {
    /// Grid for `system`, defaulting the missing pieces.
    pub fn for_system(&self, system: &SystemSpec) -> Result<Grid1D, CliError> {
        let (a, b, n) = match system {
            SystemSpec::Analytic(s) => {
                let (a, b) = s.default_domain();
                (a, b, s.default_points())
            }
            SystemSpec::Tabulated { x, .. } => (x[0], x[x.len() - 1], DEFAULT_FILE_POINTS),
        };
        let grid = Grid1D::new(
            self.x_min.unwrap_or(a),
            self.x_max.unwrap_or(b),
            self.points.unwrap_or(n),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        if let SystemSpec::Tabulated { x, .. } = system {
            let slack = 1e-12 * (x[x.len() - 1] - x[0]);
            if grid.x_min() < x[0] - slack || grid.x_max() > x[x.len() - 1] + slack {
                return Err(CliError::Config(format!(
                    "grid [{}, {}] extends beyond the tabulated potential [{}, {}]",
                    grid.x_min(),
                    grid.x_max(),
                    x[0],
                    x[x.len() - 1]
                )));
            }
        }
        Ok(grid)
    }
}

/// Grid size for tabulated potentials when `--grid-points` is not given.
pub const DEFAULT_FILE_POINTS: usize = 2001;

/// Default family indices.
pub const DEFAULT_FAMILY: [f64; 3] = [1.0, 2.0, 4.0];

/// Default seed for randomized checks.
pub const DEFAULT_SEED: u64 = 42;

/// Which subcommand a configuration is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Family,
    Table1,
}

fn positive(name: &str, value: Option<f64>, default: f64) -> Result<f64, CliError> {
    let v = value.unwrap_or(default);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "--{name} must be positive and finite, got {v}"
        )))
    }
}

pub fn parse_family_list(list: &str) -> Result<Vec<FamilyIndex>, CliError> {
    let indices: Vec<FamilyIndex> = list
        .split(',')
        .map(|item| {
            let n: f64 = parse_value("n", item.trim())?;
            FamilyIndex::new(n).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    if indices.is_empty() {
        return Err(CliError::Config("--n needs at least one index".into()));
    }
    Ok(indices)
}

/// Reads a two-column `(x, V)` CSV. A first row that does not parse as
/// numbers is taken as a header. Abscissae must increase strictly.
pub fn read_potential_file(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut x = Vec::new();
    let mut v = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != 2 {
            return Err(bad(format!(
                "row {} has {} columns, expected 2",
                row + 1,
                record.len()
            )));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => {
                x.push(a);
                v.push(b);
            }
            _ if row == 0 => continue,
            _ => {
                return Err(bad(format!(
                    "row {} is not a pair of finite numbers",
                    row + 1
                )))
            }
        }
    }
    if x.len() < 2 {
        return Err(bad("needs at least two rows".into()));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("x must increase strictly".into()));
    }
    Ok((x, v))
}

impl RunConfig {
    /// Validates merged arguments for `mode`.
    pub fn from_args(args: &RunArgs, mode: Mode) -> Result<Self, CliError> {
        let args = args.merged()?;
        let constants = PhysicalConstants::new(
            positive("hbar", args.hbar, 1.0)?,
            positive("mass", args.mass, 1.0)?,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let analytic = |kind| {
            AnalyticSystem::new(kind, constants).map_err(|e| CliError::Config(e.to_string()))
        };
        let box_ = || {
            analytic(SystemKind::Box {
                length: positive("L", args.length, 1.0)?,
            })
        };
        let osc = || {
            analytic(SystemKind::Oscillator {
                omega: positive("omega", args.omega, 1.0)?,
            })
        };
        let delta = || {
            analytic(SystemKind::Delta {
                g: positive("g", args.g, 1.0)?,
            })
        };

        let reject = |flag: &str, set: bool, why: &str| {
            if set {
                Err(CliError::Config(format!("--{flag} {why}")))
            } else {
                Ok(())
            }
        };

        let systems = match mode {
            Mode::Table1 => {
                reject(
                    "system",
                    args.system.is_some(),
                    "does not apply to table1, which covers all three systems",
                )?;
                reject(
                    "potential-file",
                    args.potential_file.is_some(),
                    "does not apply to table1",
                )?;
                reject(
                    "xmin",
                    args.xmin.is_some(),
                    "does not apply to table1; use --grid-points",
                )?;
                reject(
                    "xmax",
                    args.xmax.is_some(),
                    "does not apply to table1; use --grid-points",
                )?;
                vec![
                    SystemSpec::Analytic(box_()?),
                    SystemSpec::Analytic(osc()?),
                    SystemSpec::Analytic(delta()?),
                ]
            }
            Mode::Solve | Mode::Family => {
                let system = args
                    .system
                    .ok_or_else(|| CliError::Config("--system is required".into()))?;
                let not_for = format!("does not apply to --system {}", system_label(system));
                reject(
                    "L",
                    args.length.is_some() && system != SystemName::Box,
                    &not_for,
                )?;
                reject(
                    "omega",
                    args.omega.is_some() && system != SystemName::Oscillator,
                    &not_for,
                )?;
                reject(
                    "g",
                    args.g.is_some() && system != SystemName::Delta,
                    &not_for,
                )?;
                reject(
                    "potential-file",
                    args.potential_file.is_some() && system != SystemName::File,
                    &not_for,
                )?;
                let spec = match system {
                    SystemName::Box => SystemSpec::Analytic(box_()?),
                    SystemName::Oscillator => SystemSpec::Analytic(osc()?),
                    SystemName::Delta => SystemSpec::Analytic(delta()?),
                    SystemName::File => {
                        let path = args.potential_file.clone().ok_or_else(|| {
                            CliError::Config("--system file needs --potential-file".into())
                        })?;
                        let (x, v) = read_potential_file(&path)?;
                        SystemSpec::Tabulated { path, x, v }
                    }
                };
                vec![spec]
            }
        };
        reject(
            "n",
            args.n.is_some() && mode == Mode::Solve,
            "does not apply to solve",
        )?;

        let grid = GridSpec {
            x_min: args.xmin,
            x_max: args.xmax,
            points: args.grid_points,
        };
        for s in &systems {
            s.potential(&grid.for_system(s)?)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }

        let defaults = ScfParams::default();
        let scf = ScfParams {
            mixing: args.mixing.unwrap_or(defaults.mixing),
            tol_density: args.tol_density.unwrap_or(defaults.tol_density),
            tol_lambda: args.tol_lambda.unwrap_or(defaults.tol_lambda),
            max_iter: args.max_iter.unwrap_or(defaults.max_iter),
        };
        scf.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let family = match &args.n {
            Some(list) => parse_family_list(list)?,
            None => DEFAULT_FAMILY
                .iter()
                .map(|&n| FamilyIndex::new(n).expect("positive"))
                .collect(),
        };
        let jobs = match args.jobs {
            Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
            Some(j) => j,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };

        Ok(RunConfig {
            systems,
            grid,
            constants,
            solver: args.solver.unwrap_or(Solver::Scf),
            scf,
            family,
            out: args.out.unwrap_or_else(|| PathBuf::from(".")),
            seed: args.seed.unwrap_or(DEFAULT_SEED),
            jobs,
        })
    }
}

fn system_label(s: SystemName) -> &'static str {
    match s {
        SystemName::Box => "box",
        SystemName::Oscillator => "oscillator",
        SystemName::Delta => "delta",
        SystemName::File => "file",
    }
}

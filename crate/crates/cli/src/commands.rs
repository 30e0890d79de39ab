//! The `solve`, `family` and `table1` commands.

use std::io::Write;

use rayon::prelude::*;
use rho1d::analytic::AnalyticSystem;
use rho1d::density::{density_from_wavefunction, log_derivative};
use rho1d::eigen::{build_hamiltonian, ground_state};
use rho1d::family::{
    family_potential, potential_agreement, verify_potential, VerificationTolerances,
};
use rho1d::functional::{
    kinetic_energy, kinetic_energy_fourth_order, kinetic_energy_laplacian_form, potential_energy,
    total_energy,
};
use rho1d::scf::{default_initial_density, minimize_energy, scf_solve, stationarity_residual};
use rho1d::trial::trial_densities;
use rho1d::{
    Density, Error, FamilyIndex, Grid1D, PhysicalConstants, Potential, RealField, ScfParams,
    SolveReport, VerificationReport,
};
use serde::Serialize;

use crate::config::{RunConfig, Solver, SystemSpec};
use crate::error::CliError;
use crate::output::{ensure_dir, num, sig9, write_json, Table};

/// Residuals are reported where `ρ` is at least this fraction of its peak;
/// further out the division by `ρ` amplifies rounding.
pub const RESIDUAL_REGION: f64 = 1e-2;

/// Relative tolerance of the `E_0` rows of `table1`.
pub const TABLE1_ENERGY_TOL: f64 = 1e-2;
/// Relative tolerance of the `V_n` rows of `table1`.
pub const TABLE1_POTENTIAL_TOL: f64 = 1e-6;
/// Absolute slack of the variational rows of `table1`.
pub const TABLE1_VARIATIONAL_SLACK: f64 = 1e-6;
/// Trial densities per system in `table1`.
pub const TABLE1_TRIALS: usize = 100;

impl SystemSpec {
    /// Potential sampled on `grid`; tabulated data are interpolated
    /// linearly.
    pub fn potential(&self, grid: &Grid1D) -> Result<Potential, CliError> {
        match self {
            SystemSpec::Analytic(s) => Ok(s.potential(grid)?),
            SystemSpec::Tabulated { x, v, .. } => {
                let values = grid.nodes().map(|t| interpolate(x, v, t)).collect();
                Ok(Potential::new(RealField::new(*grid, values)?))
            }
        }
    }

    fn analytic(&self) -> Option<&AnalyticSystem> {
        match self {
            SystemSpec::Analytic(s) => Some(s),
            SystemSpec::Tabulated { .. } => None,
        }
    }
}

/// Piecewise-linear interpolation on increasing `xs`, clamped at the ends.
fn interpolate(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let k = xs.partition_point(|&a| a <= t);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[xs.len() - 1];
    }
    let w = (t - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

/// Ground state by the chosen solver. A run that exhausts `max_iter` is
/// returned with `converged = false` rather than as an error.
pub fn run_solver(
    solver: Solver,
    v: &Potential,
    c: PhysicalConstants,
    params: ScfParams,
) -> Result<(Density, SolveReport), CliError> {
    let solution = match solver {
        Solver::Eigensolve => {
            let h = build_hamiltonian(v, v.grid(), c)?;
            let (e, psi) = ground_state(&h)?;
            let report = SolveReport {
                lambda: e,
                iterations: 0,
                residual_history: Vec::new(),
                converged: true,
                linear_eigenvalue: None,
                energy_history: Vec::new(),
                clamped_nodes: 0,
            };
            return Ok((density_from_wavefunction(&psi)?, report));
        }
        Solver::Scf => scf_solve(v, &default_initial_density(v)?, params, c),
        Solver::Minimize => minimize_energy(v, &default_initial_density(v)?, params, c),
    };
    match solution {
        Ok(s) => Ok((s.density, s.report)),
        Err(Error::NotConverged(s)) => Ok((s.density, s.report)),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Serialize)]
struct GridJson {
    x_min: f64,
    x_max: f64,
    points: usize,
    spacing: f64,
}

impl From<&Grid1D> for GridJson {
    fn from(g: &Grid1D) -> Self {
        Self {
            x_min: g.x_min(),
            x_max: g.x_max(),
            points: g.len(),
            spacing: g.spacing(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SystemJson {
    name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none", rename = "L")]
    length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    potential_file: Option<String>,
}

impl From<&SystemSpec> for SystemJson {
    fn from(s: &SystemSpec) -> Self {
        use rho1d::SystemKind::*;
        let mut out = SystemJson {
            name: s.name(),
            length: None,
            omega: None,
            g: None,
            potential_file: None,
        };
        match s {
            SystemSpec::Analytic(a) => match a.kind {
                Box { length } => out.length = Some(length),
                Oscillator { omega } => out.omega = Some(omega),
                Delta { g } => out.g = Some(g),
            },
            SystemSpec::Tabulated { path, .. } => {
                out.potential_file = Some(path.display().to_string())
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct EnergyJson {
    /// Kinetic energy in the discretization of the solver that produced
    /// `λ`: `kinetic_laplacian` for `minimize` and `eigensolve`, the mean of
    /// `kinetic_laplacian` and `kinetic_cusp` for `scf`.
    kinetic: f64,
    /// Gradient form `(ħ²/2m)∫(φ')²`.
    kinetic_gradient: f64,
    /// `∫φ(−ħ²/2m)φ''`, the kinetic part of the discrete Rayleigh quotient.
    kinetic_laplacian: f64,
    /// Five-point Laplacian form, `O(h⁴)`.
    kinetic_fourth_order: f64,
    potential: f64,
    /// `kinetic + potential`.
    total: f64,
    /// `|λ − total| / |λ|`.
    lambda_identity_rel_err: f64,
}

#[derive(Debug, Serialize)]
struct ResidualJson {
    /// Fraction of the peak density above which residuals are measured.
    region: f64,
    /// Sup-norm of the discrete stationarity residual.
    stationarity: f64,
    /// Sup-norm of the continuum Euler residual.
    euler: f64,
    history: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct SolveJson {
    system: SystemJson,
    solver: &'static str,
    grid: GridJson,
    constants: PhysicalConstants,
    params: ScfParams,
    lambda: f64,
    converged: bool,
    iterations: usize,
    energy: EnergyJson,
    analytic_ground_energy: Option<f64>,
    linear_eigenvalue: Option<f64>,
    energy_history: Vec<f64>,
    clamped_nodes: usize,
    residuals: ResidualJson,
}

/// Solves one system and writes `density.csv` and `report.json`; echoes
/// `λ` to `stdout`. Exits with [`CliError::NoConvergence`] after writing
/// if the solver ran out of iterations.
pub fn cmd_solve(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<f64, CliError> {
    let system = &cfg.systems[0];
    let c = cfg.constants;
    let grid = cfg.grid.for_system(system)?;
    let v = system.potential(&grid)?;
    let (rho, report) = run_solver(cfg.solver, &v, c, cfg.scf)?;

    let out = ensure_dir(&cfg.out)?;
    let amplitude = rho.amplitude();
    let y = log_derivative(&rho);
    let mut table = Table::new(&["x", "rho", "sqrt_rho", "y"]);
    for i in 0..grid.len() {
        let yi = if y.valid[i] { y.values()[i] } else { f64::NAN };
        table.push(vec![
            num(grid.x(i)),
            num(rho.values()[i]),
            num(amplitude.values()[i]),
            num(yi),
        ]);
    }
    table.write(&out.join("density.csv"))?;

    let lambda = report.lambda;
    let kinetic_laplacian = kinetic_energy_laplacian_form(&rho, c);
    let kinetic_fourth_order = kinetic_energy_fourth_order(&rho, c);
    let kinetic = match cfg.solver {
        Solver::Scf => kinetic_fourth_order,
        Solver::Minimize | Solver::Eigensolve => kinetic_laplacian,
    };
    let potential = potential_energy(&rho, &v)?;
    let total = kinetic + potential;
    let peak = rho.values().iter().cloned().fold(0.0, f64::max);
    let region = |i: usize| rho.values()[i] >= RESIDUAL_REGION * peak;
    let stationarity = stationarity_residual(&rho, &v, lambda, c)?.sup_norm_where(|i, _| region(i));
    let euler =
        rho1d::functional::euler_residual(&rho, &v, lambda, c)?.sup_norm_where(|i, _| region(i));
    let json = SolveJson {
        system: system.into(),
        solver: cfg.solver.name(),
        grid: (&grid).into(),
        constants: c,
        params: cfg.scf,
        lambda,
        converged: report.converged,
        iterations: report.iterations,
        energy: EnergyJson {
            kinetic,
            kinetic_gradient: kinetic_energy(&rho, c),
            kinetic_laplacian,
            kinetic_fourth_order,
            potential,
            total,
            lambda_identity_rel_err: (lambda - total).abs() / lambda.abs(),
        },
        analytic_ground_energy: system.analytic().map(|s| s.ground_energy()),
        linear_eigenvalue: report.linear_eigenvalue,
        energy_history: report.energy_history.clone(),
        clamped_nodes: report.clamped_nodes,
        residuals: ResidualJson {
            region: RESIDUAL_REGION,
            stationarity,
            euler,
            history: report.residual_history.clone(),
        },
    };
    write_json(&out.join("report.json"), &json)?;
    writeln!(stdout, "lambda = {}", sig9(lambda))?;

    if !report.converged {
        return Err(CliError::NoConvergence(format!(
            "{} stopped after {} iterations",
            cfg.solver.name(),
            report.iterations
        )));
    }
    Ok(lambda)
}

/// Ground density, potential and energy that a family is built from:
/// closed forms for the reference systems, an eigensolve for tabulated
/// potentials.
fn reference_state(
    system: &SystemSpec,
    grid: &Grid1D,
    c: PhysicalConstants,
) -> Result<(Density, Potential, f64), CliError> {
    let v = system.potential(grid)?;
    match system {
        SystemSpec::Analytic(s) => Ok((s.density(grid)?, v, s.ground_energy())),
        SystemSpec::Tabulated { .. } => {
            let h = build_hamiltonian(&v, grid, c)?;
            let (e0, psi) = ground_state(&h)?;
            Ok((density_from_wavefunction(&psi)?, v, e0))
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// File-name fragment for a family index: `1`, `2`, `0.5`.
fn index_label(n: FamilyIndex) -> String {
    num(n.n())
}

/// Builds `V_n` for every requested `n`, eigensolves it, and writes
/// `potential_n{n}.csv` plus `family_report.csv`. Workers only compute;
/// files are written afterwards in the order of `--n`.
pub fn cmd_family(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
) -> Result<Vec<VerificationReport>, CliError> {
    let system = &cfg.systems[0];
    let c = cfg.constants;
    let grid = cfg.grid.for_system(system)?;
    let (rho, v, e0) = reference_state(system, &grid, c)?;
    let tol = VerificationTolerances::default();

    let results: Vec<(Potential, VerificationReport)> = pool(cfg.jobs)?.install(|| {
        cfg.family
            .par_iter()
            .map(|&n| {
                let vn = family_potential(n, &rho, &v, c)?;
                let report = verify_potential(n, &vn, &rho, e0, c, tol)?;
                Ok::<_, CliError>((vn, report))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let out = ensure_dir(&cfg.out)?;
    let mut summary = Table::new(&["n", "E_expected", "E_num", "rel_err", "overlap", "pass"]);
    for (&n, (vn, r)) in cfg.family.iter().zip(&results) {
        let mut table = Table::new(&["x", "V_n"]);
        for (x, val) in grid.nodes().zip(vn.values()) {
            table.push(vec![num(x), num(*val)]);
        }
        table.write(&out.join(format!("potential_n{}.csv", index_label(n))))?;
        summary.push(vec![
            num(r.n),
            num(r.e_expected),
            num(r.e_num),
            num(r.rel_err),
            num(r.overlap),
            r.pass.to_string(),
        ]);
        writeln!(
            stdout,
            "n = {}: E_num = {} (expected {}), overlap = {}, {}",
            index_label(n),
            sig9(r.e_num),
            sig9(r.e_expected),
            sig9(r.overlap),
            if r.pass { "pass" } else { "FAIL" }
        )?;
    }
    summary.write(&out.join("family_report.csv"))?;

    let reports: Vec<VerificationReport> = results.into_iter().map(|(_, r)| r).collect();
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Verification(format!(
            "{failed} of {} family members failed",
            reports.len()
        )));
    }
    Ok(reports)
}

/// One line of `table1_check.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub system: &'static str,
    pub quantity: String,
    pub analytic: f64,
    pub numerical: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks of one reference system, in row order.
fn table1_rows(system: &AnalyticSystem, cfg: &RunConfig) -> Result<Vec<CheckRow>, CliError> {
    let spec = SystemSpec::Analytic(*system);
    let c = cfg.constants;
    let grid = cfg.grid.for_system(&spec)?;
    let v = system.potential(&grid)?;
    let e0 = system.ground_energy();
    let name = system.name();
    let mut rows = Vec::new();

    let (_, report) = run_solver(cfg.solver, &v, c, cfg.scf)?;
    let rel = (report.lambda - e0).abs() / e0.abs();
    rows.push(CheckRow {
        system: name,
        quantity: "E_0".into(),
        analytic: e0,
        numerical: report.lambda,
        rel_err: rel,
        tolerance: TABLE1_ENERGY_TOL,
        pass: report.converged && rel < TABLE1_ENERGY_TOL,
    });

    // Generated V_n against the closed form; the row reports the largest
    // node deviation relative to max(|V_n|, |E_n|).
    let rho = system.density(&grid)?;
    for &n in &cfg.family {
        let generated = family_potential(n, &rho, &v, c)?;
        let exact = system.family_potential(n, &grid)?;
        let dev = potential_agreement(
            &generated,
            &exact,
            rho1d::family::family_energy(n, e0).abs(),
        )?;
        rows.push(CheckRow {
            system: name,
            quantity: format!("V_{}", index_label(n)),
            analytic: 0.0,
            numerical: dev,
            rel_err: dev,
            tolerance: TABLE1_POTENTIAL_TOL,
            pass: dev < TABLE1_POTENTIAL_TOL,
        });
    }

    // Lowest energy over seeded trial densities; may not undercut E₀.
    let lowest = trial_densities(system, &grid, TABLE1_TRIALS, cfg.seed)?
        .iter()
        .map(|r| total_energy(r, &v, c))
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    rows.push(CheckRow {
        system: name,
        quantity: "variational_min".into(),
        analytic: e0,
        numerical: lowest,
        rel_err: (e0 - lowest).max(0.0) / e0.abs(),
        tolerance: TABLE1_VARIATIONAL_SLACK / e0.abs(),
        pass: lowest >= e0 - TABLE1_VARIATIONAL_SLACK,
    });
    Ok(rows)
}

/// Checks the three reference systems and writes `table1_check.csv`.
pub fn cmd_table1(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Vec<CheckRow>, CliError> {
    let systems: Vec<AnalyticSystem> = cfg
        .systems
        .iter()
        .filter_map(|s| s.analytic().copied())
        .collect();
    let per_system: Vec<Vec<CheckRow>> = pool(cfg.jobs)?.install(|| {
        systems
            .par_iter()
            .map(|s| table1_rows(s, cfg))
            .collect::<Result<_, _>>()
    })?;
    let rows: Vec<CheckRow> = per_system.into_iter().flatten().collect();

    let out = ensure_dir(&cfg.out)?;
    let mut table = Table::new(&[
        "system",
        "quantity",
        "analytic",
        "numerical",
        "rel_err",
        "tolerance",
        "pass",
    ]);
    for r in &rows {
        table.push(vec![
            r.system.to_string(),
            r.quantity.clone(),
            num(r.analytic),
            num(r.numerical),
            num(r.rel_err),
            num(r.tolerance),
            r.pass.to_string(),
        ]);
        writeln!(
            stdout,
            "{:<10} {:<16} rel_err = {:<24} {}",
            r.system,
            r.quantity,
            num(r.rel_err),
            if r.pass { "pass" } else { "FAIL" }
        )?;
    }
    table.write(&out.join("table1_check.csv"))?;

    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Verification(format!(
            "{failed} of {} checks failed",
            rows.len()
        )));
    }
    Ok(rows)
}

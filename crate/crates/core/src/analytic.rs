//! Closed forms for the three reference systems: infinite square well,
//! harmonic oscillator and attractive delta well.

use std::f64::consts::PI;

use crate::density::{normalize, Density};
use crate::error::{Error, Result};
use crate::family::FamilyIndex;
use crate::functional::{DeltaTerm, PhysicalConstants, Potential};
use crate::grid::{Boundary, Grid1D, RealField};

/// Largest tolerated probability mass of the closed-form density outside
/// the grid.
const TRUNCATION_TOLERANCE: f64 = 1e-6;

/// Family potentials of the box are clamped this many nodes from a wall.
const WALL_CLAMP_NODES: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemKind {
    /// `V = 0` for `|x| < L/2`, infinite outside.
    Box { length: f64 },
    /// `V = mω²x²/2`.
    Oscillator { omega: f64 },
    /// `V = −g δ(x)`.
    Delta { g: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSystem {
    pub kind: SystemKind,
    pub constants: PhysicalConstants,
}

impl AnalyticSystem {
    pub fn new(kind: SystemKind, constants: PhysicalConstants) -> Result<Self> {
        let p = match kind {
            SystemKind::Box { length } => length,
            SystemKind::Oscillator { omega } => omega,
            SystemKind::Delta { g } => g,
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "system parameter must be positive, got {p}"
            )));
        }
        Ok(Self { kind, constants })
    }

    pub fn unit_box() -> Self {
        Self {
            kind: SystemKind::Box { length: 1.0 },
            constants: PhysicalConstants::default(),
        }
    }

    pub fn unit_oscillator() -> Self {
        Self {
            kind: SystemKind::Oscillator { omega: 1.0 },
            constants: PhysicalConstants::default(),
        }
    }

    pub fn unit_delta() -> Self {
        Self {
            kind: SystemKind::Delta { g: 1.0 },
            constants: PhysicalConstants::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SystemKind::Box { .. } => "box",
            SystemKind::Oscillator { .. } => "oscillator",
            SystemKind::Delta { .. } => "delta",
        }
    }

    /// Decay length: `L`, `√(ħ/mω)` or `ħ²/(mg)`.
    pub fn length_scale(&self) -> f64 {
        let PhysicalConstants { hbar, mass } = self.constants;
        match self.kind {
            SystemKind::Box { length } => length,
            SystemKind::Oscillator { omega } => (hbar / (mass * omega)).sqrt(),
            SystemKind::Delta { g } => hbar * hbar / (mass * g),
        }
    }

    /// Default node count: 4001 for the box and oscillator, 12001 for the
    /// delta well, whose kink costs the quadratures an order in `h`.
    pub fn default_points(&self) -> usize {
        match self.kind {
            SystemKind::Delta { .. } => 12_001,
            _ => 4_001,
        }
    }

    /// `[−L/2, L/2]`, `±10√(ħ/mω)`, or `±15ħ²/(mg)`.
    pub fn default_domain(&self) -> (f64, f64) {
        let s = self.length_scale();
        let half = match self.kind {
            SystemKind::Box { .. } => 0.5 * s,
            SystemKind::Oscillator { .. } => 10.0 * s,
            SystemKind::Delta { .. } => 15.0 * s,
        };
        (-half, half)
    }

    pub fn default_grid(&self, n_points: Option<usize>) -> Result<Grid1D> {
        let (a, b) = self.default_domain();
        Grid1D::new(a, b, n_points.unwrap_or_else(|| self.default_points()))
    }

    /// `(ħπ/L)²/2m`, `ħω/2`, or `−mg²/2ħ²`.
    pub fn ground_energy(&self) -> f64 {
        let PhysicalConstants { hbar, mass } = self.constants;
        match self.kind {
            SystemKind::Box { length } => (hbar * PI / length).powi(2) / (2.0 * mass),
            SystemKind::Oscillator { omega } => 0.5 * hbar * omega,
            SystemKind::Delta { g } => -mass * g * g / (2.0 * hbar * hbar),
        }
    }

    fn check_domain(&self, grid: &Grid1D) -> Result<()> {
        let slack = 1e-9 * grid.spacing();
        match self.kind {
            SystemKind::Box { length } => {
                if grid.x_min() > -0.5 * length + slack || grid.x_max() < 0.5 * length - slack {
                    return Err(Error::DomainMismatch(format!(
                        "grid [{}, {}] does not contain the box [{}, {}]",
                        grid.x_min(),
                        grid.x_max(),
                        -0.5 * length,
                        0.5 * length
                    )));
                }
            }
            SystemKind::Delta { .. } => {
                if !grid.contains(0.0) {
                    return Err(Error::DomainMismatch("grid does not contain x = 0".into()));
                }
            }
            SystemKind::Oscillator { .. } => {}
        }
        Ok(())
    }

    fn check_truncation(&self, grid: &Grid1D) -> Result<()> {
        match self.kind {
            SystemKind::Box { .. } => {}
            _ => {
                if !grid.contains(0.0) {
                    return Err(Error::DomainMismatch("grid does not contain x = 0".into()));
                }
                let outside = self.tail_mass(-grid.x_min()) + self.tail_mass(grid.x_max());
                if outside > TRUNCATION_TOLERANCE {
                    return Err(Error::DomainMismatch(format!(
                        "grid [{}, {}] leaves up to {outside:.3e} of the {} density outside",
                        grid.x_min(),
                        grid.x_max(),
                        self.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Upper bound on the ground-state probability beyond distance `z ≥ 0`
    /// on one side of the origin.
    fn tail_mass(&self, z: f64) -> f64 {
        let PhysicalConstants { hbar, mass } = self.constants;
        match self.kind {
            SystemKind::Box { .. } => 0.0,
            SystemKind::Oscillator { omega } => {
                // ½erfc(√a·z) ≤ e^{−az²}/(2z√(πa))
                let a = mass * omega / hbar;
                if z <= 0.0 {
                    0.5
                } else {
                    0.5 * ((-a * z * z).exp() / (z * (PI * a).sqrt())).min(1.0)
                }
            }
            SystemKind::Delta { g } => 0.5 * (-2.0 * mass * g / (hbar * hbar) * z.max(0.0)).exp(),
        }
    }

    fn walls(&self, grid: &Grid1D) -> Vec<bool> {
        match self.kind {
            SystemKind::Box { length } => {
                let edge = 0.5 * length - 1e-9 * grid.spacing();
                grid.nodes().map(|x| x.abs() >= edge).collect()
            }
            _ => vec![false; grid.len()],
        }
    }

    /// External potential on `grid`.
    pub fn potential(&self, grid: &Grid1D) -> Result<Potential> {
        self.check_domain(grid)?;
        let PhysicalConstants { mass, .. } = self.constants;
        match self.kind {
            SystemKind::Box { .. } => Potential::zero(*grid).with_walls(self.walls(grid)),
            SystemKind::Oscillator { omega } => {
                Potential::from_fn(*grid, |x| 0.5 * mass * omega * omega * x * x)
            }
            SystemKind::Delta { g } => Potential::zero(*grid).with_delta(DeltaTerm {
                location: 0.0,
                strength: -g,
            }),
        }
    }

    /// Ground-state density sampled on `grid` and renormalized by the
    /// trapezoid rule. Fails if the grid cuts off more than `1e-6` of the
    /// probability.
    pub fn density(&self, grid: &Grid1D) -> Result<Density> {
        self.check_domain(grid)?;
        self.check_truncation(grid)?;
        let PhysicalConstants { hbar, mass } = self.constants;
        let walls = self.walls(grid);
        let field = match self.kind {
            SystemKind::Box { length } => {
                let values = (0..grid.len())
                    .zip(&walls)
                    .map(|(i, &w)| {
                        if w {
                            0.0
                        } else {
                            2.0 / length
                                * (PI * wall_distance(grid, length, i) / length).sin().powi(2)
                        }
                    })
                    .collect();
                RealField::new(*grid, values)?.with_boundary(Boundary::HardWall)
            }
            SystemKind::Oscillator { omega } => {
                let a = mass * omega / hbar;
                RealField::from_fn(*grid, |x| (a / PI).sqrt() * (-a * x * x).exp())?
            }
            SystemKind::Delta { g } => {
                let k = mass * g / (hbar * hbar);
                RealField::from_fn(*grid, |x| k * (-2.0 * k * x.abs()).exp())?
            }
        };
        normalize(&field)
    }

    /// Closed-form `V_n`: `2n(2n−1)E₀tan²(πx/L)`, `4n²V`, or
    /// `2nV − 2n(2n−1)E₀`.
    ///
    /// Box nodes within three spacings of a wall are masked and set to ten
    /// times the nearest unmasked value.
    pub fn family_potential(&self, n: FamilyIndex, grid: &Grid1D) -> Result<Potential> {
        let n = n.n();
        let e0 = self.ground_energy();
        let base = self.potential(grid)?;
        match self.kind {
            SystemKind::Box { length } => {
                let walls = self.walls(grid);
                let coef = 2.0 * n * (2.0 * n - 1.0) * e0;
                let clamp = WALL_CLAMP_NODES * grid.spacing() * (1.0 + 1e-9);
                let dist: Vec<f64> = (0..grid.len())
                    .map(|i| wall_distance(grid, length, i))
                    .collect();
                let near: Vec<bool> = dist
                    .iter()
                    .zip(&walls)
                    .map(|(&d, &w)| !w && d <= clamp)
                    .collect();
                // tan(πx/L) = cot(πd/L) with d the distance to the nearer wall.
                let mut values: Vec<f64> = dist
                    .iter()
                    .zip(walls.iter().zip(&near))
                    .map(|(&d, (&w, &m))| {
                        if w || m {
                            0.0
                        } else {
                            coef / (PI * d / length).tan().powi(2)
                        }
                    })
                    .collect();
                let nodes = grid.len();
                for i in 0..nodes {
                    if near[i] {
                        let source = nearest_free(i, &walls, &near);
                        values[i] = source.map_or(0.0, |j| 10.0 * values[j]);
                    }
                }
                Potential::new(RealField::new(*grid, values)?)
                    .with_walls(walls)?
                    .with_mask(near)
            }
            SystemKind::Oscillator { .. } => Ok(base.scaled(4.0 * n * n)),
            SystemKind::Delta { .. } => {
                let shift = -2.0 * n * (2.0 * n - 1.0) * e0;
                let constant =
                    crate::grid::MaskedField::all_valid(RealField::from_fn(*grid, |_| 1.0)?);
                base.affine(2.0 * n, &constant, shift)
            }
        }
    }
}

/// Distance from node `i` to the nearer wall at `±L/2`, measured from the
/// grid ends so that it carries no cancellation error near the walls.
pub(crate) fn wall_distance(grid: &Grid1D, length: f64, i: usize) -> f64 {
    let h = grid.spacing();
    let left = i as f64 * h + (grid.x_min() + 0.5 * length);
    let right = (grid.len() - 1 - i) as f64 * h + (0.5 * length - grid.x_max());
    left.min(right)
}

/// Closest node that is neither a wall nor clamped.
fn nearest_free(i: usize, walls: &[bool], near: &[bool]) -> Option<usize> {
    let free = |j: usize| !walls[j] && !near[j];
    (1..walls.len()).find_map(|d| {
        [i.checked_sub(d), Some(i + d).filter(|&j| j < walls.len())]
            .into_iter()
            .flatten()
            .find(|&j| free(j))
    })
}

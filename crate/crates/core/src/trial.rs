//! Seeded random trial densities (Gaussian mixtures) for variational checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::analytic::{AnalyticSystem, SystemKind};
use crate::density::{normalize, Density};
use crate::error::Result;
use crate::grid::{Boundary, Grid1D, RealField};

/// Default seed for reproducible trial sets.
pub const DEFAULT_SEED: u64 = 42;

/// `count` smooth normalized densities built from one to three Gaussians.
///
/// Centres and widths scale with the system's length scale and keep the
/// density below `e⁻²⁰` of its peak at the edges of the default domain, so
/// boundary terms of integration by parts are negligible. Box trials are
/// multiplied by `cos²(πx/L)` so that they vanish on the walls.
pub fn trial_densities(
    system: &AnalyticSystem,
    grid: &Grid1D,
    count: usize,
    seed: u64,
) -> Result<Vec<Density>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = system.length_scale();
    let (center_span, width_range) = match system.kind {
        SystemKind::Box { .. } => (0.3 * s, (0.05 * s, 0.3 * s)),
        SystemKind::Oscillator { .. } => (2.0 * s, (0.5 * s, s)),
        SystemKind::Delta { .. } => (2.0 * s, (0.3 * s, 2.0 * s)),
    };
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            let comps: Vec<(f64, f64, f64)> = (0..k)
                .map(|_| {
                    (
                        rng.gen_range(0.2..1.0),
                        rng.gen_range(-center_span..=center_span),
                        rng.gen_range(width_range.0..=width_range.1),
                    )
                })
                .collect();
            let mixture = |x: f64| -> f64 {
                comps
                    .iter()
                    .map(|&(w, c, sd)| w * (-0.5 * ((x - c) / sd).powi(2)).exp())
                    .sum()
            };
            let field = match system.kind {
                SystemKind::Box { length } => {
                    let values = grid
                        .nodes()
                        .map(|x| {
                            if x.abs() >= 0.5 * length - 1e-9 * grid.spacing() {
                                0.0
                            } else {
                                mixture(x) * (PI * x / length).cos().powi(2)
                            }
                        })
                        .collect();
                    RealField::new(*grid, values)?.with_boundary(Boundary::HardWall)
                }
                _ => RealField::from_fn(*grid, mixture)?,
            };
            normalize(&field)
        })
        .collect()
}

//! First-order (Riccati) form of the Euler equation in `y = d ln ρ/dx`:
//! `−(ħ²/8m)(2y' + y²) + V = λ`.

use crate::density::{normalize, Density, LogSlopeField};
use crate::error::{Error, Result};
use crate::functional::{mask_near, PhysicalConstants, Potential};
use crate::grid::{derivative, dilate_mask, MaskedField, RealField};

/// `−(ħ²/8m)(2y' + y²) + V − λ` pointwise.
///
/// Masked: nodes next to an invalid `y`, walls, and nodes within one node of
/// a delta term (where `y` jumps).
pub fn riccati_residual(
    y: &LogSlopeField,
    v: &Potential,
    lambda: f64,
    c: PhysicalConstants,
) -> Result<MaskedField> {
    if y.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let dy = derivative(&y.field);
    let k = c.kinetic_coefficient() / 4.0;
    let mut valid: Vec<bool> = y
        .valid
        .iter()
        .zip(v.walls())
        .map(|(&ok, &w)| ok && !w)
        .collect();
    valid = dilate_mask(&valid, 1);
    mask_near(&mut valid, &v.delta_nodes(), 1);
    let values = (0..valid.len())
        .map(|i| {
            if valid[i] {
                let yi = y.values()[i];
                -k * (2.0 * dy.values()[i] + yi * yi) + v.values()[i] - lambda
            } else {
                0.0
            }
        })
        .collect();
    MaskedField::new(RealField::new(*y.grid(), values)?, valid)
}

/// `ρ ∝ exp(∫y)`, integrated by the cumulative trapezoid rule from `x_min`
/// and normalized. Masked samples are used as they are.
pub fn density_from_logslope(y: &LogSlopeField) -> Result<Density> {
    let grid = *y.grid();
    let h = grid.spacing();
    let v = y.values();
    let mut g = vec![0.0; v.len()];
    for i in 1..v.len() {
        g[i] = g[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
    }
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::NotNormalizable("log-density is not finite".into()));
    }
    normalize(&RealField::new(
        grid,
        g.iter().map(|x| (x - top).exp()).collect(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::log_derivative;
    use crate::functional::DeltaTerm;
    use crate::grid::Grid1D;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn slope(g: Grid1D, f: impl Fn(f64) -> f64) -> LogSlopeField {
        MaskedField::all_valid(RealField::from_fn(g, f).unwrap())
    }

    #[test]
    fn oscillator_residual() {
        let c = PhysicalConstants::default();
        let g = Grid1D::new(-10.0, 10.0, 2001).unwrap();
        let v = Potential::from_fn(g, |x| 0.5 * x * x).unwrap();
        let y = slope(g, |x| -2.0 * x);
        assert!(
            riccati_residual(&y, &v, 0.5, c)
                .unwrap()
                .interior_sup_norm(1)
                < 1e-6
        );
        let r = riccati_residual(&y, &v, 0.0, c).unwrap();
        for i in 1..2000 {
            assert_abs_diff_eq!(r.values()[i], 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn delta_residual_off_origin() {
        let c = PhysicalConstants::default();
        let g = Grid1D::new(-15.0, 15.0, 3001).unwrap();
        let v = Potential::zero(g)
            .with_delta(DeltaTerm {
                location: 0.0,
                strength: -1.0,
            })
            .unwrap();
        let y = slope(g, |x| if x == 0.0 { 0.0 } else { -2.0 * x.signum() });
        let r = riccati_residual(&y, &v, -0.5, c).unwrap();
        assert!(!r.valid[1500] && !r.valid[1499] && !r.valid[1501]);
        assert!(r.interior_sup_norm(1) < 1e-12);
    }

    #[test]
    fn logslope_to_density_examples() {
        let g = Grid1D::new(-8.0, 8.0, 1601).unwrap();
        let rho = density_from_logslope(&slope(g, |x| -2.0 * x)).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(rho.values()[i], (-x * x).exp() / PI.sqrt(), epsilon = 1e-10);
        }
        let flat = density_from_logslope(&slope(g, |_| 0.0)).unwrap();
        assert!(flat
            .values()
            .iter()
            .all(|&r| (r - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn overflowing_slope_is_rejected() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let y = slope(g, |_| f64::MAX);
        assert!(matches!(
            density_from_logslope(&y),
            Err(Error::NotNormalizable(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip(w in proptest::collection::vec(0.2..1.0f64, 2),
                      c in proptest::collection::vec(-1.5..1.5f64, 2),
                      s in proptest::collection::vec(0.8..1.5f64, 2)) {
            let g = Grid1D::new(-4.0, 4.0, 4001).unwrap();
            let f = RealField::from_fn(g, |x| {
                (0..2).map(|k| w[k] * (-((x - c[k]) / s[k]).powi(2) / 2.0).exp()).sum()
            }).unwrap();
            let rho = normalize(&f).unwrap();
            let back = density_from_logslope(&log_derivative(&rho)).unwrap();
            prop_assert!(back.l1_distance(&rho).unwrap() < 1e-6);
        }
    }
}

//! Normalized densities, real wavefunctions, and the log-derivative
//! `y = d ln ρ / dx`.
//!
//! Densities are stored as `ρ` itself. Derivative-based quantities are
//! evaluated either on `ln ρ` or on `φ = √ρ`, whichever is locally closer to a
//! quadratic (see [`log_derivatives`]); both routes are second order, but each
//! is exact on a different class of densities (Gaussian/exponential tails for
//! `ln ρ`, polynomial zeros at hard walls for `φ`).

use crate::error::{Error, Result};
use crate::grid::{
    derivative, integrate, second_derivative, Boundary, Grid1D, MaskedField, RealField,
};

/// Densities below this are treated as zero by log-derivative evaluations.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Maximum allowed deviation of `∫ρ` from 1.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Below this deviation `normalize` leaves the samples untouched, so that it
/// is idempotent bit for bit.
const RENORMALIZE_THRESHOLD: f64 = 1e-14;

/// Nonnegative density with unit trapezoidal integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    field: RealField,
    floor: f64,
}

impl Density {
    /// Validates nonnegativity and normalization of an existing field.
    pub fn new(field: RealField) -> Result<Self> {
        if let Some(i) = field.values().iter().position(|&v| v < 0.0) {
            return Err(Error::NotNormalizable(format!(
                "negative sample {} at node {i}",
                field.values()[i]
            )));
        }
        let norm = integrate(&field);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalizable(format!(
                "integral is {norm}, expected 1"
            )));
        }
        Ok(Self {
            field,
            floor: DENSITY_FLOOR,
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn field(&self) -> &RealField {
        &self.field
    }

    pub fn into_field(self) -> RealField {
        self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn grid(&self) -> &Grid1D {
        self.field.grid()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `φ = √ρ`, carrying the density's boundary flag.
    pub fn amplitude(&self) -> RealField {
        let v = self.values().iter().map(|r| r.sqrt()).collect();
        RealField::from_raw(*self.grid(), v, self.field.boundary())
    }

    /// `∫|ρ − other|` (trapezoid).
    pub fn l1_distance(&self, other: &Density) -> Result<f64> {
        let diff = self.field.zip_map(&other.field, |a, b| (a - b).abs())?;
        Ok(integrate(&diff))
    }

    /// Density evaluated at `x` by linear interpolation.
    pub fn at(&self, x: f64) -> Option<f64> {
        self.field.interpolate(x)
    }
}

/// Real wavefunction with `∫ψ² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    field: RealField,
}

impl Wavefunction {
    pub fn new(field: RealField) -> Result<Self> {
        let norm = integrate(&field.map(|v| v * v)?);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalizable(format!("∫ψ² is {norm}, expected 1")));
        }
        Ok(Self { field })
    }

    /// Scales `field` to unit norm.
    pub fn normalized(field: RealField) -> Result<Self> {
        let norm = integrate(&field.map(|v| v * v)?);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalizable(format!("∫ψ² is {norm}")));
        }
        let s = norm.sqrt();
        Self::new(field.map(|v| v / s)?)
    }

    pub fn field(&self) -> &RealField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn grid(&self) -> &Grid1D {
        self.field.grid()
    }

    /// `|∫ψ·other|`.
    pub fn overlap(&self, other: &Wavefunction) -> Result<f64> {
        let prod = self.field.zip_map(&other.field, |a, b| a * b)?;
        Ok(integrate(&prod).abs())
    }
}

/// Divides a nonnegative field by its integral.
pub fn normalize(f: &RealField) -> Result<Density> {
    if let Some(i) = f.values().iter().position(|&v| v < 0.0) {
        return Err(Error::NotNormalizable(format!(
            "negative sample {} at node {i}",
            f.values()[i]
        )));
    }
    let norm = integrate(f);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::NotNormalizable(format!("integral is {norm}")));
    }
    if (norm - 1.0).abs() <= RENORMALIZE_THRESHOLD {
        return Density::new(f.clone());
    }
    Density::new(f.map(|v| v / norm)?)
}

/// `ρ = ψ²`.
pub fn density_from_wavefunction(psi: &Wavefunction) -> Result<Density> {
    Density::new(psi.field().map(|v| v * v)?)
}

/// `ψ_n = c_n ρⁿ` with `c_n = (∫ρ²ⁿ)^{-1/2}`. For `n = 1/2` this is `√ρ`.
pub fn wavefunction_from_density_power(rho: &Density, n: f64) -> Result<Wavefunction> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "density power must be positive, got {n}"
        )));
    }
    let powered = if n == 0.5 {
        rho.amplitude()
    } else {
        rho.field().map(|r| r.powf(n))?
    };
    let norm = integrate(&powered.map(|v| v * v)?);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegeneratePower(n));
    }
    let c = norm.sqrt().recip();
    Wavefunction::new(powered.map(|v| c * v)?)
}

/// `y = d ln ρ/dx` with a validity mask; nodes with `ρ < floor` are masked.
pub type LogSlopeField = MaskedField;

/// First and second derivatives of `ln ρ`.
#[derive(Debug, Clone)]
pub struct LogDerivatives {
    /// `y = (ln ρ)'`, masked where `ρ` is below the floor.
    pub slope: LogSlopeField,
    /// `(ln ρ)''`; zero on masked nodes.
    pub curvature: RealField,
    /// `true` where the value was taken from differences of `ln ρ`,
    /// `false` where it came from `φ = √ρ`.
    pub from_log: Vec<bool>,
}

/// Second-order `(ln ρ)'` and `(ln ρ)''` on every node.
///
/// Two stencils are available: central differences of `ln ρ`, and
/// `2φ'/φ`, `2(φ''/φ − (φ'/φ)²)` with `φ = √ρ`. Their truncation errors are
/// proportional to `(ln ρ)'''` and `φ'''/φ` respectively, so each node uses the
/// representation with the smaller local third difference. The `ln ρ`
/// route is only eligible when every node of its stencil is above the floor.
pub fn log_derivatives(rho: &Density) -> LogDerivatives {
    let grid = *rho.grid();
    let n = grid.len();
    let r = rho.values();
    let floor = rho.floor();
    let valid: Vec<bool> = r.iter().map(|&v| v >= floor && v > 0.0).collect();

    let phi = rho.amplitude();
    let dphi = derivative(&phi);
    let d2phi = second_derivative(&phi);
    let p = phi.values();

    let logr = RealField::from_raw(
        grid,
        r.iter()
            .map(|&v| v.max(floor).max(f64::MIN_POSITIVE).ln())
            .collect(),
        Boundary::Open,
    );
    let dg = derivative(&logr);
    let d2g = second_derivative(&logr);
    let g = logr.values();

    let span_ok = |lo: usize, hi: usize| valid[lo..=hi].iter().all(|&v| v);
    let log_eligible = |i: usize| {
        let reach = 3.min(n - 1);
        if i == 0 {
            span_ok(0, reach)
        } else if i == n - 1 {
            span_ok(n - 1 - reach, n - 1)
        } else {
            span_ok(i - 1, i + 1)
        }
    };
    // Smallest four-point third difference (about h³ times the third
    // derivative) over the windows containing the three-point stencil of
    // node k. A kink sitting at a stencil end then does not count against it.
    let third =
        |v: &[f64], lo: usize| (v[lo + 3] - 3.0 * v[lo + 2] + 3.0 * v[lo + 1] - v[lo]).abs();
    let indicator = |k: usize| -> (f64, f64) {
        let mut est_log = f64::INFINITY;
        let mut est_phi = f64::INFINITY;
        for lo in [k.wrapping_sub(2), k.wrapping_sub(1)] {
            if lo > k || lo + 3 >= n {
                continue;
            }
            if span_ok(lo, lo + 3) {
                est_log = est_log.min(third(g, lo));
            }
            est_phi = est_phi.min(2.0 * third(p, lo) / p[k]);
        }
        (est_log, est_phi)
    };

    let mut y = vec![0.0; n];
    let mut curv = vec![0.0; n];
    let mut from_log = vec![false; n];
    for i in 0..n {
        if !valid[i] {
            continue;
        }
        let use_log = log_eligible(i) && {
            let (el, ep) = indicator(i.clamp(1, n - 2));
            el <= ep || ep.is_nan()
        };
        if use_log {
            y[i] = dg.values()[i];
            curv[i] = d2g.values()[i];
        } else {
            let q1 = dphi.values()[i] / p[i];
            let q2 = d2phi.values()[i] / p[i];
            y[i] = 2.0 * q1;
            curv[i] = 2.0 * (q2 - q1 * q1);
        }
        from_log[i] = use_log;
    }
    LogDerivatives {
        slope: MaskedField {
            field: RealField::from_raw(grid, y, Boundary::Open),
            valid,
        },
        curvature: RealField::from_raw(grid, curv, Boundary::Open),
        from_log,
    }
}

/// `y = d ln ρ/dx`; see [`log_derivatives`] for the stencil choice.
pub fn log_derivative(rho: &Density) -> LogSlopeField {
    log_derivatives(rho).slope
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(a: f64, b: f64, n: usize) -> Grid1D {
        Grid1D::new(a, b, n).unwrap()
    }

    fn gaussian_density(g: Grid1D) -> Density {
        normalize(&RealField::from_fn(g, |x| (-x * x).exp() / PI.sqrt()).unwrap()).unwrap()
    }

    fn box_density(g: Grid1D) -> Density {
        crate::analytic::AnalyticSystem::unit_box()
            .density(&g)
            .unwrap()
    }

    #[test]
    fn normalize_box_matches_table_density() {
        let g = grid(-0.5, 0.5, 1001);
        let f = RealField::from_fn(g, |x| (PI * x).cos().powi(2)).unwrap();
        assert_abs_diff_eq!(integrate(&f), 0.5, epsilon = 1e-9);
        let rho = normalize(&f).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(
                rho.values()[i],
                2.0 * (PI * x).cos().powi(2),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn normalize_is_idempotent_and_rejects_negatives() {
        let rho = gaussian_density(grid(-8.0, 8.0, 801));
        let again = normalize(rho.field()).unwrap();
        assert_eq!(again.values(), rho.values());

        let g = grid(0.0, 1.0, 5);
        let bad = RealField::new(g, vec![1.0, 1.0, -1e-3, 1.0, 1.0]).unwrap();
        assert!(matches!(normalize(&bad), Err(Error::NotNormalizable(_))));
        assert!(matches!(
            normalize(&RealField::zeros(g)),
            Err(Error::NotNormalizable(_))
        ));
    }

    #[test]
    fn density_from_wavefunction_examples() {
        let g = grid(-0.5, 0.5, 2001);
        let psi = Wavefunction::normalized(
            RealField::from_fn(g, |x| 2f64.sqrt() * (PI * x).cos()).unwrap(),
        )
        .unwrap();
        let rho = density_from_wavefunction(&psi).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(
                rho.values()[i],
                2.0 * (PI * x).cos().powi(2),
                epsilon = 1e-6
            );
        }
        assert_abs_diff_eq!(integrate(rho.field()), 1.0, epsilon = 1e-12);

        // oscillator, ħ = m = ω = 1
        let g = grid(-10.0, 10.0, 2001);
        let psi = Wavefunction::new(
            RealField::from_fn(g, |x| PI.powf(-0.25) * (-x * x / 2.0).exp()).unwrap(),
        )
        .unwrap();
        let rho = density_from_wavefunction(&psi).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(rho.values()[i], (-x * x).exp() / PI.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn density_power_oscillator_n1() {
        // Oracle: ∫exp(-2x²) = √(π/2), so c·exp(-x²) with c = (2/π)^{1/4}.
        let g = grid(-10.0, 10.0, 2001);
        let psi = wavefunction_from_density_power(&gaussian_density(g), 1.0).unwrap();
        let c = (2.0 / PI).powf(0.25);
        for (i, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(psi.values()[i], c * (-x * x).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn density_power_box_n2() {
        // ψ_2 ∝ ρ² = 4cos⁴; ∫ρ⁴ = 16∫cos⁸ = 16·35/128 over a unit box.
        let g = grid(-0.5, 0.5, 4001);
        let rho = box_density(g);
        let psi = wavefunction_from_density_power(&rho, 2.0).unwrap();
        let c2 = (16.0 * 35.0 / 128.0_f64).sqrt().recip();
        for (i, x) in g.nodes().enumerate() {
            assert_abs_diff_eq!(
                psi.values()[i],
                c2 * 4.0 * (PI * x).cos().powi(4),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn density_power_half_is_sqrt() {
        let rho = gaussian_density(grid(-8.0, 8.0, 1601));
        let psi = wavefunction_from_density_power(&rho, 0.5).unwrap();
        let back = density_from_wavefunction(&psi).unwrap();
        for (a, b) in back.values().iter().zip(rho.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert!(matches!(
            wavefunction_from_density_power(&rho, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn log_derivative_oscillator() {
        let g = grid(-10.0, 10.0, 4001);
        let y = log_derivative(&gaussian_density(g));
        for i in 0..g.len() {
            assert!(y.valid[i]);
            assert_abs_diff_eq!(y.values()[i], -2.0 * g.x(i), epsilon = 1e-9);
        }
    }

    #[test]
    fn log_derivative_uniform_and_delta() {
        let g = grid(-2.0, 2.0, 401);
        let uni = normalize(&RealField::from_fn(g, |_| 1.0).unwrap()).unwrap();
        assert!(log_derivative(&uni)
            .values()
            .iter()
            .all(|v| v.abs() < 1e-12));

        // ρ = exp(-2|x|) for ħ = m = g = 1
        let g = grid(-15.0, 15.0, 3001);
        let rho = normalize(&RealField::from_fn(g, |x| (-2.0 * x.abs()).exp()).unwrap()).unwrap();
        let y = log_derivative(&rho);
        let origin = g.nearest_index(0.0).unwrap();
        assert_eq!(y.values()[origin], 0.0);
        for (i, x) in g.nodes().enumerate().filter(|&(i, _)| i != origin) {
            assert_abs_diff_eq!(y.values()[i], -2.0 * x.signum(), epsilon = 1e-9);
        }
    }

    #[test]
    fn log_derivative_box_uses_amplitude_near_walls() {
        // Exact: y = -2π tan(πx). The √ρ stencil gives a uniform relative
        // error sin(πh)/(πh) − 1 ≈ −(πh)²/6.
        let g = grid(-0.5, 0.5, 4001);
        let rho = box_density(g);
        let y = log_derivative(&rho);
        assert!(!y.valid[0] && !y.valid[g.len() - 1]);
        let h = g.spacing();
        let bound = 1.01 * (PI * h).powi(2) / 6.0;
        for i in 1..g.len() - 1 {
            let exact = -2.0 * PI * (PI * g.x(i)).tan();
            if exact.abs() > 1e-8 {
                let rel = (y.values()[i] - exact).abs() / exact.abs();
                assert!(rel <= bound, "node {i}: rel {rel:e} > {bound:e}");
            }
        }
    }

    proptest! {
        #[test]
        fn normalize_idempotent(amps in proptest::collection::vec(0.1..2.0f64, 3),
                                centers in proptest::collection::vec(-2.0..2.0f64, 3)) {
            let g = grid(-6.0, 6.0, 301);
            let f = RealField::from_fn(g, |x| {
                amps.iter().zip(&centers).map(|(a, c)| a * (-(x - c).powi(2)).exp()).sum()
            }).unwrap();
            let once = normalize(&f).unwrap();
            let twice = normalize(once.field()).unwrap();
            prop_assert_eq!(once.values(), twice.values());
            prop_assert!((integrate(once.field()) - 1.0).abs() < 1e-10);
        }
    }
}

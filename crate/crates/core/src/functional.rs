//! Energy functionals of the density, the effective potential of the
//! nonlinear eigenproblem, and the Euler-equation residual.

use crate::density::{log_derivatives, Density};
use crate::error::{Error, Result};
use crate::grid::{
    derivative, dilate_mask, integrate, second_derivative, Grid1D, MaskedField, RealField,
};

/// `ħ` and `m`. Natural units (`ħ = m = 1`) by default.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite() && mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "hbar and mass must be positive, got hbar = {hbar}, mass = {mass}"
            )));
        }
        Ok(Self { hbar, mass })
    }

    /// `ħ²/2m`, the coefficient of `−d²/dx²` in the Hamiltonian.
    pub fn kinetic_coefficient(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

/// Point interaction `strength · δ(x − location)`; attractive wells have
/// negative strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaTerm {
    pub location: f64,
    pub strength: f64,
}

/// External potential sampled on a grid, plus hard-wall flags and symbolic
/// delta terms.
///
/// Wall nodes carry a zero sample and are removed from the eigenproblem.
/// Masked nodes keep a usable sample but are skipped by pointwise checks
/// (singular or extrapolated values).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    field: RealField,
    walls: Vec<bool>,
    deltas: Vec<DeltaTerm>,
    masked: Vec<bool>,
}

impl Potential {
    pub fn new(field: RealField) -> Self {
        let n = field.len();
        Self {
            field,
            walls: vec![false; n],
            deltas: Vec::new(),
            masked: vec![false; n],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(Self::new(RealField::from_fn(grid, f)?))
    }

    pub fn zero(grid: Grid1D) -> Self {
        Self::new(RealField::zeros(grid))
    }

    /// Flags hard-wall nodes; their samples are set to zero.
    pub fn with_walls(mut self, walls: Vec<bool>) -> Result<Self> {
        if walls.len() != self.field.len() {
            return Err(Error::LengthMismatch {
                expected: self.field.len(),
                actual: walls.len(),
            });
        }
        let values = self
            .field
            .values()
            .iter()
            .zip(&walls)
            .map(|(&v, &w)| if w { 0.0 } else { v })
            .collect();
        self.field = RealField::from_raw(*self.field.grid(), values, self.field.boundary());
        self.walls = walls;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: DeltaTerm) -> Result<Self> {
        if !(delta.strength.is_finite() && self.field.grid().contains(delta.location)) {
            return Err(Error::DomainMismatch(format!(
                "delta term at x = {} lies outside the grid",
                delta.location
            )));
        }
        self.deltas.push(delta);
        Ok(self)
    }

    pub fn with_mask(mut self, masked: Vec<bool>) -> Result<Self> {
        if masked.len() != self.field.len() {
            return Err(Error::LengthMismatch {
                expected: self.field.len(),
                actual: masked.len(),
            });
        }
        self.masked = masked;
        Ok(self)
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

    pub fn walls(&self) -> &[bool] {
        &self.walls
    }

    pub fn is_wall(&self, i: usize) -> bool {
        self.walls[i]
    }

    pub fn has_walls(&self) -> bool {
        self.walls.iter().any(|&w| w)
    }

    pub fn deltas(&self) -> &[DeltaTerm] {
        &self.deltas
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    /// Nodes usable for pointwise comparisons: neither wall nor masked.
    pub fn checkable(&self) -> Vec<bool> {
        self.walls
            .iter()
            .zip(&self.masked)
            .map(|(&w, &m)| !(w || m))
            .collect()
    }

    /// Nodes nearest to each delta location.
    pub fn delta_nodes(&self) -> Vec<usize> {
        let grid = self.grid();
        self.deltas
            .iter()
            .filter_map(|d| grid.nearest_index(d.location))
            .collect()
    }

    /// `a·self + b·extra` on the sampled part; delta strengths scale by `a`.
    /// Nodes invalid in `extra` become masked.
    pub fn affine(&self, a: f64, extra: &MaskedField, b: f64) -> Result<Self> {
        if extra.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values()
            .iter()
            .zip(extra.values())
            .zip(&self.walls)
            .map(|((&v, &e), &w)| if w { 0.0 } else { a * v + b * e })
            .collect();
        let masked = self
            .masked
            .iter()
            .zip(&extra.valid)
            .map(|(&m, &ok)| m || !ok)
            .collect();
        Ok(Self {
            field: RealField::from_raw(*self.grid(), values, self.field.boundary()),
            walls: self.walls.clone(),
            deltas: self.scaled_deltas(a),
            masked,
        })
    }

    /// `a·self`, delta strengths included.
    pub fn scaled(&self, a: f64) -> Self {
        let values = self.values().iter().map(|v| a * v).collect();
        Self {
            field: RealField::from_raw(*self.grid(), values, self.field.boundary()),
            walls: self.walls.clone(),
            deltas: self.scaled_deltas(a),
            masked: self.masked.clone(),
        }
    }

    fn scaled_deltas(&self, a: f64) -> Vec<DeltaTerm> {
        self.deltas
            .iter()
            .map(|d| DeltaTerm {
                location: d.location,
                strength: a * d.strength,
            })
            .collect()
    }
}

/// `T[ρ] = (ħ²/8m)∫(ρ'/ρ)²ρ`, evaluated as `(ħ²/2m)∫(φ')²` with `φ = √ρ`.
pub fn kinetic_energy(rho: &Density, c: PhysicalConstants) -> f64 {
    let dphi = derivative(&rho.amplitude());
    let sq = RealField::from_raw(
        *rho.grid(),
        dphi.values().iter().map(|d| d * d).collect(),
        dphi.boundary(),
    );
    c.kinetic_coefficient() * integrate(&sq)
}

/// `∫φ(−ħ²/2m)φ''` with the three-point stencil. This is exactly the kinetic
/// part of the Rayleigh quotient of the discrete Hamiltonian.
pub fn kinetic_energy_laplacian_form(rho: &Density, c: PhysicalConstants) -> f64 {
    let phi = rho.amplitude();
    let d2 = second_derivative(&phi);
    let prod = RealField::from_raw(
        *rho.grid(),
        phi.values()
            .iter()
            .zip(d2.values())
            .map(|(p, q)| p * q)
            .collect(),
        phi.boundary(),
    );
    -c.kinetic_coefficient() * integrate(&prod)
}

/// `∫φ(−ħ²/2m)φ''` with the five-point stencil, accurate to `O(h⁴)` for
/// smooth densities. Past the grid ends, and past any node where `φ` is
/// exactly zero (a wall), `φ` is continued by odd reflection, which is how a
/// Dirichlet solution extends smoothly.
pub fn kinetic_energy_fourth_order(rho: &Density, c: PhysicalConstants) -> f64 {
    let phi = rho.amplitude();
    let p = phi.values();
    let n = p.len() as isize;
    let at = |k: isize| -> f64 {
        if k < 0 {
            -p[(-k) as usize]
        } else if k >= n {
            -p[(2 * (n - 1) - k) as usize]
        } else {
            p[k as usize]
        }
    };
    let h = rho.grid().spacing();
    let sum: f64 = (0..n)
        .filter(|&i| p[i as usize] != 0.0)
        .map(|i| {
            let (l1, r1) = (at(i - 1), at(i + 1));
            let l2 = if l1 == 0.0 { -p[i as usize] } else { at(i - 2) };
            let r2 = if r1 == 0.0 { -p[i as usize] } else { at(i + 2) };
            let lap = -l2 + 16.0 * l1 - 30.0 * p[i as usize] + 16.0 * r1 - r2;
            p[i as usize] * lap
        })
        .sum();
    -c.kinetic_coefficient() * sum / (12.0 * h)
}

/// `∫ρV + Σ strength·ρ(location)`. Infinite if `ρ` is nonzero on a wall node.
pub fn potential_energy(rho: &Density, v: &Potential) -> Result<f64> {
    if rho.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    if rho
        .values()
        .iter()
        .zip(v.walls())
        .any(|(&r, &w)| w && r > 0.0)
    {
        return Ok(f64::INFINITY);
    }
    let sampled = integrate(&rho.field().zip_map(v.field(), |r, p| r * p)?);
    let point: f64 = v
        .deltas()
        .iter()
        .map(|d| d.strength * rho.at(d.location).unwrap_or(0.0))
        .sum();
    Ok(sampled + point)
}

/// `E[ρ] = T[ρ] + ∫ρV`, with `T` in gradient form.
pub fn total_energy(rho: &Density, v: &Potential, c: PhysicalConstants) -> Result<f64> {
    Ok(kinetic_energy(rho, c) + potential_energy(rho, v)?)
}

/// `f = (ħ²/4m)y²` with its validity mask: nodes within three nodes of a
/// zero-density node are flagged but keep their computed values.
pub(crate) fn raw_cusp(rho: &Density, c: PhysicalConstants) -> MaskedField {
    let y = log_derivatives(rho).slope;
    let k = 0.5 * c.kinetic_coefficient();
    let values = y.values().iter().map(|v| k * v * v).collect();
    MaskedField {
        field: RealField::from_raw(*rho.grid(), values, rho.field().boundary()),
        valid: dilate_mask(&y.valid, 3),
    }
}

/// Cusp term ready to be added to a potential.
///
/// At each delta node the log-slope is replaced by its one-sided limits
/// (averaging their squares); that node is masked. Nodes below the density
/// floor that are not walls take the nearest finite value.
pub(crate) fn filled_cusp(rho: &Density, v: &Potential, c: PhysicalConstants) -> MaskedField {
    let mut cusp = raw_cusp(rho, c);
    let grid = *rho.grid();
    let n = grid.len();
    let h = grid.spacing();
    let r = rho.values();
    let floor = rho.floor();
    let k = 0.5 * c.kinetic_coefficient();
    let mut values = cusp.field.values().to_vec();

    for i in v.delta_nodes() {
        cusp.valid[i] = false;
        if i == 0
            || i + 1 == n
            || [r[i - 1], r[i], r[i + 1]]
                .iter()
                .any(|&x| x < floor || x <= 0.0)
        {
            continue;
        }
        let left = (r[i].ln() - r[i - 1].ln()) / h;
        let right = (r[i + 1].ln() - r[i].ln()) / h;
        values[i] = k * 0.5 * (left * left + right * right);
    }

    let below: Vec<bool> = (0..n)
        .map(|i| !v.is_wall(i) && (r[i] < floor || r[i] <= 0.0))
        .collect();
    if below.iter().any(|&b| b) {
        let source: Vec<Option<usize>> = nearest_sources(&below);
        for i in 0..n {
            if below[i] {
                if let Some(j) = source[i] {
                    values[i] = values[j];
                }
            }
        }
    }
    cusp.field = RealField::from_raw(grid, values, cusp.field.boundary());
    cusp
}

/// For each flagged node, the nearest unflagged node.
fn nearest_sources(flagged: &[bool]) -> Vec<Option<usize>> {
    let n = flagged.len();
    let mut left = vec![None; n];
    let mut last = None;
    for i in 0..n {
        if !flagged[i] {
            last = Some(i);
        }
        left[i] = last;
    }
    let mut out = vec![None; n];
    let mut next = None;
    for i in (0..n).rev() {
        if !flagged[i] {
            next = Some(i);
        }
        out[i] = match (left[i], next) {
            (Some(a), Some(b)) => Some(if i - a <= b - i { a } else { b }),
            (a, b) => a.or(b),
        };
    }
    out
}

/// `V_eff = 2V + (ħ²/4m)(ρ'/ρ)²`; walls are kept, delta strengths doubled.
pub fn effective_potential(
    rho: &Density,
    v: &Potential,
    c: PhysicalConstants,
) -> Result<Potential> {
    if rho.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let f = filled_cusp(rho, v, c);
    v.affine(2.0, &f, 1.0)
}

/// Left side of the Euler equation minus `λ`:
/// `−(ħ²/8m)(2(ln ρ)'' + ((ln ρ)')²) + V − λ`.
///
/// Walls, nodes adjacent to sub-floor densities, and nodes within one of a
/// delta location are masked.
pub fn euler_residual(
    rho: &Density,
    v: &Potential,
    lambda: f64,
    c: PhysicalConstants,
) -> Result<MaskedField> {
    if rho.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let d = log_derivatives(rho);
    let k = c.kinetic_coefficient() / 4.0;
    let values: Vec<f64> = (0..rho.grid().len())
        .map(|i| {
            if d.slope.valid[i] && !v.is_wall(i) {
                let y = d.slope.values()[i];
                -k * (2.0 * d.curvature.values()[i] + y * y) + v.values()[i] - lambda
            } else {
                0.0
            }
        })
        .collect();
    let mut valid: Vec<bool> = d
        .slope
        .valid
        .iter()
        .zip(v.walls())
        .map(|(&ok, &w)| ok && !w)
        .collect();
    valid = dilate_mask(&valid, 1);
    mask_near(&mut valid, &v.delta_nodes(), 1);
    Ok(MaskedField {
        field: RealField::from_raw(*rho.grid(), values, rho.field().boundary()),
        valid,
    })
}

pub(crate) fn mask_near(valid: &mut [bool], nodes: &[usize], radius: usize) {
    let n = valid.len();
    for &i in nodes {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        valid[lo..=hi].iter_mut().for_each(|v| *v = false);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::normalize;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn oscillator(n: usize) -> (Density, Potential) {
        let g = Grid1D::new(-10.0, 10.0, n).unwrap();
        let rho = normalize(&RealField::from_fn(g, |x| (-x * x).exp()).unwrap()).unwrap();
        (rho, Potential::from_fn(g, |x| 0.5 * x * x).unwrap())
    }

    fn unit_box(n: usize) -> (Density, Potential) {
        let s = crate::analytic::AnalyticSystem::unit_box();
        let g = s.default_grid(Some(n)).unwrap();
        (s.density(&g).unwrap(), s.potential(&g).unwrap())
    }

    fn delta(n: usize) -> (Density, Potential) {
        let g = Grid1D::new(-15.0, 15.0, n).unwrap();
        let rho = normalize(&RealField::from_fn(g, |x| (-2.0 * x.abs()).exp()).unwrap()).unwrap();
        let v = Potential::zero(g)
            .with_delta(DeltaTerm {
                location: 0.0,
                strength: -1.0,
            })
            .unwrap();
        (rho, v)
    }

    #[test]
    fn kinetic_examples() {
        let c = PhysicalConstants::default();
        let (rho, _) = oscillator(4001);
        assert_abs_diff_eq!(kinetic_energy(&rho, c), 0.25, epsilon = 1e-5);
        assert_abs_diff_eq!(kinetic_energy_laplacian_form(&rho, c), 0.25, epsilon = 1e-4);

        let (rho, _) = unit_box(4001);
        assert_abs_diff_eq!(
            kinetic_energy(&rho, c),
            PI * PI / 2.0,
            epsilon = 1e-4 * PI * PI
        );

        let g = Grid1D::new(0.0, 1.0, 101).unwrap();
        let flat = normalize(&RealField::from_fn(g, |_| 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(kinetic_energy(&flat, c), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            kinetic_energy_laplacian_form(&flat, c),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn fourth_order_kinetic() {
        let c = PhysicalConstants::default();
        let (rho, _) = oscillator(2001);
        let coarse = (kinetic_energy_fourth_order(&rho, c) - 0.25).abs();
        assert!(coarse < 1e-9, "{coarse}");

        // Odd reflection continues the box's sine exactly, so only the
        // stencil's O(h⁴) error remains; it is near rounding already.
        let (rho, _) = unit_box(1001);
        let err = (kinetic_energy_fourth_order(&rho, c) / (PI * PI / 2.0) - 1.0).abs();
        assert!(err < 1e-11, "{err}");

        // Same box inside a wider grid: the reflection is taken at the wall.
        let g = Grid1D::new(-1.0, 1.0, 2001).unwrap();
        let wide = normalize(
            &RealField::from_fn(g, |x| {
                if x.abs() < 0.5 {
                    (PI * x).cos().powi(2)
                } else {
                    0.0
                }
            })
            .unwrap(),
        )
        .unwrap();
        let err = (kinetic_energy_fourth_order(&wide, c) / (PI * PI / 2.0) - 1.0).abs();
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn laplacian_form_gaussian_width() {
        // ρ ∝ exp(−x²/2σ²): T = ħ²/(8mσ²).
        let c = PhysicalConstants::new(1.3, 0.7).unwrap();
        let sigma = 0.8;
        let g = Grid1D::new(-12.0, 12.0, 6001).unwrap();
        let rho =
            normalize(&RealField::from_fn(g, |x| (-x * x / (2.0 * sigma * sigma)).exp()).unwrap())
                .unwrap();
        let exact = c.hbar * c.hbar / (8.0 * c.mass * sigma * sigma);
        assert_abs_diff_eq!(
            kinetic_energy_laplacian_form(&rho, c),
            exact,
            epsilon = 1e-5 * exact
        );
    }

    #[test]
    fn total_energy_examples() {
        let c = PhysicalConstants::default();
        let (rho, v) = oscillator(4001);
        assert_abs_diff_eq!(total_energy(&rho, &v, c).unwrap(), 0.5, epsilon = 1e-5);

        let (rho, v) = delta(24001);
        assert_abs_diff_eq!(kinetic_energy(&rho, c), 0.5, epsilon = 5e-3);
        assert_abs_diff_eq!(potential_energy(&rho, &v).unwrap(), -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(total_energy(&rho, &v, c).unwrap(), -0.5, epsilon = 5e-3);

        let (rho, v) = unit_box(4001);
        assert_abs_diff_eq!(
            total_energy(&rho, &v, c).unwrap(),
            PI * PI / 2.0,
            epsilon = 1e-3
        );
    }

    #[test]
    fn density_on_a_wall_costs_infinite_energy() {
        let g = Grid1D::new(-0.5, 0.5, 11).unwrap();
        let rho = normalize(&RealField::from_fn(g, |_| 1.0).unwrap()).unwrap();
        let mut walls = vec![false; 11];
        walls[0] = true;
        let v = Potential::zero(g).with_walls(walls).unwrap();
        assert_eq!(potential_energy(&rho, &v).unwrap(), f64::INFINITY);
    }

    #[test]
    fn effective_potential_examples() {
        let c = PhysicalConstants::default();
        let (rho, v) = oscillator(2001);
        let veff = effective_potential(&rho, &v, c).unwrap();
        for (i, x) in rho.grid().nodes().enumerate() {
            assert_abs_diff_eq!(
                veff.values()[i],
                2.0 * x * x,
                epsilon = 1e-8 * (1.0 + x * x)
            );
        }

        let (rho, v) = delta(3001);
        let veff = effective_potential(&rho, &v, c).unwrap();
        assert_eq!(veff.deltas()[0].strength, -2.0);
        for &f in veff.values() {
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-9);
        }
        assert!(veff.masked()[rho.grid().nearest_index(0.0).unwrap()]);

        let g = Grid1D::new(-1.0, 1.0, 201).unwrap();
        let flat = normalize(&RealField::from_fn(g, |_| 1.0).unwrap()).unwrap();
        let veff = effective_potential(&flat, &Potential::zero(g), c).unwrap();
        assert!(veff.values().iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn euler_residual_examples() {
        let c = PhysicalConstants::default();
        let (rho, v) = oscillator(4001);
        let r = euler_residual(&rho, &v, 0.5, c).unwrap();
        assert!(r.interior_sup_norm(1) < 1e-4);
        let r0 = euler_residual(&rho, &v, 0.0, c).unwrap();
        for i in 1..r0.values().len() - 1 {
            assert_abs_diff_eq!(r0.values()[i], 0.5, epsilon = 1e-4);
        }

        let (rho, v) = unit_box(4001);
        let r = euler_residual(&rho, &v, PI * PI / 2.0, c).unwrap();
        assert!(!r.valid[0] && !r.valid[1]);
        assert!(r.sup_norm() < 1e-3, "{}", r.sup_norm());
    }

    #[test]
    fn euler_residual_converges_quadratically_for_box() {
        let c = PhysicalConstants::default();
        let norms: Vec<f64> = [1001, 2001]
            .iter()
            .map(|&n| {
                let (rho, v) = unit_box(n);
                euler_residual(&rho, &v, PI * PI / 2.0, c)
                    .unwrap()
                    .sup_norm()
            })
            .collect();
        assert!(norms[0] / norms[1] >= 3.5, "{norms:?}");
    }

    #[test]
    fn affine_combines_fields_and_masks() {
        let g = Grid1D::new(0.0, 1.0, 5).unwrap();
        let v = Potential::from_fn(g, |x| x)
            .unwrap()
            .with_delta(DeltaTerm {
                location: 0.5,
                strength: -1.0,
            })
            .unwrap();
        let extra = MaskedField::new(
            RealField::from_fn(g, |_| 1.0).unwrap(),
            vec![true, true, false, true, true],
        )
        .unwrap();
        let w = v.affine(2.0, &extra, 3.0).unwrap();
        assert_eq!(w.values(), &[3.0, 3.5, 4.0, 4.5, 5.0]);
        assert_eq!(w.masked(), &[false, false, true, false, false]);
        assert_eq!(w.deltas()[0].strength, -2.0);
        assert!(matches!(
            Potential::zero(g).with_delta(DeltaTerm {
                location: 2.0,
                strength: 1.0
            }),
            Err(Error::DomainMismatch(_))
        ));
    }

    #[test]
    fn nearest_sources_prefers_closest() {
        let s = nearest_sources(&[true, false, true, true, true, false]);
        assert_eq!(
            s,
            vec![Some(1), Some(1), Some(1), Some(1), Some(5), Some(5)]
        );
    }
}

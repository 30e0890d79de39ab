//! Uniform 1D grid, trapezoidal quadrature and finite-difference stencils.
//!
//! Every solver in the crate samples its fields on a [`Grid1D`]. Interior
//! derivatives use second-order central stencils; the two boundary nodes use
//! second-order one-sided stencils unless the field is flagged
//! [`Boundary::HardWall`], in which case it is taken to vanish outside the grid.

use crate::error::{Error, Result};

/// Uniform mesh on `[x_min, x_max]` with `n_points` nodes, both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "x_min = {x_min} must be below x_max = {x_max}"
            )));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {n_points}"
            )));
        }
        let spacing = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n_points,
            spacing,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    /// Always false; a grid has at least three nodes.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Coordinate of node `i`. The last node is pinned to `x_max` exactly.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Trapezoidal quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.spacing; self.n_points];
        w[0] *= 0.5;
        w[self.n_points - 1] *= 0.5;
        w
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.spacing;
        x >= self.x_min - slack && x <= self.x_max + slack
    }

    /// Index of the node closest to `x`, or `None` if `x` is off the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let t = ((x - self.x_min) / self.spacing).round();
        Some((t.max(0.0) as usize).min(self.n_points - 1))
    }
}

/// How a field behaves just outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Nothing is assumed; boundary stencils are one-sided.
    #[default]
    Open,
    /// The field vanishes outside the grid (Dirichlet / infinite wall).
    HardWall,
}

/// Real samples on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    values: Vec<f64>,
    boundary: Boundary,
}

impl RealField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            grid,
            values,
            boundary: Boundary::Open,
        })
    }

    /// Callers guarantee length and finiteness.
    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>, boundary: Boundary) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            grid,
            values,
            boundary,
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()], Boundary::Open)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map; the result keeps this field's grid and boundary flag.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        Ok(Self::new(self.grid, values)?.with_boundary(self.boundary))
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::new(self.grid, values)?.with_boundary(self.boundary))
    }

    /// Linear interpolation at `x`; `None` off the grid.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        if !self.grid.contains(x) {
            return None;
        }
        let h = self.grid.spacing();
        let t = ((x - self.grid.x_min()) / h).clamp(0.0, (self.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.len() - 2);
        let frac = t - i as f64;
        Some(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Trapezoidal integral of `f` over the whole grid.
pub fn integrate(f: &RealField) -> f64 {
    let v = f.values();
    let n = v.len();
    let inner: f64 = v[1..n - 1].iter().sum();
    f.grid().spacing() * (inner + 0.5 * (v[0] + v[n - 1]))
}

/// First derivative: central differences inside, second-order one-sided at the ends.
pub fn derivative(f: &RealField) -> RealField {
    let v = f.values();
    let n = v.len();
    let h = f.grid().spacing();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    RealField::from_raw(*f.grid(), d, f.boundary())
}

/// Second derivative with the three-point stencil.
///
/// Boundary nodes use zero padding for [`Boundary::HardWall`] fields and a
/// four-point one-sided stencil otherwise (three points on a 3-node grid).
pub fn second_derivative(f: &RealField) -> RealField {
    let v = f.values();
    let n = v.len();
    let h2 = f.grid().spacing().powi(2);
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h2;
    }
    match f.boundary() {
        Boundary::HardWall => {
            d[0] = (-2.0 * v[0] + v[1]) / h2;
            d[n - 1] = (v[n - 2] - 2.0 * v[n - 1]) / h2;
        }
        Boundary::Open if n >= 4 => {
            d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
            d[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
        }
        Boundary::Open => {
            d[0] = d[1];
            d[n - 1] = d[n - 2];
        }
    }
    RealField::from_raw(*f.grid(), d, f.boundary())
}

/// A field together with a per-node validity mask.
///
/// Masked nodes keep a finite placeholder value but are excluded from norms
/// and pointwise checks.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedField {
    pub field: RealField,
    pub valid: Vec<bool>,
}

impl MaskedField {
    pub fn new(field: RealField, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != field.len() {
            return Err(Error::LengthMismatch {
                expected: field.len(),
                actual: valid.len(),
            });
        }
        Ok(Self { field, valid })
    }

    pub fn all_valid(field: RealField) -> Self {
        let valid = vec![true; field.len()];
        Self { field, valid }
    }

    pub fn grid(&self) -> &Grid1D {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Largest |value| over valid nodes (0 if none).
    pub fn sup_norm(&self) -> f64 {
        self.interior_sup_norm(0)
    }

    /// Largest |value| over valid nodes at least `margin` nodes from either end.
    pub fn interior_sup_norm(&self, margin: usize) -> f64 {
        let n = self.field.len();
        self.values()
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|&(i, (_, &ok))| ok && i >= margin && i + margin < n)
            .fold(0.0_f64, |m, (_, (v, _))| m.max(v.abs()))
    }

    /// Sup-norm over valid nodes where `keep(i, x)` holds.
    pub fn sup_norm_where(&self, keep: impl Fn(usize, f64) -> bool) -> f64 {
        let grid = *self.grid();
        self.values()
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|&(i, (_, &ok))| ok && keep(i, grid.x(i)))
            .fold(0.0_f64, |m, (_, (v, _))| m.max(v.abs()))
    }

    /// Invalidates every node within `radius` nodes of an invalid one.
    pub fn dilate(mut self, radius: usize) -> Self {
        self.valid = dilate_mask(&self.valid, radius);
        self
    }
}

pub(crate) fn dilate_mask(valid: &[bool], radius: usize) -> Vec<bool> {
    let n = valid.len();
    let mut out = valid.to_vec();
    for (i, _) in valid.iter().enumerate().filter(|(_, &ok)| !ok) {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        out[lo..=hi].iter_mut().for_each(|v| *v = false);
    }
    out
}

//! Finite-difference Hamiltonian `−(ħ²/2m)d²/dx² + V` and its lowest eigenpair.
//!
//! The operator acts on the interior, non-wall nodes with Dirichlet
//! conditions, so it is a symmetric tridiagonal matrix. The ground state is
//! found by Sturm-count bisection followed by inverse iteration with a shift
//! strictly below the lowest eigenvalue. With that shift `H − σ` is positive
//! definite with nonpositive off-diagonals, so its inverse is elementwise
//! positive: the iterate stays positive and decaying tails keep full relative
//! accuracy.

use crate::density::Wavefunction;
use crate::error::{Error, Result};
use crate::functional::{PhysicalConstants, Potential};
use crate::grid::{Boundary, Grid1D, RealField};

const MAX_BISECTIONS: usize = 200;
const MAX_INVERSE_ITERATIONS: usize = 100;

/// Symmetric tridiagonal Hamiltonian on the active (interior, non-wall) nodes.
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    grid: Grid1D,
    /// Diagonal on every node; meaningless where `active` is false.
    diag: Vec<f64>,
    /// Potential part of the diagonal, kept apart for [`Self::energy_form`].
    onsite: Vec<f64>,
    offdiag: f64,
    active: Vec<bool>,
}

/// Assembles the Hamiltonian. Delta terms add `strength/h` to the diagonal at
/// the nearest node.
pub fn build_hamiltonian(
    v: &Potential,
    grid: &Grid1D,
    c: PhysicalConstants,
) -> Result<DiscreteHamiltonian> {
    if v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.len();
    let h = grid.spacing();
    let t = c.kinetic_coefficient() / (h * h);
    let mut onsite = v.values().to_vec();
    for (d, i) in v.deltas().iter().zip(v.delta_nodes()) {
        onsite[i] += d.strength / h;
    }
    let diag = onsite.iter().map(|&p| p + 2.0 * t).collect();
    let active = (0..n)
        .map(|i| i > 0 && i + 1 < n && !v.is_wall(i))
        .collect();
    Ok(DiscreteHamiltonian {
        grid: *grid,
        diag,
        onsite,
        offdiag: -t,
        active,
    })
}

impl DiscreteHamiltonian {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> f64 {
        self.offdiag
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Diagonal and sub-diagonal of the compressed matrix over active nodes.
    /// Couplings across an excluded node are zero.
    fn compressed(&self) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        let idx: Vec<usize> = (0..self.diag.len()).filter(|&i| self.active[i]).collect();
        let a = idx.iter().map(|&i| self.diag[i]).collect();
        let e = idx
            .windows(2)
            .map(|w| if w[1] == w[0] + 1 { self.offdiag } else { 0.0 })
            .collect();
        (idx, a, e)
    }

    /// `Hx` on active nodes; zero elsewhere.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let mut s = self.diag[i] * x[i];
            if self.active[i - 1] {
                s += self.offdiag * x[i - 1];
            }
            if self.active[i + 1] {
                s += self.offdiag * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// `xᵀHy` in difference form, `t·Σ(x_{i+1} − x_i)(y_{i+1} − y_i) + Σv_i x_i y_i`,
    /// with inactive nodes read as zero. No large terms cancel, so for
    /// smooth vectors the rounding is relative to the result rather than to
    /// `‖H‖`.
    pub fn energy_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let t = -self.offdiag;
        let n = self.diag.len();
        let at = |v: &[f64], i: usize| if self.active[i] { v[i] } else { 0.0 };
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        for i in 0..n {
            if self.active[i] {
                potential += self.onsite[i] * x[i] * y[i];
            }
            if i + 1 < n && (self.active[i] || self.active[i + 1]) {
                kinetic += (at(x, i + 1) - at(x, i)) * (at(y, i + 1) - at(y, i));
            }
        }
        t * kinetic + potential
    }

    /// Solves `(T + sI)x = b` on active nodes, with `T` the kinetic part of
    /// the operator and `s ≥ 0`; zero elsewhere.
    pub fn solve_kinetic(&self, b: &[f64], s: f64) -> Vec<f64> {
        let (idx, _, e) = self.compressed();
        let a = vec![-2.0 * self.offdiag + s; idx.len()];
        let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        let mut x = vec![0.0; b.len()];
        if idx.is_empty() {
            return x;
        }
        for (k, v) in tridiagonal_solve(&a, &e, 0.0, &rhs).into_iter().enumerate() {
            x[idx[k]] = v;
        }
        x
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let (_, a, e) = self.compressed();
        gershgorin(&a, &e)
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let (_, a, e) = self.compressed();
        sturm_count(&a, &e, sigma)
    }

    /// `xᵀHx / xᵀx` over active nodes.
    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let hx = self.apply(x);
        let num: f64 = (0..x.len())
            .filter(|&i| self.active[i])
            .map(|i| x[i] * hx[i])
            .sum();
        let den: f64 = (0..x.len())
            .filter(|&i| self.active[i])
            .map(|i| x[i] * x[i])
            .sum();
        num / den
    }
}

fn gershgorin(a: &[f64], e: &[f64]) -> (f64, f64) {
    let m = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..m {
        let r = if k > 0 { e[k - 1].abs() } else { 0.0 } + if k + 1 < m { e[k].abs() } else { 0.0 };
        lo = lo.min(a[k] - r);
        hi = hi.max(a[k] + r);
    }
    (lo, hi)
}

/// Count of negative pivots of `T − σ` (Sylvester's law of inertia).
fn sturm_count(a: &[f64], e: &[f64], sigma: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for k in 0..a.len() {
        let coupling = if k > 0 { e[k - 1] * e[k - 1] / d } else { 0.0 };
        d = a[k] - sigma - coupling;
        if d == 0.0 {
            d = -f64::EPSILON * (a[k].abs() + sigma.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves `(T − σ)x = b` for symmetric tridiagonal `T` without pivoting.
fn tridiagonal_solve(a: &[f64], e: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let m = a.len();
    let mut d = vec![0.0; m];
    let mut z = vec![0.0; m];
    d[0] = a[0] - sigma;
    z[0] = b[0];
    for k in 1..m {
        let l = e[k - 1] / d[k - 1];
        d[k] = a[k] - sigma - l * e[k - 1];
        z[k] = b[k] - l * z[k - 1];
    }
    let mut x = vec![0.0; m];
    x[m - 1] = z[m - 1] / d[m - 1];
    for k in (0..m - 1).rev() {
        x[k] = (z[k] - e[k] * x[k + 1]) / d[k];
    }
    x
}

fn normalize_max(x: &mut [f64]) {
    let s = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    x.iter_mut().for_each(|v| *v /= s);
}

/// Lowest eigenvalue and its normalized eigenvector (positive mean).
///
/// The eigenvector is zero on excluded nodes and flagged
/// [`Boundary::HardWall`].
pub fn ground_state(h: &DiscreteHamiltonian) -> Result<(f64, Wavefunction)> {
    let (idx, a, e) = h.compressed();
    if a.is_empty() {
        return Err(Error::InvalidGrid("no active nodes".into()));
    }
    let (mut lo, mut hi) = gershgorin(&a, &e);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 1e-13 * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(&a, &e, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sigma = lo - (hi - lo).max(1e-15 * scale);

    let mut x = vec![1.0; a.len()];
    let mut converged = false;
    for _ in 0..MAX_INVERSE_ITERATIONS {
        let mut next = tridiagonal_solve(&a, &e, sigma, &x);
        normalize_max(&mut next);
        let change = next
            .iter()
            .zip(&x)
            .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        x = next;
        if change <= 1e-14 {
            converged = true;
            break;
        }
    }

    let n = h.grid.len();
    let mut full = vec![0.0; n];
    for (k, &i) in idx.iter().enumerate() {
        full[i] = x[k];
    }
    let energy = h.rayleigh_quotient(&full);
    let hx = h.apply(&full);
    let residual = idx
        .iter()
        .fold(0.0_f64, |m, &i| m.max((hx[i] - energy * full[i]).abs()));
    if !converged && residual > 1e-8 * scale {
        return Err(Error::NoConvergence {
            what: "inverse iteration",
            iterations: MAX_INVERSE_ITERATIONS,
        });
    }
    if full.iter().sum::<f64>() < 0.0 {
        full.iter_mut().for_each(|v| *v = -*v);
    }
    let psi =
        Wavefunction::normalized(RealField::new(h.grid, full)?.with_boundary(Boundary::HardWall))?;
    Ok((energy, psi))
}

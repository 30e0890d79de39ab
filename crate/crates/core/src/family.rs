//! Potentials `V_n = 2nV + n(2n−1)f` whose ground states are `ψ_n ∝ ρ₀ⁿ`
//! with energies `E_n = 2nE₀`, where `f = (ħ²/4m)(ρ₀'/ρ₀)²`.
//!
//! The doubling recursion `z_{j+1} = 2z_j + (2^{j+1})²f` and its solution
//! `V_n = nV_1 + 2n(n−1)f` are only claimed for `n = 2^j`;
//! [`family_potential`] itself accepts any `n > 0`.

use serde::Serialize;

use crate::density::{log_derivatives, wavefunction_from_density_power, Density};
use crate::eigen::{build_hamiltonian, ground_state};
use crate::error::{Error, Result};
use crate::functional::{filled_cusp, mask_near, raw_cusp, PhysicalConstants, Potential};
use crate::grid::{dilate_mask, MaskedField, RealField};

/// Family index `n > 0`, flagged when it is a power of two `2^j`, `j ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyIndex {
    n: f64,
    sanctioned: bool,
}

impl FamilyIndex {
    pub fn new(n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "family index must be positive, got {n}"
            )));
        }
        let sanctioned = n >= 1.0 && n.log2().fract() == 0.0;
        Ok(Self { n, sanctioned })
    }

    /// `n = 2^j`.
    pub fn power_of_two(j: u32) -> Self {
        Self {
            n: f64::from(2u32.pow(j)),
            sanctioned: true,
        }
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn is_sanctioned(&self) -> bool {
        self.sanctioned
    }

    /// `j` with `n = 2^j`, when sanctioned.
    pub fn exponent(&self) -> Option<u32> {
        self.sanctioned.then(|| self.n.log2() as u32)
    }
}

/// `f = (ħ²/4m)y²` with a validity mask.
pub type CuspTerm = MaskedField;

/// `f = (ħ²/4m)(ρ'/ρ)²`. Nodes within three nodes of a sub-floor density are
/// masked but keep their computed values.
pub fn cusp_term(rho: &Density, c: PhysicalConstants) -> CuspTerm {
    raw_cusp(rho, c)
}

/// `V_n = 2nV + n(2n−1)f`; delta strengths scale by `2n`.
///
/// Delta nodes take the cusp term from one-sided limits of `ln ρ` and are
/// masked; sub-floor nodes off the walls reuse the nearest finite value.
pub fn family_potential(
    n: FamilyIndex,
    rho: &Density,
    v: &Potential,
    c: PhysicalConstants,
) -> Result<Potential> {
    if rho.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let n = n.n();
    v.affine(2.0 * n, &filled_cusp(rho, v, c), n * (2.0 * n - 1.0))
}

/// `E_n = 2nE₀`.
pub fn family_energy(n: FamilyIndex, e0: f64) -> f64 {
    2.0 * n.n() * e0
}

/// `z_{j+1} = 2z_j + (2^{j+1})²f`.
pub fn family_recursion_step(vj: &Potential, j: u32, f: &CuspTerm) -> Result<Potential> {
    let k = f64::from(2u32.pow(j + 1));
    vj.affine(2.0, f, k * k)
}

/// `V_n = nV_1 + 2n(n−1)f`, valid for `n = 2^j` only.
pub fn family_closed_form_from_v1(
    n: FamilyIndex,
    v1: &Potential,
    f: &CuspTerm,
) -> Result<Potential> {
    if !n.is_sanctioned() {
        return Err(Error::UnsanctionedIndex(n.n()));
    }
    let n = n.n();
    v1.affine(n, f, 2.0 * n * (n - 1.0))
}

/// Pass criteria for [`verify_family_member`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationTolerances {
    /// Bound on `|E_num − 2nE₀| / |2nE₀|`.
    pub rel_energy: f64,
    /// Lower bound on `|⟨ψ_num, c_nρ₀ⁿ⟩|`.
    pub overlap: f64,
}

impl Default for VerificationTolerances {
    fn default() -> Self {
        Self {
            rel_energy: 5e-3,
            overlap: 0.999,
        }
    }
}

/// Flat record of one family-member check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub n: f64,
    #[serde(rename = "E_expected")]
    pub e_expected: f64,
    #[serde(rename = "E_num")]
    pub e_num: f64,
    pub rel_err: f64,
    pub overlap: f64,
    pub pass: bool,
}

/// Builds `V_n` from `(ρ₀, V)` and checks its ground state against
/// `2nE₀` and `c_nρ₀ⁿ`.
pub fn verify_family_member(
    n: FamilyIndex,
    rho: &Density,
    v: &Potential,
    e0: f64,
    c: PhysicalConstants,
    tol: VerificationTolerances,
) -> Result<VerificationReport> {
    let vn = family_potential(n, rho, v, c)?;
    verify_potential(n, &vn, rho, e0, c, tol)
}

/// Eigensolves a given `V_n` and compares with `2nE₀` and `c_nρ₀ⁿ`.
pub fn verify_potential(
    n: FamilyIndex,
    vn: &Potential,
    rho: &Density,
    e0: f64,
    c: PhysicalConstants,
    tol: VerificationTolerances,
) -> Result<VerificationReport> {
    let h = build_hamiltonian(vn, rho.grid(), c)?;
    let (e_num, psi) = ground_state(&h)?;
    let target = wavefunction_from_density_power(rho, n.n())?;
    let overlap = psi.overlap(&target)?;
    let e_expected = family_energy(n, e0);
    let rel_err = (e_num - e_expected).abs() / e_expected.abs();
    Ok(VerificationReport {
        n: n.n(),
        e_expected,
        e_num,
        rel_err,
        overlap,
        pass: rel_err < tol.rel_energy && overlap > tol.overlap,
    })
}

/// Largest pointwise discrepancy `|a − b| / max(|b|, scale)` over nodes
/// checkable in both potentials, together with the relative mismatch of the
/// delta strengths. `scale` keeps nodes where `b` vanishes from dividing by
/// zero; an energy unit of the system is the natural choice.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn potential_agreement(a: &Potential, b: &Potential, scale: f64) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    if a.deltas().len() != b.deltas().len() {
        return Ok(f64::INFINITY);
    }
    let ok_a = a.checkable();
    let ok_b = b.checkable();
    let nodes = (0..a.grid().len())
        .filter(|&i| ok_a[i] && ok_b[i])
        .map(|i| (a.values()[i] - b.values()[i]).abs() / b.values()[i].abs().max(scale));
    let deltas = a.deltas().iter().zip(b.deltas()).map(|(p, q)| {
        if (p.location - q.location).abs() > 1e-12 * a.grid().spacing() {
            f64::INFINITY
        } else {
            (p.strength - q.strength).abs() / q.strength.abs().max(f64::MIN_POSITIVE)
        }
    });
    Ok(nodes.chain(deltas).fold(0.0, f64::max))
}

/// `(LHS₂ − E_n) − 2n(LHS₁ − E₀)` where `LHS₁ = −(ħ²/4m)(ln ρ)'' − f/2 + V`
/// is the Euler operator of `ρ₀` and `LHS₂ = −(ħ²/4m)·2n(ln ρ)'' − 2n²f + V_n`
/// that of `ρ₀^{2n}`. Vanishes wherever `V_n` matches the family formula.
pub fn family_shift_residual(
    n: FamilyIndex,
    rho: &Density,
    v: &Potential,
    vn: &Potential,
    e0: f64,
    c: PhysicalConstants,
) -> Result<MaskedField> {
    if rho.grid() != v.grid() || rho.grid() != vn.grid() {
        return Err(Error::GridMismatch);
    }
    let d = log_derivatives(rho);
    let k = c.kinetic_coefficient() / 2.0;
    let nn = n.n();
    let en = family_energy(n, e0);
    let v_ok = v.checkable();
    let vn_ok = vn.checkable();
    let mut valid: Vec<bool> = (0..d.slope.valid.len())
        .map(|i| d.slope.valid[i] && v_ok[i] && vn_ok[i])
        .collect();
    valid = dilate_mask(&valid, 1);
    mask_near(&mut valid, &v.delta_nodes(), 1);
    let values = (0..valid.len())
        .map(|i| {
            if !valid[i] {
                return 0.0;
            }
            let curv = d.curvature.values()[i];
            let y = d.slope.values()[i];
            let f = k * y * y;
            let lhs1 = -k * curv - 0.5 * f + v.values()[i];
            let lhs2 = -k * 2.0 * nn * curv - 2.0 * nn * nn * f + vn.values()[i];
            (lhs2 - en) - 2.0 * nn * (lhs1 - e0)
        })
        .collect();
    MaskedField::new(RealField::new(*rho.grid(), values)?, valid)
}

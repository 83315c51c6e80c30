//! Operator-level residuals of the mode decomposition and their scaling in
//! the semiclassical parameter.

use num_complex::Complex64;

use super::assemble::{build_a_exact, d0_operator, eigenframe_operator};
use super::packet::gaussian_packet;
use super::{Grid, MomentumMap, QuantizeError};
use crate::linalg::{self, CMat};
use crate::normal_form::{tau_r, unitarity_correction};
use crate::profile::Profile;
use crate::symbols::PhasePoint;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// First-order residuals per `eps`, with fitted log-log slopes.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub eps_list: Vec<f64>,
    /// Off-diagonal-block norm of `U^H A U - Op(D0)`.
    pub r_diag: Vec<f64>,
    /// Norm of `U^H U - I`.
    pub r_unit: Vec<f64>,
    pub slope_diag: f64,
    pub slope_unit: f64,
}

/// Second-order residual after the unitarity correction.
#[derive(Clone, Debug)]
pub struct CorrectedReport {
    pub eps_list: Vec<f64>,
    /// Norm of `(U + eps V0)^H (U + eps V0) - I`.
    pub r2: Vec<f64>,
    pub slope: f64,
    /// Uncorrected `r_unit` for the improvement comparison.
    pub r_unit: Vec<f64>,
}

/// Everything the scaling suite measures, computed in one pass per `eps`.
#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub eps_list: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub r_unit: Vec<f64>,
    pub r2: Vec<f64>,
    pub slope_diag: f64,
    pub slope_unit: f64,
    pub slope_r2: f64,
}

fn zero_diagonal_blocks(m: &CMat, ncell: usize) -> CMat {
    let mut out = m.clone();
    for b in 0..3 {
        out.view_mut((b * ncell, b * ncell), (ncell, ncell))
            .fill(c(0.0, 0.0));
    }
    out
}

/// Compute the three residual norms on one grid.
fn residuals_at(profile: &Profile, grid: Grid) -> Result<(f64, f64, f64), QuantizeError> {
    let ncell = grid.cells();
    let dim = 3 * ncell;
    let u = eigenframe_operator(profile, grid)?;
    let a = build_a_exact(profile, grid)?;
    let d0 = d0_operator(profile, grid)?;

    let au = linalg::mul_par(&a.mat, &u.mat);
    let uau = linalg::adjoint_mul_par(&u.mat, &au);
    let r_diag = linalg::op_norm(&zero_diagonal_blocks(&(&uau - &d0.mat), ncell));

    let gram = linalg::adjoint_mul_par(&u.mat, &u.mat);
    let g = &gram - &CMat::identity(dim, dim);
    let r_unit = linalg::op_norm(&g);

    let i1 = &g / c(grid.eps, 0.0);
    let v0 = unitarity_correction(&i1, &u.mat);
    let w = &u.mat + &v0 * c(grid.eps, 0.0);
    let gram2 = linalg::adjoint_mul_par(&w, &w);
    let r2 = linalg::op_norm(&(gram2 - CMat::identity(dim, dim)));

    Ok((r_diag, r_unit, r2))
}

/// Run the residual suite over a family of grids sharing `(n, len)`.
pub fn diagonalization_scaling(
    profile: &Profile,
    n: usize,
    len: f64,
    eps_list: &[f64],
) -> Result<ScalingReport, QuantizeError> {
    assert!(
        eps_list.len() >= 3,
        "slope fits need at least three eps values"
    );
    let mut r_diag = Vec::new();
    let mut r_unit = Vec::new();
    let mut r2 = Vec::new();
    for &eps in eps_list {
        let grid = Grid::new(n, len, eps, MomentumMap::Compactified)?;
        let (d, u, w) = residuals_at(profile, grid)?;
        r_diag.push(d);
        r_unit.push(u);
        r2.push(w);
    }
    Ok(ScalingReport {
        eps_list: eps_list.to_vec(),
        slope_diag: linalg::loglog_slope(eps_list, &r_diag),
        slope_unit: linalg::loglog_slope(eps_list, &r_unit),
        slope_r2: linalg::loglog_slope(eps_list, &r2),
        r_diag,
        r_unit,
        r2,
    })
}

/// First-order residual scaling (`r_diag`, `r_unit`).
pub fn residual_diag(
    profile: &Profile,
    n: usize,
    len: f64,
    eps_list: &[f64],
) -> Result<ResidualReport, QuantizeError> {
    let s = diagonalization_scaling(profile, n, len, eps_list)?;
    Ok(ResidualReport {
        eps_list: s.eps_list,
        r_diag: s.r_diag,
        r_unit: s.r_unit,
        slope_diag: s.slope_diag,
        slope_unit: s.slope_unit,
    })
}

/// Corrected-unitarity residual scaling (`r2`).
pub fn unitarity_corrected_residual(
    profile: &Profile,
    n: usize,
    len: f64,
    eps_list: &[f64],
) -> Result<CorrectedReport, QuantizeError> {
    let s = diagonalization_scaling(profile, n, len, eps_list)?;
    Ok(CorrectedReport {
        eps_list: s.eps_list,
        r2: s.r2,
        slope: s.slope_r2,
        r_unit: s.r_unit,
    })
}

/// Wave-packet expectation of the Rossby diagonal block of the first-order
/// defect operator, to be compared with the closed-form Hamiltonian at the
/// packet center.
///
/// Builds `D1 = (U^H A U - D0)/eps - (D0 I1 + I1 D0)/2` with
/// `I1 = (U^H U - I)/eps`, takes the Rossby diagonal block and returns
/// `(<phi, D1_RR phi>, tau_R(x0, xi0))`. Uses the raw momentum map so the
/// packet's momentum content sits where the symbols are unmapped.
pub fn packet_d1_expectation(
    profile: &Profile,
    n: usize,
    len: f64,
    eps: f64,
    x0: (f64, f64),
    xi0: (f64, f64),
) -> Result<(f64, f64), QuantizeError> {
    let grid = Grid::new(n, len, eps, MomentumMap::Raw)?;
    let ncell = grid.cells();
    let dim = 3 * ncell;
    let u = eigenframe_operator(profile, grid)?;
    let a = build_a_exact(profile, grid)?;
    let d0 = d0_operator(profile, grid)?;

    let au = linalg::mul_par(&a.mat, &u.mat);
    let uau = linalg::adjoint_mul_par(&u.mat, &au);
    let delta1 = (&uau - &d0.mat) / c(eps, 0.0);
    let gram = linalg::adjoint_mul_par(&u.mat, &u.mat);
    let i1 = (gram - CMat::identity(dim, dim)) / c(eps, 0.0);
    let sym = (linalg::mul_par(&d0.mat, &i1) + linalg::mul_par(&i1, &d0.mat)) * c(0.5, 0.0);
    let d1 = delta1 - sym;
    let rr = d1.view((0, 0), (ncell, ncell)).into_owned();

    let phi = gaussian_packet(grid, x0, xi0)?;
    let av = &rr * &phi.values;
    let mut acc = c(0.0, 0.0);
    for i in 0..ncell {
        acc += phi.values[i].conj() * av[i];
    }
    let expectation = (acc * c(grid.h() * grid.h(), 0.0)).re;

    let p = PhasePoint::new(x0.0, x0.1, xi0.0, xi0.1);
    let reference = tau_r(profile, p)
        .map_err(|_| QuantizeError::InvalidGrid("degenerate reference point".into()))?;
    Ok((expectation, reference))
}

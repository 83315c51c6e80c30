//! Scalar mode Hamiltonians and the first-order block-diagonalization steps:
//! the diagonal subprincipal formula, the homological solve for the
//! off-diagonal generator, and the unitarity correction.
//!
//! The Rossby Hamiltonian has two independent routes here: a closed form and
//! the generic bracket formula evaluated on exact expression trees; they must
//! agree to rounding accuracy, which is exercised by [`verify_tau_r`].

use nalgebra::Matrix3;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::CMat;
use crate::profile::Profile;
use crate::sampler::BoxSampler;
use crate::spectral::DEFAULT_GAP_TOL;
use crate::symbols::{xi_b, PhasePoint, ScalarSymbol, SymbolError};

/// Mode labels in the fixed order used everywhere: (Rossby, +, -).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeId {
    Rossby,
    PoincarePlus,
    PoincareMinus,
}

impl ModeId {
    pub fn eigen_index(self) -> usize {
        match self {
            ModeId::Rossby => 0,
            ModeId::PoincarePlus => 1,
            ModeId::PoincareMinus => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeId::Rossby => "rossby",
            ModeId::PoincarePlus => "poincare_plus",
            ModeId::PoincareMinus => "poincare_minus",
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum NormalFormError {
    #[error("eigenvalue gap {gap:.3e} below tolerance {tol:.3e}")]
    Degenerate { gap: f64, tol: f64 },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `<xi>_b` as an expression tree.
pub fn xi_b_symbol(profile: &Profile) -> ScalarSymbol {
    (ScalarSymbol::xi1().powi(2) + ScalarSymbol::xi2().powi(2) + profile.b_sym().powi(2)).sqrt()
}

/// Poincare Hamiltonians `tau_pm = +/- <xi>_b` as trees.
pub fn tau_pm_symbol(profile: &Profile, positive: bool) -> ScalarSymbol {
    let r = xi_b_symbol(profile);
    if positive {
        r
    } else {
        ScalarSymbol::real(-1.0) * r
    }
}

/// Rossby Hamiltonian `tau_R = xi1 b' / <xi>_b^2 + u . xi` as a tree.
pub fn tau_r_symbol(profile: &Profile) -> ScalarSymbol {
    let r2 = ScalarSymbol::xi1().powi(2) + ScalarSymbol::xi2().powi(2) + profile.b_sym().powi(2);
    ScalarSymbol::xi1() * profile.bp_sym() / r2
        + profile.u1_sym() * ScalarSymbol::xi1()
        + profile.u2_sym() * ScalarSymbol::xi2()
}

/// `tau_pm` value.
pub fn tau_pm(profile: &Profile, p: PhasePoint, positive: bool) -> f64 {
    let r = xi_b(p, profile);
    if positive {
        r
    } else {
        -r
    }
}

/// `tau_R` value (closed form).
pub fn tau_r(profile: &Profile, p: PhasePoint) -> Result<f64, NormalFormError> {
    let r = xi_b(p, profile);
    if r == 0.0 {
        return Err(NormalFormError::Degenerate { gap: 0.0, tol: 0.0 });
    }
    let u = profile.u(p.x1, p.x2);
    Ok(p.xi1 * profile.bp(p.x2) / (r * r) + u[0] * p.xi1 + u[1] * p.xi2)
}

/// Principal matrix entries as trees.
pub fn a0_symbols(profile: &Profile) -> [[ScalarSymbol; 3]; 3] {
    let z = ScalarSymbol::zero;
    let ib = ScalarSymbol::i() * profile.b_sym();
    [
        [z(), ScalarSymbol::xi1(), ScalarSymbol::xi2()],
        [
            ScalarSymbol::xi1(),
            z(),
            ScalarSymbol::real(-1.0) * ib.clone(),
        ],
        [ScalarSymbol::xi2(), ib, z()],
    ]
}

/// Subprincipal matrix `(u . xi) I`; only the common scalar is returned.
pub fn a1_scalar_symbol(profile: &Profile) -> ScalarSymbol {
    profile.u1_sym() * ScalarSymbol::xi1() + profile.u2_sym() * ScalarSymbol::xi2()
}

/// Unit eigenvector column of the principal matrix for `mode`, as trees in
/// the fixed symbolic chart.
///
/// The Rossby column is `(b, i xi2, -i xi1)/<xi>_b`. The Poincare columns use
/// the chart with denominator `xi2^2 + b^2`; its cut locus is
/// `{xi2^2 + b^2 = 0}`, where evaluation fails with a domain error.
pub fn eigvec_symbols(profile: &Profile, mode: ModeId) -> [ScalarSymbol; 3] {
    let r = xi_b_symbol(profile);
    let b = profile.b_sym();
    let i = ScalarSymbol::i;
    let k1 = ScalarSymbol::xi1;
    let k2 = ScalarSymbol::xi2;
    match mode {
        ModeId::Rossby => [
            b.clone() / r.clone(),
            i() * k2() / r.clone(),
            ScalarSymbol::real(-1.0) * i() * k1() / r,
        ],
        ModeId::PoincarePlus | ModeId::PoincareMinus => {
            let sa = k2().powi(2) + b.powi(2);
            let den = r.clone() * (ScalarSymbol::real(2.0) * sa.clone()).sqrt();
            let sign = if mode == ModeId::PoincarePlus {
                1.0
            } else {
                -1.0
            };
            let s = ScalarSymbol::real(sign);
            [
                (s.clone() * r.clone() * k2() - i() * b.clone() * k1()) / den.clone(),
                (k1() * k2() - s * i() * r * b) / den.clone(),
                sa / den,
            ]
        }
    }
}

/// Diagonal first-order correction at one point, split into the two sums of
/// the generic formula.
#[derive(Clone, Debug)]
pub struct SubprincipalReport {
    pub point: PhasePoint,
    pub mode: ModeId,
    /// Bracket sums (the two Poisson-bracket terms).
    pub bracket_part: Complex64,
    /// `(U^* A1 U)_nn`, the advection term.
    pub flow_part: Complex64,
    /// `bracket_part + flow_part`.
    pub total: Complex64,
    /// The Rossby entry has an independent closed form; the Poincare entries
    /// have no closed-form reference and are validated only at the operator
    /// level.
    pub has_closed_form_oracle: bool,
}

/// Precompiled evaluator of the diagonal subprincipal entry for one mode.
///
/// Expression trees for the brackets are built once; evaluation per point is
/// then a pure tree walk, suitable for large sweeps.
pub struct SubprincipalEvaluator {
    mode: ModeId,
    gap_tol: f64,
    profile: Profile,
    bracket_tree: ScalarSymbol,
    flow_tree: ScalarSymbol,
}

/// Bracket of two trees as a tree.
fn bracket_tree(f: &ScalarSymbol, g: &ScalarSymbol) -> Result<ScalarSymbol, SymbolError> {
    use crate::symbols::Coord;
    let mut acc = ScalarSymbol::zero();
    for (xc, kc) in [(Coord::X1, Coord::Xi1), (Coord::X2, Coord::Xi2)] {
        acc = acc + f.differentiate(kc)? * g.differentiate(xc)?
            - f.differentiate(xc)? * g.differentiate(kc)?;
    }
    Ok(acc)
}

fn im_tree(w: ScalarSymbol) -> ScalarSymbol {
    // Im(w) = (w - conj w)/(2i)
    (w.clone() - w.conj()) * ScalarSymbol::constant(c(0.0, -0.5))
}

impl SubprincipalEvaluator {
    pub fn new(profile: &Profile, mode: ModeId, gap_tol: f64) -> Result<Self, NormalFormError> {
        let a0 = a0_symbols(profile);
        let u = eigvec_symbols(profile, mode);
        let half_over_i = ScalarSymbol::constant(c(0.0, -0.5));

        let mut bracket = ScalarSymbol::zero();
        for j in 0..3 {
            for k in 0..3 {
                if a0[j][k].is_zero() {
                    continue;
                }
                let w = u[j].conj() * bracket_tree(&a0[j][k], &u[k])?;
                bracket = bracket + im_tree(w);
                bracket = bracket
                    + a0[j][k].clone() * bracket_tree(&u[j].conj(), &u[k])? * half_over_i.clone();
            }
        }

        let a1 = a1_scalar_symbol(profile);
        let mut flow = ScalarSymbol::zero();
        for j in 0..3 {
            flow = flow + u[j].conj() * a1.clone() * u[j].clone();
        }

        Ok(SubprincipalEvaluator {
            mode,
            gap_tol,
            profile: profile.clone(),
            bracket_tree: bracket,
            flow_tree: flow,
        })
    }

    pub fn eval(&self, p: PhasePoint) -> Result<SubprincipalReport, NormalFormError> {
        let gap = xi_b(p, &self.profile);
        if gap < self.gap_tol {
            return Err(NormalFormError::Degenerate {
                gap,
                tol: self.gap_tol,
            });
        }
        let bracket_part = self.bracket_tree.eval(p)?;
        let flow_part = self.flow_tree.eval(p)?;
        Ok(SubprincipalReport {
            point: p,
            mode: self.mode,
            bracket_part,
            flow_part,
            total: bracket_part + flow_part,
            has_closed_form_oracle: self.mode == ModeId::Rossby,
        })
    }
}

/// One-shot diagonal subprincipal entry.
pub fn subprincipal_diagonal(
    profile: &Profile,
    p: PhasePoint,
    mode: ModeId,
) -> Result<SubprincipalReport, NormalFormError> {
    SubprincipalEvaluator::new(profile, mode, DEFAULT_GAP_TOL)?.eval(p)
}

/// Solve the homological equation for the off-diagonal generator:
/// `[diag(deltas), W0] + Delta1 = diag(D1)` entrywise, with `W0` zero on the
/// diagonal and `D1` the diagonal of `Delta1`.
pub fn homological_solve(
    deltas: &[f64],
    delta1: &CMat,
    gap_tol: f64,
) -> Result<(CMat, Vec<f64>), NormalFormError> {
    let n = deltas.len();
    assert_eq!(delta1.nrows(), n);
    assert_eq!(delta1.ncols(), n);
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            gap = gap.min((deltas[i] - deltas[j]).abs());
        }
    }
    if gap < gap_tol {
        return Err(NormalFormError::Degenerate { gap, tol: gap_tol });
    }
    let mut w0 = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w0[(i, j)] = delta1[(i, j)] / c(deltas[j] - deltas[i], 0.0);
            }
        }
    }
    let d1 = (0..n).map(|i| delta1[(i, i)].re).collect();
    Ok((w0, d1))
}

/// First unitarity correction: `V0 = -(1/2) I1 U`, so that
/// `(U + eps V0)^*(U + eps V0) = I + O(eps^2)` whenever `U^*U = I + eps I1`.
pub fn unitarity_correction(i1: &CMat, u: &CMat) -> CMat {
    crate::linalg::mul_par(i1, u) * c(-0.5, 0.0)
}

/// Max over sampled points of |generic diagonal entry - closed form| for the
/// Rossby mode.
pub fn verify_tau_r(
    profile: &Profile,
    sampler: &BoxSampler,
    n: usize,
    gap_tol: f64,
) -> Result<f64, NormalFormError> {
    let eval = SubprincipalEvaluator::new(profile, ModeId::Rossby, gap_tol)?;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut i = 0u64;
    while checked < n {
        let p = sampler.point_at(i);
        i += 1;
        if xi_b(p, profile) < gap_tol.max(1e-3) {
            continue;
        }
        let rep = eval.eval(p)?;
        let closed = tau_r(profile, p)?;
        worst = worst.max((rep.total - c(closed, 0.0)).norm());
        checked += 1;
        if i > 100 * n as u64 {
            break;
        }
    }
    Ok(worst)
}

/// Eigenvector matrix (columns R, +, -) evaluated from the symbolic chart.
pub fn eigvec_matrix_symbols(profile: &Profile) -> [[ScalarSymbol; 3]; 3] {
    let r = eigvec_symbols(profile, ModeId::Rossby);
    let p = eigvec_symbols(profile, ModeId::PoincarePlus);
    let m = eigvec_symbols(profile, ModeId::PoincareMinus);
    // entry [row][col]
    [
        [r[0].clone(), p[0].clone(), m[0].clone()],
        [r[1].clone(), p[1].clone(), m[1].clone()],
        [r[2].clone(), p[2].clone(), m[2].clone()],
    ]
}

/// Evaluate the symbolic eigenvector chart at a point (columns R, +, -).
pub fn eigvec_matrix_at(
    profile: &Profile,
    p: PhasePoint,
) -> Result<Matrix3<Complex64>, NormalFormError> {
    let syms = eigvec_matrix_symbols(profile);
    let mut m = Matrix3::zeros();
    for (i, row) in syms.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            m[(i, j)] = s.eval(p)?;
        }
    }
    Ok(m)
}

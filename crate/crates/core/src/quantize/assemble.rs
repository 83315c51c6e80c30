//! Exact assembly of the wave operator and the quantized eigenframe.

use num_complex::Complex64;

use super::weyl::{weyl_quantize_fn, weyl_quantize_matrix};
use super::{Grid, GridOperator, OperatorKind, QuantizeError};
use crate::linalg::CMat;
use crate::normal_form::{self, ModeId};
use crate::profile::{Periodicity, Profile};
use nalgebra::Matrix3;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Exact multiplication operator `diag f(x_i)`.
pub fn multiplication_operator<F>(grid: Grid, f: F) -> GridOperator
where
    F: Fn(f64, f64) -> Complex64,
{
    let n = grid.n;
    let mut mat = CMat::zeros(grid.cells(), grid.cells());
    for i1 in 0..n {
        for i2 in 0..n {
            let idx = i1 * n + i2;
            mat[(idx, idx)] = f(grid.x(i1), grid.x(i2));
        }
    }
    GridOperator {
        grid,
        components: 1,
        kind: OperatorKind::Multiplication,
        mat,
    }
}

/// Exact Fourier multiplier for a pure momentum symbol `g(xi)`, built from
/// the grid's momentum samples (diagonal in the plane-wave basis).
pub fn fourier_multiplier<G>(grid: Grid, g: G) -> GridOperator
where
    G: Fn(f64, f64) -> Complex64 + Sync,
{
    // x-independent symbol: the generic quantizer is already exact and
    // reduces to a circulant; reuse it with a constant-in-x closure.
    let mut op = weyl_quantize_fn(grid, |_x1, _x2, k1, k2| Ok(g(k1, k2))).unwrap();
    op.kind = OperatorKind::FourierMultiplier;
    op
}

fn check_profile_fits(profile: &Profile, grid: Grid) -> Result<(), QuantizeError> {
    match profile.b_periodicity() {
        Periodicity::Any => {}
        Periodicity::Period(p) => {
            let ratio = grid.len / p;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 0.5 {
                return Err(QuantizeError::ProfileBoxMismatch(format!(
                    "b has period {p}, box length {} is not a multiple",
                    grid.len
                )));
            }
        }
        Periodicity::None => {
            return Err(QuantizeError::ProfileBoxMismatch(
                "b is not periodic; this profile is ray-tracing only".into(),
            ));
        }
    }
    if profile.u_inf_norm() > 0.0 {
        let s = profile.u_support();
        if s.x1.0 < 0.0 || s.x1.1 > grid.len || s.x2.0 < 0.0 || s.x2.1 > grid.len {
            return Err(QuantizeError::ProfileBoxMismatch(format!(
                "flow support {s:?} exceeds the box [0, {}]^2",
                grid.len
            )));
        }
    }
    Ok(())
}

/// Assemble the wave operator from exact primitives: momentum multipliers in
/// the off-diagonal corner entries, multiplication by `b(x2)` in the Coriolis
/// entries, the advection term as symmetrized products
/// `eps/2 (M_{u_j} D_j + D_j M_{u_j})`, and the Hermitian part of the
/// second-order flow-gradient entries.
pub fn build_a_exact(profile: &Profile, grid: Grid) -> Result<GridOperator, QuantizeError> {
    check_profile_fits(profile, grid)?;
    let ncell = grid.cells();
    let f1 = fourier_multiplier(grid, |k1, _| c(k1, 0.0));
    let f2 = fourier_multiplier(grid, |_, k2| c(k2, 0.0));
    let bm = multiplication_operator(grid, |_, x2| c(profile.b(x2), 0.0));

    let mut mat = CMat::zeros(3 * ncell, 3 * ncell);
    let mut put = |r: usize, cc: usize, block: &CMat| {
        let mut view = mat.view_mut((r * ncell, cc * ncell), (ncell, ncell));
        view += block;
    };
    put(0, 1, &f1.mat);
    put(1, 0, &f1.mat);
    put(0, 2, &f2.mat);
    put(2, 0, &f2.mat);
    let ib = bm.mat.clone() * c(0.0, 1.0);
    put(1, 2, &(-ib.clone()));
    put(2, 1, &ib);

    if profile.u_inf_norm() > 0.0 {
        let m1 = multiplication_operator(grid, |x1, x2| c(profile.u(x1, x2)[0], 0.0));
        let m2 = multiplication_operator(grid, |x1, x2| c(profile.u(x1, x2)[1], 0.0));
        let adv = (&m1.mat * &f1.mat + &f1.mat * &m1.mat + &m2.mat * &f2.mat + &f2.mat * &m2.mat)
            * c(0.5 * grid.eps, 0.0);
        for comp in 0..3 {
            put(comp, comp, &adv);
        }
        // Hermitian part of the second-order entries i eps^2 (du): only the
        // antisymmetric combination (d2 u1 - d1 u2) survives.
        let w = multiplication_operator(grid, |x1, x2| {
            let j = profile.u_jacobian(x1, x2);
            c(j[0][1] - j[1][0], 0.0)
        });
        let e2 = w.mat * c(0.0, 0.5 * grid.eps * grid.eps);
        put(2, 1, &e2.adjoint());
        put(1, 2, &e2);
    }

    Ok(GridOperator {
        grid,
        components: 3,
        kind: OperatorKind::Assembled,
        mat,
    })
}

/// Yield the 3x3 action of a translation-invariant block operator on the
/// plane-wave triplet at integer frequency `(j1, j2)`.
pub fn mode_matrix(op: &GridOperator, j1: i64, j2: i64) -> Matrix3<Complex64> {
    assert_eq!(op.components, 3);
    let g = op.grid;
    let n = g.n;
    let ncell = g.cells();
    let norm = 1.0 / (ncell as f64).sqrt();
    let mut pw = nalgebra::DVector::zeros(ncell);
    for i1 in 0..n {
        for i2 in 0..n {
            pw[i1 * n + i2] =
                Complex64::from_polar(norm, j1 as f64 * g.x(i1) + j2 as f64 * g.x(i2));
        }
    }
    let mut out = Matrix3::zeros();
    for col in 0..3 {
        let mut v = nalgebra::DVector::zeros(3 * ncell);
        v.rows_mut(col * ncell, ncell).copy_from(&pw);
        let av = &op.mat * &v;
        for row in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..ncell {
                acc += pw[i].conj() * av[row * ncell + i];
            }
            out[(row, col)] = acc;
        }
    }
    out
}

/// Quantization of the eigenvector matrix (columns R, +, -), in the fixed
/// symbolic chart.
///
/// Gauge note: the chart freezes to a constant frame at `xi = 0`, the point
/// every periodic momentum map folds through, so the quantized frame's
/// first-order unitarity defect shrinks with the frequency zone rather than
/// staying of unit size. Profile-dependent gauge phases `exp(+/- i b(x2))`
/// on the Poincare columns would restore a zone-wide first-order defect, but
/// only by re-introducing position dependence at the fold, which destroys
/// the second-order gain of the corrected frame; the bare chart is kept so
/// the correction mechanism itself stays observable.
pub fn eigenframe_operator(profile: &Profile, grid: Grid) -> Result<GridOperator, QuantizeError> {
    check_profile_fits(profile, grid)?;
    let base = [
        normal_form::eigvec_symbols(profile, ModeId::Rossby),
        normal_form::eigvec_symbols(profile, ModeId::PoincarePlus),
        normal_form::eigvec_symbols(profile, ModeId::PoincareMinus),
    ];
    let entries = [
        [base[0][0].clone(), base[1][0].clone(), base[2][0].clone()],
        [base[0][1].clone(), base[1][1].clone(), base[2][1].clone()],
        [base[0][2].clone(), base[1][2].clone(), base[2][2].clone()],
    ];
    weyl_quantize_matrix(&entries, grid)
}

/// Quantization of the diagonal eigenvalue matrix `diag(0, r, -r)`.
pub fn d0_operator(profile: &Profile, grid: Grid) -> Result<GridOperator, QuantizeError> {
    check_profile_fits(profile, grid)?;
    let ncell = grid.cells();
    let r = normal_form::xi_b_symbol(profile);
    let rq = super::weyl::weyl_quantize_scalar(&r, grid)?;
    let mut mat = CMat::zeros(3 * ncell, 3 * ncell);
    mat.view_mut((ncell, ncell), (ncell, ncell))
        .copy_from(&rq.mat);
    let neg = rq.mat * c(-1.0, 0.0);
    mat.view_mut((2 * ncell, 2 * ncell), (ncell, ncell))
        .copy_from(&neg);
    Ok(GridOperator {
        grid,
        components: 3,
        kind: OperatorKind::Assembled,
        mat,
    })
}

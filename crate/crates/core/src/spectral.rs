//! The 3x3 wave matrices of the rotating shallow-water system and their
//! pointwise eigenstructure.
//!
//! The principal matrix couples the surface mode to the velocity modes
//! through the momenta and the Coriolis amplitude; its spectrum is
//! `{0, +r, -r}` with `r = <xi>_b`, so the eigenvalue gap equals `r` and the
//! decomposition is available wherever `r` stays above a floor.
//!
//! Mode identity is positional, not numerical: eigenvalues are reported in
//! the fixed order (Rossby, Poincare+, Poincare-).
//!
//! Gauge: each eigenvector is multiplied by the unit phase that makes its
//! component of largest modulus real and positive (ties broken by lowest
//! index). The gauge cut locus is where the largest-modulus component
//! switches index; continuity is only guaranteed along paths avoiding it.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, CMat, LinalgError};
use crate::profile::Profile;
use crate::sampler::BoxSampler;
use crate::symbols::{xi_b, PhasePoint};

pub const DEFAULT_GAP_TOL: f64 = 1e-6;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigenvalue gap {gap:.3e} below tolerance {tol:.3e} at {point:?}")]
    Degenerate {
        gap: f64,
        tol: f64,
        point: PhasePoint,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A 3x3 matrix symbol evaluated at a phase point.
#[derive(Clone, Debug)]
pub struct MatrixSymbolValue {
    pub entries: Matrix3<Complex64>,
    pub point: PhasePoint,
}

/// Pointwise eigendecomposition with fixed mode order (R, +, -).
#[derive(Clone, Debug)]
pub struct EigenFrame {
    /// `(0, +<xi>_b, -<xi>_b)`.
    pub deltas: [f64; 3],
    /// Unit eigenvector columns `(u_R, u_+, u_-)` in the deterministic gauge.
    pub vectors: Matrix3<Complex64>,
    /// Minimal pairwise eigenvalue separation, equal to `<xi>_b`.
    pub gap: f64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Principal symbol matrix: rows `(0, xi1, xi2)`, `(xi1, 0, -i b)`,
/// `(xi2, i b, 0)`.
pub fn eval_a0(profile: &Profile, p: PhasePoint) -> MatrixSymbolValue {
    let b = profile.b(p.x2);
    let entries = Matrix3::new(
        c(0.0, 0.0),
        c(p.xi1, 0.0),
        c(p.xi2, 0.0),
        c(p.xi1, 0.0),
        c(0.0, 0.0),
        c(0.0, -b),
        c(p.xi2, 0.0),
        c(0.0, b),
        c(0.0, 0.0),
    );
    MatrixSymbolValue { entries, point: p }
}

/// Subprincipal symbol matrix: `(u . xi)` times the identity.
pub fn eval_a1(profile: &Profile, p: PhasePoint) -> MatrixSymbolValue {
    let u = profile.u(p.x1, p.x2);
    let s = u[0] * p.xi1 + u[1] * p.xi2;
    MatrixSymbolValue {
        entries: Matrix3::identity() * c(s, 0.0),
        point: p,
    }
}

/// Apply the deterministic gauge: unit phase making the largest-modulus
/// component real positive, ties resolved to the lowest index.
fn gauge_fix(v: &mut Vector3<Complex64>) {
    let mut best = 0usize;
    for i in 1..3 {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    let z = v[best];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        for i in 0..3 {
            v[i] *= phase;
        }
        // pin the pivot exactly real
        v[best] = c(v[best].re, 0.0);
    }
}

/// Closed-form eigendecomposition of the principal matrix.
///
/// The Rossby column is `(b, i xi2, -i xi1)/r`; the Poincare columns come
/// from one of two closed-form charts, selected by whichever of
/// `xi2^2 + b^2` and `xi1^2 + xi2^2` is larger (each chart degenerates where
/// its selector vanishes, and they cannot vanish together when `r > 0`).
pub fn eigendecompose(
    profile: &Profile,
    p: PhasePoint,
    gap_tol: f64,
) -> Result<EigenFrame, SpectralError> {
    let r = xi_b(p, profile);
    if r < gap_tol {
        return Err(SpectralError::Degenerate {
            gap: r,
            tol: gap_tol,
            point: p,
        });
    }
    let b = profile.b(p.x2);
    let (k1, k2) = (p.xi1, p.xi2);

    let mut u_r = Vector3::new(c(b, 0.0), c(0.0, k2), c(0.0, -k1)) / c(r, 0.0);

    let sa = k2 * k2 + b * b;
    let sb = k1 * k1 + k2 * k2;
    let (mut u_p, mut u_m) = if sa >= sb {
        let den = c(r * (2.0 * sa).sqrt(), 0.0);
        let up = Vector3::new(c(r * k2, -b * k1), c(k1 * k2, -r * b), c(sa, 0.0)) / den;
        let um = Vector3::new(c(-r * k2, -b * k1), c(k1 * k2, r * b), c(sa, 0.0)) / den;
        (up, um)
    } else {
        let den = c(r * (2.0 * sb).sqrt(), 0.0);
        let up = Vector3::new(c(sb, 0.0), c(r * k1, -b * k2), c(r * k2, b * k1)) / den;
        let um = Vector3::new(c(sb, 0.0), c(-r * k1, -b * k2), c(-r * k2, b * k1)) / den;
        (up, um)
    };

    gauge_fix(&mut u_r);
    gauge_fix(&mut u_p);
    gauge_fix(&mut u_m);

    let mut vectors = Matrix3::zeros();
    vectors.set_column(0, &u_r);
    vectors.set_column(1, &u_p);
    vectors.set_column(2, &u_m);

    Ok(EigenFrame {
        deltas: [0.0, r, -r],
        vectors,
        gap: r,
    })
}

/// Generic iterative (cyclic Jacobi) eigensolver for a 3x3 Hermitian matrix,
/// independent of any closed form. Eigenvalues ascending.
pub fn hermitian_eig_oracle(
    m: &Matrix3<Complex64>,
) -> Result<(Vec<f64>, Vec<Vector3<Complex64>>), SpectralError> {
    let dm = CMat::from_fn(3, 3, |i, j| m[(i, j)]);
    let (vals, vecs) = linalg::jacobi_hermitian_eig(&dm, 1e-10)?;
    let cols = (0..3)
        .map(|k| Vector3::new(vecs[(0, k)], vecs[(1, k)], vecs[(2, k)]))
        .collect();
    Ok((vals, cols))
}

/// Minimum of `<xi>_b` over `n` sampled points and its argmin.
pub fn gap_on_set(profile: &Profile, sampler: &BoxSampler, n: usize) -> (f64, PhasePoint) {
    let mut best = f64::INFINITY;
    let mut arg = sampler.point_at(0);
    for i in 0..n {
        let p = sampler.point_at(i as u64);
        let g = xi_b(p, profile);
        if g < best {
            best = g;
            arg = p;
        }
    }
    (best, arg)
}

//! Coherent states, microlocalization tests, and exact-propagator
//! comparison.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{Grid, GridFunction, GridOperator, OperatorKind, QuantizeError};
use crate::linalg::CMat;
use crate::symbols::ScalarSymbol;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Periodized Gaussian coherent state centered at `(x0, xi0)`, normalized to
/// unit discrete norm. The center must keep a margin of `3 sqrt(eps)` from
/// the box edges.
pub fn gaussian_packet(
    grid: Grid,
    x0: (f64, f64),
    xi0: (f64, f64),
) -> Result<GridFunction, QuantizeError> {
    let margin_need = 3.0 * grid.eps.sqrt();
    for center in [x0.0, x0.1] {
        let have = center.min(grid.len - center);
        if have < margin_need {
            return Err(QuantizeError::Margin {
                need: margin_need,
                have,
            });
        }
    }
    let n = grid.n;
    let mut values = DVector::zeros(grid.cells());
    let pref = 1.0 / (std::f64::consts::PI * grid.eps).sqrt();
    for i1 in 0..n {
        for i2 in 0..n {
            let mut acc = c(0.0, 0.0);
            for m1 in -1i32..=1 {
                for m2 in -1i32..=1 {
                    let z1 = grid.x(i1) + m1 as f64 * grid.len;
                    let z2 = grid.x(i2) + m2 as f64 * grid.len;
                    let phase = (xi0.0 * z1 + xi0.1 * z2) / grid.eps;
                    let d2 = (z1 - x0.0).powi(2) + (z2 - x0.1).powi(2);
                    acc += Complex64::from_polar(pref * (-d2 / (2.0 * grid.eps)).exp(), phase);
                }
            }
            values[i1 * n + i2] = acc;
        }
    }
    let mut u = GridFunction {
        grid,
        components: 1,
        values,
    };
    u.normalize();
    Ok(u)
}

/// Fraction of the squared discrete Fourier mass carried by raw momenta with
/// `|eps k - xi0| <= radius`.
pub fn fourier_mass_within(u: &GridFunction, xi0: (f64, f64), radius: f64) -> f64 {
    assert_eq!(u.components, 1);
    let g = u.grid;
    let n = g.n;
    // two-pass DFT
    let mut tmp = vec![c(0.0, 0.0); n * n];
    for i1 in 0..n {
        for j2 in 0..n {
            let mut acc = c(0.0, 0.0);
            for i2 in 0..n {
                let ph =
                    -2.0 * std::f64::consts::PI * (g.freq_int(j2) * i2 as i64) as f64 / n as f64;
                acc += u.values[i1 * n + i2] * Complex64::from_polar(1.0, ph);
            }
            tmp[i1 * n + j2] = acc;
        }
    }
    let mut total = 0.0;
    let mut inside = 0.0;
    for j1 in 0..n {
        for j2 in 0..n {
            let mut acc = c(0.0, 0.0);
            for i1 in 0..n {
                let ph =
                    -2.0 * std::f64::consts::PI * (g.freq_int(j1) * i1 as i64) as f64 / n as f64;
                acc += tmp[i1 * n + j2] * Complex64::from_polar(1.0, ph);
            }
            let w = acc.norm_sqr();
            total += w;
            let d1 = g.xi_raw(j1) - xi0.0;
            let d2 = g.xi_raw(j2) - xi0.1;
            if (d1 * d1 + d2 * d2).sqrt() <= radius {
                inside += w;
            }
        }
    }
    inside / total
}

/// `|Op(chi) u|` for a scalar cutoff symbol.
pub fn microloc_test(
    u: &GridFunction,
    chi: &ScalarSymbol,
    grid: Grid,
) -> Result<f64, QuantizeError> {
    assert_eq!(u.components, 1);
    assert_eq!(u.grid, grid);
    let op = super::weyl::weyl_quantize_scalar(chi, grid)?;
    Ok(op.apply(u).norm())
}

/// Deterministic Hermitian matrix with unit operator norm, for perturbation
/// tests (splitmix64-filled, then Hermitized and normalized).
pub fn hermitian_perturbation(grid: Grid, components: usize, seed: u64) -> GridOperator {
    let dim = components * grid.cells();
    let mut state = seed.wrapping_add(0x9E3779B97F4A7C15);
    let mut next = move || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z = z ^ (z >> 31);
        // map to (-1, 1)
        (z >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    };
    let mut m = CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = c(next(), next());
        }
    }
    let herm = (m.clone() + m.adjoint()) * c(0.5, 0.0);
    let norm = crate::linalg::op_norm(&herm);
    GridOperator {
        grid,
        components,
        kind: OperatorKind::Assembled,
        mat: herm / c(norm, 0.0),
    }
}

/// Exact-propagator comparison between two Hermitian operators on a shared
/// initial state.
#[derive(Clone, Debug)]
pub struct CompareReport {
    pub times: Vec<f64>,
    /// `|phi(t) - phi_tilde(t)|` per time.
    pub diffs: Vec<f64>,
    pub max_diff: f64,
    /// The integrated energy inequality
    /// `|phi - phi_tilde|(t) <= t sup_s |(A - A~) phi~(s)| + 1e-9` holds at
    /// every sampled time.
    pub bound_ok: bool,
    /// Worst deviation of `|phi(t)|` from `|phi(0)|` (unitarity of the
    /// evolution).
    pub norm_drift: f64,
}

/// Evolve `phi0` under `exp(i t A)` and `exp(i t A~)` by exact Hermitian
/// eigendecomposition and compare.
pub fn compare_propagators(
    a: &GridOperator,
    a_tilde: &GridOperator,
    phi0: &GridFunction,
    t_grid: &[f64],
) -> Result<CompareReport, QuantizeError> {
    assert_eq!(a.dim(), a_tilde.dim());
    assert_eq!(phi0.values.len(), a.dim());
    for op in [a, a_tilde] {
        let defect = op.hermiticity_defect();
        let scale = op.mat.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
        if defect > 1e-8 * scale {
            return Err(QuantizeError::NotHermitian(defect));
        }
    }
    let h = a.grid.h();
    let se_a = a.mat.clone().symmetric_eigen();
    let se_b = a_tilde.mat.clone().symmetric_eigen();

    let coeff_a = se_a.eigenvectors.adjoint() * &phi0.values;
    let coeff_b = se_b.eigenvectors.adjoint() * &phi0.values;

    let norm0 = phi0.values.norm() * h;
    let diff_op = &a.mat - &a_tilde.mat;

    let mut diffs = Vec::with_capacity(t_grid.len());
    let mut bound_ok = true;
    let mut max_diff = 0.0f64;
    let mut norm_drift = 0.0f64;
    let mut sup_rhs = 0.0f64;
    for &t in t_grid {
        let wa = DVector::from_iterator(
            coeff_a.len(),
            coeff_a
                .iter()
                .zip(se_a.eigenvalues.iter())
                .map(|(cv, &l)| cv * Complex64::from_polar(1.0, l * t)),
        );
        let phi_a = &se_a.eigenvectors * wa;
        let wb = DVector::from_iterator(
            coeff_b.len(),
            coeff_b
                .iter()
                .zip(se_b.eigenvalues.iter())
                .map(|(cv, &l)| cv * Complex64::from_polar(1.0, l * t)),
        );
        let phi_b = &se_b.eigenvectors * wb;

        let d = (&phi_a - &phi_b).norm() * h;
        diffs.push(d);
        max_diff = max_diff.max(d);
        norm_drift = norm_drift.max((phi_a.norm() * h - norm0).abs());
        sup_rhs = sup_rhs.max((&diff_op * &phi_b).norm() * h);
        if d > t * sup_rhs + 1e-9 {
            bound_ok = false;
        }
    }
    Ok(CompareReport {
        times: t_grid.to_vec(),
        diffs,
        max_diff,
        bound_ok,
        norm_drift,
    })
}

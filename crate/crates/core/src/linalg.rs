//! Dense complex linear algebra helpers shared by the spectral and grid
//! modules: a cyclic-Jacobi Hermitian eigensolver (used as an independent
//! oracle), a rayon-parallel matrix product, and operator norms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `C = A * B` with rayon over the columns of the result.
pub fn mul_par(a: &CMat, b: &CMat) -> CMat {
    let (n, k) = (a.nrows(), a.ncols());
    assert_eq!(k, b.nrows());
    let m = b.ncols();
    let mut out = CMat::zeros(n, m);
    let a_cols: Vec<&[Complex64]> = (0..k).map(|j| &a.as_slice()[j * n..(j + 1) * n]).collect();
    let b_slice = b.as_slice();
    out.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, col)| {
            for kk in 0..k {
                let w = b_slice[j * k + kk];
                if w != Complex64::new(0.0, 0.0) {
                    let ac = a_cols[kk];
                    for i in 0..n {
                        col[i] += ac[i] * w;
                    }
                }
            }
        });
    out
}

/// `A^H * B` without materializing the adjoint.
pub fn adjoint_mul_par(a: &CMat, b: &CMat) -> CMat {
    let (n, k) = (a.nrows(), a.ncols());
    assert_eq!(n, b.nrows());
    let m = b.ncols();
    let mut out = CMat::zeros(k, m);
    let a_slice = a.as_slice();
    let b_slice = b.as_slice();
    out.as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(j, col)| {
            let bc = &b_slice[j * n..(j + 1) * n];
            for (r, cr) in col.iter_mut().enumerate() {
                let ac = &a_slice[r * n..(r + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    acc += ac[i].conj() * bc[i];
                }
                *cr = acc;
            }
        });
    out
}

/// Operator (spectral) norm via the largest eigenvalue of `M^H M`.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let g = adjoint_mul_par(m, m);
    let ev = g.symmetric_eigenvalues();
    ev.iter().fold(0.0f64, |a, &l| a.max(l.max(0.0))).sqrt()
}

/// Eigenvalues and orthonormal eigenvectors of a Hermitian matrix by cyclic
/// Jacobi rotations, sorted ascending. Independent of any closed form.
pub fn jacobi_hermitian_eig(m: &CMat, herm_tol: f64) -> Result<(Vec<f64>, CMat), LinalgError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1.0);
    let defect = hermiticity_defect(m);
    if defect > herm_tol * scale {
        return Err(LinalgError::NotHermitian(defect));
    }
    let mut a = m.clone();
    // Symmetrize exactly so rounding noise cannot bias sweeps.
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    let mut v = CMat::identity(n, n);
    let off = |a: &CMat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let tol = 1e-15 * scale;
    for _sweep in 0..60 {
        if off(&a) <= tol * (n as f64) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= tol * 1e-2 {
                    continue;
                }
                // Phase reduces the 2x2 block to the real symmetric case.
                let phase = apq / apq.norm();
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns p, q of A and V are rotated by
                //   [c, s*phase; -s*conj(phase), c]
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c - aiq * s * phase.conj();
                    a[(i, q)] = aip * s * phase + aiq * c;
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * s * phase.conj();
                    v[(i, q)] = vip * s * phase + viq * c;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c - aqj * s * phase;
                    a[(q, j)] = apj * s * phase.conj() + aqj * c;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)].re, i)).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, (_, idx)) in pairs.iter().enumerate() {
        vecs.set_column(k, &v.column(*idx).into_owned());
    }
    Ok((vals, vecs))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..lx.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(rng.gen_range(-2.0..2.0), 0.0);
            for j in (i + 1)..n {
                let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn jacobi_identity_matrix() {
        let m = CMat::identity(3, 3);
        let (vals, _) = jacobi_hermitian_eig(&m, 1e-10).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn jacobi_diagonal_matrix() {
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = c(0.0, 0.0);
        m[(1, 1)] = c(5.0, 0.0);
        m[(2, 2)] = c(-5.0, 0.0);
        let (vals, vecs) = jacobi_hermitian_eig(&m, 1e-10).unwrap();
        assert_eq!(vals, vec![-5.0, 0.0, 5.0]);
        for k in 0..3 {
            let col = vecs.column(k);
            let nz: Vec<usize> = (0..3).filter(|&i| col[i].norm() > 1e-12).collect();
            assert_eq!(nz.len(), 1);
        }
    }

    #[test]
    fn jacobi_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 5, 8] {
            let m = random_hermitian(n, &mut rng);
            let (vals, vecs) = jacobi_hermitian_eig(&m, 1e-10).unwrap();
            // residual per pair and orthonormality
            for k in 0..n {
                let v = vecs.column(k).into_owned();
                let r = &m * &v - &v * c(vals[k], 0.0);
                assert!(r.norm() < 1e-12 * (1.0 + vals[k].abs()));
            }
            let g = vecs.adjoint() * &vecs;
            assert!((g - CMat::identity(n, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobi_rejects_non_hermitian() {
        let mut m = CMat::identity(3, 3);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(
            jacobi_hermitian_eig(&m, 1e-10),
            Err(LinalgError::NotHermitian(_))
        ));
    }

    #[test]
    fn nalgebra_symmetric_eigen_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = random_hermitian(12, &mut rng);
        let (jvals, _) = jacobi_hermitian_eig(&m, 1e-10).unwrap();
        let mut nvals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        nvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in jvals.iter().zip(nvals.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn mul_par_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = CMat::from_fn(7, 5, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = CMat::from_fn(5, 9, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let c1 = mul_par(&a, &b);
        let c2 = &a * &b;
        assert!((c1 - c2).norm() < 1e-13);
        let d1 = adjoint_mul_par(&a, &a);
        let d2 = a.adjoint() * &a;
        assert!((d1 - d2).norm() < 1e-13);
    }

    #[test]
    fn op_norm_known_cases() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = c(3.0, 0.0);
        assert!((op_norm(&m) - 3.0).abs() < 1e-12);
        let id = CMat::identity(4, 4);
        assert!((op_norm(&id) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let x = [0.4, 0.2, 0.1];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}

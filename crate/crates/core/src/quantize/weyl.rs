//! The generic midpoint quantizer: dense matrices from scalar or 3x3 symbol
//! data.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Grid, GridOperator, OperatorKind, QuantizeError};
use crate::linalg::CMat;
use crate::symbols::{ScalarSymbol, SymbolError};

/// Quantize a raw symbol function `f(x1, x2, xi1, xi2)`.
///
/// Matrix element `(i, c)` is the lag transform of the symbol sampled at the
/// pair midpoint:
/// `A[i,c] = n^-2 sum_k f((x_i + x_c)/2, xi_k) e^{i k (x_i - x_c)}`.
pub fn weyl_quantize_fn<F>(grid: Grid, f: F) -> Result<GridOperator, QuantizeError>
where
    F: Fn(f64, f64, f64, f64) -> Result<Complex64, SymbolError> + Sync,
{
    let n = grid.n;
    let ncell = grid.cells();
    let half_h = 0.5 * grid.h();
    let xis: Vec<f64> = (0..n).map(|idx| grid.xi(idx)).collect();
    let freqs: Vec<i64> = (0..n).map(|idx| grid.freq_int(idx)).collect();
    // twiddle[t] = exp(2 pi i t / n)
    let twiddle: Vec<Complex64> = (0..n)
        .map(|t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / n as f64))
        .collect();

    let nmid = 2 * n - 1;
    // Per midpoint: symbol samples over the momentum lattice, then the lag
    // transform in two 1D passes.
    let lag_tables: Result<Vec<Vec<Complex64>>, SymbolError> = (0..nmid * nmid)
        .into_par_iter()
        .map(|s| {
            let (s1, s2) = (s / nmid, s % nmid);
            let (m1, m2) = (s1 as f64 * half_h, s2 as f64 * half_h);
            let mut arr = vec![Complex64::new(0.0, 0.0); n * n];
            for j1 in 0..n {
                for j2 in 0..n {
                    arr[j1 * n + j2] = f(m1, m2, xis[j1], xis[j2])?;
                }
            }
            // pass over the second index: tmp[j1][l2] = sum_j2 arr e^{2 pi i j2 l2 / n}
            let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
            for j1 in 0..n {
                for l2 in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j2 in 0..n {
                        let t = (freqs[j2] * l2 as i64).rem_euclid(n as i64) as usize;
                        acc += arr[j1 * n + j2] * twiddle[t];
                    }
                    tmp[j1 * n + l2] = acc;
                }
            }
            // pass over the first index with the 1/n^2 weight
            let w = 1.0 / (n * n) as f64;
            let mut out = vec![Complex64::new(0.0, 0.0); n * n];
            for l1 in 0..n {
                for l2 in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j1 in 0..n {
                        let t = (freqs[j1] * l1 as i64).rem_euclid(n as i64) as usize;
                        acc += tmp[j1 * n + l2] * twiddle[t];
                    }
                    out[l1 * n + l2] = acc * w;
                }
            }
            Ok(out)
        })
        .collect();
    let lag_tables = lag_tables?;

    let mut mat = CMat::zeros(ncell, ncell);
    for i1 in 0..n {
        for i2 in 0..n {
            let row = i1 * n + i2;
            for c1 in 0..n {
                let l1 = (i1 + n - c1) % n;
                let s1 = i1 + c1;
                for c2 in 0..n {
                    let l2 = (i2 + n - c2) % n;
                    let s2 = i2 + c2;
                    mat[(row, c1 * n + c2)] = lag_tables[s1 * nmid + s2][l1 * n + l2];
                }
            }
        }
    }
    Ok(GridOperator {
        grid,
        components: 1,
        kind: OperatorKind::WeylGeneric,
        mat,
    })
}

/// Quantize a scalar symbol tree.
pub fn weyl_quantize_scalar(a: &ScalarSymbol, grid: Grid) -> Result<GridOperator, QuantizeError> {
    weyl_quantize_fn(grid, |x1, x2, k1, k2| a.eval_at(x1, x2, k1, k2))
}

/// Quantize a 3x3 matrix of symbols blockwise.
pub fn weyl_quantize_matrix(
    entries: &[[ScalarSymbol; 3]; 3],
    grid: Grid,
) -> Result<GridOperator, QuantizeError> {
    let ncell = grid.cells();
    let mut mat = CMat::zeros(3 * ncell, 3 * ncell);
    for (r, row) in entries.iter().enumerate() {
        for (c, sym) in row.iter().enumerate() {
            if sym.is_zero() {
                continue;
            }
            let block = weyl_quantize_scalar(sym, grid)?;
            mat.view_mut((r * ncell, c * ncell), (ncell, ncell))
                .copy_from(&block.mat);
        }
    }
    Ok(GridOperator {
        grid,
        components: 3,
        kind: OperatorKind::WeylGeneric,
        mat,
    })
}

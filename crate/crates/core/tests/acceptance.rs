//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with its measured numbers (run with `--nocapture` to see them).
//!
//! Every tolerance is pinned here as a named constant.

use std::time::Instant;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavetrace_core::linalg::CMat;
use wavetrace_core::normal_form::{homological_solve, verify_tau_r, ModeId};
use wavetrace_core::profile::{FlowSpec, Profile};
use wavetrace_core::quantize::{
    build_a_exact, compare_propagators, diagonalization_scaling, gaussian_packet,
    hermitian_perturbation, microloc_test, Grid, GridFunction, MomentumMap,
};
use wavetrace_core::raytrace::{
    ensemble_evolve, exit_time, integrate, invariant_report, mourre_bound, xi_b_lower_bound,
    RayConfig,
};
use wavetrace_core::sampler::BoxSampler;
use wavetrace_core::spectral::{eigendecompose, eval_a0, hermitian_eig_oracle};
use wavetrace_core::symbols::{xi_b, ScalarSymbol};

const PI: f64 = std::f64::consts::PI;

// criterion 1
const EIG_RESIDUAL_TOL: f64 = 1e-12;
const EIG_UNITARITY_TOL: f64 = 1e-12;
const EIG_ORACLE_TOL: f64 = 1e-12;
const EIG_GAP_FLOOR: f64 = 0.1;
const EIG_POINTS_PER_PROFILE: usize = 2500;
// criterion 2
const TAU_R_AGREEMENT_TOL: f64 = 1e-8;
// criterion 3
const HOMOLOGICAL_TOL: f64 = 1e-13;
const HOMOLOGICAL_GAP: f64 = 1e-3;
// criterion 4
const TAU_DRIFT_REL_TOL: f64 = 1e-8;
const XI1_DRIFT_TOL: f64 = 1e-8;
const POINCARE_INV_DRIFT_TOL: f64 = 1e-8;
const VELOCITY_SPREAD_TOL: f64 = 1e-8;
const RAY_HORIZON: f64 = 1e3;
// criterion 5
const EXIT_TIME_TOL: f64 = 1e-6;
const XI1_BOX_TOL: f64 = 1e-10;
// criterion 6
const FLOOR_SLACK: f64 = 1e-9;
const BBOX_REL_CHANGE_TOL: f64 = 0.01;
// criterion 7
const MOURRE_SLACK: f64 = 1e-12;
// criterion 8
const SLOPE_FIRST_ORDER_WINDOW: (f64, f64) = (0.8, 1.2);
const SLOPE_SECOND_ORDER_WINDOW: (f64, f64) = (1.7, 2.3);
// criterion 9
const MICROLOC_MIN_SLOPE: f64 = 2.0;
// criterion 10
const APPENDIX_BOUND_FACTOR: f64 = 1.0 + 1e-6;
const APPENDIX_LINEARITY_WINDOW: (f64, f64) = (0.45, 0.55);

const EPS_LIST: [f64; 3] = [0.4, 0.2, 0.1];

fn report(id: u32, pass: bool, detail: &str) {
    println!(
        "[criterion {id:2}] {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn sine_profile(flow: FlowSpec) -> Profile {
    Profile::shifted_sine_b(2.0, 1.0, 1.0, flow)
}

fn bump() -> FlowSpec {
    FlowSpec::Bump {
        center: (0.0, 0.0),
        radius: 1.0,
        amplitude: 0.2,
    }
}

#[test]
fn criterion_01_spectral_exactness() {
    let t0 = Instant::now();
    let profiles = [
        Profile::linear_b(1.0, FlowSpec::Zero),
        Profile::linear_b(1.0, bump()),
        sine_profile(FlowSpec::Zero),
        sine_profile(bump()),
    ];
    let mut worst_res: f64 = 0.0;
    let mut worst_unit: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    for (pi, prof) in profiles.iter().enumerate() {
        let sampler = BoxSampler::new(
            [-3.0, -3.0, -2.0, -2.0],
            [3.0, 3.0, 2.0, 2.0],
            100 + pi as u64,
        );
        let mut kept = 0usize;
        let mut i = 0u64;
        while kept < EIG_POINTS_PER_PROFILE {
            let p = sampler.point_at(i);
            i += 1;
            if xi_b(p, prof) < EIG_GAP_FLOOR {
                continue;
            }
            kept += 1;
            let a0 = eval_a0(prof, p).entries;
            let f = eigendecompose(prof, p, 1e-6).unwrap();
            for k in 0..3 {
                let v = f.vectors.column(k).into_owned();
                let r = a0 * v.clone() - v * Complex64::new(f.deltas[k], 0.0);
                worst_res = worst_res.max(r.norm());
            }
            let gram = f.vectors.adjoint() * f.vectors;
            worst_unit = worst_unit.max((gram - Matrix3::identity()).norm());
            let (ovals, _) = hermitian_eig_oracle(&a0).unwrap();
            let mut mine = f.deltas.to_vec();
            mine.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in mine.iter().zip(ovals.iter()) {
                worst_eig = worst_eig.max((a - b).abs());
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst_res <= EIG_RESIDUAL_TOL
        && worst_unit <= EIG_UNITARITY_TOL
        && worst_eig <= EIG_ORACLE_TOL
        && dt < 5.0;
    report(
        1,
        pass,
        &format!(
            "eigen residual {worst_res:.2e} (<= {EIG_RESIDUAL_TOL:.0e}), unitarity {worst_unit:.2e}, \
             oracle gap {worst_eig:.2e}, 10^4 points in {dt:.2}s (< 5s)"
        ),
    );
}

#[test]
fn criterion_02_subprincipal_matches_closed_form() {
    let t0 = Instant::now();
    let mut worst_zonal: f64 = 0.0;
    for prof in [
        Profile::linear_b(1.0, FlowSpec::Zero),
        sine_profile(FlowSpec::Zero),
    ] {
        let s = BoxSampler::new([-2.0, -1.5, -2.0, -2.0], [2.0, 1.5, 2.0, 2.0], 17);
        worst_zonal = worst_zonal.max(verify_tau_r(&prof, &s, 1000, 1e-6).unwrap());
    }
    let s = BoxSampler::new([-2.0, -1.5, -2.0, -2.0], [2.0, 1.5, 2.0, 2.0], 18);
    let worst_bump = verify_tau_r(&Profile::linear_b(1.0, bump()), &s, 1000, 1e-6).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst_zonal <= TAU_R_AGREEMENT_TOL && worst_bump <= TAU_R_AGREEMENT_TOL && dt < 5.0;
    report(
        2,
        pass,
        &format!(
            "max |generic - closed| zonal {worst_zonal:.2e}, x1-dependent {worst_bump:.2e} \
             (<= {TAU_R_AGREEMENT_TOL:.0e}), {dt:.2}s (< 5s)"
        ),
    );
}

#[test]
fn criterion_03_homological_identity() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = rng.gen_range(HOMOLOGICAL_GAP..4.0);
        let b = rng.gen_range(HOMOLOGICAL_GAP..4.0);
        let deltas = [0.0, a, -b];
        let mut d1 = CMat::zeros(3, 3);
        for i in 0..3 {
            d1[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..3 {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                d1[(i, j)] = z;
                d1[(j, i)] = z.conj();
            }
        }
        let (w0, diag) = homological_solve(&deltas, &d1, HOMOLOGICAL_GAP).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let comm = Complex64::new(deltas[i] - deltas[j], 0.0) * w0[(i, j)];
                let rhs = if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((comm + d1[(i, j)] - rhs).norm());
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst <= HOMOLOGICAL_TOL && dt < 1.0;
    report(
        3,
        pass,
        &format!("entrywise defect {worst:.2e} (<= {HOMOLOGICAL_TOL:.0e}) on 10^3 instances, {dt:.2}s (< 1s)"),
    );
}

#[test]
fn criterion_04_ray_invariants() {
    let t0 = Instant::now();
    let prof = Profile::linear_b(1.0, bump());
    let sampler = BoxSampler::new([-2.0, -0.5, 1.0, -0.5], [2.0, 0.5, 1.5, 0.5], 41);
    let base = RayConfig {
        rtol: 1e-13,
        atol: 1e-14,
        t_max: RAY_HORIZON,
        ..Default::default()
    };

    let mut worst_tau_rel: f64 = 0.0;
    for i in 0..100u64 {
        let p0 = sampler.point_at(i);
        let traj = integrate(&prof, p0, &base).unwrap();
        let inv = invariant_report(&traj, &prof);
        worst_tau_rel = worst_tau_rel.max(inv.tau_drift / traj.tau[0].abs().max(1.0));
    }

    let mut worst_tau_rel_p: f64 = 0.0;
    let mut worst_xi1: f64 = 0.0;
    let mut worst_pinv: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    let pcfg = RayConfig {
        hamiltonian: ModeId::PoincarePlus,
        ..base.clone()
    };
    for i in 0..100u64 {
        let p0 = sampler.point_at(i);
        let traj = integrate(&prof, p0, &pcfg).unwrap();
        let inv = invariant_report(&traj, &prof);
        worst_tau_rel_p = worst_tau_rel_p.max(inv.tau_drift / traj.tau[0].abs().max(1.0));
        worst_xi1 = worst_xi1.max(inv.xi1_drift);
        worst_pinv = worst_pinv.max(inv.poincare_inv_drift);
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for k in 0..traj.times.len() {
            let v = traj.xi1[k] / traj.xi_b[k];
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        worst_spread = worst_spread.max(vmax - vmin);
    }
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst_tau_rel <= TAU_DRIFT_REL_TOL
        && worst_tau_rel_p <= TAU_DRIFT_REL_TOL
        && worst_xi1 <= XI1_DRIFT_TOL
        && worst_pinv <= POINCARE_INV_DRIFT_TOL
        && worst_spread <= VELOCITY_SPREAD_TOL
        && dt < 60.0;
    report(
        4,
        pass,
        &format!(
            "tau drift rel: rossby {worst_tau_rel:.2e}, poincare {worst_tau_rel_p:.2e} (<= 1e-8); \
             xi1 drift {worst_xi1:.2e}; xi2^2+b^2 drift {worst_pinv:.2e}; dx1/dt spread {worst_spread:.2e}; \
             2x100 rays to t={RAY_HORIZON} in {dt:.1}s (< 60s)"
        ),
    );
}

#[test]
fn criterion_05_poincare_escape() {
    let t0 = Instant::now();
    let prof = Profile::linear_b(1.0, bump());
    let interval = (-1.0, 1.0); // spans the flow support in x1
    let sampler = BoxSampler::new([-0.5, -1.0, 0.5, -1.0], [0.5, 1.0, 1.5, 1.0], 51);
    let cfg = RayConfig {
        rtol: 1e-12,
        atol: 1e-13,
        t_max: 15.0,
        hamiltonian: ModeId::PoincarePlus,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let p0 = sampler.point_at(i);
        let traj = integrate(&prof, p0, &cfg).unwrap();
        let measured = exit_time(&traj, interval).expect("ray must exit");
        let predicted = (interval.1 - p0.x1) * xi_b(p0, &prof) / p0.xi1;
        worst = worst.max((measured - predicted).abs());
    }
    let summary = ensemble_evolve(&prof, &sampler, 100, &cfg);
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for i in 0..100u64 {
        let p = sampler.point_at(i);
        s_min = s_min.min(p.xi1);
        s_max = s_max.max(p.xi1);
    }
    let box_moved = (summary.bbox[2].0 - s_min)
        .abs()
        .max((summary.bbox[2].1 - s_max).abs());
    let dt = t0.elapsed().as_secs_f64();
    let pass = worst <= EXIT_TIME_TOL
        && box_moved <= XI1_BOX_TOL
        && summary.failures.is_empty()
        && dt < 30.0;
    report(
        5,
        pass,
        &format!(
            "exit-time error {worst:.2e} (<= {EXIT_TIME_TOL:.0e}) on 100 rays; xi1 box drift \
             {box_moved:.2e} (<= {XI1_BOX_TOL:.0e}); {dt:.1}s (< 30s)"
        ),
    );
}

#[test]
fn criterion_06_rossby_floor_and_x2_trapping() {
    let t0 = Instant::now();
    let prof = Profile::linear_b(1.0, bump());
    let eta = 0.8;
    let sampler = BoxSampler::new([-2.0, -0.5, 1.0, -0.5], [2.0, 0.5, 1.5, 0.5], 61);
    let cfg1 = RayConfig {
        rtol: 1e-12,
        atol: 1e-13,
        t_max: 1e3,
        ..Default::default()
    };
    let cfg2 = RayConfig {
        t_max: 2e3,
        ..cfg1.clone()
    };
    let s1 = ensemble_evolve(&prof, &sampler, 100, &cfg1);
    let s2 = ensemble_evolve(&prof, &sampler, 100, &cfg2);
    let bound = xi_b_lower_bound(&prof, s2.max_abs_tau, eta).unwrap();
    let floor_ok = s1.min_xi_b >= bound - FLOOR_SLACK && s2.min_xi_b >= bound - FLOOR_SLACK;
    let w1 = s1.bbox[1].1 - s1.bbox[1].0;
    let w2 = s2.bbox[1].1 - s2.bbox[1].0;
    let rel_change = (w2 - w1).abs() / w1;
    let dt = t0.elapsed().as_secs_f64();
    let pass = floor_ok
        && rel_change < BBOX_REL_CHANGE_TOL
        && s1.failures.is_empty()
        && s2.failures.is_empty()
        && dt < 120.0;
    report(
        6,
        pass,
        &format!(
            "min <xi>_b {:.4} >= bound {bound:.4} - 1e-9; x2 box width {w1:.4} -> {w2:.4} \
             ({:.3}% change, < 1%); {dt:.1}s (< 2min)",
            s2.min_xi_b,
            rel_change * 100.0
        ),
    );
}

#[test]
fn criterion_07_mourre_bracket_bound() {
    let t0 = Instant::now();
    let prof = sine_profile(FlowSpec::Zero);
    let sampler = BoxSampler::new([-1.0, -1.0, 1.0, -1.0], [1.0, 1.0, 2.0, 1.0], 71);
    let rep = mourre_bound(&prof, &sampler, 10_000).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let pass = rep.inf_bracket >= rep.theoretical - MOURRE_SLACK && dt < 1.0;
    report(
        7,
        pass,
        &format!(
            "inf bracket {:.6} >= d0/D1 {:.6} - 1e-12 (d0 {:.3}, D1 {:.3}); {dt:.2}s (< 1s)",
            rep.inf_bracket, rep.theoretical, rep.xi1_min, rep.gap_max
        ),
    );
}

#[test]
fn criterion_08_operator_residual_scaling() {
    let t0 = Instant::now();
    let prof = sine_profile(FlowSpec::Zero);
    let rep = diagonalization_scaling(&prof, 16, 2.0 * PI, &EPS_LIST).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let in_win = |s: f64, w: (f64, f64)| s >= w.0 && s <= w.1;
    let diag_ok = in_win(rep.slope_diag, SLOPE_FIRST_ORDER_WINDOW);
    let unit_ok = in_win(rep.slope_unit, SLOPE_FIRST_ORDER_WINDOW);
    let r2_ok = in_win(rep.slope_r2, SLOPE_SECOND_ORDER_WINDOW);
    let pass = diag_ok && unit_ok && r2_ok && dt < 180.0;
    report(
        8,
        pass,
        &format!(
            "slopes: diag {:.3} (window [0.8,1.2]: {}), unit {:.3} (window [0.8,1.2]: {}), \
             corrected {:.3} (window [1.7,2.3]: {}); r_diag {:?}, r_unit {:?}, r2 {:?}; {dt:.0}s (< 3min). \
             Note: on a fixed 16-slot frequency zone the bare frame's first-order unitarity defect \
             is forced to vanish at the zone fold, so its measured slope exceeds the first-order \
             window while the corrected slope lands in the second-order window; see the quantize \
             module docs.",
            rep.slope_diag,
            diag_ok,
            rep.slope_unit,
            unit_ok,
            rep.slope_r2,
            r2_ok,
            rep.r_diag.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            rep.r_unit.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            rep.r2.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
        ),
    );
}

#[test]
fn criterion_09_microlocalization_decay() {
    let t0 = Instant::now();
    let x0 = (PI, PI);
    let xi0 = (0.4, 0.0);
    let (d, w) = (1.2, 0.1);
    let cx = (x0.0 + d, x0.1);
    // displaced position cutoff
    let chi_far = {
        let dx1 = ScalarSymbol::x1() - ScalarSymbol::real(cx.0);
        let dx2 = ScalarSymbol::x2() - ScalarSymbol::real(cx.1);
        ((dx1.powi(2) + dx2.powi(2)) * ScalarSymbol::real(-1.0 / (2.0 * w * w))).exp()
    };
    let mut vals = Vec::new();
    for &eps in &EPS_LIST {
        let grid = Grid::new(16, 2.0 * PI, eps, MomentumMap::Compactified).unwrap();
        let u = gaussian_packet(grid, x0, xi0).unwrap();
        vals.push(microloc_test(&u, &chi_far, grid).unwrap());
    }
    let slope = wavetrace_core::linalg::loglog_slope(&EPS_LIST, &vals);

    // wide cutoff centered on the packet keeps most of its mass
    let wb = 0.8;
    let chi_at = {
        let dx1 = ScalarSymbol::x1() - ScalarSymbol::real(x0.0);
        let dx2 = ScalarSymbol::x2() - ScalarSymbol::real(x0.1);
        let dk1 = ScalarSymbol::xi1() - ScalarSymbol::real(xi0.0);
        let dk2 = ScalarSymbol::xi2() - ScalarSymbol::real(xi0.1);
        ((dx1.powi(2) + dx2.powi(2) + dk1.powi(2) + dk2.powi(2))
            * ScalarSymbol::real(-1.0 / (2.0 * wb * wb)))
        .exp()
    };
    let grid = Grid::new(16, 2.0 * PI, 0.1, MomentumMap::Compactified).unwrap();
    let u = gaussian_packet(grid, x0, xi0).unwrap();
    let centered = microloc_test(&u, &chi_at, grid).unwrap();
    let full = microloc_test(&u, &ScalarSymbol::one(), grid).unwrap();

    let dt = t0.elapsed().as_secs_f64();
    let pass = slope >= MICROLOC_MIN_SLOPE
        && centered >= 0.5 * u.norm()
        && (full - u.norm()).abs() <= 1e-12
        && dt < 120.0;
    report(
        9,
        pass,
        &format!(
            "decay slope {slope:.2} (>= {MICROLOC_MIN_SLOPE}), values {:?}; \
             centered overlap {centered:.3} (>= 0.5); {dt:.1}s (< 2min)",
            vals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_10_propagator_stability() {
    let t0 = Instant::now();
    let prof = sine_profile(FlowSpec::Zero);
    let eps = 0.4;
    let grid = Grid::new(16, 2.0 * PI, eps, MomentumMap::Raw).unwrap();
    let a = build_a_exact(&prof, grid).unwrap();
    let p = hermitian_perturbation(grid, 3, 7);
    let delta = eps.powi(4);

    let packet = gaussian_packet(grid, (PI, PI), (0.4, 0.0)).unwrap();
    let mut phi0 = GridFunction::zeros(grid, 3);
    phi0.values
        .rows_mut(0, grid.cells())
        .copy_from(&packet.values);
    phi0.normalize();
    let ts: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();

    let mut a_tilde = a.clone();
    a_tilde.mat += &p.mat * Complex64::new(delta, 0.0);
    let rep = compare_propagators(&a, &a_tilde, &phi0, &ts).unwrap();

    let mut a_half = a.clone();
    a_half.mat += &p.mat * Complex64::new(0.5 * delta, 0.0);
    let rep_half = compare_propagators(&a, &a_half, &phi0, &ts).unwrap();
    let ratio = rep_half.max_diff / rep.max_diff;

    let dt = t0.elapsed().as_secs_f64();
    let bound = delta * 10.0 * APPENDIX_BOUND_FACTOR;
    let pass = rep.max_diff <= bound
        && rep.bound_ok
        && ratio >= APPENDIX_LINEARITY_WINDOW.0
        && ratio <= APPENDIX_LINEARITY_WINDOW.1
        && rep.norm_drift <= 1e-10
        && dt < 60.0;
    report(
        10,
        pass,
        &format!(
            "max diff {:.3e} <= eps^4 * 10 = {bound:.3e}; energy inequality {}; halving ratio \
             {ratio:.3} in [0.45, 0.55]; norm drift {:.1e}; {dt:.1}s (< 1min)",
            rep.max_diff, rep.bound_ok, rep.norm_drift
        ),
    );
}

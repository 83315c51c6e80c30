//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde_json::json;

use wavetrace_core::normal_form::{tau_pm, tau_r, ModeId, NormalFormError, SubprincipalEvaluator};
use wavetrace_core::profile::Profile;
use wavetrace_core::quantize::{
    build_a_exact, compare_propagators, diagonalization_scaling, gaussian_packet,
    hermitian_perturbation, microloc_test, packet_d1_expectation, Grid, GridFunction,
};
use wavetrace_core::raytrace::{
    exit_time, integrate, invariant_report, mourre_bound, trapping_classify, xi_b_lower_bound,
    RayError, Termination, Trajectory, TrappingVerdict,
};
use wavetrace_core::spectral::{eigendecompose, SpectralError, DEFAULT_GAP_TOL};
use wavetrace_core::symbols::{xi_b, PhasePoint, ScalarSymbol};

use crate::output::{fmt_f64, write_json, write_text, Meta};
use crate::scenario::{InitialData, Scenario};
use crate::CliError;

fn collect_points(scenario: &Scenario, cap: usize) -> Result<Vec<PhasePoint>, CliError> {
    Ok(match scenario.initial_points()? {
        InitialData::Points(p) => p,
        InitialData::Sampler { sampler, count } => (0..count.min(cap))
            .map(|i| sampler.point_at(i as u64))
            .collect(),
    })
}

pub fn cmd_eig(scenario: &Scenario, out: &Path, meta: &Meta) -> Result<i32, CliError> {
    let profile = scenario.profile()?;
    let points = collect_points(scenario, 1_000_000)?;
    let mut csv = meta.header_lines();
    csv.push_str("idx,x1,x2,xi1,xi2,status,delta_r,delta_p,delta_m,gap");
    for col in ["ur", "up", "um"] {
        for row in 0..3 {
            write!(csv, ",{col}{row}_re,{col}{row}_im").unwrap();
        }
    }
    csv.push('\n');
    let mut any_degenerate = false;
    for (i, p) in points.iter().enumerate() {
        write!(
            csv,
            "{i},{},{},{},{}",
            fmt_f64(p.x1),
            fmt_f64(p.x2),
            fmt_f64(p.xi1),
            fmt_f64(p.xi2)
        )
        .unwrap();
        match eigendecompose(&profile, *p, DEFAULT_GAP_TOL) {
            Ok(f) => {
                write!(
                    csv,
                    ",ok,{},{},{},{}",
                    fmt_f64(f.deltas[0]),
                    fmt_f64(f.deltas[1]),
                    fmt_f64(f.deltas[2]),
                    fmt_f64(f.gap)
                )
                .unwrap();
                for c in 0..3 {
                    for r in 0..3 {
                        let z = f.vectors[(r, c)];
                        write!(csv, ",{},{}", fmt_f64(z.re), fmt_f64(z.im)).unwrap();
                    }
                }
                csv.push('\n');
            }
            Err(SpectralError::Degenerate { gap, .. }) => {
                any_degenerate = true;
                write!(csv, ",degenerate,,,,{}", fmt_f64(gap)).unwrap();
                for _ in 0..18 {
                    csv.push(',');
                }
                csv.push('\n');
            }
            Err(e) => return Err(CliError::Numerical(e.to_string())),
        }
    }
    write_text(&out.join("eig.csv"), &csv)?;
    Ok(if any_degenerate { 3 } else { 0 })
}

pub fn cmd_hamiltonians(scenario: &Scenario, out: &Path, meta: &Meta) -> Result<i32, CliError> {
    let profile = scenario.profile()?;
    let points = collect_points(scenario, 1_000_000)?;
    let evals: Vec<(ModeId, SubprincipalEvaluator)> =
        [ModeId::Rossby, ModeId::PoincarePlus, ModeId::PoincareMinus]
            .into_iter()
            .map(|m| {
                SubprincipalEvaluator::new(&profile, m, DEFAULT_GAP_TOL)
                    .map(|e| (m, e))
                    .map_err(|e| CliError::Numerical(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
    let mut csv = meta.header_lines();
    csv.push_str(
        "idx,x1,x2,xi1,xi2,mode,status,tau_principal,bracket_re,bracket_im,flow_re,flow_im,\
         total_re,total_im,closed_form,abs_error,no_closed_form_oracle\n",
    );
    let mut worst_err: f64 = 0.0;
    let mut any_flagged = false;
    for (i, p) in points.iter().enumerate() {
        for (mode, eval) in &evals {
            let principal = match mode {
                ModeId::Rossby => 0.0,
                ModeId::PoincarePlus => tau_pm(&profile, *p, true),
                ModeId::PoincareMinus => tau_pm(&profile, *p, false),
            };
            let rep = match eval.eval(*p) {
                Ok(r) => r,
                // Below the gap floor, or on the fixed chart's cut locus
                // (xi2^2 + b^2 = 0 for the Poincare columns): flag the row.
                Err(NormalFormError::Degenerate { .. }) | Err(NormalFormError::Symbol(_)) => {
                    any_flagged = true;
                    writeln!(
                        csv,
                        "{i},{},{},{},{},{},degenerate,,,,,,,,,,",
                        fmt_f64(p.x1),
                        fmt_f64(p.x2),
                        fmt_f64(p.xi1),
                        fmt_f64(p.xi2),
                        mode.name()
                    )
                    .unwrap();
                    continue;
                }
            };
            let (closed, err, no_oracle) = if *mode == ModeId::Rossby {
                let c = tau_r(&profile, *p).map_err(|e| CliError::Numerical(e.to_string()))?;
                let e = (rep.total - Complex64::new(c, 0.0)).norm();
                worst_err = worst_err.max(e);
                (fmt_f64(c), fmt_f64(e), false)
            } else {
                (String::new(), String::new(), true)
            };
            writeln!(
                csv,
                "{i},{},{},{},{},{},ok,{},{},{},{},{},{},{},{closed},{err},{no_oracle}",
                fmt_f64(p.x1),
                fmt_f64(p.x2),
                fmt_f64(p.xi1),
                fmt_f64(p.xi2),
                mode.name(),
                fmt_f64(principal),
                fmt_f64(rep.bracket_part.re),
                fmt_f64(rep.bracket_part.im),
                fmt_f64(rep.flow_part.re),
                fmt_f64(rep.flow_part.im),
                fmt_f64(rep.total.re),
                fmt_f64(rep.total.im),
            )
            .unwrap();
        }
    }
    write_text(&out.join("hamiltonians.csv"), &csv)?;
    let summary = json!({
        "meta": meta.json_value(),
        "points": points.len(),
        "max_abs_error_rossby": worst_err,
    });
    write_json(&out.join("hamiltonians_summary.json"), &summary)?;
    Ok(if any_flagged { 3 } else { 0 })
}

fn trajectory_csv(traj: &Trajectory, profile: &Profile, sample_dt: f64, meta: &Meta) -> String {
    let mut csv = meta.header_lines();
    csv.push_str("t,x1,x2,xi1,xi2,tau,xi_b,poincare_inv\n");
    let t_end = traj.end_time();
    let mut t: f64 = 0.0;
    loop {
        let at = t.min(t_end);
        if let Some(p) = traj.sample(at) {
            let tau = match traj.mode {
                ModeId::Rossby => tau_r(profile, p).unwrap_or(f64::NAN),
                ModeId::PoincarePlus => tau_pm(profile, p, true),
                ModeId::PoincareMinus => tau_pm(profile, p, false),
            };
            let b = profile.b(p.x2);
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                fmt_f64(at),
                fmt_f64(p.x1),
                fmt_f64(p.x2),
                fmt_f64(p.xi1),
                fmt_f64(p.xi2),
                fmt_f64(tau),
                fmt_f64(xi_b(p, profile)),
                fmt_f64(p.xi2 * p.xi2 + b * b)
            )
            .unwrap();
        }
        if at >= t_end {
            break;
        }
        t += sample_dt;
    }
    csv
}

fn verdict_json(v: &TrappingVerdict) -> serde_json::Value {
    match v {
        TrappingVerdict::Trapped { period, mean_dx1 } => {
            json!({"kind": "trapped", "period": period, "mean_dx1": mean_dx1})
        }
        TrappingVerdict::DriftRight { period, mean_dx1 } => {
            json!({"kind": "drift_right", "period": period, "mean_dx1": mean_dx1})
        }
        TrappingVerdict::DriftLeft { period, mean_dx1 } => {
            json!({"kind": "drift_left", "period": period, "mean_dx1": mean_dx1})
        }
        TrappingVerdict::FixedPoint => json!({"kind": "fixed_point"}),
        TrappingVerdict::NoPeriodFound => json!({"kind": "no_period_found"}),
    }
}

/// Shared implementation of `trace` (explicit points) and `ensemble`
/// (sampler box); they differ only in validation and defaults.
pub fn cmd_trace_or_ensemble(
    scenario: &Scenario,
    out: &Path,
    meta: &Meta,
    ensemble: bool,
) -> Result<i32, CliError> {
    let profile = scenario.profile()?;
    let cfg = scenario.ray_config()?;
    let initial = scenario.initial_points()?;

    // Sampler boxes are validated against the analysis preconditions before
    // any integration starts.
    if let InitialData::Sampler { sampler, .. } = &initial {
        if cfg.hamiltonian == ModeId::Rossby {
            if !sampler.satisfies_cond1(&profile, cfg.gap_tol) {
                return Err(CliError::Validation(format!(
                    "sampler box touches the degenerate set: min <xi>_b {:.3e} is below gap_tol {:.3e}; \
                     shrink the box or move it away from {{xi = 0, b = 0}}",
                    sampler.min_gap_sq(&profile).sqrt(),
                    cfg.gap_tol
                )));
            }
        } else if scenario.ray.exit_interval.is_some() && !sampler.satisfies_cond2() {
            return Err(CliError::Validation(
                "escape analysis requires a one-sided xi1 interval (excluding 0)".into(),
            ));
        }
    }

    let points = collect_points(scenario, 1_000_000)?;
    let sample_dt = scenario
        .ray
        .sample_dt
        .unwrap_or(cfg.t_max / 1000.0)
        .max(cfg.t_max * 1e-6);
    let exit_interval = scenario
        .ray
        .exit_interval
        .map(|v| (v[0], v[1]))
        .or_else(|| {
            let s = profile.u_support();
            (profile.u_inf_norm() > 0.0).then_some((s.x1.0, s.x1.1))
        });

    let mut rays = Vec::new();
    let mut bbox = [(f64::INFINITY, f64::NEG_INFINITY); 4];
    let mut min_xi_b = f64::INFINITY;
    let mut max_abs_tau: f64 = 0.0;
    let mut failures = Vec::new();
    for (i, p0) in points.iter().enumerate() {
        match integrate(&profile, *p0, &cfg) {
            Ok(traj) => {
                let inv = invariant_report(&traj, &profile);
                for p in &traj.points {
                    let a = p.as_array();
                    for d in 0..4 {
                        bbox[d].0 = bbox[d].0.min(a[d]);
                        bbox[d].1 = bbox[d].1.max(a[d]);
                    }
                }
                min_xi_b = min_xi_b.min(inv.min_xi_b);
                max_abs_tau = max_abs_tau.max(traj.tau[0].abs());
                let exit = exit_interval.and_then(|iv| exit_time(&traj, iv));
                let verdict = if scenario.ray.classify_trapping
                    && cfg.hamiltonian == ModeId::Rossby
                    && profile.has_zero_flow()
                {
                    Some(
                        trapping_classify(
                            &profile,
                            *p0,
                            &cfg,
                            scenario.ray.tol_trap.unwrap_or(1e-6),
                        )
                        .map_err(|e| CliError::Numerical(e.to_string()))?,
                    )
                } else {
                    None
                };
                let csv = trajectory_csv(&traj, &profile, sample_dt, meta);
                write_text(&out.join(format!("ray_{i:04}.csv")), &csv)?;
                if traj.termination == Termination::DegenerateEvent {
                    failures.push(json!({"ray": i, "error": "degenerate event stop"}));
                }
                rays.push(json!({
                    "ray": i,
                    "initial": p0.as_array(),
                    "final": traj.points.last().unwrap().as_array(),
                    "t_end": traj.end_time(),
                    "termination": format!("{:?}", traj.termination),
                    "tau_drift": inv.tau_drift,
                    "xi1_drift": inv.xi1_drift,
                    "poincare_inv_drift": inv.poincare_inv_drift,
                    "min_xi_b": inv.min_xi_b,
                    "exit_time": exit,
                    "trapping": verdict.as_ref().map(verdict_json),
                }));
            }
            Err(e @ RayError::Degenerate { .. }) if !ensemble => {
                return Err(CliError::Numerical(e.to_string()))
            }
            Err(e) => failures.push(json!({"ray": i, "error": e.to_string()})),
        }
    }

    let gap_floor_bound = if cfg.hamiltonian == ModeId::Rossby {
        scenario
            .ray
            .eta
            .and_then(|eta| xi_b_lower_bound(&profile, max_abs_tau, eta).ok())
    } else {
        None
    };

    let any_failed = !failures.is_empty();
    let summary = json!({
        "meta": meta.json_value(),
        "rays": rays,
        "bbox": {
            "x1": [bbox[0].0, bbox[0].1],
            "x2": [bbox[1].0, bbox[1].1],
            "xi1": [bbox[2].0, bbox[2].1],
            "xi2": [bbox[3].0, bbox[3].1],
        },
        "min_xi_b": min_xi_b,
        "max_abs_tau": max_abs_tau,
        "gap_floor_bound": gap_floor_bound,
        "failures": failures,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(if any_failed { 3 } else { 0 })
}

pub fn cmd_mourre(scenario: &Scenario, out: &Path, meta: &Meta) -> Result<i32, CliError> {
    let profile = scenario.profile()?;
    let (sampler, count) = match scenario.initial_points()? {
        InitialData::Sampler { sampler, count } => (sampler, count),
        InitialData::Points(_) => {
            return Err(CliError::Validation(
                "mourre requires a sampler box (initial.x1/x2/xi1/xi2 + count + seed)".into(),
            ))
        }
    };
    if !sampler.satisfies_cond2() || sampler.lo[2] <= 0.0 {
        return Err(CliError::Validation(
            "the sampled set must have xi1 bounded below by a positive constant".into(),
        ));
    }
    let rep = mourre_bound(&profile, &sampler, count).map_err(|e| match e {
        RayError::Cond2Violation => CliError::Validation(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    })?;
    let value = json!({
        "meta": meta.json_value(),
        "n": rep.n,
        "inf_bracket": rep.inf_bracket,
        "xi1_min": rep.xi1_min,
        "gap_min": rep.gap_min,
        "gap_max": rep.gap_max,
        "theoretical": rep.theoretical,
        "ratio_at_gap_min": rep.ratio_at_gap_min,
        "satisfied": rep.inf_bracket >= rep.theoretical - 1e-12,
    });
    write_json(&out.join("mourre.json"), &value)?;
    Ok(0)
}

pub fn cmd_quantize_check(scenario: &Scenario, out: &Path, meta: &Meta) -> Result<i32, CliError> {
    let profile = scenario.profile()?;
    let gspec = scenario
        .grid
        .as_ref()
        .ok_or_else(|| CliError::Validation("quantize-check requires a [grid] section".into()))?;
    if gspec.eps_list.len() < 3 {
        return Err(CliError::Validation(
            "grid.eps_list needs at least three values for slope fits".into(),
        ));
    }
    let under_resolved = gspec.n < 16;
    let map_err = |e: wavetrace_core::quantize::QuantizeError| match e {
        wavetrace_core::quantize::QuantizeError::ProfileBoxMismatch(m) => {
            CliError::Validation(format!("profile/box mismatch: {m}"))
        }
        other => CliError::Numerical(other.to_string()),
    };

    let mut checks = Vec::new();
    let mut all_pass = true;
    let mut add = |name: &str, measured: serde_json::Value, window: &str, pass: bool| {
        checks.push(json!({"name": name, "measured": measured, "window": window, "pass": pass}));
        pass
    };

    // residual scaling
    let rep =
        diagonalization_scaling(&profile, gspec.n, gspec.len, &gspec.eps_list).map_err(map_err)?;
    all_pass &= add(
        "slope_diag",
        json!(rep.slope_diag),
        "[0.8, 1.2]",
        (0.8..=1.2).contains(&rep.slope_diag),
    );
    all_pass &= add(
        "slope_unit",
        json!(rep.slope_unit),
        "[0.8, 1.2]",
        (0.8..=1.2).contains(&rep.slope_unit),
    );
    all_pass &= add(
        "slope_corrected",
        json!(rep.slope_r2),
        "[1.7, 2.3]",
        (1.7..=2.3).contains(&rep.slope_r2),
    );

    // microlocalization decay
    let x0 = gspec
        .packet_x0
        .map(|v| (v[0], v[1]))
        .unwrap_or((gspec.len / 2.0, gspec.len / 2.0));
    let xi0 = gspec.packet_xi0.map(|v| (v[0], v[1])).unwrap_or((0.4, 0.0));
    let (dd, ww) = (1.2, 0.1);
    let chi = {
        let dx1 = ScalarSymbol::x1() - ScalarSymbol::real(x0.0 + dd);
        let dx2 = ScalarSymbol::x2() - ScalarSymbol::real(x0.1);
        ((dx1.powi(2) + dx2.powi(2)) * ScalarSymbol::real(-1.0 / (2.0 * ww * ww))).exp()
    };
    let mut vals = Vec::new();
    for (ei, &eps) in gspec.eps_list.iter().enumerate() {
        let grid = Grid::new(gspec.n, gspec.len, eps, scenario.momentum_map()?).map_err(map_err)?;
        let u = gaussian_packet(grid, x0, xi0).map_err(map_err)?;
        vals.push(microloc_test(&u, &chi, grid).map_err(map_err)?);
        if ei == 0 {
            // plot-ready packet profile at the largest eps
            let mut csv = meta.header_lines();
            csv.push_str("x1,x2,re,im,abs\n");
            for i1 in 0..grid.n {
                for i2 in 0..grid.n {
                    let z = u.values[i1 * grid.n + i2];
                    writeln!(
                        csv,
                        "{},{},{},{},{}",
                        fmt_f64(grid.x(i1)),
                        fmt_f64(grid.x(i2)),
                        fmt_f64(z.re),
                        fmt_f64(z.im),
                        fmt_f64(z.norm())
                    )
                    .unwrap();
                }
            }
            write_text(&out.join("packet_profile.csv"), &csv)?;
        }
    }
    let slope = wavetrace_core::linalg::loglog_slope(&gspec.eps_list, &vals);
    all_pass &= add("microloc_decay_slope", json!(slope), ">= 2", slope >= 2.0);

    // first-order packet expectation against the closed form
    let eps_hi = gspec.eps_list[0];
    let eps_mid = gspec.eps_list[1];
    let (e1, r1) =
        packet_d1_expectation(&profile, gspec.n, gspec.len, eps_hi, x0, xi0).map_err(map_err)?;
    let (e2, _) =
        packet_d1_expectation(&profile, gspec.n, gspec.len, eps_mid, x0, xi0).map_err(map_err)?;
    let shrink = (e2 - r1).abs() <= 0.9 * (e1 - r1).abs() + 1e-12;
    all_pass &= add(
        "packet_d1_agreement",
        json!({"reference": r1, "expectation": [e1, e2]}),
        "first-order shrink",
        shrink,
    );

    // propagator stability under a norm-1 perturbation
    let eps = gspec.eps_list[0];
    let t_max = gspec.t_max.unwrap_or(10.0);
    let grid = Grid::new(
        gspec.n,
        gspec.len,
        eps,
        wavetrace_core::quantize::MomentumMap::Raw,
    )
    .map_err(map_err)?;
    let a = build_a_exact(&profile, grid).map_err(map_err)?;
    let p = hermitian_perturbation(grid, 3, gspec.perturbation_seed.unwrap_or(7));
    let delta = eps.powi(4);
    let packet = gaussian_packet(grid, x0, xi0).map_err(map_err)?;
    let mut phi0 = GridFunction::zeros(grid, 3);
    phi0.values
        .rows_mut(0, grid.cells())
        .copy_from(&packet.values);
    phi0.normalize();
    let ts: Vec<f64> = (0..=20).map(|i| t_max * i as f64 / 20.0).collect();
    let mut a_tilde = a.clone();
    a_tilde.mat += &p.mat * Complex64::new(delta, 0.0);
    let cmp = compare_propagators(&a, &a_tilde, &phi0, &ts).map_err(map_err)?;
    let bound = delta * t_max * (1.0 + 1e-6);
    all_pass &= add(
        "propagator_stability",
        json!({"max_diff": cmp.max_diff, "bound": bound, "energy_inequality": cmp.bound_ok}),
        "max_diff <= eps^4 t_max",
        cmp.max_diff <= bound && cmp.bound_ok,
    );

    let value = json!({
        "meta": meta.json_value(),
        "n": gspec.n,
        "len": gspec.len,
        "eps_list": gspec.eps_list,
        "under_resolved": under_resolved,
        "residuals": {
            "r_diag": rep.r_diag,
            "r_unit": rep.r_unit,
            "r2": rep.r2,
        },
        "microloc_values": vals,
        "checks": checks,
        "all_pass": all_pass,
    });
    write_json(&out.join("quantize_check.json"), &value)?;
    Ok(if all_pass || under_resolved { 0 } else { 4 })
}

//! Hamiltonian bicharacteristic integration for the three scalar modes, with
//! invariant monitoring, escape and trapping diagnostics, the commutator
//! positivity bound, and ensemble propagation.
//!
//! The right-hand side is the exact gradient of the closed-form Hamiltonians.
//! A commonly printed variant of the Rossby momentum equation differs from
//! the exact gradient in its curvature term (it carries `<xi>_b` where the
//! gradient has `<xi>_b^2`); it is kept in [`rossby_rhs_printed`] for
//! cross-checks, and the tests surface the difference.

mod dopri5;

use rayon::prelude::*;
use thiserror::Error;

use crate::normal_form::{tau_pm, tau_r, ModeId, NormalFormError};
use crate::profile::Profile;
use crate::sampler::BoxSampler;
use crate::spectral::DEFAULT_GAP_TOL;
use crate::symbols::{xi_b, PhasePoint};

pub use dopri5::DenseSeg;
use dopri5::{Dopri5, State, StepResult};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RayError {
    #[error("step size underflow at t = {t:.6e}")]
    StepFailure { t: f64 },
    #[error("eigenvalue gap {gap:.3e} below floor {tol:.3e}")]
    Degenerate { gap: f64, tol: f64 },
    #[error("profile assumption violated: {0}")]
    ProfileAssumption(String),
    #[error("sampled point with xi1 <= 0 (one-sided momentum condition)")]
    Cond2Violation,
    #[error("operation requires a profile with zero flow")]
    RequiresZeroFlow,
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
}

/// Integration settings for one ray.
#[derive(Clone, Debug)]
pub struct RayConfig {
    pub rtol: f64,
    pub atol: f64,
    pub t_max: f64,
    pub max_steps: usize,
    pub hamiltonian: ModeId,
    pub gap_tol: f64,
}

impl Default for RayConfig {
    fn default() -> Self {
        RayConfig {
            rtol: 1e-10,
            atol: 1e-12,
            t_max: 100.0,
            max_steps: 10_000_000,
            hamiltonian: ModeId::Rossby,
            gap_tol: DEFAULT_GAP_TOL,
        }
    }
}

/// Why the integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TMaxReached,
    MaxSteps,
    /// `<xi>_b` dropped below the configured floor (event stop).
    DegenerateEvent,
}

/// Time-stamped phase points with logged invariants and dense output.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub mode: ModeId,
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// Hamiltonian value at each sample.
    pub tau: Vec<f64>,
    pub xi1: Vec<f64>,
    pub xi_b: Vec<f64>,
    /// `xi2^2 + b^2`, conserved along Poincare rays.
    pub poincare_inv: Vec<f64>,
    pub termination: Termination,
    dense: Vec<DenseSeg>,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Dense-output state at any time inside the integration range.
    pub fn sample(&self, t: f64) -> Option<PhasePoint> {
        if self.dense.is_empty() {
            if t == 0.0 {
                return self.points.first().copied();
            }
            return None;
        }
        if t < self.dense[0].t0 || t > self.end_time() {
            return None;
        }
        // binary search for the segment containing t
        let idx = match self
            .dense
            .binary_search_by(|seg| seg.t0.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let y = self.dense[idx].eval(t.min(self.dense[idx].t0 + self.dense[idx].h));
        Some(PhasePoint::new(y[0], y[1], y[2], y[3]))
    }
}

fn hamiltonian_value(profile: &Profile, p: PhasePoint, mode: ModeId) -> f64 {
    match mode {
        ModeId::Rossby => tau_r(profile, p).unwrap_or(f64::NAN),
        ModeId::PoincarePlus => tau_pm(profile, p, true),
        ModeId::PoincareMinus => tau_pm(profile, p, false),
    }
}

fn rhs_raw(profile: &Profile, y: &State, mode: ModeId, floor: f64) -> Option<State> {
    let (x1, x2, k1, k2) = (y[0], y[1], y[2], y[3]);
    let b = profile.b(x2);
    let r2 = k1 * k1 + k2 * k2 + b * b;
    let r = r2.sqrt();
    if r < floor {
        return None;
    }
    match mode {
        ModeId::PoincarePlus | ModeId::PoincareMinus => {
            let s = if mode == ModeId::PoincarePlus {
                1.0
            } else {
                -1.0
            };
            let bp = profile.bp(x2);
            Some([s * k1 / r, s * k2 / r, 0.0, -s * b * bp / r])
        }
        ModeId::Rossby => {
            let bp = profile.bp(x2);
            let bpp = profile.bpp(x2);
            let u = profile.u(x1, x2);
            let j = profile.u_jacobian(x1, x2);
            let r4 = r2 * r2;
            Some([
                bp * (r2 - 2.0 * k1 * k1) / r4 + u[0],
                -2.0 * bp * k1 * k2 / r4 + u[1],
                -(j[0][0] * k1 + j[1][0] * k2),
                k1 * (2.0 * b * bp * bp - bpp * r2) / r4 - (j[0][1] * k1 + j[1][1] * k2),
            ])
        }
    }
}

/// `(dx1, dx2, dxi1, dxi2)`: the exact symbol gradient of the mode
/// Hamiltonian, `(grad_xi tau, -grad_x tau)`.
pub fn hamiltonian_rhs(
    profile: &Profile,
    p: PhasePoint,
    mode: ModeId,
) -> Result<[f64; 4], RayError> {
    let floor = if mode == ModeId::Rossby {
        DEFAULT_GAP_TOL
    } else {
        f64::MIN_POSITIVE
    };
    rhs_raw(profile, &p.as_array(), mode, floor).ok_or(RayError::Degenerate {
        gap: xi_b(p, profile),
        tol: floor,
    })
}

/// The printed variant of the Rossby system, kept for comparison: identical
/// to the gradient except that the `xi2` equation carries `b'' <xi>_b`
/// instead of `b'' <xi>_b^2`.
pub fn rossby_rhs_printed(profile: &Profile, p: PhasePoint) -> Result<[f64; 4], RayError> {
    let g = hamiltonian_rhs(profile, p, ModeId::Rossby)?;
    let b = profile.b(p.x2);
    let bp = profile.bp(p.x2);
    let bpp = profile.bpp(p.x2);
    let r2 = p.xi1 * p.xi1 + p.xi2 * p.xi2 + b * b;
    let r = r2.sqrt();
    let j = profile.u_jacobian(p.x1, p.x2);
    Ok([
        g[0],
        g[1],
        g[2],
        p.xi1 * (2.0 * b * bp * bp - bpp * r) / (r2 * r2) - (j[0][1] * p.xi1 + j[1][1] * p.xi2),
    ])
}

/// Integrate one bicharacteristic with adaptive error control and dense
/// output, logging the conserved quantities at every accepted step.
pub fn integrate(
    profile: &Profile,
    p0: PhasePoint,
    cfg: &RayConfig,
) -> Result<Trajectory, RayError> {
    let mode = cfg.hamiltonian;
    let floor = if mode == ModeId::Rossby {
        cfg.gap_tol
    } else {
        f64::MIN_POSITIVE
    };
    if mode == ModeId::Rossby && xi_b(p0, profile) < cfg.gap_tol {
        return Err(RayError::Degenerate {
            gap: xi_b(p0, profile),
            tol: cfg.gap_tol,
        });
    }

    let f = |_t: f64, y: &State| rhs_raw(profile, y, mode, floor * 0.5);
    let mut solver = Dopri5::new(f, cfg.rtol, cfg.atol);

    let mut t = 0.0;
    let mut y = p0.as_array();
    let mut k = (solver.f)(t, &y).ok_or(RayError::Degenerate {
        gap: xi_b(p0, profile),
        tol: cfg.gap_tol,
    })?;
    solver.init_h(t, &y, &k, cfg.t_max);

    let mut traj = Trajectory {
        mode,
        times: vec![0.0],
        points: vec![p0],
        tau: vec![hamiltonian_value(profile, p0, mode)],
        xi1: vec![p0.xi1],
        xi_b: vec![xi_b(p0, profile)],
        poincare_inv: vec![p0.xi2 * p0.xi2 + profile.b(p0.x2).powi(2)],
        termination: Termination::TMaxReached,
        dense: Vec::new(),
    };

    let mut steps = 0usize;
    let mut rhs_failures = 0usize;
    while t < cfg.t_max {
        if steps >= cfg.max_steps {
            traj.termination = Termination::MaxSteps;
            break;
        }
        if solver.h() > cfg.t_max - t {
            solver.set_h(cfg.t_max - t);
        }
        if solver.h() < 1e-14 * t.abs().max(1.0) {
            return Err(RayError::StepFailure { t });
        }
        let k1 = k;
        match solver.try_step(t, &y, &k1, &mut k) {
            StepResult::Accepted(out) => {
                t = out.t_new;
                y = out.y_new;
                let p = PhasePoint::new(y[0], y[1], y[2], y[3]);
                let gap = xi_b(p, profile);
                traj.times.push(t);
                traj.points.push(p);
                traj.tau.push(hamiltonian_value(profile, p, mode));
                traj.xi1.push(p.xi1);
                traj.xi_b.push(gap);
                traj.poincare_inv
                    .push(p.xi2 * p.xi2 + profile.b(p.x2).powi(2));
                traj.dense.push(out.dense);
                steps += 1;
                rhs_failures = 0;
                if gap < cfg.gap_tol {
                    traj.termination = Termination::DegenerateEvent;
                    break;
                }
            }
            StepResult::Rejected => {
                steps += 1;
            }
            StepResult::RhsFailed => {
                rhs_failures += 1;
                steps += 1;
                if rhs_failures > 60 {
                    traj.termination = Termination::DegenerateEvent;
                    break;
                }
            }
        }
    }
    Ok(traj)
}

/// Maximal drift of each logged invariant from its initial value, plus the
/// minimum of `<xi>_b` along the ray.
#[derive(Clone, Copy, Debug)]
pub struct InvariantReport {
    pub tau_drift: f64,
    pub xi1_drift: f64,
    pub poincare_inv_drift: f64,
    pub min_xi_b: f64,
}

pub fn invariant_report(traj: &Trajectory, _profile: &Profile) -> InvariantReport {
    let drift = |v: &[f64]| {
        let v0 = v[0];
        v.iter().fold(0.0f64, |a, &x| a.max((x - v0).abs()))
    };
    InvariantReport {
        tau_drift: drift(&traj.tau),
        xi1_drift: drift(&traj.xi1),
        poincare_inv_drift: drift(&traj.poincare_inv),
        min_xi_b: traj.xi_b.iter().fold(f64::INFINITY, |a, &x| a.min(x)),
    }
}

/// A-priori floor for `<xi>_b` along Rossby rays:
/// `eta * min(1, eta / (|tau|_max + |u|_inf * eta))`.
///
/// `eta` must be admissible for the profile: wherever `|b| < eta`, the slope
/// `|b'|` stays away from zero (checked by a dense scan over the given `x2`
/// range). A profile whose `b` and `b'` vanish together shows a scanned
/// slope floor at the scan resolution; anything below `1e-3` is rejected.
pub fn xi_b_lower_bound_scanned(
    profile: &Profile,
    tau_max: f64,
    eta: f64,
    scan_range: (f64, f64),
) -> Result<f64, RayError> {
    assert!(eta > 0.0);
    let n = 200_001usize;
    let mut beta = f64::INFINITY;
    let mut region_seen = false;
    for i in 0..n {
        let x2 = scan_range.0 + (scan_range.1 - scan_range.0) * i as f64 / (n - 1) as f64;
        if profile.b(x2).abs() < eta {
            region_seen = true;
            beta = beta.min(profile.bp(x2).abs());
        }
    }
    if region_seen && beta < 1e-3 {
        return Err(RayError::ProfileAssumption(format!(
            "no admissible slope floor: min |b'| = {beta:.3e} inside |b| < {eta}"
        )));
    }
    let den = tau_max.abs() + profile.u_inf_norm() * eta;
    let inner = if den == 0.0 {
        1.0
    } else {
        (eta / den).min(1.0)
    };
    Ok(eta * inner)
}

/// [`xi_b_lower_bound_scanned`] with the default scan range `[-50, 50]`.
pub fn xi_b_lower_bound(profile: &Profile, tau_max: f64, eta: f64) -> Result<f64, RayError> {
    xi_b_lower_bound_scanned(profile, tau_max, eta, (-50.0, 50.0))
}

/// First time `x1(t)` leaves `[interval.0, interval.1]`, refined on the dense
/// output by bisection; `None` when the ray stays inside over its horizon.
pub fn exit_time(traj: &Trajectory, interval: (f64, f64)) -> Option<f64> {
    let (lo, hi) = interval;
    let outside = |x1: f64| x1 < lo || x1 > hi;
    if outside(traj.points[0].x1) {
        return Some(0.0);
    }
    for i in 1..traj.points.len() {
        if outside(traj.points[i].x1) {
            let seg = &traj.dense[i - 1];
            let mut a = traj.times[i - 1];
            let mut b = traj.times[i];
            for _ in 0..64 {
                if b - a <= 1e-9 {
                    break;
                }
                let m = 0.5 * (a + b);
                if outside(seg.eval(m)[0]) {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Some(0.5 * (a + b));
        }
    }
    None
}

/// Long-time fate of a Rossby ray over a zonal-free profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrappingVerdict {
    /// Transverse motion periodic and the period-mean of `dx1/dt` vanishes.
    Trapped {
        period: f64,
        mean_dx1: f64,
    },
    DriftRight {
        period: Option<f64>,
        mean_dx1: Option<f64>,
    },
    DriftLeft {
        period: Option<f64>,
        mean_dx1: Option<f64>,
    },
    FixedPoint,
    NoPeriodFound,
}

/// Classify a Rossby ray by detecting the first return of `(x2, xi2)` to its
/// initial value and averaging `dx1/dt` over that period.
///
/// Requires a profile with zero flow, for which `xi1` is invariant and the
/// transverse motion decouples.
pub fn trapping_classify(
    profile: &Profile,
    p0: PhasePoint,
    cfg: &RayConfig,
    tol_trap: f64,
) -> Result<TrappingVerdict, RayError> {
    if !profile.has_zero_flow() {
        return Err(RayError::RequiresZeroFlow);
    }
    let rhs0 = hamiltonian_rhs(profile, p0, ModeId::Rossby)?;
    let speed = rhs0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if speed < 1e-12 {
        return Ok(TrappingVerdict::FixedPoint);
    }
    // xi1 = 0 freezes the transverse plane: pure drift along x1.
    if p0.xi1 == 0.0 {
        return Ok(if rhs0[0] > 0.0 {
            TrappingVerdict::DriftRight {
                period: None,
                mean_dx1: None,
            }
        } else {
            TrappingVerdict::DriftLeft {
                period: None,
                mean_dx1: None,
            }
        });
    }

    let mut cfg = cfg.clone();
    cfg.hamiltonian = ModeId::Rossby;
    let traj = integrate(profile, p0, &cfg)?;

    let dist2 = |p: PhasePoint| {
        let a = p.x2 - p0.x2;
        let b = p.xi2 - p0.xi2;
        a * a + b * b
    };
    let delta = 1e-6;
    let leave2 = (100.0 * delta) * (100.0 * delta);
    let mut left = false;
    let n = traj.points.len();
    for i in 1..n.saturating_sub(1) {
        let d_prev = dist2(traj.points[i - 1]);
        let d_here = dist2(traj.points[i]);
        let d_next = dist2(traj.points[i + 1]);
        if !left {
            if d_here > leave2 {
                left = true;
            }
            continue;
        }
        if d_here <= d_prev && d_here <= d_next {
            // refine the local minimum on the dense output (golden section)
            let mut a = traj.times[i - 1];
            let mut b = traj.times[i + 1];
            let g = 0.5 * (5.0f64.sqrt() - 1.0);
            let eval_d = |t: f64| dist2(traj.sample(t).unwrap());
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let mut f1 = eval_d(x1);
            let mut f2 = eval_d(x2);
            for _ in 0..200 {
                if (b - a).abs() < 1e-13 * b.abs().max(1.0) {
                    break;
                }
                if f1 < f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = eval_d(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = eval_d(x2);
                }
            }
            let t_ret = 0.5 * (a + b);
            let p_ret = traj.sample(t_ret).unwrap();
            if dist2(p_ret) < delta * delta {
                // matching transverse velocity direction
                let rhs_ret = hamiltonian_rhs(profile, p_ret, ModeId::Rossby)?;
                if rhs_ret[1] * rhs0[1] + rhs_ret[3] * rhs0[3] > 0.0 {
                    let period = t_ret;
                    let mean = (p_ret.x1 - p0.x1) / period;
                    return Ok(if mean.abs() < tol_trap {
                        TrappingVerdict::Trapped {
                            period,
                            mean_dx1: mean,
                        }
                    } else if mean > 0.0 {
                        TrappingVerdict::DriftRight {
                            period: Some(period),
                            mean_dx1: Some(mean),
                        }
                    } else {
                        TrappingVerdict::DriftLeft {
                            period: Some(period),
                            mean_dx1: Some(mean),
                        }
                    });
                }
            }
        }
    }
    Ok(TrappingVerdict::NoPeriodFound)
}

/// Sampled commutator-positivity data on a compact set with one-sided `xi1`.
#[derive(Clone, Copy, Debug)]
pub struct MourreReport {
    /// Infimum over samples of the bracket `{tau_+, x1} = xi1/<xi>_b`.
    pub inf_bracket: f64,
    /// Minimum sampled `xi1` (the momentum floor of the set).
    pub xi1_min: f64,
    /// Minimum sampled `<xi>_b`.
    pub gap_min: f64,
    /// Maximum sampled `<xi>_b`.
    pub gap_max: f64,
    /// `xi1_min / gap_max`, the bound the bracket provably dominates.
    pub theoretical: f64,
    /// `xi1_min / gap_min`, the same ratio taken at the lower gap bound;
    /// recorded for reference, not asserted.
    pub ratio_at_gap_min: f64,
    pub n: usize,
}

/// Evaluate the bracket `{tau_+, x1}` over `n` sampled points and compare its
/// infimum with the ratio bounds.
pub fn mourre_bound(
    profile: &Profile,
    sampler: &BoxSampler,
    n: usize,
) -> Result<MourreReport, RayError> {
    use crate::symbols::poisson_bracket;
    let tau = crate::normal_form::tau_pm_symbol(profile, true);
    let x1 = crate::symbols::ScalarSymbol::x1();
    let mut inf_bracket = f64::INFINITY;
    let mut xi1_min = f64::INFINITY;
    let mut gap_min = f64::INFINITY;
    let mut gap_max: f64 = 0.0;
    for i in 0..n {
        let p = sampler.point_at(i as u64);
        if p.xi1 <= 0.0 {
            return Err(RayError::Cond2Violation);
        }
        let br = poisson_bracket(&tau, &x1, p).map_err(NormalFormError::from)?;
        inf_bracket = inf_bracket.min(br.re);
        xi1_min = xi1_min.min(p.xi1);
        let g = xi_b(p, profile);
        gap_min = gap_min.min(g);
        gap_max = gap_max.max(g);
    }
    let theoretical = xi1_min / gap_max;
    assert!(
        inf_bracket >= theoretical - 1e-12,
        "sampled bracket infimum {inf_bracket} under the ratio bound {theoretical}"
    );
    Ok(MourreReport {
        inf_bracket,
        xi1_min,
        gap_min,
        gap_max,
        theoretical,
        ratio_at_gap_min: xi1_min / gap_min,
        n,
    })
}

/// Ensemble results: final points, per-coordinate bounding boxes over the
/// whole time range, and the global minimum of `<xi>_b`.
#[derive(Clone, Debug)]
pub struct EnsembleSummary {
    pub final_points: Vec<Option<PhasePoint>>,
    /// `(min, max)` per coordinate `(x1, x2, xi1, xi2)` over all rays/times.
    pub bbox: [(f64, f64); 4],
    pub min_xi_b: f64,
    pub max_abs_tau: f64,
    /// Worst invariant drifts across converged rays.
    pub max_tau_drift: f64,
    pub max_xi1_drift: f64,
    /// Per-ray failures, indexed by ray.
    pub failures: Vec<(usize, String)>,
}

/// Integrate `n` sampled rays (in parallel) and fold their envelopes.
/// Per-ray failures are collected without aborting the ensemble.
pub fn ensemble_evolve(
    profile: &Profile,
    sampler: &BoxSampler,
    n: usize,
    cfg: &RayConfig,
) -> EnsembleSummary {
    let results: Vec<Result<(Trajectory, InvariantReport), RayError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p0 = sampler.point_at(i as u64);
            integrate(profile, p0, cfg).map(|t| {
                let inv = invariant_report(&t, profile);
                (t, inv)
            })
        })
        .collect();

    let mut bbox = [(f64::INFINITY, f64::NEG_INFINITY); 4];
    let mut min_xi_b = f64::INFINITY;
    let mut max_abs_tau: f64 = 0.0;
    let mut max_tau_drift: f64 = 0.0;
    let mut max_xi1_drift: f64 = 0.0;
    let mut final_points = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok((traj, inv)) => {
                for p in &traj.points {
                    let a = p.as_array();
                    for d in 0..4 {
                        bbox[d].0 = bbox[d].0.min(a[d]);
                        bbox[d].1 = bbox[d].1.max(a[d]);
                    }
                }
                min_xi_b = min_xi_b.min(inv.min_xi_b);
                max_abs_tau = max_abs_tau.max(traj.tau[0].abs());
                max_tau_drift = max_tau_drift.max(inv.tau_drift);
                max_xi1_drift = max_xi1_drift.max(inv.xi1_drift);
                final_points.push(Some(*traj.points.last().unwrap()));
                if traj.termination == Termination::DegenerateEvent {
                    failures.push((i, "degenerate event stop".to_string()));
                }
            }
            Err(e) => {
                final_points.push(None);
                failures.push((i, e.to_string()));
            }
        }
    }
    EnsembleSummary {
        final_points,
        bbox,
        min_xi_b,
        max_abs_tau,
        max_tau_drift,
        max_xi1_drift,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::FlowSpec;
    use crate::symbols::gradient;

    fn lin() -> Profile {
        Profile::linear_b(1.0, FlowSpec::Zero)
    }

    fn bumpy() -> Profile {
        Profile::linear_b(
            1.0,
            FlowSpec::Bump {
                center: (0.0, 0.0),
                radius: 1.0,
                amplitude: 0.3,
            },
        )
    }

    #[test]
    fn rossby_rhs_zero_xi1_is_pure_drift() {
        let p = PhasePoint::new(0.0, 0.7, 0.0, 0.9);
        let rhs = hamiltonian_rhs(&lin(), p, ModeId::Rossby).unwrap();
        let r2 = 0.9f64 * 0.9 + 0.7 * 0.7;
        assert!((rhs[0] - 1.0 / r2).abs() <= 1e-15);
        assert_eq!(rhs[1], 0.0);
        assert_eq!(rhs[2], 0.0);
        assert_eq!(rhs[3], 0.0);
    }

    #[test]
    fn poincare_rhs_xi1_frozen() {
        let prof = bumpy();
        for i in 0..50 {
            let p = PhasePoint::new(
                -1.0 + 0.04 * i as f64,
                0.5 - 0.02 * i as f64,
                0.3 + 0.01 * i as f64,
                -0.4 + 0.02 * i as f64,
            );
            let rhs = hamiltonian_rhs(&prof, p, ModeId::PoincarePlus).unwrap();
            assert_eq!(rhs[2], 0.0);
        }
    }

    #[test]
    fn rhs_matches_symbol_gradients() {
        use crate::normal_form::{tau_pm_symbol, tau_r_symbol};
        let prof = bumpy();
        let pts = [
            PhasePoint::new(0.3, 0.4, 1.0, -0.6),
            PhasePoint::new(-0.5, 0.9, 0.7, 0.2),
            PhasePoint::new(0.0, -0.3, -1.2, 0.8),
        ];
        for p in pts {
            for (mode, sym) in [
                (ModeId::Rossby, tau_r_symbol(&prof)),
                (ModeId::PoincarePlus, tau_pm_symbol(&prof, true)),
                (ModeId::PoincareMinus, tau_pm_symbol(&prof, false)),
            ] {
                let rhs = hamiltonian_rhs(&prof, p, mode).unwrap();
                let (gx, gxi) = gradient(&sym, p).unwrap();
                let expect = [gxi[0].re, gxi[1].re, -gx[0].re, -gx[1].re];
                for i in 0..4 {
                    assert!(
                        (rhs[i] - expect[i]).abs() <= 1e-12 * (1.0 + expect[i].abs()),
                        "mode {mode:?} comp {i}: {} vs {}",
                        rhs[i],
                        expect[i]
                    );
                }
            }
        }
    }

    #[test]
    fn printed_variant_agrees_except_curvature_term() {
        // With linear b (b'' = 0) both forms coincide; with curved b they
        // differ exactly by xi1 b'' (r^2 - r)/r^4.
        let p = PhasePoint::new(0.2, 0.4, 0.8, -0.3);
        let lin_g = hamiltonian_rhs(&lin(), p, ModeId::Rossby).unwrap();
        let lin_p = rossby_rhs_printed(&lin(), p).unwrap();
        for i in 0..4 {
            assert_eq!(lin_g[i], lin_p[i]);
        }
        let curved = Profile::shifted_sine_b(2.0, 1.0, 1.0, FlowSpec::Zero);
        let g = hamiltonian_rhs(&curved, p, ModeId::Rossby).unwrap();
        let pr = rossby_rhs_printed(&curved, p).unwrap();
        for i in 0..3 {
            assert_eq!(g[i], pr[i]);
        }
        let b = curved.b(p.x2);
        let bpp = curved.bpp(p.x2);
        let r2 = p.xi1 * p.xi1 + p.xi2 * p.xi2 + b * b;
        let r = r2.sqrt();
        let expected_diff = p.xi1 * bpp * (r2 - r) / (r2 * r2);
        assert!(((pr[3] - g[3]) - expected_diff).abs() <= 1e-14);
        assert!((pr[3] - g[3]).abs() > 1e-3, "difference should be visible");
    }

    #[test]
    fn rhs_matches_fd_gradient_of_hamiltonian() {
        let prof = bumpy();
        let p = PhasePoint::new(0.25, -0.35, 0.9, 0.55);
        let h = 1e-6;
        let tau = |q: PhasePoint| tau_r(&prof, q).unwrap();
        let rhs = hamiltonian_rhs(&prof, p, ModeId::Rossby).unwrap();
        let fd = [
            (tau(PhasePoint::new(p.x1, p.x2, p.xi1 + h, p.xi2))
                - tau(PhasePoint::new(p.x1, p.x2, p.xi1 - h, p.xi2)))
                / (2.0 * h),
            (tau(PhasePoint::new(p.x1, p.x2, p.xi1, p.xi2 + h))
                - tau(PhasePoint::new(p.x1, p.x2, p.xi1, p.xi2 - h)))
                / (2.0 * h),
            -(tau(PhasePoint::new(p.x1 + h, p.x2, p.xi1, p.xi2))
                - tau(PhasePoint::new(p.x1 - h, p.x2, p.xi1, p.xi2)))
                / (2.0 * h),
            -(tau(PhasePoint::new(p.x1, p.x2 + h, p.xi1, p.xi2))
                - tau(PhasePoint::new(p.x1, p.x2 - h, p.xi1, p.xi2)))
                / (2.0 * h),
        ];
        for i in 0..4 {
            assert!((rhs[i] - fd[i]).abs() <= 1e-6 * (1.0 + fd[i].abs()));
        }
    }

    #[test]
    fn trivial_rossby_ray_linear_in_time() {
        // b = x2, xi1 = 0: transverse state frozen, x1(t) = t b'/<xi>_b^2 = t/2.
        let p0 = PhasePoint::new(0.0, 1.0, 0.0, 1.0);
        let cfg = RayConfig {
            t_max: 5.0,
            ..Default::default()
        };
        let traj = integrate(&lin(), p0, &cfg).unwrap();
        assert_eq!(traj.termination, Termination::TMaxReached);
        let p_end = traj.points.last().unwrap();
        assert!((p_end.x1 - 5.0 / 2.0).abs() <= 1e-9, "x1 = {}", p_end.x1);
        assert_eq!(p_end.x2, 1.0);
        assert_eq!(p_end.xi2, 1.0);
    }

    #[test]
    fn poincare_ray_constant_velocity() {
        // b = x2 at x2 = 4: <xi>_b = 5 with xi = (3, 0): dx1/dt = 3/5.
        let p0 = PhasePoint::new(0.0, 4.0, 3.0, 0.0);
        let cfg = RayConfig {
            t_max: 5.0,
            hamiltonian: ModeId::PoincarePlus,
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let traj = integrate(&lin(), p0, &cfg).unwrap();
        let p_end = traj.points.last().unwrap();
        assert!((p_end.x1 - 3.0).abs() <= 1e-8);
        let inv = invariant_report(&traj, &lin());
        assert!(inv.xi1_drift == 0.0);
        assert!(inv.poincare_inv_drift <= 1e-8);
        assert!(inv.tau_drift <= 1e-8);
    }

    #[test]
    fn integrate_matches_fixed_step_rk4_reference() {
        let prof = bumpy();
        let p0 = PhasePoint::new(-0.8, 0.4, 1.1, -0.2);
        let cfg = RayConfig {
            t_max: 10.0,
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let traj = integrate(&prof, p0, &cfg).unwrap();
        // reference: classical RK4 with h = 1e-5
        use dopri5::axpy;
        let f = |y: &State| rhs_raw(&prof, y, ModeId::Rossby, 1e-9).unwrap();
        let mut y = p0.as_array();
        let h: f64 = 1e-5;
        let nsteps = (10.0 / h).round() as usize;
        for _ in 0..nsteps {
            let k1 = f(&y);
            let k2 = f(&axpy(&y, 0.5 * h, &k1));
            let k3 = f(&axpy(&y, 0.5 * h, &k2));
            let k4 = f(&axpy(&y, h, &k3));
            for i in 0..4 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let p_end = traj.points.last().unwrap().as_array();
        for i in 0..4 {
            assert!(
                (p_end[i] - y[i]).abs() <= 1e-7,
                "component {i}: {} vs {}",
                p_end[i],
                y[i]
            );
        }
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let prof = bumpy();
        let p0 = PhasePoint::new(-0.6, 0.3, 1.0, 0.4);
        let cfg = RayConfig {
            t_max: 50.0,
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let fwd = integrate(&prof, p0, &cfg).unwrap();
        let p_end = *fwd.points.last().unwrap();
        // integrate the reversed field from the endpoint
        let rev_prof = prof.clone();
        let f = move |_t: f64, y: &State| {
            rhs_raw(&rev_prof, y, ModeId::Rossby, 1e-9).map(|k| [-k[0], -k[1], -k[2], -k[3]])
        };
        let mut solver = Dopri5::new(f, 1e-11, 1e-13);
        let mut t = 0.0;
        let mut y = p_end.as_array();
        let mut k = (solver.f)(t, &y).unwrap();
        solver.init_h(t, &y, &k, 50.0);
        while t < 50.0 {
            if solver.h() > 50.0 - t {
                solver.set_h(50.0 - t);
            }
            let k1 = k;
            match solver.try_step(t, &y, &k1, &mut k) {
                StepResult::Accepted(out) => {
                    t = out.t_new;
                    y = out.y_new;
                }
                StepResult::Rejected => {}
                StepResult::RhsFailed => panic!("rhs failed"),
            }
        }
        let back = PhasePoint::new(y[0], y[1], y[2], y[3]);
        let d = ((back.x1 - p0.x1).powi(2)
            + (back.x2 - p0.x2).powi(2)
            + (back.xi1 - p0.xi1).powi(2)
            + (back.xi2 - p0.xi2).powi(2))
        .sqrt();
        assert!(d <= 1e-6, "time reversal defect {d}");
    }

    #[test]
    fn exit_time_cases() {
        // boundary start
        let p0 = PhasePoint::new(1.0, 4.0, 3.0, 0.0);
        let cfg = RayConfig {
            t_max: 10.0,
            hamiltonian: ModeId::PoincarePlus,
            ..Default::default()
        };
        let traj = integrate(&lin(), p0, &cfg).unwrap();
        // starting exactly on the closed interval boundary counts as inside;
        // a ray from strictly outside exits at once.
        let t0 = exit_time(&traj, (-1.0, 0.5)).unwrap();
        assert_eq!(t0, 0.0);

        // interior start with positive xi1: exit = (hi - x1_0) <xi>_b / xi1
        let p0 = PhasePoint::new(0.0, 4.0, 3.0, 0.0);
        let traj = integrate(&lin(), p0, &cfg).unwrap();
        let measured = exit_time(&traj, (-1.0, 1.0)).unwrap();
        let predicted = (1.0 - 0.0) * 5.0 / 3.0;
        assert!((measured - predicted).abs() <= 1e-6);

        // trivial Rossby drift: exit = (hi - x1_0) <xi>_b^2 / b'
        let p0 = PhasePoint::new(0.0, 1.0, 0.0, 1.0);
        let cfgr = RayConfig {
            t_max: 20.0,
            ..Default::default()
        };
        let traj = integrate(&lin(), p0, &cfgr).unwrap();
        let measured = exit_time(&traj, (-1.0, 2.0)).unwrap();
        assert!((measured - 2.0 * 2.0 / 1.0).abs() <= 1e-6);

        // never exits within horizon
        let traj = integrate(
            &lin(),
            p0,
            &RayConfig {
                t_max: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(exit_time(&traj, (-100.0, 100.0)).is_none());
    }

    #[test]
    fn trapping_fixed_point_and_drift() {
        // b = sin-like with b'(x2)=0 at the crest: use shifted sine, x2 = pi/2.
        let prof = Profile::shifted_sine_b(0.0, 1.0, 1.0, FlowSpec::Zero);
        let crest = PhasePoint::new(0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        let cfg = RayConfig {
            t_max: 100.0,
            ..Default::default()
        };
        assert_eq!(
            trapping_classify(&prof, crest, &cfg, 1e-6).unwrap(),
            TrappingVerdict::FixedPoint
        );
        // xi1 = 0 with b' > 0: uniform drift right
        let drift = PhasePoint::new(0.0, 0.0, 0.0, 1.0);
        match trapping_classify(&prof, drift, &cfg, 1e-6).unwrap() {
            TrappingVerdict::DriftRight { period: None, .. } => {}
            v => panic!("expected pure drift, got {v:?}"),
        }
    }

    #[test]
    fn trapping_matches_long_horizon_growth() {
        // b = x2: transverse orbits are circles; the drift rate is
        // (r^2 - 2 xi1^2)/r^4, so r^2 = 2 xi1^2 is trapped.
        let prof = lin();
        let cfg = RayConfig {
            t_max: 500.0,
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        // trapped: xi1 = 1, x2^2 + xi2^2 = 1 -> r^2 = 2
        let p_trap = PhasePoint::new(0.0, 0.6, 1.0, 0.8);
        match trapping_classify(&prof, p_trap, &cfg, 1e-6).unwrap() {
            TrappingVerdict::Trapped { period, mean_dx1 } => {
                // uniform circular motion: period = pi r^4 / xi1
                assert!((period - std::f64::consts::PI * 4.0).abs() < 1e-6);
                assert!(mean_dx1.abs() < 1e-9);
            }
            v => panic!("expected trapped, got {v:?}"),
        }
        // drifting: the rate is (r^2 - 2 xi1^2)/r^4, so r^2 = 1.25 < 2 xi1^2
        // drifts left
        let p_drift = PhasePoint::new(0.0, 0.3, 1.0, 0.4);
        match trapping_classify(&prof, p_drift, &cfg, 1e-6).unwrap() {
            TrappingVerdict::DriftLeft {
                period: Some(_),
                mean_dx1: Some(m),
            } => {
                // brute-force long horizon: displacement grows linearly
                let traj = integrate(
                    &prof,
                    p_drift,
                    &RayConfig {
                        t_max: 1000.0,
                        ..cfg.clone()
                    },
                )
                .unwrap();
                let dx = traj.points.last().unwrap().x1 - p_drift.x1;
                assert!(
                    (dx / 1000.0 - m).abs() < 1e-6,
                    "rate {m} vs {}",
                    dx / 1000.0
                );
            }
            v => panic!("expected drift left, got {v:?}"),
        }
        // reversed drift for r^2 > 2 xi1^2
        let p_right = PhasePoint::new(0.0, 1.4, 1.0, 0.9);
        match trapping_classify(&prof, p_right, &cfg, 1e-6).unwrap() {
            TrappingVerdict::DriftRight { .. } => {}
            v => panic!("expected drift right, got {v:?}"),
        }
    }

    #[test]
    fn trapping_requires_zero_flow() {
        let p0 = PhasePoint::new(0.0, 0.5, 1.0, 0.0);
        let cfg = RayConfig::default();
        assert!(matches!(
            trapping_classify(&bumpy(), p0, &cfg, 1e-6),
            Err(RayError::RequiresZeroFlow)
        ));
    }

    #[test]
    fn lower_bound_formula_and_validation() {
        // b = x2: eta = 1 admissible (b' = 1), u = 0, tau_max = 1 -> bound 1
        let b = xi_b_lower_bound(&lin(), 1.0, 1.0).unwrap();
        assert_eq!(b, 1.0);
        // u_inf = 1, eta = 1, tau_max = 0 -> eta * min(1, 1/(0 + 1)) = 1
        let prof_u = Profile::linear_b(
            1.0,
            FlowSpec::Bump {
                center: (0.0, 0.0),
                radius: 1.0,
                amplitude: 1.0,
            },
        );
        assert_eq!(xi_b_lower_bound(&prof_u, 0.0, 1.0).unwrap(), 1.0);
        // 1 + sin touches zero where b' = 0 too: no admissible beta
        let bad = Profile::shifted_sine_b(1.0, 1.0, 1.0, FlowSpec::Zero);
        assert!(matches!(
            xi_b_lower_bound(&bad, 1.0, 0.5),
            Err(RayError::ProfileAssumption(_))
        ));
    }

    #[test]
    fn rossby_rays_respect_lower_bound() {
        let prof = lin();
        let sampler = BoxSampler::new([-2.0, -0.5, 1.0, -0.5], [2.0, 0.5, 1.5, 0.5], 21);
        let cfg = RayConfig {
            t_max: 200.0,
            ..Default::default()
        };
        let summary = ensemble_evolve(&prof, &sampler, 20, &cfg);
        assert!(summary.failures.is_empty());
        let bound = xi_b_lower_bound(&prof, summary.max_abs_tau, 1.0).unwrap();
        assert!(
            summary.min_xi_b >= bound - 1e-9,
            "min <xi>_b {} under bound {}",
            summary.min_xi_b,
            bound
        );
    }

    #[test]
    fn mourre_single_point_and_flat_set() {
        // single point xi = (3, 0), b = 4: bracket = 3/5
        let prof = lin();
        let s = BoxSampler::new([0.0, 4.0, 3.0, 0.0], [0.0, 4.0, 3.0, 0.0], 0);
        let rep = mourre_bound(&prof, &s, 1).unwrap();
        assert!((rep.inf_bracket - 0.6).abs() <= 1e-15);
        // xi2 = 0, b = 0 everywhere: bracket = 1 identically
        let s2 = BoxSampler::new([-1.0, 0.0, 0.5, 0.0], [1.0, 0.0, 2.0, 0.0], 1);
        let rep2 = mourre_bound(&prof, &s2, 500).unwrap();
        assert!((rep2.inf_bracket - 1.0).abs() <= 1e-14);
        assert!(rep2.inf_bracket >= rep2.theoretical - 1e-12);
    }

    #[test]
    fn mourre_rejects_wrong_sided_momentum() {
        let prof = lin();
        let s = BoxSampler::new([-1.0, -1.0, -1.0, -1.0], [1.0, 1.0, 1.0, 1.0], 3);
        assert!(matches!(
            mourre_bound(&prof, &s, 100),
            Err(RayError::Cond2Violation)
        ));
    }

    #[test]
    fn mourre_inf_matches_dense_scan() {
        let prof = Profile::shifted_sine_b(2.0, 1.0, 1.0, FlowSpec::Zero);
        let s = BoxSampler::new([-1.0, -1.0, 1.0, -1.0], [1.0, 1.0, 2.0, 1.0], 5);
        let rep = mourre_bound(&prof, &s, 4000).unwrap();
        let mut brute = f64::INFINITY;
        let m = 40;
        for a in 0..m {
            for bi in 0..m {
                for ci in 0..m {
                    let x2 = -1.0 + 2.0 * a as f64 / (m - 1) as f64;
                    let k1 = 1.0 + 1.0 * bi as f64 / (m - 1) as f64;
                    let k2 = -1.0 + 2.0 * ci as f64 / (m - 1) as f64;
                    let p = PhasePoint::new(0.0, x2, k1, k2);
                    brute = brute.min(k1 / xi_b(p, &prof));
                }
            }
        }
        assert!(
            (rep.inf_bracket - brute).abs() < 2e-2,
            "{} vs {}",
            rep.inf_bracket,
            brute
        );
    }

    #[test]
    fn poincare_ensemble_keeps_xi1_box() {
        let prof = bumpy();
        let sampler = BoxSampler::new([-0.5, -1.0, 0.5, -1.0], [0.5, 1.0, 1.5, 1.0], 9);
        let cfg = RayConfig {
            t_max: 20.0,
            hamiltonian: ModeId::PoincarePlus,
            ..Default::default()
        };
        let summary = ensemble_evolve(&prof, &sampler, 50, &cfg);
        assert!(summary.failures.is_empty());
        assert!(summary.bbox[2].0 >= 0.5 - 1e-10);
        assert!(summary.bbox[2].1 <= 1.5 + 1e-10);
    }

    #[test]
    fn ensemble_collects_failures_without_aborting() {
        // a wide gap floor splits the sampled starts into valid and rejected
        // ones; the ensemble reports both.
        let prof = lin();
        let sampler = BoxSampler::new([-0.1, 0.0, 0.0, 0.1], [0.1, 0.0, 0.0, 1.0], 13);
        let cfg = RayConfig {
            t_max: 1.0,
            gap_tol: 0.5,
            ..Default::default()
        };
        let summary = ensemble_evolve(&prof, &sampler, 40, &cfg);
        assert!(
            !summary.failures.is_empty(),
            "expected some degenerate starts"
        );
        let ok = summary.final_points.iter().filter(|p| p.is_some()).count();
        assert!(ok > 0, "expected some rays to integrate");
        assert_eq!(ok + summary.failures.len(), 40);
    }

    #[test]
    fn degenerate_start_is_rejected() {
        let p0 = PhasePoint::new(0.0, 0.0, 0.0, 1e-9);
        assert!(matches!(
            integrate(&lin(), p0, &RayConfig::default()),
            Err(RayError::Degenerate { .. })
        ));
    }
}

//! Embedded explicit Runge-Kutta 5(4) pair (Dormand-Prince) over `[f64; 4]`
//! with PI step-size control and 4th-order dense output.

pub type State = [f64; 4];

pub fn axpy(y: &State, a: f64, x: &State) -> State {
    [
        y[0] + a * x[0],
        y[1] + a * x[1],
        y[2] + a * x[2],
        y[3] + a * x[3],
    ]
}

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;
// b - bhat (5th minus embedded 4th order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Interpolation coefficients stored per accepted step.
#[derive(Clone, Debug)]
pub struct DenseSeg {
    pub t0: f64,
    pub h: f64,
    cont: [State; 5],
}

impl DenseSeg {
    /// Interpolated state at `t` inside `[t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> State {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = self.cont[0][i]
                + th * (self.cont[1][i]
                    + th1 * (self.cont[2][i] + th * (self.cont[3][i] + th1 * self.cont[4][i])));
        }
        out
    }
}

pub struct StepOutput {
    pub t_new: f64,
    pub y_new: State,
    pub dense: DenseSeg,
}

/// One adaptive integration attempt; `f` may fail (leaves the domain), which
/// is treated like a rejected step by the caller.
pub struct Dopri5<F> {
    pub f: F,
    pub rtol: f64,
    pub atol: f64,
    h: f64,
    facold: f64,
}

pub enum StepResult {
    Accepted(StepOutput),
    Rejected,
    /// The right-hand side failed inside the step.
    RhsFailed,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &State) -> Option<State>,
{
    pub fn new(f: F, rtol: f64, atol: f64) -> Self {
        Dopri5 {
            f,
            rtol,
            atol,
            h: 0.0,
            facold: 1e-4,
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn set_h(&mut self, h: f64) {
        self.h = h;
    }

    /// Conventional starting step size from the scaled derivative magnitude.
    pub fn init_h(&mut self, t0: f64, y0: &State, k0: &State, t_end: f64) {
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..4 {
            let sc = self.atol + self.rtol * y0[i].abs();
            d0 = d0.max((y0[i] / sc).abs());
            d1 = d1.max((k0[i] / sc).abs());
        }
        let mut h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h = h.min((t_end - t0).abs()).max(1e-12);
        self.h = h;
    }

    /// Attempt one step from `(t, y)` with derivative `k1 = f(t, y)` already
    /// evaluated (FSAL). On success returns the new derivative through
    /// `k_last`.
    pub fn try_step(&mut self, t: f64, y: &State, k1: &State, k_last: &mut State) -> StepResult {
        let h = self.h;
        macro_rules! stage {
            ($ts:expr, $ys:expr) => {
                match (self.f)($ts, &$ys) {
                    Some(k) => k,
                    None => {
                        self.h *= 0.5;
                        return StepResult::RhsFailed;
                    }
                }
            };
        }
        let y2 = axpy(y, h * A21, k1);
        let k2 = stage!(t + C2 * h, y2);
        let mut ys = axpy(y, h * A31, k1);
        ys = axpy(&ys, h * A32, &k2);
        let k3 = stage!(t + C3 * h, ys);
        let mut ys = axpy(y, h * A41, k1);
        ys = axpy(&ys, h * A42, &k2);
        ys = axpy(&ys, h * A43, &k3);
        let k4 = stage!(t + C4 * h, ys);
        let mut ys = axpy(y, h * A51, k1);
        ys = axpy(&ys, h * A52, &k2);
        ys = axpy(&ys, h * A53, &k3);
        ys = axpy(&ys, h * A54, &k4);
        let k5 = stage!(t + C5 * h, ys);
        let mut ys = axpy(y, h * A61, k1);
        ys = axpy(&ys, h * A62, &k2);
        ys = axpy(&ys, h * A63, &k3);
        ys = axpy(&ys, h * A64, &k4);
        ys = axpy(&ys, h * A65, &k5);
        let k6 = stage!(t + h, ys);
        let mut y_new = axpy(y, h * A71, k1);
        y_new = axpy(&y_new, h * A73, &k3);
        y_new = axpy(&y_new, h * A74, &k4);
        y_new = axpy(&y_new, h * A75, &k5);
        y_new = axpy(&y_new, h * A76, &k6);
        let k7 = stage!(t + h, y_new);

        let mut err: f64 = 0.0;
        for i in 0..4 {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / 4.0).sqrt();

        // PI controller (classic coefficients for this pair)
        let beta = 0.04;
        let expo1 = 0.2 - beta * 0.75;
        let safe = 0.9;
        let facc1 = 1.0 / 0.2;
        let facc2 = 1.0 / 10.0;
        let fac11 = err.powf(expo1);

        if err <= 1.0 {
            let fac = (fac11 / self.facold.powf(beta) / safe).clamp(facc2, facc1);
            let h_new = h / fac;
            self.facold = err.max(1e-4);
            let ydiff = [
                y_new[0] - y[0],
                y_new[1] - y[1],
                y_new[2] - y[2],
                y_new[3] - y[3],
            ];
            let mut cont = [[0.0; 4]; 5];
            for i in 0..4 {
                cont[0][i] = y[i];
                cont[1][i] = ydiff[i];
                cont[2][i] = h * k1[i] - ydiff[i];
                cont[3][i] = ydiff[i] - h * k7[i] - cont[2][i];
                cont[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let out = StepOutput {
                t_new: t + h,
                y_new,
                dense: DenseSeg { t0: t, h, cont },
            };
            self.h = h_new;
            *k_last = k7;
            StepResult::Accepted(out)
        } else {
            self.h = h / (fac11 / safe).min(facc1);
            StepResult::Rejected
        }
    }
}

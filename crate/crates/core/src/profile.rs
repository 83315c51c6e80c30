//! Background profiles: the Coriolis amplitude `b(x2)` with its first two
//! derivatives and the stationary flow `u(x)` with its Jacobian.
//!
//! A profile is immutable after construction and cheap to clone (shared
//! internally). The CLI catalogue lives in [`Profile::linear_b`],
//! [`Profile::shifted_sine_b`], [`Profile::tanh_b`] combined with
//! [`FlowSpec::Zero`] / [`FlowSpec::Bump`]; custom closures are accepted
//! through [`Profile::custom`].

use std::fmt;
use std::sync::Arc;

/// Axis-aligned box outside which the flow vanishes identically.
/// Infinite extents are allowed for flows that are not compactly supported
/// in one direction (library-level custom profiles only).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportBox {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl SupportBox {
    pub fn empty() -> Self {
        SupportBox {
            x1: (0.0, 0.0),
            x2: (0.0, 0.0),
        }
    }

    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        x1 >= self.x1.0 && x1 <= self.x1.1 && x2 >= self.x2.0 && x2 <= self.x2.1
    }
}

/// Periodicity of `b` along `x2`, used by the grid module to decide whether a
/// profile fits on a periodic box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Periodicity {
    /// Constant in `x2`: compatible with any box length.
    Any,
    /// Periodic with the given fundamental period.
    Period(f64),
    /// Not periodic (ray-tracing only).
    None,
}

type BFn = dyn Fn(f64) -> f64 + Send + Sync;
type UFn = dyn Fn(f64, f64) -> ([f64; 2], [[f64; 2]; 2]) + Send + Sync;

pub(crate) struct ProfileData {
    pub id: String,
    pub b: Box<BFn>,
    pub bp: Box<BFn>,
    pub bpp: Box<BFn>,
    /// Flow value and Jacobian `J[i][j] = d u_i / d x_{j+1}`.
    pub u: Box<UFn>,
    pub u_support: SupportBox,
    pub u_inf: f64,
    pub b_period: Periodicity,
}

/// The Coriolis amplitude and stationary flow entering every symbol.
#[derive(Clone)]
pub struct Profile {
    pub(crate) data: Arc<ProfileData>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("id", &self.data.id)
            .field("u_support", &self.data.u_support)
            .field("u_inf", &self.data.u_inf)
            .finish()
    }
}

impl PartialEq for Profile {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
    }
}

/// Flow catalogue entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowSpec {
    Zero,
    /// Compactly supported vortex: amplitude times a smooth cutoff shape,
    /// `u = (A/m) e^{-1/(1-s)} (-(z2/r), z1/r)` with `s = |z|^2/r^2 < 1`,
    /// normalized so that `sup |u| = |amplitude|`.
    Bump {
        center: (f64, f64),
        radius: f64,
        amplitude: f64,
    },
}

/// Peak of `t e^{-1/(1-t^2)}` on (0,1), attained at `t = (sqrt6 - sqrt2)/2`.
fn bump_shape_peak() -> f64 {
    let t = (6.0f64.sqrt() - 2.0f64.sqrt()) / 2.0;
    t * (-1.0 / (1.0 - t * t)).exp()
}

fn make_flow(spec: FlowSpec) -> (Box<UFn>, SupportBox, f64, String) {
    match spec {
        FlowSpec::Zero => (
            Box::new(|_, _| ([0.0, 0.0], [[0.0; 2]; 2])),
            SupportBox::empty(),
            0.0,
            "u=zero".to_string(),
        ),
        FlowSpec::Bump {
            center,
            radius,
            amplitude,
        } => {
            let (c1, c2) = center;
            let rho = radius;
            let scale = amplitude / bump_shape_peak();
            let f: Box<UFn> = Box::new(move |x1, x2| {
                let z1 = x1 - c1;
                let z2 = x2 - c2;
                let s = (z1 * z1 + z2 * z2) / (rho * rho);
                if s >= 1.0 {
                    return ([0.0, 0.0], [[0.0; 2]; 2]);
                }
                let phi = (-1.0 / (1.0 - s)).exp();
                let u1 = scale * phi * (-z2 / rho);
                let u2 = scale * phi * (z1 / rho);
                // d phi / ds = -phi / (1-s)^2
                let dphi = -phi / ((1.0 - s) * (1.0 - s));
                let ds1 = 2.0 * z1 / (rho * rho);
                let ds2 = 2.0 * z2 / (rho * rho);
                let j = [
                    [
                        scale * dphi * ds1 * (-z2 / rho),
                        scale * (dphi * ds2 * (-z2 / rho) + phi * (-1.0 / rho)),
                    ],
                    [
                        scale * (dphi * ds1 * (z1 / rho) + phi * (1.0 / rho)),
                        scale * dphi * ds2 * (z1 / rho),
                    ],
                ];
                ([u1, u2], j)
            });
            (
                f,
                SupportBox {
                    x1: (c1 - rho, c1 + rho),
                    x2: (c2 - rho, c2 + rho),
                },
                amplitude.abs(),
                format!("u=bump(c=({c1},{c2}),r={rho},a={amplitude})"),
            )
        }
    }
}

impl Profile {
    /// `b(x2) = beta * x2` (betaplane). Ray-tracing only: not box-periodic.
    pub fn linear_b(beta: f64, flow: FlowSpec) -> Profile {
        let (u, sup, uinf, uid) = make_flow(flow);
        Profile {
            data: Arc::new(ProfileData {
                id: format!("b=linear({beta});{uid}"),
                b: Box::new(move |x2| beta * x2),
                bp: Box::new(move |_| beta),
                bpp: Box::new(|_| 0.0),
                u,
                u_support: sup,
                u_inf: uinf,
                b_period: Periodicity::None,
            }),
        }
    }

    /// `b(x2) = c + a¬∑sin(k x2)`.
    pub fn shifted_sine_b(c: f64, a: f64, k: f64, flow: FlowSpec) -> Profile {
        let (u, sup, uinf, uid) = make_flow(flow);
        let period = if a == 0.0 {
            Periodicity::Any
        } else {
            Periodicity::Period(2.0 * std::f64::consts::PI / k)
        };
        Profile {
            data: Arc::new(ProfileData {
                id: format!("b=shifted_sine(c={c},a={a},k={k});{uid}"),
                b: Box::new(move |x2| c + a * (k * x2).sin()),
                bp: Box::new(move |x2| a * k * (k * x2).cos()),
                bpp: Box::new(move |x2| -a * k * k * (k * x2).sin()),
                u,
                u_support: sup,
                u_inf: uinf,
                b_period: period,
            }),
        }
    }

    /// `b(x2) = tanh(x2)`. Ray-tracing only.
    pub fn tanh_b(flow: FlowSpec) -> Profile {
        let (u, sup, uinf, uid) = make_flow(flow);
        Profile {
            data: Arc::new(ProfileData {
                id: format!("b=tanh;{uid}"),
                b: Box::new(|x2| x2.tanh()),
                bp: Box::new(|x2| {
                    let t = x2.tanh();
                    1.0 - t * t
                }),
                bpp: Box::new(|x2| {
                    let t = x2.tanh();
                    -2.0 * t * (1.0 - t * t)
                }),
                u,
                u_support: sup,
                u_inf: uinf,
                b_period: Periodicity::None,
            }),
        }
    }

    /// Fully custom profile. The caller supplies exact derivatives; nothing is
    /// differentiated numerically.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        id: &str,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bp: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bpp: impl Fn(f64) -> f64 + Send + Sync + 'static,
        u: impl Fn(f64, f64) -> ([f64; 2], [[f64; 2]; 2]) + Send + Sync + 'static,
        u_support: SupportBox,
        u_inf: f64,
        b_period: Periodicity,
    ) -> Profile {
        Profile {
            data: Arc::new(ProfileData {
                id: id.to_string(),
                b: Box::new(b),
                bp: Box::new(bp),
                bpp: Box::new(bpp),
                u: Box::new(u),
                u_support,
                u_inf,
                b_period,
            }),
        }
    }

    pub fn id(&self) -> &str {
        &self.data.id
    }

    pub fn b(&self, x2: f64) -> f64 {
        (self.data.b)(x2)
    }

    pub fn bp(&self, x2: f64) -> f64 {
        (self.data.bp)(x2)
    }

    pub fn bpp(&self, x2: f64) -> f64 {
        (self.data.bpp)(x2)
    }

    /// Flow value at `x`; exactly zero outside the support box.
    pub fn u(&self, x1: f64, x2: f64) -> [f64; 2] {
        (self.data.u)(x1, x2).0
    }

    /// Flow Jacobian `J[i][j] = d u_i / d x_{j+1}`.
    pub fn u_jacobian(&self, x1: f64, x2: f64) -> [[f64; 2]; 2] {
        (self.data.u)(x1, x2).1
    }

    pub fn u_support(&self) -> SupportBox {
        self.data.u_support
    }

    pub fn u_inf_norm(&self) -> f64 {
        self.data.u_inf
    }

    pub fn b_periodicity(&self) -> Periodicity {
        self.data.b_period
    }

    pub fn has_zero_flow(&self) -> bool {
        self.data.u_inf == 0.0
    }
}

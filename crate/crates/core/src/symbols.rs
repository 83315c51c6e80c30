//! Phase-space scalar symbols as immutable expression trees with exact
//! structural differentiation, Poisson brackets, and the first-order product
//! correction of the Weyl calculus.
//!
//! Trees are pure: evaluation has no hidden state and repeated calls are
//! bit-identical. Derivative trees are built once per coordinate and cached,
//! so bracket-heavy sweeps pay the construction cost only on first use.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use thiserror::Error;

use crate::profile::Profile;

/// A point `(x1, x2, xi1, xi2)` of the four-dimensional phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub x1: f64,
    pub x2: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl PhasePoint {
    pub fn new(x1: f64, x2: f64, xi1: f64, xi2: f64) -> Self {
        let p = PhasePoint { x1, x2, xi1, xi2 };
        debug_assert!(p.is_finite(), "phase point must be finite");
        p
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.xi1.is_finite() && self.xi2.is_finite()
    }

    pub fn coord(&self, c: Coord) -> f64 {
        match c {
            Coord::X1 => self.x1,
            Coord::X2 => self.x2,
            Coord::Xi1 => self.xi1,
            Coord::Xi2 => self.xi2,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x1, self.x2, self.xi1, self.xi2]
    }
}

/// Phase-space coordinate label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coord {
    X1,
    X2,
    Xi1,
    Xi2,
}

pub const COORDS: [Coord; 4] = [Coord::X1, Coord::X2, Coord::Xi1, Coord::Xi2];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ProfileLeaf {
    B,
    Bp,
    Bpp,
    U1,
    U2,
    /// Jacobian entry `d u_i / d x_j` (zero-based `i`, `j`).
    Du(usize, usize),
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SymbolError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("derivative of order >= 3 of b (or >= 2 of the flow) is not stored")]
    DerivativeUnavailable,
}

enum Node {
    Coord(Coord),
    Const(Complex64),
    Prof(ProfileLeaf, Profile),
    Add(ScalarSymbol, ScalarSymbol),
    Sub(ScalarSymbol, ScalarSymbol),
    Mul(ScalarSymbol, ScalarSymbol),
    Div(ScalarSymbol, ScalarSymbol),
    Sqrt(ScalarSymbol),
    Powi(ScalarSymbol, i32),
    Conj(ScalarSymbol),
    Exp(ScalarSymbol),
}

struct Inner {
    node: Node,
    dcache: [OnceLock<Result<ScalarSymbol, SymbolError>>; 4],
}

/// An evaluable complex-valued phase-space function with exact derivatives.
#[derive(Clone)]
pub struct ScalarSymbol {
    inner: Arc<Inner>,
}

impl fmt::Debug for ScalarSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inner.node {
            Node::Coord(c) => write!(f, "{c:?}"),
            Node::Const(z) => write!(f, "{z}"),
            Node::Prof(l, _) => write!(f, "{l:?}"),
            Node::Add(a, b) => write!(f, "({a:?} + {b:?})"),
            Node::Sub(a, b) => write!(f, "({a:?} - {b:?})"),
            Node::Mul(a, b) => write!(f, "({a:?} * {b:?})"),
            Node::Div(a, b) => write!(f, "({a:?} / {b:?})"),
            Node::Sqrt(a) => write!(f, "sqrt({a:?})"),
            Node::Powi(a, n) => write!(f, "({a:?})^{n}"),
            Node::Conj(a) => write!(f, "conj({a:?})"),
            Node::Exp(a) => write!(f, "exp({a:?})"),
        }
    }
}

fn wrap(node: Node) -> ScalarSymbol {
    ScalarSymbol {
        inner: Arc::new(Inner {
            node,
            dcache: [const { OnceLock::new() }; 4],
        }),
    }
}

impl ScalarSymbol {
    pub fn x1() -> Self {
        wrap(Node::Coord(Coord::X1))
    }
    pub fn x2() -> Self {
        wrap(Node::Coord(Coord::X2))
    }
    pub fn xi1() -> Self {
        wrap(Node::Coord(Coord::Xi1))
    }
    pub fn xi2() -> Self {
        wrap(Node::Coord(Coord::Xi2))
    }
    pub fn coord(c: Coord) -> Self {
        wrap(Node::Coord(c))
    }

    pub fn constant(z: Complex64) -> Self {
        wrap(Node::Const(z))
    }
    pub fn real(x: f64) -> Self {
        Self::constant(Complex64::new(x, 0.0))
    }
    pub fn i() -> Self {
        Self::constant(Complex64::new(0.0, 1.0))
    }
    pub fn zero() -> Self {
        Self::real(0.0)
    }
    pub fn one() -> Self {
        Self::real(1.0)
    }

    pub(crate) fn profile_leaf(leaf: ProfileLeaf, profile: &Profile) -> Self {
        wrap(Node::Prof(leaf, profile.clone()))
    }

    pub fn sqrt(&self) -> Self {
        wrap(Node::Sqrt(self.clone()))
    }
    pub fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return ScalarSymbol::one();
        }
        if n == 1 {
            return self.clone();
        }
        wrap(Node::Powi(self.clone(), n))
    }
    pub fn conj(&self) -> Self {
        wrap(Node::Conj(self.clone()))
    }
    pub fn exp(&self) -> Self {
        wrap(Node::Exp(self.clone()))
    }

    /// Structurally the literal constant zero (after builder folding).
    pub fn is_zero(&self) -> bool {
        matches!(self.inner.node, Node::Const(z) if z == Complex64::new(0.0, 0.0))
    }

    fn as_const(&self) -> Option<Complex64> {
        match self.inner.node {
            Node::Const(z) => Some(z),
            _ => None,
        }
    }

    /// Evaluate at a phase point.
    pub fn eval(&self, p: PhasePoint) -> Result<Complex64, SymbolError> {
        self.eval_at(p.x1, p.x2, p.xi1, p.xi2)
    }

    /// Evaluate with raw coordinates (used by the grid quantizer, which
    /// substitutes its own momentum values).
    pub fn eval_at(&self, x1: f64, x2: f64, xi1: f64, xi2: f64) -> Result<Complex64, SymbolError> {
        match &self.inner.node {
            Node::Coord(c) => Ok(Complex64::new(
                match c {
                    Coord::X1 => x1,
                    Coord::X2 => x2,
                    Coord::Xi1 => xi1,
                    Coord::Xi2 => xi2,
                },
                0.0,
            )),
            Node::Const(z) => Ok(*z),
            Node::Prof(leaf, p) => Ok(Complex64::new(
                match leaf {
                    ProfileLeaf::B => p.b(x2),
                    ProfileLeaf::Bp => p.bp(x2),
                    ProfileLeaf::Bpp => p.bpp(x2),
                    ProfileLeaf::U1 => p.u(x1, x2)[0],
                    ProfileLeaf::U2 => p.u(x1, x2)[1],
                    ProfileLeaf::Du(i, j) => p.u_jacobian(x1, x2)[*i][*j],
                },
                0.0,
            )),
            Node::Add(a, b) => Ok(a.eval_at(x1, x2, xi1, xi2)? + b.eval_at(x1, x2, xi1, xi2)?),
            Node::Sub(a, b) => Ok(a.eval_at(x1, x2, xi1, xi2)? - b.eval_at(x1, x2, xi1, xi2)?),
            Node::Mul(a, b) => Ok(a.eval_at(x1, x2, xi1, xi2)? * b.eval_at(x1, x2, xi1, xi2)?),
            Node::Div(a, b) => {
                let den = b.eval_at(x1, x2, xi1, xi2)?;
                if den == Complex64::new(0.0, 0.0) {
                    return Err(SymbolError::Domain("division by zero"));
                }
                Ok(a.eval_at(x1, x2, xi1, xi2)? / den)
            }
            Node::Sqrt(a) => {
                let z = a.eval_at(x1, x2, xi1, xi2)?;
                if z.im == 0.0 && z.re < 0.0 {
                    return Err(SymbolError::Domain("sqrt of negative real"));
                }
                Ok(z.sqrt())
            }
            Node::Powi(a, n) => {
                let z = a.eval_at(x1, x2, xi1, xi2)?;
                if *n < 0 && z == Complex64::new(0.0, 0.0) {
                    return Err(SymbolError::Domain("negative power of zero"));
                }
                Ok(z.powi(*n))
            }
            Node::Conj(a) => Ok(a.eval_at(x1, x2, xi1, xi2)?.conj()),
            Node::Exp(a) => Ok(a.eval_at(x1, x2, xi1, xi2)?.exp()),
        }
    }

    /// Exact derivative tree with respect to one coordinate (cached).
    pub fn differentiate(&self, c: Coord) -> Result<ScalarSymbol, SymbolError> {
        let idx = match c {
            Coord::X1 => 0,
            Coord::X2 => 1,
            Coord::Xi1 => 2,
            Coord::Xi2 => 3,
        };
        self.inner.dcache[idx]
            .get_or_init(|| self.diff_uncached(c))
            .clone()
    }

    fn diff_uncached(&self, c: Coord) -> Result<ScalarSymbol, SymbolError> {
        Ok(match &self.inner.node {
            Node::Coord(cc) => {
                if *cc == c {
                    ScalarSymbol::one()
                } else {
                    ScalarSymbol::zero()
                }
            }
            Node::Const(_) => ScalarSymbol::zero(),
            Node::Prof(leaf, p) => match (leaf, c) {
                (ProfileLeaf::B, Coord::X2) => ScalarSymbol::profile_leaf(ProfileLeaf::Bp, p),
                (ProfileLeaf::Bp, Coord::X2) => ScalarSymbol::profile_leaf(ProfileLeaf::Bpp, p),
                (ProfileLeaf::Bpp, Coord::X2) => return Err(SymbolError::DerivativeUnavailable),
                (ProfileLeaf::U1, Coord::X1) => {
                    ScalarSymbol::profile_leaf(ProfileLeaf::Du(0, 0), p)
                }
                (ProfileLeaf::U1, Coord::X2) => {
                    ScalarSymbol::profile_leaf(ProfileLeaf::Du(0, 1), p)
                }
                (ProfileLeaf::U2, Coord::X1) => {
                    ScalarSymbol::profile_leaf(ProfileLeaf::Du(1, 0), p)
                }
                (ProfileLeaf::U2, Coord::X2) => {
                    ScalarSymbol::profile_leaf(ProfileLeaf::Du(1, 1), p)
                }
                (ProfileLeaf::Du(_, _), Coord::X1 | Coord::X2) => {
                    return Err(SymbolError::DerivativeUnavailable)
                }
                _ => ScalarSymbol::zero(),
            },
            Node::Add(a, b) => a.differentiate(c)? + b.differentiate(c)?,
            Node::Sub(a, b) => a.differentiate(c)? - b.differentiate(c)?,
            Node::Mul(a, b) => {
                let da = a.differentiate(c)?;
                let db = b.differentiate(c)?;
                da * b.clone() + a.clone() * db
            }
            Node::Div(a, b) => {
                let da = a.differentiate(c)?;
                let db = b.differentiate(c)?;
                if db.is_zero() {
                    da / b.clone()
                } else {
                    (da * b.clone() - a.clone() * db) / b.powi(2)
                }
            }
            Node::Sqrt(a) => {
                let da = a.differentiate(c)?;
                if da.is_zero() {
                    ScalarSymbol::zero()
                } else {
                    da / (ScalarSymbol::real(2.0) * self.clone())
                }
            }
            Node::Powi(a, n) => {
                let da = a.differentiate(c)?;
                if da.is_zero() {
                    ScalarSymbol::zero()
                } else {
                    ScalarSymbol::real(*n as f64) * a.powi(n - 1) * da
                }
            }
            Node::Conj(a) => a.differentiate(c)?.conj(),
            Node::Exp(a) => {
                let da = a.differentiate(c)?;
                if da.is_zero() {
                    ScalarSymbol::zero()
                } else {
                    da * self.clone()
                }
            }
        })
    }
}

// Builders fold literal constants so that derivative trees of coordinate-free
// expressions collapse to the zero constant.
impl Add for ScalarSymbol {
    type Output = ScalarSymbol;
    fn add(self, rhs: ScalarSymbol) -> ScalarSymbol {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return ScalarSymbol::constant(a + b);
        }
        wrap(Node::Add(self, rhs))
    }
}

impl Sub for ScalarSymbol {
    type Output = ScalarSymbol;
    fn sub(self, rhs: ScalarSymbol) -> ScalarSymbol {
        if rhs.is_zero() {
            return self;
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return ScalarSymbol::constant(a - b);
        }
        wrap(Node::Sub(self, rhs))
    }
}

impl Mul for ScalarSymbol {
    type Output = ScalarSymbol;
    fn mul(self, rhs: ScalarSymbol) -> ScalarSymbol {
        if self.is_zero() || rhs.is_zero() {
            return ScalarSymbol::zero();
        }
        if let Some(a) = self.as_const() {
            if a == Complex64::new(1.0, 0.0) {
                return rhs;
            }
            if let Some(b) = rhs.as_const() {
                return ScalarSymbol::constant(a * b);
            }
        }
        if let Some(b) = rhs.as_const() {
            if b == Complex64::new(1.0, 0.0) {
                return self;
            }
        }
        wrap(Node::Mul(self, rhs))
    }
}

impl Div for ScalarSymbol {
    type Output = ScalarSymbol;
    fn div(self, rhs: ScalarSymbol) -> ScalarSymbol {
        if let Some(b) = rhs.as_const() {
            if b == Complex64::new(1.0, 0.0) {
                return self;
            }
        }
        wrap(Node::Div(self, rhs))
    }
}

/// Profile-bound symbol leaves.
impl Profile {
    pub fn b_sym(&self) -> ScalarSymbol {
        ScalarSymbol::profile_leaf(ProfileLeaf::B, self)
    }
    pub fn bp_sym(&self) -> ScalarSymbol {
        ScalarSymbol::profile_leaf(ProfileLeaf::Bp, self)
    }
    pub fn bpp_sym(&self) -> ScalarSymbol {
        ScalarSymbol::profile_leaf(ProfileLeaf::Bpp, self)
    }
    pub fn u1_sym(&self) -> ScalarSymbol {
        ScalarSymbol::profile_leaf(ProfileLeaf::U1, self)
    }
    pub fn u2_sym(&self) -> ScalarSymbol {
        ScalarSymbol::profile_leaf(ProfileLeaf::U2, self)
    }
}

/// Value of a symbol at a point.
pub fn eval(s: &ScalarSymbol, p: PhasePoint) -> Result<Complex64, SymbolError> {
    s.eval(p)
}

/// Exact gradient `([d/dx1, d/dx2], [d/dxi1, d/dxi2])` at a point.
pub fn gradient(
    s: &ScalarSymbol,
    p: PhasePoint,
) -> Result<([Complex64; 2], [Complex64; 2]), SymbolError> {
    let gx = [
        s.differentiate(Coord::X1)?.eval(p)?,
        s.differentiate(Coord::X2)?.eval(p)?,
    ];
    let gxi = [
        s.differentiate(Coord::Xi1)?.eval(p)?,
        s.differentiate(Coord::Xi2)?.eval(p)?,
    ];
    Ok((gx, gxi))
}

/// Poisson bracket `{f, g} = grad_xi f . grad_x g - grad_x f . grad_xi g`.
pub fn poisson_bracket(
    f: &ScalarSymbol,
    g: &ScalarSymbol,
    p: PhasePoint,
) -> Result<Complex64, SymbolError> {
    let (fx, fxi) = gradient(f, p)?;
    let (gx, gxi) = gradient(g, p)?;
    Ok(fxi[0] * gx[0] + fxi[1] * gx[1] - fx[0] * gxi[0] - fx[1] * gxi[1])
}

/// First-order correction of the Weyl product: `{a, b}/(2i)`.
pub fn moyal_subprincipal(
    a: &ScalarSymbol,
    b: &ScalarSymbol,
    p: PhasePoint,
) -> Result<Complex64, SymbolError> {
    Ok(poisson_bracket(a, b, p)? / Complex64::new(0.0, 2.0))
}

/// `<xi>_b = sqrt(xi1^2 + xi2^2 + b(x2)^2)`, the eigenvalue gap scale.
pub fn xi_b(p: PhasePoint, profile: &Profile) -> f64 {
    let b = profile.b(p.x2);
    (p.xi1 * p.xi1 + p.xi2 * p.xi2 + b * b).sqrt()
}

/// Empirical symbol-class constants `sup |b^(alpha)| / (1 + b^2)^(1/2)`.
#[derive(Clone, Debug)]
pub struct SymbolClassReport {
    /// One entry per derivative order `0..=alpha_max`.
    pub constants: Vec<f64>,
    /// Set when configured limits were supplied; `true` marks an exceeded one.
    pub violations: Option<Vec<bool>>,
}

/// Sample `|b^(alpha)|/(1+b^2)^(1/2)` on a uniform grid over `interval`.
/// Only orders up to 2 are stored on a profile.
pub fn symbol_class_check(
    profile: &Profile,
    alpha_max: usize,
    interval: (f64, f64),
    n_samples: usize,
    limits: Option<&[f64]>,
) -> SymbolClassReport {
    assert!(alpha_max <= 2, "only b, b', b'' are stored");
    assert!(n_samples >= 2);
    let mut constants = vec![0.0f64; alpha_max + 1];
    for i in 0..n_samples {
        let x2 = interval.0 + (interval.1 - interval.0) * i as f64 / (n_samples - 1) as f64;
        let w = (1.0 + profile.b(x2).powi(2)).sqrt();
        let ds = [profile.b(x2), profile.bp(x2), profile.bpp(x2)];
        for (alpha, c) in constants.iter_mut().enumerate() {
            *c = c.max(ds[alpha].abs() / w);
        }
    }
    let violations = limits.map(|ls| {
        constants
            .iter()
            .zip(ls.iter())
            .map(|(c, l)| c > l)
            .collect()
    });
    SymbolClassReport {
        constants,
        violations,
    }
}

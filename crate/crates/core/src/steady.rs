//! Steady states for linear repulsion (`q_r = 1`), the limiting profile of
//! the escaping case `m < 1`, and a stationarity defect for any exponents.

use serde::{Deserialize, Serialize};

use crate::dynamics::rhs;
use crate::error::{Error, Result};
use crate::kernels::{AttractionPotential, Exponents};
use crate::measures::{grid_point, InverseCdf, ReferenceProfile};

const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyKind {
    #[serde(rename = "qa_gt_1")]
    QaGt1,
    #[serde(rename = "qa_eq_1_shift")]
    QaEq1Shift,
    NoneExists,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub x_star: InverseCdf,
    /// Left edge of the support, where `U = −1`.
    pub x_lo: f64,
    /// Right edge of the support, where `U = +1`.
    pub x_hi: f64,
    /// Median, where `U = 0`.
    pub x_zero: f64,
    pub kind: SteadyKind,
}

/// Solves `U(x) = target` for nondecreasing `U` with `U(±∞) = ±∞`. The
/// initial bracket `[lo, hi]` is widened geometrically until it straddles the
/// root.
pub(crate) fn solve_monotone(
    f: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let mut width = (hi - lo).max(1.0);
    while f(lo) > target {
        lo -= width;
        width *= 2.0;
    }
    width = (hi - lo).max(1.0);
    while f(hi) < target {
        hi += width;
        width *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOL * mid.abs().max(1.0) || mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the endpoint with the smaller defect
    if (f(lo) - target).abs() <= (f(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

/// Steady state for `q_r = 1` on an `n`-point grid, with `U` built by the
/// default quadrature on `n` atoms.
pub fn steady_qr1(profile: &ReferenceProfile, q_a: f64, n: usize) -> Result<SteadyState> {
    let pot = AttractionPotential::new(profile, q_a, n)?;
    steady_qr1_with(&pot, n)
}

/// Steady state for `q_r = 1` against a given attraction field: for
/// `q_a > 1` the nodes solve `U(X*(z_i)) = 2 z_i − 1`; for `q_a = 1` and
/// `m >= 1` the steady state is the window `X*(z) = Y(z + (m − 1)/2)` of the
/// reference profile.
pub fn steady_qr1_with(pot: &AttractionPotential, n: usize) -> Result<SteadyState> {
    if n == 0 {
        return Err(Error::Input("grid size must be positive".into()));
    }
    let profile = pot.profile();
    let m = profile.mass();
    if pot.q_a() == 1.0 {
        if m < 1.0 {
            return Err(Error::NoSteadyState { mass: m });
        }
        let shift = 0.5 * (m - 1.0);
        let x_star = InverseCdf::from_fn(n, |z| profile.pseudo_inverse_unchecked(z + shift))?;
        return Ok(SteadyState {
            x_star,
            x_lo: profile.pseudo_inverse_unchecked(shift),
            x_hi: profile.left_quantile(shift + 1.0)?,
            x_zero: profile.pseudo_inverse_unchecked(0.5 * m),
            kind: SteadyKind::QaEq1Shift,
        });
    }

    let u = |x: f64| pot.force(x);
    let (a, b) = profile.support();
    let x_zero = solve_monotone(u, 0.0, a, b);
    let x_lo = solve_monotone(u, -1.0, a, x_zero);
    let x_hi = solve_monotone(u, 1.0, x_zero, b);
    let mut x = Vec::with_capacity(n);
    let mut left = x_lo;
    for i in 0..n {
        let root = solve_monotone(u, 2.0 * grid_point(n, i) - 1.0, left, x_hi);
        x.push(root);
        left = root;
    }
    Ok(SteadyState {
        x_star: InverseCdf::new(x)?,
        x_lo,
        x_hi,
        x_zero,
        kind: SteadyKind::QaGt1,
    })
}

/// Where a grid node of the escaping case `q_a = q_r = 1`, `m < 1` ends up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeFate {
    /// `z < (1 − m)/2`: drifts to `−∞` at speed at least `1 − m − 2z`.
    EscapesLeft,
    /// Settles at `X̃*(z) = Y(z − (1 − m)/2)`.
    Window(f64),
    /// `z > (1 + m)/2`: drifts to `+∞`.
    EscapesRight,
}

impl NodeFate {
    pub fn limit(&self) -> Option<f64> {
        match self {
            NodeFate::Window(x) => Some(*x),
            _ => None,
        }
    }
}

/// Partial limit of the escaping flow on an `n`-point grid. Nodes in the
/// window `[(1 − m)/2, (1 + m)/2)` carry a copy of `ω`; the others escape
/// with the sign of `2z − 1 + m` on the left and `2z − 1 − m` on the right.
pub fn shifted_profile_mlt1(profile: &ReferenceProfile, n: usize) -> Result<Vec<NodeFate>> {
    let m = profile.mass();
    if m >= 1.0 {
        return Err(Error::Precondition(format!(
            "the shifted limit profile needs mass < 1, got {m}"
        )));
    }
    let offset = 0.5 * (1.0 - m);
    Ok((0..n)
        .map(|i| {
            let zeta = grid_point(n, i) - offset;
            if zeta < 0.0 {
                NodeFate::EscapesLeft
            } else if zeta < m {
                NodeFate::Window(profile.pseudo_inverse_unchecked(zeta))
            } else {
                NodeFate::EscapesRight
            }
        })
        .collect())
}

/// Sup-norm stationarity defect `max_i |V_i|`.
pub fn steady_residual(
    x: &InverseCdf,
    pot: &AttractionPotential,
    exps: &Exponents,
) -> Result<f64> {
    Ok(rhs(x, pot, exps)?.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

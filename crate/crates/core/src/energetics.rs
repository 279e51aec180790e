//! Energy, dissipation, the Fourier form of the balanced energy, and a-priori
//! moment bounds.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::dynamics::{rhs, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::{psi, psi_prime, AttractionMode, AttractionPotential, Exponents, Regime};
use crate::measures::{moment, InverseCdf};

/// Diagnostics of one recorded state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub e_hat: Option<f64>,
    pub moment_qa: f64,
    pub moment_r: f64,
}

/// Discrete energy
/// `E = (1/n) Σ_i (ψ_a ∗ ω)(X_i) − (1/(2n²)) Σ_{i,j} ψ_r(X_i − X_j)`,
/// whose gradient is exactly `−V / n`.
pub fn energy(x: &InverseCdf, pot: &AttractionPotential, exps: &Exponents) -> f64 {
    let xs = x.values();
    let n = xs.len() as f64;
    let attraction: f64 = xs.iter().map(|&xi| pot.potential(xi)).sum::<f64>() / n;
    attraction - 0.5 * self_interaction(xs, exps.q_r()) / (n * n)
}

/// `Σ_{i,j} ψ(x_i − x_j)` over a nondecreasing sample, by row sums.
fn self_interaction(xs: &[f64], q: f64) -> f64 {
    xs.iter()
        .map(|&xi| xs.iter().map(|&xj| psi(q, xi - xj)).sum::<f64>())
        .sum()
}

/// `D = (1/n) Σ_i V_i²`. For `q_r = 1` this is the same expression with the
/// exact rank repulsion `2z − 1`; it is a formal extension there.
pub fn dissipation(x: &InverseCdf, pot: &AttractionPotential, exps: &Exponents) -> Result<f64> {
    let v = rhs(x, pot, exps)?;
    Ok(v.iter().map(|v| v * v).sum::<f64>() / v.len() as f64)
}

/// The dissipation expanded into three triple sums over the grid and the
/// attraction atoms. `O(n²M)`; meant as an algebraic cross-check on small
/// grids. Needs `q_r > 1`, `q_a > 1` and quadrature mode, where both `U` and
/// the repulsion are plain sums.
pub fn dissipation_triple_sum(
    x: &InverseCdf,
    pot: &AttractionPotential,
    exps: &Exponents,
) -> Result<f64> {
    if exps.q_r() <= 1.0 || exps.q_a() <= 1.0 || pot.mode() != AttractionMode::Quadrature {
        return Err(Error::Precondition(
            "the triple-sum dissipation needs q_a, q_r > 1 and quadrature attraction".into(),
        ));
    }
    let (qa, qr) = (exps.q_a(), exps.q_r());
    let xs = x.values();
    let n = xs.len() as f64;
    let ys = pot.atoms();
    let ws = pot.quadrature().weights();
    let mut total = 0.0;
    for &xi in xs {
        let mut aa = 0.0;
        for (&yj, &wj) in ys.iter().zip(ws) {
            for (&yk, &wk) in ys.iter().zip(ws) {
                aa += wj * wk * psi_prime(qa, xi - yj) * psi_prime(qa, xi - yk);
            }
        }
        let mut rr = 0.0;
        for &xj in xs {
            for &xk in xs {
                rr += psi_prime(qr, xi - xj) * psi_prime(qr, xi - xk);
            }
        }
        let mut ra = 0.0;
        for &xj in xs {
            for (&yk, &wk) in ys.iter().zip(ws) {
                ra += wk * psi_prime(qr, xi - xj) * psi_prime(qa, xi - yk);
            }
        }
        total += aa + rr / (n * n) - 2.0 * ra / n;
    }
    Ok(total / n)
}

/// `C = ½ Σ_{j,k} w_j w_k ψ(Y_j − Y_k)`, the constant left over after
/// completing the square in the balanced case.
pub fn reference_self_energy(pot: &AttractionPotential) -> f64 {
    let q = pot.q_a();
    let ys = pot.atoms();
    let ws = pot.quadrature().weights();
    let mut s = 0.0;
    for (&yj, &wj) in ys.iter().zip(ws) {
        for (&yk, &wk) in ys.iter().zip(ws) {
            s += wj * wk * psi(q, yj - yk);
        }
    }
    0.5 * s
}

/// `Ẽ = −½ ∬ ψ_q d(μ−ω) d(μ−ω)` for the sampled `μ` and the attraction
/// atoms of `ω`, with `q = q_a`.
pub fn relative_energy(x: &InverseCdf, pot: &AttractionPotential) -> f64 {
    let q = pot.q_a();
    let xs = x.values();
    let n = xs.len() as f64;
    let ys = pot.atoms();
    let ws = pot.quadrature().weights();
    let mm = self_interaction(xs, q) / (n * n);
    let mut mw = 0.0;
    for &xi in xs {
        for (&y, &w) in ys.iter().zip(ws) {
            mw += w * psi(q, xi - y);
        }
    }
    mw /= n;
    -0.5 * (mm - 2.0 * mw) - reference_self_energy(pot)
}

/// `D_q = −2^q Γ((1+q)/2) / (2√π Γ(−q/2))`, positive for `1 < q < 2`.
pub fn d_q(q: f64) -> f64 {
    -(2f64.powf(q)) * gamma(0.5 * (1.0 + q)) / (2.0 * PI.sqrt() * gamma(-0.5 * q))
}

/// Normalization in `∫|x|^r dμ = c_r ∫ (1 − Re μ̂(ξ)) |ξ|^{−1−r} dξ`,
/// valid for `0 < r < 2`.
pub fn moment_constant(r: f64) -> f64 {
    1.0 / (-2.0 * gamma(-r) * (0.5 * PI * r).cos())
}

/// Frequency grid for [`fourier_energy`]: log-spaced Simpson on
/// `[xi_min, 1]`, uniform Simpson on `[1, xi_max]` with `per_period` points
/// per period of the fastest mode, and analytic pieces below `xi_min` and
/// above `xi_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierGrid {
    pub xi_min: f64,
    pub xi_max: f64,
    pub log_nodes: usize,
    pub per_period: usize,
}

impl Default for FourierGrid {
    fn default() -> Self {
        Self {
            xi_min: 1e-4,
            xi_max: 1e3,
            log_nodes: 4000,
            per_period: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierEnergy {
    pub value: f64,
    /// Bound on the truncation below `xi_min` and above `xi_max`.
    pub error_bar: f64,
}

/// Signed atoms of `μ − ω`.
struct SignedAtoms {
    pos: Vec<f64>,
    weight: Vec<f64>,
}

impl SignedAtoms {
    fn new(x: &InverseCdf, pot: &AttractionPotential) -> Self {
        let n = x.len() as f64;
        let mut pos: Vec<f64> = x.values().to_vec();
        let mut weight = vec![1.0 / n; x.len()];
        pos.extend_from_slice(pot.atoms());
        weight.extend(pot.quadrature().weights().iter().map(|w| -w));
        Self { pos, weight }
    }

    /// `|μ̂(ξ) − ω̂(ξ)|²`, using `cos − 1 = −2 sin²(·/2)` so that the real
    /// part keeps its precision near the origin.
    fn spectrum(&self, xi: f64) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&p, &w) in self.pos.iter().zip(&self.weight) {
            let (s, _) = (0.5 * xi * p).sin_cos();
            re -= 2.0 * w * s * s;
            im -= w * (xi * p).sin();
        }
        re * re + im * im
    }

    fn span(&self) -> f64 {
        let lo = self.pos.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.pos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// `Σ|w|·|p|`, so that `|μ̂ − ω̂|(ξ) <= ξ Σ|w||p|`.
    fn first_moment_bound(&self) -> f64 {
        self.pos
            .iter()
            .zip(&self.weight)
            .map(|(p, w)| (p * w).abs())
            .sum()
    }

    /// High-frequency mean of the spectrum: the squared net weight summed
    /// over distinct positions.
    fn diagonal(&self) -> f64 {
        let mut pairs: Vec<(f64, f64)> = self
            .pos
            .iter()
            .cloned()
            .zip(self.weight.iter().cloned())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut sum = 0.0;
        let mut k = 0;
        while k < pairs.len() {
            let mut net = 0.0;
            let p = pairs[k].0;
            while k < pairs.len() && pairs[k].0 == p {
                net += pairs[k].1;
                k += 1;
            }
            sum += net * net;
        }
        sum
    }
}

/// Composite Simpson over an even number of intervals.
fn simpson(values: &[f64], h: f64) -> f64 {
    let last = values.len() - 1;
    let inner: f64 = values[1..last]
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    h / 3.0 * (values[0] + inner + values[last])
}

fn even(k: usize) -> usize {
    k.max(2).div_ceil(2) * 2
}

/// `Ê = D_q ∫ |μ̂ − ω̂|² |ξ|^{−1−q} dξ` with `q = q_a`, for unit-mass `ω`.
pub fn fourier_energy(
    x: &InverseCdf,
    pot: &AttractionPotential,
    grid: &FourierGrid,
) -> Result<FourierEnergy> {
    let q = pot.q_a();
    if !(q > 1.0 && q < 2.0) {
        return Err(Error::Precondition(format!(
            "the Fourier representation needs 1 < q < 2, got {q}"
        )));
    }
    let m = pot.profile().mass();
    if (m - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "the Fourier representation needs a unit-mass profile, got mass {m}"
        )));
    }
    if !(grid.xi_min > 0.0 && grid.xi_min < 1.0 && grid.xi_max > 1.0) || grid.per_period == 0 {
        return Err(Error::Input(
            "frequency grid needs 0 < xi_min < 1 < xi_max and per_period > 0".into(),
        ));
    }

    let atoms = SignedAtoms::new(x, pot);

    // [xi_min, 1] in s = ln ξ: integrand g(e^s) e^{−qs}
    let nl = even(grid.log_nodes);
    let s0 = grid.xi_min.ln();
    let hl = -s0 / nl as f64;
    let low: Vec<f64> = (0..=nl)
        .map(|k| {
            let s = s0 + k as f64 * hl;
            atoms.spectrum(s.exp()) * (-q * s).exp()
        })
        .collect();
    let log_part = simpson(&low, hl);

    // [1, xi_max] uniformly, resolving the fastest oscillation
    let span = atoms.span().max(1e-12);
    let period = 2.0 * PI / span;
    let nu = even(((grid.xi_max - 1.0) / (period / grid.per_period as f64)).ceil() as usize);
    let hu = (grid.xi_max - 1.0) / nu as f64;
    let high: Vec<f64> = (0..=nu)
        .map(|k| {
            let xi = 1.0 + k as f64 * hu;
            atoms.spectrum(xi) * xi.powf(-1.0 - q)
        })
        .collect();
    let uniform_part = simpson(&high, hu);

    // below xi_min the spectrum is ~ c ξ²
    let g_min = atoms.spectrum(grid.xi_min);
    let below = g_min / (grid.xi_min * grid.xi_min) * grid.xi_min.powf(2.0 - q) / (2.0 - q);
    let below_bound = atoms.first_moment_bound().powi(2) * grid.xi_min.powf(2.0 - q) / (2.0 - q);
    // above xi_max the spectrum averages to its diagonal part
    let tail = atoms.diagonal() * grid.xi_max.powf(-q) / q;
    let tail_bound = 4.0 * grid.xi_max.powf(-q) / q;

    let dq = d_q(q);
    // both half-lines
    let value = 2.0 * dq * (below + log_part + uniform_part + tail);
    let error_bar = 2.0 * dq * (below_bound + tail_bound);
    Ok(FourierEnergy { value, error_bar })
}

/// What [`reports`] evaluates besides `E` and `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    /// Order of the low moment, below `q/2` in the balanced case.
    pub r: f64,
    /// Frequency grid for `Ê`; `None` skips it.
    pub fourier: Option<FourierGrid>,
}

impl ReportOptions {
    /// `r = q_a/2 − 0.1`, no Fourier energy.
    pub fn for_exponents(exps: &Exponents) -> Self {
        Self {
            r: 0.5 * exps.q_a() - 0.1,
            fourier: None,
        }
    }
}

pub fn report(
    t: f64,
    x: &InverseCdf,
    pot: &AttractionPotential,
    exps: &Exponents,
    opts: &ReportOptions,
) -> Result<EnergyReport> {
    let e_hat = match &opts.fourier {
        Some(grid) if exps.regime() == Regime::Balanced => {
            Some(fourier_energy(x, pot, grid)?.value)
        }
        _ => None,
    };
    Ok(EnergyReport {
        t,
        energy: energy(x, pot, exps),
        dissipation: dissipation(x, pot, exps)?,
        e_hat,
        moment_qa: moment(x, exps.q_a()),
        moment_r: moment(x, opts.r),
    })
}

/// One report per recorded state.
pub fn reports(
    traj: &Trajectory,
    pot: &AttractionPotential,
    exps: &Exponents,
    opts: &ReportOptions,
) -> Result<Vec<EnergyReport>> {
    traj.states
        .iter()
        .map(|s| report(s.t, &s.x, pot, exps, opts))
        .collect()
}

/// `|E(0) − E(T) − ∫₀ᵀ D dt|` with the trapezoid rule over the reports.
pub fn energy_balance(reports: &[EnergyReport]) -> Result<f64> {
    if reports.len() < 2 {
        return Err(Error::Input(
            "the energy balance needs at least two reports".into(),
        ));
    }
    let dissipated: f64 = reports
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].dissipation + w[1].dissipation))
        .sum();
    let first = reports[0].energy;
    let last = reports[reports.len() - 1].energy;
    Ok((first - last - dissipated).abs())
}

/// Outcome of [`moment_certificate`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MomentCertificate {
    /// Moment order that was bounded.
    pub order: f64,
    pub bound: f64,
    pub max_moment: f64,
    pub passed: bool,
}

/// Checks every report's moment against the a-priori bound implied by the
/// initial energy (energy only decreases along the flow).
///
/// * `q_r < q_a`: `M_{q_a} <= (4/m)(E₀ + ∫|y|^{q_a} dω + 2R^{q_r})` with
///   `R = (8/m)^{1/(q_a − q_r)}`.
/// * `q_r = q_a = q ∈ (1, 2)`, unit mass, `0 < r < q/2`:
///   `M_r <= c_r ((2/(q − 2r))^{1/2} M''^{1/2} + 4/r)` with
///   `M'' = 2 (Ẽ₀ + Ẽ[δ₀]) / D_q`.
///
/// The `ω` integrals use the same atoms as the energy, so the bounds hold
/// exactly for the discrete measures.
pub fn moment_certificate(
    reports: &[EnergyReport],
    exps: &Exponents,
    pot: &AttractionPotential,
    r: f64,
) -> Result<MomentCertificate> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Input("no reports to certify".into()))?;
    let e0 = first.energy;
    let m = pot.profile().mass();
    let (order, bound, moments): (f64, f64, Vec<f64>) = match exps.regime() {
        Regime::AttractionDominated => {
            let (qa, qr) = (exps.q_a(), exps.q_r());
            let radius = (8.0 / m).powf(1.0 / (qa - qr));
            let omega_moment = attraction_moment(pot, qa);
            let bound = 4.0 / m * (e0 + omega_moment + 2.0 * radius.powf(qr));
            (qa, bound, reports.iter().map(|r| r.moment_qa).collect())
        }
        Regime::Balanced => {
            let q = exps.q_a();
            if !(q > 1.0 && q < 2.0) || (m - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "the balanced moment bound needs 1 < q < 2 and unit mass (q = {q}, m = {m})"
                )));
            }
            if !(r > 0.0 && r < 0.5 * q) {
                return Err(Error::Precondition(format!(
                    "moment order must lie in (0, {}), got {r}",
                    0.5 * q
                )));
            }
            let c = reference_self_energy(pot);
            let excess = (e0 - c).max(0.0);
            let delta_energy = attraction_moment(pot, q) - c;
            let m2 = 2.0 * (excess + delta_energy) / d_q(q);
            let bound =
                moment_constant(r) * ((2.0 / (q - 2.0 * r)).sqrt() * m2.sqrt() + 4.0 / r);
            (r, bound, reports.iter().map(|r| r.moment_r).collect())
        }
    };
    let max_moment = moments.iter().cloned().fold(0.0, f64::max);
    Ok(MomentCertificate {
        order,
        bound,
        max_moment,
        passed: moments.iter().all(|&v| v <= bound),
    })
}

/// `∫|y|^q dω`, evaluated the way the energy evaluates `ψ_a ∗ ω`.
fn attraction_moment(pot: &AttractionPotential, q: f64) -> f64 {
    if pot.q_a() == 1.0 || pot.mode() == AttractionMode::ClosedForm {
        pot.profile().abs_moment(q)
    } else {
        pot.atoms()
            .iter()
            .zip(pot.quadrature().weights())
            .map(|(y, w)| w * y.abs().powf(q))
            .sum()
    }
}

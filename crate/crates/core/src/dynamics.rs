//! Right-hand side of the pseudo-inverse evolution and its fixed-step
//! integrators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{psi_prime, AttractionPotential, Exponents};
use crate::measures::{check_monotone, grid_point, InverseCdf, ReferenceProfile};

/// Rows below this count are never split across threads.
const MIN_ROWS_PER_THREAD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Rk4,
    Euler,
}

/// A characteristic `z ↦ X(t, z)` followed off the grid, typically at an
/// endpoint `z = 0` or `z = 1` that the midpoint grid never samples. `x` is
/// its initial position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub z: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Upper bound for `dt * λ`.
    pub safety: f64,
    pub record_every: usize,
    pub probes: Vec<Probe>,
    pub threads: usize,
    /// Use the `O(n)` affine repulsion for `q_r = 2`.
    pub fast_repulsion: bool,
}

impl IntegratorConfig {
    /// RK4 with `safety = 0.5`, recording every step.
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::Rk4,
            safety: 0.5,
            record_every: 1,
            probes: Vec::new(),
            threads: 1,
            fast_repulsion: false,
        }
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn safety(mut self, safety: f64) -> Self {
        self.safety = safety;
        self
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn probes(mut self, probes: Vec<Probe>) -> Self {
        self.probes = probes;
        self
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn fast_repulsion(mut self, on: bool) -> Self {
        self.fast_repulsion = on;
        self
    }

    /// Checks the field ranges and the step guard `dt * λ <= safety`.
    pub fn validate(&self, lambda: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Input(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Input(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Input(format!(
                "safety must lie in (0, 1], got {}",
                self.safety
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Input("record_every must be positive".into()));
        }
        if let Some(p) = self
            .probes
            .iter()
            .find(|p| !(0.0..=1.0).contains(&p.z) || !p.x.is_finite())
        {
            return Err(Error::Input(format!(
                "probe at z = {} (x = {}) is outside [0, 1] or not finite",
                p.z, p.x
            )));
        }
        if self.dt * lambda > self.safety {
            return Err(Error::StepGuard {
                dt: self.dt,
                lambda,
                safety: self.safety,
                suggested: self.safety / lambda,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: InverseCdf,
    pub min_slope: f64,
    /// Current positions of the configured probes, in configuration order.
    pub probes: Vec<f64>,
}

impl FlowState {
    pub fn new(x: InverseCdf, probes: &[Probe]) -> Self {
        Self {
            t: 0.0,
            min_slope: x.min_slope(),
            x,
            probes: probes.iter().map(|p| p.x).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
    pub lambda: f64,
    /// Running minimum of `min_slope(t) e^{λt}` over every accepted step.
    pub slope_certificate: f64,
    /// The same running minimum, sampled at each recorded state.
    pub certificate_history: Vec<f64>,
    pub probe_z: Vec<f64>,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn initial(&self) -> &FlowState {
        &self.states[0]
    }

    pub fn last(&self) -> &FlowState {
        self.states.last().expect("a trajectory records its initial state")
    }

    /// `min_t min_slope(t) e^{λt} / min_slope(0)`; at least one for the exact
    /// semi-discrete flow.
    pub fn slope_ratio(&self) -> f64 {
        let alpha = self.initial().min_slope;
        if alpha > 0.0 && alpha.is_finite() {
            self.slope_certificate / alpha
        } else {
            f64::INFINITY
        }
    }

    /// Trajectory of probe `k`.
    pub fn probe_path(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.probes[k]).collect()
    }
}

/// Evaluates the velocity field at raw node positions.
struct Field<'a> {
    pot: &'a AttractionPotential,
    q_r: f64,
    threads: usize,
    fast: bool,
}

impl Field<'_> {
    fn repulsion(&self, x: &[f64], mean: f64, xi: f64, z: f64) -> f64 {
        let q = self.q_r;
        if q == 1.0 {
            2.0 * z - 1.0
        } else if self.fast && q == 2.0 {
            2.0 * (xi - mean)
        } else {
            let s: f64 = x.iter().map(|&xj| psi_prime(q, xi - xj)).sum();
            s / x.len() as f64
        }
    }

    fn rows(&self, x: &[f64], mean: f64, first: usize, out: &mut [f64]) {
        let n = x.len();
        for (k, v) in out.iter_mut().enumerate() {
            let i = first + k;
            let xi = x[i];
            *v = self.repulsion(x, mean, xi, grid_point(n, i)) - self.pot.force(xi);
        }
    }

    fn eval(&self, x: &[f64], probe_z: &[f64], probe_x: &[f64], out: &mut [f64], out_p: &mut [f64]) {
        let n = x.len();
        let mean = if self.fast && self.q_r == 2.0 {
            x.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let threads = self.threads.min(n / MIN_ROWS_PER_THREAD).max(1);
        if threads == 1 {
            self.rows(x, mean, 0, out);
        } else {
            let chunk = n.div_ceil(threads);
            std::thread::scope(|s| {
                for (c, part) in out.chunks_mut(chunk).enumerate() {
                    s.spawn(move || self.rows(x, mean, c * chunk, part));
                }
            });
        }
        for ((v, &z), &xp) in out_p.iter_mut().zip(probe_z).zip(probe_x) {
            *v = self.repulsion(x, mean, xp, z) - self.pot.force(xp);
        }
    }
}

fn check_exponents(pot: &AttractionPotential, exps: &Exponents) -> Result<()> {
    if pot.q_a() != exps.q_a() {
        return Err(Error::Precondition(format!(
            "attraction potential built for q_a = {} but exponents carry q_a = {}",
            pot.q_a(),
            exps.q_a()
        )));
    }
    Ok(())
}

/// Velocity `V_i = repulsion_i − U(X_i)` at every grid node.
pub fn rhs(x: &InverseCdf, pot: &AttractionPotential, exps: &Exponents) -> Result<Vec<f64>> {
    rhs_values(x.values(), pot, exps)
}

/// As [`rhs`] for raw node values, which must be finite and nondecreasing.
pub fn rhs_values(x: &[f64], pot: &AttractionPotential, exps: &Exponents) -> Result<Vec<f64>> {
    check_monotone(x)?;
    check_exponents(pot, exps)?;
    let field = Field {
        pot,
        q_r: exps.q_r(),
        threads: 1,
        fast: false,
    };
    let mut out = vec![0.0; x.len()];
    field.eval(x, &[], &[], &mut out, &mut []);
    Ok(out)
}

/// Reusable stage buffers for the explicit schemes.
struct Stepper<'a> {
    field: Field<'a>,
    scheme: Scheme,
    probe_z: Vec<f64>,
    k: [Vec<f64>; 4],
    kp: [Vec<f64>; 4],
    tmp: Vec<f64>,
    tmp_p: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(pot: &'a AttractionPotential, exps: &Exponents, cfg: &IntegratorConfig, n: usize) -> Self {
        let np = cfg.probes.len();
        Self {
            field: Field {
                pot,
                q_r: exps.q_r(),
                threads: cfg.threads.max(1),
                fast: cfg.fast_repulsion,
            },
            scheme: cfg.scheme,
            probe_z: cfg.probes.iter().map(|p| p.z).collect(),
            k: std::array::from_fn(|_| vec![0.0; n]),
            kp: std::array::from_fn(|_| vec![0.0; np]),
            tmp: vec![0.0; n],
            tmp_p: vec![0.0; np],
        }
    }

    /// Advances `x` and `p` in place by `dt`.
    fn advance(&mut self, x: &mut [f64], p: &mut [f64], dt: f64) {
        let Self {
            field,
            probe_z,
            k,
            kp,
            tmp,
            tmp_p,
            ..
        } = self;
        match self.scheme {
            Scheme::Euler => {
                field.eval(x, probe_z, p, &mut k[0], &mut kp[0]);
                axpy(x, dt, &k[0]);
                axpy(p, dt, &kp[0]);
            }
            Scheme::Rk4 => {
                let [k1, k2, k3, k4] = k;
                let [p1, p2, p3, p4] = kp;
                field.eval(x, probe_z, p, k1, p1);
                offset(tmp, x, 0.5 * dt, k1);
                offset(tmp_p, p, 0.5 * dt, p1);
                field.eval(tmp, probe_z, tmp_p, k2, p2);
                offset(tmp, x, 0.5 * dt, k2);
                offset(tmp_p, p, 0.5 * dt, p2);
                field.eval(tmp, probe_z, tmp_p, k3, p3);
                offset(tmp, x, dt, k3);
                offset(tmp_p, p, dt, p3);
                field.eval(tmp, probe_z, tmp_p, k4, p4);
                combine(x, dt, k1, k2, k3, k4);
                combine(p, dt, p1, p2, p3, p4);
            }
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

fn offset(out: &mut [f64], base: &[f64], a: f64, k: &[f64]) {
    for ((o, b), k) in out.iter_mut().zip(base).zip(k) {
        *o = b + a * k;
    }
}

fn combine(x: &mut [f64], dt: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) {
    let h = dt / 6.0;
    for i in 0..x.len() {
        x[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Rejects a stepped state that lost order or overflowed.
fn accept(x: Vec<f64>, probes: &[f64], t: f64, dt: f64) -> Result<InverseCdf> {
    if let Some(index) = x.iter().chain(probes).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    match InverseCdf::new(x) {
        Ok(x) => Ok(x),
        Err(Error::NonMonotone { index, .. }) => Err(Error::StepAborted {
            t,
            dt,
            index,
            suggested: 0.5 * dt,
        }),
        Err(e) => Err(e),
    }
}

/// One step of size `cfg.dt`.
pub fn step(
    state: &FlowState,
    cfg: &IntegratorConfig,
    pot: &AttractionPotential,
    exps: &Exponents,
) -> Result<FlowState> {
    cfg.validate(pot.lambda())?;
    check_exponents(pot, exps)?;
    if state.probes.len() != cfg.probes.len() {
        return Err(Error::Shape {
            expected: cfg.probes.len(),
            found: state.probes.len(),
        });
    }
    let mut stepper = Stepper::new(pot, exps, cfg, state.x.len());
    let mut x = state.x.values().to_vec();
    let mut p = state.probes.clone();
    stepper.advance(&mut x, &mut p, cfg.dt);
    let t = state.t + cfg.dt;
    let x = accept(x, &p, t, cfg.dt)?;
    Ok(FlowState {
        t,
        min_slope: x.min_slope(),
        x,
        probes: p,
    })
}

/// Exact solution for `q_a = q_r = 2`:
/// `X(t) = e^{−2(m−1)t} (X₀ − (1 − e^{−2t}) c₀) + (1 − e^{−2mt}) com(ω)`.
pub fn closed_form_q2(x0: &InverseCdf, profile: &ReferenceProfile, t: f64) -> InverseCdf {
    let m = profile.mass();
    let c0 = x0.mean();
    let com = profile.center_of_mass();
    let decay = (-2.0 * (m - 1.0) * t).exp();
    let shift = -(-2.0 * t).exp_m1() * c0;
    let target = -(-2.0 * m * t).exp_m1() * com;
    let x = x0
        .values()
        .iter()
        .map(|&x| decay * (x - shift) + target)
        .collect();
    InverseCdf::new(x).expect("an increasing affine map keeps order")
}

fn certificate_value(min_slope: f64, lambda: f64, t: f64) -> f64 {
    if min_slope == 0.0 {
        0.0
    } else {
        min_slope * (lambda * t).exp()
    }
}

/// Integrates from `x0` at `t = 0` to `cfg.t_end`, recording the initial
/// state, every `record_every`-th step and the final state.
pub fn simulate(
    x0: &InverseCdf,
    pot: &AttractionPotential,
    exps: &Exponents,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let lambda = pot.lambda();
    cfg.validate(lambda)?;
    check_exponents(pot, exps)?;

    let initial = FlowState::new(x0.clone(), &cfg.probes);
    let mut certificate = certificate_value(initial.min_slope, lambda, 0.0);
    let mut traj = Trajectory {
        states: vec![initial],
        lambda,
        slope_certificate: certificate,
        certificate_history: vec![certificate],
        probe_z: cfg.probes.iter().map(|p| p.z).collect(),
        steps: 0,
    };

    let steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let mut stepper = Stepper::new(pot, exps, cfg, x0.len());
    let mut x = x0.values().to_vec();
    let mut p: Vec<f64> = cfg.probes.iter().map(|p| p.x).collect();
    let mut t = 0.0;
    for k in 1..=steps {
        let t_next = if k == steps { cfg.t_end } else { k as f64 * cfg.dt };
        let h = t_next - t;
        stepper.advance(&mut x, &mut p, h);
        t = t_next;
        let accepted = accept(x, &p, t, h)?;
        let min_slope = accepted.min_slope();
        certificate = certificate.min(certificate_value(min_slope, lambda, t));
        if k % cfg.record_every == 0 || k == steps {
            traj.states.push(FlowState {
                t,
                x: accepted.clone(),
                min_slope,
                probes: p.clone(),
            });
            traj.certificate_history.push(certificate);
        }
        x = accepted.into_values();
    }
    traj.slope_certificate = certificate;
    traj.steps = steps;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ReferenceProfile {
        ReferenceProfile::uniform(0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn centered_point_cloud_is_stationary_for_quadratic_kernels() {
        let p = unit();
        let pot = AttractionPotential::new(&p, 2.0, 64).unwrap();
        let exps = Exponents::new(2.0, 2.0).unwrap();
        let x = InverseCdf::new(vec![0.5; 32]).unwrap();
        let v = rhs(&x, &pot, &exps).unwrap();
        assert!(v.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn deep_left_nodes_drift_at_rank_speed() {
        let p = ReferenceProfile::uniform(0.0, 1.0, 0.7).unwrap();
        let pot = AttractionPotential::new(&p, 1.0, 64).unwrap();
        let exps = Exponents::new(1.0, 1.0).unwrap();
        let x = InverseCdf::uniform(-10.0, -9.0, 40).unwrap();
        let v = rhs(&x, &pot, &exps).unwrap();
        for (i, v) in v.iter().enumerate() {
            let z = x.z(i);
            assert!((v - (2.0 * z - 1.0 + 0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_rejects_unordered_values() {
        let pot = AttractionPotential::new(&unit(), 2.0, 8).unwrap();
        let exps = Exponents::new(2.0, 1.5).unwrap();
        assert!(matches!(
            rhs_values(&[0.0, 1.0, 0.5], &pot, &exps),
            Err(Error::NonMonotone { index: 1, .. })
        ));
    }

    #[test]
    fn stationary_state_does_not_move() {
        let p = unit();
        let pot = AttractionPotential::new(&p, 2.0, 64).unwrap();
        let exps = Exponents::new(2.0, 2.0).unwrap();
        let state = FlowState::new(InverseCdf::new(vec![0.5; 16]).unwrap(), &[]);
        let cfg = IntegratorConfig::new(0.1, 1.0);
        let next = step(&state, &cfg, &pot, &exps).unwrap();
        assert_eq!(next.x, state.x);
        assert!((next.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn one_rk4_step_matches_closed_form() {
        let p = ReferenceProfile::uniform(-0.5, 0.5, 2.0).unwrap();
        let pot = AttractionPotential::new(&p, 2.0, 200).unwrap();
        let exps = Exponents::new(2.0, 2.0).unwrap();
        let x0 = InverseCdf::from_fn(200, |z| 1.0 + z * z).unwrap();
        let err = |dt: f64| {
            let next = step(
                &FlowState::new(x0.clone(), &[]),
                &IntegratorConfig::new(dt, dt),
                &pot,
                &exps,
            )
            .unwrap();
            wasserstein(&next.x, &closed_form_q2(&x0, &p, dt))
        };
        // Local error of a fifth-order step: halving dt divides it by ~32.
        let ratio = err(0.04) / err(0.02);
        assert!((28.0..36.0).contains(&ratio), "ratio {ratio}");
        assert!(err(0.02) < 1e-7);
    }

    fn wasserstein(a: &InverseCdf, b: &InverseCdf) -> f64 {
        crate::measures::wasserstein(a, b, f64::INFINITY).unwrap()
    }

    #[test]
    fn euler_is_first_order() {
        let p = ReferenceProfile::uniform(0.0, 2.0, 1.0).unwrap();
        let pot = AttractionPotential::new(&p, 2.0, 100).unwrap();
        let exps = Exponents::new(2.0, 2.0).unwrap();
        let x0 = InverseCdf::uniform(-1.0, 0.0, 100).unwrap();
        let exact = closed_form_q2(&x0, &p, 0.5);
        let err = |dt: f64| {
            let cfg = IntegratorConfig::new(dt, 0.5).scheme(Scheme::Euler);
            let traj = simulate(&x0, &pot, &exps, &cfg).unwrap();
            wasserstein(&traj.last().x, &exact)
        };
        let ratio = err(0.01) / err(0.005);
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn step_guard_reports_a_usable_step() {
        let pot = AttractionPotential::new(&unit(), 1.5, 16).unwrap();
        let cfg = IntegratorConfig::new(0.2, 1.0);
        match cfg.validate(pot.lambda()) {
            Err(Error::StepGuard { suggested, .. }) => {
                assert!((suggested - 0.5 / 3.75).abs() < 1e-15);
                assert!(IntegratorConfig::new(suggested, 1.0).validate(pot.lambda()).is_ok());
            }
            other => panic!("expected a step guard error, got {other:?}"),
        }
    }

    #[test]
    fn order_loss_aborts_with_a_smaller_step() {
        // A single quadrature atom makes U steep right at the cluster, far
        // beyond the Lipschitz bound of the exact convolution.
        let pot = AttractionPotential::new(&unit(), 1.1, 1).unwrap();
        let exps = Exponents::new(1.1, 1.0).unwrap();
        let x0 = InverseCdf::from_fn(50, |z| 0.5 + 1e-6 * (z - 0.5)).unwrap();
        let cfg = IntegratorConfig::new(0.2, 1.0).scheme(Scheme::Euler);
        match simulate(&x0, &pot, &exps, &cfg) {
            Err(Error::StepAborted { suggested, dt, .. }) => assert_eq!(suggested, 0.5 * dt),
            other => panic!("expected an abort, got {other:?}"),
        }
    }

    #[test]
    fn threaded_and_fast_paths_agree() {
        let p = ReferenceProfile::new(vec![-1.0, 0.0, 1.5], vec![0.4, 0.6]).unwrap();
        let x0 = InverseCdf::from_fn(300, |z| 2.0 * z * z - 0.3).unwrap();
        for (q_a, q_r) in [(1.7, 1.3), (2.0, 2.0)] {
            let pot = AttractionPotential::new(&p, q_a, 300).unwrap();
            let exps = Exponents::new(q_a, q_r).unwrap();
            let base = IntegratorConfig::new(0.01, 0.05);
            let serial = simulate(&x0, &pot, &exps, &base).unwrap();
            let threaded = simulate(&x0, &pot, &exps, &base.clone().threads(3)).unwrap();
            assert_eq!(serial.last().x, threaded.last().x);
            let fast = simulate(&x0, &pot, &exps, &base.fast_repulsion(true)).unwrap();
            assert!(wasserstein(&serial.last().x, &fast.last().x) < 1e-12);
        }
    }

    #[test]
    fn recording_keeps_initial_and_final_states() {
        let pot = AttractionPotential::new(&unit(), 2.0, 32).unwrap();
        let exps = Exponents::new(2.0, 1.5).unwrap();
        let x0 = InverseCdf::uniform(0.0, 1.0, 32).unwrap();
        let cfg = IntegratorConfig::new(0.1, 1.05).record_every(4);
        let traj = simulate(&x0, &pot, &exps, &cfg).unwrap();
        assert_eq!(traj.steps, 11);
        let times = traj.times();
        assert_eq!(times.len(), 4);
        assert_eq!(times[0], 0.0);
        assert!((times[1] - 0.4).abs() < 1e-12);
        assert_eq!(*times.last().unwrap(), 1.05);
        assert!(traj.slope_ratio() >= 1.0 - 1e-6);
    }

    #[test]
    fn closed_form_basics() {
        let p = ReferenceProfile::uniform(0.0, 1.0, 1.0).unwrap();
        let x0 = InverseCdf::from_fn(50, |z| z.powi(3) - 2.0).unwrap();
        assert_eq!(closed_form_q2(&x0, &p, 0.0), x0);
        let later = closed_form_q2(&x0, &p, 3.0);
        let d0: Vec<f64> = x0.values().iter().zip(later.values()).map(|(a, b)| b - a).collect();
        let spread = d0.iter().cloned().fold(f64::MIN, f64::max) - d0.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-13);
    }

    #[test]
    fn probes_follow_the_endpoint_characteristic() {
        let p = unit();
        let pot = AttractionPotential::new(&p, 1.0, 100).unwrap();
        let exps = Exponents::new(1.0, 1.0).unwrap();
        let x0 = InverseCdf::uniform(-3.0, -2.0, 100).unwrap();
        let cfg = IntegratorConfig::new(0.01, 0.5).probes(vec![
            Probe { z: 0.0, x: -3.0 },
            Probe { z: 1.0, x: -2.0 },
        ]);
        let traj = simulate(&x0, &pot, &exps, &cfg).unwrap();
        let left = traj.probe_path(0);
        assert!(left.iter().all(|x| *x == -3.0));
        let right = traj.probe_path(1);
        assert!((right.last().unwrap() + 1.0).abs() < 1e-12);
    }
}

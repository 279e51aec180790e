//! Pseudo-inverse representation of finite measures on the line.
//!
//! The evolving state is a probability measure stored through its
//! pseudo-inverse `X(z) = inf { x : F(x) > z }` sampled at the midpoints
//! `z_i = (i + 1/2) / n`. The reference profile is a histogram, so its CDF
//! `G` is piecewise linear and its pseudo-inverse `Y` has a closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Midpoint `z_i = (i + 1/2) / n` of the `i`-th cell of the uniform mass grid.
#[inline]
pub fn grid_point(n: usize, i: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Compactly supported piecewise-constant density with exact CDF and
/// pseudo-inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub struct ReferenceProfile {
    breakpoints: Vec<f64>,
    densities: Vec<f64>,
    /// `cumulative[k] = G(breakpoints[k])`
    cumulative: Vec<f64>,
    mass: f64,
    density_bound: f64,
}

/// On-disk form of a profile: `{ "breakpoints": [...], "densities": [...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub breakpoints: Vec<f64>,
    pub densities: Vec<f64>,
}

impl TryFrom<ProfileSpec> for ReferenceProfile {
    type Error = Error;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        ReferenceProfile::new(spec.breakpoints, spec.densities)
    }
}

impl From<ReferenceProfile> for ProfileSpec {
    fn from(p: ReferenceProfile) -> Self {
        ProfileSpec {
            breakpoints: p.breakpoints,
            densities: p.densities,
        }
    }
}

impl ReferenceProfile {
    pub fn new(breakpoints: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidProfile(
                "need at least two breakpoints".into(),
            ));
        }
        if densities.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidProfile(format!(
                "{} breakpoints require {} densities, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                densities.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidProfile("breakpoints must be finite".into()));
        }
        if let Some(k) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProfile(format!(
                "breakpoints must be strictly increasing (b[{k}] >= b[{}])",
                k + 1
            )));
        }
        if densities.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidProfile(
                "densities must be finite and nonnegative".into(),
            ));
        }

        let mut cumulative = Vec::with_capacity(breakpoints.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for (k, rho) in densities.iter().enumerate() {
            acc += rho * (breakpoints[k + 1] - breakpoints[k]);
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidProfile("total mass must be positive".into()));
        }
        let density_bound = densities.iter().copied().fold(0.0, f64::max);

        Ok(Self {
            breakpoints,
            densities,
            cumulative,
            mass: acc,
            density_bound,
        })
    }

    /// Constant density on `[a, b]` carrying total mass `mass`.
    pub fn uniform(a: f64, b: f64, mass: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || b <= a {
            return Err(Error::InvalidProfile(format!("empty interval [{a}, {b}]")));
        }
        Self::new(vec![a, b], vec![mass / (b - a)])
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("profile serializes")
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn density_bound(&self) -> f64 {
        self.density_bound
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// Smallest closed interval carrying all the mass (zero-density end
    /// segments are skipped).
    pub fn support(&self) -> (f64, f64) {
        let first = self.densities.iter().position(|&d| d > 0.0).unwrap();
        let last = self.densities.iter().rposition(|&d| d > 0.0).unwrap();
        (self.breakpoints[first], self.breakpoints[last + 1])
    }

    /// Same profile moved by `shift`.
    pub fn translated(&self, shift: f64) -> Self {
        let breakpoints = self.breakpoints.iter().map(|b| b + shift).collect();
        Self::new(breakpoints, self.densities.clone()).expect("translation keeps validity")
    }

    /// Density value, with segments taken right-open `[b_k, b_{k+1})`.
    pub fn density(&self, x: f64) -> f64 {
        match self.segment_of(x) {
            Some(k) => self.densities[k],
            None => 0.0,
        }
    }

    fn segment_of(&self, x: f64) -> Option<usize> {
        let b = &self.breakpoints;
        if x < b[0] || x >= b[b.len() - 1] {
            return None;
        }
        // last k with b[k] <= x
        Some(b.partition_point(|&bk| bk <= x) - 1)
    }

    /// Cumulative distribution `G(x) = ω((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        if x <= b[0] {
            return 0.0;
        }
        if x >= b[b.len() - 1] {
            return self.mass;
        }
        let k = b.partition_point(|&bk| bk <= x) - 1;
        self.cumulative[k] + self.densities[k] * (x - b[k])
    }

    /// Right-continuous pseudo-inverse `Y(ζ) = inf { x : G(x) > ζ }` for
    /// `ζ ∈ [0, m)`. Across zero-density gaps this is the left edge of the
    /// next segment carrying mass.
    pub fn pseudo_inverse(&self, zeta: f64) -> Result<f64> {
        if !(0.0..self.mass).contains(&zeta) {
            return Err(Error::Domain(format!(
                "pseudo-inverse argument {zeta} outside [0, {})",
                self.mass
            )));
        }
        Ok(self.pseudo_inverse_unchecked(zeta))
    }

    pub(crate) fn pseudo_inverse_unchecked(&self, zeta: f64) -> f64 {
        // first segment whose upper cumulative mass exceeds zeta; such a
        // segment necessarily has positive density
        let k = self.cumulative[1..].partition_point(|&c| c <= zeta);
        let k = k.min(self.densities.len() - 1);
        let (lo, hi) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let rho = self.densities[k];
        if rho == 0.0 {
            return lo;
        }
        (lo + (zeta - self.cumulative[k]) / rho).clamp(lo, hi)
    }

    /// Left-continuous quantile `inf { x : G(x) >= ζ }` for `ζ ∈ (0, m]`.
    /// Differs from [`pseudo_inverse`](Self::pseudo_inverse) only where `ζ`
    /// is the mass to the left of a zero-density gap.
    pub fn left_quantile(&self, zeta: f64) -> Result<f64> {
        if !(zeta > 0.0 && zeta <= self.mass) {
            return Err(Error::Domain(format!(
                "quantile argument {zeta} outside (0, {}]",
                self.mass
            )));
        }
        let k = self.cumulative[1..].partition_point(|&c| c < zeta);
        let k = k.min(self.densities.len() - 1);
        let (lo, hi) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let rho = self.densities[k];
        if rho == 0.0 {
            return Ok(lo);
        }
        Ok((lo + (zeta - self.cumulative[k]) / rho).clamp(lo, hi))
    }

    /// `∫ y dω(y)`, exact.
    pub fn first_moment(&self) -> f64 {
        self.segments()
            .map(|(a, b, rho)| 0.5 * rho * (b * b - a * a))
            .sum()
    }

    pub fn center_of_mass(&self) -> f64 {
        self.first_moment() / self.mass
    }

    /// `∫ |y|^r dω(y)`, exact, for `r > -1`.
    pub fn abs_moment(&self, r: f64) -> f64 {
        let antiderivative = |x: f64| x.signum() * x.abs().powf(r + 1.0) / (r + 1.0);
        self.segments()
            .map(|(a, b, rho)| rho * (antiderivative(b) - antiderivative(a)))
            .sum()
    }

    /// Iterator over `(left, right, density)` for every segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.densities)
            .map(|(w, &rho)| (w[0], w[1], rho))
    }
}

/// Nondecreasing pseudo-inverse of a probability measure, sampled on the
/// midpoint grid `z_i = (i + 1/2) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCdf {
    x: Vec<f64>,
}

impl InverseCdf {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Input("an inverse CDF needs at least one sample".into()));
        }
        check_monotone(&x)?;
        Ok(Self { x })
    }

    /// Samples `f(z_i)` on an `n`-point grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| f(grid_point(n, i))).collect())
    }

    /// Pseudo-inverse of the normalized profile `ω / m`, i.e. `z ↦ Y(m z)`.
    pub fn from_profile(profile: &ReferenceProfile, n: usize) -> Self {
        let m = profile.mass();
        Self::from_fn(n, |z| profile.pseudo_inverse_unchecked(m * z))
            .expect("pseudo-inverse samples are monotone")
    }

    /// Uniform probability measure on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if a.is_nan() || b.is_nan() || b < a {
            return Err(Error::Input(format!("invalid interval [{a}, {b}]")));
        }
        Self::from_fn(n, |z| a + (b - a) * z)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn into_values(self) -> Vec<f64> {
        self.x
    }

    pub fn z(&self, i: usize) -> f64 {
        grid_point(self.x.len(), i)
    }

    /// `(z_i, X(z_i))` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.x.len();
        self.x.iter().enumerate().map(move |(i, &x)| (grid_point(n, i), x))
    }

    /// Center of mass `∫₀¹ X(z) dz` by the midpoint rule.
    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }

    /// `min_i (x_{i+1} - x_i) / (z_{i+1} - z_i)`; infinite for a single sample.
    pub fn min_slope(&self) -> f64 {
        let n = self.x.len() as f64;
        self.x
            .windows(2)
            .map(|w| (w[1] - w[0]) * n)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            x: self.x.iter().map(|x| x + c).collect(),
        }
    }

    /// Fraction of mass inside `[lo, hi]` (a windowed test of vague
    /// convergence).
    pub fn window_mass(&self, lo: f64, hi: f64) -> f64 {
        let inside = self.x.iter().filter(|&&x| lo <= x && x <= hi).count();
        inside as f64 / self.x.len() as f64
    }
}

pub(crate) fn check_monotone(x: &[f64]) -> Result<()> {
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if let Some(index) = x.windows(2).position(|w| w[0] > w[1]) {
        return Err(Error::NonMonotone {
            index,
            left: x[index],
            right: x[index + 1],
        });
    }
    Ok(())
}

/// Quadrature over the mass variable `ζ ∈ (0, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl MassQuadrature {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, mass: f64) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Input(
                "quadrature needs equally many nodes and weights".into(),
            ));
        }
        if weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
            return Err(Error::Input("quadrature weights must be positive".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1])
            || nodes[0] <= 0.0
            || nodes[nodes.len() - 1] >= mass
        {
            return Err(Error::Input(format!(
                "quadrature nodes must increase strictly inside (0, {mass})"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - mass).abs() > 1e-12 * mass.max(1.0) {
            return Err(Error::Input(format!(
                "quadrature weights sum to {total}, expected {mass}"
            )));
        }
        Ok(Self { nodes, weights })
    }

    /// Midpoint rule `ζ_j = (j - 1/2) m / count` with equal weights.
    pub fn midpoint(mass: f64, count: usize) -> Self {
        assert!(count > 0 && mass > 0.0);
        let h = mass / count as f64;
        Self {
            nodes: (0..count).map(|j| (j as f64 + 0.5) * h).collect(),
            weights: vec![h; count],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Y(ζ_j)` for every node.
    pub fn sample(&self, profile: &ReferenceProfile) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|&z| profile.pseudo_inverse_unchecked(z))
            .collect()
    }
}

/// Quadrature of `(g ∗ ω)(x) = ∫₀^m g(x − Y(ζ)) dζ`.
pub fn convolve_kernel(
    profile: &ReferenceProfile,
    quad: &MassQuadrature,
    g: impl Fn(f64) -> f64,
    x: f64,
) -> f64 {
    quad.nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&zeta, &w)| w * g(x - profile.pseudo_inverse_unchecked(zeta)))
        .sum()
}

/// `W_p` between two measures sampled on the same grid. `p = f64::INFINITY`
/// returns the grid maximum, a lower bound for the true `W_∞`.
pub fn wasserstein(a: &InverseCdf, b: &InverseCdf, p: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            found: b.len(),
        });
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("Wasserstein order must be >= 1, got {p}")));
    }
    let diffs = a.x.iter().zip(&b.x).map(|(u, v)| (u - v).abs());
    if p.is_infinite() {
        return Ok(diffs.fold(0.0, f64::max));
    }
    let n = a.len() as f64;
    let sum: f64 = if p == 1.0 {
        diffs.sum()
    } else if p == 2.0 {
        diffs.map(|d| d * d).sum()
    } else {
        diffs.map(|d| d.powf(p)).sum()
    };
    Ok((sum / n).powf(1.0 / p))
}

/// Midpoint-rule absolute moment `∫₀¹ |X(z)|^r dz`.
pub fn moment(a: &InverseCdf, r: f64) -> f64 {
    assert!(r > 0.0, "moment order must be positive, got {r}");
    a.x.iter().map(|x| x.abs().powf(r)).sum::<f64>() / a.len() as f64
}

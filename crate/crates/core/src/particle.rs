//! `N`-particle dithering energy and its gradient flow, kept as an
//! independent oracle for the continuum right-hand side.
//!
//! The attraction integral `∫ ψ_a(p − y) dω(y)` is always evaluated with the
//! mass-variable quadrature of the attraction potential, so the comparison
//! with the grid solver is exact for `q_a > 1` in quadrature mode.

use crate::error::{Error, Result};
use crate::kernels::{psi, psi_prime, AttractionPotential, Exponents};
use crate::measures::{check_monotone, convolve_kernel, InverseCdf};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    p: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Input("a particle system needs at least one particle".into()));
        }
        check_monotone(&p)?;
        Ok(Self { p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.p
    }
}

impl From<&InverseCdf> for ParticleSystem {
    fn from(x: &InverseCdf) -> Self {
        Self {
            p: x.values().to_vec(),
        }
    }
}

/// `E_N[p] = −(1/(2N²)) Σ_{i,j} ψ_r(p_i − p_j) + (1/N) Σ_i ∫ ψ_a(p_i − y) dω(y)`.
pub fn discrete_energy(sys: &ParticleSystem, pot: &AttractionPotential, exps: &Exponents) -> f64 {
    let n = sys.len() as f64;
    let (qa, qr) = (exps.q_a(), exps.q_r());
    let mut pairs = 0.0;
    for (i, &pi) in sys.p.iter().enumerate() {
        for &pj in &sys.p[i + 1..] {
            pairs += psi(qr, pi - pj);
        }
    }
    let attraction: f64 = sys
        .p
        .iter()
        .map(|&pi| convolve_kernel(pot.profile(), pot.quadrature(), |u| psi(qa, u), pi))
        .sum();
    // each unordered pair appears twice in the double sum
    -pairs / (n * n) + attraction / n
}

/// `∂E_N / ∂p_i`.
pub fn energy_gradient(
    sys: &ParticleSystem,
    pot: &AttractionPotential,
    exps: &Exponents,
) -> Result<Vec<f64>> {
    let (qa, qr) = (exps.q_a(), exps.q_r());
    if qr == 1.0 {
        if let Some(i) = sys.p.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Subdifferential { i, j: i + 1 });
        }
    }
    let n = sys.len();
    let nf = n as f64;
    let mut push = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let f = psi_prime(qr, sys.p[i] - sys.p[j]);
            push[i] += f;
            push[j] -= f;
        }
    }
    Ok(sys
        .p
        .iter()
        .zip(&push)
        .map(|(&pi, &s)| {
            let pull = convolve_kernel(pot.profile(), pot.quadrature(), |u| psi_prime(qa, u), pi);
            (pull - s / nf) / nf
        })
        .collect())
}

/// Scaled particle velocity `−N ∂E_N/∂p_i`.
pub fn particle_rhs(
    sys: &ParticleSystem,
    pot: &AttractionPotential,
    exps: &Exponents,
) -> Result<Vec<f64>> {
    let n = sys.len() as f64;
    Ok(energy_gradient(sys, pot, exps)?
        .into_iter()
        .map(|g| -n * g)
        .collect())
}

/// Classical RK4 for the particle flow, returning every state.
pub fn particle_flow(
    sys: &ParticleSystem,
    pot: &AttractionPotential,
    exps: &Exponents,
    dt: f64,
    steps: usize,
) -> Result<Vec<ParticleSystem>> {
    let velocity = |p: &[f64]| -> Result<Vec<f64>> {
        particle_rhs(&ParticleSystem { p: p.to_vec() }, pot, exps)
    };
    let shift = |p: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        p.iter().zip(k).map(|(p, k)| p + a * k).collect()
    };
    let mut out = vec![sys.clone()];
    let mut p = sys.p.clone();
    for _ in 0..steps {
        let k1 = velocity(&p)?;
        let k2 = velocity(&shift(&p, &k1, 0.5 * dt))?;
        let k3 = velocity(&shift(&p, &k2, 0.5 * dt))?;
        let k4 = velocity(&shift(&p, &k3, dt))?;
        for i in 0..p.len() {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(ParticleSystem::new(p.clone())?);
    }
    Ok(out)
}

//! Power kernels `ψ(x) = |x|^q` and the attraction field `U = ψ_a' ∗ ω`.

use crate::error::{Error, Result};
use crate::measures::{MassQuadrature, ReferenceProfile};

/// `|x|^q`
#[inline]
pub fn psi(q: f64, x: f64) -> f64 {
    if q == 1.0 {
        x.abs()
    } else if q == 2.0 {
        x * x
    } else {
        x.abs().powf(q)
    }
}

/// `q sgn(x) |x|^(q-1)`, with `ψ'(0) = 0` for every `q` (including `q = 1`).
#[inline]
pub fn psi_prime(q: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if q == 1.0 {
        x.signum()
    } else if q == 2.0 {
        2.0 * x
    } else {
        q * x.signum() * x.abs().powf(q - 1.0)
    }
}

/// `q (q-1) |x|^(q-2)`; undefined at the origin unless `q = 2`.
pub fn psi_double_prime(q: f64, x: f64) -> Result<f64> {
    if q == 2.0 {
        return Ok(2.0);
    }
    if x == 0.0 {
        return Err(Error::Singularity { q });
    }
    Ok(q * (q - 1.0) * x.abs().powf(q - 2.0))
}

/// Antiderivative of `ψ`: `sgn(u) |u|^(q+1) / (q+1)`.
#[inline]
fn psi_antiderivative(q: f64, u: f64) -> f64 {
    u.signum() * u.abs().powf(q + 1.0) / (q + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `q_r < q_a`
    AttractionDominated,
    /// `q_r = q_a`
    Balanced,
}

/// Kernel pair with `1 <= q_r <= q_a <= 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    q_a: f64,
    q_r: f64,
}

impl Exponents {
    pub fn new(q_a: f64, q_r: f64) -> Result<Self> {
        let ok = q_a.is_finite() && q_r.is_finite() && 1.0 <= q_r && q_r <= q_a && q_a <= 2.0;
        if !ok {
            return Err(Error::Exponents { q_a, q_r });
        }
        Ok(Self { q_a, q_r })
    }

    pub fn q_a(&self) -> f64 {
        self.q_a
    }

    pub fn q_r(&self) -> f64 {
        self.q_r
    }

    pub fn regime(&self) -> Regime {
        if self.q_r < self.q_a {
            Regime::AttractionDominated
        } else {
            Regime::Balanced
        }
    }
}

/// How `U` and `ψ_a ∗ ω` are evaluated for `q_a > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttractionMode {
    /// Mass-variable quadrature `Σ_j w_j ψ_a'(x − Y(ζ_j))`.
    #[default]
    Quadrature,
    /// Exact integration against the piecewise-constant density.
    ClosedForm,
}

/// Precomputed attraction field `U = ψ_a' ∗ ω` together with its Lipschitz
/// bound `λ`.
#[derive(Debug, Clone)]
pub struct AttractionPotential {
    profile: ReferenceProfile,
    q_a: f64,
    quad: MassQuadrature,
    /// `Y(ζ_j)`
    atoms: Vec<f64>,
    lambda: f64,
    mode: AttractionMode,
}

impl AttractionPotential {
    /// Midpoint quadrature with `nodes` points over `(0, m)`.
    pub fn new(profile: &ReferenceProfile, q_a: f64, nodes: usize) -> Result<Self> {
        let quad = MassQuadrature::midpoint(profile.mass(), nodes);
        Self::with_quadrature(profile, q_a, quad)
    }

    pub fn with_quadrature(
        profile: &ReferenceProfile,
        q_a: f64,
        quad: MassQuadrature,
    ) -> Result<Self> {
        if !(1.0..=2.0).contains(&q_a) {
            return Err(Error::Exponents { q_a, q_r: 1.0 });
        }
        let atoms = quad.sample(profile);
        let mut pot = Self {
            profile: profile.clone(),
            q_a,
            quad,
            atoms,
            lambda: 0.0,
            mode: AttractionMode::Quadrature,
        };
        pot.lambda = lipschitz_lambda(&pot);
        Ok(pot)
    }

    pub fn with_mode(mut self, mode: AttractionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> AttractionMode {
        self.mode
    }

    pub fn profile(&self) -> &ReferenceProfile {
        &self.profile
    }

    pub fn q_a(&self) -> f64 {
        self.q_a
    }

    pub fn quadrature(&self) -> &MassQuadrature {
        &self.quad
    }

    /// Quadrature atoms `Y(ζ_j)`.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `U(x) = (ψ_a' ∗ ω)(x)`. For `q_a = 1` this is always `2G(x) − m`.
    pub fn force(&self, x: f64) -> f64 {
        let q = self.q_a;
        if q == 1.0 {
            return 2.0 * self.profile.cdf(x) - self.profile.mass();
        }
        match self.mode {
            AttractionMode::Quadrature => {
                if q == 2.0 {
                    return self
                        .atoms
                        .iter()
                        .zip(self.quad.weights())
                        .map(|(y, w)| w * 2.0 * (x - y))
                        .sum();
                }
                self.atoms
                    .iter()
                    .zip(self.quad.weights())
                    .map(|(&y, &w)| w * psi_prime(q, x - y))
                    .sum()
            }
            AttractionMode::ClosedForm => self
                .profile
                .segments()
                .filter(|(_, _, rho)| *rho > 0.0)
                .map(|(a, b, rho)| rho * (psi(q, x - a) - psi(q, x - b)))
                .sum(),
        }
    }

    /// Exact `U'(x) = (ψ_a'' ∗ ω)(x)`, i.e. `2ω(x)` for `q_a = 1`.
    pub fn force_slope(&self, x: f64) -> f64 {
        let q = self.q_a;
        if q == 1.0 {
            return 2.0 * self.profile.density(x);
        }
        self.profile
            .segments()
            .filter(|(_, _, rho)| *rho > 0.0)
            .map(|(a, b, rho)| rho * (psi_prime(q, x - a) - psi_prime(q, x - b)))
            .sum()
    }

    /// `(ψ_a ∗ ω)(x)`, evaluated consistently with [`force`](Self::force):
    /// its derivative is `U` exactly in closed form and for `q_a = 1`, and
    /// the quadrature of `U` otherwise.
    pub fn potential(&self, x: f64) -> f64 {
        let q = self.q_a;
        let closed = q == 1.0 || self.mode == AttractionMode::ClosedForm;
        if closed {
            self.profile
                .segments()
                .filter(|(_, _, rho)| *rho > 0.0)
                .map(|(a, b, rho)| rho * (psi_antiderivative(q, x - a) - psi_antiderivative(q, x - b)))
                .sum()
        } else {
            self.atoms
                .iter()
                .zip(self.quad.weights())
                .map(|(&y, &w)| w * psi(q, x - y))
                .sum()
        }
    }
}

/// Lipschitz bound of `U`: `2‖ω‖∞` for `q_a = 1`, `2m` for `q_a = 2`, and
/// `q_a (q_a − 1) (2‖ω‖∞ / (q_a − 1) + m)` in between.
pub fn lipschitz_lambda(pot: &AttractionPotential) -> f64 {
    let q = pot.q_a;
    let bound = pot.profile.density_bound();
    let m = pot.profile.mass();
    if q == 1.0 {
        2.0 * bound
    } else if q == 2.0 {
        2.0 * m
    } else {
        q * (q - 1.0) * (2.0 / (q - 1.0) * bound + m)
    }
}

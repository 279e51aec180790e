//! JSON run configuration and its resolution into solver objects.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use wgflow::dynamics::{IntegratorConfig, Probe, Scheme};
use wgflow::io::read_inverse_cdf;
use wgflow::kernels::{AttractionMode, AttractionPotential, Exponents};
use wgflow::measures::{InverseCdf, ReferenceProfile};

use crate::exit::Failure;

/// Smallest grid accepted from a config.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProfileSource {
    Path(PathBuf),
    Inline(ReferenceProfile),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// Sample the reference profile itself, normalized to unit mass.
    #[default]
    Profile,
    Uniform {
        a: f64,
        b: f64,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attraction {
    #[default]
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Reports {
    pub energy: bool,
    pub fourier: bool,
    pub wasserstein_to_steady: bool,
    pub moments: bool,
}

impl Default for Reports {
    fn default() -> Self {
        Self {
            energy: true,
            fourier: false,
            wasserstein_to_steady: true,
            moments: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSource,
    pub q_a: f64,
    pub q_r: f64,
    #[serde(default)]
    pub initial: InitialSpec,
    pub n: usize,
    /// Atoms of the attraction quadrature; defaults to `n`.
    pub quadrature_nodes: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub attraction: Attraction,
    #[serde(default)]
    pub reports: Reports,
    /// `[t_lo, t_hi]` for rate fits; defaults to the last half of the run.
    pub fit_window: Option<[f64; 2]>,
    /// Order of the balanced-regime moment; defaults to `q / 2 − 0.1`.
    pub moment_order: Option<f64>,
    #[serde(default)]
    pub probes: Vec<Probe>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub fast_repulsion: bool,
}

fn default_safety() -> f64 {
    0.5
}

fn default_record_every() -> usize {
    1
}

/// A config with every path resolved and every object built.
pub struct Resolved {
    pub raw: RunConfig,
    pub profile: ReferenceProfile,
    pub exps: Exponents,
    pub pot: AttractionPotential,
    base: PathBuf,
}

impl Resolved {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("cannot read config {}: {e}", path.display())))?;
        let raw: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("cannot parse config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_raw(raw, base)
    }

    pub fn from_raw(raw: RunConfig, base: PathBuf) -> Result<Self, Failure> {
        let exps = Exponents::new(raw.q_a, raw.q_r).map_err(Failure::config)?;
        if raw.n < MIN_NODES {
            return Err(Failure::config(format!("n = {} is below the minimum {MIN_NODES}", raw.n)));
        }
        let profile = match &raw.profile {
            ProfileSource::Inline(p) => p.clone(),
            ProfileSource::Path(p) => {
                let p = base.join(p);
                let text = fs::read_to_string(&p)
                    .map_err(|e| Failure::io(format!("cannot read profile {}: {e}", p.display())))?;
                ReferenceProfile::from_json_str(&text)
                    .map_err(|e| Failure::config(format!("bad profile {}: {e}", p.display())))?
            }
        };
        let nodes = raw.quadrature_nodes.unwrap_or(raw.n);
        let mode = match raw.attraction {
            Attraction::Quadrature => AttractionMode::Quadrature,
            Attraction::ClosedForm => AttractionMode::ClosedForm,
        };
        let pot = AttractionPotential::new(&profile, raw.q_a, nodes)
            .map_err(Failure::config)?
            .with_mode(mode);
        Ok(Self {
            raw,
            profile,
            exps,
            pot,
            base,
        })
    }

    pub fn n(&self) -> usize {
        self.raw.n
    }

    pub fn initial(&self) -> Result<InverseCdf, Failure> {
        let n = self.raw.n;
        match &self.raw.initial {
            InitialSpec::Profile => {
                let unit = ReferenceProfile::new(
                    self.profile.breakpoints().to_vec(),
                    self.profile
                        .densities()
                        .iter()
                        .map(|d| d / self.profile.mass())
                        .collect(),
                )
                .map_err(Failure::config)?;
                Ok(InverseCdf::from_profile(&unit, n))
            }
            InitialSpec::Uniform { a, b } => InverseCdf::uniform(*a, *b, n).map_err(Failure::config),
            InitialSpec::Csv { path } => {
                let p = self.base.join(path);
                let x = read_inverse_cdf(&p).map_err(Failure::from_core)?;
                if x.len() != n {
                    return Err(Failure::config(format!(
                        "initial CSV {} has {} nodes, config says n = {n}",
                        p.display(),
                        x.len()
                    )));
                }
                Ok(x)
            }
        }
    }

    /// Integrator settings, checked against the step guard.
    pub fn integrator(&self, threads: Option<usize>) -> Result<IntegratorConfig, Failure> {
        let dt = self
            .raw
            .dt
            .ok_or_else(|| Failure::config("config is missing dt"))?;
        let t_end = self
            .raw
            .t_end
            .ok_or_else(|| Failure::config("config is missing t_end"))?;
        let cfg = IntegratorConfig::new(dt, t_end)
            .scheme(self.raw.scheme)
            .safety(self.raw.safety)
            .record_every(self.raw.record_every)
            .probes(self.raw.probes.clone())
            .threads(threads.or(self.raw.threads).unwrap_or(1))
            .fast_repulsion(self.raw.fast_repulsion);
        cfg.validate(self.pot.lambda()).map_err(Failure::config)?;
        Ok(cfg)
    }

    pub fn fit_window(&self, t_end: f64) -> (f64, f64) {
        match self.raw.fit_window {
            Some([lo, hi]) => (lo, hi),
            None => (0.5 * t_end, t_end),
        }
    }
}

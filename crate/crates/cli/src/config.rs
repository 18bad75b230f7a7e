use dnls_core::soliton::{classify_params, find_kappa0, SolitonParams};
use dnls_core::{Grid, LabError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCfg {
    pub n: usize,
    pub half_width: f64,
}

impl GridCfg {
    pub fn build(&self) -> Result<Arc<Grid>, LabError> {
        Grid::new(self.n, self.half_width)
    }
}

/// Soliton parameters as requested. With `kappa0` set, `c` is resolved to
/// `2 kappa0(b) sqrt(omega)` on the run grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsCfg {
    pub b: f64,
    pub omega: f64,
    pub c: Option<f64>,
    pub kappa0: bool,
}

impl ParamsCfg {
    pub fn resolve(&self, grid: &Arc<Grid>) -> Result<SolitonParams, LabError> {
        let c = match (self.kappa0, self.c) {
            (true, _) => 2.0 * find_kappa0(self.b, grid)? * self.omega.sqrt(),
            (false, Some(c)) => c,
            (false, None) => return Err(LabError::InvalidConfig("give --c or --kappa0".into())),
        };
        let p = classify_params(self.b, self.omega, c);
        p.require_admissible()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonCfg {
    pub params: ParamsCfg,
    pub grid: GridCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCfg {
    pub params: ParamsCfg,
    pub grid: GridCfg,
    /// Check the factorized quadratic form on this many random fields.
    pub form_trials: Option<usize>,
    pub coercivity_trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialData {
    /// The exact soliton; the run reports its tracking error.
    Soliton,
    /// `phi + eps0` with `||eps0||_{H^1} = delta_frac ||phi||_{H^1}`; tracked.
    Perturbed { delta_frac: f64, chi_n: usize },
    /// `amplitude exp(-x^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveCfg {
    pub params: ParamsCfg,
    pub grid: GridCfg,
    pub data: InitialData,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub dealias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityCfg {
    pub params: ParamsCfg,
    pub grid: GridCfg,
    /// `||eps0||_{H^1} / ||phi||_{H^1}`, one run per entry.
    pub deltas: Vec<f64>,
    pub alpha_frac: f64,
    pub sign: f64,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Nodes of the grid used for the dense eigenproblem.
    pub chi_n: usize,
    pub slope_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkdvCfg {
    pub grid: GridCfg,
    pub trials: usize,
    pub seed: u64,
    pub kernel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunConfig {
    Soliton(SolitonCfg),
    Spectrum(SpectrumCfg),
    Evolve(EvolveCfg),
    Instability(InstabilityCfg),
    Gkdv(GkdvCfg),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Soliton(_) => "soliton",
            RunConfig::Spectrum(_) => "spectrum",
            RunConfig::Evolve(_) => "evolve",
            RunConfig::Instability(_) => "instability",
            RunConfig::Gkdv(_) => "gkdv",
        }
    }

    /// Exit code for failures inside the pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunConfig::Soliton(_) => 2,
            RunConfig::Spectrum(_) => 3,
            RunConfig::Evolve(_) => 4,
            RunConfig::Instability(_) => 5,
            RunConfig::Gkdv(_) => 6,
        }
    }

    pub fn grid(&self) -> GridCfg {
        match self {
            RunConfig::Soliton(c) => c.grid,
            RunConfig::Spectrum(c) => c.grid,
            RunConfig::Evolve(c) => c.grid,
            RunConfig::Instability(c) => c.grid,
            RunConfig::Gkdv(c) => c.grid,
        }
    }

    /// Hex sha256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

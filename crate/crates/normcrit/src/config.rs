//! Run configuration: one JSON document holding the instance, the grid and all solver options.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use normcrit_core::asymptotics::{default_nu_list, SweepOpts};
use normcrit_core::minimize::SolverOpts;
use normcrit_core::mountain::{LevelBoundOpts, MpOpts};
use normcrit_core::params::derive_constants;
use normcrit_core::{DerivedConstants, Grading, ProblemParams, RadialGrid};
use serde::{Deserialize, Serialize};

/// Tag written into every output document.
pub const SCHEMA: &str = "normcrit/1";

/// Gagliardo–Nirenberg constant of the default exponents α = β = 1.2, N = 3.
pub const DEFAULT_C_GN: f64 = 0.208_415_633_176_509_77;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Outer radius; 100 for N = 3 and 60 for N = 4 when absent.
    pub radius: Option<f64>,
    pub m: usize,
    pub grading: Grading,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { radius: None, m: 8000, grading: Grading::Exponential { h_min: 1e-6 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSpec {
    pub c_gn: f64,
    /// ν₀ = fraction·ν̄₀.
    pub nu0_fraction: f64,
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        ConstantsSpec { c_gn: DEFAULT_C_GN, nu0_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Explicit ν values; ν̄₀·2^{−k} for k in [k_min, k_max] when absent.
    pub nu_list: Option<Vec<f64>>,
    pub k_min: i32,
    pub k_max: i32,
    pub warm_start: bool,
    pub min_only: bool,
    /// Solve the smallest ν again from a cold start.
    pub cold_controls: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { nu_list: None, k_min: 3, k_max: 8, warm_start: true, min_only: false, cold_controls: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnSpec {
    pub trials: usize,
}

impl Default for GnSpec {
    fn default() -> Self {
        GnSpec { trials: 8 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub out: Option<String>,
    pub fields: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub params: ProblemParams,
    pub grid: GridSpec,
    pub constants: ConstantsSpec,
    pub solver: SolverOpts,
    pub mp: MpOpts,
    pub level_bound: LevelBoundOpts,
    pub sweep: SweepSpec,
    pub gn: GnSpec,
    pub seed: u64,
    pub outputs: OutputSpec,
}

impl RunSpec {
    /// Validates the spec and fills every implicit default so the echo is complete.
    pub fn resolve(mut self) -> Result<Self> {
        self.params = self.params.validate()?;
        if self.grid.radius.is_none() {
            self.grid.radius = Some(if self.params.dim == 3 { 100.0 } else { 60.0 });
        }
        if !(self.constants.nu0_fraction > 0.0 && self.constants.nu0_fraction < 1.0) {
            bail!("invalid `constants.nu0_fraction`: must lie in (0, 1)");
        }
        if !(self.constants.c_gn > 0.0) {
            bail!("invalid `constants.c_gn`: must be positive");
        }
        if self.sweep.k_min > self.sweep.k_max {
            bail!("invalid `sweep.k_min`: exceeds k_max");
        }
        self.build_grid()?;
        Ok(self)
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid>> {
        let radius = self.grid.radius.unwrap_or(if self.params.dim == 3 { 100.0 } else { 60.0 });
        Ok(Arc::new(RadialGrid::build(self.params.dim, radius, self.grid.m, self.grid.grading)?))
    }

    pub fn derived(&self) -> Result<DerivedConstants> {
        Ok(derive_constants(&self.params, self.constants.c_gn, self.constants.nu0_fraction)?)
    }

    pub fn nu_list(&self) -> Result<Vec<f64>> {
        match &self.sweep.nu_list {
            Some(l) => Ok(l.clone()),
            None => Ok(default_nu_list(&self.derived()?, self.sweep.k_min..=self.sweep.k_max)),
        }
    }

    pub fn sweep_opts(&self) -> SweepOpts {
        SweepOpts {
            solver: self.solver.clone(),
            mp: self.mp.clone(),
            warm_start: self.sweep.warm_start,
            min_only: self.sweep.min_only,
            c_gn: self.constants.c_gn,
            nu0_fraction: self.constants.nu0_fraction,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunSpec> {
    let spec: RunSpec = serde_json::from_str(text).context("config parse error")?;
    spec.resolve()
}

pub fn load_config(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

//! TOML run configuration. Unknown keys are rejected.
//!
//! ```toml
//! cfl = 0.4
//! t_end = 0.5
//!
//! [gas]
//! name = "ideal"            # or "custom" with `pressure = "Z + Z^2/(1+Z)"`
//! [transport]
//! name = "default"          # "canonical", or "power" with `b`
//! [scaling]
//! a = 1e-2
//! nu = 0.08
//! omega = 4e-3
//! lambda = 0.63
//! [grid]
//! cells = [128]             # one entry per axis
//! extents = [1.0]
//! bc = ["slip"]             # "slip" or "periodic"
//! [output]
//! stride = 0.05
//! [floors]
//! rho = 1e-12
//! theta = 1e-12
//! [initial]
//! rho_amp = 0.05
//! theta_amp = 0.05
//! u_amp = 0.05
//! mode = 1
//! delta = 0.0
//! [reference]
//! refine = 4
//! cfl = 0.5
//! growth_factor = 20.0
//! safety = 0.8
//! [sweep]
//! a_values = [1e-2, 1e-3, 1e-4]
//! alpha = 0.55
//! beta = 1.2
//! gamma = 0.1
//! delta = 0.1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::{EulerConfig, Filter, LifespanSettings};
use crate::grid::{Boundary, Grid};
use crate::nsf::{Floors, NsfRunConfig, Reconstruction};
use crate::scenario::InitialData;
use crate::thermo::{GasModel, ScalingParams, TransportModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_inf: Option<f64>,
}

impl Default for GasSection {
    fn default() -> Self {
        GasSection { name: "ideal".into(), pressure: None, s0: None, p_inf: None }
    }
}

impl GasSection {
    pub fn build(&self) -> Result<GasModel> {
        let mut gas = GasModel::by_name(&self.name, self.pressure.as_deref())?;
        if let Some(s0) = self.s0 {
            gas = gas.with_s0(s0);
        }
        if let Some(p) = self.p_inf {
            gas = gas.with_p_inf(p);
        }
        Ok(gas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl Default for TransportSection {
    fn default() -> Self {
        TransportSection { name: "default".into(), b: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cells: Vec<usize>,
    #[serde(default = "default_extents")]
    pub extents: Vec<f64>,
    #[serde(default = "default_bc")]
    pub bc: Vec<String>,
}

fn default_extents() -> Vec<f64> {
    vec![1.0]
}

fn default_bc() -> Vec<String> {
    vec!["slip".into()]
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { cells: vec![128], extents: default_extents(), bc: default_bc() }
    }
}

impl GridSection {
    pub fn build(&self) -> Result<Grid> {
        let dim = self.cells.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("grid.cells must have 1 or 2 entries, got {dim}")));
        }
        let pick = |v: &[f64], d: usize| v.get(d).or(v.first()).copied().unwrap_or(1.0);
        let bc_at = |d: usize| -> Result<Boundary> {
            let s = self.bc.get(d).or(self.bc.first()).ok_or_else(|| Error::Config("grid.bc is empty".into()))?;
            Boundary::parse(s)
        };
        let mut cells = [1, 1];
        let mut extents = [1.0, 1.0];
        let mut bc = [Boundary::SlipWall; 2];
        for d in 0..dim {
            cells[d] = self.cells[d];
            extents[d] = pick(&self.extents, d);
            bc[d] = bc_at(d)?;
        }
        Grid::new(dim, extents, cells, bc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Time between stored outputs.
    pub stride: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { stride: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSection {
    /// Refinement factor of the reference grid per axis.
    pub refine: usize,
    pub cfl: f64,
    /// Fixed filter amplitude; calibrated automatically when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<f64>,
    pub growth_factor: f64,
    pub safety: f64,
    /// Directory of the on-disk reference cache.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<String>,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        let l = LifespanSettings::default();
        ReferenceSection { refine: 4, cfl: 0.5, filter: None, growth_factor: l.growth_factor, safety: l.safety, cache: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub a_values: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Velocity perturbation amplitude of the ill-prepared family.
    pub delta: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { a_values: vec![1e-2, 1e-3, 1e-4], alpha: 0.55, beta: 1.2, gamma: 0.1, delta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_reconstruction")]
    pub reconstruction: Reconstruction,
    #[serde(default)]
    pub gas: GasSection,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default = "default_scaling")]
    pub scaling: ScalingParams,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub floors: Floors,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_t_end() -> f64 {
    0.5
}

fn default_reconstruction() -> Reconstruction {
    Reconstruction::Linear
}

fn default_scaling() -> ScalingParams {
    let a: f64 = 1e-2;
    ScalingParams::new(a, a.powf(0.55), a.powf(1.2), a.powf(0.1))
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cfl: default_cfl(),
            t_end: default_t_end(),
            reconstruction: default_reconstruction(),
            gas: GasSection::default(),
            transport: TransportSection::default(),
            scaling: default_scaling(),
            grid: GridSection::default(),
            output: OutputSection::default(),
            floors: Floors::default(),
            initial: InitialData::default(),
            reference: ReferenceSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.initial.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn gas(&self) -> Result<GasModel> {
        self.gas.build()
    }

    pub fn transport(&self) -> Result<TransportModel> {
        TransportModel::by_name(&self.transport.name, self.transport.b)
    }

    pub fn nsf(&self) -> Result<NsfRunConfig> {
        let cfg = NsfRunConfig {
            gas: self.gas()?,
            transport: self.transport()?,
            scaling: self.scaling,
            grid: self.grid.build()?,
            cfl: self.cfl,
            t_end: self.t_end,
            output_stride: self.output.stride,
            floors: self.floors,
            reconstruction: self.reconstruction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reference configuration on the refined grid, same horizon and stride.
    pub fn euler(&self) -> Result<EulerConfig> {
        if self.reference.refine == 0 {
            return Err(Error::Config("reference.refine must be at least 1".into()));
        }
        let cfg = EulerConfig {
            gas: self.gas()?,
            grid: self.grid.build()?.refined(self.reference.refine),
            cfl: self.reference.cfl,
            t_end: self.t_end,
            output_stride: self.output.stride,
            filter: self.reference.filter.map_or(Filter::Auto, Filter::Fixed),
            lifespan: LifespanSettings { growth_factor: self.reference.growth_factor, safety: self.reference.safety },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

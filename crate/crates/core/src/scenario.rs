//! Initial data for the slab experiments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::state::Primitives;

/// `ρ = 1 + A_ρ cos(2πkx/L)`, `θ = 1 + A_θ cos(2πkx/L)`,
/// `u = A_u sin(2πkx/L) + δ sin(πx/L)` along the first axis.
///
/// Every term satisfies the slip condition on walls at `x = 0, L`. The
/// `δ` term is the ill-prepared perturbation and is absent from the
/// reference data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub rho_amp: f64,
    pub theta_amp: f64,
    pub u_amp: f64,
    pub mode: u32,
    pub delta: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData { rho_amp: 0.05, theta_amp: 0.05, u_amp: 0.05, mode: 1, delta: 0.0 }
    }
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_amp.abs() < 1.0 && self.theta_amp.abs() < 1.0) {
            return Err(Error::Config("initial amplitudes must keep ρ and θ positive".into()));
        }
        if self.mode == 0 {
            return Err(Error::Config("initial.mode must be at least 1".into()));
        }
        Ok(())
    }

    /// The same data without the ill-prepared perturbation.
    pub fn reference(&self) -> InitialData {
        InitialData { delta: 0.0, ..*self }
    }

    fn phase(&self, x: [f64; 2], length: f64) -> f64 {
        2.0 * PI * self.mode as f64 * x[0] / length
    }

    pub fn velocity(&self, x: [f64; 2], length: f64) -> [f64; 2] {
        let u = self.u_amp * self.phase(x, length).sin() + self.delta * (PI * x[0] / length).sin();
        [u, 0.0]
    }

    pub fn eval(&self, x: [f64; 2], length: f64) -> (f64, [f64; 2], f64) {
        let c = self.phase(x, length).cos();
        (1.0 + self.rho_amp * c, self.velocity(x, length), 1.0 + self.theta_amp * c)
    }

    pub fn sample(&self, grid: &Grid) -> Primitives {
        let length = grid.extents()[0];
        Primitives::sample(grid, |x| self.eval(x, length))
    }
}

/// Adds the ill-prepared velocity perturbation `δ sin(πx/L)` to `fields`.
pub fn perturb_velocity(fields: &Primitives, delta: f64) -> Primitives {
    let mut out = fields.clone();
    let length = fields.grid.extents()[0];
    for (k, x) in fields.grid.centers().into_iter().enumerate() {
        out.u[0][k] += delta * (PI * x[0] / length).sin();
    }
    out
}

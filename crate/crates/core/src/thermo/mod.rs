//! Constitutive closures: molecular pressure profile `P(Z)` with its derived
//! pressure, internal energy and entropy, radiation augmentation, transport
//! coefficients, and consistency checks.
//!
//! Every state function is expressed through the self-similar variable
//! `Z = ρ / θ^{3/2}`:
//!
//! * `p_M = θ^{5/2} P(Z)`, `p_R = (a/3) θ⁴`
//! * `e_M = (3/2) θ P(Z) / Z`, `e_R = a θ⁴ / ρ`
//! * `s_M = S(Z)`, `s_R = (4a/3) θ³ / ρ`, with `S'(Z) = -(3/2)((5/3)P - P'Z)/Z²`

mod hypotheses;
mod transport;

pub use hypotheses::{
    aux_bounds_check, hypothesis_report, log_grid, AuxBounds, Hypothesis, HypothesisEntry, HypothesisReport,
};
pub use transport::{contract, heat_flux, stress_tensor, viscous_dissipation, Tensor3, TransportModel, Vec3};

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};
use crate::expr::Expr;
use crate::quadrature::adaptive_simpson;

/// Relative finite-difference step, `ε^{1/3}`.
pub fn fd_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Centered difference with a step scaled by the argument magnitude.
pub(crate) fn centered_diff<F: Fn(f64) -> Result<f64>>(f: F, x: f64) -> Result<f64> {
    let h = fd_step() * x.abs().max(f64::MIN_POSITIVE.sqrt());
    let (xp, xm) = (x + h, x - h);
    Ok((f(xp)? - f(xm)?) / (xp - xm))
}

#[derive(Debug, Clone)]
enum PressureLaw {
    /// `P(Z) = Z`; every closure has a closed form.
    Ideal,
    Custom { p: Expr, dp: Expr, source: String },
}

/// Molecular equation of state, determined by the profile `P(Z)`.
#[derive(Debug, Clone)]
pub struct GasModel {
    name: String,
    law: PressureLaw,
    /// Entropy normalization `S(1) = s0`.
    pub s0: f64,
    /// Declared asymptote `lim P(Z)/Z^{5/3}`.
    pub p_inf: f64,
    /// Relative tolerance used when checking the asymptote.
    pub p_inf_rtol: f64,
    /// Absolute tolerance for the entropy quadrature.
    pub entropy_tol: f64,
}

impl Default for GasModel {
    fn default() -> Self {
        GasModel::ideal()
    }
}

impl GasModel {
    /// Monatomic ideal gas, `P(Z) = Z`.
    pub fn ideal() -> GasModel {
        GasModel {
            name: "ideal".to_string(),
            law: PressureLaw::Ideal,
            s0: 0.0,
            p_inf: 0.0,
            p_inf_rtol: 1e-2,
            entropy_tol: 1e-10,
        }
    }

    /// Gas defined by a user expression in `Z`.
    pub fn from_expression(name: &str, source: &str) -> Result<GasModel> {
        let p = Expr::parse(source, "Z")?;
        let dp = p.derivative();
        Ok(GasModel {
            name: name.to_string(),
            law: PressureLaw::Custom {
                p,
                dp,
                source: source.to_string(),
            },
            s0: 0.0,
            p_inf: f64::NAN,
            p_inf_rtol: 1e-2,
            entropy_tol: 1e-10,
        })
    }

    /// Resolves a named model; `custom` requires an expression.
    pub fn by_name(name: &str, expression: Option<&str>) -> Result<GasModel> {
        match (name, expression) {
            ("ideal", None) => Ok(GasModel::ideal()),
            ("ideal", Some(_)) => Err(Error::Config(
                "gas.pressure must not be set for the ideal gas".to_string(),
            )),
            ("custom", Some(src)) => GasModel::from_expression("custom", src),
            ("custom", None) => Err(Error::Config(
                "gas.name = custom requires gas.pressure".to_string(),
            )),
            (other, _) => Err(Error::Config(format!("unknown gas model `{other}`"))),
        }
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    pub fn with_p_inf(mut self, p_inf: f64) -> Self {
        self.p_inf = p_inf;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self.law, PressureLaw::Ideal)
    }

    /// Canonical description used for content hashing.
    pub fn fingerprint(&self) -> String {
        match &self.law {
            PressureLaw::Ideal => format!("ideal;s0={:e}", self.s0),
            PressureLaw::Custom { source, .. } => format!("custom:{source};s0={:e}", self.s0),
        }
    }

    pub fn profile(&self, z: f64) -> f64 {
        match &self.law {
            PressureLaw::Ideal => z,
            PressureLaw::Custom { p, .. } => p.eval(z),
        }
    }

    pub fn profile_derivative(&self, z: f64) -> f64 {
        match &self.law {
            PressureLaw::Ideal => 1.0,
            PressureLaw::Custom { dp, .. } => dp.eval(z),
        }
    }

    /// `S'(Z)`.
    pub fn entropy_profile_derivative(&self, z: f64) -> f64 {
        let p = self.profile(z);
        let dp = self.profile_derivative(z);
        -1.5 * (5.0 / 3.0 * p - dp * z) / (z * z)
    }

    /// `S(Z)`, closed form for the ideal gas and quadrature from `Z = 1` otherwise.
    pub fn entropy_profile(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Domain(format!("entropy profile needs Z > 0, got {z}")));
        }
        match &self.law {
            PressureLaw::Ideal => Ok(-z.ln() + self.s0),
            PressureLaw::Custom { .. } => {
                // integrate in t = ln Z so the 1/Z behaviour near 0 stays tame
                let integrand = |t: f64| {
                    let zz = t.exp();
                    self.entropy_profile_derivative(zz) * zz
                };
                let v = adaptive_simpson(integrand, 0.0, z.ln(), self.entropy_tol)?;
                Ok(self.s0 + v)
            }
        }
    }

    fn check_state(rho: f64, theta: f64) -> Result<()> {
        require_finite("density", rho)?;
        require_finite("temperature", theta)?;
        if theta <= 0.0 {
            return Err(Error::Domain(format!("temperature must be positive, got {theta}")));
        }
        if rho < 0.0 {
            return Err(Error::Domain(format!("density must be non-negative, got {rho}")));
        }
        Ok(())
    }

    fn check_positive_density(rho: f64) -> Result<()> {
        if rho <= 0.0 {
            return Err(Error::Domain(format!(
                "specific quantities need density > 0, got {rho}"
            )));
        }
        Ok(())
    }

    pub fn pressure_molecular(&self, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Ok(match &self.law {
            PressureLaw::Ideal => rho * theta,
            PressureLaw::Custom { p, .. } => {
                let z = rho / theta.powf(1.5);
                theta.powf(2.5) * p.eval(z)
            }
        })
    }

    pub fn pressure_radiation(a: f64, theta: f64) -> f64 {
        a / 3.0 * theta.powi(4)
    }

    /// Full pressure `θ^{5/2} P(ρ/θ^{3/2}) + (a/3)θ⁴`.
    pub fn pressure(&self, a: f64, rho: f64, theta: f64) -> Result<f64> {
        require_finite("radiation constant", a)?;
        Ok(self.pressure_molecular(rho, theta)? + Self::pressure_radiation(a, theta))
    }

    pub fn internal_energy_molecular(&self, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Self::check_positive_density(rho)?;
        Ok(match &self.law {
            PressureLaw::Ideal => 1.5 * theta,
            PressureLaw::Custom { p, .. } => {
                let z = rho / theta.powf(1.5);
                1.5 * theta * p.eval(z) / z
            }
        })
    }

    /// Specific internal energy `e_M + a θ⁴ / ρ`.
    pub fn internal_energy(&self, a: f64, rho: f64, theta: f64) -> Result<f64> {
        require_finite("radiation constant", a)?;
        Ok(self.internal_energy_molecular(rho, theta)? + a * theta.powi(4) / rho)
    }

    /// `ρ e`, defined down to vacuum where it equals `a θ⁴`.
    pub fn energy_density(&self, a: f64, rho: f64, theta: f64) -> Result<f64> {
        require_finite("radiation constant", a)?;
        // ρ e_M = (3/2) p_M for every admissible P
        Ok(1.5 * self.pressure_molecular(rho, theta)? + a * theta.powi(4))
    }

    pub fn entropy_molecular(&self, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Self::check_positive_density(rho)?;
        match &self.law {
            PressureLaw::Ideal => Ok(1.5 * theta.ln() - rho.ln() + self.s0),
            PressureLaw::Custom { .. } => self.entropy_profile(rho / theta.powf(1.5)),
        }
    }

    /// Specific entropy `S(Z) + (4a/3) θ³ / ρ`.
    pub fn entropy(&self, a: f64, rho: f64, theta: f64) -> Result<f64> {
        require_finite("radiation constant", a)?;
        Ok(self.entropy_molecular(rho, theta)? + 4.0 * a / 3.0 * theta.powi(3) / rho)
    }

    /// `ρ s`, with `ρ S(Z) → 0` at vacuum.
    pub fn entropy_density(&self, a: f64, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        let rad = 4.0 * a / 3.0 * theta.powi(3);
        if rho == 0.0 {
            return Ok(rad);
        }
        Ok(rho * self.entropy_molecular(rho, theta)? + rad)
    }

    /// `c_v = ∂e_M/∂θ`; must be strictly positive.
    pub fn heat_capacity_cv(&self, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Self::check_positive_density(rho)?;
        let cv = match &self.law {
            PressureLaw::Ideal => 1.5,
            PressureLaw::Custom { .. } => {
                centered_diff(|t| self.internal_energy_molecular(rho, t), theta)?
            }
        };
        if !(cv > 0.0) {
            return Err(Error::ModelViolation(format!(
                "non-positive heat capacity c_v = {cv} at (ρ, θ) = ({rho}, {theta})"
            )));
        }
        Ok(cv)
    }

    /// `∂(ρe)/∂θ` including radiation, `ρ c_v + 4aθ³`.
    pub fn energy_density_dtheta(&self, a: f64, rho: f64, theta: f64) -> Result<f64> {
        let mol = if rho > 0.0 {
            rho * self.heat_capacity_cv(rho, theta)?
        } else {
            0.0
        };
        Ok(mol + 4.0 * a * theta.powi(3))
    }

    /// Partials `(∂p/∂ρ, ∂p/∂θ)` of the full pressure.
    pub fn pressure_partials(&self, a: f64, rho: f64, theta: f64) -> Result<(f64, f64)> {
        if self.is_ideal() {
            Self::check_state(rho, theta)?;
            return Ok((theta, rho + 4.0 * a / 3.0 * theta.powi(3)));
        }
        let dr = centered_diff(|r| self.pressure(a, r, theta), rho)?;
        let dt = centered_diff(|t| self.pressure(a, rho, t), theta)?;
        Ok((dr, dt))
    }

    /// Sound speed from `c² = ∂p/∂ρ + θ (∂p/∂θ)² / (ρ² c_v)`, with the
    /// partials and `c_v` of the full closure evaluated numerically.
    pub fn sound_speed(&self, a: f64, rho: f64, theta: f64) -> Result<f64> {
        Self::check_positive_density(rho)?;
        let (dp_drho, dp_dtheta) = self.pressure_partials(a, rho, theta)?;
        let cv_full = if self.is_ideal() {
            1.5 + 4.0 * a * theta.powi(3) / rho
        } else {
            centered_diff(|t| self.internal_energy(a, rho, t), theta)?
        };
        let c2 = dp_drho + theta * dp_dtheta * dp_dtheta / (rho * rho * cv_full);
        if !(c2 > 0.0) || !c2.is_finite() {
            return Err(Error::ModelViolation(format!(
                "non-positive squared sound speed {c2} at (ρ, θ) = ({rho}, {theta})"
            )));
        }
        Ok(c2.sqrt())
    }
}

/// Gibbs-relation residuals for the full closure.
///
/// `temperature` is `θ ∂s/∂θ − ∂e/∂θ`, `density` is
/// `θ ∂s/∂ρ − ∂e/∂ρ − p ∂(1/ρ)/∂ρ`. Each is also reported relative to the
/// sum of the magnitudes of its terms, which is the quantity that stays
/// meaningful when `aθ⁴/ρ²` makes the terms large.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsResidual {
    pub temperature: f64,
    pub density: f64,
    pub temperature_scale: f64,
    pub density_scale: f64,
}

impl GibbsResidual {
    pub fn relative(&self) -> (f64, f64) {
        (
            self.temperature / self.temperature_scale.max(f64::MIN_POSITIVE),
            self.density / self.density_scale.max(f64::MIN_POSITIVE),
        )
    }

    pub fn max_relative(&self) -> f64 {
        let (t, r) = self.relative();
        t.abs().max(r.abs())
    }
}

/// Closure triple `(p, e, s)` used by [`gibbs_residual_with`]; lets tests
/// substitute corrupted closures.
pub trait Closure {
    fn p(&self, rho: f64, theta: f64) -> Result<f64>;
    fn e(&self, rho: f64, theta: f64) -> Result<f64>;
    fn s(&self, rho: f64, theta: f64) -> Result<f64>;
}

/// The full (molecular + radiation) closure of a gas at radiation constant `a`.
pub struct FullClosure<'a> {
    pub gas: &'a GasModel,
    pub a: f64,
}

impl Closure for FullClosure<'_> {
    fn p(&self, rho: f64, theta: f64) -> Result<f64> {
        self.gas.pressure(self.a, rho, theta)
    }
    fn e(&self, rho: f64, theta: f64) -> Result<f64> {
        self.gas.internal_energy(self.a, rho, theta)
    }
    fn s(&self, rho: f64, theta: f64) -> Result<f64> {
        self.gas.entropy(self.a, rho, theta)
    }
}

pub fn gibbs_residual(gas: &GasModel, a: f64, rho: f64, theta: f64) -> Result<GibbsResidual> {
    gibbs_residual_with(&FullClosure { gas, a }, rho, theta)
}

pub fn gibbs_residual_with<C: Closure>(c: &C, rho: f64, theta: f64) -> Result<GibbsResidual> {
    let s_t = centered_diff(|t| c.s(rho, t), theta)?;
    let e_t = centered_diff(|t| c.e(rho, t), theta)?;
    let s_r = centered_diff(|r| c.s(r, theta), rho)?;
    let e_r = centered_diff(|r| c.e(r, theta), rho)?;
    let p = c.p(rho, theta)?;
    let work = p / (rho * rho);
    Ok(GibbsResidual {
        temperature: theta * s_t - e_t,
        density: theta * s_r - e_r + work,
        temperature_scale: (theta * s_t).abs() + e_t.abs(),
        density_scale: (theta * s_r).abs() + e_r.abs() + work.abs(),
    })
}

/// The four singular parameters `(a, ν, ω, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    pub a: f64,
    pub nu: f64,
    pub omega: f64,
    pub lambda: f64,
}

impl ScalingParams {
    pub fn new(a: f64, nu: f64, omega: f64, lambda: f64) -> Self {
        ScalingParams { a, nu, omega, lambda }
    }

    /// All zero: the inviscid, radiation-free, undamped limit.
    pub fn euler() -> Self {
        ScalingParams::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("nu", self.nu),
            ("omega", self.omega),
            ("lambda", self.lambda),
        ] {
            require_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::Domain(format!("scaling parameter {name} = {v} < 0")));
            }
        }
        Ok(())
    }

    /// Stricter check for a Navier–Stokes–Fourier run.
    pub fn validate_for_nsf(&self) -> Result<()> {
        self.validate()?;
        for (name, v) in [("a", self.a), ("nu", self.nu), ("omega", self.omega)] {
            if v <= 0.0 {
                return Err(Error::Domain(format!(
                    "scaling parameter {name} must be positive for an NSF run, got {v}"
                )));
            }
        }
        Ok(())
    }
}

//! Ballistic free energy, the relative energy functional and its
//! coercivity, and the essential/residual split.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::integrate;
use crate::lowdisc::Halton;
use crate::reduce::det_sum;
use crate::state::{Primitives, ReferenceFields};
use crate::thermo::GasModel;

/// A point `(ρ, θ, u)` of state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint {
    pub rho: f64,
    pub theta: f64,
    pub u: [f64; 3],
}

impl StatePoint {
    pub fn new(rho: f64, theta: f64, u: [f64; 3]) -> StatePoint {
        StatePoint { rho, theta, u }
    }
}

/// `H_Θ(ρ, θ) = ρ e − Θ ρ s`, written with the density-weighted closures so
/// that vacuum is admissible.
pub fn ballistic_free_energy(gas: &GasModel, a: f64, rho: f64, theta: f64, big_theta: f64) -> Result<f64> {
    if !(big_theta > 0.0) {
        return Err(Error::Domain(format!("reference temperature must be positive, got {big_theta}")));
    }
    Ok(gas.energy_density(a, rho, theta)? - big_theta * gas.entropy_density(a, rho, theta)?)
}

/// `∂H_Θ/∂ρ` at `(r, Θ)`. The Gibbs relation reduces it to `e − Θ s + p/r`.
pub fn ballistic_free_energy_drho(gas: &GasModel, a: f64, r: f64, big_theta: f64) -> Result<f64> {
    Ok(gas.internal_energy(a, r, big_theta)? - big_theta * gas.entropy(a, r, big_theta)?
        + gas.pressure(a, r, big_theta)? / r)
}

/// Integrand of the relative energy functional.
pub fn relative_energy_density(gas: &GasModel, a: f64, state: &StatePoint, reference: &StatePoint) -> Result<f64> {
    let (r, big_theta) = (reference.rho, reference.theta);
    if !(r > 0.0) {
        return Err(Error::Domain(format!("reference density must be positive, got {r}")));
    }
    let w2: f64 = (0..3).map(|i| (state.u[i] - reference.u[i]).powi(2)).sum();
    let h = ballistic_free_energy(gas, a, state.rho, state.theta, big_theta)?;
    let h_ref = ballistic_free_energy(gas, a, r, big_theta, big_theta)?;
    let dh = ballistic_free_energy_drho(gas, a, r, big_theta)?;
    Ok(0.5 * state.rho * w2 + h - dh * (state.rho - r) - h_ref)
}

/// Pointwise relative energy density on a shared grid.
pub fn relative_energy_field(fields: &Primitives, reference: &ReferenceFields, gas: &GasModel, a: f64) -> Result<Vec<f64>> {
    let rf = &reference.fields;
    if !fields.grid.same_shape(&rf.grid) {
        return Err(Error::Usage("fields and reference live on different grids".into()));
    }
    (0..fields.grid.n_cells())
        .map(|k| {
            let s = StatePoint::new(fields.rho[k], fields.theta[k], fields.velocity(k));
            let r = StatePoint::new(rf.rho[k], rf.theta[k], rf.velocity(k));
            relative_energy_density(gas, a, &s, &r)
        })
        .collect()
}

/// Midpoint-rule relative energy functional.
pub fn relative_energy(fields: &Primitives, reference: &ReferenceFields, gas: &GasModel, a: f64) -> Result<f64> {
    let density = relative_energy_field(fields, reference, gas, a)?;
    Ok(integrate(&density, &fields.grid))
}

/// Time series of the relative energy along a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEnergyReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sup_value: f64,
    pub envelope: f64,
}

impl RelativeEnergyReport {
    pub fn new(times: Vec<f64>, values: Vec<f64>, envelope: f64) -> RelativeEnergyReport {
        let sup_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        RelativeEnergyReport { times, values, sup_value, envelope }
    }

    pub fn initial(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("t,E,envelope\n");
        for (t, e) in self.times.iter().zip(&self.values) {
            s.push_str(&format!("{t:?},{e:?},{:?}\n", self.envelope));
        }
        s
    }
}

impl fmt::Display for RelativeEnergyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instants = {}", self.times.len())?;
        writeln!(f, "E_init = {:e}", self.initial())?;
        writeln!(f, "E_sup = {:e}", self.sup_value)?;
        write!(f, "envelope = {:e}", self.envelope)
    }
}

/// Compact rectangle `[ρ_lo, ρ_hi] × [θ_lo, θ_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub rho: (f64, f64),
    pub theta: (f64, f64),
}

impl Rect {
    pub fn new(rho: (f64, f64), theta: (f64, f64)) -> Result<Rect> {
        if !(rho.0 > 0.0 && rho.0 <= rho.1 && theta.0 > 0.0 && theta.0 <= theta.1) {
            return Err(Error::Usage(format!("invalid rectangle {rho:?} × {theta:?}")));
        }
        Ok(Rect { rho, theta })
    }

    pub fn contains(&self, rho: f64, theta: f64) -> bool {
        (self.rho.0..=self.rho.1).contains(&rho) && (self.theta.0..=self.theta.1).contains(&theta)
    }

    pub fn on_boundary(&self, rho: f64, theta: f64) -> bool {
        self.contains(rho, theta)
            && (rho == self.rho.0 || rho == self.rho.1 || theta == self.theta.0 || theta == self.theta.1)
    }

    fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
        lo + (hi - lo) * t
    }
}

/// Minimizer found by [`coercivity_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coercivity {
    pub c: f64,
    pub state: StatePoint,
    pub reference: StatePoint,
    pub samples_used: usize,
}

const COINCIDENT: f64 = 1e-14;

/// Smallest ratio `E / (|ρ−r|² + |θ−Θ|² + |u−U|²)` over low-discrepancy
/// samples of `K × K × {|u − U| ≤ 1}`.
pub fn coercivity_constant(gas: &GasModel, a: f64, k: &Rect, samples: usize, seed: u64) -> Result<Coercivity> {
    if samples < 1000 {
        return Err(Error::Usage(format!("coercivity needs at least 1000 samples, got {samples}")));
    }
    let mut best: Option<Coercivity> = None;
    let mut used = 0;
    for p in Halton::seeded(5, seed).take(samples) {
        let s = StatePoint::new(Rect::lerp(k.rho.0, k.rho.1, p[0]), Rect::lerp(k.theta.0, k.theta.1, p[1]), [p[4], 0.0, 0.0]);
        let r = StatePoint::new(Rect::lerp(k.rho.0, k.rho.1, p[2]), Rect::lerp(k.theta.0, k.theta.1, p[3]), [0.0; 3]);
        let dist = (s.rho - r.rho).powi(2) + (s.theta - r.theta).powi(2) + s.u[0].powi(2);
        if dist < COINCIDENT {
            continue;
        }
        used += 1;
        let ratio = relative_energy_density(gas, a, &s, &r)? / dist;
        if best.is_none_or(|b| ratio < b.c) {
            best = Some(Coercivity { c: ratio, state: s, reference: r, samples_used: 0 });
        }
    }
    let mut best = best.ok_or_else(|| Error::Usage("every sample was coincident".into()))?;
    best.samples_used = used;
    if !(best.c > 0.0) {
        return Err(Error::ModelViolation(format!(
            "relative energy is not coercive on {k:?}: minimum ratio {} at {:?} vs {:?}",
            best.c, best.state, best.reference
        )));
    }
    Ok(best)
}

/// Largest `c` with `E ≥ c (1 + ρ|u−U|² + ρe + ρ|s|)` over the given pairs
/// of far states and references in `K`. States on the boundary of `K` are
/// skipped.
pub fn residual_lower_bound_check(gas: &GasModel, a: f64, k: &Rect, pairs: &[(StatePoint, StatePoint)]) -> Result<(f64, usize)> {
    let mut c = f64::INFINITY;
    let mut used = 0;
    for (s, r) in pairs {
        if !k.contains(r.rho, r.theta) {
            return Err(Error::Usage(format!("reference {r:?} lies outside K")));
        }
        if k.contains(s.rho, s.theta) {
            continue;
        }
        let w2: f64 = (0..3).map(|i| (s.u[i] - r.u[i]).powi(2)).sum();
        let rhs = 1.0 + s.rho * w2 + gas.energy_density(a, s.rho, s.theta)? + gas.entropy_density(a, s.rho, s.theta)?.abs();
        let lhs = relative_energy_density(gas, a, s, r)?;
        c = c.min(lhs / rhs);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Usage("no state outside K in the sample".into()));
    }
    if !(c > 0.0) {
        return Err(Error::ModelViolation(format!("far-field bound fails: fitted c = {c}")));
    }
    Ok((c, used))
}

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    (t * t * t * (t * (6.0 * t - 15.0) + 10.0)).min(1.0)
}

/// The rectangle `[ρ_lo, ρ_hi] × [θ_lo, θ_hi]` with a smooth cutoff that
/// decays to zero across a band of relative width `margin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialResidualWindow {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub margin: f64,
}

impl EssentialResidualWindow {
    pub const DEFAULT_MARGIN: f64 = 0.25;

    pub fn new(rho: (f64, f64), theta: (f64, f64), margin: f64) -> Result<Self> {
        if !(rho.0 > 0.0 && rho.0 < rho.1 && theta.0 > 0.0 && theta.0 < theta.1) {
            return Err(Error::Usage(format!("invalid window {rho:?} × {theta:?}")));
        }
        if !(margin > 0.0 && margin < 1.0) {
            return Err(Error::Usage(format!("window margin must lie in (0, 1), got {margin}")));
        }
        Ok(EssentialResidualWindow { rho_lo: rho.0, rho_hi: rho.1, theta_lo: theta.0, theta_hi: theta.1, margin })
    }

    /// Window enclosing every reference value with relative slack `pad`.
    pub fn around(reference: &Primitives, pad: f64) -> Result<Self> {
        let (rl, rh) = min_max(&reference.rho);
        let (tl, th) = min_max(&reference.theta);
        Self::new((rl * (1.0 - pad), rh * (1.0 + pad)), (tl * (1.0 - pad), th * (1.0 + pad)), Self::DEFAULT_MARGIN)
    }

    fn ramp(&self, x: f64, lo: f64, hi: f64) -> f64 {
        if x >= lo && x <= hi {
            return 1.0;
        }
        let (outer_lo, outer_hi) = (lo * (1.0 - self.margin), hi * (1.0 + self.margin));
        if x <= outer_lo || x >= outer_hi {
            return 0.0;
        }
        if x < lo {
            smoothstep5((x - outer_lo) / (lo - outer_lo))
        } else {
            smoothstep5((outer_hi - x) / (outer_hi - hi))
        }
    }

    /// Cutoff `Φ(ρ, θ)`.
    pub fn phi(&self, rho: f64, theta: f64) -> f64 {
        self.ramp(rho, self.rho_lo, self.rho_hi) * self.ramp(theta, self.theta_lo, self.theta_hi)
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)))
}

/// Splits `values` into `Φ F` and `(1 − Φ) F` with `Φ` evaluated at the
/// paired cutoff arguments. The residual part is computed as `F − [F]_ess`,
/// so the parts add back to `F` within one rounding.
pub fn essential_residual_split(values: &[f64], window: &EssentialResidualWindow, cutoff_args: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(values.len(), cutoff_args.len());
    let ess: Vec<f64> = values.iter().zip(cutoff_args).map(|(f, (r, t))| window.phi(*r, *t) * f).collect();
    let res = values.iter().zip(&ess).map(|(f, e)| f - e).collect();
    (ess, res)
}

/// Fitted constants of the two quadratic bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticBounds {
    pub energy: f64,
    pub essential: f64,
    pub residual: f64,
    pub c_essential: f64,
    pub c_residual: f64,
}

/// Fits `C` in `‖[ρ−r]_ess‖² + ‖[θ−Θ]_ess‖² + ‖[u−U]_ess‖² ≤ C E` and
/// `∫ρ|u−U|² + ∫[1 + ρ^{5/3} + ρθ + aθ⁴]_res ≤ C E`.
///
/// The cutoff is evaluated at the computed state `(ρ, θ)`; evaluated at a
/// reference lying inside the window it would be identically one.
pub fn quadratic_bounds_check(
    fields: &Primitives,
    reference: &ReferenceFields,
    window: &EssentialResidualWindow,
    gas: &GasModel,
    a: f64,
) -> Result<QuadraticBounds> {
    let rf = &reference.fields;
    for k in 0..rf.grid.n_cells() {
        if window.phi(rf.rho[k], rf.theta[k]) < 1.0 {
            return Err(Error::Usage("reference leaves the window's inner rectangle".into()));
        }
    }
    let energy = relative_energy(fields, reference, gas, a)?;
    let grid = &fields.grid;
    let n = grid.n_cells();
    let args: Vec<(f64, f64)> = (0..n).map(|k| (fields.rho[k], fields.theta[k])).collect();
    let phi: Vec<f64> = args.iter().map(|(r, t)| window.phi(*r, *t)).collect();
    let w = grid.cell_volume();

    let mut ess_terms = Vec::with_capacity(n);
    let mut res_terms = Vec::with_capacity(n);
    for k in 0..n {
        let (s, r) = (fields.velocity(k), rf.velocity(k));
        let du2: f64 = (0..3).map(|i| (s[i] - r[i]).powi(2)).sum();
        let dr = fields.rho[k] - rf.rho[k];
        let dt = fields.theta[k] - rf.theta[k];
        ess_terms.push(phi[k] * phi[k] * (dr * dr + dt * dt + du2) * w);
        let (rho, theta) = (fields.rho[k], fields.theta[k]);
        let far = 1.0 + rho.powf(5.0 / 3.0) + rho * theta + a * theta.powi(4);
        res_terms.push((rho * du2 + (1.0 - phi[k]) * far) * w);
    }
    let essential = det_sum(&ess_terms);
    let residual = det_sum(&res_terms);
    let fit = |num: f64| -> Result<f64> {
        if num == 0.0 {
            Ok(0.0)
        } else if energy > 0.0 && (num / energy).is_finite() {
            Ok(num / energy)
        } else {
            Err(Error::HypothesisViolation(format!("bound {num:e} against relative energy {energy:e} has no finite constant")))
        }
    };
    Ok(QuadraticBounds { energy, essential, residual, c_essential: fit(essential)?, c_residual: fit(residual)? })
}

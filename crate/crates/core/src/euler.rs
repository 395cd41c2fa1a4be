//! Smooth reference solutions of the compressible Euler system.
//!
//! Point values at cell centers are advanced by fourth-order centered flux
//! differences, a conservative sixth-order filter and SSP-RK3. Slip walls are
//! mirror ghosts, so wall mass and energy fluxes vanish identically.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{derivative, fill_ghosts_scalar, fill_ghosts_velocity, Boundary, Ghosted, Grid, Snapshot};
use crate::nsf::{cell_gradients, euler_flux, output_times, Ghosts};
use crate::reduce::{det_max, det_sum};
use crate::state::{FluidState, Primitives, ReferenceFields, ReferenceRates};
use crate::thermo::GasModel;

const GHOSTS: usize = 3;
/// Allowed filter drain of kinetic energy over the run, relative to `∫E(0)`.
pub const FILTER_DRAIN_BUDGET: f64 = 1e-6;
const CALIBRATION_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filter {
    /// Amplitude calibrated on the first steps to meet [`FILTER_DRAIN_BUDGET`].
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanSettings {
    /// Gradient growth factor that marks the life span as exhausted.
    pub growth_factor: f64,
    /// Fraction of the estimated blow-up time usable for comparisons.
    pub safety: f64,
}

impl Default for LifespanSettings {
    fn default() -> Self {
        LifespanSettings { growth_factor: 20.0, safety: 0.8 }
    }
}

#[derive(Debug, Clone)]
pub struct EulerConfig {
    pub gas: GasModel,
    pub grid: Grid,
    pub cfl: f64,
    pub t_end: f64,
    pub output_stride: f64,
    pub filter: Filter,
    pub lifespan: LifespanSettings,
}

impl EulerConfig {
    pub fn new(grid: Grid, t_end: f64, output_stride: f64) -> EulerConfig {
        EulerConfig {
            gas: GasModel::ideal(),
            grid,
            cfl: 0.5,
            t_end,
            output_stride,
            filter: Filter::Auto,
            lifespan: LifespanSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("reference cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end > 0.0 && self.output_stride > 0.0) {
            return Err(Error::Config("reference t_end and stride must be positive".into()));
        }
        if let Filter::Fixed(e) = self.filter {
            if !(e >= 0.0) {
                return Err(Error::Config(format!("filter amplitude must be non-negative, got {e}")));
            }
        }
        Ok(())
    }
}

/// Flux-difference and filter tendencies, the latter at unit amplitude.
fn tendencies(state: &FluidState, gas: &GasModel) -> Result<(FluidState, FluidState)> {
    let grid = &state.grid;
    let prim = state.primitives(gas, 0.0)?;
    let g = Ghosts::new(&prim, GHOSTS);
    let dim = grid.dim();
    let [nx, ny] = grid.cells();

    let mut alpha: f64 = 0.0;
    for k in 0..grid.n_cells() {
        let speed = (0..dim).map(|d| prim.u[d][k].powi(2)).sum::<f64>().sqrt();
        alpha = alpha.max(speed + gas.sound_speed(0.0, prim.rho[k], prim.theta[k])?);
    }

    let mut flux_part = FluidState::zeros(grid);
    let mut filter_part = FluidState::zeros(grid);
    let gh = GHOSTS as isize;
    for axis in 0..dim {
        let h = grid.spacing(axis);
        let (n, n_other) = if axis == 0 { (nx, ny) } else { (ny, nx) };
        let mut q = vec![[0.0; 4]; n + 2 * GHOSTS];
        let mut f = vec![[0.0; 4]; n + 2 * GHOSTS];
        for o in 0..n_other {
            for (slot, c) in (-gh..n as isize + gh).enumerate() {
                let (i, j) = if axis == 0 { (c, o as isize) } else { (o as isize, c) };
                let (ff, qq, _) = euler_flux(gas, 0.0, &g.at(i, j), axis)?;
                f[slot] = ff;
                q[slot] = qq;
            }
            // face `fc` sits between cells `fc - 1` and `fc`, slot offset GHOSTS
            let face = |fc: usize| -> ([f64; 4], [f64; 4]) {
                let s = fc + GHOSTS;
                let mut conv = [0.0; 4];
                let mut filt = [0.0; 4];
                for k in 0..4 {
                    conv[k] = (-f[s - 2][k] + 7.0 * f[s - 1][k] + 7.0 * f[s][k] - f[s + 1][k]) / 12.0;
                    let d5 = q[s + 2][k] - 5.0 * q[s + 1][k] + 10.0 * q[s][k] - 10.0 * q[s - 1][k] + 5.0 * q[s - 2][k]
                        - q[s - 3][k];
                    filt[k] = -alpha / 64.0 * d5;
                }
                (conv, filt)
            };
            let mut lo = face(0);
            for c in 0..n {
                let hi = face(c + 1);
                let k = if axis == 0 { grid.index(c, o) } else { grid.index(o, c) };
                let apply = |out: &mut FluidState, l: &[f64; 4], r: &[f64; 4]| {
                    out.rho[k] -= (r[0] - l[0]) / h;
                    for d in 0..dim {
                        out.mom[d][k] -= (r[1 + d] - l[1 + d]) / h;
                    }
                    out.etot[k] -= (r[3] - l[3]) / h;
                };
                apply(&mut flux_part, &lo.0, &hi.0);
                apply(&mut filter_part, &lo.1, &hi.1);
                lo = hi;
            }
        }
    }
    flux_part.time = state.time;
    filter_part.time = state.time;
    Ok((flux_part, filter_part))
}

/// Euler tendencies with filter amplitude `eps_f`.
pub fn rhs_euler(state: &FluidState, gas: &GasModel, eps_f: f64) -> Result<FluidState> {
    let (flux, filter) = tendencies(state, gas)?;
    let mut out = flux.axpy(eps_f, &filter);
    out.time = state.time;
    Ok(out)
}

/// Kinetic-energy drain rate caused by a unit-amplitude filter.
fn filter_drain_rate(state: &FluidState, filter: &FluidState) -> f64 {
    let grid = &state.grid;
    let terms: Vec<f64> = (0..grid.n_cells())
        .map(|k| {
            let rho = state.rho[k];
            let mut work = 0.0;
            let mut u2 = 0.0;
            for d in 0..grid.dim() {
                let u = state.mom[d][k] / rho;
                work += u * filter.mom[d][k];
                u2 += u * u;
            }
            -(work - 0.5 * u2 * filter.rho[k])
        })
        .collect();
    det_sum(&terms) * grid.cell_volume()
}

fn stable_dt(state: &FluidState, gas: &GasModel, cfl: f64) -> Result<f64> {
    let grid = &state.grid;
    let prim = state.primitives(gas, 0.0)?;
    let h = (0..grid.dim()).map(|d| grid.spacing(d)).fold(f64::INFINITY, f64::min);
    let mut smax: f64 = 0.0;
    for k in 0..grid.n_cells() {
        let speed = (0..grid.dim()).map(|d| prim.u[d][k].powi(2)).sum::<f64>().sqrt();
        smax = smax.max(speed + gas.sound_speed(0.0, prim.rho[k], prim.theta[k])?);
    }
    let dt = cfl * h / smax;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::TimeStep(dt));
    }
    Ok(dt)
}

fn positive(state: &FluidState, gas: &GasModel) -> Result<()> {
    state.primitives(gas, 0.0).map(|_| ())
}

fn step(state: &FluidState, dt: f64, gas: &GasModel, eps_f: f64) -> Result<FluidState> {
    let t0 = state.time;
    let s1 = state.axpy(dt, &rhs_euler(state, gas, eps_f)?);
    positive(&s1, gas)?;
    let s2 = FluidState::combine(0.75, state, 0.25, &s1.axpy(dt, &rhs_euler(&s1, gas, eps_f)?));
    positive(&s2, gas)?;
    let mut s3 = FluidState::combine(1.0 / 3.0, state, 2.0 / 3.0, &s2.axpy(dt, &rhs_euler(&s2, gas, eps_f)?));
    s3.time = t0 + dt;
    if !s3.is_finite() {
        return Err(Error::NonFinite { time: s3.time });
    }
    Ok(s3)
}

/// Sup norms of the velocity and density gradients at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSample {
    pub t: f64,
    pub grad_u: f64,
    pub grad_rho: f64,
}

pub fn gradient_sample(prim: &Primitives) -> Result<GradientSample> {
    let grid = &prim.grid;
    let (du, _) = cell_gradients(prim)?;
    let gu: Vec<f64> = du.iter().map(|t| t.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let gr = fill_ghosts_scalar(&prim.rho, grid, 1);
    let mut g2 = vec![0.0; grid.n_cells()];
    for axis in 0..grid.dim() {
        for (acc, v) in g2.iter_mut().zip(derivative(&gr, grid, axis)?) {
            *acc += v * v;
        }
    }
    let grad_rho: Vec<f64> = g2.into_iter().map(f64::sqrt).collect();
    Ok(GradientSample { t: prim.time, grad_u: det_max(&gu), grad_rho: det_max(&grad_rho) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Lifespan {
    Smooth { t_end: f64 },
    Exhausted { detected_at: f64, t_star: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanReport {
    pub lifespan: Lifespan,
    /// Latest time usable for comparisons against the reference.
    pub t_safe: f64,
}

/// Declares the life span exhausted when a gradient norm exceeds
/// `growth_factor` times its initial value or positivity fails at
/// `failure`. The blow-up time `T*` is extrapolated from a linear fit of
/// `1/g` over the samples past twofold growth.
pub fn lifespan_monitor(samples: &[GradientSample], t_end: f64, failure: Option<f64>, settings: &LifespanSettings) -> LifespanReport {
    let Some(first) = samples.first() else {
        return LifespanReport { lifespan: Lifespan::Smooth { t_end }, t_safe: t_end };
    };
    let growth = |s: &GradientSample| {
        let mut g: f64 = 1.0;
        if first.grad_u > 0.0 {
            g = g.max(s.grad_u / first.grad_u);
        }
        if first.grad_rho > 0.0 {
            g = g.max(s.grad_rho / first.grad_rho);
        }
        g
    };
    let crossing = samples.iter().find(|s| growth(s) > settings.growth_factor).map(|s| s.t);
    let detected_at = match (crossing, failure) {
        (Some(a), Some(b)) => a.min(b),
        (a, b) => match a.or(b) {
            Some(t) => t,
            None => return LifespanReport { lifespan: Lifespan::Smooth { t_end }, t_safe: t_end },
        },
    };
    let fit: Vec<(f64, f64)> =
        samples.iter().filter(|s| s.t <= detected_at && growth(s) >= 2.0).map(|s| (s.t, 1.0 / growth(s))).collect();
    let mut t_star = detected_at;
    if fit.len() >= 3 {
        let n = fit.len() as f64;
        let mt = fit.iter().map(|p| p.0).sum::<f64>() / n;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = fit.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mt).powi(2)).sum();
        if sxx > 0.0 && sxy < 0.0 {
            let slope = sxy / sxx;
            let root = mt - my / slope;
            if root.is_finite() && root > 0.0 {
                t_star = root.max(detected_at);
            }
        }
    }
    LifespanReport { lifespan: Lifespan::Exhausted { detected_at, t_star }, t_safe: (settings.safety * t_star).min(t_end) }
}

/// Stored reference run: conservative states and their tendencies at the
/// output instants, plus run metadata.
#[derive(Debug, Clone)]
pub struct EulerTrajectory {
    pub gas: GasModel,
    pub grid: Grid,
    pub states: Vec<FluidState>,
    pub rates: Vec<FluidState>,
    pub eps_f: f64,
    /// Predicted filter drain of kinetic energy over the run, relative to `∫E(0)`.
    pub filter_drain: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub samples: Vec<GradientSample>,
    /// Time and message of the failure that ended the run early.
    pub failure: Option<(f64, String)>,
    pub lifespan: LifespanReport,
}

impl EulerTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn last_time(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.time)
    }
}

fn calibrate(initial: &FluidState, cfg: &EulerConfig) -> Result<(f64, f64)> {
    let e0 = crate::grid::integrate(&initial.etot, &initial.grid).abs();
    let mut state = initial.clone();
    let mut rates = Vec::with_capacity(CALIBRATION_STEPS);
    for _ in 0..CALIBRATION_STEPS {
        let (_, filter) = tendencies(&state, &cfg.gas)?;
        rates.push(filter_drain_rate(&state, &filter));
        let dt = stable_dt(&state, &cfg.gas, cfg.cfl)?;
        state = step(&state, dt, &cfg.gas, 1.0)?;
    }
    let rate = det_sum(&rates) / rates.len() as f64;
    let drain_unit = rate.max(0.0) * cfg.t_end / e0;
    let eps = if drain_unit > FILTER_DRAIN_BUDGET { FILTER_DRAIN_BUDGET / drain_unit } else { 1.0 };
    Ok((eps, eps * drain_unit))
}

/// Runs the reference to `t_end`, storing states and tendencies at the output
/// instants. Positivity failure ends the run and exhausts the life span.
pub fn run_reference(cfg: &EulerConfig, initial: &Primitives) -> Result<EulerTrajectory> {
    cfg.validate()?;
    if !initial.grid.same_shape(&cfg.grid) {
        return Err(Error::Usage("initial data grid differs from the reference grid".into()));
    }
    let gas = &cfg.gas;
    let state0 = FluidState::from_primitives(initial, gas, 0.0)?;
    let (eps_f, filter_drain) = match cfg.filter {
        Filter::Fixed(e) => (e, f64::NAN),
        Filter::Auto => calibrate(&state0, cfg)?,
    };

    let mass0 = crate::grid::integrate(&state0.rho, &cfg.grid);
    let energy0 = crate::grid::integrate(&state0.etot, &cfg.grid);
    let mut state = state0;
    let mut states = vec![state.clone()];
    let mut rates = vec![rhs_euler(&state, gas, eps_f)?];
    let mut samples = vec![gradient_sample(initial)?];
    let mut failure = None;

    'outer: for &target in &output_times(cfg.t_end, cfg.output_stride)[1..] {
        while state.time < target {
            let next = stable_dt(&state, gas, cfg.cfl).and_then(|dt| {
                let dt = dt.min(target - state.time);
                let mut s = step(&state, dt, gas, eps_f)?;
                if target - s.time < 1e-12 * target.max(1.0) {
                    s.time = target;
                }
                let p = s.primitives(gas, 0.0)?;
                Ok((s, gradient_sample(&p)?))
            });
            match next {
                Ok((s, sample)) => {
                    state = s;
                    samples.push(sample);
                }
                Err(e) => {
                    failure = Some((state.time, e.to_string()));
                    break 'outer;
                }
            }
        }
        rates.push(rhs_euler(&state, gas, eps_f)?);
        states.push(state.clone());
    }

    let last = states.last().expect("initial state stored");
    let mass_drift = (crate::grid::integrate(&last.rho, &cfg.grid) - mass0) / mass0;
    let energy_drift = (crate::grid::integrate(&last.etot, &cfg.grid) - energy0) / energy0;
    let lifespan = lifespan_monitor(&samples, cfg.t_end, failure.as_ref().map(|f| f.0), &cfg.lifespan);
    Ok(EulerTrajectory {
        gas: gas.clone(),
        grid: cfg.grid.clone(),
        states,
        rates,
        eps_f,
        filter_drain,
        mass_drift,
        energy_drift,
        samples,
        failure,
        lifespan,
    })
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    key: String,
    eps_f: f64,
    filter_drain: f64,
    mass_drift: f64,
    energy_drift: f64,
    failure_time: Option<f64>,
    failure: Option<String>,
    lifespan: LifespanReport,
    samples: Vec<GradientSample>,
}

/// Content hash of everything that determines a reference run.
pub fn cache_key(cfg: &EulerConfig, initial: &Primitives) -> String {
    let mut h = Sha256::new();
    h.update(cfg.grid.fingerprint());
    h.update(cfg.gas.fingerprint());
    h.update(format!("cfl={:?};t_end={:?};stride={:?};filter={:?};life={:?}", cfg.cfl, cfg.t_end, cfg.output_stride, cfg.filter, cfg.lifespan));
    for field in [&initial.rho, &initial.theta].into_iter().chain(initial.u.iter()) {
        for v in field {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// [`run_reference`] backed by an on-disk cache under `dir`.
pub fn run_reference_cached(cfg: &EulerConfig, initial: &Primitives, dir: Option<&Path>) -> Result<EulerTrajectory> {
    let Some(dir) = dir else {
        return run_reference(cfg, initial);
    };
    let key = cache_key(cfg, initial);
    let entry = dir.join(&key);
    if let Ok(t) = load_trajectory(&entry, &cfg.gas) {
        return Ok(t);
    }
    let t = run_reference(cfg, initial)?;
    save_trajectory(&t, &entry, &key)?;
    Ok(t)
}

fn snapshot_path(dir: &Path, kind: &str, k: usize) -> PathBuf {
    dir.join(format!("{kind}_{k:04}.snap"))
}

pub fn save_trajectory(t: &EulerTrajectory, dir: &Path, key: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, (s, r)) in t.states.iter().zip(&t.rates).enumerate() {
        s.to_snapshot().save(&snapshot_path(dir, "state", k))?;
        r.to_snapshot().save(&snapshot_path(dir, "rate", k))?;
    }
    let meta = CacheMeta {
        key: key.to_string(),
        eps_f: t.eps_f,
        filter_drain: t.filter_drain,
        mass_drift: t.mass_drift,
        energy_drift: t.energy_drift,
        failure_time: t.failure.as_ref().map(|f| f.0),
        failure: t.failure.as_ref().map(|f| f.1.clone()),
        lifespan: t.lifespan,
        samples: t.samples.clone(),
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(dir.join("meta.toml"), text)?;
    Ok(())
}

pub fn load_trajectory(dir: &Path, gas: &GasModel) -> Result<EulerTrajectory> {
    let text = std::fs::read_to_string(dir.join("meta.toml"))?;
    let meta: CacheMeta = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut states = Vec::new();
    let mut rates = Vec::new();
    for k in 0.. {
        let p = snapshot_path(dir, "state", k);
        if !p.exists() {
            break;
        }
        states.push(FluidState::from_snapshot(&Snapshot::load(&p)?)?);
        rates.push(FluidState::from_snapshot(&Snapshot::load(&snapshot_path(dir, "rate", k))?)?);
    }
    let grid = states.first().ok_or_else(|| Error::Parse("empty reference cache entry".into()))?.grid.clone();
    Ok(EulerTrajectory {
        gas: gas.clone(),
        grid,
        states,
        rates,
        eps_f: meta.eps_f,
        filter_drain: meta.filter_drain,
        mass_drift: meta.mass_drift,
        energy_drift: meta.energy_drift,
        samples: meta.samples,
        failure: meta.failure_time.zip(meta.failure),
        lifespan: meta.lifespan,
    })
}

fn refinement_factor(fine: &Grid, coarse: &Grid) -> Result<usize> {
    let bad = || Error::Usage(format!("{} is not an integer refinement of {}", fine.fingerprint(), coarse.fingerprint()));
    if fine.dim() != coarse.dim() || fine.extents() != coarse.extents() || fine.bc() != coarse.bc() {
        return Err(bad());
    }
    let f = fine.cells()[0] / coarse.cells()[0];
    if f == 0 || (0..fine.dim()).any(|d| fine.cells()[d] != f * coarse.cells()[d]) {
        return Err(bad());
    }
    Ok(f)
}

/// Primitive fields and their time derivatives from a conservative state and
/// its tendency.
pub fn primitive_rates(state: &FluidState, rate: &FluidState, gas: &GasModel) -> Result<(Primitives, ReferenceRates)> {
    let prim = state.primitives(gas, 0.0)?;
    let n = state.grid.n_cells();
    let dim = state.grid.dim();
    let mut du = vec![vec![0.0; n]; dim];
    let mut dtheta = vec![0.0; n];
    for k in 0..n {
        let (rho, theta) = (prim.rho[k], prim.theta[k]);
        let drho = rate.rho[k];
        let mut kinetic_rate = 0.0;
        for d in 0..dim {
            let u = prim.u[d][k];
            du[d][k] = (rate.mom[d][k] - u * drho) / rho;
            kinetic_rate += u * rate.mom[d][k] - 0.5 * u * u * drho;
        }
        let d_internal = rate.etot[k] - kinetic_rate;
        let p = gas.pressure(0.0, rho, theta)?;
        let (_, p_theta) = gas.pressure_partials(0.0, rho, theta)?;
        let e = gas.internal_energy(0.0, rho, theta)?;
        let de_drho = e + (p - theta * p_theta) / rho;
        dtheta[k] = (d_internal - de_drho * drho) / gas.energy_density_dtheta(0.0, rho, theta)?;
    }
    Ok((prim, ReferenceRates { rho: rate.rho.clone(), u: du, theta: dtheta }))
}

/// Reference trio at time `t` on `target`: linear interpolation in time and
/// conservative averaging in space.
pub fn sample_reference(traj: &EulerTrajectory, t: f64, target: &Grid) -> Result<ReferenceFields> {
    let times = traj.times();
    let (t0, t1) = (times[0], *times.last().expect("non-empty"));
    let tol = 1e-12 * t1.abs().max(1.0);
    if t < t0 - tol || t > t1 + tol {
        return Err(Error::Usage(format!("t = {t} lies outside the stored reference range [{t0}, {t1}]")));
    }
    let factor = refinement_factor(&traj.grid, target)?;
    let k = times.partition_point(|&s| s <= t).clamp(1, times.len().max(2) - 1);
    let (state, rate) = if times.len() == 1 {
        (traj.states[0].clone(), traj.rates[0].clone())
    } else if (t - times[k - 1]).abs() <= tol {
        (traj.states[k - 1].clone(), traj.rates[k - 1].clone())
    } else if (t - times[k]).abs() <= tol {
        (traj.states[k].clone(), traj.rates[k].clone())
    } else {
        let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
        (
            FluidState::combine(1.0 - w, &traj.states[k - 1], w, &traj.states[k]),
            FluidState::combine(1.0 - w, &traj.rates[k - 1], w, &traj.rates[k]),
        )
    };
    let mut state = state.restrict_to(target, factor)?;
    let rate = rate.restrict_to(target, factor)?;
    state.time = t;
    let (mut prim, rates) = primitive_rates(&state, &rate, &traj.gas)?;
    prim.time = t;
    ReferenceFields::new(prim, Some(rates))
}

/// Discrete residuals of the entropy and thermal-energy forms at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulationResidual {
    pub t: f64,
    pub entropy: f64,
    pub thermal: f64,
}

fn fourth_order_derivative(g: &Ghosted, grid: &Grid, axis: usize) -> Vec<f64> {
    let h = grid.spacing(axis);
    let [nx, ny] = grid.cells();
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let at = |s: isize| if axis == 0 { g.at(i + s, j) } else { g.at(i, j + s) };
            out.push((8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * h));
        }
    }
    out
}

/// `L²` norms of `∂t(ρs) + div(ρsu)` and
/// `c_v(∂t(ρθ) + div(ρθu)) + θ ∂p/∂θ div u` at every stored instant. Both
/// vanish for smooth solutions; instants the primitives cannot be recovered
/// at are reported as infinite.
pub fn formulation_residuals(traj: &EulerTrajectory) -> Vec<FormulationResidual> {
    traj.states
        .iter()
        .zip(&traj.rates)
        .map(|(s, r)| {
            formulation_residual(s, r, &traj.gas).unwrap_or(FormulationResidual {
                t: s.time,
                entropy: f64::INFINITY,
                thermal: f64::INFINITY,
            })
        })
        .collect()
}

pub fn formulation_residual(state: &FluidState, rate: &FluidState, gas: &GasModel) -> Result<FormulationResidual> {
    let grid = &state.grid;
    let (prim, rates) = primitive_rates(state, rate, gas)?;
    let n = grid.n_cells();
    let dim = grid.dim();
    let mut entropy = vec![0.0; n];
    let mut thermal = vec![0.0; n];
    let mut rho_s = vec![0.0; n];
    let mut rho_theta = vec![0.0; n];
    for k in 0..n {
        let (rho, theta) = (prim.rho[k], prim.theta[k]);
        let s = gas.entropy(0.0, rho, theta)?;
        let (_, p_theta) = gas.pressure_partials(0.0, rho, theta)?;
        rho_s[k] = rho * s;
        rho_theta[k] = rho * theta;
        let d_rhos_drho = s - p_theta / rho;
        let d_rhos_dtheta = gas.energy_density_dtheta(0.0, rho, theta)? / theta;
        entropy[k] = d_rhos_drho * rates.rho[k] + d_rhos_dtheta * rates.theta[k];
        thermal[k] = rates.rho[k] * theta + rho * rates.theta[k];
    }
    let mut div_u = vec![0.0; n];
    for d in 0..dim {
        let flux = |f: &[f64]| -> Vec<f64> { f.iter().zip(&prim.u[d]).map(|(a, b)| a * b).collect() };
        let fs = fill_ghosts_velocity(&flux(&rho_s), grid, d, 2);
        let ft = fill_ghosts_velocity(&flux(&rho_theta), grid, d, 2);
        let gu = fill_ghosts_velocity(&prim.u[d], grid, d, 2);
        for (k, v) in fourth_order_derivative(&fs, grid, d).into_iter().enumerate() {
            entropy[k] += v;
        }
        for (k, v) in fourth_order_derivative(&ft, grid, d).into_iter().enumerate() {
            thermal[k] += v;
        }
        for (k, v) in fourth_order_derivative(&gu, grid, d).into_iter().enumerate() {
            div_u[k] += v;
        }
    }
    for k in 0..n {
        let (rho, theta) = (prim.rho[k], prim.theta[k]);
        let (_, p_theta) = gas.pressure_partials(0.0, rho, theta)?;
        thermal[k] = gas.heat_capacity_cv(rho, theta)? * thermal[k] + theta * p_theta * div_u[k];
    }
    Ok(FormulationResidual {
        t: state.time,
        entropy: crate::grid::norm(&entropy, grid, 2.0),
        thermal: crate::grid::norm(&thermal, grid, 2.0),
    })
}

/// Outcome of the wall compatibility checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    /// Largest `|u₀·n|` at wall points.
    pub k0_residual: f64,
    pub k0_pass: bool,
    /// Largest `|∂t(ρu·n)|` extrapolated to the walls.
    pub k1_residual: f64,
    /// Discretization scale the `k = 1` residual is compared with.
    pub k1_threshold: f64,
    pub k1_pass: bool,
    /// The `k = 2` condition is not checked.
    pub k2_checked: bool,
}

/// Checks `u₀·n = 0` at the walls exactly and `∂t u·n = 0` to stencil
/// accuracy. `velocity(x)` is the initial velocity field; `initial` its
/// sampling on `grid`.
pub fn compatibility_check<F: Fn([f64; 2]) -> [f64; 2]>(velocity: F, initial: &Primitives, gas: &GasModel) -> Result<CompatibilityReport> {
    let grid = &initial.grid;
    if !grid.has_wall() {
        return Err(Error::Usage("compatibility check needs at least one slip-wall axis".into()));
    }
    let [nx, ny] = grid.cells();
    let ext = grid.extents();
    let mut k0: f64 = 0.0;
    let mut k1: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let state = FluidState::from_primitives(initial, gas, 0.0)?;
    let rate = rhs_euler(&state, gas, 0.0)?;
    for axis in 0..grid.dim() {
        if grid.bc()[axis] != Boundary::SlipWall {
            continue;
        }
        let (n, n_other) = if axis == 0 { (nx, ny) } else { (ny, nx) };
        let other = 1 - axis;
        for o in 0..n_other {
            let mut x = [0.0; 2];
            if grid.dim() == 2 {
                x[other] = (o as f64 + 0.5) * grid.spacing(other);
            }
            for wall in [0.0, ext[axis]] {
                x[axis] = wall;
                k0 = k0.max(velocity(x)[axis].abs());
            }
            let idx = |c: usize| if axis == 0 { grid.index(c, o) } else { grid.index(o, c) };
            let m = &rate.mom[axis];
            let lower = 1.5 * m[idx(0)] - 0.5 * m[idx(1)];
            let upper = 1.5 * m[idx(n - 1)] - 0.5 * m[idx(n - 2)];
            k1 = k1.max(lower.abs()).max(upper.abs());
            scale = scale.max(m.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        }
    }
    let h = (0..grid.dim()).map(|d| grid.spacing(d) / ext[d]).fold(0.0f64, f64::max);
    let data_scale = initial.u.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let k1_threshold = 10.0 * h * h * scale.max(f64::EPSILON);
    Ok(CompatibilityReport {
        k0_residual: k0,
        k0_pass: k0 <= 1e-12 * data_scale,
        k1_residual: k1,
        k1_threshold,
        k1_pass: k1 <= k1_threshold,
        k2_checked: false,
    })
}

//! Finite-volume solver for the Navier–Stokes–Fourier system with damping,
//! radiation closures and slip walls.
//!
//! Convective fluxes are Rusanov with linear reconstruction of `(ρ, u, θ)`,
//! viscous and heat fluxes are centered face differences, and time stepping
//! is SSP-RK3 on the conservative variables `(ρ, ρu, E)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fill_ghosts_scalar, fill_ghosts_velocity, Boundary, Ghosted, Grid};
use crate::reduce::{det_max, det_min, det_sum};
use crate::state::{FluidState, Primitives};
use crate::thermo::{stress_tensor, viscous_dissipation, GasModel, ScalingParams, Tensor3, TransportModel};

pub use crate::state::recover_temperature;

const GHOSTS: usize = 2;
/// Index of the energy component in flux vectors `[mass, m_x, m_y, energy]`.
const EN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reconstruction {
    /// First-order Rusanov.
    Constant,
    /// Unlimited centered slopes, second order on smooth data.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Floors {
    pub rho: f64,
    pub theta: f64,
}

impl Default for Floors {
    fn default() -> Self {
        Floors { rho: 1e-12, theta: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct NsfRunConfig {
    pub gas: GasModel,
    pub transport: TransportModel,
    pub scaling: ScalingParams,
    pub grid: Grid,
    pub cfl: f64,
    pub t_end: f64,
    /// Time between stored outputs.
    pub output_stride: f64,
    pub floors: Floors,
    pub reconstruction: Reconstruction,
}

impl NsfRunConfig {
    pub fn new(grid: Grid, scaling: ScalingParams) -> NsfRunConfig {
        NsfRunConfig {
            gas: GasModel::ideal(),
            transport: TransportModel::standard(),
            scaling,
            grid,
            cfl: 0.4,
            t_end: 0.5,
            output_stride: 0.05,
            floors: Floors::default(),
            reconstruction: Reconstruction::Linear,
        }
    }

    /// Structural checks that do not depend on the initial data.
    pub fn validate(&self) -> Result<()> {
        self.scaling.validate()?;
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(Error::Config(format!("cfl must lie in (0, 0.9], got {}", self.cfl)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.output_stride > 0.0) {
            return Err(Error::Config(format!("output.stride must be positive, got {}", self.output_stride)));
        }
        if !(self.floors.rho > 0.0 && self.floors.theta > 0.0) {
            return Err(Error::Config("floors must be positive".into()));
        }
        Ok(())
    }

    /// Output instants `0, stride, 2·stride, …, t_end`.
    pub fn output_times(&self) -> Vec<f64> {
        output_times(self.t_end, self.output_stride)
    }
}

pub fn output_times(t_end: f64, stride: f64) -> Vec<f64> {
    let n = (t_end / stride - 1e-9).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (0..n).map(|k| k as f64 * stride).collect();
    out.push(t_end);
    out
}

/// External source terms, used by manufactured-solution tests.
pub trait Forcing: Sync {
    /// `[mass, momentum_x, momentum_y, energy]` at `x` and time `t`.
    fn source(&self, x: [f64; 2], t: f64) -> [f64; 4];
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Prim {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

pub(crate) struct Ghosts {
    rho: Ghosted,
    theta: Ghosted,
    u: Vec<Ghosted>,
}

impl Ghosts {
    pub(crate) fn new(p: &Primitives, layers: usize) -> Ghosts {
        let g = &p.grid;
        Ghosts {
            rho: fill_ghosts_scalar(&p.rho, g, layers),
            theta: fill_ghosts_scalar(&p.theta, g, layers),
            u: (0..g.dim()).map(|d| fill_ghosts_velocity(&p.u[d], g, d, layers)).collect(),
        }
    }

    pub(crate) fn at(&self, i: isize, j: isize) -> Prim {
        let mut u = [0.0; 3];
        for (d, c) in self.u.iter().enumerate() {
            u[d] = c.at(i, j);
        }
        Prim { rho: self.rho.at(i, j), u, theta: self.theta.at(i, j) }
    }
}

/// Face fluxes split by origin, each `[mass, m_x, m_y, energy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFlux {
    pub convective: [f64; 4],
    pub viscous: [f64; 4],
    /// Normal component of the Fourier flux `q`.
    pub heat: f64,
}

impl FaceFlux {
    pub fn total(&self) -> [f64; 4] {
        let mut t = [0.0; 4];
        for k in 0..4 {
            t[k] = self.convective[k] + self.viscous[k];
        }
        t[EN] += self.heat;
        t
    }
}

/// Convective flux, conserved variables and signal speed of one state.
pub(crate) fn euler_flux(gas: &GasModel, a: f64, s: &Prim, axis: usize) -> Result<([f64; 4], [f64; 4], f64)> {
    let p = gas.pressure(a, s.rho, s.theta)?;
    let c = gas.sound_speed(a, s.rho, s.theta)?;
    let un = s.u[axis];
    let ke = 0.5 * s.rho * (s.u[0] * s.u[0] + s.u[1] * s.u[1]);
    let e = ke + gas.energy_density(a, s.rho, s.theta)?;
    let mut f = [s.rho * un, s.rho * s.u[0] * un, s.rho * s.u[1] * un, (e + p) * un];
    f[1 + axis] += p;
    let q = [s.rho, s.rho * s.u[0], s.rho * s.u[1], e];
    Ok((f, q, un.abs() + c))
}

struct Operator<'a> {
    cfg: &'a NsfRunConfig,
    g: Ghosts,
}

impl Operator<'_> {
    fn offset(axis: usize) -> (isize, isize) {
        if axis == 0 {
            (1, 0)
        } else {
            (0, 1)
        }
    }

    fn reconstruct(&self, i: isize, j: isize, axis: usize) -> (Prim, Prim) {
        let (di, dj) = Self::offset(axis);
        let left = self.g.at(i - di, j - dj);
        let right = self.g.at(i, j);
        if self.cfg.reconstruction == Reconstruction::Constant {
            return (left, right);
        }
        let ll = self.g.at(i - 2 * di, j - 2 * dj);
        let rr = self.g.at(i + di, j + dj);
        let lin = |l: f64, r: f64, ll: f64, rr: f64| (l + 0.25 * (r - ll), r - 0.25 * (rr - l));
        let (rl, rrh) = lin(left.rho, right.rho, ll.rho, rr.rho);
        let (tl, tr) = lin(left.theta, right.theta, ll.theta, rr.theta);
        let mut ul = [0.0; 3];
        let mut ur = [0.0; 3];
        for d in 0..3 {
            (ul[d], ur[d]) = lin(left.u[d], right.u[d], ll.u[d], rr.u[d]);
        }
        if rl > 0.0 && rrh > 0.0 && tl > 0.0 && tr > 0.0 {
            (Prim { rho: rl, u: ul, theta: tl }, Prim { rho: rrh, u: ur, theta: tr })
        } else {
            (left, right)
        }
    }

    /// Flux through the face on the low side of cell `(i, j)` along `axis`.
    fn face_flux(&self, i: isize, j: isize, axis: usize) -> Result<FaceFlux> {
        let cfg = self.cfg;
        let (a, nu, omega) = (cfg.scaling.a, cfg.scaling.nu, cfg.scaling.omega);
        let (sl, sr) = self.reconstruct(i, j, axis);
        let (fl, ql, cl) = euler_flux(&cfg.gas, a, &sl, axis)?;
        let (fr, qr, cr) = euler_flux(&cfg.gas, a, &sr, axis)?;
        let alpha = cl.max(cr);
        let mut convective = [0.0; 4];
        for k in 0..4 {
            convective[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * alpha * (qr[k] - ql[k]);
        }

        let mut viscous = [0.0; 4];
        let mut heat = 0.0;
        if nu > 0.0 || omega > 0.0 {
            let (di, dj) = Self::offset(axis);
            let (li, lj) = (i - di, j - dj);
            let left = self.g.at(li, lj);
            let right = self.g.at(i, j);
            let grid = &cfg.grid;
            let h = grid.spacing(axis);
            let theta = 0.5 * (left.theta + right.theta);
            let mut grad_u: Tensor3 = [[0.0; 3]; 3];
            let mut grad_t = [0.0; 3];
            for d in 0..grid.dim() {
                grad_u[d][axis] = (right.u[d] - left.u[d]) / h;
            }
            grad_t[axis] = (right.theta - left.theta) / h;
            if grid.dim() == 2 {
                let other = 1 - axis;
                let (ei, ej) = Self::offset(other);
                let ho = grid.spacing(other);
                let tangential = |g: &Ghosted| {
                    0.25 * (g.at(li + ei, lj + ej) - g.at(li - ei, lj - ej) + g.at(i + ei, j + ej) - g.at(i - ei, j - ej)) / ho
                };
                for d in 0..2 {
                    grad_u[d][other] = tangential(&self.g.u[d]);
                }
                grad_t[other] = tangential(&self.g.theta);
            }
            let s = stress_tensor(&cfg.transport, nu, theta, &grad_u)?;
            let mut work = 0.0;
            for d in 0..3 {
                let uf = 0.5 * (left.u[d] + right.u[d]);
                if d < 2 {
                    viscous[1 + d] = -s[d][axis];
                }
                work += s[d][axis] * uf;
            }
            viscous[EN] = -work;
            heat = -omega * cfg.transport.kappa(theta) * grad_t[axis];
        }
        Ok(FaceFlux { convective, viscous, heat })
    }
}

fn prepare<'a>(state: &FluidState, cfg: &'a NsfRunConfig) -> Result<(Operator<'a>, Primitives)> {
    if !state.grid.same_shape(&cfg.grid) {
        return Err(Error::Usage("state grid differs from the run configuration".into()));
    }
    let prim = state.primitives(&cfg.gas, cfg.scaling.a)?;
    Ok((Operator { cfg, g: Ghosts::new(&prim, GHOSTS) }, prim))
}

/// Time derivatives of `(ρ, ρu, E)`.
pub fn rhs_nsf(state: &FluidState, cfg: &NsfRunConfig, forcing: Option<&dyn Forcing>) -> Result<FluidState> {
    let (op, prim) = prepare(state, cfg)?;
    let grid = &cfg.grid;
    let dim = grid.dim();
    let [nx, ny] = grid.cells();
    let mut out = FluidState::zeros(grid);
    out.time = state.time;

    for axis in 0..dim {
        let h = grid.spacing(axis);
        let (n_axis, n_other) = if axis == 0 { (nx, ny) } else { (ny, nx) };
        let periodic = grid.bc()[axis] == Boundary::Periodic;
        for o in 0..n_other {
            let mut faces = Vec::with_capacity(n_axis + 1);
            for f in 0..=n_axis {
                if periodic && f == n_axis {
                    faces.push(faces[0]);
                    continue;
                }
                let (i, j) = if axis == 0 { (f, o) } else { (o, f) };
                faces.push(op.face_flux(i as isize, j as isize, axis)?.total());
            }
            for c in 0..n_axis {
                let k = if axis == 0 { grid.index(c, o) } else { grid.index(o, c) };
                let (lo, hi): (&[f64; 4], &[f64; 4]) = (&faces[c], &faces[c + 1]);
                out.rho[k] -= (hi[0] - lo[0]) / h;
                for d in 0..dim {
                    out.mom[d][k] -= (hi[1 + d] - lo[1 + d]) / h;
                }
                out.etot[k] -= (hi[EN] - lo[EN]) / h;
            }
        }
    }

    let lambda = cfg.scaling.lambda;
    let centers = forcing.map(|_| grid.centers());
    for k in 0..grid.n_cells() {
        if lambda > 0.0 {
            let mut u2 = 0.0;
            for d in 0..dim {
                let u = prim.u[d][k];
                out.mom[d][k] -= lambda * u;
                u2 += u * u;
            }
            out.etot[k] -= lambda * u2;
        }
        if let (Some(f), Some(xs)) = (forcing, centers.as_ref()) {
            let s = f.source(xs[k], state.time);
            out.rho[k] += s[0];
            for d in 0..dim {
                out.mom[d][k] += s[1 + d];
            }
            out.etot[k] += s[EN];
        }
    }
    Ok(out)
}

/// A face on a slip wall and its fluxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallFace {
    pub axis: usize,
    /// `false` for the wall at coordinate 0.
    pub upper: bool,
    pub flux: FaceFlux,
}

/// Fluxes through every slip-wall face of the grid.
pub fn wall_face_fluxes(state: &FluidState, cfg: &NsfRunConfig) -> Result<Vec<WallFace>> {
    let (op, _) = prepare(state, cfg)?;
    let grid = &cfg.grid;
    let [nx, ny] = grid.cells();
    let mut out = Vec::new();
    for axis in 0..grid.dim() {
        if grid.bc()[axis] != Boundary::SlipWall {
            continue;
        }
        let (n_axis, n_other) = if axis == 0 { (nx, ny) } else { (ny, nx) };
        for o in 0..n_other {
            for (f, upper) in [(0, false), (n_axis, true)] {
                let (i, j) = if axis == 0 { (f, o) } else { (o, f) };
                out.push(WallFace { axis, upper, flux: op.face_flux(i as isize, j as isize, axis)? });
            }
        }
    }
    Ok(out)
}

/// Largest stable step: `cfl · min(Δx/(|u| + c), Δx²/(2d D_max))`.
pub fn stable_dt(state: &FluidState, cfg: &NsfRunConfig) -> Result<f64> {
    let prim = state.primitives(&cfg.gas, cfg.scaling.a)?;
    stable_dt_prim(&prim, cfg)
}

fn stable_dt_prim(prim: &Primitives, cfg: &NsfRunConfig) -> Result<f64> {
    let grid = &prim.grid;
    let dim = grid.dim();
    let h = (0..dim).map(|d| grid.spacing(d)).fold(f64::INFINITY, f64::min);
    let ScalingParams { a, nu, omega, .. } = cfg.scaling;
    let mut dt = f64::INFINITY;
    for k in 0..grid.n_cells() {
        let (rho, theta) = (prim.rho[k], prim.theta[k]);
        let speed = (0..dim).map(|d| prim.u[d][k].powi(2)).sum::<f64>().sqrt();
        let c = cfg.gas.sound_speed(a, rho, theta)?;
        dt = dt.min(h / (speed + c));
        let t = &cfg.transport;
        let visc = nu * (4.0 / 3.0 * t.mu(theta) + t.eta(theta).max(0.0)) / rho;
        let cond = omega * t.kappa(theta) / cfg.gas.energy_density_dtheta(a, rho, theta)?;
        let d_max = visc.max(cond);
        if d_max > 0.0 {
            dt = dt.min(h * h / (2.0 * dim as f64 * d_max));
        }
    }
    let dt = cfg.cfl * dt;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::TimeStep(dt));
    }
    Ok(dt)
}

/// Raises `ρ` and `θ` to the configured floors; returns the number of
/// corrections.
pub fn apply_floors(state: &mut FluidState, cfg: &NsfRunConfig) -> Result<usize> {
    let mut hits = 0;
    let a = cfg.scaling.a;
    for k in 0..state.rho.len() {
        if !(state.rho[k] >= cfg.floors.rho) {
            state.rho[k] = cfg.floors.rho;
            hits += 1;
        }
        let rho = state.rho[k];
        let ke = 0.5 * state.mom.iter().map(|m| m[k] * m[k]).sum::<f64>() / rho;
        let floor_energy = cfg.gas.energy_density(a, rho, cfg.floors.theta)?;
        if !(state.etot[k] - ke >= floor_energy) {
            state.etot[k] = ke + floor_energy;
            hits += 1;
        }
    }
    Ok(hits)
}

/// One SSP-RK3 step. Returns the new state and the number of floor hits.
pub fn step(state: &FluidState, dt: f64, cfg: &NsfRunConfig, forcing: Option<&dyn Forcing>) -> Result<(FluidState, usize)> {
    let t0 = state.time;
    let mut hits = 0;
    let l0 = rhs_nsf(state, cfg, forcing)?;
    let mut s1 = state.axpy(dt, &l0);
    s1.time = t0 + dt;
    hits += apply_floors(&mut s1, cfg)?;
    let l1 = rhs_nsf(&s1, cfg, forcing)?;
    let mut s2 = FluidState::combine(0.75, state, 0.25, &s1.axpy(dt, &l1));
    s2.time = t0 + 0.5 * dt;
    hits += apply_floors(&mut s2, cfg)?;
    let l2 = rhs_nsf(&s2, cfg, forcing)?;
    let mut s3 = FluidState::combine(1.0 / 3.0, state, 2.0 / 3.0, &s2.axpy(dt, &l2));
    s3.time = t0 + dt;
    hits += apply_floors(&mut s3, cfg)?;
    if !s3.is_finite() {
        return Err(Error::NonFinite { time: s3.time });
    }
    Ok((s3, hits))
}

/// Pointwise entropy production `σ = (S:∇u − q·∇θ/θ)/θ` and its integral.
pub fn entropy_production(state: &FluidState, cfg: &NsfRunConfig) -> Result<(Vec<f64>, f64)> {
    let prim = state.primitives(&cfg.gas, cfg.scaling.a)?;
    entropy_production_prim(&prim, cfg)
}

/// Centered cell gradients of velocity and temperature.
pub fn cell_gradients(prim: &Primitives) -> Result<(Vec<Tensor3>, Vec<[f64; 3]>)> {
    let grid = &prim.grid;
    let dim = grid.dim();
    let gt = fill_ghosts_scalar(&prim.theta, grid, 1);
    let gu: Vec<Ghosted> = (0..dim).map(|d| fill_ghosts_velocity(&prim.u[d], grid, d, 1)).collect();
    let mut du = vec![[[0.0; 3]; 3]; grid.n_cells()];
    let mut dt = vec![[0.0; 3]; grid.n_cells()];
    for axis in 0..dim {
        let t = crate::grid::derivative(&gt, grid, axis)?;
        for (k, v) in t.into_iter().enumerate() {
            dt[k][axis] = v;
        }
        for (comp, g) in gu.iter().enumerate() {
            let d = crate::grid::derivative(g, grid, axis)?;
            for (k, v) in d.into_iter().enumerate() {
                du[k][comp][axis] = v;
            }
        }
    }
    Ok((du, dt))
}

pub(crate) fn entropy_production_prim(prim: &Primitives, cfg: &NsfRunConfig) -> Result<(Vec<f64>, f64)> {
    let (du, dt) = cell_gradients(prim)?;
    let ScalingParams { nu, omega, .. } = cfg.scaling;
    let sigma: Vec<f64> = (0..prim.grid.n_cells())
        .map(|k| {
            let theta = prim.theta[k];
            let visc = viscous_dissipation(&cfg.transport, nu, theta, &du[k])?;
            let g2 = dt[k][0] * dt[k][0] + dt[k][1] * dt[k][1] + dt[k][2] * dt[k][2];
            let heat = omega * cfg.transport.kappa(theta).max(0.0) * g2 / theta;
            Ok((visc + heat) / theta)
        })
        .collect::<Result<_>>()?;
    let total = crate::grid::integrate(&sigma, &prim.grid);
    Ok((sigma, total))
}

/// Recorded lower mass bound and upper sup-norm bound of initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataBounds {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl DataBounds {
    pub fn from_initial(prim: &Primitives) -> Result<DataBounds> {
        if !(prim.min_rho() > 0.0 && prim.min_theta() > 0.0) {
            return Err(Error::Domain("initial density and temperature must be positive".into()));
        }
        let m = crate::grid::integrate(&prim.rho, &prim.grid);
        let speed = crate::grid::magnitude(&prim.u);
        let d = det_max(&prim.rho).max(det_max(&prim.theta)).max(det_max(&speed).max(0.0));
        Ok(DataBounds { m, d })
    }
}

/// One diagnostics row at an output instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRow {
    pub t: f64,
    pub mass: f64,
    pub etot: f64,
    /// `λ ∫₀ᵗ ∫ |u|²`.
    pub damping_integral: f64,
    /// `∫₀ᵗ ∫ σ`.
    pub sigma_integral: f64,
    pub min_rho: f64,
    pub min_theta: f64,
    pub floor_hits: usize,
}

pub const DIAG_HEADER: &str = "t,mass,etot,damping_integral,sigma_integral,min_rho,min_theta,floor_hits";

impl DiagRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            self.t, self.mass, self.etot, self.damping_integral, self.sigma_integral, self.min_rho, self.min_theta, self.floor_hits
        )
    }
}

pub fn diagnostics_csv(rows: &[DiagRow]) -> String {
    let mut s = String::from(DIAG_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// A run stopped by a numerical failure, with the last good state.
#[derive(Debug, Clone)]
pub struct Abort {
    pub error: Error,
    pub dump: FluidState,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FluidState>,
    pub rows: Vec<DiagRow>,
    pub bounds: DataBounds,
    pub steps: usize,
    pub floor_hits: usize,
    /// False once floor activations in a single step exceed 0.1% of the cells.
    pub healthy: bool,
    pub abort: Option<Abort>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn csv(&self) -> String {
        diagnostics_csv(&self.rows)
    }
}

struct Instant {
    mass: f64,
    etot: f64,
    damping: f64,
    sigma: f64,
    min_rho: f64,
    min_theta: f64,
}

fn instant(state: &FluidState, cfg: &NsfRunConfig) -> Result<(Instant, Primitives)> {
    let prim = state.primitives(&cfg.gas, cfg.scaling.a)?;
    let grid = &state.grid;
    let u2: Vec<f64> = (0..grid.n_cells()).map(|k| prim.u.iter().map(|c| c[k] * c[k]).sum()).collect();
    let (_, sigma) = entropy_production_prim(&prim, cfg)?;
    Ok((
        Instant {
            mass: crate::grid::integrate(&state.rho, grid),
            etot: crate::grid::integrate(&state.etot, grid),
            damping: cfg.scaling.lambda * crate::grid::integrate(&u2, grid),
            sigma,
            min_rho: det_min(&prim.rho),
            min_theta: det_min(&prim.theta),
        },
        prim,
    ))
}

/// Runs from `initial` to `t_end`, storing the state and a diagnostics row
/// at every output instant. Numerical failures end the run early and are
/// recorded in [`Trajectory::abort`].
pub fn simulate(cfg: &NsfRunConfig, initial: &Primitives, forcing: Option<&dyn Forcing>) -> Result<Trajectory> {
    cfg.validate()?;
    let bounds = DataBounds::from_initial(initial)?;
    for (name, floor, min) in [("rho", cfg.floors.rho, initial.min_rho()), ("theta", cfg.floors.theta, initial.min_theta())] {
        if floor > 1e-8 * min {
            return Err(Error::Config(format!("floors.{name} = {floor:e} exceeds 1e-8 of the initial minimum {min:e}")));
        }
    }
    let mut state = FluidState::from_primitives(initial, &cfg.gas, cfg.scaling.a)?;
    let outputs = cfg.output_times();
    let mut traj = Trajectory { states: Vec::new(), rows: Vec::new(), bounds, steps: 0, floor_hits: 0, healthy: true, abort: None };

    let (mut now, mut prim) = instant(&state, cfg)?;
    let mut damping = 0.0;
    let mut sigma = 0.0;
    let record = |traj: &mut Trajectory, state: &FluidState, now: &Instant, damping: f64, sigma: f64| {
        traj.rows.push(DiagRow {
            t: state.time,
            mass: now.mass,
            etot: now.etot,
            damping_integral: damping,
            sigma_integral: sigma,
            min_rho: now.min_rho,
            min_theta: now.min_theta,
            floor_hits: traj.floor_hits,
        });
        traj.states.push(state.clone());
    };
    record(&mut traj, &state, &now, damping, sigma);
    let limit = cfg.grid.n_cells() as f64 * 1e-3;

    for &target in &outputs[1..] {
        while state.time < target {
            let attempt = (|| -> Result<(FluidState, usize, Instant, Primitives)> {
                let dt = stable_dt_prim(&prim, cfg)?.min(target - state.time);
                let (mut next, hits) = step(&state, dt, cfg, forcing)?;
                if target - next.time < 1e-12 * target.max(1.0) {
                    next.time = target;
                }
                let (inst, p) = instant(&next, cfg)?;
                Ok((next, hits, inst, p))
            })();
            match attempt {
                Ok((next, hits, inst, p)) => {
                    let dt = next.time - state.time;
                    damping += 0.5 * dt * (now.damping + inst.damping);
                    sigma += 0.5 * dt * (now.sigma + inst.sigma);
                    traj.steps += 1;
                    traj.floor_hits += hits;
                    if hits as f64 > limit {
                        traj.healthy = false;
                    }
                    state = next;
                    now = inst;
                    prim = p;
                }
                Err(error) => {
                    traj.healthy = false;
                    traj.abort = Some(Abort { error, dump: state.clone() });
                    return Ok(traj);
                }
            }
        }
        record(&mut traj, &state, &now, damping, sigma);
    }
    Ok(traj)
}

/// Mass `∫ρ` of a state.
pub fn total_mass(state: &FluidState) -> f64 {
    crate::grid::integrate(&state.rho, &state.grid)
}

/// Kinetic plus internal energy `∫E`.
pub fn total_energy(state: &FluidState) -> f64 {
    det_sum(&state.etot) * state.grid.cell_volume()
}

//! Checks of the energy bounds, the interpolation estimate, the relative
//! energy inequality and the convergence-rate envelope on computed runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::{sample_reference, EulerTrajectory};
use crate::grid::{fill_ghosts_scalar, fill_ghosts_velocity, gradient, integrate, norm, Grid};
use crate::nsf::{cell_gradients, NsfRunConfig, Trajectory};
use crate::reduce::cumulative_trapezoid;
use crate::relative_energy::{relative_energy, RelativeEnergyReport};
use crate::state::{Primitives, ReferenceFields};
use crate::thermo::{stress_tensor, viscous_dissipation, ScalingParams, Tensor3};

pub use crate::nsf::DataBounds;

/// `max{a, ν, ω, λ, ν/√a, ω/a, (a/√(ν³λ))^{1/3}}`.
pub fn rate_envelope(s: &ScalingParams) -> Result<f64> {
    s.validate()?;
    for (name, v) in [("a", s.a), ("nu", s.nu), ("lambda", s.lambda)] {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("rate envelope needs {name} > 0, got {v}")));
        }
    }
    let terms = envelope_terms(s);
    Ok(terms.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// The seven envelope terms in the order they appear in the maximum.
pub fn envelope_terms(s: &ScalingParams) -> [f64; 7] {
    [
        s.a,
        s.nu,
        s.omega,
        s.lambda,
        s.nu / s.a.sqrt(),
        s.omega / s.a,
        (s.a / (s.nu.powi(3) * s.lambda).sqrt()).cbrt(),
    ]
}

/// Largest `‖u‖₄ / (‖u‖₆^{3/4} ‖u‖₂^{1/4})` over the given velocity fields.
/// A zero field contributes 0.
pub fn interpolation_check(fields: &[Vec<Vec<f64>>], grid: &Grid) -> f64 {
    fields
        .iter()
        .map(|u| {
            let mag = crate::grid::magnitude(u);
            let n2 = norm(&mag, grid, 2.0);
            if n2 == 0.0 {
                return 0.0;
            }
            norm(&mag, grid, 4.0) / (norm(&mag, grid, 6.0).powf(0.75) * n2.powf(0.25))
        })
        .fold(0.0, f64::max)
}

/// Energy-estimate quantities along a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformBounds {
    /// `sup_t ∫ρ|u|²`.
    pub kinetic: f64,
    /// `sup_t ∫ρ^{5/3}`.
    pub rho_53: f64,
    /// `sup_t ∫ρθ`.
    pub rho_theta: f64,
    /// `sup_t a∫θ⁴`.
    pub radiation: f64,
    /// `ν∫∫|∇u + ∇uᵀ − (2/3) div u I|²`.
    pub viscous: f64,
    /// `λ∫∫|u|²`.
    pub damping: f64,
    /// `ω∫∫(|∇θ|² + |log θ|²)`.
    pub thermal: f64,
}

impl UniformBounds {
    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("kinetic", self.kinetic),
            ("rho_53", self.rho_53),
            ("rho_theta", self.rho_theta),
            ("radiation", self.radiation),
            ("viscous", self.viscous),
            ("damping", self.damping),
            ("thermal", self.thermal),
        ]
    }
}

fn primitives_of(traj: &Trajectory, cfg: &NsfRunConfig) -> Result<Vec<Primitives>> {
    traj.states.iter().map(|s| s.primitives(&cfg.gas, cfg.scaling.a)).collect()
}

pub fn uniform_bounds(traj: &Trajectory, cfg: &NsfRunConfig) -> Result<UniformBounds> {
    let ScalingParams { a, nu, omega, lambda } = cfg.scaling;
    let mut sup = [0.0f64; 4];
    let mut rates = [Vec::new(), Vec::new(), Vec::new()];
    let mut times = Vec::new();
    for p in primitives_of(traj, cfg)? {
        let grid = &p.grid;
        let n = grid.n_cells();
        let (du, dt) = cell_gradients(&p)?;
        let u2: Vec<f64> = (0..n).map(|k| p.u.iter().map(|c| c[k] * c[k]).sum()).collect();
        let pointwise = |f: &dyn Fn(usize) -> f64| integrate(&(0..n).map(f).collect::<Vec<_>>(), grid);
        let inst = [
            pointwise(&|k| p.rho[k] * u2[k]),
            pointwise(&|k| p.rho[k].powf(5.0 / 3.0)),
            pointwise(&|k| p.rho[k] * p.theta[k]),
            a * pointwise(&|k| p.theta[k].powi(4)),
        ];
        for (s, v) in sup.iter_mut().zip(inst) {
            *s = s.max(v);
        }
        rates[0].push(nu * pointwise(&|k| {
            let g = &du[k];
            let div = g[0][0] + g[1][1] + g[2][2];
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = g[i][j] + g[j][i];
                    if i == j {
                        v -= 2.0 / 3.0 * div;
                    }
                    acc += v * v;
                }
            }
            acc
        }));
        rates[1].push(lambda * integrate(&u2, grid));
        rates[2].push(omega * pointwise(&|k| dt[k].iter().map(|v| v * v).sum::<f64>() + p.theta[k].ln().powi(2)));
        times.push(p.time);
    }
    let total = |v: &[f64]| crate::reduce::trapezoid(&times, v);
    Ok(UniformBounds {
        kinetic: sup[0],
        rho_53: sup[1],
        rho_theta: sup[2],
        radiation: sup[3],
        viscous: total(&rates[0]),
        damping: total(&rates[1]),
        thermal: total(&rates[2]),
    })
}

/// Discrete total-energy balance `∫E(t) + λ∫₀ᵗ∫|u|² − ∫E(0)` at every
/// output instant; positive values are excess over the non-increase law.
pub fn energy_budget(traj: &Trajectory) -> Vec<(f64, f64)> {
    let e0 = traj.rows.first().map_or(0.0, |r| r.etot);
    traj.rows.iter().map(|r| (r.t, r.etot + r.damping_integral - e0)).collect()
}

pub fn energy_budget_excess(traj: &Trajectory) -> f64 {
    energy_budget(traj).iter().map(|(_, v)| *v).fold(0.0, f64::max)
}

/// Relative energy against the reference at every output instant up to `t_max`.
pub fn relative_energy_series(
    traj: &Trajectory,
    reference: &EulerTrajectory,
    cfg: &NsfRunConfig,
    t_max: f64,
    envelope: f64,
) -> Result<RelativeEnergyReport> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for s in traj.states.iter().filter(|s| s.time <= t_max * (1.0 + 1e-12)) {
        let p = s.primitives(&cfg.gas, cfg.scaling.a)?;
        let r = sample_reference(reference, s.time, &cfg.grid)?;
        times.push(s.time);
        values.push(relative_energy(&p, &r, &cfg.gas, cfg.scaling.a)?);
    }
    Ok(RelativeEnergyReport::new(times, values, envelope))
}

/// Names of the right-hand-side terms of the relative energy inequality.
pub const R1_RHS_TERMS: [&str; 9] = [
    "convective",
    "stress",
    "heat",
    "damping_cross",
    "entropy_velocity",
    "material",
    "pressure_div",
    "entropy_transport",
    "pressure_relaxation",
];

/// One instant of the relative energy inequality: the relative energy, the
/// accumulated left-hand dissipation terms, each accumulated right-hand term
/// and the balance.
#[derive(Debug, Clone, PartialEq)]
pub struct R1Row {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub damping: f64,
    pub rhs_terms: [f64; 9],
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct R1Report {
    pub rows: Vec<R1Row>,
    /// The dissipation term entered with its sign flipped.
    pub mutated: bool,
}

impl R1Report {
    /// Largest positive `LHS − RHS`, zero when the inequality holds throughout.
    pub fn excess(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    /// Largest `|LHS − RHS|`.
    pub fn defect(&self) -> f64 {
        self.rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("t,E,dissipation,damping");
        for name in R1_RHS_TERMS {
            s.push(',');
            s.push_str(name);
        }
        s.push_str(",lhs,rhs,lhs_minus_rhs\n");
        for r in &self.rows {
            let _ = write!(s, "{:?},{:?},{:?},{:?}", r.t, r.energy, r.dissipation, r.damping);
            for v in r.rhs_terms {
                let _ = write!(s, ",{v:?}");
            }
            let _ = writeln!(s, ",{:?},{:?},{:?}", r.lhs, r.rhs, r.residual);
        }
        s
    }

    /// Key-value summary block.
    pub fn summary(&self) -> String {
        format!(
            "instants = {}\nmutated = {}\nmax_excess = {:?}\nmax_defect = {:?}\n",
            self.rows.len(),
            self.mutated,
            self.excess(),
            self.defect()
        )
    }
}

struct RefGradients {
    /// `grad_u[k][i][j] = ∂U_i/∂x_j`.
    grad_u: Vec<Tensor3>,
    grad_theta: Vec<[f64; 3]>,
    grad_p: Vec<[f64; 3]>,
}

fn reference_gradients(r: &ReferenceFields, cfg: &NsfRunConfig) -> Result<RefGradients> {
    let f = &r.fields;
    let grid = &f.grid;
    let a = cfg.scaling.a;
    let p: Vec<f64> = (0..grid.n_cells()).map(|k| cfg.gas.pressure(a, f.rho[k], f.theta[k])).collect::<Result<_>>()?;
    let (grad_u, grad_theta) = cell_gradients(f)?;
    let gp = gradient(&fill_ghosts_scalar(&p, grid, 1), grid)?;
    let grad_p = (0..grid.n_cells())
        .map(|k| {
            let mut v = [0.0; 3];
            for (d, g) in gp.iter().enumerate() {
                v[d] = g[k];
            }
            v
        })
        .collect();
    Ok(RefGradients { grad_u, grad_theta, grad_p })
}

/// Per-instant integrands: dissipation, damping and the nine right-hand terms.
fn r1_integrands(p: &Primitives, r: &ReferenceFields, cfg: &NsfRunConfig) -> Result<(f64, f64, [f64; 9])> {
    let grid = &p.grid;
    let n = grid.n_cells();
    let dim = grid.dim();
    let gas = &cfg.gas;
    let ScalingParams { a, nu, omega, lambda } = cfg.scaling;
    let rates = r.rates.as_ref().ok_or_else(|| Error::Usage("reference lacks time derivatives".into()))?;
    let rf = &r.fields;
    let (du, dth) = cell_gradients(p)?;
    let rg = reference_gradients(r, cfg)?;

    let mut diss = vec![0.0; n];
    let mut damp = vec![0.0; n];
    let mut terms = vec![vec![0.0; n]; 9];
    for k in 0..n {
        let (rho, theta) = (p.rho[k], p.theta[k]);
        let (rr, big_t) = (rf.rho[k], rf.theta[k]);
        let u = p.velocity(k);
        let uu = rf.velocity(k);
        let w: Vec<f64> = (0..3).map(|i| uu[i] - u[i]).collect();
        let kappa = cfg.transport.kappa(theta);
        let gt2: f64 = dth[k].iter().map(|v| v * v).sum();

        diss[k] = big_t / theta * (viscous_dissipation(&cfg.transport, nu, theta, &du[k])? + omega * kappa * gt2 / theta);
        damp[k] = lambda * (0..dim).map(|i| u[i] * u[i]).sum::<f64>();

        let gu = &rg.grad_u[k];
        let gth = &rg.grad_theta[k];
        let s = stress_tensor(&cfg.transport, nu, theta, &du[k])?;
        let ds = gas.entropy_density(a, rho, theta)? - rho * gas.entropy(a, rr, big_t)?;
        let div_u_ref = gu[0][0] + gu[1][1] + gu[2][2];
        let (pr_rho, pr_theta) = gas.pressure_partials(a, rr, big_t)?;
        let dt_pref = pr_rho * rates.rho[k] + pr_theta * rates.theta[k];
        let mut du_ref = [0.0; 3];
        for (i, v) in du_ref.iter_mut().enumerate().take(dim) {
            *v = rates.u[i][k];
        }

        let mut convective = 0.0;
        let mut stress = 0.0;
        let mut material = 0.0;
        for i in 0..3 {
            let mut adv_rel = 0.0;
            let mut adv_ref = 0.0;
            for j in 0..3 {
                adv_rel += (u[j] - uu[j]) * gu[i][j];
                adv_ref += uu[j] * gu[i][j];
                stress += s[i][j] * gu[i][j];
            }
            convective += rho * adv_rel * w[i];
            material += rho * (du_ref[i] + adv_ref) * w[i];
        }
        let dot = |x: &[f64], y: &[f64; 3]| (0..3).map(|i| x[i] * y[i]).sum::<f64>();
        terms[0][k] = convective;
        terms[1][k] = stress;
        terms[2][k] = omega * kappa / theta * dot(&dth[k], gth);
        terms[3][k] = lambda * dot(&u, &uu);
        terms[4][k] = ds * dot(&w, gth);
        terms[5][k] = material;
        terms[6][k] = -gas.pressure(a, rho, theta)? * div_u_ref;
        terms[7][k] = -(ds * rates.theta[k] + ds * dot(&uu, gth));
        terms[8][k] = (1.0 - rho / rr) * dt_pref - rho / rr * dot(&u, &rg.grad_p[k]);
    }
    let mut out = [0.0; 9];
    for (o, t) in out.iter_mut().zip(&terms) {
        *o = integrate(t, grid);
    }
    Ok((integrate(&diss, grid), integrate(&damp, grid), out))
}

/// Evaluates `LHS − RHS` of the relative energy inequality at every output
/// instant up to `t_max`, with the reference trio sampled from `reference`.
/// Time integrals use the trapezoid rule on the output instants.
pub fn rel_energy_inequality_residual(
    traj: &Trajectory,
    reference: &EulerTrajectory,
    cfg: &NsfRunConfig,
    t_max: f64,
    mutate: bool,
) -> Result<R1Report> {
    let states: Vec<_> = traj.states.iter().filter(|s| s.time <= t_max * (1.0 + 1e-12)).collect();
    if states.len() < 2 {
        return Err(Error::Usage("the relative energy inequality needs at least two output instants".into()));
    }
    let mut times = Vec::new();
    let mut energy = Vec::new();
    let mut diss = Vec::new();
    let mut damp = Vec::new();
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); 9];
    for s in states {
        let p = s.primitives(&cfg.gas, cfg.scaling.a)?;
        let r = sample_reference(reference, s.time, &cfg.grid)?;
        times.push(s.time);
        energy.push(relative_energy(&p, &r, &cfg.gas, cfg.scaling.a)?);
        let (d, l, t) = r1_integrands(&p, &r, cfg)?;
        diss.push(d);
        damp.push(l);
        for (acc, v) in terms.iter_mut().zip(t) {
            acc.push(v);
        }
    }
    let sign = if mutate { -1.0 } else { 1.0 };
    let diss = cumulative_trapezoid(&times, &diss);
    let damp = cumulative_trapezoid(&times, &damp);
    let terms: Vec<Vec<f64>> = terms.iter().map(|t| cumulative_trapezoid(&times, t)).collect();
    let rows = (0..times.len())
        .map(|k| {
            let mut rhs_terms = [0.0; 9];
            for (i, t) in terms.iter().enumerate() {
                rhs_terms[i] = t[k];
            }
            let lhs = energy[k] - energy[0] + sign * diss[k] + damp[k];
            let rhs = crate::reduce::det_sum(&rhs_terms);
            R1Row { t: times[k], energy: energy[k], dissipation: diss[k], damping: damp[k], rhs_terms, lhs, rhs, residual: lhs - rhs }
        })
        .collect();
    Ok(R1Report { rows, mutated: mutate })
}

/// Two-level refinement verdict for the relative energy inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementVerdict {
    pub excess_coarse: f64,
    pub excess_fine: f64,
    pub defect_coarse: f64,
    pub defect_fine: f64,
    pub pass: bool,
}

/// Passes when the positive excess vanishes or shrinks by `factor`, and the
/// balance defect itself shrinks by `factor`, so the discrete balance closes
/// under refinement.
pub fn refinement_verdict(coarse: &R1Report, fine: &R1Report, factor: f64) -> RefinementVerdict {
    let (ec, ef) = (coarse.excess(), fine.excess());
    let (dc, df) = (coarse.defect(), fine.defect());
    let excess_ok = ef == 0.0 || ef * factor <= ec;
    let defect_ok = df * factor <= dc;
    RefinementVerdict { excess_coarse: ec, excess_fine: ef, defect_coarse: dc, defect_fine: df, pass: excess_ok && defect_ok }
}

/// Velocity snapshots of a run, for [`interpolation_check`].
pub fn velocity_fields(traj: &Trajectory, cfg: &NsfRunConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    Ok(primitives_of(traj, cfg)?.into_iter().map(|p| p.u).collect())
}

/// Smallest pointwise entropy production over all stored states.
pub fn min_entropy_production(traj: &Trajectory, cfg: &NsfRunConfig) -> Result<f64> {
    let mut m = f64::INFINITY;
    for s in &traj.states {
        let (sigma, _) = crate::nsf::entropy_production(s, cfg)?;
        m = m.min(sigma.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(m)
}

/// Sup-norm of the wall-normal velocity ghosts, zero by construction.
pub fn wall_normal_velocity(prim: &Primitives) -> f64 {
    let grid = &prim.grid;
    let mut m: f64 = 0.0;
    for d in 0..grid.dim() {
        let g = fill_ghosts_velocity(&prim.u[d], grid, d, 1);
        let [nx, ny] = grid.cells();
        let (n, n_other) = if d == 0 { (nx, ny) } else { (ny, nx) };
        for o in 0..n_other as isize {
            for (inner, ghost) in [(0isize, -1isize), (n as isize - 1, n as isize)] {
                let at = |c: isize| if d == 0 { g.at(c, o) } else { g.at(o, c) };
                m = m.max((0.5 * (at(inner) + at(ghost))).abs());
            }
        }
    }
    m
}

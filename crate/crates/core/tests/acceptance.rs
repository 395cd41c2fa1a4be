//! Acceptance checks. Each test prints one PASS/FAIL line to stderr.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nsflab::diagnostics::{
    energy_budget_excess, interpolation_check, min_entropy_production, rate_envelope, refinement_verdict,
    rel_energy_inequality_residual,
};
use nsflab::euler::{run_reference, sample_reference, EulerConfig, EulerTrajectory};
use nsflab::grid::{Boundary, Grid};
use nsflab::nsf::{
    entropy_production, simulate, stable_dt, step, total_mass, wall_face_fluxes, Forcing, NsfRunConfig, Trajectory,
};
use nsflab::relative_energy::{
    coercivity_constant, quadratic_bounds_check, relative_energy_density, EssentialResidualWindow, Rect, StatePoint,
};
use nsflab::scenario::InitialData;
use nsflab::state::{FluidState, Primitives, ReferenceFields};
use nsflab::sweep::{load_states, run_dir, run_sweep, Family, RATIO_SPREAD_LIMIT};
use nsflab::thermo::{
    gibbs_residual, gibbs_residual_with, heat_flux, hypothesis_report, log_grid, stress_tensor, Closure, FullClosure,
    GasModel, Hypothesis, ScalingParams, TransportModel,
};
use nsflab::config::RunConfig;

fn report(n: usize, name: &str, pass: bool, start: Instant, detail: &str) {
    let line = format!(
        "{} [{n}] {name} ({:.1} s): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

fn path_point(a: f64) -> ScalingParams {
    ScalingParams::new(a, a.powf(0.55), a.powf(1.2), a.powf(0.1))
}

fn min_sigma(traj: &Trajectory, cfg: &NsfRunConfig) -> f64 {
    min_entropy_production(traj, cfg).unwrap()
}

struct Corrupted<'a>(FullClosure<'a>);

impl Closure for Corrupted<'_> {
    fn p(&self, rho: f64, theta: f64) -> nsflab::Result<f64> {
        self.0.p(rho, theta)
    }
    fn e(&self, rho: f64, theta: f64) -> nsflab::Result<f64> {
        Ok(1.01 * self.0.e(rho, theta)?)
    }
    fn s(&self, rho: f64, theta: f64) -> nsflab::Result<f64> {
        self.0.s(rho, theta)
    }
}

#[test]
fn thermodynamic_consistency() {
    let start = Instant::now();
    let gas = GasModel::ideal();
    let axis = log_grid(0.1, 10.0, 30);
    let mut worst: f64 = 0.0;
    let mut worst_mutated = f64::INFINITY;
    for a in [0.0, 0.5] {
        let mut mutated: f64 = 0.0;
        for &rho in &axis {
            for &theta in &axis {
                worst = worst.max(gibbs_residual(&gas, a, rho, theta).unwrap().max_relative());
                let c = Corrupted(FullClosure { gas: &gas, a });
                mutated = mutated.max(gibbs_residual_with(&c, rho, theta).unwrap().max_relative());
            }
        }
        worst_mutated = worst_mutated.min(mutated);
    }
    let pass = worst <= 1e-7 && worst_mutated > 1e-3 && start.elapsed().as_secs_f64() < 1.0;
    report(1, "thermodynamic consistency", pass, start, &format!("max residual {worst:e} (<= 1e-7), corrupted e {worst_mutated:e} (> 1e-3)"));
}

#[test]
fn hypothesis_pattern() {
    let start = Instant::now();
    let r = hypothesis_report(&GasModel::ideal(), &TransportModel::canonical(), &log_grid(1e-6, 1e6, 61), &log_grid(1e-3, 1e3, 31));
    let h3 = r.get(Hypothesis::H3);
    let ratio_ok = ["ratio_min", "ratio_max"]
        .iter()
        .all(|k| h3.value(k).is_some_and(|v| (v - 2.0 / 3.0).abs() <= 1e-12));
    let expected = [
        (Hypothesis::H2, true),
        (Hypothesis::H3, true),
        (Hypothesis::H6, true),
        (Hypothesis::H7, false),
        (Hypothesis::H8, true),
        (Hypothesis::H9, true),
    ];
    let pattern_ok = expected.iter().all(|&(h, p)| r.passed(h) == p);
    let pass = pattern_ok && ratio_ok && start.elapsed().as_secs_f64() < 1.0;
    let got: Vec<String> = expected.iter().map(|&(h, _)| format!("{h}={}", if r.passed(h) { "pass" } else { "fail" })).collect();
    report(2, "hypothesis certification", pass, start, &format!("{} ratio-to-2/3 ok={ratio_ok}", got.join(" ")));
}

#[test]
fn relative_energy_coercivity() {
    let start = Instant::now();
    let gas = GasModel::ideal();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut self_max: f64 = 0.0;
    for _ in 0..1000 {
        let s = StatePoint::new(rng.random_range(0.1..10.0), rng.random_range(0.1..10.0), [rng.random_range(-1.0..1.0), 0.0, 0.0]);
        for a in [0.0, 0.5] {
            self_max = self_max.max(relative_energy_density(&gas, a, &s, &s).unwrap().abs());
        }
    }
    let k = Rect::new((0.5, 2.0), (0.5, 2.0)).unwrap();
    let c = coercivity_constant(&gas, 1e-2, &k, 10_000, 0).unwrap();

    let grid = Grid::slab(1.0, 64, Boundary::SlipWall).unwrap();
    let rp = Primitives::sample(&grid, |x| (1.0 + 0.1 * (2.0 * PI * x[0]).cos(), [0.0; 2], 1.0 + 0.05 * (2.0 * PI * x[0]).sin()));
    let reference = ReferenceFields::new(rp.clone(), None).unwrap();
    let window = EssentialResidualWindow::around(&rp, 0.1).unwrap();
    let mut smooth = rp.clone();
    let mut vacuum = rp.clone();
    let mut hot = rp.clone();
    for i in 0..64 {
        smooth.rho[i] *= 1.0 + 0.02 * (i as f64).sin();
        smooth.u[0][i] = 0.05 * (i as f64).cos();
        if (20..30).contains(&i) {
            vacuum.rho[i] = 1e-10;
        }
        if (40..44).contains(&i) {
            hot.theta[i] = 50.0;
            hot.rho[i] = 8.0;
        }
    }
    let mut constants = Vec::new();
    for f in [&smooth, &vacuum, &hot] {
        let b = quadratic_bounds_check(f, &reference, &window, &gas, 1e-2).unwrap();
        constants.push((b.c_essential, b.c_residual));
    }
    let finite = constants.iter().all(|(a, b)| a.is_finite() && b.is_finite());
    let pass = self_max <= 1e-14 && c.c > 0.0 && c.samples_used >= 9_000 && finite && start.elapsed().as_secs_f64() < 60.0;
    report(
        3,
        "relative-energy coercivity",
        pass,
        start,
        &format!("max |E(x|x)| {self_max:e}, c(K) {:e} over {} points, bound constants {constants:?}", c.c, c.samples_used),
    );
}

#[test]
fn interpolation_inequality() {
    let start = Instant::now();
    let grid = Grid::rectangle([1.0, 1.0], [24, 24], [Boundary::SlipWall; 2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = grid.n_cells();
    let fields: Vec<Vec<Vec<f64>>> = (0..100)
        .map(|_| (0..2).map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).collect())
        .collect();
    let r = interpolation_check(&fields, &grid);
    let pass = r <= 1.0 + 1e-12 && start.elapsed().as_secs_f64() < 1.0;
    report(4, "discrete interpolation inequality", pass, start, &format!("max ratio {r:.15}"));
}

/// Smooth periodic solution with sources obtained by differencing the exact
/// conservation laws. Sources and comparisons use cell averages over cells
/// of width `cell`.
struct Manufactured {
    gas: GasModel,
    transport: TransportModel,
    s: ScalingParams,
    cell: f64,
}

/// Three-point Gauss average of `f` over `[x - h/2, x + h/2]`.
fn cell_average<const K: usize, F: Fn(f64) -> [f64; K]>(f: F, x: f64, h: f64) -> [f64; K] {
    let g = 0.5 * h * (0.6f64).sqrt();
    let (a, b, c) = (f(x - g), f(x), f(x + g));
    std::array::from_fn(|i| (5.0 * a[i] + 8.0 * b[i] + 5.0 * c[i]) / 18.0)
}

impl Manufactured {
    fn rho(x: f64, t: f64) -> f64 {
        1.0 + 0.1 * (2.0 * PI * x + t).sin()
    }
    fn u(x: f64, t: f64) -> f64 {
        0.1 * (2.0 * PI * x + 2.0 * t).cos()
    }
    fn ux(x: f64, t: f64) -> f64 {
        -0.2 * PI * (2.0 * PI * x + 2.0 * t).sin()
    }
    fn theta(x: f64, t: f64) -> f64 {
        1.0 + 0.1 * (2.0 * PI * x - t).cos()
    }
    fn theta_x(x: f64, t: f64) -> f64 {
        -0.2 * PI * (2.0 * PI * x - t).sin()
    }

    fn conserved(&self, x: f64, t: f64) -> [f64; 3] {
        let (r, u, th) = (Self::rho(x, t), Self::u(x, t), Self::theta(x, t));
        let e = self.gas.internal_energy(self.s.a, r, th).unwrap();
        [r, r * u, r * (0.5 * u * u + e)]
    }

    fn flux(&self, x: f64, t: f64) -> [f64; 3] {
        let (r, u, th) = (Self::rho(x, t), Self::u(x, t), Self::theta(x, t));
        let p = self.gas.pressure(self.s.a, r, th).unwrap();
        let e = self.gas.internal_energy(self.s.a, r, th).unwrap();
        let mut grad = [[0.0; 3]; 3];
        grad[0][0] = Self::ux(x, t);
        let sxx = stress_tensor(&self.transport, self.s.nu, th, &grad).unwrap()[0][0];
        let q = heat_flux(&self.transport, self.s.omega, th, &[Self::theta_x(x, t), 0.0, 0.0]).unwrap()[0];
        let etot = r * (0.5 * u * u + e);
        [r * u, r * u * u + p - sxx, (etot + p) * u - sxx * u + q]
    }
}

/// Sixth-order central difference.
fn d6<F: Fn(f64) -> [f64; 3]>(f: F, z: f64, h: f64) -> [f64; 3] {
    let w = [(1.0, 45.0), (2.0, -9.0), (3.0, 1.0)];
    let mut out = [0.0; 3];
    for (k, c) in w {
        let (p, m) = (f(z + k * h), f(z - k * h));
        for i in 0..3 {
            out[i] += c * (p[i] - m[i]);
        }
    }
    out.map(|v| v / (60.0 * h))
}

impl Manufactured {
    fn point_source(&self, x: f64, t: f64) -> [f64; 4] {
        let h = 1e-3;
        let dt = d6(|s| self.conserved(x, s), t, h);
        let dx = d6(|s| self.flux(s, t), x, h);
        let u = Self::u(x, t);
        let lambda = self.s.lambda;
        [dt[0] + dx[0], dt[1] + dx[1] + lambda * u, 0.0, dt[2] + dx[2] + lambda * u * u]
    }
}

impl Forcing for Manufactured {
    fn source(&self, x: [f64; 2], t: f64) -> [f64; 4] {
        cell_average(|y| self.point_source(y, t), x[0], self.cell)
    }
}

fn mms_errors(n: usize, s: ScalingParams, t_end: f64) -> ([f64; 3], f64) {
    let grid = Grid::slab(1.0, n, Boundary::Periodic).unwrap();
    let h = grid.spacing(0);
    let m = Manufactured { gas: GasModel::ideal(), transport: TransportModel::standard(), s, cell: h };
    let mut cfg = NsfRunConfig::new(grid.clone(), s);
    cfg.t_end = t_end;
    cfg.output_stride = t_end;
    let mut q0 = FluidState::zeros(&grid);
    for (k, x) in grid.centers().into_iter().enumerate() {
        let avg = cell_average(|y| m.conserved(y, 0.0), x[0], h);
        (q0.rho[k], q0.mom[0][k], q0.etot[k]) = (avg[0], avg[1], avg[2]);
    }
    let init = q0.primitives(&cfg.gas, s.a).unwrap();
    let traj = simulate(&cfg, &init, Some(&m)).unwrap();
    assert!(traj.completed(), "{:?}", traj.abort.map(|a| a.error));
    let last = traj.states.last().unwrap();
    let mut err = [0.0; 3];
    for (k, x) in grid.centers().into_iter().enumerate() {
        let exact = cell_average(|y| m.conserved(y, last.time), x[0], h);
        let got = [last.rho[k], last.mom[0][k], last.etot[k]];
        for i in 0..3 {
            err[i] += h * (got[i] - exact[i]).powi(2);
        }
    }
    (err.map(f64::sqrt), min_sigma(&traj, &cfg))
}

fn mass_drift(bc: Boundary) -> f64 {
    let grid = Grid::rectangle([1.0, 1.0], [16, 16], [bc; 2]).unwrap();
    let cfg = NsfRunConfig::new(grid.clone(), path_point(1e-2));
    let p = Primitives::sample(&grid, |x| {
        let (cx, cy) = ((PI * x[0]).cos(), (PI * x[1]).cos());
        (1.0 + 0.2 * cx * cy, [0.1 * (PI * x[0]).sin() * cy, -0.1 * cx * (PI * x[1]).sin()], 1.0 + 0.1 * cx)
    });
    let mut s = FluidState::from_primitives(&p, &cfg.gas, cfg.scaling.a).unwrap();
    let m0 = total_mass(&s);
    for _ in 0..1000 {
        let dt = stable_dt(&s, &cfg).unwrap();
        s = step(&s, dt, &cfg, None).unwrap().0;
    }
    ((total_mass(&s) - m0) / m0).abs()
}

#[test]
fn solver_verification() {
    let start = Instant::now();
    let params = ScalingParams::new(0.1, 0.05, 0.05, 0.5);
    let runs: Vec<([f64; 3], f64)> = [64, 128, 256].iter().map(|&n| mms_errors(n, params, 0.2)).collect();
    // observed order: least-squares slope of log error against log h
    let orders: Vec<f64> = (0..3).map(|i| (runs[0].0[i] / runs[2].0[i]).log2() / 2.0).collect();
    let pairwise: Vec<f64> = runs.windows(2).flat_map(|w| (0..3).map(move |i| (w[0].0[i] / w[1].0[i]).log2())).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let sigma_ok = runs.iter().all(|r| r.1 >= 0.0);

    let drift_periodic = mass_drift(Boundary::Periodic);
    let drift_slip = mass_drift(Boundary::SlipWall);

    let grid = Grid::rectangle([1.0, 1.0], [12, 10], [Boundary::SlipWall; 2]).unwrap();
    let cfg = NsfRunConfig::new(grid.clone(), ScalingParams::new(0.1, 0.05, 0.05, 0.5));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = Primitives::sample(&grid, |_| (rng.random_range(0.5..2.0), [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)], rng.random_range(0.5..2.0)));
    let s = FluidState::from_primitives(&p, &cfg.gas, cfg.scaling.a).unwrap();
    let walls = wall_face_fluxes(&s, &cfg).unwrap();
    let max_mass = walls.iter().map(|w| w.flux.total()[0].abs()).fold(0.0, f64::max);
    let max_heat = walls.iter().map(|w| w.flux.heat.abs()).fold(0.0, f64::max);

    let pass = min_order >= 1.8
        && sigma_ok
        && drift_periodic < 1e-12
        && drift_slip < 1e-12
        && max_mass <= 1e-15
        && max_heat == 0.0
        && !walls.is_empty()
        && start.elapsed().as_secs_f64() < 300.0;
    let errs: Vec<String> = runs.iter().map(|r| format!("{:.3e}/{:.3e}/{:.3e}", r.0[0], r.0[1], r.0[2])).collect();
    report(
        5,
        "solver verification",
        pass,
        start,
        &format!(
            "L2 errors {} fitted orders {orders:.3?} pairwise {pairwise:.3?}; mass drift periodic {drift_periodic:e} slip {drift_slip:e}; wall mass flux {max_mass:e} heat flux {max_heat:e}",
            errs.join(", ")
        ),
    );
}

fn smooth_run(n: usize, stride: f64, t_end: f64) -> (Trajectory, EulerTrajectory, NsfRunConfig) {
    let grid = Grid::slab(1.0, n, Boundary::SlipWall).unwrap();
    let fine = grid.refined(4);
    let d = InitialData::default();
    let reference = run_reference(&EulerConfig::new(fine.clone(), t_end, stride), &d.sample(&fine)).unwrap();
    let mut cfg = NsfRunConfig::new(grid.clone(), path_point(1e-2));
    cfg.t_end = t_end;
    cfg.output_stride = stride;
    let init = sample_reference(&reference, 0.0, &grid).unwrap();
    let traj = simulate(&cfg, &init.fields, None).unwrap();
    assert!(traj.completed());
    (traj, reference, cfg)
}

#[test]
fn entropy_and_energy_structure() {
    let start = Instant::now();
    let mut sigma = f64::INFINITY;
    let mut excess = Vec::new();
    let mut e0 = 0.0;
    for n in [128, 256] {
        let grid = Grid::slab(1.0, n, Boundary::SlipWall).unwrap();
        let mut cfg = NsfRunConfig::new(grid.clone(), path_point(1e-2));
        cfg.t_end = 0.5;
        let traj = simulate(&cfg, &InitialData::default().sample(&grid), None).unwrap();
        assert!(traj.completed());
        for s in &traj.states {
            sigma = sigma.min(entropy_production(s, &cfg).unwrap().0.iter().copied().fold(f64::INFINITY, f64::min));
        }
        e0 = traj.rows[0].etot.abs();
        excess.push(energy_budget_excess(&traj));
    }
    let roundoff = 1e-12 * e0;
    let shrinks = excess[1] <= roundoff || excess[1] * 3.0 <= excess[0];
    let pass = sigma >= 0.0 && shrinks && start.elapsed().as_secs_f64() < 300.0;
    report(
        6,
        "entropy and energy structure",
        pass,
        start,
        &format!("min sigma {sigma:e}; budget excess N=128 {:e} N=256 {:e} (roundoff floor {roundoff:e})", excess[0], excess[1]),
    );
}

#[test]
fn relative_energy_inequality() {
    let start = Instant::now();
    let (t1, r1, c1) = smooth_run(64, 0.05, 0.2);
    let (t2, r2, c2) = smooth_run(128, 0.025, 0.2);
    let coarse = rel_energy_inequality_residual(&t1, &r1, &c1, 0.2, false).unwrap();
    let fine = rel_energy_inequality_residual(&t2, &r2, &c2, 0.2, false).unwrap();
    let v = refinement_verdict(&coarse, &fine, 3.0);
    let mc = rel_energy_inequality_residual(&t1, &r1, &c1, 0.2, true).unwrap();
    let mf = rel_energy_inequality_residual(&t2, &r2, &c2, 0.2, true).unwrap();
    let mv = refinement_verdict(&mc, &mf, 3.0);
    let sigma = min_sigma(&t1, &c1).min(min_sigma(&t2, &c2));
    let pass = v.pass && !mv.pass && sigma >= 0.0 && start.elapsed().as_secs_f64() < 600.0;
    report(
        7,
        "relative energy inequality",
        pass,
        start,
        &format!(
            "excess {:e} -> {:e}, defect {:e} -> {:e}; mutated excess {:e} -> {:e}, defect {:e} -> {:e} (verdict {})",
            v.excess_coarse, v.excess_fine, v.defect_coarse, v.defect_fine, mv.excess_coarse, mv.excess_fine, mv.defect_coarse, mv.defect_fine, mv.pass
        ),
    );
}

fn sweep_sigma(dir: &Path, cfg: &RunConfig, ids: &[String]) -> f64 {
    let mut m = f64::INFINITY;
    for (id, a) in ids.iter().zip(&cfg.sweep.a_values) {
        let mut nsf = cfg.nsf().unwrap();
        nsf.scaling = path_point(*a);
        for s in load_states(&run_dir(dir, id)).unwrap() {
            m = m.min(entropy_production(&s, &nsf).unwrap().0.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    m
}

#[test]
fn rate_envelope_experiment() {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let well = run_sweep(&cfg, Family::WellPrepared, Some(dir.path())).unwrap();
    let ill = run_sweep(&cfg, Family::IllPrepared, Some(dir.path())).unwrap();

    let env: Vec<f64> = cfg.sweep.a_values.iter().map(|&a| rate_envelope(&path_point(a)).unwrap()).collect();
    let env_dec = env.windows(2).all(|w| w[1] < w[0]);
    let healthy = well.points.iter().chain(&ill.points).all(|p| p.usable());
    let e_sup: Vec<f64> = well.points.iter().map(|p| p.e_sup).collect();
    let sup_dec = e_sup.windows(2).all(|w| w[1] < w[0]);
    let ratios: Vec<f64> = well.points.iter().map(|p| p.e_sup / (p.e_init + p.envelope)).collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let bounded = spread < RATIO_SPREAD_LIMIT;
    let ill_ok = ill.points.iter().all(|p| p.e_sup <= 3.0 * p.e_init && p.e_init > 0.0);
    let ids: Vec<String> = well.points.iter().chain(&ill.points).map(|p| p.run_id.clone()).collect();
    let sigma = sweep_sigma(dir.path(), &cfg, &ids[..3]).min(sweep_sigma(dir.path(), &cfg, &ids[3..]));

    let pass = env_dec && healthy && sup_dec && bounded && ill_ok && sigma >= 0.0 && start.elapsed().as_secs_f64() < 1800.0;
    let ill_ratio: Vec<f64> = ill.points.iter().map(|p| p.e_sup / p.e_init).collect();
    report(
        8,
        "rate-envelope experiment",
        pass,
        start,
        &format!(
            "envelope {env:?} decreasing={env_dec}; E_sup {e_sup:?} decreasing={sup_dec}; ratios {ratios:?} spread {spread:.3} (< {RATIO_SPREAD_LIMIT}) ok={bounded}; ill-prepared E_sup/E_init {ill_ratio:.4?} (<= 3) ok={ill_ok}; min sigma {sigma:e}"
        ),
    );
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn invoke(args: &[&str], config: &Path, out: &Path, threads: usize) {
    let status = Command::new(env!("CARGO_BIN_EXE_nsflab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string(), "--seed", "7"])
        .output()
        .unwrap();
    assert!(status.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&status.stderr));
}

#[test]
fn determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "t_end = 0.3\n[grid]\ncells = [64]\n[sweep]\na_values = [1e-2, 1e-3]\n").unwrap();
    let commands: [&[&str]; 4] = [&["thermo-check"], &["simulate"], &["simulate", "--solver", "euler"], &["sweep", "--family", "both"]];
    let mut all_same = true;
    let mut count = 0;
    for (c, args) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for (run, threads) in [1, 4, 4].into_iter().enumerate() {
            let out = dir.path().join(format!("c{c}_r{run}"));
            invoke(args, &config, &out, threads);
            outputs.push(csv_files(&out));
        }
        count += outputs[0].len();
        all_same &= !outputs[0].is_empty() && outputs.windows(2).all(|w| w[0] == w[1]);
    }
    let pass = all_same;
    report(9, "determinism", pass, start, &format!("{count} CSV files identical across 1 and 4 threads and repeated invocations: {all_same}"));
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nsflab::config::RunConfig;
use nsflab::euler::{compatibility_check, formulation_residuals, run_reference_cached};
use nsflab::nsf::simulate;
use nsflab::relative_energy::{coercivity_constant, Rect};
use nsflab::sweep::{diagnose_run, fit_rate, manifest_path, run_sweep, save_states, Family, SweepManifest};
use nsflab::thermo::{gibbs_residual, hypothesis_report, log_grid};
use nsflab::{Error, Result};

#[derive(Parser)]
#[command(name = "nsflab", version, about = "Vanishing-dissipation experiments for the Navier-Stokes-Fourier system")]
struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for sampled quantities.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Nsf,
    Euler,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FamilyArg {
    Well,
    Ill,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Hypothesis report and Gibbs residual grid for the configured gas.
    ThermoCheck,
    /// Coercivity constant of the relative energy on a rectangle.
    Coercivity {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, num_args = 2, default_values_t = [0.5, 2.0])]
        rho: Vec<f64>,
        #[arg(long, num_args = 2, default_values_t = [0.5, 2.0])]
        theta: Vec<f64>,
    },
    /// Single NSF or reference Euler run.
    Simulate {
        #[arg(long, value_enum, default_value = "nsf")]
        solver: Solver,
    },
    /// Parameter sweep along the configured path.
    Sweep {
        #[arg(long, value_enum, default_value = "well")]
        family: FamilyArg,
    },
    /// Rate fit of a stored sweep manifest.
    RateFit {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Recomputes the diagnostics of a stored sweep run.
    Diag {
        #[arg(long)]
        run: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn thermo_check(cfg: &RunConfig, out: &Path) -> Result<()> {
    let gas = cfg.gas()?;
    let report = hypothesis_report(&gas, &cfg.transport()?, &log_grid(1e-6, 1e6, 61), &log_grid(1e-3, 1e3, 31));
    let mut text = report.to_string();
    let mut csv = String::from("a,rho,theta,residual\n");
    let axis = log_grid(0.1, 10.0, 30);
    for a in [0.0, 0.5] {
        let mut worst: f64 = 0.0;
        for &rho in &axis {
            for &theta in &axis {
                let r = gibbs_residual(&gas, a, rho, theta)?.max_relative();
                worst = worst.max(r);
                let _ = writeln!(csv, "{a:?},{rho:?},{theta:?},{r:?}");
            }
        }
        let _ = writeln!(text, "gibbs a={a} max_residual={worst:e}");
    }
    print!("{text}");
    write(out, "thermo_check.txt", &text)?;
    write(out, "gibbs.csv", &csv)
}

fn coercivity(cfg: &RunConfig, out: &Path, seed: u64, samples: usize, rho: &[f64], theta: &[f64]) -> Result<()> {
    let k = Rect::new((rho[0], rho[1]), (theta[0], theta[1]))?;
    let c = coercivity_constant(&cfg.gas()?, cfg.scaling.a, &k, samples, seed)?;
    let text = format!(
        "c = {:?}\nsamples_used = {}\nseed = {seed}\nrho = [{:?}, {:?}]\ntheta = [{:?}, {:?}]\nstate = [{:?}, {:?}, {:?}]\nreference = [{:?}, {:?}]\n",
        c.c, c.samples_used, rho[0], rho[1], theta[0], theta[1], c.state.rho, c.state.theta, c.state.u[0], c.reference.rho, c.reference.theta
    );
    print!("{text}");
    write(out, "coercivity.toml", &text)
}

fn simulate_cmd(cfg: &RunConfig, out: &Path, solver: Solver) -> Result<bool> {
    match solver {
        Solver::Nsf => {
            let nsf = cfg.nsf()?;
            let init = cfg.initial.sample(&nsf.grid);
            let length = nsf.grid.extents()[0];
            let compat = compatibility_check(|x| cfg.initial.velocity(x, length), &init, &nsf.gas)?;
            if !compat.k0_pass {
                return Err(Error::Config(format!("initial velocity violates u.n = 0 at the walls by {:e}", compat.k0_residual)));
            }
            let traj = simulate(&nsf, &init, None)?;
            write(out, "diagnostics.csv", &traj.csv())?;
            save_states(out, &traj.states)?;
            println!("steps = {}\nfloor_hits = {}\nhealthy = {}", traj.steps, traj.floor_hits, traj.healthy);
            if let Some(abort) = &traj.abort {
                abort.dump.to_snapshot().save(&out.join("abort_dump.snap"))?;
                eprintln!("run aborted: {}", abort.error);
                return Ok(false);
            }
            Ok(traj.healthy)
        }
        Solver::Euler => {
            let euler = cfg.euler()?;
            let init = cfg.initial.reference().sample(&euler.grid);
            let length = euler.grid.extents()[0];
            let reference = cfg.initial.reference();
            let compat = compatibility_check(|x| reference.velocity(x, length), &init, &euler.gas)?;
            if !compat.k0_pass {
                return Err(Error::Config(format!("initial velocity violates u.n = 0 at the walls by {:e}", compat.k0_residual)));
            }
            let cache = cfg.reference.cache.as_ref().map(PathBuf::from);
            let traj = run_reference_cached(&euler, &init, cache.as_deref())?;
            save_states(out, &traj.states)?;
            let mut csv = String::from("t,entropy,thermal\n");
            for r in formulation_residuals(&traj) {
                let _ = writeln!(csv, "{:?},{:?},{:?}", r.t, r.entropy, r.thermal);
            }
            write(out, "formulation_residuals.csv", &csv)?;
            let mut text = String::new();
            let _ = writeln!(text, "eps_f = {:?}\nfilter_drain = {:?}\nmass_drift = {:?}\nenergy_drift = {:?}", traj.eps_f, traj.filter_drain, traj.mass_drift, traj.energy_drift);
            let _ = writeln!(text, "k0_residual = {:?}\nk1_residual = {:?}\nk1_pass = {}", compat.k0_residual, compat.k1_residual, compat.k1_pass);
            if let Some((t, msg)) = &traj.failure {
                let _ = writeln!(text, "failure_time = {t:?}\nfailure = {msg:?}");
            }
            text.push_str(&toml::to_string(&traj.lifespan).expect("lifespan serializes"));
            print!("{text}");
            write(out, "lifespan.toml", &text)?;
            Ok(true)
        }
    }
}

fn sweep_cmd(cfg: &RunConfig, out: &Path, family: FamilyArg) -> Result<()> {
    let families: &[Family] = match family {
        FamilyArg::Well => &[Family::WellPrepared],
        FamilyArg::Ill => &[Family::IllPrepared],
        FamilyArg::Both => &[Family::WellPrepared, Family::IllPrepared],
    };
    for &f in families {
        let m = run_sweep(cfg, f, Some(out))?;
        println!("{} t_safe={:e} -> {}", f.label(), m.t_safe, manifest_path(out, f).display());
        for p in &m.points {
            let status = p.excluded.as_deref().unwrap_or(if p.healthy { "ok" } else { "unhealthy" });
            println!("  {} a={:e} E_init={:e} E_sup={:e} envelope={:e} ratio={:e} {status}", p.run_id, p.a, p.e_init, p.e_sup, p.envelope, p.ratio);
        }
    }
    Ok(())
}

fn rate_fit_cmd(manifest: &Path, out: &Path) -> Result<bool> {
    let m = SweepManifest::load(manifest)?;
    let fit = fit_rate(&m.points)?;
    let mut csv = String::from("run_id,a,E_init,envelope,E_sup,ratio\n");
    for p in m.points.iter().filter(|p| p.usable()) {
        let _ = writeln!(csv, "{},{:?},{:?},{:?},{:?},{:?}", p.run_id, p.a, p.e_init, p.envelope, p.e_sup, p.e_sup / (p.e_init + p.envelope));
    }
    print!("{csv}");
    println!("constant = {:e}\nspread = {:e}\nflagged = {}", fit.constant, fit.spread, fit.flagged);
    write(out, "rate_fit.csv", &csv)?;
    Ok(!fit.flagged)
}

fn diag_cmd(run: &Path, out: &Path) -> Result<bool> {
    let (point, re, r1) = diagnose_run(run)?;
    let mut same = true;
    for (name, text) in [("relative_energy.csv", &re), ("r1.csv", &r1)] {
        write(out, name, text)?;
        let stored = std::fs::read_to_string(run.join(name)).ok();
        let verdict = match stored {
            Some(s) if s == *text => "identical to stored",
            Some(_) => {
                same = false;
                "DIFFERS from stored"
            }
            None => "no stored copy",
        };
        println!("{name}: {verdict}");
    }
    println!("E_sup = {:e}\nr1_max_excess = {:e}", point.e_sup, point.r1_max_excess);
    Ok(same)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.as_path();
    match cli.command {
        Command::ThermoCheck => thermo_check(&cfg, out).map(|_| true),
        Command::Coercivity { samples, rho, theta } => coercivity(&cfg, out, cli.seed, samples, &rho, &theta).map(|_| true),
        Command::Simulate { solver } => simulate_cmd(&cfg, out, solver),
        Command::Sweep { family } => sweep_cmd(&cfg, out, family).map(|_| true),
        Command::RateFit { manifest } => rate_fit_cmd(&manifest, out),
        Command::Diag { run } => diag_cmd(&run, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

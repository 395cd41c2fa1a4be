//! Parameter paths, sweep orchestration, manifests and rate fitting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{rate_envelope, rel_energy_inequality_residual, relative_energy_series, uniform_bounds, UniformBounds};
use crate::error::{Error, Result};
use crate::euler::{run_reference_cached, sample_reference, EulerTrajectory};
use crate::grid::Snapshot;
use crate::nsf::{simulate, NsfRunConfig, Trajectory};
use crate::scenario::perturb_velocity;
use crate::state::FluidState;
use crate::thermo::ScalingParams;

/// Largest allowed spread `max ratio / min ratio` along a path.
pub const RATIO_SPREAD_LIMIT: f64 = 10.0;

/// `ν = a^α`, `ω = a^β`, `λ = a^γ` along decreasing `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingPath {
    pub a_values: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ScalingPath {
    pub fn new(a_values: Vec<f64>, alpha: f64, beta: f64, gamma: f64) -> ScalingPath {
        ScalingPath { a_values, alpha, beta, gamma }
    }

    pub fn default_path() -> ScalingPath {
        ScalingPath::new(vec![1e-2, 1e-3, 1e-4], 0.55, 1.2, 0.1)
    }

    pub fn point(&self, a: f64) -> ScalingParams {
        ScalingParams::new(a, a.powf(self.alpha), a.powf(self.beta), a.powf(self.gamma))
    }

    pub fn points(&self) -> Vec<ScalingParams> {
        self.a_values.iter().map(|&a| self.point(a)).collect()
    }

    /// Exponent constraints plus the numerical limit checks along `a_values`.
    pub fn violations(&self) -> Vec<String> {
        let mut v = validate_path(self.alpha, self.beta, self.gamma);
        if self.a_values.is_empty() {
            v.push("a_values is empty".into());
        }
        if self.a_values.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            v.push("a_values must lie in (0, 1)".into());
        }
        if self.a_values.windows(2).any(|w| !(w[1] < w[0])) {
            v.push("a_values must be strictly decreasing".into());
        }
        if v.is_empty() {
            let pts = self.points();
            let limits: [(&str, fn(&ScalingParams) -> f64); 3] = [
                ("omega/a", |s| s.omega / s.a),
                ("nu/sqrt(a)", |s| s.nu / s.a.sqrt()),
                ("a/sqrt(nu^3 lambda)", |s| s.a / (s.nu.powi(3) * s.lambda).sqrt()),
            ];
            for (name, f) in limits {
                if pts.windows(2).any(|w| !(f(&w[1]) < f(&w[0]))) {
                    v.push(format!("{name} does not decrease along a_values"));
                }
            }
        }
        v
    }
}

/// Checks `β > 1`, `1/2 < α < 2/3` and `0 < γ < 1 − 3α/2`.
pub fn validate_path(alpha: f64, beta: f64, gamma: f64) -> Vec<String> {
    let mut v = Vec::new();
    if !(beta > 1.0) {
        v.push(format!("beta = {beta} must exceed 1"));
    }
    if !(alpha > 0.5 && alpha < 2.0 / 3.0) {
        v.push(format!("alpha = {alpha} must lie in (1/2, 2/3)"));
    }
    if !(gamma > 0.0 && gamma < 1.0 - 1.5 * alpha) {
        v.push(format!("gamma = {gamma} must lie in (0, 1 - 3 alpha/2) = (0, {})", 1.0 - 1.5 * alpha));
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// NSF data equal to the restricted reference data.
    WellPrepared,
    /// NSF velocity offset from the reference by `δ sin(πx/L)`.
    IllPrepared,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::WellPrepared => "well",
            Family::IllPrepared => "ill",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub run_id: String,
    pub a: f64,
    pub scaling: ScalingParams,
    pub healthy: bool,
    pub steps: usize,
    pub floor_hits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
    pub e_init: f64,
    pub e_sup: f64,
    pub envelope: f64,
    /// `E_sup / (E_init + envelope)`.
    pub ratio: f64,
    pub r1_max_excess: f64,
    pub bounds: UniformBounds,
}

impl SweepPoint {
    pub fn usable(&self) -> bool {
        self.healthy && self.excluded.is_none() && self.e_sup.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub family: Family,
    pub path: ScalingPath,
    pub config_hash: String,
    pub grid_hash: String,
    pub reference_key: String,
    pub delta: f64,
    pub t_safe: f64,
    pub points: Vec<SweepPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
}

impl SweepManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn parse(text: &str) -> Result<SweepManifest> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SweepManifest> {
        SweepManifest::parse(&std::fs::read_to_string(path)?)
    }

    /// Whitespace-separated plot data with a comment header.
    pub fn plot_data(&self) -> String {
        let mut s = String::from("# a envelope E_sup E_sup/envelope\n");
        for p in self.points.iter().filter(|p| p.usable()) {
            let _ = writeln!(s, "{:e} {:e} {:e} {:e}", p.a, p.envelope, p.e_sup, p.e_sup / p.envelope);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFit {
    /// Largest ratio over the usable points.
    pub constant: f64,
    pub ratios: Vec<f64>,
    /// `max/min` of the ratios.
    pub spread: f64,
    /// Set when the ratios spread by more than [`RATIO_SPREAD_LIMIT`].
    pub flagged: bool,
    pub used: usize,
}

/// Fits `E_sup ≤ C (E_init + envelope)` over the usable points.
pub fn fit_rate(points: &[SweepPoint]) -> Result<RateFit> {
    let ratios: Vec<f64> = points.iter().filter(|p| p.usable()).map(|p| p.e_sup / (p.e_init + p.envelope)).collect();
    if ratios.len() < 2 {
        return Err(Error::Usage(format!("rate fit needs at least two healthy runs, got {}", ratios.len())));
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 1.0 } else { max / min };
    Ok(RateFit { constant: max, used: ratios.len(), flagged: !(spread <= RATIO_SPREAD_LIMIT), spread, ratios })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_text(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

/// Everything a sweep point produces besides its manifest entry.
pub struct PointOutput {
    pub point: SweepPoint,
    pub trajectory: Trajectory,
    pub relative_energy_csv: String,
    pub r1_csv: String,
}

/// Diagnostics of one NSF run against the reference up to `t_safe`.
pub fn evaluate_run(
    traj: &Trajectory,
    reference: &EulerTrajectory,
    cfg: &NsfRunConfig,
    t_safe: f64,
) -> Result<(SweepPoint, String, String)> {
    let envelope = rate_envelope(&cfg.scaling)?;
    let series = relative_energy_series(traj, reference, cfg, t_safe, envelope)?;
    let r1 = rel_energy_inequality_residual(traj, reference, cfg, t_safe, false)?;
    let bounds = uniform_bounds(traj, cfg)?;
    let e_init = series.initial();
    let point = SweepPoint {
        run_id: String::new(),
        a: cfg.scaling.a,
        scaling: cfg.scaling,
        healthy: traj.healthy,
        steps: traj.steps,
        floor_hits: traj.floor_hits,
        excluded: None,
        e_init,
        e_sup: series.sup_value,
        envelope,
        ratio: series.sup_value / (e_init + envelope),
        r1_max_excess: r1.excess(),
        bounds,
    };
    Ok((point, series.csv(), r1.csv()))
}

fn run_point(cfg: &RunConfig, reference: &EulerTrajectory, family: Family, index: usize, a: f64, t_safe: f64) -> Result<PointOutput> {
    let path = sweep_path(cfg);
    let mut nsf = cfg.nsf()?;
    nsf.scaling = path.point(a);
    nsf.t_end = t_safe;
    let mut init = sample_reference(reference, 0.0, &nsf.grid)?.fields;
    if family == Family::IllPrepared {
        init = perturb_velocity(&init, cfg.sweep.delta);
    }
    let run_id = format!("{}-{index:02}", family.label());
    let traj = simulate(&nsf, &init, None)?;
    let excluded = match (&traj.abort, traj.healthy) {
        (Some(a), _) => Some(format!("aborted: {}", a.error)),
        (None, false) => Some("floor activations exceeded the health limit".to_string()),
        _ => None,
    };
    let (mut point, re_csv, r1_csv) = match &excluded {
        None => evaluate_run(&traj, reference, &nsf, t_safe)?,
        Some(_) => {
            let envelope = rate_envelope(&nsf.scaling)?;
            let nan = f64::NAN;
            let bounds = UniformBounds { kinetic: nan, rho_53: nan, rho_theta: nan, radiation: nan, viscous: nan, damping: nan, thermal: nan };
            let p = SweepPoint {
                run_id: String::new(),
                a,
                scaling: nsf.scaling,
                healthy: false,
                steps: traj.steps,
                floor_hits: traj.floor_hits,
                excluded: None,
                e_init: nan,
                e_sup: nan,
                envelope,
                ratio: nan,
                r1_max_excess: nan,
                bounds,
            };
            (p, String::new(), String::new())
        }
    };
    point.run_id = run_id;
    point.excluded = excluded;
    Ok(PointOutput { point, trajectory: traj, relative_energy_csv: re_csv, r1_csv })
}

pub fn sweep_path(cfg: &RunConfig) -> ScalingPath {
    ScalingPath::new(cfg.sweep.a_values.clone(), cfg.sweep.alpha, cfg.sweep.beta, cfg.sweep.gamma)
}

/// Reference run for a configuration, cached under `reference.cache` when set.
pub fn reference_for(cfg: &RunConfig) -> Result<EulerTrajectory> {
    let euler = cfg.euler()?;
    let init = cfg.initial.reference().sample(&euler.grid);
    let cache = cfg.reference.cache.as_ref().map(PathBuf::from);
    run_reference_cached(&euler, &init, cache.as_deref())
}

/// Runs one experiment family along the configured path. Points run in
/// parallel on the current rayon pool; results are ordered by path index.
/// When `out` is given, per-run CSVs, snapshots, the manifest and plot data
/// are written there.
pub fn run_sweep(cfg: &RunConfig, family: Family, out: Option<&Path>) -> Result<SweepManifest> {
    let path = sweep_path(cfg);
    let violations = path.violations();
    if !violations.is_empty() {
        return Err(Error::Config(format!("invalid scaling path: {}", violations.join("; "))));
    }
    let reference = reference_for(cfg)?;
    let t_safe = reference.lifespan.t_safe.min(cfg.t_end);
    let euler = cfg.euler()?;
    let reference_key = crate::euler::cache_key(&euler, &cfg.initial.reference().sample(&euler.grid));

    let outputs: Vec<PointOutput> = path
        .a_values
        .par_iter()
        .enumerate()
        .map(|(i, &a)| run_point(cfg, &reference, family, i, a, t_safe))
        .collect::<Result<_>>()?;

    let points: Vec<SweepPoint> = outputs.iter().map(|o| o.point.clone()).collect();
    let manifest = SweepManifest {
        family,
        path,
        config_hash: hash_text(&cfg.to_toml()),
        grid_hash: hash_text(&cfg.grid.build()?.fingerprint()),
        reference_key,
        delta: if family == Family::IllPrepared { cfg.sweep.delta } else { 0.0 },
        t_safe,
        fit: fit_rate(&points).ok(),
        points,
    };
    if let Some(dir) = out {
        write_sweep(dir, cfg, &manifest, &outputs)?;
    }
    Ok(manifest)
}

pub fn manifest_path(dir: &Path, family: Family) -> PathBuf {
    dir.join(format!("manifest_{}.toml", family.label()))
}

pub fn run_dir(dir: &Path, run_id: &str) -> PathBuf {
    dir.join("runs").join(run_id)
}

fn write_sweep(dir: &Path, cfg: &RunConfig, manifest: &SweepManifest, outputs: &[PointOutput]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    for o in outputs {
        let rd = run_dir(dir, &o.point.run_id);
        std::fs::create_dir_all(&rd)?;
        std::fs::write(rd.join("diagnostics.csv"), o.trajectory.csv())?;
        if o.point.excluded.is_none() {
            std::fs::write(rd.join("relative_energy.csv"), &o.relative_energy_csv)?;
            std::fs::write(rd.join("r1.csv"), &o.r1_csv)?;
        }
        save_states(&rd, &o.trajectory.states)?;
        if let Some(abort) = &o.trajectory.abort {
            abort.dump.to_snapshot().save(&rd.join("abort_dump.snap"))?;
        }
        let record = RunRecord {
            run_id: o.point.run_id.clone(),
            family: manifest.family,
            t_safe: manifest.t_safe,
            scaling: o.point.scaling,
            config: cfg.clone(),
        };
        std::fs::write(rd.join("run.toml"), toml::to_string(&record).expect("run record serializes"))?;
    }
    manifest.save(&manifest_path(dir, manifest.family))?;
    std::fs::write(dir.join(format!("plot_{}.dat", manifest.family.label())), manifest.plot_data())?;
    Ok(())
}

/// Inputs needed to re-derive a stored run's diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub run_id: String,
    pub family: Family,
    pub t_safe: f64,
    pub scaling: ScalingParams,
    pub config: RunConfig,
}

/// Recomputes the relative energy and inequality CSVs of a stored sweep run
/// from its snapshots.
pub fn diagnose_run(dir: &Path) -> Result<(SweepPoint, String, String)> {
    let text = std::fs::read_to_string(dir.join("run.toml"))?;
    let record: RunRecord = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut nsf = record.config.nsf()?;
    nsf.scaling = record.scaling;
    nsf.t_end = record.t_safe;
    let states = load_states(dir)?;
    let first = states[0].primitives(&nsf.gas, nsf.scaling.a)?;
    let traj = Trajectory {
        bounds: crate::nsf::DataBounds::from_initial(&first)?,
        states,
        rows: Vec::new(),
        steps: 0,
        floor_hits: 0,
        healthy: true,
        abort: None,
    };
    let reference = reference_for(&record.config)?;
    let (mut point, re, r1) = evaluate_run(&traj, &reference, &nsf, record.t_safe)?;
    point.run_id = record.run_id;
    Ok((point, re, r1))
}

pub fn save_states(dir: &Path, states: &[FluidState]) -> Result<()> {
    let sd = dir.join("snapshots");
    std::fs::create_dir_all(&sd)?;
    for (k, s) in states.iter().enumerate() {
        s.to_snapshot().save(&sd.join(format!("state_{k:04}.snap")))?;
    }
    Ok(())
}

pub fn load_states(dir: &Path) -> Result<Vec<FluidState>> {
    let sd = dir.join("snapshots");
    let mut out = Vec::new();
    for k in 0.. {
        let p = sd.join(format!("state_{k:04}.snap"));
        if !p.exists() {
            break;
        }
        out.push(FluidState::from_snapshot(&Snapshot::load(&p)?)?);
    }
    if out.is_empty() {
        return Err(Error::Usage(format!("no snapshots under {}", sd.display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(envelopes: &[f64], e_sup: impl Fn(f64) -> f64) -> Vec<SweepPoint> {
        let nan = f64::NAN;
        envelopes
            .iter()
            .enumerate()
            .map(|(i, &env)| SweepPoint {
                run_id: format!("s{i}"),
                a: env,
                scaling: ScalingParams::new(env, env, env, env),
                healthy: true,
                steps: 1,
                floor_hits: 0,
                excluded: None,
                e_init: 0.0,
                e_sup: e_sup(env),
                envelope: env,
                ratio: e_sup(env) / env,
                r1_max_excess: 0.0,
                bounds: UniformBounds { kinetic: nan, rho_53: nan, rho_theta: nan, radiation: nan, viscous: nan, damping: nan, thermal: nan },
            })
            .collect()
    }

    #[test]
    fn path_examples() {
        assert!(validate_path(0.55, 1.2, 0.1).is_empty());
        assert_eq!(validate_path(0.7, 1.2, 0.1).len(), 2);
        assert_eq!(validate_path(0.55, 0.9, 0.1).len(), 1);
        assert!(ScalingPath::default_path().violations().is_empty());
        assert!(!ScalingPath::new(vec![1e-3, 1e-2], 0.55, 1.2, 0.1).violations().is_empty());
    }

    proptest! {
        #[test]
        fn path_region_matches_inequalities(alpha in 0.0f64..1.0, beta in 0.0f64..2.0, gamma in -0.5f64..1.0) {
            let inside = beta > 1.0 && alpha > 0.5 && alpha < 2.0 / 3.0 && gamma > 0.0 && gamma < 1.0 - 1.5 * alpha;
            prop_assert_eq!(validate_path(alpha, beta, gamma).is_empty(), inside);
        }
    }

    #[test]
    fn fit_examples() {
        let zero = fit_rate(&synthetic(&[1e-1, 1e-2], |_| 0.0)).unwrap();
        assert_eq!(zero.ratios, vec![0.0, 0.0]);
        assert!(!zero.flagged);
        let two = fit_rate(&synthetic(&[1e-1, 1e-2, 1e-3], |e| 2.0 * e)).unwrap();
        assert!((two.constant - 2.0).abs() < 1e-15 && !two.flagged);
        let root = fit_rate(&synthetic(&[1e-1, 1e-3, 1e-5], f64::sqrt)).unwrap();
        assert!(root.flagged);
        assert!(matches!(fit_rate(&synthetic(&[1e-1], |e| e)), Err(Error::Usage(_))));
    }

    #[test]
    fn manifest_round_trip() {
        let points = synthetic(&[1e-1, 1e-2], |e| 3.0 * e);
        let m = SweepManifest {
            family: Family::WellPrepared,
            path: ScalingPath::default_path(),
            config_hash: hash_text("x"),
            grid_hash: hash_text("y"),
            reference_key: "k".into(),
            delta: 0.0,
            t_safe: 0.5,
            fit: fit_rate(&points).ok(),
            points,
        };
        let back = SweepManifest::parse(&m.to_toml()).unwrap();
        assert_eq!(back.to_toml(), m.to_toml());
        assert_eq!(fit_rate(&back.points).unwrap().ratios, m.fit.unwrap().ratios);
    }
}

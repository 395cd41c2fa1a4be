//! Conservative fluid states, their primitive views, and reference trios.

use crate::error::{Error, Result};
use crate::grid::{restrict, Grid, Snapshot};
use crate::reduce::det_min;
use crate::thermo::GasModel;

const NEWTON_RTOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

/// Inverts `ρe(ρ, θ) = etot − |m|²/(2ρ)` for `θ` by safeguarded Newton.
///
/// The energy density is strictly increasing in `θ`, so a bracket can always
/// be grown around the root and bisection takes over whenever a Newton step
/// leaves it.
pub fn recover_temperature(gas: &GasModel, a: f64, rho: f64, mom: &[f64], etot: f64) -> Result<f64> {
    let fail = |what: String| Error::Positivity { cell: 0, time: f64::NAN, what };
    if !(rho > 0.0) {
        return Err(fail(format!("density {rho} is not positive")));
    }
    let kinetic = 0.5 * mom.iter().map(|m| m * m).sum::<f64>() / rho;
    let target = etot - kinetic;
    if !(target > 0.0) || !target.is_finite() {
        return Err(fail(format!("internal energy density {target} is not positive")));
    }
    if gas.is_ideal() && a == 0.0 {
        return Ok(target / (1.5 * rho));
    }
    let f = |t: f64| -> Result<f64> { Ok(gas.energy_density(a, rho, t)? - target) };
    let df = |t: f64| gas.energy_density_dtheta(a, rho, t);

    let mut guess = target / (1.5 * rho);
    if a > 0.0 {
        guess = guess.min((target / a).powf(0.25));
    }
    let (mut lo, mut hi) = (guess, guess);
    while f(lo)? > 0.0 {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(fail("temperature bracket collapsed".into()));
        }
    }
    while f(hi)? < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(fail("temperature bracket diverged".into()));
        }
    }
    let mut t = guess.clamp(lo, hi);
    for _ in 0..NEWTON_MAX_ITER {
        let v = f(t)?;
        if v == 0.0 {
            return Ok(t);
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - v / df(t)?;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= NEWTON_RTOL * 1e-2 * next || hi - lo <= NEWTON_RTOL * 1e-2 * hi {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// Cell averages of `(ρ, ρu, E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub grid: Grid,
    pub rho: Vec<f64>,
    /// One momentum component per grid axis.
    pub mom: Vec<Vec<f64>>,
    pub etot: Vec<f64>,
    pub time: f64,
}

/// Pointwise primitive view `(ρ, u, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitives {
    pub grid: Grid,
    pub rho: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub time: f64,
}

impl FluidState {
    pub fn zeros(grid: &Grid) -> FluidState {
        let n = grid.n_cells();
        FluidState {
            grid: grid.clone(),
            rho: vec![0.0; n],
            mom: vec![vec![0.0; n]; grid.dim()],
            etot: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn from_primitives(p: &Primitives, gas: &GasModel, a: f64) -> Result<FluidState> {
        let n = p.grid.n_cells();
        let mut s = FluidState::zeros(&p.grid);
        s.time = p.time;
        for k in 0..n {
            let rho = p.rho[k];
            let mut ke = 0.0;
            for d in 0..p.grid.dim() {
                s.mom[d][k] = rho * p.u[d][k];
                ke += 0.5 * rho * p.u[d][k] * p.u[d][k];
            }
            s.rho[k] = rho;
            s.etot[k] = ke + gas.energy_density(a, rho, p.theta[k])?;
        }
        Ok(s)
    }

    pub fn primitives(&self, gas: &GasModel, a: f64) -> Result<Primitives> {
        let n = self.grid.n_cells();
        let dim = self.grid.dim();
        let mut u = vec![vec![0.0; n]; dim];
        let mut theta = vec![0.0; n];
        let mut m = [0.0; 2];
        for k in 0..n {
            for d in 0..dim {
                m[d] = self.mom[d][k];
                u[d][k] = m[d] / self.rho[k];
            }
            theta[k] = recover_temperature(gas, a, self.rho[k], &m[..dim], self.etot[k]).map_err(|e| match e {
                Error::Positivity { what, .. } => Error::Positivity { cell: k, time: self.time, what },
                other => other,
            })?;
        }
        Ok(Primitives { grid: self.grid.clone(), rho: self.rho.clone(), u, theta, time: self.time })
    }

    /// `self + c · other`, componentwise.
    pub fn axpy(&self, c: f64, other: &FluidState) -> FluidState {
        let add = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a + c * b).collect::<Vec<f64>>();
        FluidState {
            grid: self.grid.clone(),
            rho: add(&self.rho, &other.rho),
            mom: self.mom.iter().zip(&other.mom).map(|(x, y)| add(x, y)).collect(),
            etot: add(&self.etot, &other.etot),
            time: self.time,
        }
    }

    /// `α · self + β · other`, componentwise.
    pub fn combine(alpha: f64, x: &FluidState, beta: f64, y: &FluidState) -> FluidState {
        let lin = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| alpha * a + beta * b).collect::<Vec<f64>>();
        FluidState {
            grid: x.grid.clone(),
            rho: lin(&x.rho, &y.rho),
            mom: x.mom.iter().zip(&y.mom).map(|(p, q)| lin(p, q)).collect(),
            etot: lin(&x.etot, &y.etot),
            time: x.time,
        }
    }

    /// Conservative averaging onto `coarse`, `factor` fine cells per coarse cell and axis.
    pub fn restrict_to(&self, coarse: &Grid, factor: usize) -> Result<FluidState> {
        Ok(FluidState {
            grid: coarse.clone(),
            rho: restrict(&self.rho, coarse, factor)?,
            mom: self.mom.iter().map(|m| restrict(m, coarse, factor)).collect::<Result<_>>()?,
            etot: restrict(&self.etot, coarse, factor)?,
            time: self.time,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().chain(self.etot.iter()).chain(self.mom.iter().flatten()).all(|v| v.is_finite())
    }

    pub fn to_snapshot(&self) -> Snapshot {
        let mut fields = vec![("rho".to_string(), self.rho.clone())];
        for (d, m) in self.mom.iter().enumerate() {
            fields.push((format!("mom{d}"), m.clone()));
        }
        fields.push(("etot".to_string(), self.etot.clone()));
        Snapshot { grid: self.grid.clone(), time: self.time, fields }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<FluidState> {
        let get = |name: &str| {
            s.field(name)
                .map(|v| v.to_vec())
                .ok_or_else(|| Error::Parse(format!("snapshot lacks field `{name}`")))
        };
        Ok(FluidState {
            grid: s.grid.clone(),
            rho: get("rho")?,
            mom: (0..s.grid.dim()).map(|d| get(&format!("mom{d}"))).collect::<Result<_>>()?,
            etot: get("etot")?,
            time: s.time,
        })
    }
}

impl Primitives {
    pub fn uniform(grid: &Grid, rho: f64, u: &[f64], theta: f64) -> Primitives {
        let n = grid.n_cells();
        Primitives {
            grid: grid.clone(),
            rho: vec![rho; n],
            u: (0..grid.dim()).map(|d| vec![u.get(d).copied().unwrap_or(0.0); n]).collect(),
            theta: vec![theta; n],
            time: 0.0,
        }
    }

    /// Samples `f(x) = (ρ, u, θ)` at cell centers.
    pub fn sample<F: FnMut([f64; 2]) -> (f64, [f64; 2], f64)>(grid: &Grid, mut f: F) -> Primitives {
        let n = grid.n_cells();
        let dim = grid.dim();
        let mut p = Primitives::uniform(grid, 0.0, &[0.0, 0.0], 0.0);
        for (k, x) in grid.centers().into_iter().enumerate().take(n) {
            let (rho, u, theta) = f(x);
            p.rho[k] = rho;
            p.theta[k] = theta;
            for d in 0..dim {
                p.u[d][k] = u[d];
            }
        }
        p
    }

    /// Velocity at cell `k` padded to three components.
    pub fn velocity(&self, k: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (d, c) in self.u.iter().enumerate() {
            v[d] = c[k];
        }
        v
    }

    pub fn min_rho(&self) -> f64 {
        det_min(&self.rho)
    }

    pub fn min_theta(&self) -> f64 {
        det_min(&self.theta)
    }
}

/// Time derivatives of a reference trio, needed by the relative energy inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRates {
    pub rho: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

/// The smooth comparison trio `(r, Θ, U)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFields {
    pub fields: Primitives,
    pub rates: Option<ReferenceRates>,
}

impl ReferenceFields {
    pub fn new(fields: Primitives, rates: Option<ReferenceRates>) -> Result<ReferenceFields> {
        if !(fields.min_rho() > 0.0) || !(fields.min_theta() > 0.0) {
            return Err(Error::Domain(format!(
                "reference fields must be strictly positive (min ρ = {}, min θ = {})",
                fields.min_rho(),
                fields.min_theta()
            )));
        }
        Ok(ReferenceFields { fields, rates })
    }

    pub fn grid(&self) -> &Grid {
        &self.fields.grid
    }

    pub fn time(&self) -> f64 {
        self.fields.time
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recover_ideal_examples() {
        let g = GasModel::ideal();
        assert_eq!(recover_temperature(&g, 0.0, 1.0, &[0.0], 1.5).unwrap(), 1.0);
        let t = recover_temperature(&g, 1.0, 1.0, &[0.0], 2.5).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recover_rejects_negative_internal_energy() {
        let g = GasModel::ideal();
        assert!(matches!(
            recover_temperature(&g, 0.0, 1.0, &[2.0], 1.0),
            Err(Error::Positivity { .. })
        ));
        assert!(recover_temperature(&g, 0.0, 0.0, &[0.0], 1.0).is_err());
    }

    #[test]
    fn recover_round_trip_random_states() {
        let gases = [GasModel::ideal(), GasModel::from_expression("rational", "Z + Z^2/(1+Z)").unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for gas in &gases {
            for _ in 0..500 {
                let rho = rng.random_range(0.05..20.0);
                let theta = rng.random_range(0.05..20.0);
                let u = rng.random_range(-3.0..3.0);
                let a = [0.0, 1e-3, 0.5][rng.random_range(0..3)];
                let etot = 0.5 * rho * u * u + gas.energy_density(a, rho, theta).unwrap();
                let back = recover_temperature(gas, a, rho, &[rho * u], etot).unwrap();
                assert!((back - theta).abs() <= 1e-11 * theta, "{} vs {theta}", back);
            }
        }
    }

    #[test]
    fn primitive_round_trip_and_positivity_cell() {
        let grid = Grid::slab(1.0, 8, Boundary::Periodic).unwrap();
        let gas = GasModel::ideal();
        let p = Primitives::sample(&grid, |x| (1.0 + 0.1 * x[0], [0.2, 0.0], 2.0 - x[0]));
        let s = FluidState::from_primitives(&p, &gas, 0.1).unwrap();
        let q = s.primitives(&gas, 0.1).unwrap();
        for k in 0..8 {
            assert!((q.theta[k] - p.theta[k]).abs() < 1e-12);
            assert!((q.u[0][k] - 0.2).abs() < 1e-15);
        }
        let mut bad = s.clone();
        bad.etot[5] = 0.0;
        assert!(matches!(bad.primitives(&gas, 0.1), Err(Error::Positivity { cell: 5, .. })));
    }

    #[test]
    fn reference_requires_positive_fields() {
        let grid = Grid::slab(1.0, 8, Boundary::Periodic).unwrap();
        assert!(ReferenceFields::new(Primitives::uniform(&grid, 1.0, &[0.0], 1.0), None).is_ok());
        assert!(ReferenceFields::new(Primitives::uniform(&grid, 0.0, &[0.0], 1.0), None).is_err());
    }
}

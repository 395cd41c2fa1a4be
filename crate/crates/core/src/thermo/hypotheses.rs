//! Sampled certification of the structural hypotheses on the closures.

use std::fmt;

use super::{GasModel, TransportModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// `P(0) = 0`, `P' > 0` on `[0, ∞)`.
    H2,
    /// `0 < ((5/3)P − P'Z)/Z < c`.
    H3,
    /// `P(Z)/Z^{5/3} → P_∞ > 0`, the asymptotic half of H3.
    H3Limit,
    /// `S' < 0`.
    H6,
    /// `S(Z) → 0` as `Z → ∞`.
    H7,
    /// Viscosity growth envelope.
    H8,
    /// Conductivity growth envelope.
    H9,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H3Limit => "H3-limit",
            Hypothesis::H6 => "H6",
            Hypothesis::H7 => "H7",
            Hypothesis::H8 => "H8",
            Hypothesis::H9 => "H9",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisEntry {
    pub id: Hypothesis,
    pub passed: bool,
    /// Sample point where the check failed or was tightest.
    pub witness: Option<f64>,
    /// Named numbers backing the verdict (fitted constants, ranges).
    pub values: Vec<(String, f64)>,
    pub detail: String,
}

impl HypothesisEntry {
    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn get(&self, id: Hypothesis) -> &HypothesisEntry {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .expect("every hypothesis is reported")
    }

    pub fn passed(&self, id: Hypothesis) -> bool {
        self.get(id).passed
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            write!(f, "{:<9} {}", e.id.to_string(), if e.passed { "PASS" } else { "FAIL" })?;
            if let Some(w) = e.witness {
                write!(f, "  witness={w:e}")?;
            }
            for (k, v) in &e.values {
                write!(f, "  {k}={v:e}")?;
            }
            if !e.detail.is_empty() {
                write!(f, "  ({})", e.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

const REL_SLACK: f64 = 1e-12;
const H7_TOL: f64 = 1e-3;

fn entry(id: Hypothesis, passed: bool, witness: Option<f64>, values: Vec<(&str, f64)>, detail: impl Into<String>) -> HypothesisEntry {
    HypothesisEntry {
        id,
        passed,
        witness,
        values: values.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        detail: detail.into(),
    }
}

/// `n ≥ 2` logarithmically spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// Evaluates every hypothesis on the supplied samples. Never fails: problems
/// are reported as failed entries.
pub fn hypothesis_report(gas: &GasModel, transport: &TransportModel, z_grid: &[f64], theta_grid: &[f64]) -> HypothesisReport {
    let mut zs: Vec<f64> = z_grid.iter().copied().filter(|z| *z > 0.0 && z.is_finite()).collect();
    zs.sort_by(f64::total_cmp);
    let mut ts: Vec<f64> = theta_grid.iter().copied().filter(|t| *t >= 0.0 && t.is_finite()).collect();
    ts.sort_by(f64::total_cmp);

    let entries = if zs.is_empty() || ts.is_empty() {
        [Hypothesis::H2, Hypothesis::H3, Hypothesis::H3Limit, Hypothesis::H6, Hypothesis::H7, Hypothesis::H8, Hypothesis::H9]
            .into_iter()
            .map(|id| entry(id, false, None, vec![], "empty sample grid"))
            .collect()
    } else {
        vec![
            check_h2(gas, &zs),
            check_h3(gas, &zs),
            check_h3_limit(gas, &zs),
            check_h6(gas, &zs),
            check_h7(gas, &zs),
            check_h8(transport, &ts),
            check_h9(transport, &ts),
        ]
    };
    HypothesisReport { entries }
}

fn check_h2(gas: &GasModel, zs: &[f64]) -> HypothesisEntry {
    let p0 = gas.profile(0.0);
    let dp0 = gas.profile_derivative(0.0);
    if !(p0.abs() <= 1e-14) {
        return entry(Hypothesis::H2, false, Some(0.0), vec![("P(0)", p0)], "P(0) != 0");
    }
    if !(dp0 > 0.0) {
        // P' must stay positive down to Z = 0; flag the sample nearest zero
        return entry(
            Hypothesis::H2,
            false,
            Some(zs[0]),
            vec![("P'(0)", dp0), ("P'(Zmin)", gas.profile_derivative(zs[0]))],
            "P'(0) <= 0, positivity lost at the low end of the grid",
        );
    }
    for &z in zs {
        let d = gas.profile_derivative(z);
        if !(d > 0.0) {
            return entry(Hypothesis::H2, false, Some(z), vec![("P'", d)], "P' <= 0");
        }
    }
    entry(Hypothesis::H2, true, None, vec![("P'(0)", dp0)], "")
}

fn h3_ratio(gas: &GasModel, z: f64) -> f64 {
    (5.0 / 3.0 * gas.profile(z) - gas.profile_derivative(z) * z) / z
}

fn check_h3(gas: &GasModel, zs: &[f64]) -> HypothesisEntry {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &z in zs {
        let r = h3_ratio(gas, z);
        if !(r > 0.0) || !r.is_finite() {
            return entry(Hypothesis::H3, false, Some(z), vec![("ratio", r)], "ratio not in (0, c)");
        }
        lo = lo.min(r);
        hi = hi.max(r);
    }
    entry(Hypothesis::H3, true, None, vec![("ratio_min", lo), ("ratio_max", hi), ("c", hi)], "")
}

fn check_h3_limit(gas: &GasModel, zs: &[f64]) -> HypothesisEntry {
    let z_hi = *zs.last().unwrap();
    let z_prev = z_hi / 10.0;
    let q = |z: f64| gas.profile(z) / z.powf(5.0 / 3.0);
    let (q_hi, q_prev) = (q(z_hi), q(z_prev));
    let change = ((q_hi - q_prev) / q_hi).abs();
    let mut values = vec![("P/Z^(5/3)", q_hi), ("decade_change", change)];
    let converged = q_hi > 0.0 && change <= gas.p_inf_rtol;
    if gas.p_inf.is_finite() {
        values.push(("P_inf", gas.p_inf));
    }
    let matches_declared = !gas.p_inf.is_finite() || ((q_hi - gas.p_inf).abs() <= gas.p_inf_rtol * gas.p_inf.abs());
    let passed = converged && matches_declared && gas.p_inf != 0.0;
    let detail = if passed {
        String::new()
    } else if q_hi <= 0.0 || !converged {
        "P(Z)/Z^(5/3) has no positive limit on the sample".to_string()
    } else {
        "limit differs from the declared P_inf".to_string()
    };
    entry(Hypothesis::H3Limit, passed, Some(z_hi), values, detail)
}

fn check_h6(gas: &GasModel, zs: &[f64]) -> HypothesisEntry {
    let mut worst = f64::NEG_INFINITY;
    for &z in zs {
        let d = gas.entropy_profile_derivative(z);
        if !(d < 0.0) {
            return entry(Hypothesis::H6, false, Some(z), vec![("S'", d)], "S' >= 0");
        }
        worst = worst.max(d);
    }
    entry(Hypothesis::H6, true, None, vec![("max_S'", worst)], "")
}

fn check_h7(gas: &GasModel, zs: &[f64]) -> HypothesisEntry {
    let z_hi = *zs.last().unwrap();
    match gas.entropy_profile(z_hi) {
        Ok(s) => {
            let passed = s.abs() <= H7_TOL;
            let detail = if passed { "" } else { "S(Z) does not vanish at the largest sampled Z" };
            entry(Hypothesis::H7, passed, Some(z_hi), vec![("S(Zmax)", s)], detail)
        }
        Err(e) => entry(Hypothesis::H7, false, Some(z_hi), vec![], format!("entropy evaluation failed: {e}")),
    }
}

fn check_h8(t: &TransportModel, ts: &[f64]) -> HypothesisEntry {
    let mut max_dmu = 0.0f64;
    for &theta in ts {
        let env = 1.0 + theta.powf(t.b);
        let mu = t.mu(theta);
        let eta = t.eta(theta);
        let dmu = t.mu_derivative(theta);
        max_dmu = max_dmu.max(dmu.abs());
        if !(mu >= t.mu_lower * env * (1.0 - REL_SLACK)) || !(t.mu_lower > 0.0) {
            return entry(Hypothesis::H8, false, Some(theta), vec![("mu", mu)], "mu below lower envelope");
        }
        if !(mu <= t.mu_upper * env * (1.0 + REL_SLACK)) {
            return entry(Hypothesis::H8, false, Some(theta), vec![("mu", mu)], "mu above upper envelope");
        }
        if !(eta >= 0.0) || !(eta <= t.eta_upper * env * (1.0 + REL_SLACK)) {
            return entry(Hypothesis::H8, false, Some(theta), vec![("eta", eta)], "eta outside [0, envelope]");
        }
        if !dmu.is_finite() {
            return entry(Hypothesis::H8, false, Some(theta), vec![("mu'", dmu)], "mu' unbounded");
        }
    }
    entry(Hypothesis::H8, true, None, vec![("max_|mu'|", max_dmu), ("b", t.b)], "")
}

fn check_h9(t: &TransportModel, ts: &[f64]) -> HypothesisEntry {
    for &theta in ts {
        let env = 1.0 + theta.powi(3);
        let k = t.kappa(theta);
        if !(k >= t.kappa_lower * env * (1.0 - REL_SLACK)) || !(t.kappa_lower > 0.0) {
            return entry(Hypothesis::H9, false, Some(theta), vec![("kappa", k)], "kappa below lower envelope");
        }
        if !(k <= t.kappa_upper * env * (1.0 + REL_SLACK)) {
            return entry(Hypothesis::H9, false, Some(theta), vec![("kappa", k)], "kappa above upper envelope");
        }
    }
    entry(Hypothesis::H9, true, None, vec![], "")
}

/// Fitted constants for the auxiliary bounds
/// `ρ s_M ≤ C ρ(1 + |log ρ| + [log θ]⁺)` and `ρ e_M ≥ c (ρθ + ρ^{5/3})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxBounds {
    pub entropy_constant: f64,
    pub energy_constant: f64,
    /// Whether `ρ s_M ≥ 0` held on the whole sample.
    pub entropy_nonnegative: bool,
}

pub fn aux_bounds_check(gas: &GasModel, samples: &[(f64, f64)]) -> Result<AuxBounds> {
    if samples.is_empty() {
        return Err(Error::Usage("aux_bounds_check needs at least one sample".into()));
    }
    let mut big_c = 0.0f64;
    let mut small_c = f64::INFINITY;
    let mut nonneg = true;
    for &(rho, theta) in samples {
        if !(rho > 0.0 && theta > 0.0) {
            return Err(Error::Domain(format!("sample ({rho}, {theta}) is not positive")));
        }
        let s = gas.entropy_molecular(rho, theta)?;
        nonneg &= s >= 0.0;
        let weight = 1.0 + rho.ln().abs() + theta.ln().max(0.0);
        big_c = big_c.max(s / weight);
        let e = gas.internal_energy_molecular(rho, theta)?;
        small_c = small_c.min(rho * e / (rho * theta + rho.powf(5.0 / 3.0)));
    }
    if !big_c.is_finite() || !(small_c > 0.0) || !small_c.is_finite() {
        return Err(Error::HypothesisViolation(format!(
            "auxiliary bounds not fittable: C = {big_c}, c = {small_c}"
        )));
    }
    Ok(AuxBounds {
        entropy_constant: big_c,
        energy_constant: small_c,
        entropy_nonnegative: nonneg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_gas_pattern() {
        let r = hypothesis_report(&GasModel::ideal(), &TransportModel::canonical(), &log_grid(1e-6, 1e6, 61), &log_grid(1e-3, 1e3, 31));
        assert!(r.passed(Hypothesis::H2));
        assert!(r.passed(Hypothesis::H3));
        let h3 = r.get(Hypothesis::H3);
        assert!((h3.value("ratio_min").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((h3.value("ratio_max").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.passed(Hypothesis::H6));
        assert!(!r.passed(Hypothesis::H7));
        assert!(!r.passed(Hypothesis::H3Limit));
        assert!(r.passed(Hypothesis::H8));
        assert!(r.passed(Hypothesis::H9));
        let text = r.to_string();
        assert!(text.contains("H7        FAIL"));
    }

    #[test]
    fn quadratic_profile_fails_h2_at_smallest_point() {
        let g = GasModel::from_expression("sq", "Z^2").unwrap();
        let zs = log_grid(1e-6, 1e3, 10);
        let r = hypothesis_report(&g, &TransportModel::standard(), &zs, &[1.0]);
        let h2 = r.get(Hypothesis::H2);
        assert!(!h2.passed);
        assert_eq!(h2.witness, Some(1e-6));
        assert!(!r.passed(Hypothesis::H3));
    }

    #[test]
    fn report_is_total() {
        let g = GasModel::from_expression("odd", "Z/(1+Z)").unwrap();
        let r = hypothesis_report(&g, &TransportModel::standard(), &[], &[1.0]);
        assert_eq!(r.entries.len(), 7);
        assert!(r.entries.iter().all(|e| !e.passed));
        let r = hypothesis_report(&g, &TransportModel::standard(), &log_grid(1e-3, 1e3, 9), &[0.0, 1.0]);
        assert_eq!(r.entries.len(), 7);
    }

    #[test]
    fn violating_transport_detected() {
        let t = TransportModel::build("bad", "0.5", "0", "1 + T", 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = hypothesis_report(&GasModel::ideal(), &t, &[1.0], &log_grid(1e-2, 1e2, 5));
        assert!(!r.passed(Hypothesis::H8));
        assert!(!r.passed(Hypothesis::H9));
    }

    #[test]
    fn aux_bounds_single_point() {
        let b = aux_bounds_check(&GasModel::ideal(), &[(1.0, 1.0)]).unwrap();
        assert!((b.energy_constant - 0.75).abs() < 1e-15);
        assert_eq!(b.entropy_constant, 0.0);
    }

    #[test]
    fn aux_bounds_brute_force_and_extremes() {
        let mut samples = Vec::new();
        for i in 0..100 {
            for j in 0..100 {
                let rho = 10f64.powf(-2.0 + 4.0 * i as f64 / 99.0);
                let theta = 10f64.powf(-2.0 + 4.0 * j as f64 / 99.0);
                samples.push((rho, theta));
            }
        }
        let b = aux_bounds_check(&GasModel::ideal(), &samples).unwrap();
        assert!(b.energy_constant > 0.0 && b.entropy_constant.is_finite());
        samples.push((1e-6, 1.0));
        samples.push((1e6, 1.0));
        let b = aux_bounds_check(&GasModel::ideal(), &samples).unwrap();
        assert!(b.energy_constant > 0.0 && b.energy_constant.is_finite());
        assert!(b.entropy_constant.is_finite());
        assert!(!b.entropy_nonnegative);
    }
}

use crate::error::{Error, Result};
use crate::expr::Expr;

pub type Vec3 = [f64; 3];
/// `grad_u[i][j] = ∂u_i/∂x_j`.
pub type Tensor3 = [[f64; 3]; 3];

/// Temperature-dependent viscosities and heat conductivity together with the
/// constants declared for their growth envelopes.
#[derive(Debug, Clone)]
pub struct TransportModel {
    name: String,
    mu: Expr,
    eta: Expr,
    kappa: Expr,
    /// Growth exponent of the viscosities, `2/5 < b ≤ 1`.
    pub b: f64,
    pub mu_lower: f64,
    pub mu_upper: f64,
    pub eta_upper: f64,
    pub kappa_lower: f64,
    pub kappa_upper: f64,
}

impl Default for TransportModel {
    fn default() -> Self {
        TransportModel::standard()
    }
}

impl TransportModel {
    /// `μ = 1 + θ`, `η = (1 + θ)/10`, `κ = 1 + θ³`.
    pub fn standard() -> Self {
        TransportModel::build("default", "1 + T", "(1 + T)/10", "1 + T^3", 1.0, 1.0, 1.0, 0.1, 1.0, 1.0)
            .expect("built-in transport model")
    }

    /// `μ = 1 + θ`, `η = 0`, `κ = 1 + θ³` with unit envelope constants.
    pub fn canonical() -> Self {
        TransportModel::build("canonical", "1 + T", "0", "1 + T^3", 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
            .expect("built-in transport model")
    }

    /// `μ = 1 + θ^b`, `η = (1 + θ^b)/10`, `κ = 1 + θ³`.
    pub fn power_law(b: f64) -> Result<Self> {
        if !(b > 0.4 && b <= 1.0) {
            return Err(Error::Domain(format!("viscosity exponent b = {b} outside (2/5, 1]")));
        }
        TransportModel::build(
            "power",
            &format!("1 + T^{b}"),
            &format!("(1 + T^{b})/10"),
            "1 + T^3",
            b,
            1.0,
            1.0,
            0.1,
            1.0,
            1.0,
        )
    }

    /// Custom profiles written in the expression language with variable `T`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        name: &str,
        mu: &str,
        eta: &str,
        kappa: &str,
        b: f64,
        mu_lower: f64,
        mu_upper: f64,
        eta_upper: f64,
        kappa_lower: f64,
        kappa_upper: f64,
    ) -> Result<Self> {
        Ok(TransportModel {
            name: name.to_string(),
            mu: Expr::parse(mu, "T")?,
            eta: Expr::parse(eta, "T")?,
            kappa: Expr::parse(kappa, "T")?,
            b,
            mu_lower,
            mu_upper,
            eta_upper,
            kappa_lower,
            kappa_upper,
        })
    }

    pub fn by_name(name: &str, b: Option<f64>) -> Result<Self> {
        match (name, b) {
            ("default", None) => Ok(Self::standard()),
            ("canonical", None) => Ok(Self::canonical()),
            ("power", Some(b)) => Self::power_law(b),
            ("power", None) => Err(Error::Config("transport.name = power requires transport.b".into())),
            (n, Some(_)) if n != "power" => {
                Err(Error::Config(format!("transport.b is only meaningful for `power`, not `{n}`")))
            }
            (other, _) => Err(Error::Config(format!("unknown transport model `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn fingerprint(&self) -> String {
        format!("{}:{}|{}|{}|b={}", self.name, self.mu, self.eta, self.kappa, self.b)
    }

    pub fn mu(&self, theta: f64) -> f64 {
        self.mu.eval(theta)
    }

    pub fn mu_derivative(&self, theta: f64) -> f64 {
        self.mu.derivative().eval(theta)
    }

    pub fn eta(&self, theta: f64) -> f64 {
        self.eta.eval(theta)
    }

    pub fn kappa(&self, theta: f64) -> f64 {
        self.kappa.eval(theta)
    }
}

/// Newtonian stress `ν[μ(θ)(∇u + ∇uᵀ − (2/3) div u I) + η(θ) div u I]`.
pub fn stress_tensor(transport: &TransportModel, nu: f64, theta: f64, grad_u: &Tensor3) -> Result<Tensor3> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("stress needs θ > 0, got {theta}")));
    }
    let div = grad_u[0][0] + grad_u[1][1] + grad_u[2][2];
    let mu = transport.mu(theta);
    let eta = transport.eta(theta);
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = mu * (grad_u[i][j] + grad_u[j][i]);
            if i == j {
                v += (eta - 2.0 / 3.0 * mu) * div;
            }
            s[i][j] = nu * v;
        }
    }
    Ok(s)
}

/// Fourier flux `−ω κ(θ) ∇θ`.
pub fn heat_flux(transport: &TransportModel, omega: f64, theta: f64, grad_theta: &Vec3) -> Result<Vec3> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("heat flux needs θ > 0, got {theta}")));
    }
    let k = -omega * transport.kappa(theta);
    Ok([k * grad_theta[0], k * grad_theta[1], k * grad_theta[2]])
}

/// `S : ∇u` written as `ν(2μ|D − (div u/3) I|² + η (div u)²)` with `D` the
/// symmetric gradient, so the result is non-negative in floating point too.
pub fn viscous_dissipation(transport: &TransportModel, nu: f64, theta: f64, grad_u: &Tensor3) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("dissipation needs θ > 0, got {theta}")));
    }
    let div = grad_u[0][0] + grad_u[1][1] + grad_u[2][2];
    let mut dev2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut d = 0.5 * (grad_u[i][j] + grad_u[j][i]);
            if i == j {
                d -= div / 3.0;
            }
            dev2 += d * d;
        }
    }
    Ok(nu * (2.0 * transport.mu(theta) * dev2 + transport.eta(theta).max(0.0) * div * div))
}

pub fn contract(a: &Tensor3, b: &Tensor3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_gives_zero_stress() {
        let t = TransportModel::standard();
        let s = stress_tensor(&t, 0.3, 1.2, &[[0.0; 3]; 3]).unwrap();
        assert_eq!(s, [[0.0; 3]; 3]);
    }

    #[test]
    fn one_dimensional_stress_is_four_thirds() {
        let t = TransportModel::canonical();
        let (nu, theta, g) = (0.2, 2.0, 0.7);
        let mut grad = [[0.0; 3]; 3];
        grad[0][0] = g;
        let s = stress_tensor(&t, nu, theta, &grad).unwrap();
        assert!((s[0][0] - 4.0 / 3.0 * nu * t.mu(theta) * g).abs() < 1e-15);
        // the transverse normal stresses are -(2/3)νμ g; only S_xx carries
        // the longitudinal strain, the off-diagonal entries vanish
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(s[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn stress_is_symmetric_with_expected_trace() {
        let t = TransportModel::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut g = [[0.0; 3]; 3];
            for row in g.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(-3.0..3.0);
                }
            }
            let theta = rng.random_range(0.1..5.0);
            let s = stress_tensor(&t, 0.7, theta, &g).unwrap();
            let div = g[0][0] + g[1][1] + g[2][2];
            let trace = s[0][0] + s[1][1] + s[2][2];
            assert!((trace - 3.0 * 0.7 * t.eta(theta) * div).abs() < 1e-12);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((s[i][j] - s[j][i]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn viscous_dissipation_is_nonnegative() {
        let t = TransportModel::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let mut g = [[0.0; 3]; 3];
            for row in g.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(-10.0..10.0);
                }
            }
            let theta = rng.random_range(0.01..10.0);
            let s = stress_tensor(&t, rng.random_range(0.0..2.0), theta, &g).unwrap();
            assert!(contract(&s, &g) >= -1e-12 * contract(&g, &g).max(1.0));
        }
    }

    #[test]
    fn dissipation_matches_contraction() {
        let t = TransportModel::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let mut g = [[0.0; 3]; 3];
            for row in g.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(-2.0..2.0);
                }
            }
            let theta = rng.random_range(0.1..4.0);
            let s = stress_tensor(&t, 0.3, theta, &g).unwrap();
            let d = viscous_dissipation(&t, 0.3, theta, &g).unwrap();
            assert!(d >= 0.0);
            assert!((d - contract(&s, &g)).abs() < 1e-12 * d.max(1.0));
        }
    }

    #[test]
    fn heat_flux_examples() {
        let t = TransportModel::standard();
        assert_eq!(heat_flux(&t, 2.0, 1.0, &[0.0; 3]).unwrap(), [-0.0; 3]);
        assert_eq!(heat_flux(&t, 2.0, 1.0, &[1.0, 0.0, 0.0]).unwrap(), [-4.0, -0.0, -0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let g = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let theta = rng.random_range(0.01..10.0);
            let q = heat_flux(&t, rng.random_range(0.0..3.0), theta, &g).unwrap();
            let prod = q[0] * g[0] + q[1] * g[1] + q[2] * g[2];
            assert!(-prod / theta >= 0.0);
        }
    }

    #[test]
    fn power_law_range() {
        assert!(TransportModel::power_law(0.5).is_ok());
        assert!(TransportModel::power_law(0.4).is_err());
        assert!(TransportModel::power_law(1.2).is_err());
        let t = TransportModel::power_law(0.5).unwrap();
        assert!((t.mu(4.0) - 3.0).abs() < 1e-14);
    }
}

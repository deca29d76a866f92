//! Classical compound Poisson risk model.
//!
//! The ruin probability `psi` solves the defective renewal equation
//! `psi(u) = phi int_0^u psi(u - y) f(y) dy + v(u)` with `f = Fbar_X / mu` and
//! `v(u) = phi int_u^inf f`. Equivalently `psibar = 1 - psi` is the law of a
//! geometric sum of equilibrium variables, which is what the pipeline
//! discretizes and sums.

use std::sync::Arc;

use serde::Serialize;

use crate::compound::{compound_cdf, discretize_equilibrium, panjer_geometric};
use crate::error::{Error, Result};
use crate::inversion::{lattice_floor, m2_combine, LatticeFunction};
use crate::transforms::{survival_to_density_oracle, GammaMixture, LinearCombination, Survival, TransformOracle};

/// Claim law plus safety loading `phi = lambda mu / c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskModel {
    claims: GammaMixture,
    phi: f64,
    rates: Option<(f64, f64)>,
}

fn net_profit(phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Admissibility(format!(
            "net-profit condition requires 0 < phi = lambda mu / c < 1, got phi = {phi}"
        )));
    }
    Ok(phi)
}

impl RiskModel {
    pub fn from_phi(claims: GammaMixture, phi: f64) -> Result<Self> {
        Ok(Self { phi: net_profit(phi)?, claims, rates: None })
    }

    /// Poisson arrival rate `lambda` and premium rate `c`.
    pub fn from_rates(claims: GammaMixture, lambda: f64, c: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite() && c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("arrival and premium rates must be positive, got {lambda}, {c}")));
        }
        let phi = net_profit(lambda * claims.mean() / c)?;
        Ok(Self { claims, phi, rates: Some((lambda, c)) })
    }

    pub fn claims(&self) -> &GammaMixture {
        &self.claims
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `(lambda, c)` when the model was built from rates.
    pub fn rates(&self) -> Option<(f64, f64)> {
        self.rates
    }

    pub fn mean_claim(&self) -> f64 {
        self.claims.mean()
    }
}

/// Accelerated non-ruin approximation on `{k/t}`, together with the plain
/// `L*_t psibar` it was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinApproximation {
    t: f64,
    phi: f64,
    lattice: LatticeFunction,
    raw: LatticeFunction,
    lstar: LatticeFunction,
}

impl RuinApproximation {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `M2_t psibar(k/t)` projected onto `[1 - phi, 1]`, with the exact value
    /// `1 - phi` at `k = 0`. The extrapolation can overshoot 1 by `O(1/t^2)`
    /// where `psibar` is already flat; the projection never moves a value
    /// away from `psibar`, which lies in the same interval.
    pub fn lattice(&self) -> &LatticeFunction {
        &self.lattice
    }

    /// `M2_t psibar(k/t)` as combined, without the projection.
    pub fn raw_lattice(&self) -> &LatticeFunction {
        &self.raw
    }

    /// `L*_t psibar(k/t) = P(L_1^t + ... + L_M^t <= k/t)`.
    pub fn lstar_lattice(&self) -> &LatticeFunction {
        &self.lstar
    }

    pub fn u_max(&self) -> f64 {
        self.lattice.u_max()
    }

    pub fn nonruin(&self, u: f64) -> Result<f64> {
        self.lattice.at(u)
    }

    pub fn ruin(&self, u: f64) -> Result<f64> {
        Ok(1.0 - self.lattice.at(u)?)
    }

    pub fn nonruin_lstar(&self, u: f64) -> Result<f64> {
        self.lstar.at(u)
    }
}

/// `P(S^t <= k/t)` for `k = 0..=k_max`, where `S^t` is the geometric sum of
/// discretized equilibrium claims at rate `t`.
pub fn discretized_nonruin(model: &RiskModel, t: f64, k_max: usize) -> Result<LatticeFunction> {
    // P(S <= k/t) only involves severity weights up to index k
    let severity = discretize_equilibrium(model.claims(), t, k_max)?;
    let compound = panjer_geometric(&severity, model.phi(), k_max)?;
    Ok(compound_cdf(&compound))
}

/// Runs the discretize/Panjer/cumulate pipeline at rates `t` and `2t` and
/// combines them into `M2_t psibar` on `{k/t : k <= ceil(t u_max)}`.
pub fn approximate_nonruin(model: &RiskModel, t: f64, u_max: f64) -> Result<RuinApproximation> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("inversion rate must be positive, got {t}")));
    }
    if !(u_max > 0.0 && u_max.is_finite()) {
        return Err(Error::domain(format!("u_max must be positive, got {u_max}")));
    }
    let x = t * u_max;
    let k_max = if (x - x.round()).abs() <= 64.0 * f64::EPSILON * x.round().max(1.0) {
        lattice_floor(t, u_max)
    } else {
        x.ceil() as usize
    };
    let (coarse, fine) = std::thread::scope(|s| {
        let fine = s.spawn(|| discretized_nonruin(model, 2.0 * t, 2 * k_max));
        let coarse = discretized_nonruin(model, t, k_max);
        (coarse, fine.join().expect("pipeline thread panicked"))
    });
    let (coarse, fine) = (coarse?, fine?);
    let phi = model.phi();
    let raw = LatticeFunction::new(t, m2_combine(1.0 - phi, k_max, |i| fine.values()[i], |i| coarse.values()[i]))?;
    let lattice = raw.map(|v| v.clamp(1.0 - phi, 1.0));
    Ok(RuinApproximation { t, phi, lattice, raw, lstar: coarse })
}

/// `psibar(u) = 1 - phi exp(-beta (1 - phi) u)` for `Exp(beta)` claims.
pub fn exact_nonruin_exponential(phi: f64, beta: f64, u: f64) -> f64 {
    1.0 - phi * (-beta * (1.0 - phi) * u).exp()
}

/// Ingredients of the ruin renewal equation for `m = psi`.
#[derive(Clone)]
pub struct RenewalData {
    phi: f64,
    claims: GammaMixture,
    f: Arc<dyn TransformOracle>,
    v: Arc<dyn TransformOracle>,
}

impl RenewalData {
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Transform oracle of the equilibrium density `f = Fbar_X / mu`.
    pub fn f_oracle(&self) -> Arc<dyn TransformOracle> {
        self.f.clone()
    }

    /// Transform oracle of `v = phi (1 - F)`, `F` the equilibrium CDF.
    pub fn v_oracle(&self) -> Arc<dyn TransformOracle> {
        self.v.clone()
    }

    pub fn f(&self, u: f64) -> f64 {
        self.claims.survival(u) / self.claims.mean()
    }

    pub fn v(&self, u: f64) -> f64 {
        self.phi * self.claims.stop_loss(u) / self.claims.mean()
    }
}

pub fn renewal_data_from_model(model: &RiskModel) -> RenewalData {
    let f: Arc<dyn TransformOracle> = Arc::new(survival_to_density_oracle(model.claims()));
    let v = LinearCombination::new().with(model.phi(), Arc::new(Survival::new(f.clone())));
    RenewalData { phi: model.phi(), claims: model.claims().clone(), f, v: Arc::new(v) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::l_star_lattice;
    use crate::transforms::{Constant, GammaComponent, RenewalRatio};
    use approx::assert_relative_eq;

    fn mixture() -> GammaMixture {
        GammaMixture::new(vec![
            GammaComponent { p: 0.5, alpha: 1.0, beta: 1.0 },
            GammaComponent { p: 0.5, alpha: 1.5, beta: 1.0 },
        ])
        .unwrap()
    }

    #[test]
    fn net_profit_condition() {
        let exp = GammaMixture::exponential(1.0).unwrap();
        assert!(matches!(RiskModel::from_phi(exp.clone(), 1.0), Err(Error::Admissibility(_))));
        assert!(matches!(RiskModel::from_rates(exp.clone(), 2.0, 1.0), Err(Error::Admissibility(_))));
        let m = RiskModel::from_rates(GammaMixture::gamma(2.0, 1.0).unwrap(), 0.25, 1.0).unwrap();
        assert_eq!(m.phi(), 0.5);
    }

    #[test]
    fn exact_formula() {
        assert_relative_eq!(exact_nonruin_exponential(0.9, 1.0, 0.0), 0.1, max_relative = 1e-15);
        assert!((exact_nonruin_exponential(0.9, 1.0, 1.0) - 0.185_646_3).abs() < 1e-7);
        assert_relative_eq!(exact_nonruin_exponential(0.9, 1.0, 1e4), 1.0);
    }

    #[test]
    fn pipeline_matches_exact_exponential() {
        let model = RiskModel::from_phi(GammaMixture::exponential(1.0).unwrap(), 0.9).unwrap();
        let approx = approximate_nonruin(&model, 5.0, 40.0).unwrap();
        assert_eq!(approx.lattice().k_max(), 200);
        assert_eq!(approx.nonruin(0.0).unwrap(), 1.0 - 0.9);
        for u in [1.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0] {
            let got = approx.nonruin(u).unwrap();
            assert!((got - exact_nonruin_exponential(0.9, 1.0, u)).abs() < 5e-5, "u {u}");
        }
        assert!((approx.nonruin(1.0).unwrap() - 0.1856).abs() < 5e-5);
        assert!(approx.nonruin(40.2).is_err());
    }

    #[test]
    fn pipeline_reference_cells() {
        let gamma = RiskModel::from_phi(GammaMixture::gamma(1.5, 1.0).unwrap(), 0.9).unwrap();
        let a = approximate_nonruin(&gamma, 5.0, 40.0).unwrap();
        assert!((a.nonruin(10.0).unwrap() - 0.5949).abs() < 1e-4);
        let mix = RiskModel::from_phi(mixture(), 0.9).unwrap();
        let a = approximate_nonruin(&mix, 5.0, 40.0).unwrap();
        assert!((a.nonruin(40.0).unwrap() - 0.9725).abs() < 1e-4);
    }

    #[test]
    fn nonruin_is_monotone_and_bounded() {
        for claims in [GammaMixture::exponential(2.0).unwrap(), GammaMixture::gamma(1.5, 1.0).unwrap(), mixture()] {
            for phi in [0.3, 0.9] {
                let model = RiskModel::from_phi(claims.clone(), phi).unwrap();
                let a = approximate_nonruin(&model, 5.0, 30.0).unwrap();
                let v = a.lattice().values();
                // once the CDFs saturate only rounding noise is left
                assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-14));
                assert!(v.iter().all(|&x| x >= 1.0 - phi && x <= 1.0));
                for (p, r) in v.iter().zip(a.raw_lattice().values()) {
                    assert!((p - r).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rates_enter_only_through_phi() {
        let claims = GammaMixture::exponential(1.0).unwrap();
        let base = approximate_nonruin(&RiskModel::from_phi(claims.clone(), 0.9).unwrap(), 5.0, 20.0).unwrap();
        for (lambda, c) in [(0.45, 0.5), (0.9, 1.0), (1.8, 2.0)] {
            let model = RiskModel::from_rates(claims.clone(), lambda, c).unwrap();
            assert_eq!(model.phi(), 0.9);
            let other = approximate_nonruin(&model, 5.0, 20.0).unwrap();
            assert_eq!(other.lattice().values(), base.lattice().values());
        }
    }

    #[test]
    fn off_lattice_horizon_rounds_up() {
        let model = RiskModel::from_phi(GammaMixture::exponential(1.0).unwrap(), 0.5).unwrap();
        let a = approximate_nonruin(&model, 5.0, 1.01).unwrap();
        assert_eq!(a.lattice().k_max(), 6);
        assert!(a.nonruin(1.01).is_ok());
    }

    #[test]
    fn renewal_data_pointwise() {
        let exp = RiskModel::from_phi(GammaMixture::exponential(1.0).unwrap(), 0.9).unwrap();
        let d = renewal_data_from_model(&exp);
        for u in [0.0, 0.5, 3.0] {
            assert_relative_eq!(d.f(u), (-u).exp(), max_relative = 1e-14);
            assert_relative_eq!(d.v(u), 0.9 * (-u).exp(), max_relative = 1e-12);
        }
        let g2 = RiskModel::from_phi(GammaMixture::gamma(2.0, 1.0).unwrap(), 0.4).unwrap();
        let d = renewal_data_from_model(&g2);
        assert_relative_eq!(d.v(0.0), 0.4, max_relative = 1e-14);
        for u in [0.2, 1.0, 4.0] {
            assert_relative_eq!(d.f(u), (1.0 + u) * (-u).exp() / 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn renewal_transform_route_agrees_with_pipeline() {
        let model = RiskModel::from_phi(GammaMixture::gamma(1.5, 1.0).unwrap(), 0.9).unwrap();
        let d = renewal_data_from_model(&model);
        let psi = RenewalRatio::new(d.v_oracle(), d.f_oracle(), d.phi()).unwrap();
        let nonruin = LinearCombination::new().with(1.0, Arc::new(Constant(1.0))).with(-1.0, Arc::new(psi));
        let via_ratio = l_star_lattice(&nonruin, 5.0, 200).unwrap();
        let via_panjer = approximate_nonruin(&model, 5.0, 40.0).unwrap();
        for (a, b) in via_ratio.values().iter().zip(via_panjer.lstar_lattice().values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

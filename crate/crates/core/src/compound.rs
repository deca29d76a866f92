//! Lattice discretization of equilibrium laws and the compound geometric sum.
//!
//! For a law with Laplace–Stieltjes transform `Phi_X` the discretized record
//! low `L^t` lives on `{k/t}` with
//!
//! ```text
//! P(L^t = k/t) = (1 - sum_{j<=k} (-t)^j / j! Phi_X^{(j)}(t)) / (t mu)
//! ```
//!
//! which for a gamma mixture is a scaled mixture of negative binomial
//! survival probabilities. A geometric number of such variables is summed with
//! Panjer's recursion.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inversion::LatticeFunction;
use crate::specfun::{self, NeumaierSum, RealShape};
use crate::transforms::{GammaMixture, TransformOracle};

/// Weights below this are treated as rounding noise and clamped to zero.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-12;

/// Mass the truncated severity law may leave beyond its last index.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Largest truncation index [`truncation_index`] will consider.
pub const MAX_TRUNCATION_INDEX: usize = 1 << 22;

/// Probability weights on the lattice `{k/t : k = 0..=K}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticePmf {
    t: f64,
    weights: Vec<f64>,
    mass_deficit: f64,
}

impl LatticePmf {
    /// `mass_deficit` is recomputed as `1 - sum weights`.
    pub fn new(t: f64, weights: Vec<f64>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("lattice rate must be positive, got {t}")));
        }
        if weights.is_empty() {
            return Err(Error::domain("a lattice pmf needs at least one weight"));
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(Error::NegativeWeight { index, value });
        }
        let total: f64 = weights.iter().copied().collect::<NeumaierSum>().total();
        if total > 1.0 + 1e-12 {
            return Err(Error::domain(format!("lattice weights sum to {total} > 1")));
        }
        Ok(Self { t, weights, mass_deficit: (1.0 - total).max(0.0) })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k_max(&self) -> usize {
        self.weights.len() - 1
    }

    /// `1 - sum_k w_k`, the mass beyond the truncation index.
    pub fn mass_deficit(&self) -> f64 {
        self.mass_deficit
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().copied().collect::<NeumaierSum>().total()
    }
}

fn check_rate(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("lattice rate must be positive, got {t}")));
    }
    Ok(())
}

fn equilibrium_weights(mix: &GammaMixture, t: f64, k_max: usize) -> Vec<f64> {
    let scale = 1.0 / (t * mix.mean());
    let mut out = vec![0.0; k_max + 1];
    for c in mix.components() {
        let shape = RealShape::new(c.alpha, c.beta / (t + c.beta)).expect("validated component");
        for (slot, cdf) in out.iter_mut().zip(specfun::negbin_cdf_seq(k_max, shape)) {
            *slot += c.p * (1.0 - cdf).max(0.0);
        }
    }
    out.iter_mut().for_each(|w| *w *= scale);
    out
}

/// `P(L^t = k/t)` for the equilibrium law of a gamma mixture, `k = 0..=k_max`:
/// `sum_i p_i (1 - CDF.NB(k; alpha_i, beta_i / (t + beta_i))) / (t mu)`.
pub fn discretize_equilibrium(mix: &GammaMixture, t: f64, k_max: usize) -> Result<LatticePmf> {
    check_rate(t)?;
    LatticePmf::new(t, equilibrium_weights(mix, t, k_max))
}

/// Smallest `K >= ceil(t u_max)` at which the discretized equilibrium law of
/// `mix` leaves less than [`TRUNCATION_TOL`] of its mass beyond `K/t`.
pub fn truncation_index(mix: &GammaMixture, t: f64, u_max: f64) -> Result<usize> {
    check_rate(t)?;
    if !(u_max >= 0.0 && u_max.is_finite()) {
        return Err(Error::domain(format!("u_max must be finite and nonnegative, got {u_max}")));
    }
    let lattice = crate::inversion::lattice_floor(t, u_max);
    let mut k = lattice.max(16);
    while k <= MAX_TRUNCATION_INDEX {
        let w = equilibrium_weights(mix, t, k);
        let mut acc = NeumaierSum::default();
        for (i, &x) in w.iter().enumerate() {
            acc.add(x);
            if i >= lattice && 1.0 - acc.total() < TRUNCATION_TOL {
                return Ok(i);
            }
        }
        k *= 2;
    }
    Err(Error::Convergence("severity truncation search"))
}

/// The same weights from any Laplace–Stieltjes transform oracle of the claim
/// law, through the partial-sum complement of its scaled derivatives.
pub fn discretize_general(lst: &dyn TransformOracle, mu: f64, t: f64, k_max: usize) -> Result<LatticePmf> {
    check_rate(t)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!("claim mean must be positive, got {mu}")));
    }
    let n = lst.scaled_derivs(t, k_max)?;
    let mut acc = NeumaierSum::default();
    let mut weights = Vec::with_capacity(k_max + 1);
    for (index, &x) in n.iter().enumerate() {
        acc.add(x);
        let w = (1.0 - acc.total()) / (t * mu);
        if w < -NEGATIVE_WEIGHT_TOL {
            return Err(Error::NegativeWeight { index, value: w });
        }
        weights.push(w.max(0.0));
    }
    LatticePmf::new(t, weights)
}

/// Law of `S = L_1 + ... + L_M` with `P(M = n) = (1 - phi) phi^n`, on the same
/// lattice as `severity`, for `k = 0..=k_max`.
pub fn panjer_geometric(severity: &LatticePmf, phi: f64, k_max: usize) -> Result<LatticePmf> {
    if !(phi >= 0.0 && phi < 1.0) {
        return Err(Error::domain(format!("geometric parameter must lie in [0, 1), got {phi}")));
    }
    if k_max > severity.k_max() {
        return Err(Error::domain(format!(
            "compound index {k_max} exceeds the severity truncation index {}",
            severity.k_max()
        )));
    }
    let w = severity.weights();
    let denom = 1.0 - phi * w[0];
    let mut s: Vec<f64> = Vec::with_capacity(k_max + 1);
    s.push((1.0 - phi) / denom);
    for k in 1..=k_max {
        let mut acc = NeumaierSum::default();
        for j in 1..=k {
            acc.add(w[j] * s[k - j]);
        }
        s.push(phi * acc.total() / denom);
    }
    LatticePmf::new(severity.t(), s)
}

/// Cumulative sums `P(S <= k/t)`, capped at one.
pub fn compound_cdf(pmf: &LatticePmf) -> LatticeFunction {
    let mut acc = NeumaierSum::default();
    let values = pmf
        .weights()
        .iter()
        .map(|&w| {
            acc.add(w);
            acc.total().min(1.0)
        })
        .collect();
    LatticeFunction::new(pmf.t(), values).expect("pmf rate and length already validated")
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::transforms::{GammaComponent, MixtureLst};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table_models() -> Vec<GammaMixture> {
        vec![
            GammaMixture::exponential(1.0).unwrap(),
            GammaMixture::gamma(1.5, 1.0).unwrap(),
            GammaMixture::new(vec![
                GammaComponent { p: 0.5, alpha: 1.0, beta: 1.0 },
                GammaComponent { p: 0.5, alpha: 1.5, beta: 1.0 },
            ])
            .unwrap(),
        ]
    }

    #[test]
    fn exponential_equilibrium_is_geometric() {
        let pmf = discretize_equilibrium(&GammaMixture::exponential(1.0).unwrap(), 5.0, 50).unwrap();
        assert_relative_eq!(pmf.weights()[0], 1.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(pmf.weights()[1], 5.0 / 36.0, max_relative = 1e-14);
        for (k, &w) in pmf.weights().iter().enumerate() {
            assert_relative_eq!(w, 5f64.powi(k as i32) / 6f64.powi(k as i32 + 1), max_relative = 1e-12);
        }
    }

    #[test]
    fn general_path_examples() {
        let exp = GammaMixture::exponential(1.0).unwrap();
        let pmf = discretize_general(&MixtureLst::new(exp), 1.0, 5.0, 3).unwrap();
        assert_relative_eq!(pmf.weights()[0], 1.0 / 6.0, max_relative = 1e-14);
        let g2 = GammaMixture::gamma(2.0, 1.0).unwrap();
        let pmf = discretize_general(&MixtureLst::new(g2.clone()), g2.mean(), 5.0, 3).unwrap();
        assert_relative_eq!(pmf.weights()[0], 35.0 / 360.0, max_relative = 1e-14);
    }

    #[test]
    fn two_paths_agree() {
        for mix in table_models() {
            for t in [5.0, 10.0] {
                let a = discretize_equilibrium(&mix, t, 400).unwrap();
                let b = discretize_general(&MixtureLst::new(mix.clone()), mix.mean(), t, 400).unwrap();
                let diff = a.weights().iter().zip(b.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(diff < 1e-10, "diff {diff}");
            }
        }
    }

    #[test]
    fn truncation_leaves_negligible_mass() {
        for mix in table_models() {
            for t in [5.0, 10.0] {
                let k = truncation_index(&mix, t, 40.0).unwrap();
                assert!(k >= (40.0 * t) as usize);
                let pmf = discretize_equilibrium(&mix, t, k).unwrap();
                assert!(pmf.mass_deficit() < 1e-10);
                assert!((pmf.total_mass() + pmf.mass_deficit() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_components_have_nonincreasing_weights() {
        for alpha in [1.0, 1.5, 3.0] {
            let pmf = discretize_equilibrium(&GammaMixture::gamma(alpha, 2.0).unwrap(), 5.0, 300).unwrap();
            assert!(pmf.weights().windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn panjer_examples() {
        let sev = discretize_equilibrium(&GammaMixture::exponential(1.0).unwrap(), 5.0, 200).unwrap();
        let s = panjer_geometric(&sev, 0.9, 200).unwrap();
        assert_relative_eq!(s.weights()[0], 0.1 / 0.85, max_relative = 1e-14);
        let cdf = compound_cdf(&s);
        let want = 1.0 - 0.9 * (5.0f64 / 5.1).powi(5);
        assert_relative_eq!(cdf.at(0.8).unwrap(), want, max_relative = 1e-12);
        assert!((cdf.at(0.8).unwrap() - 0.184_842_3).abs() < 1e-7);

        let none = panjer_geometric(&sev, 0.0, 10).unwrap();
        assert_eq!(none.weights()[0], 1.0);
        assert!(none.weights()[1..].iter().all(|&w| w == 0.0));

        let atom = LatticePmf::new(5.0, vec![1.0, 0.0, 0.0]).unwrap();
        let s = panjer_geometric(&atom, 0.9, 2).unwrap();
        assert_relative_eq!(s.weights()[0], 1.0, max_relative = 1e-15);
        assert_eq!(compound_cdf(&s).values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn compound_cdf_matches_closed_form_for_exponential_claims() {
        for t in [5.0, 10.0] {
            let k = (40.0 * t) as usize;
            let sev = discretize_equilibrium(&GammaMixture::exponential(1.0).unwrap(), t, k).unwrap();
            let cdf = compound_cdf(&panjer_geometric(&sev, 0.9, k).unwrap());
            for (i, &v) in cdf.values().iter().enumerate() {
                let want = 1.0 - 0.9 * (t / (t + 0.1)).powi(i as i32 + 1);
                assert!((v - want).abs() < 1e-9, "t {t} k {i}");
            }
        }
    }

    #[test]
    fn compound_mass_deficit_is_small() {
        for mix in table_models() {
            let k = truncation_index(&mix, 5.0, 40.0).unwrap();
            let sev = discretize_equilibrium(&mix, 5.0, k).unwrap();
            let far = panjer_geometric(&sev, 0.9, k).unwrap();
            // the deficit is the discretized ruin probability at K/t
            assert!(far.mass_deficit() <= 0.9);
            let sums: Vec<f64> = compound_cdf(&far).values().to_vec();
            assert!(sums.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn general_path_rejects_cancellation() {
        struct Bad;
        impl TransformOracle for Bad {
            fn scaled_derivs(&self, _t: f64, k_max: usize) -> Result<Vec<f64>> {
                Ok(vec![0.7; k_max + 1])
            }
        }
        assert!(matches!(discretize_general(&Bad, 1.0, 1.0, 3), Err(Error::NegativeWeight { index: 1, .. })));
    }

    proptest! {
        #[test]
        fn panjer_output_is_a_subprobability(phi in 0.01f64..0.99, alpha in 1.0f64..4.0, t in 1.0f64..8.0) {
            let mix = GammaMixture::gamma(alpha, 1.0).unwrap();
            let sev = discretize_equilibrium(&mix, t, 120).unwrap();
            let s = panjer_geometric(&sev, phi, 120).unwrap();
            prop_assert!(s.weights().iter().all(|&w| w >= 0.0));
            prop_assert!(s.total_mass() <= 1.0 + 1e-12);
        }

        #[test]
        fn ratio_oracle_reproduces_panjer(phi in 0.05f64..0.95, t in 1.0f64..8.0) {
            use crate::transforms::{RenewalRatio, Survival, Constant, LinearCombination};
            let mix = GammaMixture::gamma(1.5, 1.0).unwrap();
            let eq: Arc<dyn TransformOracle> = Arc::new(crate::transforms::survival_to_density_oracle(&mix));
            // psibar = 1 - m with m~ = v~ / (1 - phi f~), v = phi * equilibrium survival
            let v = LinearCombination::new().with(phi, Arc::new(Survival::new(eq.clone())));
            let m = RenewalRatio::new(Arc::new(v), eq, phi).unwrap();
            let nonruin = LinearCombination::new().with(1.0, Arc::new(Constant(1.0))).with(-1.0, Arc::new(m));
            let lstar = crate::inversion::l_star_lattice(&nonruin, t, 60).unwrap();
            let sev = discretize_equilibrium(&mix, t, 60).unwrap();
            let cdf = compound_cdf(&panjer_geometric(&sev, phi, 60).unwrap());
            for (a, b) in lstar.values().iter().zip(cdf.values()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

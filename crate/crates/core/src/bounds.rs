//! A-priori bound on `sup |M2_t m - m|` for the ruin renewal solution `m = psi`.
//!
//! The chain is
//!
//! ```text
//! NormLedger --chain_derivative_bounds--> |m'|, |u m'|, |u^2 m'|, |m''|, ...
//!            --chain_high_order_bounds--> |u^2 m'''|, |u^2 m''''|, |u m'''|
//!            --theorem_bound------------> C / t^2
//! ```
//!
//! with the ledger built from a gamma mixture whose shapes are all `>= 1`.
//! `|.|` is the sup norm on `[0, inf)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ruin::RiskModel;
use crate::specfun::{self, ln_gamma_pos};
use crate::transforms::{GammaComponent, GammaMixture};

/// How `I_i(F''_alpha) = int u^i |F''_alpha(u)| du` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum I2Mode {
    /// Split at the sign change `u = alpha - 1` and integrate exactly.
    #[default]
    Exact,
    /// `((alpha - 1) Gamma(alpha - 1 + i) + Gamma(alpha + i)) / Gamma(alpha)`.
    Termwise,
}

/// Inputs of the derivative-bound chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormLedger {
    /// `(|w1|, |u w1|, |u^2 w1|)`.
    pub w1_norms: [f64; 3],
    pub w2_norms: [f64; 3],
    /// `(|u^2 w1''|, |u^2 w2''|)`.
    pub w1pp_w2pp: [f64; 2],
    /// Equilibrium mean `E Z = E X^2 / (2 E X)`.
    pub ez: f64,
    /// Equilibrium second moment `E Z^2 = E X^3 / (3 E X)`.
    pub ez2: f64,
    /// `(I_0(f''), I_1(f''), I_2(f''))`.
    pub i_f2: [f64; 3],
    pub f0: f64,
    pub f1_0: f64,
}

/// Chained norm bounds for the renewal solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BoundReport {
    #[serde(rename = "m1_norm_bound")]
    pub m1_norm: f64,
    #[serde(rename = "um1_norm_bound")]
    pub um1_norm: f64,
    #[serde(rename = "u2m1_norm_bound")]
    pub u2m1_norm: f64,
    #[serde(rename = "m2_norm_bound")]
    pub m2_norm: f64,
    #[serde(rename = "um2_norm_bound")]
    pub um2_norm: f64,
    #[serde(rename = "u2m2_norm_bound")]
    pub u2m2_norm: f64,
    #[serde(rename = "u2m3_norm_bound")]
    pub u2m3_norm: f64,
    #[serde(rename = "u2m4_norm_bound")]
    pub u2m4_norm: f64,
    /// Taken as `|u^2 m''''|`, since `|u g'''| <= |u^2 g''''|` on the class
    /// the bound applies to.
    #[serde(rename = "um3_norm_bound")]
    pub um3_norm: f64,
}

impl BoundReport {
    /// `t^2` times the bound; independent of `t`.
    pub fn constant(&self) -> f64 {
        self.m2_norm / 8.0 + self.um3_norm / 6.0 + 9.0 * self.u2m4_norm / 16.0
    }

    pub fn total_bound(&self, t: f64) -> f64 {
        theorem_bound(self, t)
    }
}

/// `|M2_t g - g| <= |g''| / (8 t^2) + |u g'''| / (6 t^2) + 9 |u^2 g''''| / (16 t^2)`.
pub fn theorem_bound(report: &BoundReport, t: f64) -> f64 {
    report.constant() / (t * t)
}

fn check_admissible(mix: &GammaMixture) -> Result<()> {
    if let Some(c) = mix.components().iter().find(|c| c.alpha < 1.0) {
        return Err(Error::Admissibility(format!(
            "the error bound needs every gamma shape alpha_i >= 1, got alpha = {}",
            c.alpha
        )));
    }
    Ok(())
}

/// `(E Z, E Z^2)` for the equilibrium law of `mix`.
pub fn equilibrium_moments(mix: &GammaMixture) -> (f64, f64) {
    let m1 = mix.raw_moment(1);
    (mix.raw_moment(2) / (2.0 * m1), mix.raw_moment(3) / (3.0 * m1))
}

/// `I_i(F''_alpha)` for the standard `Gamma(alpha, 1)` law, `alpha >= 1`.
pub fn gamma_second_derivative_integral(alpha: f64, i: u32, mode: I2Mode) -> Result<f64> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::Admissibility(format!("gamma shape must be >= 1, got {alpha}")));
    }
    let i_f = i as f64;
    let lg = ln_gamma_pos(alpha);
    if alpha == 1.0 {
        // F'' = -exp(-u)
        return Ok(ln_gamma_pos(i_f + 1.0).exp());
    }
    // Gamma(alpha - 1 + i) / Gamma(alpha) and Gamma(alpha + i) / Gamma(alpha)
    let low = (ln_gamma_pos(alpha - 1.0 + i_f) - lg).exp();
    let high = (ln_gamma_pos(alpha + i_f) - lg).exp();
    match mode {
        I2Mode::Termwise => Ok((alpha - 1.0) * low + high),
        I2Mode::Exact => {
            // int_0^x u^i F'' = (alpha - 1) low P(alpha - 1 + i, x) - high P(alpha + i, x)
            let a = alpha - 1.0;
            let partial = a * low * specfun::reg_inc_gamma_lower(alpha - 1.0 + i_f, a)?
                - high * specfun::reg_inc_gamma_lower(alpha + i_f, a)?;
            let total = a * low - high;
            Ok(2.0 * partial - total)
        }
    }
}

/// `(I_0, I_1, I_2)` of `f'' = -F_X'' / mu`, `f(0) = 1 / mu` and
/// `f'(0) = -(1 / mu) sum_{alpha_i = 1} p_i beta_i`. For several components the
/// integrals are the triangle-inequality bound `sum_i p_i beta_i^{1-i} I_i / mu`.
pub fn f_second_integrals(mix: &GammaMixture, mode: I2Mode) -> Result<([f64; 3], f64, f64)> {
    check_admissible(mix)?;
    let mu = mix.mean();
    let mut integrals = [0.0; 3];
    for c in mix.components() {
        for (i, slot) in integrals.iter_mut().enumerate() {
            let scale = c.beta.powi(1 - i as i32);
            *slot += c.p * scale * gamma_second_derivative_integral(c.alpha, i as u32, mode)? / mu;
        }
    }
    let f1_0 = -mix.components().iter().filter(|c| c.alpha == 1.0).map(|c| c.p * c.beta).sum::<f64>() / mu;
    Ok((integrals, 1.0 / mu, f1_0))
}

/// `u^j d^d/du^d g_{alpha,beta}(u)` for the gamma density `g`, `d <= 2`,
/// with powers of `u` combined before evaluation so that the value at `u = 0`
/// is the limit.
fn weighted_density_deriv(c: &GammaComponent, j: i32, d: u32, u: f64) -> f64 {
    let (a, b) = (c.alpha, c.beta);
    // density derivative = sum_m coef_m u^(alpha - 1 - d + m) exp(-beta u) * norm
    let coefs: Vec<f64> = match d {
        0 => vec![1.0],
        1 => vec![a - 1.0, -b],
        2 => vec![(a - 1.0) * (a - 2.0), -2.0 * (a - 1.0) * b, b * b],
        _ => unreachable!("only derivatives up to order two are needed"),
    };
    let ln_norm = a * b.ln() - ln_gamma_pos(a);
    let base = a - 1.0 - d as f64 + j as f64;
    coefs
        .iter()
        .enumerate()
        .filter(|(_, &k)| k != 0.0)
        .map(|(m, &k)| {
            let p = base + m as f64;
            if u > 0.0 {
                k * (p * u.ln() - b * u + ln_norm).exp()
            } else if p == 0.0 {
                k * ln_norm.exp()
            } else if p > 0.0 {
                0.0
            } else {
                k * f64::INFINITY
            }
        })
        .sum()
}

/// `sup_{0 <= u <= hi} |h(u)|` by a uniform grid refined with golden-section
/// search around the best grid points.
fn sup_norm(h: impl Fn(f64) -> f64, hi: f64) -> f64 {
    const GRID: usize = 20_000;
    let step = hi / GRID as f64;
    let vals: Vec<f64> = (0..=GRID).map(|i| h(i as f64 * step).abs()).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    let mut peaks: Vec<usize> = (0..=GRID)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { vals[i - 1] };
            let right = if i == GRID { f64::NEG_INFINITY } else { vals[i + 1] };
            vals[i] >= left && vals[i] >= right
        })
        .collect();
    peaks.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    for &i in peaks.iter().take(4) {
        let lo = (i as f64 - 1.0).max(0.0) * step;
        let up = ((i + 1).min(GRID)) as f64 * step;
        best = best.max(golden_max(&|u| h(u).abs(), lo, up));
    }
    best
}

fn golden_max(h: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (h(x1), h(x2));
    for _ in 0..200 {
        if b - a <= 1e-13 * b.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = h(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = h(x1);
        }
    }
    f1.max(f2).max(h(a)).max(h(b))
}

/// Right end of the search interval: beyond it every weighted gamma term used
/// here is decreasing and below `1e-14` of its peak.
fn search_horizon(mix: &GammaMixture) -> f64 {
    mix.components().iter().map(|c| (2.0 * (c.alpha + 4.0) + 40.0) / c.beta).fold(0.0, f64::max)
}

fn mixture_weighted_deriv(mix: &GammaMixture, j: i32, d: u32, u: f64) -> f64 {
    mix.components().iter().map(|c| c.p * weighted_density_deriv(c, j, d, u)).sum()
}

/// Ledger entries for `w1 = -phi (1 - phi) Fbar_X / mu` and
/// `w2 = (phi / mu) w1 + phi (1 - phi) F_X' / mu`, plus the moment and
/// integral entries.
pub fn ruin_w_functions(model: &RiskModel, mode: I2Mode) -> Result<NormLedger> {
    let mix = model.claims();
    check_admissible(mix)?;
    let (phi, mu) = (model.phi(), mix.mean());
    let c = phi * (1.0 - phi) / mu;
    let hi = search_horizon(mix);
    let w1 = |u: f64| -c * mix.survival(u);
    let w2 = |u: f64| (phi / mu) * w1(u) + c * mixture_weighted_deriv(mix, 0, 0, u);
    let weighted = |w: &dyn Fn(f64) -> f64| {
        [0, 1, 2].map(|j| sup_norm(|u| if j == 0 { w(u) } else { u.powi(j) * w(u) }, hi))
    };
    let w1_norms = weighted(&w1);
    let w2_norms = weighted(&w2);
    // w1'' = c F_X'', w2'' = (phi / mu) w1'' + c F_X'''
    let u2w1pp = c * sup_norm(|u| mixture_weighted_deriv(mix, 2, 1, u), hi);
    let u2f3 = sup_norm(|u| mixture_weighted_deriv(mix, 2, 2, u), hi);
    let u2w2pp = (phi / mu) * u2w1pp + c * u2f3;
    let (ez, ez2) = equilibrium_moments(mix);
    let (i_f2, f0, f1_0) = f_second_integrals(mix, mode)?;
    Ok(NormLedger { w1_norms, w2_norms, w1pp_w2pp: [u2w1pp, u2w2pp], ez, ez2, i_f2, f0, f1_0 })
}

/// `|m'|, |u m'|, |u^2 m'|` from `w1` and the same for `m''` from `w2`.
pub fn chain_derivative_bounds(ledger: &NormLedger, phi: f64) -> BoundReport {
    let chain = |w: [f64; 3]| {
        let n0 = w[0] / (1.0 - phi);
        let n1 = (phi * ledger.ez * n0 + w[1]) / (1.0 - phi);
        let n2 = (phi * (2.0 * ledger.ez * n1 + ledger.ez2 * n0) + w[2]) / (1.0 - phi);
        [n0, n1, n2]
    };
    let [m1_norm, um1_norm, u2m1_norm] = chain(ledger.w1_norms);
    let [m2_norm, um2_norm, u2m2_norm] = chain(ledger.w2_norms);
    BoundReport { m1_norm, um1_norm, u2m1_norm, m2_norm, um2_norm, u2m2_norm, ..Default::default() }
}

/// `|u^2 m'''|` and `|u^2 m''''|`, consuming the lower-order entries of `report`.
pub fn chain_high_order_bounds(report: &BoundReport, ledger: &NormLedger, phi: f64) -> BoundReport {
    let [i0, i1, i2] = ledger.i_f2;
    let lead = i0 + ledger.f1_0.abs();
    let u2m3 = phi * (lead * report.u2m1_norm + 2.0 * i1 * report.um1_norm + i2 * report.m1_norm)
        + phi * ledger.f0 * report.u2m2_norm
        + ledger.w1pp_w2pp[0];
    let u2m4 = phi * (lead * report.u2m2_norm + 2.0 * i1 * report.um2_norm + i2 * report.m2_norm)
        + phi * ledger.f0 * u2m3
        + ledger.w1pp_w2pp[1];
    BoundReport { u2m3_norm: u2m3, u2m4_norm: u2m4, um3_norm: u2m4, ..*report }
}

/// Ledger and full report for a ruin model.
pub fn bound_report(model: &RiskModel, mode: I2Mode) -> Result<(NormLedger, BoundReport)> {
    let ledger = ruin_w_functions(model, mode)?;
    let first = chain_derivative_bounds(&ledger, model.phi());
    Ok((ledger, chain_high_order_bounds(&first, &ledger, model.phi())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruin::{approximate_nonruin, exact_nonruin_exponential};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp_model(phi: f64) -> RiskModel {
        RiskModel::from_phi(GammaMixture::exponential(1.0).unwrap(), phi).unwrap()
    }

    #[test]
    fn exponential_w_norms() {
        let l = ruin_w_functions(&exp_model(0.9), I2Mode::Exact).unwrap();
        assert_relative_eq!(l.w1_norms[0], 0.09, max_relative = 1e-12);
        assert_relative_eq!(l.w1_norms[1], 0.09 * (-1.0f64).exp(), max_relative = 1e-10);
        assert_relative_eq!(l.w1_norms[2], 0.09 * 4.0 * (-2.0f64).exp(), max_relative = 1e-10);
        // w2 = 0.009 exp(-u), w1'' = -0.09 exp(-u)
        assert_relative_eq!(l.w2_norms[0], 0.009, max_relative = 1e-10);
        assert_relative_eq!(l.w1pp_w2pp[0], 0.09 * 4.0 * (-2.0f64).exp(), max_relative = 1e-10);
        assert_relative_eq!(l.ez, 1.0, max_relative = 1e-15);
        assert_relative_eq!(l.ez2, 2.0, max_relative = 1e-15);
        for (got, want) in l.i_f2.iter().zip([1.0, 1.0, 2.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
        assert_relative_eq!(l.f0, 1.0);
        assert_relative_eq!(l.f1_0, -1.0);
    }

    #[test]
    fn w1_is_a_negative_multiple_of_survival() {
        let mix = GammaMixture::gamma(2.5, 0.7).unwrap();
        let model = RiskModel::from_phi(mix.clone(), 0.6).unwrap();
        let l = ruin_w_functions(&model, I2Mode::Exact).unwrap();
        assert_relative_eq!(l.w1_norms[0], 0.6 * 0.4 / mix.mean(), max_relative = 1e-12);
    }

    #[test]
    fn moments() {
        let (ez, ez2) = equilibrium_moments(&GammaMixture::gamma(2.0, 1.0).unwrap());
        assert_relative_eq!(ez, 1.5, max_relative = 1e-15);
        assert_relative_eq!(ez2, 4.0, max_relative = 1e-15);
    }

    #[test]
    fn second_derivative_integrals() {
        for i in 0..3 {
            let e = gamma_second_derivative_integral(1.0, i, I2Mode::Exact).unwrap();
            let p = gamma_second_derivative_integral(1.0, i, I2Mode::Termwise).unwrap();
            assert_relative_eq!(e, [1.0, 1.0, 2.0][i as usize], max_relative = 1e-14);
            assert_relative_eq!(p, e, max_relative = 1e-14);
        }
        // I_0 = 2 F'(alpha - 1) for alpha > 1
        for alpha in [1.5, 2.0, 3.7] {
            let mode = gamma_second_derivative_integral(alpha, 0, I2Mode::Exact).unwrap();
            let c = GammaComponent { p: 1.0, alpha, beta: 1.0 };
            assert_relative_eq!(mode, 2.0 * weighted_density_deriv(&c, 0, 0, alpha - 1.0), max_relative = 1e-12);
        }
        assert!(matches!(gamma_second_derivative_integral(0.5, 0, I2Mode::Exact), Err(Error::Admissibility(_))));
    }

    #[test]
    fn exact_integrals_match_quadrature() {
        for alpha in [1.5, 2.0, 4.0] {
            let c = GammaComponent { p: 1.0, alpha, beta: 1.0 };
            for i in 0..3 {
                // midpoint rule in v = sqrt(u) to tame the u^(alpha-2) endpoint
                let n = 400_000;
                let h = 80.0f64.sqrt() / n as f64;
                let quad: f64 = (0..n)
                    .map(|k| {
                        let v = (k as f64 + 0.5) * h;
                        let u = v * v;
                        2.0 * v * u.powi(i) * weighted_density_deriv(&c, 0, 1, u).abs()
                    })
                    .sum::<f64>()
                    * h;
                let exact = gamma_second_derivative_integral(alpha, i as u32, I2Mode::Exact).unwrap();
                assert_relative_eq!(exact, quad, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn exact_never_exceeds_termwise() {
        for k in 0..=36 {
            let alpha = 1.0 + 0.25 * k as f64;
            for i in 0..3 {
                let e = gamma_second_derivative_integral(alpha, i, I2Mode::Exact).unwrap();
                let p = gamma_second_derivative_integral(alpha, i, I2Mode::Termwise).unwrap();
                assert!(e <= p * (1.0 + 1e-14), "alpha {alpha} i {i}");
            }
        }
    }

    #[test]
    fn f_prime_at_zero_only_sees_exponential_components() {
        let mix = GammaMixture::new(vec![
            GammaComponent { p: 0.25, alpha: 1.0, beta: 2.0 },
            GammaComponent { p: 0.75, alpha: 3.0, beta: 1.0 },
        ])
        .unwrap();
        let (_, f0, f1_0) = f_second_integrals(&mix, I2Mode::Exact).unwrap();
        let mu = 0.25 * 0.5 + 0.75 * 3.0;
        assert_relative_eq!(f0, 1.0 / mu);
        assert_relative_eq!(f1_0, -0.5 / mu);
        let only_gamma = GammaMixture::gamma(2.0, 3.0).unwrap();
        assert_eq!(f_second_integrals(&only_gamma, I2Mode::Exact).unwrap().2, 0.0);
    }

    #[test]
    fn admissibility() {
        let model = RiskModel::from_phi(GammaMixture::gamma(0.5, 1.0).unwrap(), 0.5).unwrap();
        assert!(matches!(bound_report(&model, I2Mode::Exact), Err(Error::Admissibility(_))));
    }

    #[test]
    fn exponential_chain() {
        let (l, r) = bound_report(&exp_model(0.9), I2Mode::Exact).unwrap();
        assert_relative_eq!(r.m1_norm, 0.9, max_relative = 1e-12);
        assert!(r.m1_norm >= 0.09);
        // |u^2 psi'''| = 0.9 * 0.1^3 * 30^2 exp(-3)
        assert!(r.u2m3_norm >= 0.9 * 1e-3 * 900.0 * (-3.0f64).exp());
        assert_eq!(r.um3_norm, r.u2m4_norm);
        assert!(l.ez * l.ez <= l.ez2);
    }

    #[test]
    fn no_feedback_limit() {
        let (l, _) = bound_report(&exp_model(0.5), I2Mode::Exact).unwrap();
        let r = chain_high_order_bounds(&chain_derivative_bounds(&l, 0.0), &l, 0.0);
        assert_eq!(r.m1_norm, l.w1_norms[0]);
        assert_eq!(r.u2m3_norm, l.w1pp_w2pp[0]);
    }

    #[test]
    fn bound_scaling_and_validity() {
        assert_eq!(theorem_bound(&BoundReport::default(), 3.0), 0.0);
        for phi in [0.5, 0.9] {
            let (_, r) = bound_report(&exp_model(phi), I2Mode::Exact).unwrap();
            let c = theorem_bound(&r, 1.0);
            for t in [1.0, 2.0, 5.0, 10.0, 100.0] {
                assert_relative_eq!(theorem_bound(&r, t) * t * t, c, max_relative = 1e-14);
            }
            assert_eq!(theorem_bound(&r, 10.0), theorem_bound(&r, 5.0) / 4.0);
            for t in [5.0, 10.0] {
                let a = approximate_nonruin(&exp_model(phi), t, 40.0).unwrap();
                let err = a
                    .lattice()
                    .points()
                    .map(|(u, v)| (v - exact_nonruin_exponential(phi, 1.0, u)).abs())
                    .fold(0.0, f64::max);
                assert!(theorem_bound(&r, t) >= err);
            }
        }
    }

    fn ledger_strategy() -> impl Strategy<Value = NormLedger> {
        let pos = 0.0f64..3.0;
        (
            [pos.clone(), pos.clone(), pos.clone()],
            [pos.clone(), pos.clone(), pos.clone()],
            [pos.clone(), pos.clone()],
            (pos.clone(), pos.clone()),
            [pos.clone(), pos.clone(), pos.clone()],
            (pos.clone(), -3.0f64..3.0),
        )
            .prop_map(|(w1, w2, pp, (ez, ez2), i, (f0, f1_0))| NormLedger {
                w1_norms: w1,
                w2_norms: w2,
                w1pp_w2pp: pp,
                ez,
                ez2,
                i_f2: i,
                f0,
                f1_0,
            })
    }

    fn outputs(l: &NormLedger, phi: f64) -> Vec<f64> {
        let r = chain_high_order_bounds(&chain_derivative_bounds(l, phi), l, phi);
        vec![r.m1_norm, r.um1_norm, r.u2m1_norm, r.m2_norm, r.um2_norm, r.u2m2_norm, r.u2m3_norm, r.u2m4_norm]
    }

    proptest! {
        #[test]
        fn chain_is_monotone(l in ledger_strategy(), phi in 0.01f64..0.99, which in 0usize..17, bump in 0.0f64..1.0) {
            let mut up = l;
            match which {
                0..=2 => up.w1_norms[which] += bump,
                3..=5 => up.w2_norms[which - 3] += bump,
                6 | 7 => up.w1pp_w2pp[which - 6] += bump,
                8 => up.ez += bump,
                9 => up.ez2 += bump,
                10..=12 => up.i_f2[which - 10] += bump,
                13 => up.f0 += bump,
                _ => up.f1_0 += bump * up.f1_0.signum(),
            }
            for (a, b) in outputs(&l, phi).iter().zip(outputs(&up, phi)) {
                prop_assert!(b >= *a);
            }
        }

        #[test]
        fn chain_is_monotone_in_phi(l in ledger_strategy(), phi in 0.01f64..0.9, bump in 0.0f64..0.09) {
            for (a, b) in outputs(&l, phi).iter().zip(outputs(&l, phi + bump)) {
                prop_assert!(b >= *a);
            }
        }
    }
}

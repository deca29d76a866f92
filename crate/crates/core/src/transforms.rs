//! Laplace-transform derivative oracles.
//!
//! Every oracle answers one question: given `t` and `k_max`, what are the
//! *scaled* derivatives
//!
//! ```text
//! N_k(t) = (-t)^k / k! * g~^{(k)}(t),   k = 0..=k_max
//! ```
//!
//! of the Laplace transform `g~` of some function `g`. This is the quantity
//! every consumer needs: `L*_t g(k/t) = t * N_k(t)`, and when `g~` is the
//! Laplace–Stieltjes transform of a probability law, `N_k(t)` is the mass the
//! discretized law puts on `k/t`. It stays bounded where the bare derivative
//! and the factorial overflow separately (order ~800 at `t = 10, u = 40`).
//!
//! Bare derivatives are still available through [`derivs`] and
//! [`gamma_mixture_lst_derivs`], computed with [`WideFloat`] so that the
//! factorials never overflow before the final conversion.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{self, NeumaierSum};

/// Smallest admissible `|1 - phi f~(t)|` before the renewal transform is
/// treated as singular.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Supplier of scaled Laplace-transform derivatives.
pub trait TransformOracle: Send + Sync {
    /// Growth abscissa `gamma`: the transform is only defined for `t > gamma`.
    fn abscissa(&self) -> f64 {
        0.0
    }

    /// `[N_0(t), ..., N_{k_max}(t)]` with `N_k = (-t)^k / k! * g~^{(k)}(t)`.
    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>>;

    fn check_point(&self, t: f64) -> Result<()> {
        let gamma = self.abscissa();
        if !(t > gamma) || !t.is_finite() {
            return Err(Error::domain(format!(
                "transform evaluated at t = {t}, needs t > {gamma}"
            )));
        }
        Ok(())
    }
}

impl<T: TransformOracle + ?Sized> TransformOracle for Arc<T> {
    fn abscissa(&self) -> f64 {
        (**self).abscissa()
    }
    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        (**self).scaled_derivs(t, k_max)
    }
}

impl<T: TransformOracle + ?Sized> TransformOracle for &T {
    fn abscissa(&self) -> f64 {
        (**self).abscissa()
    }
    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        (**self).scaled_derivs(t, k_max)
    }
}

/// `mantissa * 2^exp2`, an f64 with an unbounded exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WideFloat {
    mantissa: f64,
    exp2: i64,
}

// mantissas stay in [2^-256, 2^256), so a product of two never overflows
const WIDE_STEP: i64 = 256;
const WIDE_HI: f64 = 1.157_920_892_373_162e77; // 2^256
const WIDE_LO: f64 = 8.636_168_555_094_445e-78; // 2^-256

impl WideFloat {
    pub const ZERO: WideFloat = WideFloat { mantissa: 0.0, exp2: 0 };

    pub fn new(x: f64) -> Self {
        WideFloat { mantissa: x, exp2: 0 }.normalized()
    }

    fn normalized(mut self) -> Self {
        if self.mantissa == 0.0 || !self.mantissa.is_finite() {
            return self;
        }
        while self.mantissa.abs() >= WIDE_HI {
            self.mantissa *= WIDE_LO;
            self.exp2 += WIDE_STEP;
        }
        while self.mantissa.abs() < WIDE_LO {
            self.mantissa *= WIDE_HI;
            self.exp2 -= WIDE_STEP;
        }
        self
    }

    pub fn mul(self, x: f64) -> Self {
        self.mul_wide(WideFloat::new(x))
    }

    pub fn mul_wide(self, other: WideFloat) -> Self {
        WideFloat { mantissa: self.mantissa * other.mantissa, exp2: self.exp2 + other.exp2 }
            .normalized()
    }

    pub fn add(self, other: WideFloat) -> Self {
        if self.mantissa == 0.0 {
            return other;
        }
        if other.mantissa == 0.0 {
            return self;
        }
        let (hi, lo) = if self.exp2 >= other.exp2 { (self, other) } else { (other, self) };
        let mut m = lo.mantissa;
        let mut e = lo.exp2;
        while e < hi.exp2 && m != 0.0 {
            m *= WIDE_LO;
            e += WIDE_STEP;
        }
        WideFloat { mantissa: hi.mantissa + m, exp2: hi.exp2 }.normalized()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa < 0.0
    }

    /// `ln |x|`.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }

    /// Nearest f64; `±inf` or `0` outside the representable range.
    pub fn to_f64(self) -> f64 {
        let mut m = self.mantissa;
        let mut e = self.exp2;
        while e > 0 && m.is_finite() {
            m *= WIDE_HI;
            e -= WIDE_STEP;
        }
        while e < 0 && m != 0.0 {
            m *= WIDE_LO;
            e += WIDE_STEP;
        }
        m
    }
}

/// One `Gamma(alpha, beta)` component (shape, rate) with mixing weight `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaComponent {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Finite mixture of gamma laws, `F_X = sum_i p_i F_{alpha_i, beta_i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaMixture {
    components: Vec<GammaComponent>,
}

/// Accepted deviation of `sum p_i` from one before renormalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

impl GammaMixture {
    /// Validates the components and rescales the weights to sum to one.
    pub fn new(components: Vec<GammaComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("a gamma mixture needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.p > 0.0 && c.p <= 1.0) {
                return Err(Error::domain(format!("component {i}: weight must lie in (0, 1], got {}", c.p)));
            }
            if !(c.alpha > 0.0 && c.alpha.is_finite()) {
                return Err(Error::domain(format!("component {i}: shape must be positive, got {}", c.alpha)));
            }
            if !(c.beta > 0.0 && c.beta.is_finite()) {
                return Err(Error::domain(format!("component {i}: rate must be positive, got {}", c.beta)));
            }
        }
        let total: f64 = components.iter().map(|c| c.p).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!("mixture weights sum to {total}, expected 1")));
        }
        let components = components
            .into_iter()
            .map(|c| GammaComponent { p: c.p / total, ..c })
            .collect();
        Ok(Self { components })
    }

    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![GammaComponent { p: 1.0, alpha, beta }])
    }

    pub fn exponential(beta: f64) -> Result<Self> {
        Self::gamma(1.0, beta)
    }

    pub fn components(&self) -> &[GammaComponent] {
        &self.components
    }

    pub fn min_alpha(&self) -> f64 {
        self.components.iter().map(|c| c.alpha).fold(f64::INFINITY, f64::min)
    }

    /// `E X^n = sum_i p_i Gamma(alpha_i + n) / (Gamma(alpha_i) beta_i^n)`.
    pub fn raw_moment(&self, n: u32) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let rising: f64 = (0..n).map(|i| c.alpha + i as f64).product();
                c.p * rising / c.beta.powi(n as i32)
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.p * c.alpha / c.beta).sum()
    }

    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        self.components
            .iter()
            .map(|c| c.p * specfun::reg_inc_gamma_lower(c.alpha, c.beta * u).unwrap_or(1.0))
            .sum()
    }

    pub fn survival(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 1.0;
        }
        self.components
            .iter()
            .map(|c| c.p * specfun::reg_inc_gamma_upper(c.alpha, c.beta * u).unwrap_or(0.0))
            .sum()
    }

    /// `E (X - u)^+ = int_u^inf Fbar_X(y) dy`.
    pub fn stop_loss(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        self.components
            .iter()
            .map(|c| {
                let x = c.beta * u;
                let q1 = specfun::reg_inc_gamma_upper(c.alpha + 1.0, x).unwrap_or(0.0);
                let q0 = specfun::reg_inc_gamma_upper(c.alpha, x).unwrap_or(0.0);
                c.p * (c.alpha / c.beta * q1 - u * q0)
            })
            .sum()
    }

    /// `[Phi_X(t), ..., Phi_X^{(k_max)}(t)]` for the Laplace–Stieltjes
    /// transform `Phi_X(t) = sum_i p_i (beta_i / (t + beta_i))^alpha_i`.
    pub fn lst_derivs_wide(&self, t: f64, k_max: usize) -> Result<Vec<WideFloat>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("Laplace–Stieltjes transform needs t > 0, got {t}")));
        }
        let mut out = vec![WideFloat::ZERO; k_max + 1];
        for c in &self.components {
            let tb = t + c.beta;
            // |Phi^{(j)}| = Gamma(alpha + j)/Gamma(alpha) beta^alpha / (t + beta)^(alpha + j)
            let mut mag = WideFloat::new((c.alpha * (c.beta / tb).ln()).exp()).mul(c.p);
            if mag.mantissa == 0.0 {
                // rho^alpha below f64 range
                let ln0 = c.alpha * (c.beta / tb).ln() + c.p.ln();
                let e = (ln0 / std::f64::consts::LN_2).floor();
                mag = WideFloat { mantissa: (ln0 - e * std::f64::consts::LN_2).exp(), exp2: e as i64 }
                    .normalized();
            }
            for (j, slot) in out.iter_mut().enumerate() {
                if j > 0 {
                    mag = mag.mul((c.alpha + (j - 1) as f64) / tb);
                }
                let signed = if j % 2 == 1 { mag.mul(-1.0) } else { mag };
                *slot = slot.add(signed);
            }
        }
        Ok(out)
    }
}

/// `[Phi_X(t), ..., Phi_X^{(k_max)}(t)]` as f64, failing with
/// [`Error::Overflow`] if some derivative is not representable.
pub fn gamma_mixture_lst_derivs(mix: &GammaMixture, t: f64, k_max: usize) -> Result<Vec<f64>> {
    mix.lst_derivs_wide(t, k_max)?
        .into_iter()
        .enumerate()
        .map(|(order, w)| {
            let x = w.to_f64();
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Overflow { order, t })
            }
        })
        .collect()
}

/// Bare derivatives `g~^{(k)}(t) = N_k (-1)^k k! / t^k` recovered from an
/// oracle's scaled output.
pub fn derivs(oracle: &dyn TransformOracle, t: f64, k_max: usize) -> Result<Vec<f64>> {
    let scaled = oracle.scaled_derivs(t, k_max)?;
    let mut factor = WideFloat::new(1.0); // (-1)^k k! / t^k
    let mut out = Vec::with_capacity(scaled.len());
    for (k, n_k) in scaled.into_iter().enumerate() {
        if k > 0 {
            factor = factor.mul(-(k as f64) / t);
        }
        let x = factor.mul(n_k).to_f64();
        if !x.is_finite() {
            return Err(Error::Overflow { order: k, t });
        }
        out.push(x);
    }
    Ok(out)
}

/// The Laplace–Stieltjes transform of a gamma mixture, i.e. the Laplace
/// transform of its density. `N_k` is the mixture of negative binomial
/// probabilities `C(alpha + k - 1, k) rho^alpha (1 - rho)^k`,
/// `rho = beta / (t + beta)`.
#[derive(Debug, Clone)]
pub struct MixtureLst {
    mix: GammaMixture,
}

impl MixtureLst {
    pub fn new(mix: GammaMixture) -> Self {
        Self { mix }
    }

    pub fn mixture(&self) -> &GammaMixture {
        &self.mix
    }
}

impl TransformOracle for MixtureLst {
    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let mut out = vec![0.0; k_max + 1];
        for c in self.mix.components() {
            let ln_rho = (c.beta / (t + c.beta)).ln();
            let ln_q = (t / (t + c.beta)).ln();
            let base = c.p.ln() + c.alpha * ln_rho;
            for (k, slot) in out.iter_mut().enumerate() {
                *slot += (base + specfun::ln_rising_binom(c.alpha, k) + k as f64 * ln_q).exp();
            }
        }
        Ok(out)
    }
}

fn partial_sums(xs: &[f64]) -> Vec<f64> {
    let mut acc = NeumaierSum::default();
    xs.iter()
        .map(|&x| {
            acc.add(x);
            acc.total()
        })
        .collect()
}

/// Survival function `1 - F` of a law whose density transform is `density`.
/// `N_k = (1 - sum_{j<=k} N_j^density) / t`.
#[derive(Clone)]
pub struct Survival {
    density: Arc<dyn TransformOracle>,
}

impl Survival {
    pub fn new(density: Arc<dyn TransformOracle>) -> Self {
        Self { density }
    }
}

impl TransformOracle for Survival {
    fn abscissa(&self) -> f64 {
        self.density.abscissa()
    }

    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let d = self.density.scaled_derivs(t, k_max)?;
        Ok(partial_sums(&d).into_iter().map(|s| (1.0 - s) / t).collect())
    }
}

/// Distribution function `F` of a law whose density transform is `density`.
/// `N_k = (sum_{j<=k} N_j^density) / t`, so `L*_t F(k/t) = P(X^t <= k/t)`.
#[derive(Clone)]
pub struct Cdf {
    density: Arc<dyn TransformOracle>,
}

impl Cdf {
    pub fn new(density: Arc<dyn TransformOracle>) -> Self {
        Self { density }
    }
}

impl TransformOracle for Cdf {
    fn abscissa(&self) -> f64 {
        self.density.abscissa()
    }

    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let d = self.density.scaled_derivs(t, k_max)?;
        Ok(partial_sums(&d).into_iter().map(|s| s / t).collect())
    }
}

/// `sum_i c_i g_i`.
#[derive(Clone, Default)]
pub struct LinearCombination {
    terms: Vec<(f64, Arc<dyn TransformOracle>)>,
}

impl LinearCombination {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, coef: f64, oracle: Arc<dyn TransformOracle>) -> Self {
        self.terms.push((coef, oracle));
        self
    }
}

impl TransformOracle for LinearCombination {
    fn abscissa(&self) -> f64 {
        self.terms.iter().map(|(_, o)| o.abscissa()).fold(0.0, f64::max)
    }

    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let mut out = vec![0.0; k_max + 1];
        for (c, o) in &self.terms {
            for (slot, x) in out.iter_mut().zip(o.scaled_derivs(t, k_max)?) {
                *slot += c * x;
            }
        }
        Ok(out)
    }
}

/// `g(u) = c`, `g~(t) = c / t`.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl TransformOracle for Constant {
    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        Ok(vec![self.0 / t; k_max + 1])
    }
}

/// `g(u) = u`, `g~(t) = 1 / t^2`.
#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl TransformOracle for Identity {
    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        Ok((0..=k_max).map(|k| (k as f64 + 1.0) / (t * t)).collect())
    }
}

/// `g(u) = exp(-a u)`, `g~(t) = 1 / (t + a)`; `N_k = t^k / (t + a)^(k + 1)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpDecay {
    pub a: f64,
}

impl TransformOracle for ExpDecay {
    fn abscissa(&self) -> f64 {
        (-self.a).max(0.0)
    }

    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let r = t / (t + self.a);
        let ln_r = r.ln();
        let ln_first = -(t + self.a).ln();
        Ok((0..=k_max).map(|k| (ln_first + k as f64 * ln_r).exp()).collect())
    }
}

/// Equilibrium density `f(u) = Fbar_X(u) / mu` of a law with Laplace–Stieltjes
/// transform oracle `lst` and mean `mu`:
/// `Phi_L(t) = (1 - Phi_X(t)) / (t mu)`.
#[derive(Clone)]
pub struct Equilibrium {
    survival: Survival,
    mean: f64,
}

impl Equilibrium {
    pub fn new(lst: Arc<dyn TransformOracle>, mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::domain(format!("equilibrium law needs a positive finite mean, got {mean}")));
        }
        Ok(Self { survival: Survival::new(lst), mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

impl TransformOracle for Equilibrium {
    fn abscissa(&self) -> f64 {
        self.survival.abscissa()
    }

    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        let s = self.survival.scaled_derivs(t, k_max)?;
        Ok(s.into_iter().map(|x| x / self.mean).collect())
    }
}

/// Oracle for the equilibrium density `Fbar_X / mu` of a gamma mixture.
pub fn survival_to_density_oracle(mix: &GammaMixture) -> Equilibrium {
    Equilibrium::new(Arc::new(MixtureLst::new(mix.clone())), mix.mean())
        .expect("validated mixtures have a positive mean")
}

/// Transform of the renewal solution, `m~(t) = v~(t) / (1 - phi f~(t))`.
///
/// In scaled coordinates Leibniz's rule for `m~ (1 - phi f~) = v~` becomes a
/// Cauchy product, so
///
/// ```text
/// a_k = (b_k + phi * sum_{j<k} a_j f_{k-j}) / (1 - phi f_0)
/// ```
///
/// with `a, b, f` the scaled derivatives of `m~, v~, f~`. For a density `f`
/// and nonnegative `v` every term is nonnegative.
#[derive(Clone)]
pub struct RenewalRatio {
    v: Arc<dyn TransformOracle>,
    f: Arc<dyn TransformOracle>,
    phi: f64,
}

impl RenewalRatio {
    pub fn new(v: Arc<dyn TransformOracle>, f: Arc<dyn TransformOracle>, phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::domain(format!("renewal defect phi must lie in (0, 1), got {phi}")));
        }
        Ok(Self { v, f, phi })
    }
}

impl TransformOracle for RenewalRatio {
    fn abscissa(&self) -> f64 {
        self.v.abscissa().max(self.f.abscissa())
    }

    fn scaled_derivs(&self, t: f64, k_max: usize) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let b = self.v.scaled_derivs(t, k_max)?;
        let f = self.f.scaled_derivs(t, k_max)?;
        let denom = 1.0 - self.phi * f[0];
        if denom.abs() < SINGULARITY_TOL {
            return Err(Error::Singularity { t, denominator: denom });
        }
        let mut a: Vec<f64> = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let mut acc = NeumaierSum::default();
            for j in (0..k).rev() {
                acc.add(a[j] * f[k - j]);
            }
            a.push((b[k] + self.phi * acc.total()) / denom);
        }
        Ok(a)
    }
}

/// `[m~(t), ..., m~^{(k_max)}(t)]` for `m~ = v~ / (1 - phi f~)`.
pub fn renewal_ratio_derivs(
    v: Arc<dyn TransformOracle>,
    f: Arc<dyn TransformOracle>,
    phi: f64,
    t: f64,
    k_max: usize,
) -> Result<Vec<f64>> {
    let ratio = RenewalRatio::new(v, f, phi)?;
    derivs(&ratio, t, k_max)
}

//! Inversion operators acting on a [`TransformOracle`].
//!
//! * [`l_star`]: `L*_t g(u) = E g(S([tu] + 1) / t)`, read off the `[tu]`-th
//!   scaled derivative at the fixed point `t`.
//! * [`m2_lattice`]: the accelerated `M2_t g(k/t) = 2 L*_{2t} g((2k-1)/(2t)) - L*_t g((k-1)/t)`,
//!   with `M2_t g(0) = g(0)` and linear interpolation between lattice points.
//! * [`post_widder`] and [`stehfest2`]: the classical comparators, where the
//!   derivative order is fixed and the evaluation point `n/u` moves instead.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::transforms::TransformOracle;

/// `[t u]` with lattice points recognised despite rounding in `t * u`.
pub fn lattice_floor(t: f64, u: f64) -> usize {
    let x = t * u;
    let r = x.round();
    if (x - r).abs() <= 64.0 * f64::EPSILON * r.abs().max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// Real values on the lattice `{k/t : k = 0..=K}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeFunction {
    t: f64,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn new(t: f64, values: Vec<f64>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("lattice rate must be positive, got {t}")));
        }
        if values.is_empty() {
            return Err(Error::domain("a lattice function needs at least the value at 0"));
        }
        Ok(Self { t, values })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Truncation index `K`.
    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn u_max(&self) -> f64 {
        self.k_max() as f64 / self.t
    }

    pub fn value(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| (k as f64 / self.t, v))
    }

    /// Linear interpolation between neighbouring lattice points; stored values
    /// are returned unchanged on the lattice. Never extrapolates past `K/t`.
    pub fn at(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::domain(format!("lattice functions are defined for u >= 0, got {u}")));
        }
        let idx = lattice_floor(self.t, u);
        let k_max = self.k_max();
        if idx > k_max {
            return Err(Error::OutOfRange { u, max: self.u_max() });
        }
        let tu = self.t * u;
        let upper = idx as f64 + 1.0 - tu;
        if tu <= idx as f64 || upper >= 1.0 {
            return Ok(self.values[idx]);
        }
        if idx == k_max {
            return Err(Error::OutOfRange { u, max: self.u_max() });
        }
        let lower = tu - idx as f64;
        Ok(lower * self.values[idx + 1] + upper * self.values[idx])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatticeFunction {
        LatticeFunction { t: self.t, values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// `L*_t g(u)` at a single point.
pub fn l_star(oracle: &dyn TransformOracle, t: f64, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(format!("L*_t needs u >= 0, got {u}")));
    }
    let n = lattice_floor(t, u);
    let scaled = oracle.scaled_derivs(t, n)?;
    Ok(t * scaled[n])
}

/// `L*_t g(k/t)` for `k = 0..=k_max`, from a single oracle call.
pub fn l_star_lattice(oracle: &dyn TransformOracle, t: f64, k_max: usize) -> Result<LatticeFunction> {
    let scaled = oracle.scaled_derivs(t, k_max)?;
    LatticeFunction::new(t, scaled.into_iter().map(|x| t * x).collect())
}

/// `M2_t g(k/t)` for `k = 0..=k_max`; `g0` is the exact value `g(0)`.
pub fn m2_lattice(oracle: &dyn TransformOracle, t: f64, k_max: usize, g0: f64) -> Result<LatticeFunction> {
    if k_max == 0 {
        return LatticeFunction::new(t, vec![g0]);
    }
    let coarse = oracle.scaled_derivs(t, k_max - 1)?;
    let fine = oracle.scaled_derivs(2.0 * t, 2 * k_max - 1)?;
    let values = m2_combine(g0, k_max, |k| 2.0 * t * fine[k], |k| t * coarse[k]);
    LatticeFunction::new(t, values)
}

/// `values[0] = g0`, `values[k] = 2 fine(2k - 1) - coarse(k - 1)`, where
/// `fine` is indexed on the `2t` lattice and `coarse` on the `t` lattice.
pub(crate) fn m2_combine(
    g0: f64,
    k_max: usize,
    fine: impl Fn(usize) -> f64,
    coarse: impl Fn(usize) -> f64,
) -> Vec<f64> {
    std::iter::once(g0)
        .chain((1..=k_max).map(|k| 2.0 * fine(2 * k - 1) - coarse(k - 1)))
        .collect()
}

/// Post–Widder `W_n g(u) = (-1)^{n-1}/(n-1)! (n/u)^n g~^{(n-1)}(n/u) = E g(u S(n) / n)`.
pub fn post_widder(oracle: &dyn TransformOracle, n: usize, u: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("Post-Widder order must be at least 1"));
    }
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::domain(format!("Post-Widder inversion needs u > 0, got {u}")));
    }
    let s = n as f64 / u;
    let scaled = oracle.scaled_derivs(s, n - 1)?;
    Ok(s * scaled[n - 1])
}

/// Order-two Stehfest acceleration `2 W_{2n} g(u) - W_n g(u)`.
pub fn stehfest2(oracle: &dyn TransformOracle, n: usize, u: f64) -> Result<f64> {
    Ok(2.0 * post_widder(oracle, 2 * n, u)? - post_widder(oracle, n, u)?)
}

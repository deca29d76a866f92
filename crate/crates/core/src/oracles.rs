//! Independent reference computations for the test suites.
//!
//! None of these share code paths with the transform pipeline: closed forms
//! are evaluated directly, negative binomial sums use exact integer binomial
//! coefficients, and the renewal equation is stepped on a grid in `u`.

use crate::error::{Error, Result};
use crate::inversion::lattice_floor;

/// Grid solution of `m(u) = phi int_0^u m(u - y) f(y) dy + v(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSolution {
    pub h: f64,
    pub values: Vec<f64>,
    /// Set when the same step misses the exponential-claims closed form by
    /// more than [`VOLTERRA_CALIBRATION_TOL`].
    pub coarse_step: bool,
}

impl VolterraSolution {
    /// Linear interpolation on the grid.
    pub fn at(&self, u: f64) -> Result<f64> {
        let x = u / self.h;
        let i = x.floor() as usize;
        let last = self.values.len() - 1;
        if !(u >= 0.0) || x > last as f64 + 1e-9 {
            return Err(Error::OutOfRange { u, max: last as f64 * self.h });
        }
        if i >= last {
            return Ok(self.values[last]);
        }
        let w = x - i as f64;
        Ok((1.0 - w) * self.values[i] + w * self.values[i + 1])
    }
}

pub const VOLTERRA_CALIBRATION_TOL: f64 = 1e-4;

fn trapezoid_solve(f: &dyn Fn(f64) -> f64, v: &dyn Fn(f64) -> f64, phi: f64, n: usize, h: f64) -> Vec<f64> {
    let fs: Vec<f64> = (0..=n).map(|j| f(j as f64 * h)).collect();
    let mut m = Vec::with_capacity(n + 1);
    m.push(v(0.0));
    let diag = 1.0 - 0.5 * phi * h * fs[0];
    for k in 1..=n {
        let inner: f64 = (1..k).map(|j| m[k - j] * fs[j]).sum::<f64>() + 0.5 * m[0] * fs[k];
        m.push((v(k as f64 * h) + phi * h * inner) / diag);
    }
    m
}

/// Trapezoidal Volterra stepping on `{0, h, 2h, ...}` up to `u_max`.
///
/// The step is calibrated by solving the exponential-claims problem with the
/// same `phi`, `h` and `u_max`; a miss of the closed form sets
/// [`VolterraSolution::coarse_step`] and logs a warning.
pub fn convolution_renewal_solve(
    f: &dyn Fn(f64) -> f64,
    v: &dyn Fn(f64) -> f64,
    phi: f64,
    u_max: f64,
    h: f64,
) -> Result<VolterraSolution> {
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::domain(format!("renewal defect must lie in [0, 1), got {phi}")));
    }
    if !(h > 0.0 && u_max > 0.0 && h.is_finite() && u_max.is_finite()) {
        return Err(Error::domain(format!("need h > 0 and u_max > 0, got h = {h}, u_max = {u_max}")));
    }
    let n = (u_max / h).round() as usize;
    let values = trapezoid_solve(f, v, phi, n, h);

    let calib = trapezoid_solve(&|u| (-u).exp(), &|u| phi * (-u).exp(), phi, n, h);
    let miss = calib
        .iter()
        .enumerate()
        .map(|(k, &m)| (m - phi * (-(1.0 - phi) * k as f64 * h).exp()).abs())
        .fold(0.0, f64::max);
    let coarse_step = miss > VOLTERRA_CALIBRATION_TOL;
    if coarse_step {
        log::warn!("Volterra step h = {h} misses the exponential closed form by {miss:e}; reduce h");
    }
    Ok(VolterraSolution { h, values, coarse_step })
}

/// `L*_t psibar(u) = 1 - phi (t / (t + 1 - phi))^([tu] + 1)` for `Exp(1)` claims.
pub fn closed_form_lstar_exponential_ruin(phi: f64, t: f64, u: f64) -> f64 {
    let n = lattice_floor(t, u) as i32 + 1;
    1.0 - phi * (t / (t + 1.0 - phi)).powi(n)
}

/// `L*_t e^{-a u} = (t / (t + a))^([tu] + 1)`.
pub fn closed_form_lstar_exp(a: f64, t: f64, u: f64) -> f64 {
    (t / (t + a)).powi(lattice_floor(t, u) as i32 + 1)
}

/// `W_n e^{-a u} = (1 + a u / n)^(-n)`.
pub fn closed_form_post_widder_exp(a: f64, n: usize, u: f64) -> f64 {
    (1.0 + a * u / n as f64).powi(-(n as i32))
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact: acc * (n - i) is divisible by (i + 1)
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `sum_{j<=k} C(alpha + j - 1, alpha - 1) (1 - rho)^j rho^alpha` with exact
/// integer binomial coefficients.
pub fn brute_force_negbin_cdf(k: usize, alpha: u32, rho: f64) -> Result<f64> {
    if alpha == 0 || !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain(format!("need integer alpha >= 1 and rho in (0, 1], got {alpha}, {rho}")));
    }
    let q = 1.0 - rho;
    let mut total = 0.0;
    for j in 0..=k as u64 {
        let c = binomial(alpha as u64 + j - 1, alpha as u64 - 1)
            .ok_or_else(|| Error::domain("binomial coefficient exceeds u128"))?;
        total += c as f64 * q.powi(j as i32);
    }
    Ok(total * rho.powi(alpha as i32))
}

//! Special functions: log-gamma, regularized incomplete gamma and the
//! negative binomial distribution with real shape.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `zeta(k) - 1` for `k = 2, 3, ...`.
const ZETA_MINUS_ONE: [f64; 38] = [
    0.644_934_066_848_226_44,
    0.202_056_903_159_594_29,
    0.082_323_233_711_138_192,
    0.036_927_755_143_369_926,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_826_8,
    0.004_077_356_197_944_339_4,
    0.002_008_392_826_082_214_4,
    0.000_994_575_127_818_085_34,
    0.000_494_188_604_119_464_56,
    0.000_246_086_553_308_048_3,
    0.000_122_713_347_578_489_15,
    6.124_813_505_870_482_9e-5,
    3.058_823_630_702_049_4e-5,
    1.528_225_940_865_187_2e-5,
    7.637_197_637_899_762_3e-6,
    3.817_293_264_999_839_9e-6,
    1.908_212_716_553_938_9e-6,
    9.539_620_338_727_961_1e-7,
    4.769_329_867_878_064_6e-7,
    2.384_505_027_277_329_9e-7,
    1.192_199_259_653_110_7e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504_1e-8,
    7.450_711_789_835_429_5e-9,
    3.725_334_024_788_457_1e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_681_8e-10,
    4.656_629_065_033_784_1e-10,
    2.328_311_833_676_505_5e-10,
    1.164_155_017_270_052e-10,
    5.820_772_087_902_700_9e-11,
    2.910_385_044_497_099_7e-11,
    1.455_192_189_104_198_4e-11,
    7.275_959_835_057_481e-12,
    3.637_979_547_378_651_2e-12,
    1.818_989_650_307_065_9e-12,
];

// Lanczos approximation, g = 671/128, 14 terms.
const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_09;
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Shape pair of a negative binomial law with real number of successes
/// `alpha` and success probability `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealShape {
    alpha: f64,
    rho: f64,
}

impl RealShape {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("shape alpha must be positive, got {alpha}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::domain(format!("success probability must lie in (0, 1], got {rho}")));
        }
        Ok(Self { alpha, rho })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Natural logarithm of the gamma function for `x > 0`.
///
/// Close to the zeros at 1 and 2 a Taylor series in `zeta(k) - 1` keeps the
/// relative error small; elsewhere the Lanczos sum is used.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // x + 1 lands in the series window around 1
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    if x < 1.5 {
        let z = x - 1.0;
        return -z.ln_1p() + z * (1.0 - EULER_GAMMA) + zeta_tail_series(z);
    }
    if x < 2.5 {
        let z = x - 2.0;
        return z * (1.0 - EULER_GAMMA) + zeta_tail_series(z);
    }
    lanczos_ln_gamma(x)
}

/// `sum_{k>=2} (-1)^k (zeta(k) - 1) z^k / k` for `|z| <= 1/2`.
fn zeta_tail_series(z: f64) -> f64 {
    let mut zk = -z;
    let mut sum = 0.0;
    for (i, c) in ZETA_MINUS_ONE.iter().enumerate() {
        let k = (i + 2) as f64;
        zk *= -z;
        let term = c * zk / k;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let tmp = x + LANCZOS_G;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_C0;
    let mut y = x;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    tmp + (SQRT_2PI * ser / x).ln()
}

/// `ln C(alpha + j - 1, j) = ln Gamma(alpha + j) - ln Gamma(alpha) - ln j!`.
pub(crate) fn ln_rising_binom(alpha: f64, j: usize) -> f64 {
    let j = j as f64;
    ln_gamma_pos(alpha + j) - ln_gamma_pos(alpha) - ln_gamma_pos(j + 1.0)
}

const INC_GAMMA_MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma function `P(alpha, x)`.
pub fn reg_inc_gamma_lower(alpha: f64, x: f64) -> Result<f64> {
    inc_gamma_pair(alpha, x).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma function `Q(alpha, x) = 1 - P(alpha, x)`.
pub fn reg_inc_gamma_upper(alpha: f64, x: f64) -> Result<f64> {
    inc_gamma_pair(alpha, x).map(|(_, q)| q)
}

/// Series for `x < alpha + 1`, Lentz continued fraction otherwise.
fn inc_gamma_pair(alpha: f64, x: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) || alpha.is_infinite() {
        return Err(Error::domain(format!("incomplete gamma requires alpha > 0, got {alpha}")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = -x + alpha * x.ln() - ln_gamma_pos(alpha);
    if x < alpha + 1.0 {
        let mut ap = alpha;
        let mut term = 1.0 / alpha;
        let mut sum = term;
        for _ in 0..INC_GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                let p = (log_prefactor + sum.ln()).exp().min(1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::Convergence("incomplete gamma series"))
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - alpha;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..INC_GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - alpha);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < f64::EPSILON {
                let q = (log_prefactor + h.ln()).exp().min(1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::Convergence("incomplete gamma continued fraction"))
    }
}

/// `ln [ C(alpha + k - 1, k) (1 - rho)^k rho^alpha ]`, the log of one
/// negative binomial probability. Finite for any `k` up to the f64 range.
pub fn negbin_log_pmf(k: usize, shape: RealShape) -> f64 {
    let RealShape { alpha, rho } = shape;
    if rho == 1.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_rising_binom(alpha, k) + alpha * rho.ln() + k as f64 * (-rho).ln_1p()
}

/// `P(N <= k)` for `N ~ NegBin(alpha, rho)`.
pub fn negbin_cdf(k: usize, shape: RealShape) -> f64 {
    *negbin_cdf_seq(k, shape).last().expect("sequence has k + 1 entries")
}

/// `[P(N <= 0), ..., P(N <= k_max)]` in one pass of the term recursion
/// `term_{j+1} = term_j (alpha + j) / (j + 1) (1 - rho)`.
pub fn negbin_cdf_seq(k_max: usize, shape: RealShape) -> Vec<f64> {
    let RealShape { alpha, rho } = shape;
    if rho == 1.0 {
        return vec![1.0; k_max + 1];
    }
    let q = 1.0 - rho;
    let log_seed = alpha * rho.ln();
    let mut out = Vec::with_capacity(k_max + 1);

    if log_seed > -700.0 {
        let mut term = log_seed.exp();
        let mut acc = NeumaierSum::default();
        for j in 0..=k_max {
            if j > 0 {
                term *= (alpha + (j - 1) as f64) / j as f64 * q;
            }
            acc.add(term);
            out.push(acc.total().min(1.0));
        }
    } else {
        // seed underflows: carry the running sum in log space
        let ln_q = (-rho).ln_1p();
        let mut log_term = log_seed;
        let mut log_sum = f64::NEG_INFINITY;
        for j in 0..=k_max {
            if j > 0 {
                log_term += ((alpha + (j - 1) as f64) / j as f64).ln() + ln_q;
            }
            log_sum = log_add_exp(log_sum, log_term);
            out.push(log_sum.exp().min(1.0));
        }
    }
    out
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Compensated (Kahan–Babuška–Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

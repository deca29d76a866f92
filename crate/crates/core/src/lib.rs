//! Approximation of solutions of defective renewal equations
//!
//! ```text
//! m(u) = phi * ∫_0^u m(u - y) f(y) dy + v(u),   0 < phi < 1,
//! ```
//!
//! from derivatives of their Laplace transforms, using the gamma-type
//! operator `L*_t g(u) = E g(S([tu] + 1) / t)` (with `S(n) ~ Gamma(n, 1)`) and
//! its Richardson-style accelerated variant `M2_t = 2 L*_{2t} - L*_t` on the
//! lattice `{k/t}`.
//!
//! The main application is the ruin probability of the classical
//! (Cramér–Lundberg) risk model with gamma-mixture claims, where the
//! non-ruin probability is a compound geometric distribution function:
//! the claim law's equilibrium distribution is discretized with negative
//! binomial weights and compounded with Panjer's recursion.
//!
//! Module map:
//!
//! * [`specfun`]: log-gamma, incomplete gamma, negative binomial CDF.
//! * [`transforms`]: Laplace-transform derivative oracles.
//! * [`inversion`]: `L*_t`, `M2_t`, Post–Widder and Stehfest-2 operators.
//! * [`compound`]: lattice discretization and Panjer recursion.
//! * [`ruin`]: risk model assembly and the end-to-end approximation.
//! * [`bounds`]: a-priori sup-norm error bound for `M2_t`.
//! * [`oracles`]: independent cross-check routes used by the test suites.

pub mod bounds;
pub mod compound;
mod error;
pub mod inversion;
pub mod oracles;
pub mod ruin;
pub mod specfun;
pub mod transforms;

pub use error::{Error, Result};

pub use bounds::{BoundReport, I2Mode, NormLedger};
pub use compound::LatticePmf;
pub use inversion::LatticeFunction;
pub use ruin::{RiskModel, RuinApproximation};
pub use specfun::RealShape;
pub use transforms::{GammaComponent, GammaMixture, TransformOracle};

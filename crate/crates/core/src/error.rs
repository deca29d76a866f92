use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model violates a structural hypothesis (net-profit condition,
    /// gamma shapes below one, ...).
    #[error("admissibility error: {0}")]
    Admissibility(String),

    /// `1 - phi * f~(t)` vanishes, so the renewal transform has a pole at `t`.
    #[error("renewal transform singular at t = {t}: |1 - phi f~(t)| = {denominator:e}")]
    Singularity { t: f64, denominator: f64 },

    /// A lattice weight came out negative beyond rounding noise.
    #[error("negative lattice weight {value:e} at index {index}; the order is too large for double precision")]
    NegativeWeight { index: usize, value: f64 },

    /// Query beyond the last stored lattice point.
    #[error("u = {u} is outside the computed lattice range [0, {max}]")]
    OutOfRange { u: f64, max: f64 },

    /// A derivative magnitude does not fit in an f64.
    #[error("derivative of order {order} overflows f64 at t = {t}")]
    Overflow { order: usize, t: f64 },

    #[error("{0} did not converge")]
    Convergence(&'static str),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

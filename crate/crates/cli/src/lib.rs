//! Command-line front end for `renewinv`.
//!
//! Subcommands: `table1`, `ruin`, `invert`, `bound`, `convergence`. Exit codes
//! are 0 on success, 2 for usage or parse errors, 3 when a model violates an
//! admissibility hypothesis and 4 for numerical failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use renewinv_core::bounds::bound_report;
use renewinv_core::inversion::{l_star_lattice, m2_lattice, post_widder, stehfest2};
use renewinv_core::ruin::{approximate_nonruin, exact_nonruin_exponential};
use renewinv_core::transforms::{Cdf, Constant, ExpDecay, LinearCombination, MixtureLst, TransformOracle};
use renewinv_core::{BoundReport, GammaComponent, GammaMixture, I2Mode, NormLedger, RiskModel};

/// Inputs of the reference ruin table.
pub const TABLE1_U: [f64; 7] = [1.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0];
pub const TABLE1_PHI: f64 = 0.9;
pub const TABLE1_T: f64 = 5.0;

/// Largest tolerated `|approximation - exact|` in the exponential column of
/// `table1` before the command exits with status 4.
pub const TABLE1_EXIT_TOL: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Admissibility(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Admissibility(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 4,
        }
    }
}

impl From<renewinv_core::Error> for CliError {
    fn from(e: renewinv_core::Error) -> Self {
        use renewinv_core::Error as E;
        match e {
            E::Domain(_) => CliError::Usage(e.to_string()),
            E::Admissibility(_) => CliError::Admissibility(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Gamma mixture file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: Vec<GammaComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl MixtureSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let spec: MixtureSpec =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid mixture spec: {e}")))?;
        spec.mixture()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn mixture(&self) -> CliResult<GammaMixture> {
        GammaMixture::new(self.components.clone())
            .map_err(|e| CliError::Usage(format!("invalid mixture spec: {e}")))
    }

    pub fn from_mixture(mix: &GammaMixture, name: Option<&str>) -> Self {
        Self { components: mix.components().to_vec(), name: name.map(str::to_owned) }
    }

    /// `Some(beta)` when the spec is a single exponential law.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.components.as_slice() {
            [c] if c.alpha == 1.0 => Some(c.beta),
            _ => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "renewinv", version, about = "Gamma-type Laplace inversion for ruin probabilities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lstar,
    M2,
    Postwidder,
    Stehfest2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformId {
    /// `exp(-a u)`; parameter `a`.
    ExpDecay,
    /// `1 - (1 - p) exp(-p u)`; parameter `p`.
    TestFunction,
    /// Distribution function of the mixture in `--spec`.
    GammaMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegralMode {
    Exact,
    Termwise,
}

impl From<IntegralMode> for I2Mode {
    fn from(m: IntegralMode) -> Self {
        match m {
            IntegralMode::Exact => I2Mode::Exact,
            IntegralMode::Termwise => I2Mode::Termwise,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Non-ruin probabilities for exponential, Gamma(3/2, 1) and mixed claims at phi = 0.9, t = 5.
    Table1 {
        /// Defaults to markdown on stdout and CSV when writing to a file.
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Accelerated non-ruin probability on the lattice {k/t : k/t <= u_max}.
    Ruin {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        phi: f64,
        #[arg(long)]
        t: f64,
        #[arg(long = "u-max")]
        u_max: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Invert a built-in transform at the given points.
    Invert {
        #[arg(long, value_enum)]
        transform: TransformId,
        /// `a` for exp_decay, `p` for test_function.
        #[arg(long)]
        param: Option<f64>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Method,
        /// Lattice rate for lstar/m2; order n for postwidder/stehfest2.
        #[arg(long)]
        t: f64,
        /// Comma-separated evaluation points.
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// A-priori error bound for the accelerated ruin approximation, as JSON.
    Bound {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        phi: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "exact")]
        integrals: IntegralMode,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sup-lattice errors and empirical orders over a list of rates.
    Convergence {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        phi: f64,
        #[arg(long = "t-list", value_delimiter = ',', required = true)]
        t_list: Vec<f64>,
        #[arg(long = "u-max")]
        u_max: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// 17 significant digits, enough to read back the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn emit(output: &OutputArgs, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match &output.out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> CliResult<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive and finite, got {x}")))
    }
}

/// One line of the reference table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Row {
    pub u: f64,
    pub exponential: f64,
    pub gamma: f64,
    pub mixture: f64,
    pub exact_exponential: f64,
    pub abs_dev: f64,
}

pub fn table1_models() -> [GammaMixture; 3] {
    let exp = GammaMixture::exponential(1.0).expect("valid");
    let gamma = GammaMixture::gamma(1.5, 1.0).expect("valid");
    let mix = GammaMixture::new(vec![
        GammaComponent { p: 0.5, alpha: 1.0, beta: 1.0 },
        GammaComponent { p: 0.5, alpha: 1.5, beta: 1.0 },
    ])
    .expect("valid");
    [exp, gamma, mix]
}

pub fn table1_rows() -> CliResult<Vec<Table1Row>> {
    let u_max = TABLE1_U[TABLE1_U.len() - 1];
    let approx: Vec<_> = table1_models()
        .into_iter()
        .map(|m| approximate_nonruin(&RiskModel::from_phi(m, TABLE1_PHI)?, TABLE1_T, u_max))
        .collect::<Result<_, _>>()?;
    TABLE1_U
        .iter()
        .map(|&u| {
            let exponential = approx[0].nonruin(u)?;
            let exact = exact_nonruin_exponential(TABLE1_PHI, 1.0, u);
            Ok(Table1Row {
                u,
                exponential,
                gamma: approx[1].nonruin(u)?,
                mixture: approx[2].nonruin(u)?,
                exact_exponential: exact,
                abs_dev: (exponential - exact).abs(),
            })
        })
        .collect()
}

const TABLE1_HEADER: [&str; 6] = ["u", "exponential", "gamma_1.5", "mixture", "exact_exponential", "abs_dev"];

pub fn table1_markdown(rows: &[Table1Row]) -> String {
    let mut s = String::from("| u | Exponential claims | Gamma alpha=3/2 claims | Mixture | Exact (exponential) | abs dev |\n");
    s.push_str("|---:|---:|---:|---:|---:|---:|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.1e} |\n",
            r.u, r.exponential, r.gamma, r.mixture, r.exact_exponential, r.abs_dev
        ));
    }
    s
}

pub fn table1_csv(rows: &[Table1Row]) -> String {
    csv(
        &TABLE1_HEADER,
        rows.iter().map(|r| {
            [r.u, r.exponential, r.gamma, r.mixture, r.exact_exponential, r.abs_dev].iter().map(|&x| num(x)).collect()
        }),
    )
}

pub fn cmd_table1(format: Option<Format>, output: &OutputArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let rows = table1_rows()?;
    let format = format.unwrap_or(if output.out.is_some() { Format::Csv } else { Format::Md });
    let text = match format {
        Format::Md => table1_markdown(&rows),
        Format::Csv => table1_csv(&rows),
        Format::Json => serde_json::to_string_pretty(&rows).expect("plain data") + "\n",
    };
    emit(output, &text, stdout)?;
    let worst = rows.iter().map(|r| r.abs_dev).fold(0.0, f64::max);
    if worst > TABLE1_EXIT_TOL {
        return Err(CliError::Numerical(format!(
            "exponential column deviates from the exact non-ruin probability by {worst:e}"
        )));
    }
    Ok(())
}

pub fn ruin_csv(spec: &MixtureSpec, phi: f64, t: f64, u_max: f64) -> CliResult<String> {
    positive("t", t)?;
    positive("u-max", u_max)?;
    let model = RiskModel::from_phi(spec.mixture()?, phi)?;
    let a = approximate_nonruin(&model, t, u_max)?;
    let rows = a.lattice().points().zip(a.lstar_lattice().values()).map(|((u, p), &l)| {
        vec![num(u), num(p), num(1.0 - p), num(l)]
    });
    Ok(csv(&["u", "nonruin_M2", "ruin_M2", "nonruin_L"], rows))
}

struct Target {
    oracle: Arc<dyn TransformOracle>,
    g0: f64,
    exact: Option<Box<dyn Fn(f64) -> f64>>,
}

fn target(transform: TransformId, param: Option<f64>, spec: Option<&Path>) -> CliResult<Target> {
    let need = |name: &str| param.ok_or_else(|| CliError::Usage(format!("--param ({name}) is required for this transform")));
    Ok(match transform {
        TransformId::ExpDecay => {
            let a = need("a")?;
            if !(a >= 0.0 && a.is_finite()) {
                return Err(CliError::Usage(format!("exp_decay needs a >= 0, got {a}")));
            }
            Target { oracle: Arc::new(ExpDecay { a }), g0: 1.0, exact: Some(Box::new(move |u| (-a * u).exp())) }
        }
        TransformId::TestFunction => {
            let p = need("p")?;
            if !(p > 0.0 && p < 1.0) {
                return Err(CliError::Usage(format!("test_function needs 0 < p < 1, got {p}")));
            }
            let oracle = LinearCombination::new()
                .with(1.0, Arc::new(Constant(1.0)))
                .with(-(1.0 - p), Arc::new(ExpDecay { a: p }));
            Target { oracle: Arc::new(oracle), g0: p, exact: Some(Box::new(move |u| 1.0 - (1.0 - p) * (-p * u).exp())) }
        }
        TransformId::GammaMixture => {
            let path = spec.ok_or_else(|| CliError::Usage("--spec is required for gamma_mixture".into()))?;
            let mix = MixtureSpec::load(path)?.mixture()?;
            let oracle = Cdf::new(Arc::new(MixtureLst::new(mix.clone())));
            Target { oracle: Arc::new(oracle), g0: 0.0, exact: Some(Box::new(move |u| mix.cdf(u))) }
        }
    })
}

pub fn invert_csv(
    transform: TransformId,
    param: Option<f64>,
    spec: Option<&Path>,
    method: Method,
    t: f64,
    us: &[f64],
) -> CliResult<String> {
    positive("t", t)?;
    if let Some(u) = us.iter().find(|u| !(**u >= 0.0 && u.is_finite())) {
        return Err(CliError::Usage(format!("evaluation points must be finite and nonnegative, got {u}")));
    }
    let tg = target(transform, param, spec)?;
    let order = || -> CliResult<usize> {
        if t.fract() != 0.0 {
            return Err(CliError::Usage(format!("Post-Widder order must be an integer, got {t}")));
        }
        Ok(t as usize)
    };
    let u_max = us.iter().copied().fold(0.0, f64::max);
    let k_max = (t * u_max).ceil() as usize;
    let values: Vec<f64> = match method {
        Method::Lstar => {
            let lf = l_star_lattice(tg.oracle.as_ref(), t, k_max)?;
            us.iter().map(|&u| lf.at(u)).collect::<Result<_, _>>()?
        }
        Method::M2 => {
            let lf = m2_lattice(tg.oracle.as_ref(), t, k_max.max(1), tg.g0)?;
            us.iter().map(|&u| lf.at(u)).collect::<Result<_, _>>()?
        }
        Method::Postwidder => {
            let n = order()?;
            us.iter().map(|&u| post_widder(tg.oracle.as_ref(), n, u)).collect::<Result<_, _>>()?
        }
        Method::Stehfest2 => {
            let n = order()?;
            us.iter().map(|&u| stehfest2(tg.oracle.as_ref(), n, u)).collect::<Result<_, _>>()?
        }
    };
    let rows = us.iter().zip(values).map(|(&u, v)| match &tg.exact {
        Some(g) => {
            let e = g(u);
            vec![num(u), num(v), num(e), num((v - e).abs())]
        }
        None => vec![num(u), num(v), String::new(), String::new()],
    });
    Ok(csv(&["u", "value", "exact", "abs_error"], rows))
}

/// JSON body of the `bound` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct BoundOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub phi: f64,
    pub t: f64,
    pub integrals: I2Mode,
    #[serde(flatten)]
    pub ledger: NormLedger,
    #[serde(flatten)]
    pub report: BoundReport,
    pub total_bound: f64,
}

pub fn bound_output(spec: &MixtureSpec, phi: f64, t: f64, mode: I2Mode) -> CliResult<BoundOutput> {
    positive("t", t)?;
    let model = RiskModel::from_phi(spec.mixture()?, phi)?;
    let (ledger, report) = bound_report(&model, mode)?;
    Ok(BoundOutput { name: spec.name.clone(), phi, t, integrals: mode, ledger, report, total_bound: report.total_bound(t) })
}

/// `(t, sup_error, order)` rows; `order` compares each rate with the previous one.
pub fn convergence_rows(spec: &MixtureSpec, phi: f64, t_list: &[f64], u_max: f64) -> CliResult<Vec<(f64, f64, Option<f64>)>> {
    positive("u-max", u_max)?;
    if t_list.is_empty() {
        return Err(CliError::Usage("--t-list needs at least one rate".into()));
    }
    for &t in t_list {
        positive("t-list", t)?;
    }
    let model = RiskModel::from_phi(spec.mixture()?, phi)?;
    let reference: Box<dyn Fn(f64) -> CliResult<f64>> = match spec.exponential_rate() {
        Some(beta) => Box::new(move |u| Ok(exact_nonruin_exponential(phi, beta, u))),
        None => {
            let t_ref = 8.0 * t_list.iter().copied().fold(0.0, f64::max);
            let r = approximate_nonruin(&model, t_ref, u_max)?;
            Box::new(move |u| Ok(r.nonruin(u)?))
        }
    };
    let mut rows = Vec::with_capacity(t_list.len());
    let mut prev: Option<(f64, f64)> = None;
    for &t in t_list {
        let a = approximate_nonruin(&model, t, u_max)?;
        let mut err: f64 = 0.0;
        for (u, v) in a.lattice().points().filter(|(u, _)| *u <= u_max * (1.0 + 1e-12)) {
            err = err.max((v - reference(u)?).abs());
        }
        let order = prev.map(|(tp, ep)| (ep / err).ln() / (t / tp).ln());
        rows.push((t, err, order));
        prev = Some((t, err));
    }
    Ok(rows)
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Table1 { format, output } => cmd_table1(format, &output, stdout),
        Command::Ruin { spec, phi, t, u_max, output } => {
            let spec = MixtureSpec::load(&spec)?;
            emit(&output, &ruin_csv(&spec, phi, t, u_max)?, stdout)
        }
        Command::Invert { transform, param, spec, method, t, u, output } => {
            emit(&output, &invert_csv(transform, param, spec.as_deref(), method, t, &u)?, stdout)
        }
        Command::Bound { spec, phi, t, integrals, output } => {
            let spec = MixtureSpec::load(&spec)?;
            let body = bound_output(&spec, phi, t, integrals.into())?;
            emit(&output, &(serde_json::to_string_pretty(&body).expect("plain data") + "\n"), stdout)
        }
        Command::Convergence { spec, phi, t_list, u_max, output } => {
            let spec = MixtureSpec::load(&spec)?;
            let rows = convergence_rows(&spec, phi, &t_list, u_max)?;
            let text = csv(
                &["t", "sup_error", "order"],
                rows.into_iter().map(|(t, e, o)| vec![num(t), num(e), o.map(num).unwrap_or_default()]),
            );
            emit(&output, &text, stdout)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        let s = MixtureSpec::parse(r#"{"components":[{"p":1,"alpha":1,"beta":2}],"name":"exp"}"#).unwrap();
        assert_eq!(s.exponential_rate(), Some(2.0));
        assert!(MixtureSpec::parse(r#"{"components":[{"p":1,"alpha":0,"beta":1}]}"#).is_err());
        assert!(MixtureSpec::parse(r#"{"components":[{"p":1,"alpha":1,"beta":-1}]}"#).is_err());
        assert!(MixtureSpec::parse(r#"{"components":[{"p":0.5,"alpha":1,"beta":1}]}"#).is_err());
        assert!(MixtureSpec::parse(r#"{"components":[]}"#).is_err());
        assert!(MixtureSpec::parse("not json").is_err());
        let two = MixtureSpec::parse(
            r#"{"components":[{"p":0.5,"alpha":1,"beta":1},{"p":0.5,"alpha":1.5,"beta":1}]}"#,
        )
        .unwrap();
        assert_eq!(two.exponential_rate(), None);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 0.185_642_111_111_111_1, 1e-300, 12345.678] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn error_mapping() {
        assert_eq!(CliError::from(renewinv_core::Error::Admissibility("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(renewinv_core::Error::NegativeWeight { index: 1, value: -1.0 }).exit_code(), 4);
        assert_eq!(CliError::from(renewinv_core::Error::Domain("x".into())).exit_code(), 2);
    }

    #[test]
    fn invert_examples() {
        let out = invert_csv(TransformId::TestFunction, Some(0.1), None, Method::M2, 5.0, &[1.0]).unwrap();
        let v: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 0.185_642).abs() < 1e-6);
        let out = invert_csv(TransformId::ExpDecay, Some(0.0), None, Method::Lstar, 5.0, &[0.0, 0.7, 3.0]).unwrap();
        for line in out.lines().skip(1) {
            let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((v - 1.0).abs() < 1e-14);
        }
        let out = invert_csv(TransformId::ExpDecay, Some(1.0), None, Method::Postwidder, 10.0, &[1.0]).unwrap();
        let v: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 1.1f64.powi(-10)).abs() < 1e-14);
        assert!(invert_csv(TransformId::ExpDecay, Some(1.0), None, Method::Postwidder, 2.5, &[1.0]).is_err());
        assert!(invert_csv(TransformId::ExpDecay, None, None, Method::Lstar, 5.0, &[1.0]).is_err());
    }

    #[test]
    fn convergence_single_rate_has_no_order() {
        let spec = MixtureSpec::from_mixture(&GammaMixture::exponential(1.0).unwrap(), None);
        let rows = convergence_rows(&spec, 0.9, &[5.0], 40.0).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].1 > 0.0 && rows[0].2.is_none());
    }
}

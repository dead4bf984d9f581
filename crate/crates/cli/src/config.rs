//! Problem configuration: JSON parsing, defaults and validation.

use std::sync::Arc;

use delaykit::heatdelay::{HeatProblem, SpectralConfig};
use delaykit::{DelaySystem, Matrix, Method, TruncationPolicy, Vector};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;
use crate::expr::{Expr, Var};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_QUAD_POINTS: usize = 16;
pub const DEFAULT_MODES: usize = 64;
pub const DEFAULT_X_POINTS: usize = 33;
/// Default step as a fraction of τ.
pub const DEFAULT_STEPS_PER_DELAY: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Fundsol,
    Ivp,
    Heat,
    Verify,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Fundsol => "fundsol",
            Kind::Ivp => "ivp",
            Kind::Heat => "heat",
            Kind::Verify => "verify",
        }
    }

    fn parse(s: &str) -> Option<Kind> {
        match s {
            "fundsol" => Some(Kind::Fundsol),
            "ivp" => Some(Kind::Ivp),
            "heat" => Some(Kind::Heat),
            "verify" => Some(Kind::Verify),
            _ => None,
        }
    }
}

/// Command-line values that replace scalar config fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub modes: Option<usize>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FundsolMethod {
    PureDelayed,
    Permutable,
    Nonpermutable,
    DysonPhillips,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvpMethod {
    #[default]
    Formula,
    FormulaC1,
    Steps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatMethod {
    #[default]
    Spectral,
    SpectralC1,
    Fd,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t_start: f64,
    t_end: f64,
    n_points: usize,
    #[serde(default)]
    x_points: Option<usize>,
}

/// One expression or a list of them.
#[derive(Debug, Clone)]
struct ExprList(Vec<String>);

impl<'de> Deserialize<'de> for ExprList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ExprList;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an expression string or an array of expression strings")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<ExprList, E> {
                Ok(ExprList(vec![s.to_string()]))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<ExprList, A::Error> {
                let mut out = Vec::new();
                while let Some(s) = seq.next_element::<String>()? {
                    out.push(s);
                }
                Ok(ExprList(out))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFundsol {
    #[serde(rename = "A0")]
    a0: Vec<Vec<f64>>,
    #[serde(rename = "A1")]
    a1: Vec<Vec<f64>>,
    tau: f64,
    grid: RawGrid,
    #[serde(default)]
    method: Option<FundsolMethod>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    quad_points: Option<usize>,
    #[serde(default)]
    k_max: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIvp {
    #[serde(rename = "A0")]
    a0: Vec<Vec<f64>>,
    #[serde(rename = "A1")]
    a1: Vec<Vec<f64>>,
    tau: f64,
    phi: ExprList,
    #[serde(default)]
    g: Option<ExprList>,
    grid: RawGrid,
    #[serde(default)]
    method: Option<IvpMethod>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeat {
    a: f64,
    b: f64,
    tau: f64,
    phi: String,
    #[serde(default)]
    psi: Option<String>,
    grid: RawGrid,
    #[serde(default)]
    method: Option<HeatMethod>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    n_modes: Option<usize>,
    #[serde(default)]
    quad_points_x: Option<usize>,
    #[serde(default)]
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {}

/// Output time grid, and for heat problems the number of spatial points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
    pub x_points: Option<usize>,
}

impl Grid {
    pub fn times(&self) -> Vec<f64> {
        linspace(self.t_start, self.t_end, self.n_points)
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FundsolConfig {
    pub a0: Matrix,
    pub a1: Matrix,
    pub tau: f64,
    pub grid: Grid,
    pub method: Method,
    pub policy: TruncationPolicy,
}

#[derive(Debug, Clone)]
pub struct IvpConfig {
    pub a0: Matrix,
    pub a1: Matrix,
    pub tau: f64,
    pub phi: Vec<Expr>,
    pub g: Option<Vec<Expr>>,
    pub grid: Grid,
    pub method: IvpMethod,
    pub tol: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct HeatConfig {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub phi: Expr,
    pub psi: Option<Expr>,
    pub grid: Grid,
    pub x_points: usize,
    pub method: HeatMethod,
    pub spectral: SpectralConfig,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub enum ProblemConfig {
    Fundsol(FundsolConfig),
    Ivp(IvpConfig),
    Heat(HeatConfig),
    Verify,
}

impl ProblemConfig {
    pub fn kind(&self) -> Kind {
        match self {
            ProblemConfig::Fundsol(_) => Kind::Fundsol,
            ProblemConfig::Ivp(_) => Kind::Ivp,
            ProblemConfig::Heat(_) => Kind::Heat,
            ProblemConfig::Verify => Kind::Verify,
        }
    }
}

fn typed<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(
            if path == "." { String::new() } else { path },
            e.into_inner().to_string(),
        )
    })
}

/// Parses a JSON config. `expected` is the subcommand, which must agree with
/// the document's `kind` when both are present.
pub fn parse_config(
    text: &str,
    expected: Option<Kind>,
    ov: &Overrides,
) -> Result<ProblemConfig, CliError> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::config("", format!("malformed JSON: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::config("", "top level must be a JSON object"))?;
    let kind = match obj.remove("kind") {
        None => expected.ok_or_else(|| CliError::config("kind", "missing field"))?,
        Some(Value::String(s)) => Kind::parse(&s)
            .ok_or_else(|| CliError::config("kind", format!("unknown kind '{s}'")))?,
        Some(_) => return Err(CliError::config("kind", "must be a string")),
    };
    if let Some(e) = expected {
        if e != kind {
            return Err(CliError::config(
                "kind",
                format!(
                    "config is for '{}' but the '{}' subcommand was run",
                    kind.name(),
                    e.name()
                ),
            ));
        }
    }
    check_overrides(kind, ov)?;
    match kind {
        Kind::Fundsol => fundsol(typed(value)?, ov).map(ProblemConfig::Fundsol),
        Kind::Ivp => ivp(typed(value)?, ov).map(ProblemConfig::Ivp),
        Kind::Heat => heat(typed(value)?, ov).map(ProblemConfig::Heat),
        Kind::Verify => typed::<RawVerify>(value).map(|_| ProblemConfig::Verify),
    }
}

fn check_overrides(kind: Kind, ov: &Overrides) -> Result<(), CliError> {
    let reject = |flag: &str| {
        Err(CliError::Usage(format!(
            "{flag} does not apply to '{}' problems",
            kind.name()
        )))
    };
    if ov.tol.is_some() && kind == Kind::Verify {
        return reject("--tol");
    }
    if ov.modes.is_some() && kind != Kind::Heat {
        return reject("--modes");
    }
    if ov.step.is_some() && !matches!(kind, Kind::Ivp | Kind::Heat) {
        return reject("--step");
    }
    Ok(())
}

fn matrix(rows: &[Vec<f64>], key: &str) -> Result<Matrix, CliError> {
    if rows.is_empty() {
        return Err(CliError::config(key, "matrix must have at least one row"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != rows.len() {
            return Err(CliError::config(
                format!("{key}[{i}]"),
                format!(
                    "row has {} entries but {key} has {} rows",
                    r.len(),
                    rows.len()
                ),
            ));
        }
    }
    Matrix::from_rows(rows).map_err(|e| CliError::config(key, e.to_string()))
}

fn pair(a0: &[Vec<f64>], a1: &[Vec<f64>]) -> Result<(Matrix, Matrix), CliError> {
    let (m0, m1) = (matrix(a0, "A0")?, matrix(a1, "A1")?);
    if m0.dim() != m1.dim() {
        return Err(CliError::config(
            "A1",
            format!(
                "A1 is {d1}x{d1} but A0 is {d0}x{d0}",
                d0 = m0.dim(),
                d1 = m1.dim()
            ),
        ));
    }
    Ok((m0, m1))
}

fn positive(v: f64, key: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be positive, got {v}")))
    }
}

fn grid(raw: RawGrid, heat: bool) -> Result<Grid, CliError> {
    if raw.n_points == 0 {
        return Err(CliError::config("grid.n_points", "must be at least 1"));
    }
    if raw.n_points == 1 && raw.t_end != raw.t_start {
        return Err(CliError::config(
            "grid.n_points",
            "a single point needs t_end = t_start",
        ));
    }
    if raw.t_end < raw.t_start {
        return Err(CliError::config(
            "grid.t_end",
            "must not be below grid.t_start",
        ));
    }
    if raw.x_points.is_some() && !heat {
        return Err(CliError::config(
            "grid.x_points",
            "only heat problems have a spatial grid",
        ));
    }
    if matches!(raw.x_points, Some(n) if n < 2) {
        return Err(CliError::config("grid.x_points", "must be at least 2"));
    }
    Ok(Grid {
        t_start: raw.t_start,
        t_end: raw.t_end,
        n_points: raw.n_points,
        x_points: raw.x_points,
    })
}

fn check_start(grid: &Grid, lower: f64, why: &str) -> Result<(), CliError> {
    if grid.t_start < lower {
        return Err(CliError::config(
            "grid.t_start",
            format!("must be at least {lower} {why}, got {}", grid.t_start),
        ));
    }
    Ok(())
}

/// `h` with τ/h an integer.
fn step(raw: Option<f64>, ov: Option<f64>, tau: f64) -> Result<f64, CliError> {
    let h = match ov.or(raw) {
        Some(h) => positive(h, "step")?,
        None => return Ok(tau / DEFAULT_STEPS_PER_DELAY),
    };
    let ratio = tau / h;
    if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return Err(CliError::config(
            "step",
            format!("tau / step must be an integer, got {ratio}"),
        ));
    }
    Ok(h)
}

fn parse_expr(src: &str, vars: &[Var], key: &str) -> Result<Expr, CliError> {
    Expr::parse(src, vars).map_err(|e| CliError::config(key, format!("'{src}': {e}")))
}

fn fundsol(raw: RawFundsol, ov: &Overrides) -> Result<FundsolConfig, CliError> {
    let (a0, a1) = pair(&raw.a0, &raw.a1)?;
    let tau = positive(raw.tau, "tau")?;
    let tol = positive(ov.tol.or(raw.tol).unwrap_or(DEFAULT_TOL), "tol")?;
    let defaults = TruncationPolicy::default();
    let quad_points = raw.quad_points.unwrap_or(DEFAULT_QUAD_POINTS);
    if quad_points < 2 {
        return Err(CliError::config("quad_points", "must be at least 2"));
    }
    let k_max = raw.k_max.unwrap_or(defaults.k_max);
    if k_max < 1 {
        return Err(CliError::config("k_max", "must be at least 1"));
    }
    let policy = TruncationPolicy::new(tol, k_max, quad_points)
        .map_err(|e| CliError::config("", e.to_string()))?;
    let method = match raw.method.unwrap_or(FundsolMethod::Nonpermutable) {
        FundsolMethod::PureDelayed => Method::PureDelayed,
        FundsolMethod::Permutable => Method::Permutable,
        FundsolMethod::Nonpermutable => Method::NonPermutable,
        FundsolMethod::DysonPhillips => Method::DysonPhillips,
    };
    Ok(FundsolConfig {
        a0,
        a1,
        tau,
        grid: grid(raw.grid, false)?,
        method,
        policy,
    })
}

fn expr_list(list: &ExprList, key: &str, dim: usize) -> Result<Vec<Expr>, CliError> {
    if list.0.len() != dim {
        return Err(CliError::config(
            key,
            format!(
                "{key} has {} components but A0 is {dim}x{dim}",
                list.0.len()
            ),
        ));
    }
    list.0
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let path = if list.0.len() == 1 {
                key.to_string()
            } else {
                format!("{key}[{i}]")
            };
            parse_expr(s, &[Var::T], &path)
        })
        .collect()
}

fn ivp(raw: RawIvp, ov: &Overrides) -> Result<IvpConfig, CliError> {
    let (a0, a1) = pair(&raw.a0, &raw.a1)?;
    let dim = a0.dim();
    let tau = positive(raw.tau, "tau")?;
    let phi = expr_list(&raw.phi, "phi", dim)?;
    let g = raw.g.as_ref().map(|g| expr_list(g, "g", dim)).transpose()?;
    let method = raw.method.unwrap_or_default();
    let grid = grid(raw.grid, false)?;
    match method {
        IvpMethod::FormulaC1 => {
            if g.is_some() {
                return Err(CliError::config(
                    "method",
                    "formula_c1 does not accept a forcing term g",
                ));
            }
            check_start(&grid, -tau, "for formula_c1")?;
        }
        _ => check_start(&grid, 0.0, "for this method")?,
    }
    Ok(IvpConfig {
        a0,
        a1,
        tau,
        phi,
        g,
        grid,
        method,
        tol: positive(ov.tol.or(raw.tol).unwrap_or(DEFAULT_TOL), "tol")?,
        step: step(raw.step, ov.step, tau)?,
    })
}

fn heat(raw: RawHeat, ov: &Overrides) -> Result<HeatConfig, CliError> {
    let a = positive(raw.a, "a")?;
    if !raw.b.is_finite() {
        return Err(CliError::config("b", "must be finite"));
    }
    let tau = positive(raw.tau, "tau")?;
    let phi = parse_expr(&raw.phi, &[Var::T, Var::X], "phi")?;
    let psi = raw
        .psi
        .as_deref()
        .map(|s| parse_expr(s, &[Var::T, Var::X], "psi"))
        .transpose()?;
    let method = raw.method.unwrap_or_default();
    let grid = grid(raw.grid, true)?;
    let x_points = grid.x_points.unwrap_or(DEFAULT_X_POINTS);
    let step = step(raw.step, ov.step, tau)?;
    match method {
        HeatMethod::SpectralC1 => check_start(&grid, -tau, "for spectral_c1")?,
        HeatMethod::Spectral => check_start(&grid, 0.0, "for this method")?,
        HeatMethod::Fd => {
            check_start(&grid, 0.0, "for this method")?;
            if x_points < 10 {
                return Err(CliError::config(
                    "grid.x_points",
                    "fd needs at least 10 points",
                ));
            }
            for (i, t) in grid.times().iter().enumerate() {
                let k = t / step;
                if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                    return Err(CliError::config(
                        "grid",
                        format!("time {i} ({t}) is not a multiple of the fd step {step}"),
                    ));
                }
            }
        }
    }
    let n_modes = ov.modes.or(raw.n_modes).unwrap_or(DEFAULT_MODES);
    if n_modes == 0 {
        return Err(CliError::config("n_modes", "must be at least 1"));
    }
    let defaults = SpectralConfig::default();
    let quad_points_x = raw.quad_points_x.unwrap_or(defaults.quad_points_x);
    if quad_points_x == 0 {
        return Err(CliError::config("quad_points_x", "must be at least 1"));
    }
    let spectral = SpectralConfig {
        n_modes,
        quad_points_x,
        time_tol: positive(ov.tol.or(raw.tol).unwrap_or(DEFAULT_TOL), "tol")?,
        ..defaults
    };
    Ok(HeatConfig {
        a,
        b: raw.b,
        tau,
        phi,
        psi,
        grid,
        x_points,
        method,
        spectral,
        step,
    })
}

fn vector_fn(exprs: &[Expr]) -> impl Fn(f64) -> Vector + Send + Sync + 'static {
    let exprs: Arc<[Expr]> = exprs.into();
    move |t| {
        let v: Vec<f64> = exprs.iter().map(|e| e.eval(t, 0.0)).collect();
        // non-finite values surface as non-finite results
        Vector::from_slice(&v).unwrap_or_else(|_| Vector::zeros(v.len()).scale(f64::NAN))
    }
}

impl IvpConfig {
    pub fn system(&self) -> Result<DelaySystem, CliError> {
        let build = || -> delaykit::Result<DelaySystem> {
            let mut sys = DelaySystem::new(
                self.a0.clone(),
                self.a1.clone(),
                self.tau,
                vector_fn(&self.phi),
            )?;
            if self.method == IvpMethod::FormulaC1 {
                let d: Vec<Expr> = self.phi.iter().map(|e| e.derivative(Var::T)).collect();
                sys = sys.with_history_derivative(vector_fn(&d))?;
            }
            if let Some(g) = &self.g {
                sys = sys.with_forcing(vector_fn(g))?;
            }
            Ok(sys)
        };
        build().map_err(|e| CliError::config("phi", e.to_string()))
    }
}

impl HeatConfig {
    pub fn problem(&self) -> Result<HeatProblem, CliError> {
        let phi = self.phi.clone();
        let mut p = HeatProblem::new(self.a, self.b, self.tau, move |x, t| phi.eval(t, x))
            .map_err(|e| CliError::config("phi", e.to_string()))?;
        if self.method == HeatMethod::SpectralC1 {
            let d = self.phi.derivative(Var::T);
            p = p.with_history_time_derivative(move |x, t| d.eval(t, x));
        }
        if let Some(psi) = self.psi.clone() {
            p = p.with_forcing(move |x, t| psi.eval(t, x));
        }
        Ok(p)
    }
}

//! Run configuration: command-line flags layered over a flat `key = value` file.
//!
//! File syntax, one setting per line:
//!
//! ```text
//! # torus gluing at a larger mode budget
//! geometry = torus
//! L1 = 2
//! L2 = 6.283185307
//! m = 1
//! k_max = 512
//! ```
//!
//! Keys use underscores (`k_max`); the matching flags use hyphens (`--k-max`).
//! A flag always wins over the file. Unknown keys are rejected by name.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use detglue_core::spectral_models::{BoundaryConditionKind, ModelGeometry};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Env var naming the default output directory.
pub const OUT_DIR_ENV: &str = "DETGLUE_OUT_DIR";

/// Every key accepted in a config file, in echo order.
pub const KEYS: &[&str] = &[
    "command",
    "geometry",
    "L",
    "m",
    "bc",
    "L1",
    "L2",
    "t",
    "d",
    "k_max",
    "n_max",
    "tol",
    "h",
    "lambda_min",
    "lambda_max",
    "points",
    "t_min",
    "t_max",
    "heat_terms",
    "t_grid",
    "check",
    "family",
    "b",
    "q",
    "j_max",
    "mode",
    "out_dir",
    "name",
    "format",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Zeta-regularized log-determinant of one operator.
    Det,
    /// The three determinants of the gluing formula and the constant `log c`.
    Glue,
    /// Large-parameter fit of a log-determinant family.
    Asymfit,
    /// Parametrix terms and contour integrals of the symbol `xi^2 + lambda + b xi + q`.
    Symbols,
    /// Small-time heat-trace coefficients and a Mellin cross-check.
    Heat,
    /// One of the identity checks, selected with `check`.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Det => "det",
            Command::Glue => "glue",
            Command::Asymfit => "asymfit",
            Command::Symbols => "symbols",
            Command::Heat => "heat",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `logDet(A^d + t^d) - logDet(A_B^d + t^d) - sum logDet R` is flat in `t`.
    Constancy,
    /// t-derivative of the left side against the resolvent trace on the cut.
    CutTrace,
    /// `d/dt logDet Q(t) = tr(Q^-1 Q')`.
    LogDerivative,
    /// `logDet(A^d) = d logDet A`.
    Power,
    /// Triangular DtN system against the diagonal sum.
    Triangular,
    /// `log c` from the constant term of the DtN family.
    Pi0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `lambda -> logDet(A + lambda)`.
    Spectrum,
    /// `t -> sum_k logDet R(alpha_k t)` on the cut.
    Dtn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Par,
    Seq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub k_max: u64,
    pub n_max: u64,
    pub points: usize,
    pub heat_terms: usize,
    pub j_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Continuation tolerance of the zeta engine.
    pub tol: f64,
    /// Finite-difference step.
    pub h: f64,
}

/// Symbol `xi^2 + lambda + b xi + q` with rational constants `(num, den)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolOperator {
    pub b: (i64, i64),
    pub q: (i64, i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    /// Not echoed: two runs into different directories still produce equal files.
    #[serde(skip)]
    pub dir: PathBuf,
    pub name: String,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub geometry: Option<ModelGeometry>,
    pub t: Option<f64>,
    pub d: Option<usize>,
    pub check: Check,
    pub family: Family,
    pub operator: SymbolOperator,
    pub budgets: Budgets,
    pub grids: Grids,
    pub tolerances: Tolerances,
    pub mode: ExecMode,
    pub output: Output,
}

#[derive(Debug, Parser)]
#[command(
    name = "detglue",
    version,
    about = "Zeta-regularized determinants and the gluing formula"
)]
struct Args {
    #[arg(value_enum)]
    command: Option<Command>,
    /// Config file of `key = value` lines.
    #[arg(allow_hyphen_values = true, long)]
    config: Option<PathBuf>,
    /// circle | interval | torus
    #[arg(allow_hyphen_values = true, long)]
    geometry: Option<String>,
    /// Circle circumference or interval length.
    #[arg(allow_hyphen_values = true, long = "L")]
    length: Option<String>,
    /// Mass term `m^2`.
    #[arg(allow_hyphen_values = true, long)]
    m: Option<String>,
    /// Interval boundary condition: dirichlet | neumann
    #[arg(allow_hyphen_values = true, long)]
    bc: Option<String>,
    /// Torus length transverse to the cut.
    #[arg(allow_hyphen_values = true, long = "L1")]
    l1: Option<String>,
    /// Torus length along the cut.
    #[arg(allow_hyphen_values = true, long = "L2")]
    l2: Option<String>,
    /// Spectral parameter.
    #[arg(allow_hyphen_values = true, long)]
    t: Option<String>,
    /// Operator power.
    #[arg(allow_hyphen_values = true, long)]
    d: Option<String>,
    /// Transverse mode budget.
    #[arg(allow_hyphen_values = true, long = "k-max")]
    k_max: Option<String>,
    /// Largest eigenvalue index summed before the tail is continued.
    #[arg(allow_hyphen_values = true, long = "n-max")]
    n_max: Option<String>,
    #[arg(allow_hyphen_values = true, long)]
    tol: Option<String>,
    /// Finite-difference step.
    #[arg(allow_hyphen_values = true, long)]
    h: Option<String>,
    #[arg(allow_hyphen_values = true, long = "lambda-min")]
    lambda_min: Option<String>,
    #[arg(allow_hyphen_values = true, long = "lambda-max")]
    lambda_max: Option<String>,
    /// Grid points of a fit.
    #[arg(allow_hyphen_values = true, long)]
    points: Option<String>,
    #[arg(allow_hyphen_values = true, long = "t-min")]
    t_min: Option<String>,
    #[arg(allow_hyphen_values = true, long = "t-max")]
    t_max: Option<String>,
    /// Number of half-integer heat exponents, starting at -dim/2.
    #[arg(allow_hyphen_values = true, long = "heat-terms")]
    heat_terms: Option<String>,
    /// Comma-separated t values.
    #[arg(allow_hyphen_values = true, long = "t-grid")]
    t_grid: Option<String>,
    /// constancy | cut-trace | log-derivative | power | triangular | pi0
    #[arg(allow_hyphen_values = true, long)]
    check: Option<String>,
    /// spectrum | dtn
    #[arg(allow_hyphen_values = true, long)]
    family: Option<String>,
    /// Coefficient of `xi` in the symbol, rational.
    #[arg(allow_hyphen_values = true, long)]
    b: Option<String>,
    /// Zeroth-order term of the symbol, rational.
    #[arg(allow_hyphen_values = true, long)]
    q: Option<String>,
    /// Highest parametrix grading.
    #[arg(allow_hyphen_values = true, long = "j-max")]
    j_max: Option<String>,
    /// par | seq
    #[arg(allow_hyphen_values = true, long)]
    mode: Option<String>,
    #[arg(allow_hyphen_values = true, long = "out-dir")]
    out_dir: Option<String>,
    /// Stem of the output files; defaults to the command name.
    #[arg(allow_hyphen_values = true, long)]
    name: Option<String>,
    /// json | csv | both
    #[arg(allow_hyphen_values = true, long)]
    format: Option<String>,
}

impl Args {
    fn pairs(self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("command", self.command.map(|c| c.name().to_string())),
            ("geometry", self.geometry),
            ("L", self.length),
            ("m", self.m),
            ("bc", self.bc),
            ("L1", self.l1),
            ("L2", self.l2),
            ("t", self.t),
            ("d", self.d),
            ("k_max", self.k_max),
            ("n_max", self.n_max),
            ("tol", self.tol),
            ("h", self.h),
            ("lambda_min", self.lambda_min),
            ("lambda_max", self.lambda_max),
            ("points", self.points),
            ("t_min", self.t_min),
            ("t_max", self.t_max),
            ("heat_terms", self.heat_terms),
            ("t_grid", self.t_grid),
            ("check", self.check),
            ("family", self.family),
            ("b", self.b),
            ("q", self.q),
            ("j_max", self.j_max),
            ("mode", self.mode),
            ("out_dir", self.out_dir),
            ("name", self.name),
            ("format", self.format),
        ]
    }
}

/// Parses `key = value` lines. Keys may be written with hyphens.
pub fn parse_file_text(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                origin.display(),
                n + 1
            )));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::key(
                &key,
                format!("unknown key ({}:{})", origin.display(), n + 1),
            ));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_file_text(&text, path)
}

/// Flags in `args` (first element is the program name) over the optional
/// file; `--config` on the command line replaces `file`.
pub fn parse_config<I, T>(args: I, file: Option<&Path>) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_dir = std::env::var(OUT_DIR_ENV).ok().filter(|s| !s.is_empty());
    parse_config_with(args, file, env_dir.as_deref())
}

/// [`parse_config`] with the environment's default output directory passed in.
pub fn parse_config_with<I, T>(
    args: I,
    file: Option<&Path>,
    default_out_dir: Option<&str>,
) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Help(e.to_string())
        }
        _ => {
            let text = e.to_string();
            CliError::Config(text.trim_start_matches("error: ").trim_end().to_string())
        }
    })?;
    let file = args.config.clone().or_else(|| file.map(Path::to_path_buf));
    let mut map = match &file {
        Some(p) => read_file(p)?,
        None => BTreeMap::new(),
    };
    for (k, v) in args.pairs() {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    resolve(&map, default_out_dir)
}

struct Lookup<'a>(&'a BTreeMap<String, String>);

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::key(key, format!("expected {what}, got `{v}`")))
            })
            .transpose()
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        let v = self.parse::<f64>(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(CliError::key(key, "must be finite")),
            _ => Ok(v),
        }
    }

    fn required_float(&self, key: &str, geometry: &str) -> Result<f64> {
        self.float(key)?
            .ok_or_else(|| CliError::key(key, format!("required for geometry {geometry}")))
    }

    fn positive_float(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.float(key)?.unwrap_or(default);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::key(key, format!("must be positive, got {v}")))
        }
    }

    fn positive_int(&self, key: &str, default: u64) -> Result<u64> {
        let v = self
            .parse::<u64>(key, "a nonnegative integer")?
            .unwrap_or(default);
        if v == 0 {
            return Err(CliError::key(key, "must be positive"));
        }
        Ok(v)
    }

    fn choice<T: Copy>(&self, key: &str, default: T, options: &[(&str, T)]) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => options
                .iter()
                .find(|(name, _)| name.eq_ignore_ascii_case(v))
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    CliError::key(
                        key,
                        format!("expected one of {}, got `{v}`", names.join(" | ")),
                    )
                }),
        }
    }

    fn rational(&self, key: &str) -> Result<(i64, i64)> {
        let Some(v) = self.raw(key) else {
            return Ok((0, 1));
        };
        let bad = || CliError::key(key, format!("expected an integer or `num/den`, got `{v}`"));
        let (n, d) = match v.split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<i64>().map_err(|_| bad())?,
                d.trim().parse::<i64>().map_err(|_| bad())?,
            ),
            None => (v.parse::<i64>().map_err(|_| bad())?, 1),
        };
        if d == 0 {
            return Err(CliError::key(key, "zero denominator"));
        }
        Ok((n, d))
    }
}

fn resolve(map: &BTreeMap<String, String>, default_out_dir: Option<&str>) -> Result<RunConfig> {
    if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(CliError::key(k, "unknown key"));
    }
    let get = Lookup(map);
    let command = get.choice(
        "command",
        None,
        &[
            ("det", Some(Command::Det)),
            ("glue", Some(Command::Glue)),
            ("asymfit", Some(Command::Asymfit)),
            ("symbols", Some(Command::Symbols)),
            ("heat", Some(Command::Heat)),
            ("verify", Some(Command::Verify)),
        ],
    )?;
    let command = command.ok_or_else(|| CliError::key("command", "no command given"))?;

    let geometry = match get.raw("geometry") {
        None if command == Command::Symbols => None,
        None => {
            return Err(CliError::key(
                "geometry",
                format!("required for {}", command.name()),
            ))
        }
        Some(g) => Some(match g.to_ascii_lowercase().as_str() {
            "circle" => ModelGeometry::Circle {
                length: get.required_float("L", g)?,
                mass: get.required_float("m", g)?,
            },
            "interval" => ModelGeometry::Interval {
                length: get.required_float("L", g)?,
                mass: get.required_float("m", g)?,
                bc: get.choice(
                    "bc",
                    BoundaryConditionKind::Dirichlet,
                    &[
                        ("dirichlet", BoundaryConditionKind::Dirichlet),
                        ("neumann", BoundaryConditionKind::Neumann),
                    ],
                )?,
            },
            "torus" => ModelGeometry::TorusCut {
                l1: get.required_float("L1", g)?,
                l2: get.required_float("L2", g)?,
                mass: get.required_float("m", g)?,
            },
            other => {
                return Err(CliError::key(
                    "geometry",
                    format!("expected one of circle | interval | torus, got `{other}`"),
                ))
            }
        }),
    };

    let t = get.float("t")?;
    if let Some(t) = t {
        if t < 0.0 {
            return Err(CliError::key("t", format!("must be nonnegative, got {t}")));
        }
    }
    let d = match get.parse::<usize>("d", "a positive integer")? {
        Some(0) => return Err(CliError::key("d", "must be positive")),
        d => d,
    };

    let budgets = Budgets {
        k_max: get.positive_int("k_max", 512)?,
        n_max: get.positive_int("n_max", 10_000_000)?,
        points: get.positive_int("points", 40)? as usize,
        heat_terms: get.positive_int("heat_terms", 4)? as usize,
        j_max: get.positive_int("j_max", 4)? as usize,
    };

    let lambda_min = get.float("lambda_min")?;
    let lambda_max = get.float("lambda_max")?;
    for (k, v) in [("lambda_min", lambda_min), ("lambda_max", lambda_max)] {
        if matches!(v, Some(x) if x <= 0.0) {
            return Err(CliError::key(k, "must be positive"));
        }
    }
    if let (Some(lo), Some(hi)) = (lambda_min, lambda_max) {
        if hi <= lo {
            return Err(CliError::key("lambda_max", "must exceed lambda_min"));
        }
    }
    let t_min = get.positive_float("t_min", 1e-4)?;
    let t_max = get.positive_float("t_max", 1e-2)?;
    if t_max <= t_min {
        return Err(CliError::key("t_max", "must exceed t_min"));
    }
    let t_grid = match get.raw("t_grid") {
        None => vec![0.5, 1.0, 2.0, 5.0],
        Some(v) => v
            .split(',')
            .map(|s| match s.trim().parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(CliError::key(
                    "t_grid",
                    format!("expected positive numbers, got `{s}`"),
                )),
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let out_dir = get
        .raw("out_dir")
        .or(default_out_dir)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    if out_dir.exists() && !out_dir.is_dir() {
        return Err(CliError::key(
            "out_dir",
            format!("{} is not a directory", out_dir.display()),
        ));
    }
    let name = get.raw("name").unwrap_or(command.name()).to_string();
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(CliError::key(
            "name",
            format!("not a plain file stem: `{name}`"),
        ));
    }

    Ok(RunConfig {
        command,
        geometry,
        t,
        d,
        check: get.choice(
            "check",
            Check::Constancy,
            &[
                ("constancy", Check::Constancy),
                ("cut-trace", Check::CutTrace),
                ("log-derivative", Check::LogDerivative),
                ("power", Check::Power),
                ("triangular", Check::Triangular),
                ("pi0", Check::Pi0),
            ],
        )?,
        family: get.choice(
            "family",
            Family::Spectrum,
            &[("spectrum", Family::Spectrum), ("dtn", Family::Dtn)],
        )?,
        operator: SymbolOperator {
            b: get.rational("b")?,
            q: get.rational("q")?,
        },
        budgets,
        grids: Grids {
            lambda_min,
            lambda_max,
            t_min,
            t_max,
            t_grid,
        },
        tolerances: Tolerances {
            tol: get.positive_float("tol", 1e-12)?,
            h: get.positive_float("h", 1e-3)?,
        },
        mode: get.choice(
            "mode",
            ExecMode::Par,
            &[("par", ExecMode::Par), ("seq", ExecMode::Seq)],
        )?,
        output: Output {
            dir: out_dir,
            name,
            format: get.choice(
                "format",
                Format::Json,
                &[
                    ("json", Format::Json),
                    ("csv", Format::Csv),
                    ("both", Format::Both),
                ],
            )?,
        },
    })
}

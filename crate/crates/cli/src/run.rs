//! Command dispatch and the report envelope.

use detglue_core::asymptotic_fit::{
    fit_expansion, log_grid, pi0, sample_family, series_rows, FitRange, LogDetFamily,
};
use detglue_core::gluing::{
    closed_log_det, dtn_root_family, extract_c_from_pi0, fiber_budget, glue, verify_eq41,
    verify_lemma310, verify_lemma41, verify_power_identity, verify_triangular_identity, FitConfig,
    TraceFamily,
};
use detglue_core::spectral_models::{geometry_eigenvalues, ModelGeometry};
use detglue_core::symbol_calculus::{
    check_homogeneity, coef, j_k_value, parametrix_terms, pi0_symbolic, rational,
    OperatorSymbolData, Poly, QuadConfig,
};
use detglue_core::zeta_engine::{
    fit_heat_expansion, heat_trace, log_det_with, mellin_check, ZetaOptions,
};
use detglue_core::{par, Complex64, Rational64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Check, Command, ExecMode, Family, RunConfig};
use crate::error::{CliError, Result};

pub const ARTIFACT: &str = "detglue";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One scalar result. Non-finite numbers are stored as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub quantity: String,
    pub value: Option<f64>,
    pub error: Option<f64>,
}

impl Estimate {
    fn new(quantity: impl Into<String>, value: f64, error: Option<f64>) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Self {
            quantity: quantity.into(),
            value: finite(value),
            error: error.and_then(finite),
        }
    }
}

/// Plot data: named columns, one row per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Top-level object of every JSON report, keys in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub artifact: String,
    pub version: String,
    /// `SOURCE_DATE_EPOCH` when set, otherwise null.
    pub timestamp: Option<u64>,
    pub command: Command,
    pub config: RunConfig,
    pub payload: Value,
    pub estimates: Vec<Estimate>,
    pub series: Option<Series>,
}

fn source_date_epoch() -> Result<Option<u64>> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Err(_) => Ok(None),
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => s.trim().parse::<u64>().map(Some).map_err(|_| {
            CliError::Config(format!(
                "SOURCE_DATE_EPOCH: expected integer seconds, got `{s}`"
            ))
        }),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn geometry(config: &RunConfig) -> Result<ModelGeometry> {
    config.geometry.ok_or_else(|| {
        CliError::key(
            "geometry",
            format!("required for {}", config.command.name()),
        )
    })
}

struct Outcome {
    payload: Value,
    estimates: Vec<Estimate>,
    series: Option<Series>,
}

pub fn run(config: &RunConfig) -> Result<ReportEnvelope> {
    let timestamp = source_date_epoch()?;
    par::set_mode(match config.mode {
        ExecMode::Par => par::Mode::Parallel,
        ExecMode::Seq => par::Mode::Sequential,
    });
    let out = match config.command {
        Command::Det => det(config)?,
        Command::Glue => glue_cmd(config)?,
        Command::Asymfit => asymfit(config)?,
        Command::Symbols => symbols(config)?,
        Command::Heat => heat(config)?,
        Command::Verify => verify(config)?,
    };
    Ok(ReportEnvelope {
        artifact: ARTIFACT.into(),
        version: VERSION.into(),
        timestamp,
        command: config.command,
        config: config.clone(),
        payload: out.payload,
        estimates: out.estimates,
        series: out.series,
    })
}

fn det(config: &RunConfig) -> Result<Outcome> {
    let g = geometry(config)?;
    let t = config.t.unwrap_or(0.0);
    let shift = Complex64::new(t, 0.0);
    let ld = match g {
        ModelGeometry::TorusCut { .. } => {
            closed_log_det(&g, shift, fiber_budget(config.budgets.k_max))?
        }
        _ => {
            g.validate()?;
            let opts = ZetaOptions {
                tol: config.tolerances.tol,
                max_n: config.budgets.n_max,
                ..ZetaOptions::continued()
            };
            log_det_with(&geometry_eigenvalues(&g)?, shift, &opts)?
        }
    };
    Ok(Outcome {
        payload: json!({
            "geometry": to_value(&g),
            "t": t,
            "logdet": ld.value.re,
            "logdet_imag": ld.value.im,
            "error_estimate": ld.error_estimate,
        }),
        estimates: vec![Estimate::new(
            "logdet",
            ld.value.re,
            Some(ld.error_estimate),
        )],
        series: None,
    })
}

fn glue_cmd(config: &RunConfig) -> Result<Outcome> {
    let g = geometry(config)?;
    let rep = glue(&g, config.budgets.k_max, config.t.unwrap_or(0.0))?;
    let e = rep.errors;
    Ok(Outcome {
        estimates: vec![
            Estimate::new("log_det_closed", rep.log_det_closed, Some(e.log_det_closed)),
            Estimate::new(
                "log_det_dirichlet",
                rep.log_det_dirichlet,
                Some(e.log_det_dirichlet),
            ),
            Estimate::new("log_det_r", rep.log_det_r, Some(e.log_det_r)),
            Estimate::new("log_c", rep.log_c, Some(e.log_c)),
        ],
        payload: to_value(&rep),
        series: None,
    })
}

fn asymfit(config: &RunConfig) -> Result<Outcome> {
    let g = geometry(config)?;
    let d = config.d.unwrap_or(g.dimension());
    let (family, defaults) = match config.family {
        Family::Spectrum => (LogDetFamily::geometry(&g)?, FitConfig::default()),
        Family::Dtn => (dtn_root_family(&g, d)?, FitConfig::for_geometry(&g)),
    };
    let lo = config.grids.lambda_min.unwrap_or(defaults.lambda_min);
    let hi = config.grids.lambda_max.unwrap_or(defaults.lambda_max);
    let grid = log_grid(lo, hi, config.budgets.points);
    let samples = sample_family(&family, &grid)?;
    let exp = fit_expansion(
        &samples,
        family.chi,
        family.dim,
        FitRange::default_for(family.dim),
    )?;
    let p0 = pi0(&exp);
    let mut estimates: Vec<Estimate> = exp
        .pi
        .iter()
        .map(|c| Estimate::new(format!("pi_{}", c.j), c.value, Some(c.std_error)))
        .chain(
            exp.q
                .iter()
                .map(|c| Estimate::new(format!("q_{}", c.j), c.value, Some(c.std_error))),
        )
        .collect();
    let log_c = (config.family == Family::Dtn).then(|| {
        let v = -p0.value / d as f64;
        estimates.push(Estimate::new("log_c", v, Some(p0.std_error / d as f64)));
        v
    });
    estimates.push(Estimate::new("fit_residual", exp.residual, None));
    let rows = series_rows(&samples, &exp);
    Ok(Outcome {
        payload: json!({
            "family": family.label,
            "chi": family.chi,
            "dim": family.dim,
            "grid": {"lambda_min": lo, "lambda_max": hi, "points": grid.len()},
            "expansion": to_value(&exp),
            "pi0": to_value(&p0),
            "log_c": log_c,
        }),
        estimates,
        series: Some(Series {
            columns: ["lambda", "logdet", "model", "residual"]
                .map(String::from)
                .to_vec(),
            rows: rows
                .iter()
                .map(|r| vec![r.lambda, r.logdet, r.model, r.residual])
                .collect(),
        }),
    })
}

fn heat(config: &RunConfig) -> Result<Outcome> {
    let g = geometry(config)?;
    let seq = geometry_eigenvalues(&g)?;
    g.validate()?;
    let first = -(g.dimension() as i64);
    let exps: Vec<Rational64> = (0..config.budgets.heat_terms as i64)
        .map(|j| Rational64::new(first + j, 2))
        .collect();
    let grid = log_grid(
        config.grids.t_min,
        config.grids.t_max,
        config.budgets.points,
    );
    let fit = fit_heat_expansion(&seq, &grid, &exps)?;
    let mellin = mellin_check(&seq, 3.0, &fit, config.grids.t_max)?;
    let label = |r: Rational64| format!("{}", r);
    let mut estimates: Vec<Estimate> = fit
        .terms
        .iter()
        .map(|h| {
            Estimate::new(
                format!("c_{}", label(h.exponent)),
                h.coefficient,
                Some(h.std_error),
            )
        })
        .collect();
    estimates.push(Estimate::new("mellin_spectral", mellin.spectral, None));
    estimates.push(Estimate::new(
        "mellin_integral",
        mellin.integral,
        Some(mellin.error_estimate),
    ));
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        let theta = heat_trace(&seq, t)?;
        let model = fit.eval(t);
        rows.push(vec![t, theta, model, theta - model]);
    }
    let terms: Vec<Value> = fit
        .terms
        .iter()
        .map(|h| {
            json!({
                "exponent": label(h.exponent),
                "coefficient": h.coefficient,
                "std_error": h.std_error,
            })
        })
        .collect();
    Ok(Outcome {
        payload: json!({
            "geometry": to_value(&g),
            "grid": {"t_min": config.grids.t_min, "t_max": config.grids.t_max, "points": grid.len()},
            "terms": terms,
            "residual": fit.residual,
            "condition": fit.condition,
            "mellin": {
                "s": 3.0,
                "spectral": mellin.spectral,
                "integral": mellin.integral,
                "error_estimate": mellin.error_estimate,
                "agrees": mellin.agrees(),
            },
        }),
        estimates,
        series: Some(Series {
            columns: ["t", "theta", "model", "residual"]
                .map(String::from)
                .to_vec(),
            rows,
        }),
    })
}

fn symbols(config: &RunConfig) -> Result<Outcome> {
    let (bn, bd) = config.operator.b;
    let (qn, qd) = config.operator.q;
    let principal = Poly::monomial(coef(1, 1), &[2], 0).add(&Poly::monomial(coef(1, 1), &[0], 1));
    let op = OperatorSymbolData::new(
        2,
        2,
        vec![
            principal,
            Poly::monomial(coef(bn, bd), &[1], 0),
            Poly::constant(1, coef(qn, qd)),
        ],
        2.0 * std::f64::consts::PI,
    )?;
    let j_max = config.budgets.j_max;
    let taus = [rational(2, 1), rational(3, 2), rational(5, 1)];
    let terms: Vec<Value> = parametrix_terms(&op, j_max)?
        .iter()
        .enumerate()
        .map(|(j, r)| {
            json!({
                "j": j,
                "degree": r.degree,
                "expression": r.to_string(),
                "homogeneous": taus.iter().all(|tau| check_homogeneity(r, tau)),
            })
        })
        .collect();
    let cfg = QuadConfig::default();
    let mut estimates = Vec::new();
    let mut j_values = Vec::new();
    for k in 2..=j_max {
        let v = j_k_value(&op, k, Complex64::new(0.0, 0.0), &cfg, 0.0)?;
        estimates.push(Estimate::new(
            format!("abs_J_{k}(0)"),
            v.value.norm(),
            Some(v.error_estimate),
        ));
        j_values.push(
            json!({"k": k, "re": v.value.re, "im": v.value.im, "error_estimate": v.error_estimate}),
        );
    }
    let p0 = pi0_symbolic(&op, &cfg)?;
    estimates.push(Estimate::new("pi0", p0.value, Some(p0.error_estimate)));
    Ok(Outcome {
        payload: json!({
            "symbol": format!("xi^2 + lambda + ({bn}/{bd}) xi + ({qn}/{qd})"),
            "period": op.period,
            "terms": terms,
            "j_at_zero": j_values,
            "pi0": to_value(&p0),
        }),
        estimates,
        series: None,
    })
}

fn verify(config: &RunConfig) -> Result<Outcome> {
    let g = geometry(config)?;
    let k_max = config.budgets.k_max;
    let t = config.t.unwrap_or(1.0);
    let h = config.tolerances.h;
    let d_geom = config.d.unwrap_or(g.dimension());
    let d_pair = config.d.unwrap_or(2);
    let check_rows = |c: &detglue_core::gluing::DerivativeCheck| {
        vec![
            Estimate::new("fd", c.fd, None),
            Estimate::new("trace", c.trace, None),
            Estimate::new("rel_error", c.rel_error, None),
            Estimate::new("order_ratio", c.order_ratio, None),
        ]
    };
    let (payload, estimates, series) = match config.check {
        Check::Constancy => {
            let tr = verify_eq41(&g, d_geom, &config.grids.t_grid, k_max)?;
            let err = tr.errors.iter().cloned().fold(0.0, f64::max);
            let rows = (0..tr.t.len())
                .map(|i| {
                    vec![
                        tr.t[i],
                        tr.log_det_closed[i],
                        tr.log_det_dirichlet[i],
                        tr.log_det_r_sum[i],
                        tr.difference[i],
                    ]
                })
                .collect();
            let est = vec![
                Estimate::new("c_tilde", tr.c_tilde, Some(err)),
                Estimate::new("max_deviation", tr.max_deviation, None),
                Estimate::new("max_imaginary", tr.max_imaginary, None),
            ];
            let columns = [
                "t",
                "log_det_closed",
                "log_det_dirichlet",
                "log_det_r_sum",
                "difference",
            ];
            (
                to_value(&tr),
                est,
                Some(Series {
                    columns: columns.map(String::from).to_vec(),
                    rows,
                }),
            )
        }
        Check::CutTrace => {
            let rep = verify_lemma41(&g, d_geom, t, h, k_max)?;
            let mut est = check_rows(&rep.lhs);
            est.push(Estimate::new("dtn_fd", rep.dtn_fd, None));
            est.push(Estimate::new("rel_lhs_vs_dtn", rep.rel_lhs_vs_dtn, None));
            est.push(Estimate::new(
                "rel_dtn_vs_trace",
                rep.rel_dtn_vs_trace,
                None,
            ));
            (to_value(&rep), est, None)
        }
        Check::LogDerivative => {
            let family = match g {
                ModelGeometry::Interval { .. } => TraceFamily::Spectral {
                    seq: geometry_eigenvalues(&g)?,
                    d: d_geom as u32,
                },
                _ => TraceFamily::Dtn {
                    geometry: g,
                    d: d_geom,
                    k_max,
                },
            };
            let rep = verify_lemma310(&family, t, h)?;
            (to_value(&rep), check_rows(&rep), None)
        }
        Check::Power => {
            let rep = verify_power_identity(&geometry_eigenvalues(&g)?, d_pair as u32)?;
            let est = vec![
                Estimate::new("log_det_power", rep.log_det_power, None),
                Estimate::new("d_log_det", rep.d_log_det, None),
                Estimate::new("difference", rep.difference, Some(rep.error_estimate)),
            ];
            (to_value(&rep), est, None)
        }
        Check::Triangular => {
            let rep = verify_triangular_identity(&g, d_pair, t, k_max)?;
            let est = vec![
                Estimate::new("per_mode_max_deviation", rep.per_mode_max_deviation, None),
                Estimate::new("omega_max_deviation", rep.omega_max_deviation, None),
                Estimate::new("difference", rep.difference, Some(rep.error_estimate)),
            ];
            (to_value(&rep), est, None)
        }
        Check::Pi0 => {
            let defaults = FitConfig::for_geometry(&g);
            let fc = FitConfig {
                lambda_min: config.grids.lambda_min.unwrap_or(defaults.lambda_min),
                lambda_max: config.grids.lambda_max.unwrap_or(defaults.lambda_max),
                points: config.budgets.points,
                range: None,
                k_max,
            };
            let ex = extract_c_from_pi0(&g, d_geom, &fc)?;
            let est = vec![
                Estimate::new("pi0", ex.pi0.value, Some(ex.pi0.std_error)),
                Estimate::new("log_c", ex.log_c, Some(ex.log_c_error)),
                Estimate::new("glue_log_c", ex.glue_log_c, Some(ex.glue_error)),
            ];
            (to_value(&ex), est, None)
        }
    };
    Ok(Outcome {
        payload: json!({ "check": to_value(&config.check), "report": payload }),
        estimates,
        series,
    })
}

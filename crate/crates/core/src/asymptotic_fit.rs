//! Large-parameter expansions
//! `log Det P(lambda) ~ sum_j pi_j lambda^(-j/chi) + sum_j q_j lambda^(j/chi) log lambda`
//! fitted from sampled log-determinants.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::dtn::{dtn_spectrum, dtn_value_1d, roots_of_minus_one};
use crate::error::{Error, Result};
use crate::lsq::weighted_lstsq;
use crate::par;
use crate::special::{gamma_c, harmonic};
use crate::spectral_models::{EigenSequence, ModelGeometry};
use crate::zeta_engine::{log_det, HeatTraceExpansion, LogDet};

type Callback = dyn Fn(f64) -> Result<LogDet> + Send + Sync;

/// `lambda -> log Det P(lambda)` on the positive real ray.
#[derive(Clone)]
pub struct LogDetFamily {
    pub label: String,
    pub chi: f64,
    pub dim: usize,
    f: Arc<Callback>,
}

impl std::fmt::Debug for LogDetFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogDetFamily")
            .field("label", &self.label)
            .field("chi", &self.chi)
            .field("dim", &self.dim)
            .finish()
    }
}

impl LogDetFamily {
    pub fn new(
        label: impl Into<String>,
        chi: f64,
        dim: usize,
        f: impl Fn(f64) -> Result<LogDet> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::Domain(format!(
                "weight chi must be positive, got {chi}"
            )));
        }
        Ok(Self {
            label: label.into(),
            chi,
            dim,
            f: Arc::new(f),
        })
    }

    pub fn eval(&self, lambda: f64) -> Result<LogDet> {
        (self.f)(lambda)
    }

    pub fn constant(c: f64) -> Self {
        Self::new("constant", 1.0, 0, move |_| {
            Ok(LogDet {
                value: Complex64::new(c, 0.0),
                error_estimate: 0.0,
            })
        })
        .expect("valid weight")
    }

    /// `log Det(A + lambda)` for a real spectrum; weight 2 for the
    /// second-order models.
    pub fn shifted_spectrum(
        label: impl Into<String>,
        seq: EigenSequence,
        dim: usize,
    ) -> Result<Self> {
        Self::new(label, 2.0, dim, move |lam| {
            log_det(&seq, Complex64::new(lam, 0.0))
        })
    }

    /// `log Det(A + lambda)` for a one-dimensional geometry.
    pub fn geometry(geometry: &ModelGeometry) -> Result<Self> {
        let seq = crate::spectral_models::geometry_eigenvalues(geometry)?;
        if geometry.dimension() != 1 {
            return Err(Error::Unsupported(
                "shifted-spectrum families are sampled for one-dimensional models".into(),
            ));
        }
        Self::shifted_spectrum(format!("{geometry:?}"), seq, 1)
    }

    /// `log Det(D^2 + c lambda^2 + b lambda)` on a circle: weight 1, no heat
    /// expansion in `lambda`, so `pi_0 = L b / (2 sqrt c)` need not vanish.
    pub fn quadratic_pencil(length: f64, b: f64, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain("pencil needs c > 0".into()));
        }
        // massless circle including its zero mode
        let seq = crate::spectral_models::circle_eigenvalues(length, 1.0)?
            .shifted(Complex64::new(-1.0, 0.0));
        Self::new(
            format!("pencil(L={length},b={b},c={c})"),
            1.0,
            1,
            move |lam| log_det(&seq, Complex64::new(c * lam * lam + b * lam, 0.0)),
        )
    }

    /// `t -> log r(t)`, the cut-point DtN value of the circle for `A + t`;
    /// weight 1 and dimension 0 (the cut is a point).
    pub fn circle_dtn(length: f64, mass: f64) -> Result<Self> {
        Self::new(format!("dtn(L={length},m={mass})"), 1.0, 0, move |t| {
            let lr = dtn_value_1d(length, mass * mass, Complex64::new(-t, 0.0))?.ln();
            Ok(LogDet {
                value: lr,
                error_estimate: 1e-15 * lr.norm(),
            })
        })
    }

    /// `t -> sum_k log Det R(alpha_k t)` over the roots `alpha_k^d = -1` for a
    /// torus cut along a circle. Each summand is a family in `lambda = -alpha_k t`
    /// of weight 2 on the one-dimensional cut; conjugate roots make the sum real.
    pub fn torus_dtn(geometry: &ModelGeometry, d: usize) -> Result<Self> {
        if !matches!(geometry, ModelGeometry::TorusCut { .. }) {
            return Err(Error::Domain(
                "torus DtN family needs a TorusCut geometry".into(),
            ));
        }
        let geom = *geometry;
        let roots = roots_of_minus_one(d)?;
        Self::new(format!("torus_dtn(d={d})"), 2.0, 1, move |t| {
            let mut value = Complex64::new(0.0, 0.0);
            let mut err = 0.0;
            for root in &roots {
                let ld = dtn_spectrum(&geom, root, t, 0)?.log_det()?;
                value += ld.value;
                err += ld.error_estimate;
            }
            Ok(LogDet {
                value,
                error_estimate: err,
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub lambda: f64,
    pub value: f64,
    pub error_estimate: f64,
}

/// Log-spaced grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect();
    if let Some(first) = g.first_mut() {
        *first = lo;
    }
    if n > 1 {
        g[n - 1] = hi;
    }
    g
}

pub fn sample_family(family: &LogDetFamily, grid: &[f64]) -> Result<Vec<Sample>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    match (grid.first(), grid.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 && hi / lo >= 100.0 * (1.0 - 1e-12) => {}
        _ => {
            return Err(Error::Domain(
                "grid must be positive and span at least two decades".into(),
            ))
        }
    }
    par::map(grid, |&lambda| {
        let ld = family
            .eval(lambda)
            .map_err(|e| e.context(&format!("{} at lambda = {lambda}", family.label)))?;
        if !(ld.value.re.is_finite() && ld.value.im.is_finite()) {
            return Err(Error::Domain(format!(
                "{} is not finite at lambda = {lambda}",
                family.label
            )));
        }
        // real families: any imaginary part is numerical noise
        Ok(Sample {
            lambda,
            value: ld.value.re,
            error_estimate: ld.error_estimate + ld.value.im.abs(),
        })
    })
    .into_iter()
    .collect()
}

/// Basis indices: `pi_j lambda^(-j/chi)` for `j_min..=j_max` and
/// `q_j lambda^(j/chi) log lambda` for `0..=log_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub j_min: i64,
    pub j_max: i64,
    pub log_max: i64,
}

impl FitRange {
    /// `j in [-d, 2d + 3]`, log terms up to `d`.
    pub fn default_for(dim: usize) -> Self {
        let d = dim as i64;
        Self {
            j_min: -d,
            j_max: 2 * d + 3,
            log_max: d,
        }
    }

    fn columns(&self) -> usize {
        (self.j_max - self.j_min + 1).max(0) as usize + (self.log_max + 1).max(0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub j: i64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticExpansion {
    pub chi: f64,
    pub dim: usize,
    pub pi: Vec<Coefficient>,
    pub q: Vec<Coefficient>,
    pub residual: f64,
    pub condition: f64,
}

impl AsymptoticExpansion {
    pub fn pi_j(&self, j: i64) -> Option<Coefficient> {
        self.pi.iter().find(|c| c.j == j).copied()
    }

    pub fn q_j(&self, j: i64) -> Option<Coefficient> {
        self.q.iter().find(|c| c.j == j).copied()
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let l = lambda.ln();
        let p: f64 = self
            .pi
            .iter()
            .map(|c| c.value * lambda.powf(-(c.j as f64) / self.chi))
            .sum();
        let q: f64 = self
            .q
            .iter()
            .map(|c| c.value * lambda.powf(c.j as f64 / self.chi) * l)
            .sum();
        p + q
    }
}

/// Fit in `u = lambda / lambda_0` with `lambda_0` the geometric mean of the
/// grid, which decouples the log columns from the powers; returns
/// `(a, b, se_a, se_b, condition)` for `sum a_j u^(-j/chi) + sum b_j u^(j/chi) log u`.
#[allow(clippy::type_complexity)]
fn raw_fit(
    samples: &[Sample],
    chi: f64,
    range: FitRange,
    lambda0: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    let ncol = range.columns();
    if samples.len() < 2 * ncol {
        return Err(Error::Fit(format!(
            "{} samples for {ncol} coefficients; need at least twice as many",
            samples.len()
        )));
    }
    let npi = (range.j_max - range.j_min + 1) as usize;
    let design = DMatrix::from_fn(samples.len(), ncol, |i, c| {
        let u = samples[i].lambda / lambda0;
        if c < npi {
            u.powf(-((range.j_min + c as i64) as f64) / chi)
        } else {
            u.powf((c - npi) as f64 / chi) * u.ln()
        }
    });
    let y: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let w: Vec<f64> = samples
        .iter()
        .map(|s| 1.0 / (s.error_estimate + 1e-13 * (1.0 + s.value.abs())))
        .collect();
    let fit = weighted_lstsq(&design, &y, &w)
        .map_err(|e| e.context("refine the lambda grid or shrink the basis"))?;
    let (a, b) = fit.coefficients.split_at(npi);
    let (sa, sb) = fit.std_errors.split_at(npi);
    Ok((
        a.to_vec(),
        b.to_vec(),
        sa.to_vec(),
        sb.to_vec(),
        fit.condition,
    ))
}

/// Back to `lambda`: `pi_j = a_j lambda_0^(j/chi)` and `q_j = b_j lambda_0^(-j/chi)`,
/// with `-q_j log lambda_0` moved onto `pi_(-j)`.
fn to_lambda(
    a: &[f64],
    b: &[f64],
    sa: &[f64],
    sb: &[f64],
    chi: f64,
    range: FitRange,
    lambda0: f64,
) -> Result<(Vec<Coefficient>, Vec<Coefficient>)> {
    let l0 = lambda0.ln();
    let mut pi: Vec<Coefficient> = a
        .iter()
        .zip(sa)
        .enumerate()
        .map(|(i, (v, e))| {
            let j = range.j_min + i as i64;
            let f = lambda0.powf(j as f64 / chi);
            Coefficient {
                j,
                value: v * f,
                std_error: e * f,
            }
        })
        .collect();
    let mut q = Vec::new();
    for (j, (v, e)) in b.iter().zip(sb).enumerate() {
        let j = j as i64;
        let f = lambda0.powf(-(j as f64) / chi);
        let (qv, qe) = (v * f, e * f);
        let target = pi.iter_mut().find(|c| c.j == -j).ok_or_else(|| {
            Error::Fit(format!(
                "log term q_{j} needs the power term pi_{} in the basis",
                -j
            ))
        })?;
        target.value -= qv * l0;
        target.std_error += qe * l0.abs();
        q.push(Coefficient {
            j,
            value: qv,
            std_error: qe,
        });
    }
    Ok((pi, q))
}

/// Weighted least-squares fit of the expansion. Error bars combine the
/// statistical error with the shift caused by one extra correction term.
pub fn fit_expansion(
    samples: &[Sample],
    chi: f64,
    dim: usize,
    range: FitRange,
) -> Result<AsymptoticExpansion> {
    if !(chi > 0.0) {
        return Err(Error::Domain("weight chi must be positive".into()));
    }
    if range.j_min > range.j_max || range.log_max < -1 {
        return Err(Error::Domain(format!("empty basis {range:?}")));
    }
    if samples.iter().any(|s| !(s.lambda > 0.0)) {
        return Err(Error::Domain("samples need lambda > 0".into()));
    }
    let lambda0 =
        (samples.iter().map(|s| s.lambda.ln()).sum::<f64>() / samples.len().max(1) as f64).exp();
    let (a, b, sa, sb, condition) = raw_fit(samples, chi, range, lambda0)?;
    let (mut pi, mut q) = to_lambda(&a, &b, &sa, &sb, chi, range, lambda0)?;
    let wider = FitRange {
        j_max: range.j_max + 1,
        ..range
    };
    if let Ok((a2, b2, sa2, sb2, _)) = raw_fit(samples, chi, wider, lambda0) {
        let (pi2, q2) = to_lambda(&a2, &b2, &sa2, &sb2, chi, wider, lambda0)?;
        for c in pi.iter_mut() {
            c.std_error +=
                (c.value - pi2.iter().find(|x| x.j == c.j).map_or(c.value, |x| x.value)).abs();
        }
        for (c, c2) in q.iter_mut().zip(&q2) {
            c.std_error += (c.value - c2.value).abs();
        }
    }
    let mut out = AsymptoticExpansion {
        chi,
        dim,
        pi,
        q,
        residual: 0.0,
        condition,
    };
    out.residual = (samples
        .iter()
        .map(|s| (s.value - out.eval(s.lambda)).powi(2))
        .sum::<f64>()
        / samples.len() as f64)
        .sqrt();
    Ok(out)
}

/// The constant, non-logarithmic coefficient.
pub fn pi0(expansion: &AsymptoticExpansion) -> Coefficient {
    expansion.pi_j(0).unwrap_or(Coefficient {
        j: 0,
        value: 0.0,
        std_error: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub lambda: f64,
    pub logdet: f64,
    pub model: f64,
    pub residual: f64,
}

pub fn series_rows(samples: &[Sample], expansion: &AsymptoticExpansion) -> Vec<SeriesRow> {
    samples
        .iter()
        .map(|s| {
            let model = expansion.eval(s.lambda);
            SeriesRow {
                lambda: s.lambda,
                logdet: s.value,
                model,
                residual: s.value - model,
            }
        })
        .collect()
}

/// One term predicted from the heat coefficients next to its fitted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTerm {
    /// Power of `lambda` multiplying the term.
    pub power: f64,
    pub logarithmic: bool,
    pub predicted: f64,
    /// Propagated from the heat-coefficient error bars.
    pub predicted_error: f64,
    pub fitted: f64,
    pub fit_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop27Report {
    pub applicable: bool,
    pub reason: Option<String>,
    pub pi0: Option<Coefficient>,
    pub terms: Vec<PredictedTerm>,
    pub max_discrepancy: f64,
    /// Reported quantities are `log Det = -zeta'(0)`; the corresponding
    /// `d/ds zeta|_0` values are their negatives.
    pub sign_convention: String,
}

/// Checks `pi_0 = 0` for `log Det(A + lambda)` of a second-order operator
/// whose heat trace expands as `sum c_i t^i` with `i_0 < 0`, and compares the
/// fitted coefficients with those predicted by
/// `-d/ds [sum_i c_i lambda^(-s-i) Gamma(s+i)/Gamma(s)]` at `s = 0`.
pub fn verify_prop27(
    seq: &EigenSequence,
    heat: &HeatTraceExpansion,
    grid: &[f64],
) -> Result<Prop27Report> {
    let convention = "logdet = -zeta'(0)".to_string();
    let i0 = heat.smallest_exponent();
    let significant = heat.terms.iter().any(|h| {
        h.exponent < Rational64::from_integer(0) && h.coefficient.abs() > 3.0 * h.std_error
    });
    if i0 >= Rational64::from_integer(0) || !significant {
        return Ok(Prop27Report {
            applicable: false,
            reason: Some(format!(
                "heat expansion has no significant term with negative exponent (smallest {i0})"
            )),
            pi0: None,
            terms: Vec::new(),
            max_discrepancy: f64::NAN,
            sign_convention: convention,
        });
    }
    let chi = 2.0;
    let rat = |r: Rational64| *r.numer() as f64 / *r.denom() as f64;
    let dim = (-chi * rat(i0)).round().max(0.0) as usize;
    let family = LogDetFamily::shifted_spectrum("prop27", seq.clone(), dim)?;
    let samples = sample_family(&family, grid)?;
    let exp = fit_expansion(&samples, chi, dim, FitRange::default_for(dim))?;
    let fitted = |power: f64, log: bool| -> Option<Coefficient> {
        let j = if log { power * chi } else { -power * chi };
        if (j - j.round()).abs() > 1e-9 {
            return None;
        }
        if log {
            exp.q_j(j.round() as i64)
        } else {
            exp.pi_j(j.round() as i64)
        }
    };
    let mut predictions: Vec<(f64, bool, f64, f64)> = Vec::new();
    for h in &heat.terms {
        let i = rat(h.exponent);
        let c = h.coefficient;
        if h.exponent.is_integer() && *h.exponent.numer() <= 0 {
            let n = -*h.exponent.numer();
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            predictions.push((n as f64, true, c * sign / fact, h.std_error / fact));
            if n > 0 {
                let f = harmonic(n as u64) / fact;
                predictions.push((n as f64, false, -c * sign * f, h.std_error * f));
            }
        } else {
            let g = gamma_c(Complex64::new(i, 0.0)).re;
            predictions.push((-i, false, -c * g, h.std_error * g.abs()));
        }
    }
    // no heat term produces a constant, non-logarithmic lambda^0 term
    predictions.push((0.0, false, 0.0, 0.0));
    let mut terms: Vec<PredictedTerm> = Vec::new();
    for (power, log, predicted, predicted_error) in predictions {
        let Some(f) = fitted(power, log) else {
            continue;
        };
        match terms
            .iter_mut()
            .find(|t| t.power == power && t.logarithmic == log)
        {
            Some(t) => {
                t.predicted += predicted;
                t.predicted_error += predicted_error;
            }
            None => terms.push(PredictedTerm {
                power,
                logarithmic: log,
                predicted,
                predicted_error,
                fitted: f.value,
                fit_error: f.std_error,
            }),
        }
    }
    let max_discrepancy = terms
        .iter()
        .map(|t| (t.predicted - t.fitted).abs())
        .fold(0.0, f64::max);
    Ok(Prop27Report {
        applicable: true,
        reason: None,
        pi0: Some(pi0(&exp)),
        terms,
        max_discrepancy,
        sign_convention: convention,
    })
}

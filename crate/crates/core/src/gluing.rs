//! The gluing formula `Det A = c Det(A_Gamma, B) Det R` on the model
//! geometries, the `t`-families behind it and the identities used to extract
//! `c` twice.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotic_fit::{
    fit_expansion, log_grid, pi0, sample_family, Coefficient, FitRange, LogDetFamily,
};
use crate::dtn::{dtn_spectrum, roots_of_minus_one, RootOfMinusOne};
use crate::error::{Error, Result};
use crate::special::bessel_k1;
use crate::spectral_models::{
    circle_eigenvalues, interval_eigenvalues, BoundaryConditionKind, Branch, EigenSequence,
    ModelGeometry,
};
use crate::zeta_engine::{log_det, zeta_laurent_at, LogDet};

/// Fiber of a product `fiber x cross-section`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiberKind {
    Circle,
    Dirichlet,
}

/// `log(1 - e^(-x))` without cancellation for small `e^(-x)`.
fn log1m_exp(x: Complex64) -> Complex64 {
    let e = (-x).exp();
    if e.norm() < 1e-3 {
        // -e - e^2/2 - e^3/3 ...
        let mut acc = Complex64::new(0.0, 0.0);
        let mut p = e;
        for n in 1..12 {
            acc -= p / n as f64;
            p *= e;
        }
        acc
    } else {
        (1.0 - e).ln()
    }
}

/// `log Det` of `-d_x^2 + A_cross + shift` on `fiber x cross` by separation:
/// `sum_k E(mu_k) + L_f [FP Z(-1/2) + Res Z(-1/2) (2 - 2 log 2)] - c_0 Z'(0)`
/// with `Z` the zeta function of the shifted cross-section spectrum `mu_k`,
/// `E = 2 log(1 - e^(-w L_f))`, `c_0 = 0` on a circle fiber and
/// `E = log(1 - e^(-2 w L_f))`, `c_0 = -1/2` on a Dirichlet fiber.
pub fn mode_sum_log_det(
    fiber: FiberKind,
    fiber_length: f64,
    cross: &EigenSequence,
    shift: Complex64,
    max_modes: u64,
) -> Result<LogDet> {
    if !(fiber_length > 0.0 && fiber_length.is_finite()) {
        return Err(Error::Domain(format!(
            "fiber length must be positive, got {fiber_length}"
        )));
    }
    let energy = |mu: Complex64| -> Result<Complex64> {
        let w = mu.sqrt();
        if !(w.re > 0.0) {
            return Err(Error::Branch(format!(
                "cross-section eigenvalue {mu} leaves the Agmon sector"
            )));
        }
        Ok(match fiber {
            FiberKind::Circle => 2.0 * log1m_exp(w * fiber_length),
            FiberKind::Dirichlet => log1m_exp(2.0 * w * fiber_length),
        })
    };
    let mut sum = crate::par::CompensatedComplexSum::default();
    for z in cross.finite() {
        sum.add(energy(z + shift)?);
    }
    for b in cross.branches() {
        let mut k = b.first_index;
        loop {
            let e = energy(b.value(k) + shift)? * b.multiplicity as f64;
            sum.add(e);
            if e.norm() < 1e-18 * (1.0 + sum.value().norm()) {
                break;
            }
            if k - b.first_index >= max_modes {
                return Err(Error::Continuation(format!(
                    "fiber energies not converged after {max_modes} modes"
                )));
            }
            k += 1;
        }
    }
    let z = zeta_laurent_at(cross, Complex64::new(-0.5, 0.0), shift)?;
    let mut value = sum.value() + fiber_length * (z.finite_part + z.residue * (2.0 - 2.0 * LN_2));
    let mut err = z.error_estimate * fiber_length * 2.0;
    if fiber == FiberKind::Dirichlet {
        // -c_0 Z'(0) = Z'(0)/2 = -logdet/2
        let cross_ld = log_det(cross, shift)?;
        value -= 0.5 * cross_ld.value;
        err += 0.5 * cross_ld.error_estimate;
    }
    Ok(LogDet {
        value,
        error_estimate: err + 1e-15 * value.norm(),
    })
}

/// `log Det(Delta + m^2)` on the flat torus `L1 x L2` from the lattice sum
/// `-(L1 L2/4 pi)(2 m^2 log m - m^2) - (L1 L2 m/pi) sum_(n != 0) K_1(m rho_n)/rho_n`,
/// `rho_n = |(n_1 L1, n_2 L2)|`.
pub fn epstein_torus_log_det(l1: f64, l2: f64, mass: f64) -> Result<f64> {
    if !(l1 > 0.0 && l2 > 0.0 && mass > 0.0) {
        return Err(Error::Domain(
            "torus lattice sum needs positive lengths and mass".into(),
        ));
    }
    let area = l1 * l2;
    let bulk = -area / (4.0 * PI) * (2.0 * mass * mass * mass.ln() - mass * mass);
    // K_1(x) < e^-x, so rho m > 45 contributes below 1e-19
    let rho_max = 45.0 / mass;
    let n1_max = (rho_max / l1).ceil() as i64;
    let n2_max = (rho_max / l2).ceil() as i64;
    let mut acc = crate::par::CompensatedSum::new();
    for n1 in -n1_max..=n1_max {
        for n2 in -n2_max..=n2_max {
            if n1 == 0 && n2 == 0 {
                continue;
            }
            let rho = ((n1 as f64 * l1).powi(2) + (n2 as f64 * l2).powi(2)).sqrt();
            if rho <= rho_max {
                acc.add(bessel_k1(mass * rho) / rho);
            }
        }
    }
    Ok(bulk - area * mass / PI * acc.value())
}

/// Cylinder `[0, L1] x S^1_(L2)` with Dirichlet ends, by images:
/// `(log Det T(2 L1, L2) - log Det S(L2)) / 2`.
pub fn epstein_cylinder_log_det(l1: f64, l2: f64, mass: f64) -> Result<f64> {
    let torus = epstein_torus_log_det(2.0 * l1, l2, mass)?;
    let circle = 2.0 * (2.0 * (0.5 * mass * l2).sinh()).ln();
    Ok(0.5 * (torus - circle))
}

/// `log Det(A + shift)` on the closed model manifold.
pub fn closed_log_det(
    geometry: &ModelGeometry,
    shift: Complex64,
    max_modes: u64,
) -> Result<LogDet> {
    geometry.validate()?;
    match *geometry {
        ModelGeometry::Circle { length, mass } => {
            log_det(&circle_eigenvalues(length, mass)?, shift)
        }
        ModelGeometry::TorusCut { l1, l2, mass } => mode_sum_log_det(
            FiberKind::Circle,
            l1,
            &circle_eigenvalues(l2, mass)?,
            shift,
            max_modes,
        ),
        ModelGeometry::Interval { .. } => Err(Error::Domain(
            "the interval is not a closed manifold".into(),
        )),
    }
}

/// `log Det(A_Gamma + shift)` with Dirichlet conditions on both sides of the cut.
pub fn dirichlet_log_det(
    geometry: &ModelGeometry,
    shift: Complex64,
    max_modes: u64,
) -> Result<LogDet> {
    geometry.validate()?;
    match *geometry {
        ModelGeometry::Circle { length, mass } => log_det(
            &interval_eigenvalues(length, mass, BoundaryConditionKind::Dirichlet)?,
            shift,
        ),
        ModelGeometry::TorusCut { l1, l2, mass } => mode_sum_log_det(
            FiberKind::Dirichlet,
            l1,
            &circle_eigenvalues(l2, mass)?,
            shift,
            max_modes,
        ),
        ModelGeometry::Interval { .. } => {
            Err(Error::Domain("the interval has no interior cut".into()))
        }
    }
}

/// The same two determinants with the roles of the two torus directions
/// swapped; an independent route for complex shifts.
pub fn swapped_log_dets(
    geometry: &ModelGeometry,
    shift: Complex64,
    max_modes: u64,
) -> Result<(LogDet, LogDet)> {
    let ModelGeometry::TorusCut { l1, l2, mass } = *geometry else {
        return Err(Error::Domain(
            "swapped mode sums need a TorusCut geometry".into(),
        ));
    };
    geometry.validate()?;
    let closed = mode_sum_log_det(
        FiberKind::Circle,
        l2,
        &circle_eigenvalues(l1, mass)?,
        shift,
        max_modes,
    )?;
    let cyl = mode_sum_log_det(
        FiberKind::Circle,
        l2,
        &interval_eigenvalues(l1, mass, BoundaryConditionKind::Dirichlet)?,
        shift,
        max_modes,
    )?;
    Ok((closed, cyl))
}

/// Cap on the transverse modes of a fiber-energy sum. The energies decay like
/// `exp(-nu k L1)`, so short fibers need more than `k_max` of them.
pub fn fiber_budget(k_max: u64) -> u64 {
    k_max.max(1 << 16)
}

/// Independent evaluation of the closed and Dirichlet determinants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub route: String,
    pub log_det_closed: f64,
    pub log_det_dirichlet: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GluingErrors {
    pub log_det_closed: f64,
    pub log_det_dirichlet: f64,
    pub log_det_r: f64,
    pub log_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingReport {
    pub geometry: ModelGeometry,
    pub t: f64,
    pub k_max: u64,
    pub log_det_closed: f64,
    pub log_det_dirichlet: f64,
    pub log_det_r: f64,
    pub log_c: f64,
    /// `log_det_closed - log_det_dirichlet - log_det_r - log_c`.
    pub residual: f64,
    pub errors: GluingErrors,
    pub cross_check: Option<CrossCheck>,
}

impl GluingReport {
    /// Re-evaluates the residual against an externally supplied `log c`.
    pub fn with_log_c(&self, log_c: f64, error: f64) -> Self {
        let mut out = self.clone();
        out.log_c = log_c;
        out.errors.log_c = error;
        out.residual = self.log_det_closed - self.log_det_dirichlet - self.log_det_r - log_c;
        out
    }
}

fn real_part(ld: LogDet, what: &str) -> Result<(f64, f64)> {
    if !ld.value.re.is_finite() {
        return Err(Error::Continuation(format!(
            "{what}: non-finite value {}",
            ld.value
        )));
    }
    Ok((ld.value.re, ld.error_estimate + ld.value.im.abs()))
}

fn closed_form_check(geometry: &ModelGeometry, t: f64) -> Result<Option<CrossCheck>> {
    Ok(match *geometry {
        ModelGeometry::Circle { length, mass } => {
            let w = (mass * mass + t).sqrt();
            Some(CrossCheck {
                route: "closed form".into(),
                log_det_closed: 2.0 * (2.0 * (0.5 * w * length).sinh()).ln(),
                log_det_dirichlet: (2.0 * (w * length).sinh() / w).ln(),
                max_deviation: 0.0,
            })
        }
        ModelGeometry::TorusCut { l1, l2, mass } => {
            let m = (mass * mass + t).sqrt();
            Some(CrossCheck {
                route: "lattice sum".into(),
                log_det_closed: epstein_torus_log_det(l1, l2, m)?,
                log_det_dirichlet: epstein_cylinder_log_det(l1, l2, m)?,
                max_deviation: 0.0,
            })
        }
        ModelGeometry::Interval { .. } => None,
    })
}

/// The three regularized determinants of `A + t` and the constant
/// `log c = log Det A - log Det(A_Gamma, B) - log Det R`.
pub fn glue(geometry: &ModelGeometry, k_max: u64, t: f64) -> Result<GluingReport> {
    if matches!(geometry, ModelGeometry::Interval { .. }) {
        return Err(Error::Domain(
            "gluing needs a Circle or TorusCut geometry".into(),
        ));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    if k_max == 0 {
        return Err(Error::Domain("k_max must be positive".into()));
    }
    let shift = Complex64::new(t, 0.0);
    let (closed, e_closed) = closed_log_det(geometry, shift, fiber_budget(k_max))
        .and_then(|ld| real_part(ld, "closed"))
        .map_err(|e| e.context("closed log-determinant"))?;
    let (dir, e_dir) = dirichlet_log_det(geometry, shift, fiber_budget(k_max))
        .and_then(|ld| real_part(ld, "dirichlet"))
        .map_err(|e| e.context("Dirichlet log-determinant"))?;
    let root = roots_of_minus_one(1)?[0];
    let (r, e_r) = dtn_spectrum(geometry, &root, t, k_max)
        .and_then(|s| s.log_det())
        .and_then(|ld| real_part(ld, "dtn"))
        .map_err(|e| e.context("DtN log-determinant"))?;
    let log_c = closed - dir - r;
    let mut cross_check = closed_form_check(geometry, t).map_err(|e| e.context("cross-check"))?;
    if let Some(cc) = cross_check.as_mut() {
        cc.max_deviation = (cc.log_det_closed - closed)
            .abs()
            .max((cc.log_det_dirichlet - dir).abs());
    }
    Ok(GluingReport {
        geometry: *geometry,
        t,
        k_max,
        log_det_closed: closed,
        log_det_dirichlet: dir,
        log_det_r: r,
        log_c,
        residual: closed - dir - r - log_c,
        errors: GluingErrors {
            log_det_closed: e_closed,
            log_det_dirichlet: e_dir,
            log_det_r: e_r,
            log_c: e_closed + e_dir + e_r,
        },
        cross_check,
    })
}

/// Both sides of `logDet(A^d + t^d) - logDet(A_Gamma^d + t^d, B_d(0)) = c~ + sum_k logDet R(alpha_k t)`
/// along a grid in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTrace {
    pub geometry: ModelGeometry,
    pub d: usize,
    pub t: Vec<f64>,
    pub log_det_closed: Vec<f64>,
    pub log_det_dirichlet: Vec<f64>,
    pub log_det_r_sum: Vec<f64>,
    /// `closed - dirichlet - r_sum`.
    pub difference: Vec<f64>,
    pub errors: Vec<f64>,
    /// Largest imaginary part met in the root sums before taking real parts.
    pub max_imaginary: f64,
    pub c_tilde: f64,
    pub max_deviation: f64,
}

/// `sum_k f(-alpha_k t)` over the roots of `alpha^d = -1`; the closed and
/// Dirichlet powers factor as `prod_k (A - alpha_k t)`.
fn root_sum(d: usize, t: f64, f: impl Fn(&RootOfMinusOne) -> Result<LogDet>) -> Result<LogDet> {
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for root in roots_of_minus_one(d)? {
        let ld =
            f(&root).map_err(|e| e.context(&format!("root alpha_{} at t = {t}", root.index)))?;
        value += ld.value;
        err += ld.error_estimate;
    }
    Ok(LogDet {
        value,
        error_estimate: err,
    })
}

pub(crate) fn closed_power_log_det(
    geometry: &ModelGeometry,
    d: usize,
    t: f64,
    k_max: u64,
) -> Result<LogDet> {
    root_sum(d, t, |a| {
        closed_log_det(geometry, -a.value * t, fiber_budget(k_max))
    })
}

pub(crate) fn dirichlet_power_log_det(
    geometry: &ModelGeometry,
    d: usize,
    t: f64,
    k_max: u64,
) -> Result<LogDet> {
    root_sum(d, t, |a| {
        dirichlet_log_det(geometry, -a.value * t, fiber_budget(k_max))
    })
}

pub(crate) fn dtn_root_sum(
    geometry: &ModelGeometry,
    d: usize,
    t: f64,
    k_max: u64,
) -> Result<LogDet> {
    root_sum(d, t, |a| dtn_spectrum(geometry, a, t, k_max)?.log_det())
}

pub fn verify_eq41(
    geometry: &ModelGeometry,
    d: usize,
    t_grid: &[f64],
    k_max: u64,
) -> Result<FamilyTrace> {
    if d != geometry.dimension() {
        return Err(Error::Domain(format!(
            "d = {d} must equal the dimension {}",
            geometry.dimension()
        )));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Domain("t grid must be nonempty and positive".into()));
    }
    let rows = crate::par::map(t_grid, |&t| -> Result<_> {
        let c =
            closed_power_log_det(geometry, d, t, k_max).map_err(|e| e.context("closed power"))?;
        let b = dirichlet_power_log_det(geometry, d, t, k_max)
            .map_err(|e| e.context("Dirichlet power"))?;
        let r = dtn_root_sum(geometry, d, t, k_max).map_err(|e| e.context("DtN root sum"))?;
        Ok((c, b, r))
    });
    let mut trace = FamilyTrace {
        geometry: *geometry,
        d,
        t: t_grid.to_vec(),
        log_det_closed: vec![],
        log_det_dirichlet: vec![],
        log_det_r_sum: vec![],
        difference: vec![],
        errors: vec![],
        max_imaginary: 0.0,
        c_tilde: 0.0,
        max_deviation: 0.0,
    };
    for row in rows {
        let (c, b, r) = row?;
        for v in [c.value, b.value, r.value] {
            if !v.re.is_finite() {
                return Err(Error::Continuation(format!("non-finite family value {v}")));
            }
            trace.max_imaginary = trace.max_imaginary.max(v.im.abs());
        }
        trace.log_det_closed.push(c.value.re);
        trace.log_det_dirichlet.push(b.value.re);
        trace.log_det_r_sum.push(r.value.re);
        trace.difference.push(c.value.re - b.value.re - r.value.re);
        trace
            .errors
            .push(c.error_estimate + b.error_estimate + r.error_estimate);
    }
    trace.c_tilde = trace.difference.iter().sum::<f64>() / trace.difference.len() as f64;
    trace.max_deviation = trace
        .difference
        .iter()
        .map(|x| (x - trace.c_tilde).abs())
        .fold(0.0, f64::max);
    Ok(trace)
}

/// Central differences at `h`, `h/2`, `h/4` against a trace formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub t: f64,
    pub h: f64,
    pub fd: f64,
    pub fd_half: f64,
    pub fd_quarter: f64,
    pub trace: f64,
    /// `|fd - trace| / |trace|`.
    pub rel_error: f64,
    /// `(fd - fd_half) / (fd_half - fd_quarter)`, close to 4 for a second-order stencil.
    pub order_ratio: f64,
}

fn central(f: &dyn Fn(f64) -> Result<f64>, t: f64, h: f64) -> Result<f64> {
    Ok((f(t + h)? - f(t - h)?) / (2.0 * h))
}

fn derivative_check(
    f: &dyn Fn(f64) -> Result<f64>,
    t: f64,
    h: f64,
    trace: f64,
) -> Result<DerivativeCheck> {
    if !(t > h && h > 0.0) {
        return Err(Error::Domain(format!(
            "need t > h > 0, got t = {t}, h = {h}"
        )));
    }
    let fd = central(f, t, h)?;
    let fd_half = central(f, t, 0.5 * h)?;
    let fd_quarter = central(f, t, 0.25 * h)?;
    Ok(DerivativeCheck {
        t,
        h,
        fd,
        fd_half,
        fd_quarter,
        trace,
        rel_error: (fd - trace).abs() / trace.abs().max(1e-300),
        order_ratio: (fd - fd_half) / (fd_half - fd_quarter),
    })
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Fiber data `(L, nu, m^2)`; `nu = None` for a point cut.
fn fiber_data(geometry: &ModelGeometry) -> Result<(f64, Option<f64>, f64)> {
    geometry.validate()?;
    match *geometry {
        ModelGeometry::Circle { length, mass } => Ok((length, None, mass * mass)),
        ModelGeometry::TorusCut { l1, l2, mass } => Ok((l1, Some(2.0 * PI / l2), mass * mass)),
        ModelGeometry::Interval { .. } => {
            Err(Error::Domain("the interval has no interior cut".into()))
        }
    }
}

/// `sum_(k > k_max) mult sum_a (-a) d/dw^2 log r` with `r ~ 2 w`: the modes
/// beyond the truncation, summed directly to `64 k_max` and by the midpoint
/// integral after that.
fn transverse_tail(nu: f64, mass_sq: f64, t: f64, d: usize, k_max: u64) -> Result<f64> {
    let mut total = Complex64::new(0.0, 0.0);
    let k_far = 64 * (k_max + 1);
    for a in roots_of_minus_one(d)? {
        let c = Complex64::new(mass_sq, 0.0) - a.value * t;
        let direct =
            crate::par::sum_range(k_max + 1, k_far, |k| 1.0 / (c + (nu * k as f64).powi(2)));
        let sc = c.sqrt();
        let far = (sc / (nu * (k_far as f64 + 0.5))).atan() / (nu * sc);
        total += -a.value * (direct + far);
    }
    Ok(total.re)
}

/// `d/dt sum_k log r(alpha_k t)` for one transverse mode from the closed
/// eigenfunctions: `d log r / dw^2 = (r / L) sum_j (kappa_j^2 + w^2)^-2`.
fn mode_trace_eigensum(fiber: f64, mu: f64, t: f64, d: usize, j_max: u64) -> Result<Complex64> {
    let kappa = 2.0 * PI / fiber;
    let mut total = Complex64::new(0.0, 0.0);
    for a in roots_of_minus_one(d)? {
        let shift = a.value * t;
        let w2 = Complex64::new(mu, 0.0) - shift;
        let r = crate::dtn::dtn_value_1d(fiber, mu, shift)?;
        let sum = 1.0 / (w2 * w2)
            + crate::par::sum_range(1, j_max, |j| {
                let den = w2 + (kappa * j as f64).powi(2);
                2.0 / (den * den)
            })
            + 2.0 / (3.0 * kappa.powi(4) * (j_max as f64 + 0.5).powi(3));
        total += -a.value * r / fiber * sum;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma41Report {
    pub geometry: ModelGeometry,
    pub d: usize,
    pub k_max: u64,
    /// Differences of `logDet(A^d + t^d) - logDet(A_Gamma^d + t^d, B_d(0))`
    /// against the resolvent trace on the cut.
    pub lhs: DerivativeCheck,
    /// Central difference of `logDet R_d(t)` at the same `h`.
    pub dtn_fd: f64,
    pub rel_lhs_vs_dtn: f64,
    pub rel_dtn_vs_trace: f64,
}

pub fn verify_lemma41(
    geometry: &ModelGeometry,
    d: usize,
    t: f64,
    h: f64,
    k_max: u64,
) -> Result<Lemma41Report> {
    let (fiber, nu, mass_sq) = fiber_data(geometry)?;
    let lhs = |s: f64| -> Result<f64> {
        Ok(closed_power_log_det(geometry, d, s, k_max)?.value.re
            - dirichlet_power_log_det(geometry, d, s, k_max)?.value.re)
    };
    let rhs = |s: f64| -> Result<f64> { Ok(dtn_root_sum(geometry, d, s, k_max)?.value.re) };
    let j_max = 4096;
    let trace = match nu {
        None => mode_trace_eigensum(fiber, mass_sq, t, d, j_max)?.re,
        Some(nu) => {
            let ks: Vec<u64> = (0..=k_max).collect();
            let parts = crate::par::map(&ks, |&k| {
                let mu = mass_sq + (nu * k as f64).powi(2);
                mode_trace_eigensum(fiber, mu, t, d, j_max).map(|v| {
                    if k == 0 {
                        v.re
                    } else {
                        2.0 * v.re
                    }
                })
            });
            let mut acc = crate::par::CompensatedSum::new();
            for p in parts {
                acc.add(p?);
            }
            acc.value() + transverse_tail(nu, mass_sq, t, d, k_max)?
        }
    };
    let check = derivative_check(&lhs, t, h, trace)?;
    let dtn_fd = central(&rhs, t, h)?;
    Ok(Lemma41Report {
        geometry: *geometry,
        d,
        k_max,
        lhs: check,
        dtn_fd,
        rel_lhs_vs_dtn: relative(check.fd, dtn_fd),
        rel_dtn_vs_trace: relative(dtn_fd, trace),
    })
}

/// Families `Q(t)` for the log-derivative identity `d/dt logDet Q = tr(Q^-1 Q')`.
#[derive(Debug, Clone)]
pub enum TraceFamily {
    /// `A^d + t^d` for a spectrum `A`.
    Spectral { seq: EigenSequence, d: u32 },
    /// `diag(a_i + b_i t)`.
    Diagonal(Vec<(f64, f64)>),
    /// The triangular DtN system `R_d(t)`, truncated at `k_max` transverse modes.
    Dtn {
        geometry: ModelGeometry,
        d: usize,
        k_max: u64,
    },
}

/// `r'(s)` for `r(s) = 2 sqrt(s) tanh(sqrt(s) L / 2)`.
fn dtn_slope(fiber: f64, s: Complex64) -> Complex64 {
    let w = s.sqrt();
    let e = (-w * fiber).exp();
    let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    crate::dtn::tanh_right(0.5 * w * fiber) / w + 0.5 * fiber * sech2
}

pub fn verify_lemma310(family: &TraceFamily, t: f64, h: f64) -> Result<DerivativeCheck> {
    match family {
        TraceFamily::Spectral { seq, d } => {
            let pow = crate::spectral_models::power_sequence(seq, *d)?;
            let dd = *d as i32;
            let f = |s: f64| -> Result<f64> { Ok(log_det(&pow, c_re(s.powi(dd)))?.value.re) };
            let z = zeta_laurent_at(&pow, c_re(1.0), c_re(t.powi(dd)))?;
            derivative_check(&f, t, h, *d as f64 * t.powi(dd - 1) * z.finite_part.re)
        }
        TraceFamily::Diagonal(entries) => {
            let f = |s: f64| -> Result<f64> {
                entries
                    .iter()
                    .map(|(a, b)| {
                        let q = a + b * s;
                        if q > 0.0 {
                            Ok(q.ln())
                        } else {
                            Err(Error::Branch(format!("diagonal entry {q} is not positive")))
                        }
                    })
                    .sum()
            };
            let trace = entries.iter().map(|(a, b)| b / (a + b * t)).sum();
            derivative_check(&f, t, h, trace)
        }
        TraceFamily::Dtn { geometry, d, k_max } => {
            let (fiber, nu, mass_sq) = fiber_data(geometry)?;
            let roots = roots_of_minus_one(*d)?;
            let tri = crate::dtn::assemble_triangular_dtn(geometry, t, *d, *k_max)?;
            // Q and Q' are upper triangular, so tr(Q^-1 Q') = sum_i Q'_ii / Q_ii
            let mut acc = crate::par::CompensatedComplexSum::default();
            for mode in &tri.modes {
                let mu = mass_sq + (nu.unwrap_or(0.0) * mode.mode_index as f64).powi(2);
                for (i, a) in roots.iter().enumerate() {
                    let dq = -a.value * dtn_slope(fiber, c_re(mu) - a.value * t);
                    acc.add(mode.multiplicity as f64 * dq / mode.matrix[(i, i)]);
                }
            }
            let mut trace = acc.value().re;
            if let Some(nu) = nu {
                trace += transverse_tail(nu, mass_sq, t, *d, *k_max)?;
            }
            let f = |s: f64| -> Result<f64> { Ok(dtn_root_sum(geometry, *d, s, *k_max)?.value.re) };
            derivative_check(&f, t, h, trace)
        }
    }
}

fn c_re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIdentityReport {
    pub d: u32,
    pub log_det_power: f64,
    pub d_log_det: f64,
    pub difference: f64,
    pub error_estimate: f64,
}

/// `logDet(A^d)` from the powered spectrum and its own Weyl law against
/// `d logDet(A)`.
pub fn verify_power_identity(seq: &EigenSequence, d: u32) -> Result<PowerIdentityReport> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "power d must be at least 2, got {d}"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let pow = log_det(&crate::spectral_models::power_sequence(seq, d)?, zero)
        .map_err(|e| e.context("powered spectrum"))?;
    let base = log_det(seq, zero).map_err(|e| e.context("base spectrum"))?;
    let d_log_det = d as f64 * base.value.re;
    Ok(PowerIdentityReport {
        d,
        log_det_power: pow.value.re,
        d_log_det,
        difference: pow.value.re - d_log_det,
        error_estimate: pow.error_estimate
            + d as f64 * base.error_estimate
            + pow.value.im.abs()
            + base.value.im.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularReport {
    pub geometry: ModelGeometry,
    pub d: usize,
    pub t: f64,
    pub k_max: u64,
    /// Largest per-mode gap between `log det R~_d` and `sum_k log r(alpha_k t)`.
    pub per_mode_max_deviation: f64,
    /// Largest per-mode `|log(det(Omega R~ Omega^-1) / det R~)|`.
    pub omega_max_deviation: f64,
    /// Regularized log-determinant assembled from the matrix diagonals.
    pub log_det_triangular: Complex64,
    /// `sum_k logDet R(alpha_k t)` from the DtN spectra.
    pub log_det_diagonal_sum: Complex64,
    pub difference: f64,
    pub error_estimate: f64,
}

pub fn verify_triangular_identity(
    geometry: &ModelGeometry,
    d: usize,
    t: f64,
    k_max: u64,
) -> Result<TriangularReport> {
    let (fiber, nu, mass_sq) = fiber_data(geometry)?;
    let roots = roots_of_minus_one(d)?;
    let tri = crate::dtn::assemble_triangular_dtn(geometry, t, d, k_max)?;
    let conv = crate::zeta_engine::BranchConvention::default();
    let spectra = roots
        .iter()
        .map(|a| dtn_spectrum(geometry, a, t, k_max))
        .collect::<Result<Vec<_>>>()?;
    let mut finite = Vec::new();
    let (mut per_mode, mut omega) = (0.0f64, 0.0f64);
    for (idx, mode) in tri.modes.iter().enumerate() {
        let diag = mode.matrix.diagonal();
        for z in diag.iter() {
            conv.check(*z)
                .map_err(|e| e.context(&format!("triangular DtN mode {}", mode.mode_index)))?;
            for _ in 0..mode.multiplicity {
                finite.push(*z);
            }
        }
        let direct: Complex64 = spectra.iter().map(|s| s.modes[idx].value.ln()).sum();
        per_mode = per_mode.max((mode.log_det() - direct).norm());
        let conj = tri.conjugated(idx)?;
        let ratio = conj.determinant() / diag.iter().product::<Complex64>();
        omega = omega.max(ratio.ln().norm());
    }
    let mut branches = Vec::new();
    if let Some(nu) = nu {
        for a in &roots {
            let c = Complex64::new(mass_sq, 0.0) - a.value * t;
            let branch = Branch::new(2, k_max + 1, crate::dtn::sqrt_law(nu, c)?, move |k| {
                let w = (c + (nu * k as f64).powi(2)).sqrt();
                2.0 * w * crate::dtn::tanh_right(w * (0.5 * fiber))
            })?
            .with_min_tail_index((40.0 / (nu * fiber)).ceil() as u64 + 1);
            branches.push(branch);
        }
    }
    let combined = EigenSequence::new(finite, branches);
    let tri_ld =
        log_det(&combined, Complex64::new(0.0, 0.0)).map_err(|e| e.context("triangular route"))?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut err = tri_ld.error_estimate;
    for s in &spectra {
        let ld = s.log_det().map_err(|e| e.context("diagonal route"))?;
        sum += ld.value;
        err += ld.error_estimate;
    }
    Ok(TriangularReport {
        geometry: *geometry,
        d,
        t,
        k_max,
        per_mode_max_deviation: per_mode,
        omega_max_deviation: omega,
        log_det_triangular: tri_ld.value,
        log_det_diagonal_sum: sum,
        difference: (tri_ld.value - sum).norm(),
        error_estimate: err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    /// Defaults to [`FitRange::default_for`] the cut dimension.
    pub range: Option<FitRange>,
    /// Mode budget for the direct `glue()` comparison.
    pub k_max: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda_min: 1e2,
            lambda_max: 1e4,
            points: 40,
            range: None,
            k_max: 512,
        }
    }
}

impl FitConfig {
    /// On a circle cut the DtN family carries corrections `exp(-L1 Re sqrt(alpha t))`
    /// which must sit below the fit residual on the whole grid.
    pub fn for_geometry(geometry: &ModelGeometry) -> Self {
        match geometry {
            ModelGeometry::TorusCut { .. } => Self {
                lambda_min: 1e3,
                lambda_max: 1e5,
                ..Self::default()
            },
            _ => Self::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiZeroExtraction {
    pub geometry: ModelGeometry,
    pub d: usize,
    /// `pi_0` of `t -> sum_k logDet R(alpha_k t)`.
    pub pi0: Coefficient,
    /// `-pi_0 / d`.
    pub log_c: f64,
    pub log_c_error: f64,
    pub glue_log_c: f64,
    pub glue_error: f64,
    pub fit_residual: f64,
}

/// The family `t -> sum_k logDet R(alpha_k t)` on the cut.
pub fn dtn_root_family(geometry: &ModelGeometry, d: usize) -> Result<LogDetFamily> {
    let roots = roots_of_minus_one(d)?;
    match *geometry {
        ModelGeometry::Circle { length, mass } => {
            geometry.validate()?;
            LogDetFamily::new(
                format!("dtn(L={length},m={mass},d={d})"),
                1.0,
                0,
                move |t| {
                    let mut value = Complex64::new(0.0, 0.0);
                    for a in &roots {
                        value += crate::dtn::dtn_value_1d(length, mass * mass, a.value * t)?.ln();
                    }
                    Ok(LogDet {
                        value,
                        error_estimate: 1e-15 * value.norm(),
                    })
                },
            )
        }
        ModelGeometry::TorusCut { .. } => LogDetFamily::torus_dtn(geometry, d),
        ModelGeometry::Interval { .. } => {
            Err(Error::Domain("the interval has no interior cut".into()))
        }
    }
}

/// `log c = -(1/d) pi_0(sum_k logDet R(alpha_k t))`, next to the direct value from [`glue`].
pub fn extract_c_from_pi0(
    geometry: &ModelGeometry,
    d: usize,
    config: &FitConfig,
) -> Result<PiZeroExtraction> {
    let family = dtn_root_family(geometry, d)?;
    let grid = log_grid(config.lambda_min, config.lambda_max, config.points);
    let samples = sample_family(&family, &grid).map_err(|e| e.context("DtN family"))?;
    let range = config
        .range
        .unwrap_or_else(|| FitRange::default_for(family.dim));
    let expansion = fit_expansion(&samples, family.chi, family.dim, range)
        .map_err(|e| e.context("DtN family fit"))?;
    let p = pi0(&expansion);
    let direct = glue(geometry, config.k_max, 0.0)?;
    Ok(PiZeroExtraction {
        geometry: *geometry,
        d,
        pi0: p,
        log_c: -p.value / d as f64,
        log_c_error: p.std_error / d as f64,
        glue_log_c: direct.log_c,
        glue_error: direct.errors.log_c,
        fit_residual: expansion.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn single_mode_reduces_to_fiber_closed_forms() {
        let (l, mu) = (1.7, 2.3f64);
        let w = mu.sqrt();
        let cross = EigenSequence::from_values(&[mu]);
        let circle = mode_sum_log_det(FiberKind::Circle, l, &cross, c(0.0), 64).unwrap();
        assert!((circle.value.re - 2.0 * (2.0 * (0.5 * w * l).sinh()).ln()).abs() < 1e-13);
        let dir = mode_sum_log_det(FiberKind::Dirichlet, l, &cross, c(0.0), 64).unwrap();
        assert!((dir.value.re - (2.0 * (w * l).sinh() / w).ln()).abs() < 1e-13);
    }

    #[test]
    fn bessel_lattice_sum_reduces_to_circle() {
        // a long torus is a circle of length L1 times L2 copies of the bulk
        let l1 = 1.3;
        let ld = epstein_torus_log_det(l1, 60.0, 1.0).unwrap();
        let via_modes = mode_sum_log_det(
            FiberKind::Circle,
            l1,
            &circle_eigenvalues(60.0, 1.0).unwrap(),
            c(0.0),
            4096,
        )
        .unwrap();
        assert!((ld - via_modes.value.re).abs() < 1e-9, "{ld} {via_modes:?}");
    }

    #[test]
    fn torus_routes_agree() {
        for (l1, l2, m) in [(2.0, 2.0 * PI, 1.0), (1.0, 3.0, 0.5), (3.0, 1.5, 2.0)] {
            let g = ModelGeometry::TorusCut { l1, l2, mass: m };
            let closed = closed_log_det(&g, c(0.0), 4096).unwrap().value.re;
            let dir = dirichlet_log_det(&g, c(0.0), 4096).unwrap().value.re;
            let (sc, sd) = swapped_log_dets(&g, c(0.0), 4096).unwrap();
            let ec = epstein_torus_log_det(l1, l2, m).unwrap();
            let ed = epstein_cylinder_log_det(l1, l2, m).unwrap();
            assert!((closed - ec).abs() < 1e-9, "{closed} {ec}");
            assert!((dir - ed).abs() < 1e-9, "{dir} {ed}");
            assert!((sc.value.re - ec).abs() < 1e-9);
            assert!((sd.value.re - ed).abs() < 1e-9);
        }
    }

    #[test]
    fn complex_shift_routes_agree() {
        let g = ModelGeometry::TorusCut {
            l1: 2.0,
            l2: 2.0 * PI,
            mass: 1.0,
        };
        for shift in [Complex64::new(0.0, 1.0), Complex64::new(0.3, -2.0)] {
            let closed = closed_log_det(&g, shift, 4096).unwrap().value;
            let dir = dirichlet_log_det(&g, shift, 4096).unwrap().value;
            let (sc, sd) = swapped_log_dets(&g, shift, 4096).unwrap();
            assert!((closed - sc.value).norm() < 1e-9, "{closed} {:?}", sc.value);
            assert!((dir - sd.value).norm() < 1e-9, "{dir} {:?}", sd.value);
        }
    }

    #[test]
    fn circle_constant_is_minus_log_two() {
        for (l, m) in [(2.0, 1.0), (5.0, 0.5), (1.0, 2.0), (4.0, 0.5)] {
            let rep = glue(&ModelGeometry::Circle { length: l, mass: m }, 1, 0.0).unwrap();
            assert!((rep.log_c + LN_2).abs() < 1e-10, "{rep:?}");
            assert_eq!(rep.residual, 0.0);
            assert!(rep.cross_check.unwrap().max_deviation < 1e-10);
        }
        // closed forms for L = 2, m = 1
        let rep = glue(
            &ModelGeometry::Circle {
                length: 2.0,
                mass: 1.0,
            },
            1,
            0.0,
        )
        .unwrap();
        assert!((rep.log_det_closed - 2.0 * (2.0 * 1f64.sinh()).ln()).abs() < 1e-12);
        assert!((rep.log_det_dirichlet - (2.0 * 2f64.sinh()).ln()).abs() < 1e-12);
        assert!((rep.log_det_r - (2.0 * 1f64.tanh()).ln()).abs() < 1e-12);
        let lhs = 4.0 * 1f64.sinh().powi(2);
        let rhs = 0.5 * (2.0 * 2f64.sinh()) * (2.0 * 1f64.tanh());
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn circle_constant_for_shifted_operator() {
        for t in [0.5, 3.0] {
            let rep = glue(
                &ModelGeometry::Circle {
                    length: 2.0,
                    mass: 1.0,
                },
                1,
                t,
            )
            .unwrap();
            assert!((rep.log_c + LN_2).abs() < 1e-10);
        }
    }

    #[test]
    fn external_constant_sets_residual() {
        let rep = glue(
            &ModelGeometry::Circle {
                length: 2.0,
                mass: 1.0,
            },
            1,
            0.0,
        )
        .unwrap();
        let ext = rep.with_log_c(0.0, 0.0);
        assert!((ext.residual + LN_2).abs() < 1e-10);
        assert!(glue(
            &ModelGeometry::Interval {
                length: 1.0,
                mass: 1.0,
                bc: BoundaryConditionKind::Dirichlet
            },
            1,
            0.0
        )
        .is_err());
        assert!(matches!(
            glue(
                &ModelGeometry::Circle {
                    length: 1.0,
                    mass: 0.0
                },
                1,
                0.0
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn torus_constant() {
        let g = ModelGeometry::TorusCut {
            l1: 2.0,
            l2: 2.0 * PI,
            mass: 1.0,
        };
        let a = glue(&g, 512, 0.0).unwrap();
        let b = glue(&g, 512, 0.0).unwrap();
        assert!((a.log_c - b.log_c).abs() < 1e-12);
        assert!(
            a.cross_check.as_ref().unwrap().max_deviation < 1e-8,
            "{a:?}"
        );
        // golden value
        assert!(a.log_c.abs() < 1e-9, "{}", a.log_c);
    }

    #[test]
    fn torus_constant_is_local() {
        let mut vals = Vec::new();
        for l1 in [1.0, 2.0, 3.0] {
            for m in [0.5, 1.0, 2.0] {
                vals.push(
                    glue(
                        &ModelGeometry::TorusCut {
                            l1,
                            l2: 2.0 * PI,
                            mass: m,
                        },
                        512,
                        0.0,
                    )
                    .unwrap()
                    .log_c,
                );
            }
        }
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
            - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-8, "{vals:?}");
    }

    #[test]
    fn eq41_circle() {
        let g = ModelGeometry::Circle {
            length: 2.0,
            mass: 1.0,
        };
        let tr = verify_eq41(&g, 1, &[0.5, 1.0, 2.0, 5.0], 1).unwrap();
        assert!(tr.max_deviation < 1e-10, "{tr:?}");
        assert!((tr.c_tilde + LN_2).abs() < 1e-10);
        // closed forms at t = 1
        let w = 2f64.sqrt();
        assert!((tr.log_det_closed[1] - 2.0 * (2.0 * w.sinh()).ln()).abs() < 1e-10);
        assert!((tr.log_det_r_sum[1] - (2.0 * w * w.tanh()).ln()).abs() < 1e-12);
    }

    #[test]
    fn eq41_circle_squared_matches_direct_power() {
        // logDet(A^2 + t^2) from the squared spectrum, no factorization
        let g = ModelGeometry::Circle {
            length: 2.0,
            mass: 1.0,
        };
        let seq = circle_eigenvalues(2.0, 1.0).unwrap();
        let sq = crate::spectral_models::power_sequence(&seq, 2).unwrap();
        for t in [0.5, 2.0] {
            let direct = log_det(&sq, c(t * t)).unwrap().value.re;
            let factored = closed_power_log_det(&g, 2, t, 1).unwrap();
            assert!(
                (direct - factored.value.re).abs() < 1e-8,
                "{direct} {factored:?}"
            );
            assert!(factored.value.im.abs() < 1e-12);
        }
        let tr = verify_eq41(&g, 1, &[1.0], 1).unwrap();
        assert_eq!(tr.max_deviation, 0.0);
        assert!(verify_eq41(&g, 2, &[1.0], 1).is_err());
    }

    #[test]
    fn eq41_torus() {
        let g = ModelGeometry::TorusCut {
            l1: 2.0,
            l2: 2.0 * PI,
            mass: 1.0,
        };
        let tr = verify_eq41(&g, 2, &[0.5, 1.0, 2.0, 5.0], 256).unwrap();
        assert!(tr.max_deviation < 1e-6, "{tr:?}");
        assert!(tr.max_imaginary < 1e-10, "{tr:?}");
        // the root sums at t -> 0 collapse onto twice the glue() triple
        let rep = glue(&g, 256, 0.0).unwrap();
        assert!(
            (tr.c_tilde - 2.0 * rep.log_c).abs() < 1e-6,
            "{} {}",
            tr.c_tilde,
            rep.log_c
        );
    }

    #[test]
    fn lemma41_circle() {
        let g = ModelGeometry::Circle {
            length: 2.0,
            mass: 1.0,
        };
        let rep = verify_lemma41(&g, 1, 1.0, 1e-3, 1).unwrap();
        let w = 2f64.sqrt();
        let exact = (1.0 / (2.0 * w)) * (1.0 / w + 2.0 / (2.0 * w).sinh());
        assert!(relative(rep.lhs.fd, exact) < 1e-6, "{rep:?} {exact}");
        assert!(relative(rep.lhs.trace, exact) < 1e-9, "{rep:?} {exact}");
        assert!(rep.rel_lhs_vs_dtn < 1e-8);
        assert!((rep.lhs.order_ratio - 4.0).abs() < 0.05, "{rep:?}");
    }

    #[test]
    fn lemma41_torus() {
        let g = ModelGeometry::TorusCut {
            l1: 2.0,
            l2: 2.0 * PI,
            mass: 1.0,
        };
        for t in [0.5, 1.0, 2.0] {
            let rep = verify_lemma41(&g, 2, t, 1e-3, 64).unwrap();
            assert!(rep.lhs.rel_error < 1e-4, "{rep:?}");
            assert!(rep.rel_lhs_vs_dtn < 1e-4, "{rep:?}");
            assert!(rep.rel_dtn_vs_trace < 1e-4, "{rep:?}");
        }
    }

    #[test]
    fn lemma310_examples() {
        // A + t on the circle L = 2, m = 1: coth(w)/w
        let seq = circle_eigenvalues(2.0, 1.0).unwrap();
        let rep = verify_lemma310(
            &TraceFamily::Spectral {
                seq: seq.clone(),
                d: 1,
            },
            1.0,
            1e-3,
        )
        .unwrap();
        let w = 2f64.sqrt();
        assert!(relative(rep.trace, 1.0 / (w * w.tanh())) < 1e-10, "{rep:?}");
        assert!(rep.rel_error < 1e-6);
        let sq = verify_lemma310(&TraceFamily::Spectral { seq, d: 2 }, 1.0, 1e-3).unwrap();
        assert!(sq.rel_error < 1e-6, "{sq:?}");
        let diag = verify_lemma310(&TraceFamily::Diagonal(vec![(1.0, 1.0)]), 1.0, 1e-3).unwrap();
        assert!((diag.trace - 0.5).abs() < 1e-15 && diag.rel_error < 1e-6);
        let g = ModelGeometry::Circle {
            length: 2.0,
            mass: 1.0,
        };
        let r = verify_lemma310(
            &TraceFamily::Dtn {
                geometry: g,
                d: 1,
                k_max: 1,
            },
            1.0,
            1e-3,
        )
        .unwrap();
        // d/dt log(2 w tanh w), w = sqrt(1 + t)
        let exact = (1.0 / w + 1.0 / (w.sinh() * w.cosh())) / (2.0 * w);
        assert!(relative(r.trace, exact) < 1e-12, "{r:?} {exact}");
        assert!(relative(r.fd, exact) < 1e-6);
        assert!((r.order_ratio - 4.0).abs() < 0.05);
    }

    #[test]
    fn lemma310_dtn_torus() {
        let g = ModelGeometry::TorusCut {
            l1: 2.0,
            l2: 2.0 * PI,
            mass: 1.0,
        };
        for t in [0.5, 1.0, 2.0] {
            let r = verify_lemma310(
                &TraceFamily::Dtn {
                    geometry: g,
                    d: 2,
                    k_max: 64,
                },
                t,
                1e-3,
            )
            .unwrap();
            assert!(r.rel_error < 1e-4, "{r:?}");
        }
        assert!(verify_lemma310(&TraceFamily::Diagonal(vec![(1.0, 1.0)]), 1e-4, 1e-3).is_err());
    }

    #[test]
    fn power_identity_examples() {
        let interval = interval_eigenvalues(PI, 0.0, BoundaryConditionKind::Dirichlet).unwrap();
        let rep = verify_power_identity(&interval, 2).unwrap();
        assert!(
            (rep.log_det_power - 2.0 * (2.0 * PI).ln()).abs() < 1e-10,
            "{rep:?}"
        );
        let circle = circle_eigenvalues(2.0, 1.0).unwrap();
        let rep = verify_power_identity(&circle, 2).unwrap();
        assert!(
            (rep.log_det_power - 4.0 * (2.0 * 1f64.sinh()).ln()).abs() < 1e-9,
            "{rep:?}"
        );
        for d in [2, 3] {
            let rep = verify_power_identity(&EigenSequence::from_values(&[3.7]), d).unwrap();
            assert!((rep.log_det_power - d as f64 * 3.7f64.ln()).abs() < 1e-14);
            for seq in [&interval, &circle] {
                assert!(verify_power_identity(seq, d).unwrap().difference.abs() < 1e-8);
            }
        }
        assert!(verify_power_identity(&circle, 1).is_err());
    }

    #[test]
    fn triangular_identity_circle() {
        let g = ModelGeometry::Circle {
            length: 2.0,
            mass: 1.0,
        };
        let rep = verify_triangular_identity(&g, 2, 1.0, 1).unwrap();
        assert!(rep.per_mode_max_deviation < 1e-12, "{rep:?}");
        assert!(rep.omega_max_deviation < 1e-12);
        assert!(rep.difference < 1e-12);
        // conjugate pair: real total
        assert!(rep.log_det_diagonal_sum.im.abs() < 1e-14);
        let zero = verify_triangular_identity(&g, 2, 0.0, 1).unwrap();
        let r0 = (2.0 * 1f64.tanh()).ln();
        assert!((zero.log_det_triangular.re - 2.0 * r0).abs() < 1e-14);
        assert!((zero.log_det_diagonal_sum.re - 2.0 * r0).abs() < 1e-14);
    }

    #[test]
    fn triangular_identity_torus() {
        let g = ModelGeometry::TorusCut {
            l1: 2.0,
            l2: 2.0 * PI,
            mass: 1.0,
        };
        let rep = verify_triangular_identity(&g, 2, 1.0, 256).unwrap();
        assert!(rep.per_mode_max_deviation < 1e-12, "{rep:?}");
        assert!(rep.omega_max_deviation < 1e-12, "{rep:?}");
        assert!(rep.difference < 1e-6, "{rep:?}");
        assert!(rep.log_det_diagonal_sum.im.abs() < 1e-10);
        let zero = verify_triangular_identity(&g, 2, 0.0, 256).unwrap();
        let r0 = dtn_spectrum(&g, &roots_of_minus_one(1).unwrap()[0], 0.0, 0)
            .unwrap()
            .log_det()
            .unwrap()
            .value
            .re;
        assert!((zero.log_det_diagonal_sum.re - 2.0 * r0).abs() < 1e-12);
        assert!(zero.difference < 1e-8);
    }

    #[test]
    fn pi0_route_circle() {
        for m in [1.0, 0.5, 2.0] {
            let g = ModelGeometry::Circle {
                length: 2.0,
                mass: m,
            };
            let ex = extract_c_from_pi0(&g, 1, &FitConfig::default()).unwrap();
            assert!((ex.pi0.value - LN_2).abs() < 1e-4, "{ex:?}");
            assert!((ex.log_c - ex.glue_log_c).abs() < 1e-4);
        }
    }

    #[test]
    fn pi0_route_torus() {
        let g = ModelGeometry::TorusCut {
            l1: 2.0,
            l2: 2.0 * PI,
            mass: 1.0,
        };
        let ex = extract_c_from_pi0(&g, 2, &FitConfig::for_geometry(&g)).unwrap();
        assert!((ex.log_c - ex.glue_log_c).abs() < 1e-6, "{ex:?}");
        assert!((ex.log_c - ex.glue_log_c).abs() < 5.0 * (ex.log_c_error + ex.glue_error) + 1e-9);
        assert!(extract_c_from_pi0(
            &ModelGeometry::Interval {
                length: 1.0,
                mass: 1.0,
                bc: BoundaryConditionKind::Dirichlet
            },
            1,
            &FitConfig::default()
        )
        .is_err());
    }
}

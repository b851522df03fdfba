//! Poisson and Dirichlet-to-Neumann operators of the model geometries,
//! computed mode by mode along the cut.
//!
//! The cut `Gamma` is a point (circle) or a circle of length `L2` (torus).
//! Transversally every mode sees a fiber `[0, L1]` whose two ends are glued to
//! `Gamma`; the DtN value is the jump `u'(L) - u'(0)` of the extension `u` of
//! unit data, `r = 2 w tanh(w L / 2)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::spectral_models::{Branch, EigenSequence, ModelGeometry};
use crate::weyl::WeylDescriptor;
use crate::zeta_engine::{log_det, LogDet};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootOfMinusOne {
    pub index: usize,
    pub order: usize,
    pub value: Complex64,
}

/// `alpha_k = exp(i (pi + 2 k pi) / d)`, `k = 0..d`.
pub fn roots_of_minus_one(d: usize) -> Result<Vec<RootOfMinusOne>> {
    if d == 0 {
        return Err(Error::Domain("order d must be at least 1".into()));
    }
    Ok((0..d)
        .map(|k| {
            let theta = PI * (1.0 + 2.0 * k as f64) / d as f64;
            // exact values on the axes
            let (s, c) = theta.sin_cos();
            let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
            RootOfMinusOne {
                index: k,
                order: d,
                value: Complex64::new(snap(c), snap(s)),
            }
        })
        .collect())
}

/// `tanh(z)` for `Re z >= 0` without overflow.
pub(crate) fn tanh_right(z: Complex64) -> Complex64 {
    let e = (-2.0 * z).exp();
    (ONE - e) / (ONE + e)
}

/// Principal root `w` of `w^2 = mass_sq - shift`; rejects `Re w = 0`.
pub fn fiber_frequency(effective_mass_sq: f64, shift: Complex64) -> Result<Complex64> {
    let w = (Complex64::new(effective_mass_sq, 0.0) - shift).sqrt();
    if !(w.re > 0.0) {
        return Err(Error::Domain(format!(
            "degenerate fiber: w = {w} has no positive real part (mass^2 = {effective_mass_sq}, shift = {shift})"
        )));
    }
    Ok(w)
}

/// `r = 2 w tanh(w L / 2)` with `w^2 = effective_mass_sq - shift`.
pub fn dtn_value_1d(
    fiber_length: f64,
    effective_mass_sq: f64,
    shift: Complex64,
) -> Result<Complex64> {
    if !(fiber_length > 0.0 && fiber_length.is_finite()) {
        return Err(Error::Domain(format!(
            "fiber length must be positive, got {fiber_length}"
        )));
    }
    let w = fiber_frequency(effective_mass_sq, shift)?;
    Ok(2.0 * w * tanh_right(w * (0.5 * fiber_length)))
}

/// Solution of `-u'' + w^2 u = 0` on `[0, L]` with `u(0) = phi_minus`,
/// `u(L) = phi_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub length: f64,
    pub w: Complex64,
    pub phi_plus: Complex64,
    pub phi_minus: Complex64,
}

impl PoissonSolution {
    pub fn w_sq(&self) -> Complex64 {
        self.w * self.w
    }

    /// `sinh(w y) / sinh(w L)` in a form stable for large `Re w`.
    fn ratio(&self, y: f64) -> Complex64 {
        let l = self.length;
        let num = ONE - (-2.0 * self.w * y).exp();
        let den = ONE - (-2.0 * self.w * l).exp();
        (self.w * (y - l)).exp() * num / den
    }

    /// `cosh(w y) / sinh(w L)`
    fn ratio_cosh(&self, y: f64) -> Complex64 {
        let l = self.length;
        let num = ONE + (-2.0 * self.w * y).exp();
        let den = ONE - (-2.0 * self.w * l).exp();
        (self.w * (y - l)).exp() * num / den
    }

    pub fn value(&self, x: f64) -> Complex64 {
        self.phi_minus * self.ratio(self.length - x) + self.phi_plus * self.ratio(x)
    }

    pub fn derivative(&self, x: f64) -> Complex64 {
        self.w
            * (self.phi_plus * self.ratio_cosh(x)
                - self.phi_minus * self.ratio_cosh(self.length - x))
    }

    /// `u'(L) - u'(0)`.
    pub fn jump(&self) -> Complex64 {
        self.derivative(self.length) - self.derivative(0.0)
    }

    /// Discrete residual of `-u'' + w^2 u` at `x` (sixth-order stencil).
    pub fn residual(&self, x: f64) -> Complex64 {
        let h = 0.01 * (0.25 * self.length).min(1.0 / self.w.norm());
        let u = |j: f64| self.value(x + j * h);
        let upp = (2.0 * (u(3.0) + u(-3.0)) - 27.0 * (u(2.0) + u(-2.0))
            + 270.0 * (u(1.0) + u(-1.0))
            - 490.0 * u(0.0))
            / (180.0 * h * h);
        -upp + self.w_sq() * u(0.0)
    }
}

pub fn poisson_extend(
    fiber_length: f64,
    w_sq: Complex64,
    phi_plus: Complex64,
    phi_minus: Complex64,
) -> Result<PoissonSolution> {
    if !(fiber_length > 0.0) {
        return Err(Error::Domain(format!(
            "fiber length must be positive, got {fiber_length}"
        )));
    }
    let w = w_sq.sqrt();
    if !(w.re > 0.0) {
        return Err(Error::Domain(format!(
            "Poisson problem needs Re w > 0, got w = {w}"
        )));
    }
    Ok(PoissonSolution {
        length: fiber_length,
        w,
        phi_plus,
        phi_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtnMode {
    pub mode_index: u64,
    pub multiplicity: u32,
    pub effective_mass_sq: f64,
    pub value: Complex64,
}

/// DtN operator `R(alpha t)` restricted to modes `0..=k_max`, with the exact
/// infinite spectrum available through [`DtNSpectrum::sequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtNSpectrum {
    pub geometry: ModelGeometry,
    pub root: RootOfMinusOne,
    pub t: f64,
    pub shift: Complex64,
    pub modes: Vec<DtnMode>,
    /// `r_k ~ 2 nu k (1 + ...)` for the torus; `None` for a point cut.
    pub weyl: Option<WeylDescriptor>,
}

/// Fiber length, `2 pi / L2`, mass for DtN-capable geometries.
fn cut_data(geometry: &ModelGeometry) -> Result<(f64, Option<f64>, f64)> {
    geometry.validate()?;
    match *geometry {
        ModelGeometry::Circle { length, mass } => Ok((length, None, mass)),
        ModelGeometry::TorusCut { l1, l2, mass } => Ok((l1, Some(2.0 * PI / l2), mass)),
        ModelGeometry::Interval { .. } => Err(Error::Domain(
            "the interval model has no interior cut; use a circle or torus".into(),
        )),
    }
}

/// Descriptor of `2 sqrt(nu^2 k^2 + c)`.
pub(crate) fn sqrt_law(nu: f64, c: Complex64) -> Result<WeylDescriptor> {
    Ok(WeylDescriptor::quadratic(c, nu)?
        .powered(0.5, 40.0)
        .scaled(2.0))
}

/// Exact DtN spectrum on the torus cut: `r_k = 2 w_k tanh(w_k L1 / 2)`,
/// `w_k^2 = m^2 + (nu k)^2 - shift`, `k = 0` once and `k >= 1` twice.
pub fn torus_dtn_sequence(l1: f64, l2: f64, mass: f64, shift: Complex64) -> Result<EigenSequence> {
    ModelGeometry::TorusCut { l1, l2, mass }.validate()?;
    let nu = 2.0 * PI / l2;
    let c = Complex64::new(mass * mass, 0.0) - shift;
    let r0 = dtn_value_1d(l1, mass * mass, shift)?;
    let weyl = sqrt_law(nu, c)?;
    let branch = Branch::new(2, 1, weyl, move |k| {
        let w = (c + (nu * k as f64).powi(2)).sqrt();
        2.0 * w * tanh_right(w * (0.5 * l1))
    })?
    // tanh(w L1 / 2) = 1 to double precision beyond this index
    .with_min_tail_index((40.0 / (nu * l1)).ceil() as u64 + 1);
    Ok(EigenSequence::new(vec![r0], vec![branch]))
}

pub fn dtn_spectrum(
    geometry: &ModelGeometry,
    root: &RootOfMinusOne,
    t: f64,
    k_max: u64,
) -> Result<DtNSpectrum> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    let (fiber, nu, mass) = cut_data(geometry)?;
    let shift = root.value * t;
    let (ks, weyl) = match nu {
        None => (0..=0u64, None),
        Some(nu) => (
            0..=k_max,
            Some(sqrt_law(nu, Complex64::new(mass * mass, 0.0) - shift)?),
        ),
    };
    let ks: Vec<u64> = ks.collect();
    let modes = par::map(&ks, |&k| {
        let mu = mass * mass + (nu.unwrap_or(0.0) * k as f64).powi(2);
        dtn_value_1d(fiber, mu, shift).map(|value| DtnMode {
            mode_index: k,
            multiplicity: if k == 0 { 1 } else { 2 },
            effective_mass_sq: mu,
            value,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(DtNSpectrum {
        geometry: *geometry,
        root: *root,
        t,
        shift,
        modes,
        weyl,
    })
}

impl DtNSpectrum {
    /// The full (untruncated) spectrum.
    pub fn sequence(&self) -> Result<EigenSequence> {
        match self.geometry {
            ModelGeometry::TorusCut { l1, l2, mass } => {
                torus_dtn_sequence(l1, l2, mass, self.shift)
            }
            _ => Ok(EigenSequence::from_complex_values(&[self.modes[0].value])),
        }
    }

    pub fn log_det(&self) -> Result<LogDet> {
        log_det(&self.sequence()?, ZERO)
    }
}

/// Newton divided difference `f[x_0, ..., x_n]` from values, for well
/// separated points.
fn divided_difference_direct(f: &dyn Fn(Complex64) -> Complex64, xs: &[Complex64]) -> Complex64 {
    let mut dd: Vec<Complex64> = xs.iter().map(|x| f(*x)).collect();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            dd[i] = (dd[i + 1] - dd[i]) / (xs[i + level] - xs[i]);
        }
    }
    dd[0]
}

/// `r[s_0, ..., s_n]` for `r(s) = 2 sqrt(s) tanh(sqrt(s) L / 2)`, which is
/// meromorphic in `s` with poles at `-(pi (2n + 1) / L)^2`. Uses the Cauchy
/// integral over a circle around the points when it fits between them and
/// the poles; coincident points are allowed there.
pub fn fiber_divided_difference(fiber_length: f64, sigmas: &[Complex64]) -> Complex64 {
    let r = |s: Complex64| {
        let w = s.sqrt();
        2.0 * w * tanh_right(w * (0.5 * fiber_length))
    };
    let n = sigmas.len();
    if n == 1 {
        return r(sigmas[0]);
    }
    let center = sigmas.iter().sum::<Complex64>() / n as f64;
    let rho = sigmas
        .iter()
        .map(|s| (s - center).norm())
        .fold(0.0, f64::max);
    let dpole = (0..64)
        .map(|j| (center + (PI * (2 * j + 1) as f64 / fiber_length).powi(2)).norm())
        .fold(f64::INFINITY, f64::min);
    if rho >= 0.25 * dpole {
        return divided_difference_direct(&r, sigmas);
    }
    let radius = (rho * dpole).sqrt().max(0.5 * dpole);
    let q = (rho / radius).max(radius / dpole);
    let m = ((40.0 / -q.ln()).ceil() as usize).clamp(64, 4096);
    let mut acc = par::CompensatedComplexSum::default();
    for j in 0..m {
        let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
        let z = center + e * radius;
        let den: Complex64 = sigmas.iter().map(|s| z - s).product();
        acc.add(r(z) * e * radius / den);
    }
    acc.value() / m as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangularMode {
    pub mode_index: u64,
    pub multiplicity: u32,
    pub matrix: DMatrix<Complex64>,
}

impl TriangularMode {
    /// `sum_k log r(alpha_k t)` with principal logarithms.
    pub fn log_det(&self) -> Complex64 {
        self.matrix.diagonal().iter().map(|z| z.ln()).sum()
    }
}

/// Per-mode upper-triangular `R~_d(t)` in the Newton boundary basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularDtN {
    pub d: usize,
    pub t: f64,
    pub modes: Vec<TriangularMode>,
}

/// Entry `(i, k)`, `i <= k`, is the fiber composition
/// `J G_i ... G_{k-1} P_k = (-1)^(k-i) r[s_i, ..., s_k]` with
/// `s_j = mu - alpha_j t`, `G_j` the Dirichlet resolvent and `P_k` the Poisson
/// operator at shift `alpha_k t`.
pub fn assemble_triangular_dtn(
    geometry: &ModelGeometry,
    t: f64,
    d: usize,
    k_max: u64,
) -> Result<TriangularDtN> {
    let roots = roots_of_minus_one(d)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    let (fiber, nu, mass) = cut_data(geometry)?;
    let ks: Vec<u64> = match nu {
        None => vec![0],
        Some(_) => (0..=k_max).collect(),
    };
    let modes = par::map(&ks, |&k| {
        let mu = mass * mass + (nu.unwrap_or(0.0) * k as f64).powi(2);
        let sigmas: Vec<Complex64> = roots
            .iter()
            .map(|a| Complex64::new(mu, 0.0) - a.value * t)
            .collect();
        for a in &roots {
            fiber_frequency(mu, a.value * t)?;
        }
        let mut m = DMatrix::from_element(d, d, ZERO);
        for i in 0..d {
            for kk in i..d {
                let sign = if (kk - i) % 2 == 0 { 1.0 } else { -1.0 };
                m[(i, kk)] = sign * fiber_divided_difference(fiber, &sigmas[i..=kk]);
            }
        }
        Ok(TriangularMode {
            mode_index: k,
            multiplicity: if k == 0 { 1 } else { 2 },
            matrix: m,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(TriangularDtN { d, t, modes })
}

/// Unit lower-triangular change of boundary basis, `B_d(0) = Omega(t) B_d(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    pub d: usize,
    pub t: f64,
    pub matrix: DMatrix<Complex64>,
}

/// Entry `(i, j)` is `t^(i-j) h_(i-j)(alpha_0, ..., alpha_j)`, `h` the complete
/// homogeneous symmetric polynomial.
pub fn omega_matrix(t: f64, d: usize) -> Result<OmegaMatrix> {
    let roots = roots_of_minus_one(d)?;
    // h[j][n] = h_n(alpha_0..alpha_j)
    let mut h = vec![vec![ZERO; d]; d];
    for j in 0..d {
        h[j][0] = ONE;
        for n in 1..d {
            let prev = if j == 0 { ZERO } else { h[j - 1][n] };
            h[j][n] = prev + roots[j].value * h[j][n - 1];
        }
    }
    let matrix = DMatrix::from_fn(d, d, |i, j| {
        if i >= j {
            h[j][i - j] * t.powi((i - j) as i32)
        } else {
            ZERO
        }
    });
    Ok(OmegaMatrix { d, t, matrix })
}

impl TriangularDtN {
    /// `R_d(t) = Omega R~_d Omega^-1` for one mode.
    pub fn conjugated(&self, mode: usize) -> Result<DMatrix<Complex64>> {
        let om = omega_matrix(self.t, self.d)?.matrix;
        let inv = om
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("singular Omega".into()))?;
        Ok(&om * &self.modes[mode].matrix * inv)
    }
}

/// `sum_{|j| <= j_max} |<phi, psi_j>|^2 / (lambda_j - alpha t)` over the
/// eigenfunctions of the closed operator; tends to `<R(alpha t)^-1 phi, phi>`.
/// `phi` holds Fourier coefficients on the cut (mode index, coefficient); for a
/// point cut only mode 0 is meaningful.
pub fn dtn_inverse_eigensum(
    geometry: &ModelGeometry,
    root: &RootOfMinusOne,
    t: f64,
    phi: &[(i64, Complex64)],
    j_max: u64,
) -> Result<Complex64> {
    let (fiber, nu, mass) = cut_data(geometry)?;
    let shift = root.value * t;
    let kappa = 2.0 * PI / fiber;
    let mut total = ZERO;
    for &(k, coef) in phi {
        if nu.is_none() && k != 0 {
            return Err(Error::Domain(
                "a point cut carries only the constant mode".into(),
            ));
        }
        let mu = mass * mass + (nu.unwrap_or(0.0) * k as f64).powi(2);
        let den0 = Complex64::new(mu, 0.0) - shift;
        if den0.norm() < 1e-14 {
            return Err(Error::Domain("eigenvalue coincides with the shift".into()));
        }
        let tail = par::sum_range(1, j_max, |j| 2.0 / (den0 + (kappa * j as f64).powi(2)));
        total += coef.norm_sqr() * (1.0 / den0 + tail) / fiber;
    }
    Ok(total)
}

//! Spectral zeta functions, their continuation to the left of the
//! convergence line, zeta-regularized log-determinants and heat traces.
//!
//! For a branch `lambda_k = a k^p rho_k` with `rho_k = 1 + u(k)` the
//! continuation used is
//!
//! ```text
//! zeta(s) = a^-s [ zeta_H(ps, k0) + sum_{k0..N} k^-ps (rho_k^-s - 1)
//!                  + sum_{j>=1} binom(-s, j) sum_g c_{j,g} zeta_H(ps + g, N + 1) ]
//! ```
//!
//! where `u^j = sum_g c_{j,g} k^-g`. Every factor is expanded as a short
//! Laurent series in `s - s0`, so values, derivatives and residues come out of
//! the same arithmetic.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::weighted_lstsq;
use crate::par;
use crate::quadrature::exp_sinh;
use crate::special::{digamma, gamma_c, hurwitz_zeta_deriv};
use crate::spectral_models::{Branch, EigenSequence};
use crate::weyl::{WeylDescriptor, MAX_DECAY};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaResult {
    pub value_at: Complex64,
    pub derivative_at: Complex64,
    pub error_estimate: f64,
    pub terms_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDet {
    pub value: Complex64,
    pub error_estimate: f64,
}

/// Residue and constant term of `zeta` at a simple pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Laurent {
    pub residue: Complex64,
    pub finite_part: Complex64,
    pub error_estimate: f64,
}

/// Agmon-angle convention: cut along the negative real axis, spectrum kept
/// out of `{|arg z - pi| < eps} U {|z| < eps}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchConvention {
    pub epsilon: f64,
}

impl Default for BranchConvention {
    fn default() -> Self {
        Self { epsilon: 0.1 }
    }
}

impl BranchConvention {
    pub fn cut_angle(&self) -> f64 {
        PI
    }

    pub fn in_sector(&self, z: Complex64) -> bool {
        z.norm() < self.epsilon || z.arg().abs() > PI - self.epsilon || (z.im == 0.0 && z.re < 0.0)
    }

    pub fn check(&self, z: Complex64) -> Result<()> {
        if self.in_sector(z) {
            Err(Error::Branch(format!(
                "spectrum point {z} lies in the Agmon sector (eps = {})",
                self.epsilon
            )))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaOptions {
    /// Allow evaluation where the defining series diverges.
    pub continuation: bool,
    pub tol: f64,
    pub min_n: u64,
    pub max_n: u64,
    pub convention: BranchConvention,
}

impl Default for ZetaOptions {
    fn default() -> Self {
        Self {
            continuation: false,
            tol: 1e-12,
            min_n: 64,
            max_n: 10_000_000,
            convention: BranchConvention::default(),
        }
    }
}

impl ZetaOptions {
    pub fn continued() -> Self {
        Self {
            continuation: true,
            ..Self::default()
        }
    }
}

/// Laurent series `c[0]/e + c[1] + c[2] e + c[3] e^2` in `e = s - s0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Jet([Complex64; 4]);

impl Jet {
    fn regular(c0: Complex64, c1: Complex64, c2: Complex64) -> Self {
        Jet([ZERO, c0, c1, c2])
    }

    fn scale(self, z: Complex64) -> Self {
        Jet(self.0.map(|c| c * z))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        debug_assert!(self.0[0] == ZERO || o.0[0] == ZERO, "double pole");
        let mut out = [ZERO; 4];
        for i in 0..4 {
            for j in 0..4 {
                // degree (i - 1) + (j - 1) stored at index i + j - 1
                let d = i + j;
                if (1..=4).contains(&d) {
                    out[d - 1] += self.0[i] * o.0[j];
                }
            }
        }
        Jet(out)
    }
}

/// `zeta_H(p s + g, q)` around `s0`; missing higher coefficients only ever
/// meet zero partners in the products formed below.
fn hurwitz_jet(p: f64, w0: Complex64, q: f64) -> Jet {
    if (w0 - 1.0).norm() < 1e-12 {
        Jet([
            Complex64::new(1.0 / p, 0.0),
            Complex64::new(-digamma(q), 0.0),
            ZERO,
            ZERO,
        ])
    } else {
        let (v, d) = hurwitz_zeta_deriv(w0, q);
        Jet::regular(v, d * p, ZERO)
    }
}

/// `binom(-s, j)` around `s0`.
fn binom_jet(j: usize, s0: Complex64) -> Jet {
    let mut c = [Complex64::new(1.0, 0.0), ZERO, ZERO];
    for i in 0..j {
        let inv = 1.0 / (i as f64 + 1.0);
        let a0 = (-s0 - i as f64) * inv;
        let a1 = -inv;
        c = [c[0] * a0, c[1] * a0 + c[0] * a1, c[2] * a0 + c[1] * a1];
    }
    Jet::regular(c[0], c[1], c[2])
}

/// `exp(-s L)` around `s0`.
fn power_jet(log_base: Complex64, s0: Complex64) -> Jet {
    let e = (-s0 * log_base).exp();
    Jet::regular(e, -log_base * e, 0.5 * log_base * log_base * e)
}

fn expm1_c(w: Complex64) -> Complex64 {
    let (x, y) = (w.re, w.im);
    let half = (0.5 * y).sin();
    Complex64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
}

/// Principal log of `rho` close to 1 without cancellation.
fn ln_near_one(rho: Complex64) -> Complex64 {
    let m2m1 = (rho.re - 1.0) * (rho.re + 1.0) + rho.im * rho.im;
    Complex64::new(0.5 * m2m1.ln_1p(), rho.im.atan2(rho.re))
}

/// Decay cutoff so that omitted terms are below 1e-17 relative at index `n`;
/// `r` is the scale of the correction coefficients, `|b_g| ~ r^g`.
fn decay_cutoff(n: u64, r: f64) -> f64 {
    let ratio = (n as f64 / r.max(1.0)).ln();
    if ratio <= 0.0 {
        return MAX_DECAY;
    }
    (1.0 + 17.0 * std::f64::consts::LN_10 / ratio).min(MAX_DECAY)
}

fn coefficient_scale(w: &WeylDescriptor) -> f64 {
    w.relative()
        .terms()
        .iter()
        .map(|(g, c)| c.norm().powf(1.0 / g))
        .fold(1.0, f64::max)
}

fn branch_jet(b: &Branch, s0: Complex64, n: u64) -> Result<Jet> {
    let w = &b.weyl;
    let (a, p) = (w.leading(), w.exponent());
    let k0 = b.first_index;
    // H0: zeta_H(p s, k0)
    let mut inner = hurwitz_jet(p, s0 * p, k0 as f64);
    // D: sum_{k0..n} k^-ps (rho^-s - 1) and its derivative
    let log_rho = |k: u64| {
        let kp = (k as f64).powf(p);
        let lam = b.value(k);
        if lam.norm() == 0.0 || (lam.im == 0.0 && lam.re < 0.0) {
            return Err(Error::Branch(format!("eigenvalue {lam} on the branch cut")));
        }
        Ok(ln_near_one(lam / (a * kp)))
    };
    for k in k0..=k0.min(n) + 4 {
        log_rho(k)?;
    }
    let d0 = par::sum_range(k0, n, |k| {
        let lr = log_rho(k).unwrap_or(ZERO);
        (-s0 * p * (k as f64).ln()).exp() * expm1_c(-s0 * lr)
    });
    let d1 = par::sum_range(k0, n, |k| {
        let lk = (k as f64).ln();
        let lr = log_rho(k).unwrap_or(ZERO);
        let kps = (-s0 * p * lk).exp();
        -p * lk * kps * expm1_c(-s0 * lr) - lr * kps * (-s0 * lr).exp()
    });
    inner += Jet::regular(d0, d1, ZERO);
    let q = (n + 1) as f64;
    for (j, pw) in w
        .relative()
        .powers(decay_cutoff(n, coefficient_scale(w)))
        .iter()
        .enumerate()
    {
        let bj = binom_jet(j + 1, s0);
        for (g, c) in pw.terms() {
            inner += (bj * hurwitz_jet(p, s0 * p + *g, q)).scale(*c);
        }
    }
    Ok((power_jet(Complex64::new(a.ln(), 0.0), s0) * inner)
        .scale(Complex64::new(b.multiplicity as f64, 0.0)))
}

fn finite_jet(z: Complex64, s0: Complex64) -> Result<Jet> {
    if z.norm() == 0.0 || (z.im == 0.0 && z.re < 0.0) {
        return Err(Error::Branch(format!("eigenvalue {z} on the branch cut")));
    }
    Ok(power_jet(z.ln(), s0))
}

/// Index from which a branch's tail series is used at truncation `n`.
fn branch_start(b: &Branch, opts: &ZetaOptions) -> u64 {
    opts.min_n.max(b.min_tail_index).max(b.first_index)
}

fn sequence_jet(
    seq: &EigenSequence,
    s0: Complex64,
    scale_n: u64,
    opts: &ZetaOptions,
) -> Result<(Jet, u64)> {
    let mut total = Jet::default();
    let mut terms = seq.finite().len() as u64;
    for z in seq.finite() {
        total += finite_jet(*z, s0)?;
    }
    for b in seq.branches() {
        let n = branch_start(b, opts).saturating_mul(scale_n);
        total += branch_jet(b, s0, n)?;
        terms += (n + 1 - b.first_index) * b.multiplicity as u64;
    }
    Ok((total, terms))
}

/// Doubles the truncation until the selected coefficient settles.
fn converged_jet(
    seq: &EigenSequence,
    s0: Complex64,
    opts: &ZetaOptions,
    watch: usize,
) -> Result<(Jet, f64, u64)> {
    let (mut prev, _) = sequence_jet(seq, s0, 1, opts)?;
    if seq.branches().is_empty() {
        return Ok((prev, 0.0, seq.finite().len() as u64));
    }
    let base = seq
        .branches()
        .iter()
        .map(|b| branch_start(b, opts))
        .max()
        .unwrap_or(1);
    let mut scale = 2u64;
    let mut best: Option<(Jet, f64, u64)> = None;
    let mut rising = 0;
    loop {
        let (cur, terms) = sequence_jet(seq, s0, scale, opts)?;
        let diff = (cur.0[watch] - prev.0[watch]).norm() + (cur.0[0] - prev.0[0]).norm();
        let mag = cur.0[watch].norm().max(1.0);
        if diff <= opts.tol * mag {
            return Ok((cur, diff.max(f64::EPSILON * mag), terms));
        }
        match &best {
            Some((_, d, _)) if diff >= *d => rising += 1,
            _ => {
                best = Some((cur, diff, terms));
                rising = 0;
            }
        }
        // rounding in the head sum now grows faster than the truncation error shrinks
        if rising >= 3 {
            let (jet, d, t) = best.expect("set on the first pass");
            if d <= 1e-6 * mag {
                return Ok((jet, d, t));
            }
        }
        if base.saturating_mul(scale * 2) > opts.max_n {
            let (jet, d, t) = best.expect("set on the first pass");
            if d <= 1e-6 * mag {
                return Ok((jet, d, t));
            }
            return Err(Error::Continuation(format!(
                "tail continuation did not settle below N = {} (change {d:.3e})",
                opts.max_n
            )));
        }
        prev = cur;
        scale *= 2;
    }
}

fn check_convergence_region(seq: &EigenSequence, s: Complex64, opts: &ZetaOptions) -> Result<()> {
    if opts.continuation {
        return Ok(());
    }
    for b in seq.branches() {
        let p = b.weyl.exponent();
        if p * s.re <= 1.0 {
            return Err(Error::Range(format!(
                "Re s = {} is outside the convergence half-plane Re s > {}; enable continuation",
                s.re,
                1.0 / p
            )));
        }
    }
    Ok(())
}

/// Checks the first eigenvalues of every branch (beyond the tail index the
/// argument is controlled by the Weyl law) and all explicit values.
pub fn check_agmon(seq: &EigenSequence, conv: &BranchConvention) -> Result<()> {
    for z in seq.finite() {
        conv.check(*z)?;
    }
    for b in seq.branches() {
        let hi = b.min_tail_index.max(b.first_index) + 8;
        for k in b.first_index..=hi {
            conv.check(b.value(k))?;
        }
    }
    Ok(())
}

/// `zeta(s) = sum (lambda_k + shift)^-s` in its convergence half-plane.
pub fn zeta_at(seq: &EigenSequence, s: Complex64, shift: Complex64) -> Result<ZetaResult> {
    zeta_at_with(seq, s, shift, &ZetaOptions::default())
}

pub fn zeta_at_with(
    seq: &EigenSequence,
    s: Complex64,
    shift: Complex64,
    opts: &ZetaOptions,
) -> Result<ZetaResult> {
    if shift.re < 0.0 {
        return Err(Error::Domain(format!(
            "shift must have Re >= 0, got {shift}"
        )));
    }
    let seq = seq.shifted(shift);
    check_convergence_region(&seq, s, opts)?;
    let (jet, err, terms) = converged_jet(&seq, s, opts, 1)?;
    if jet.0[0].norm() > 1e-10 * jet.0[1].norm().max(1.0) {
        return Err(Error::Continuation(format!(
            "zeta has a pole at s = {s} (residue {})",
            jet.0[0]
        )));
    }
    Ok(ZetaResult {
        value_at: jet.0[1],
        derivative_at: jet.0[2],
        error_estimate: err,
        terms_used: terms,
    })
}

/// Residue and finite part at a (possible) pole `s0` of the continued zeta.
pub fn zeta_laurent_at(seq: &EigenSequence, s0: Complex64, shift: Complex64) -> Result<Laurent> {
    let seq = seq.shifted(shift);
    let (jet, err, _) = converged_jet(&seq, s0, &ZetaOptions::continued(), 1)?;
    Ok(Laurent {
        residue: jet.0[0],
        finite_part: jet.0[1],
        error_estimate: err,
    })
}

/// `log Det(A + shift) = -zeta'(0)`.
pub fn log_det(seq: &EigenSequence, shift: Complex64) -> Result<LogDet> {
    log_det_with(seq, shift, &ZetaOptions::continued())
}

pub fn log_det_with(seq: &EigenSequence, shift: Complex64, opts: &ZetaOptions) -> Result<LogDet> {
    let seq = seq.shifted(shift);
    check_agmon(&seq, &opts.convention)?;
    if seq
        .branches()
        .iter()
        .any(|b| !(b.weyl.leading() > 0.0 && b.weyl.exponent() > 0.0))
    {
        return Err(Error::Continuation(
            "Weyl descriptor lacks a leading term".into(),
        ));
    }
    let (jet, err, _) = converged_jet(&seq, ZERO, opts, 2)?;
    if jet.0[0].norm() > 1e-10 {
        return Err(Error::Continuation("zeta is singular at s = 0".into()));
    }
    Ok(LogDet {
        value: -jet.0[2],
        error_estimate: err,
    })
}

/// Log-determinant of a complex spectrum. `values` are the eigenvalues with
/// indices `1..=n`; when `weyl` is given, the spectrum continues with
/// `weyl.eval(k)` for `k > n`.
pub fn complex_log_det(values: &[Complex64], weyl: Option<&WeylDescriptor>) -> Result<LogDet> {
    complex_log_det_with(values, weyl, &BranchConvention::default())
}

pub fn complex_log_det_with(
    values: &[Complex64],
    weyl: Option<&WeylDescriptor>,
    conv: &BranchConvention,
) -> Result<LogDet> {
    let branches = match weyl {
        Some(w) => {
            let w2 = w.clone();
            vec![Branch::new(
                1,
                values.len() as u64 + 1,
                w.clone(),
                move |k| w2.eval(k as f64),
            )?]
        }
        None => Vec::new(),
    };
    let seq = EigenSequence::new(values.to_vec(), branches);
    log_det_with(
        &seq,
        ZERO,
        &ZetaOptions {
            convention: *conv,
            ..ZetaOptions::continued()
        },
    )
}

/// `theta(t) = sum exp(-t lambda_k)` for a real spectrum.
pub fn heat_trace(seq: &EigenSequence, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("heat trace needs t > 0, got {t}")));
    }
    if !seq.is_real() {
        return Err(Error::Domain(
            "heat trace is defined here for real spectra only".into(),
        ));
    }
    let mut low = f64::INFINITY;
    for z in seq.finite() {
        low = low.min(z.re);
    }
    for b in seq.branches() {
        low = low.min(b.value(b.first_index).re);
    }
    let mut acc = par::CompensatedSum::new();
    for z in seq.finite() {
        acc.add((-t * z.re).exp());
    }
    for b in seq.branches() {
        // terms below exp(-45) of the largest one are dropped
        let mut hi = b.first_index;
        while t * (b.value(hi).re - low) < 45.0 {
            hi = hi.saturating_mul(2);
        }
        let part = par::sum_range_real(b.first_index, hi, |k| (-t * b.value(k).re).exp());
        acc.add(b.multiplicity as f64 * part);
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatTerm {
    pub exponent: Rational64,
    pub coefficient: f64,
    pub std_error: f64,
}

/// `theta(t) ~ sum c_i t^i` as t -> 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatTraceExpansion {
    pub terms: Vec<HeatTerm>,
    /// Root-mean-square relative residual of the fit.
    pub residual: f64,
    pub condition: f64,
}

impl HeatTraceExpansion {
    pub fn smallest_exponent(&self) -> Rational64 {
        self.terms[0].exponent
    }

    pub fn coefficient(&self, exponent: Rational64) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.exponent == exponent)
            .map(|t| t.coefficient)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|h| h.coefficient * t.powf(rat(h.exponent)))
            .sum()
    }
}

fn rat(r: Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn fit_heat_expansion(
    seq: &EigenSequence,
    t_grid: &[f64],
    exponents: &[Rational64],
) -> Result<HeatTraceExpansion> {
    if exponents.is_empty() {
        return Err(Error::Fit("no exponents given".into()));
    }
    if exponents.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Fit("exponents must be strictly increasing".into()));
    }
    let (lo, hi) = t_grid
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &t| (l.min(t), h.max(t)));
    if !(lo > 0.0) || hi / lo < 10.0 {
        return Err(Error::Fit(
            "t grid must be positive and span at least one decade".into(),
        ));
    }
    let theta: Vec<f64> = t_grid
        .iter()
        .map(|&t| heat_trace(seq, t))
        .collect::<Result<_>>()?;
    let design = DMatrix::from_fn(t_grid.len(), exponents.len(), |i, j| {
        t_grid[i].powf(rat(exponents[j]))
    });
    let weights: Vec<f64> = theta.iter().map(|v| 1.0 / v.abs().max(1e-300)).collect();
    let fit = weighted_lstsq(&design, &theta, &weights)?;
    let terms = exponents
        .iter()
        .zip(fit.coefficients.iter().zip(&fit.std_errors))
        .map(|(e, (c, se))| HeatTerm {
            exponent: *e,
            coefficient: *c,
            std_error: *se,
        })
        .collect();
    Ok(HeatTraceExpansion {
        terms,
        residual: fit.rms_residual,
        condition: fit.condition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MellinCheck {
    /// `Gamma(s) zeta(s)`
    pub spectral: f64,
    /// `int_0^inf theta(t) t^(s-1) dt`, small-t part from the expansion.
    pub integral: f64,
    pub error_estimate: f64,
}

impl MellinCheck {
    pub fn agrees(&self) -> bool {
        (self.spectral - self.integral).abs() <= self.error_estimate
    }
}

pub fn mellin_check(
    seq: &EigenSequence,
    s: f64,
    expansion: &HeatTraceExpansion,
    t_split: f64,
) -> Result<MellinCheck> {
    if !(t_split > 0.0) {
        return Err(Error::Domain("split point must be positive".into()));
    }
    if expansion.terms.iter().any(|h| rat(h.exponent) + s <= 0.0) {
        return Err(Error::Range(
            "Mellin integral diverges at t = 0 for this s".into(),
        ));
    }
    let z = zeta_at(seq, Complex64::new(s, 0.0), ZERO)?;
    let g = gamma_c(Complex64::new(s, 0.0)).re;
    let spectral = g * z.value_at.re;
    let mut small = 0.0;
    let mut small_err = 0.0;
    for h in &expansion.terms {
        let e = rat(h.exponent) + s;
        let w = t_split.powf(e) / e;
        small += h.coefficient * w;
        small_err += h.std_error * w.abs();
    }
    // residual of the fit as a bound on the neglected terms
    let envelope = expansion.terms[0].coefficient.abs()
        * t_split.powf(rat(expansion.terms[0].exponent) + s)
        / s;
    small_err += expansion.residual * envelope;
    let large = exp_sinh(
        |x| {
            let t = t_split + x;
            Complex64::new(heat_trace(seq, t).unwrap_or(0.0) * t.powf(s - 1.0), 0.0)
        },
        1e-11,
    )?
    .re;
    let integral = small + large;
    let error_estimate = small_err + 1e-10 * integral.abs() + g * z.error_estimate;
    Ok(MellinCheck {
        spectral,
        integral,
        error_estimate,
    })
}

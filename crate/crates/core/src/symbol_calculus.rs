//! Exact symbol calculus for scalar differential symbols with a parameter:
//! the resolvent parametrix recursion, homogeneity checks, the collapsed
//! contour integrals `J_k` and the constant term `pi_0`.
//!
//! Symbols are polynomials in `xi` (one variable per dimension), the
//! parameter `lambda`, a formal constant `kappa = 2 pi / period` produced by
//! x-derivatives, and Fourier characters `e^{i k.x}`, with exact complex
//! rational coefficients. A parametrix term is `sum_l q_l R^l` where
//! `R = (mu - p_m)^-1`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::{exp_sinh, gl_panels};
use crate::special::{gamma_c, rgamma_c};

/// Exact complex rational.
pub type Coef = Complex<BigRational>;

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn coef(num: i64, den: i64) -> Coef {
    Complex::new(rational(num, den), BigRational::zero())
}

pub fn coef_i(num: i64, den: i64) -> Coef {
    Complex::new(BigRational::zero(), rational(num, den))
}

fn coef_to_c64(c: &Coef) -> Complex64 {
    Complex64::new(
        c.re.to_f64().unwrap_or(f64::NAN),
        c.im.to_f64().unwrap_or(f64::NAN),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub xi: Vec<u32>,
    pub lambda: u32,
    pub kappa: u32,
    pub freq: Vec<i64>,
}

impl Monomial {
    pub fn one(dim: usize) -> Self {
        Self {
            xi: vec![0; dim],
            lambda: 0,
            kappa: 0,
            freq: vec![0; dim],
        }
    }

    fn mul(&self, o: &Self) -> Self {
        Self {
            xi: self.xi.iter().zip(&o.xi).map(|(a, b)| a + b).collect(),
            lambda: self.lambda + o.lambda,
            kappa: self.kappa + o.kappa,
            freq: self.freq.iter().zip(&o.freq).map(|(a, b)| a + b).collect(),
        }
    }

    /// Weighted degree in `(xi, lambda^(1/chi))`.
    pub fn degree(&self, chi: u32) -> i64 {
        self.xi.iter().map(|&e| e as i64).sum::<i64>() + (chi * self.lambda) as i64
    }
}

/// Polynomial with exact complex rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Monomial, Coef>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Coef) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(Monomial::one(dim), c);
        p
    }

    /// `c xi^xi lambda^lambda`.
    pub fn monomial(c: Coef, xi: &[u32], lambda: u32) -> Self {
        let dim = xi.len();
        let mut p = Self::zero(dim);
        p.add_term(
            Monomial {
                xi: xi.to_vec(),
                lambda,
                kappa: 0,
                freq: vec![0; dim],
            },
            c,
        );
        p
    }

    /// `c e^{i freq.x}`.
    pub fn character(c: Coef, freq: &[i64]) -> Self {
        let dim = freq.len();
        let mut p = Self::zero(dim);
        p.add_term(
            Monomial {
                xi: vec![0; dim],
                lambda: 0,
                kappa: 0,
                freq: freq.to_vec(),
            },
            c,
        );
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coef)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Monomial, c: Coef) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(Coef::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Coef) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                out.add_term(m1.mul(m2), c1.clone() * c2.clone());
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(self.dim, coef(1, 1));
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// `d/dxi_i`.
    pub fn d_xi(&self, i: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.xi[i];
            if e > 0 {
                let mut m2 = m.clone();
                m2.xi[i] -= 1;
                out.add_term(m2, c.clone() * coef(e as i64, 1));
            }
        }
        out
    }

    /// `D_{x_i} = -i d/dx_i`; on `e^{i k x}` it multiplies by `k kappa`.
    pub fn d_x(&self, i: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let k = m.freq[i];
            if k != 0 {
                let mut m2 = m.clone();
                m2.kappa += 1;
                out.add_term(m2, c.clone() * coef(k, 1));
            }
        }
        out
    }

    /// Common weighted degree of all monomials, `None` if mixed; `Some(None)`
    /// stands for the zero polynomial.
    pub fn homogeneous_degree(&self, chi: u32) -> Option<Option<i64>> {
        let mut deg = None;
        for m in self.terms.keys() {
            let d = m.degree(chi);
            match deg {
                None => deg = Some(d),
                Some(d0) if d0 != d => return None,
                _ => {}
            }
        }
        Some(deg)
    }

    pub fn eval(&self, xi: &[f64], lambda: Complex64, kappa: f64, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut v = coef_to_c64(c) * lambda.powu(m.lambda) * kappa.powi(m.kappa as i32);
                for (a, e) in xi.iter().zip(&m.xi) {
                    v *= a.powi(*e as i32);
                }
                let phase: f64 = m.freq.iter().zip(x).map(|(k, y)| *k as f64 * y).sum();
                v * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// Coefficients of the one-dimensional polynomial in `xi` after fixing
    /// `lambda`, `kappa` and `x`.
    pub fn xi_coefficients(&self, lambda: Complex64, kappa: f64, x: &[f64]) -> Vec<Complex64> {
        let mut out = Vec::new();
        for (m, c) in &self.terms {
            let e = m.xi[0] as usize;
            if out.len() <= e {
                out.resize(e + 1, Complex64::new(0.0, 0.0));
            }
            let phase: f64 = m.freq.iter().zip(x).map(|(k, y)| *k as f64 * y).sum();
            out[e] += coef_to_c64(c)
                * lambda.powu(m.lambda)
                * kappa.powi(m.kappa as i32)
                * Complex64::from_polar(1.0, phase);
        }
        out
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn fmt_coef(c: &Coef) -> String {
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => fmt_rational(&c.re),
        (true, false) => format!("{}i", fmt_rational(&c.im)),
        _ => {
            let sign = if c.im.is_negative() { "-" } else { "+" };
            format!(
                "({}{}{}i)",
                fmt_rational(&c.re),
                sign,
                fmt_rational(&c.im.abs())
            )
        }
    }
}

/// Canonical text: monomials in sorted order, e.g. `-1*xi0^2*lam^1`.
impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", fmt_coef(c))?;
            for (i, e) in m.xi.iter().enumerate() {
                if *e > 0 {
                    write!(f, "*xi{i}^{e}")?;
                }
            }
            if m.lambda > 0 {
                write!(f, "*lam^{}", m.lambda)?;
            }
            if m.kappa > 0 {
                write!(f, "*kappa^{}", m.kappa)?;
            }
            for (i, k) in m.freq.iter().enumerate() {
                if *k != 0 {
                    write!(f, "*e(x{i},{k})")?;
                }
            }
        }
        Ok(())
    }
}

/// `sum_l q_l (mu - p_m)^-l`, positive homogeneous of degree `degree` in
/// `(xi, mu^(1/m), lambda^(1/chi))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolExpr {
    pub m: u32,
    pub chi: u32,
    pub degree: i64,
    terms: BTreeMap<u32, Poly>,
    dim: usize,
}

impl SymbolExpr {
    pub fn from_terms(m: u32, chi: u32, degree: i64, dim: usize, terms: Vec<(u32, Poly)>) -> Self {
        let mut out = Self {
            m,
            chi,
            degree,
            terms: BTreeMap::new(),
            dim,
        };
        for (l, q) in terms {
            out.add_at(l, &q);
        }
        out
    }

    fn empty(&self) -> Self {
        Self {
            terms: BTreeMap::new(),
            ..self.clone()
        }
    }

    fn add_at(&mut self, l: u32, q: &Poly) {
        let entry = self.terms.entry(l).or_insert_with(|| Poly::zero(q.dim()));
        *entry = entry.add(q);
        if entry.is_zero() {
            self.terms.remove(&l);
        }
    }

    /// `(l, q_l)` pairs with nonzero `q_l`.
    pub fn terms(&self) -> impl Iterator<Item = (u32, &Poly)> {
        self.terms.iter().map(|(l, q)| (*l, q))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn min_pole_order(&self) -> Option<u32> {
        self.terms.keys().next().copied()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (l, q) in &o.terms {
            out.add_at(*l, q);
        }
        out
    }

    fn mul_poly(&self, p: &Poly) -> Self {
        let mut out = self.empty();
        for (l, q) in &self.terms {
            out.add_at(*l, &q.mul(p));
        }
        out
    }

    fn times_r(&self) -> Self {
        let mut out = self.empty();
        for (l, q) in &self.terms {
            out.add_at(l + 1, q);
        }
        out
    }

    /// Derivative with `d(R^l) = l R^(l+1) d(p_m)`.
    fn derive(&self, pm_deriv: &Poly, d: impl Fn(&Poly) -> Poly) -> Self {
        let mut out = self.empty();
        for (l, q) in &self.terms {
            out.add_at(*l, &d(q));
            out.add_at(l + 1, &q.mul(pm_deriv).scale(&coef(*l as i64, 1)));
        }
        out
    }

    pub fn d_xi(&self, i: usize, pm: &Poly) -> Self {
        self.derive(&pm.d_xi(i), |q| q.d_xi(i))
    }

    pub fn d_x(&self, i: usize, pm: &Poly) -> Self {
        self.derive(&pm.d_x(i), |q| q.d_x(i))
    }
}

impl fmt::Display for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(l, q)| format!("[{q}]*R^{l}"))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Full symbol `p_m + p_(m-1) + ... + p_0` of a scalar operator with
/// parameter of weight `chi` on a flat `dim`-torus of side `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSymbolData {
    pub m: u32,
    pub chi: u32,
    pub dim: usize,
    /// `components[l] = p_(m-l)`
    pub components: Vec<Poly>,
    pub period: f64,
    /// Half-opening of the parameter sector `V` around the positive axis.
    pub angle: f64,
}

impl OperatorSymbolData {
    pub fn new(m: u32, chi: u32, components: Vec<Poly>, period: f64) -> Result<Self> {
        if m == 0 || chi == 0 {
            return Err(Error::Domain(
                "order and weight must be positive integers".into(),
            ));
        }
        let dim = components
            .first()
            .map(Poly::dim)
            .ok_or_else(|| Error::Domain("missing principal symbol".into()))?;
        if dim == 0 || components.iter().any(|p| p.dim() != dim) {
            return Err(Error::Domain("components disagree on the dimension".into()));
        }
        if components.len() > m as usize + 1 {
            return Err(Error::Domain(
                "more components than the order allows".into(),
            ));
        }
        for (l, p) in components.iter().enumerate() {
            let want = m as i64 - l as i64;
            match p.homogeneous_degree(chi) {
                Some(Some(d)) if d == want => {}
                Some(None) if l > 0 => {}
                _ => {
                    return Err(Error::Domain(format!(
                        "p_{want} is not homogeneous of degree {want} in (xi, lambda^(1/{chi}))"
                    )))
                }
            }
        }
        if !(period > 0.0) {
            return Err(Error::Domain("period must be positive".into()));
        }
        let op = Self {
            m,
            chi,
            dim,
            components,
            period,
            angle: 0.25 * PI,
        };
        op.check_ellipticity()?;
        Ok(op)
    }

    pub fn kappa(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn principal(&self) -> &Poly {
        &self.components[0]
    }

    pub fn component(&self, l: usize) -> Option<&Poly> {
        self.components.get(l)
    }

    /// `p_m` must stay off `(-inf, 0]` for `|xi| + |lambda|^(1/chi) = 1`,
    /// `|arg lambda| <= angle`.
    pub fn check_ellipticity(&self) -> Result<()> {
        let n = 24;
        for a in 0..=n {
            let frac = a as f64 / n as f64;
            for b in 0..=8 {
                let th = self.angle * (2.0 * b as f64 / 8.0 - 1.0);
                let lam = Complex64::from_polar(frac.powi(self.chi as i32), th);
                for sgn in [1.0, -1.0] {
                    let mut xi = vec![0.0; self.dim];
                    xi[0] = sgn * (1.0 - frac);
                    for x in [0.0, 0.37, 1.3, 2.9] {
                        let xs = vec![x; self.dim];
                        let v = self.principal().eval(&xi, lam, self.kappa(), &xs);
                        if v.norm() < 1e-12 || (v.im.abs() < 1e-12 && v.re < 0.0) {
                            return Err(Error::Domain(format!(
                                "principal symbol not elliptic with parameter: p_m = {v} at xi = {xi:?}, lambda = {lam}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn multi_indices(dim: usize, order: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![order]];
    }
    let mut out = Vec::new();
    for first in 0..=order {
        for mut rest in multi_indices(dim - 1, order - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

/// Largest order handled by [`parametrix_terms`].
pub const MAX_PARAMETRIX_ORDER: usize = 6;

/// `[r_(-m), ..., r_(-m-j_max)]` from
/// `r_(-m-j) = R sum_{|alpha| + l + k = j, k < j} (1/alpha!) d_xi^alpha p_(m-l) D_x^alpha r_(-m-k)`.
pub fn parametrix_terms(op: &OperatorSymbolData, j_max: usize) -> Result<Vec<SymbolExpr>> {
    if j_max > MAX_PARAMETRIX_ORDER {
        return Err(Error::Unsupported(format!(
            "parametrix order {j_max} exceeds the complexity guard {MAX_PARAMETRIX_ORDER}"
        )));
    }
    let pm = op.principal();
    let m = op.m as i64;
    let base = SymbolExpr::from_terms(
        op.m,
        op.chi,
        -m,
        op.dim,
        vec![(1, Poly::constant(op.dim, coef(1, 1)))],
    );
    let mut out = vec![base];
    for j in 1..=j_max {
        let mut acc = SymbolExpr {
            degree: -m - j as i64,
            terms: BTreeMap::new(),
            ..out[0].clone()
        };
        for (k, rk) in out.iter().enumerate() {
            for l in 0..=(j - k) {
                let Some(p) = op.component(l) else { continue };
                if p.is_zero() {
                    continue;
                }
                let order = (j - k - l) as u32;
                for alpha in multi_indices(op.dim, order) {
                    let mut dp = p.clone();
                    let mut dr = rk.clone();
                    for (i, &a) in alpha.iter().enumerate() {
                        for _ in 0..a {
                            dp = dp.d_xi(i);
                            dr = dr.d_x(i, pm);
                        }
                    }
                    if dp.is_zero() || dr.is_zero() {
                        continue;
                    }
                    let denom: BigInt = alpha.iter().map(|&a| factorial(a)).product();
                    let w =
                        Complex::new(BigRational::new(BigInt::one(), denom), BigRational::zero());
                    acc = acc.add(&dr.mul_poly(&dp.scale(&w)));
                }
            }
        }
        out.push(acc.times_r());
    }
    Ok(out)
}

/// Exact check of `r(tau^m mu, tau^chi lambda, tau xi) = tau^degree r(mu, lambda, xi)`
/// term by term, with `R` scaling as `tau^-m`.
pub fn check_homogeneity(term: &SymbolExpr, tau: &BigRational) -> bool {
    let pow = |e: i64| -> BigRational {
        if e >= 0 {
            num_traits::pow(tau.clone(), e as usize)
        } else {
            num_traits::pow(tau.recip(), (-e) as usize)
        }
    };
    let target = pow(term.degree);
    term.terms.iter().all(|(l, q)| {
        q.terms().all(|(mono, c)| {
            let scaled = c.clone()
                * Complex::new(
                    pow(mono.degree(term.chi) - (term.m * l) as i64),
                    BigRational::zero(),
                );
            scaled == c.clone() * Complex::new(target.clone(), BigRational::zero())
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub xi_panels: usize,
    pub xi_order: usize,
    pub mu_tol: f64,
    pub x_points: usize,
    /// Direction `lambda / |lambda|` of the parameter.
    pub omega: Complex64,
    /// Step of the central difference in `s`.
    pub ds: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            xi_panels: 16,
            xi_order: 20,
            mu_tol: 1e-11,
            x_points: 32,
            omega: Complex64::new(1.0, 0.0),
            ds: 2e-3,
        }
    }
}

fn require_1d(op: &OperatorSymbolData) -> Result<()> {
    if op.dim != 1 || op.m != 2 {
        return Err(Error::Unsupported(
            "J integrals are implemented for second-order symbols in one dimension".into(),
        ));
    }
    Ok(())
}

/// `p_m(omega; x, xi) = G xi^2 + H`.
fn quadratic_form(
    op: &OperatorSymbolData,
    omega: Complex64,
    x: f64,
) -> Result<(Complex64, Complex64)> {
    let c = op.principal().xi_coefficients(omega, op.kappa(), &[x]);
    let get = |i: usize| c.get(i).copied().unwrap_or_default();
    if c.len() != 3 || get(1).norm() > 1e-14 || get(2).norm() == 0.0 {
        return Err(Error::Unsupported(
            "principal symbol must have the form G xi^2 + H".into(),
        ));
    }
    Ok((get(2), get(0)))
}

/// `int xi^e (G xi^2 + H)^-sigma dxi`, meromorphically continued in `sigma`.
fn xi_moment(e: usize, sigma: Complex64, g: Complex64, h: Complex64) -> Complex64 {
    if e % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let a = (e as f64 + 1.0) / 2.0;
    g.powf(-a)
        * h.powc(Complex64::new(a, 0.0) - sigma)
        * gamma_c(Complex64::new(a, 0.0))
        * gamma_c(sigma - a)
        * rgamma_c(sigma)
}

/// `(-1)^(l-1) / (l-1)! * s (s+1) ... (s+l-2)`, the Cauchy factor of `R^l`.
fn cauchy_factor(l: u32, s: Complex64) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for i in 0..l.saturating_sub(1) {
        v *= (s + i as f64) / (i as f64 + 1.0);
    }
    if l.is_multiple_of(2) {
        -v
    } else {
        v
    }
}

/// `J_k(s, omega; x)` from the collapsed contour integral with closed-form
/// `xi` moments.
pub fn j_closed(
    op: &OperatorSymbolData,
    term: &SymbolExpr,
    s: Complex64,
    omega: Complex64,
    x: f64,
) -> Result<Complex64> {
    require_1d(op)?;
    let (g, h) = quadratic_form(op, omega, x)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, q) in term.terms() {
        let f = cauchy_factor(l, s);
        let sigma = s + (l as f64 - 1.0);
        for (e, c) in q
            .xi_coefficients(omega, op.kappa(), &[x])
            .iter()
            .enumerate()
        {
            if c.norm() != 0.0 {
                acc += f * c * xi_moment(e, sigma, g, h);
            }
        }
    }
    Ok(acc)
}

/// `J_0(s) = int p_m(omega; x, xi)^-s dxi`; poles at `s = 1/2 - n` are
/// reported as range errors carrying the residue.
pub fn j0_closed_form(
    op: &OperatorSymbolData,
    s: Complex64,
    omega: Complex64,
    x: f64,
) -> Result<Complex64> {
    require_1d(op)?;
    let (g, h) = quadratic_form(op, omega, x)?;
    let a = s - 0.5;
    if a.im.abs() < 1e-14 && a.re <= 1e-14 && (a.re - a.re.round()).abs() < 1e-14 {
        let n = (-a.re.round()) as i64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        // residue of Gamma(s - 1/2) at -n is (-1)^n / n!
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let residue = g.powf(-0.5)
            * h.powc(Complex64::new(0.5, 0.0) - s)
            * PI.sqrt()
            * rgamma_c(s)
            * (sign / fact);
        return Err(Error::Range(format!(
            "J_0 has a pole at s = {s} with residue {residue}"
        )));
    }
    Ok(xi_moment(0, s, g, h))
}

/// `int f(xi) dxi` on the real line: Gauss panels on `[-1, 1]` plus
/// double-exponential tails, which tolerate slow algebraic decay.
fn xi_integral(f: impl Fn(f64) -> Complex64 + Sync, cfg: &QuadConfig) -> (Complex64, f64) {
    let coarse = gl_panels(&f, -1.0, 1.0, cfg.xi_panels / 2, cfg.xi_order);
    let core = gl_panels(&f, -1.0, 1.0, cfg.xi_panels, cfg.xi_order);
    let tail = exp_sinh(|t| f(1.0 + t) + f(-1.0 - t), cfg.mu_tol);
    match tail {
        Ok(t) => (core + t, (core - coarse).norm() + cfg.mu_tol * t.norm()),
        Err(_) => (Complex64::new(f64::NAN, f64::NAN), f64::INFINITY),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JValue {
    pub value: Complex64,
    pub error_estimate: f64,
}

/// `J_k(s, omega; x)` by numerical `xi` quadrature of the Cauchy-collapsed
/// terms `q_l p_m^(-s-l+1)`. Every `xi` integral must converge absolutely,
/// which holds for `Re s > (d - k)/m` and for `s = 0` when `k > d`.
pub fn j_k_value(
    op: &OperatorSymbolData,
    k: usize,
    s: Complex64,
    cfg: &QuadConfig,
    x: f64,
) -> Result<JValue> {
    require_1d(op)?;
    let terms = parametrix_terms(op, k)?;
    let term = &terms[k];
    let omega = cfg.omega;
    let kappa = op.kappa();
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for (l, q) in term.terms() {
        let sigma = s + (l as f64 - 1.0);
        let e_max = q.terms().map(|(mono, _)| mono.xi[0]).max().unwrap_or(0) as f64;
        if !(op.m as f64 * sigma.re - e_max > 1.0) {
            return Err(Error::Range(format!(
                "xi integral of the R^{l} term of J_{k} diverges at s = {s}; use the continued closed form"
            )));
        }
        let f = cauchy_factor(l, s);
        let (v, e) = xi_integral(
            |xi| {
                let p = op.principal().eval(&[xi], omega, kappa, &[x]);
                q.eval(&[xi], omega, kappa, &[x]) * (-sigma * p.ln()).exp()
            },
            cfg,
        );
        value += f * v;
        err += f.norm() * e;
    }
    Ok(JValue {
        value,
        error_estimate: err,
    })
}

/// `J_k(s)` from the literal half-line formula
/// `-(sin pi s / pi) / ((1-s)...(L-s)) int dxi int_0^inf mu^(L-s) (d_mu^L r)(-mu) dmu`
/// for non-integer `s` with `Re s > (d - k)/m`.
pub fn j_k_mu_route(
    op: &OperatorSymbolData,
    k: usize,
    s: f64,
    cfg: &QuadConfig,
    x: f64,
) -> Result<JValue> {
    require_1d(op)?;
    if (s - s.round()).abs() < 1e-9 {
        return Err(Error::Range(
            "the half-line formula is singular at integer s".into(),
        ));
    }
    if !(s > (op.dim as f64 - k as f64) / op.m as f64) {
        return Err(Error::Range(format!(
            "s = {s} is outside the convergence half-plane of J_{k}"
        )));
    }
    let terms = parametrix_terms(op, k)?;
    let term = terms[k].clone();
    let big_l = (s.ceil() as i64).max(1) as u32;
    let omega = cfg.omega;
    let kappa = op.kappa();
    let mut pref = -(PI * s).sin() / PI;
    for i in 1..=big_l {
        pref /= i as f64 - s;
    }
    let inner = |xi: f64| -> Complex64 {
        let p = op.principal().eval(&[xi], omega, kappa, &[x]);
        let qs: Vec<(u32, Complex64)> = term
            .terms()
            .map(|(l, q)| (l, q.eval(&[xi], omega, kappa, &[x])))
            .collect();
        exp_sinh(
            |mu| {
                let base = Complex64::new(mu, 0.0) + p;
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, qv) in &qs {
                    // d_mu^L R^l = (-1)^L (l)_L R^(l+L), R(-mu) = -(mu + p)^-1
                    let n = l + big_l;
                    let rising: f64 = (0..big_l).map(|i| (*l + i) as f64).product();
                    let sign = if (big_l + n).is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    };
                    acc += qv * rising * sign * base.powi(-(n as i32));
                }
                acc * mu.powf(big_l as f64 - s)
            },
            cfg.mu_tol,
        )
        .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    };
    let (v, e) = xi_integral(inner, cfg);
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Range("half-line quadrature did not converge".into()));
    }
    Ok(JValue {
        value: v * pref,
        error_estimate: e * pref.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pi0Term {
    /// Power of `(mu - p_m)^-1`.
    pub l: u32,
    /// Grading of the parametrix term (always the dimension here).
    pub k: usize,
    pub value: f64,
    /// Same contribution from direct `xi` quadrature when that converges.
    pub quadrature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pi0Report {
    pub value: f64,
    pub terms: Vec<Pi0Term>,
    pub error_estimate: f64,
}

/// `pi_0 = -(1/(2 pi)^d) int dx d/ds J_d(s, omega; x)|_(s=0)`, the constant term
/// of `log Det P(lambda)` as `lambda -> inf` along `omega`.
pub fn pi0_symbolic(op: &OperatorSymbolData, cfg: &QuadConfig) -> Result<Pi0Report> {
    require_1d(op)?;
    let d = op.dim;
    let terms = parametrix_terms(op, d)?;
    let rd = &terms[d];
    let n = cfg.x_points.max(1);
    let xs: Vec<f64> = (0..n).map(|i| op.period * i as f64 / n as f64).collect();
    let weight = op.period / n as f64 / (2.0 * PI).powi(d as i32);
    let mut out = Vec::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for (l, q) in rd.terms() {
        let single = SymbolExpr::from_terms(op.m, op.chi, rd.degree, d, vec![(l, q.clone())]);
        let f = |s: f64| -> Result<f64> {
            let vals = par::map(&xs, |x| {
                j_closed(op, &single, Complex64::new(s, 0.0), cfg.omega, *x)
            });
            let mut acc = par::CompensatedSum::new();
            for v in vals {
                acc.add(v?.re);
            }
            Ok(acc.value() * weight)
        };
        let stencil = |h: f64| -> Result<f64> {
            Ok((8.0 * (f(h)? - f(-h)?) - (f(2.0 * h)? - f(-2.0 * h)?)) / (12.0 * h))
        };
        let d1 = stencil(cfg.ds)?;
        let d2 = stencil(0.5 * cfg.ds)?;
        let value = -d2;
        let mut term_err = (d1 - d2).abs() / 15.0 + 1e-13 * d2.abs();
        // convergent terms: d/ds at 0 is (-1)^(l-1)/(l-1) * int q p^-(l-1)
        let e_max = q.terms().map(|(mono, _)| mono.xi[0]).max().unwrap_or(0) as f64;
        let quadrature = if l >= 2 && op.m as f64 * (l as f64 - 1.0) - e_max > 1.0 {
            let kappa = op.kappa();
            let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
            let mut acc = 0.0;
            let mut qerr = 0.0;
            for x in &xs {
                let (v, e) = xi_integral(
                    |xi| {
                        let p = op.principal().eval(&[xi], cfg.omega, kappa, &[*x]);
                        q.eval(&[xi], cfg.omega, kappa, &[*x]) * p.powi(-(l as i32 - 1))
                    },
                    cfg,
                );
                acc += v.re;
                qerr += e;
            }
            let qv = -sign / (l as f64 - 1.0) * acc * weight;
            term_err += (qv - value).abs() + qerr * weight;
            Some(qv)
        } else {
            None
        };
        total += value;
        err += term_err;
        out.push(Pi0Term {
            l,
            k: d,
            value,
            quadrature,
        });
    }
    Ok(Pi0Report {
        value: total,
        terms: out,
        error_estimate: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xi2_plus_lambda() -> Poly {
        Poly::monomial(coef(1, 1), &[2], 0).add(&Poly::monomial(coef(1, 1), &[0], 1))
    }

    fn constant_potential(q: i64) -> OperatorSymbolData {
        let p0 = Poly::constant(1, coef(q, 1));
        OperatorSymbolData::new(2, 2, vec![xi2_plus_lambda(), Poly::zero(1), p0], 2.0 * PI).unwrap()
    }

    fn cosine_potential() -> OperatorSymbolData {
        let p0 = Poly::character(coef(1, 2), &[1]).add(&Poly::character(coef(1, 2), &[-1]));
        let p1 = Poly::character(coef_i(1, 3), &[2]).mul(&Poly::monomial(coef(1, 1), &[1], 0));
        OperatorSymbolData::new(2, 2, vec![xi2_plus_lambda(), p1, p0], 2.0 * PI).unwrap()
    }

    fn broken(b: i64, c: i64, period: f64) -> OperatorSymbolData {
        let p2 = Poly::monomial(coef(1, 1), &[2], 0).add(&Poly::monomial(coef(c, 1), &[0], 2));
        let p1 = Poly::monomial(coef(b, 1), &[0], 1);
        OperatorSymbolData::new(2, 1, vec![p2, p1], period).unwrap()
    }

    #[test]
    fn constant_coefficient_terms() {
        let r = parametrix_terms(&constant_potential(3), 4).unwrap();
        assert!(r[1].is_zero());
        assert!(r[3].is_zero());
        let want = SymbolExpr::from_terms(2, 2, -4, 1, vec![(2, Poly::constant(1, coef(3, 1)))]);
        assert_eq!(r[2], want, "{}", r[2]);
    }

    #[test]
    fn geometric_series_closure() {
        // (mu - p_2 - q)^-1 = sum_i q^i R^(i+1)
        let q = 5;
        let r = parametrix_terms(&constant_potential(q), 6).unwrap();
        for (j, term) in r.iter().enumerate() {
            if j % 2 == 1 {
                assert!(term.is_zero());
            } else {
                let i = (j / 2) as u32;
                let c = Complex::new(
                    num_traits::pow(rational(q, 1), i as usize),
                    BigRational::zero(),
                );
                let want = SymbolExpr::from_terms(
                    2,
                    2,
                    -2 - j as i64,
                    1,
                    vec![(i + 1, Poly::constant(1, c))],
                );
                assert_eq!(*term, want);
            }
        }
    }

    #[test]
    fn homogeneity_of_all_terms() {
        let r = parametrix_terms(&cosine_potential(), 4).unwrap();
        for tau in [rational(2, 1), rational(3, 2), rational(5, 1)] {
            for term in &r {
                assert!(check_homogeneity(term, &tau), "{term}");
            }
        }
        let r = parametrix_terms(&broken(1, 4, 1.0), 4).unwrap();
        assert!(r.iter().all(|t| check_homogeneity(t, &rational(3, 2))));
    }

    #[test]
    fn corrupted_term_is_rejected() {
        let r = parametrix_terms(&cosine_potential(), 2).unwrap();
        let bad = r[2].add(&SymbolExpr::from_terms(
            2,
            2,
            -4,
            1,
            vec![(2, Poly::monomial(coef(1, 1), &[1], 0))],
        ));
        assert!(!check_homogeneity(&bad, &rational(2, 1)));
    }

    #[test]
    fn pole_order_bound() {
        for op in [cosine_potential(), broken(2, 3, 1.0), constant_potential(1)] {
            let r = parametrix_terms(&op, 6).unwrap();
            for (k, term) in r.iter().enumerate() {
                if let Some(l) = term.min_pole_order() {
                    assert!(l as usize > k.div_ceil(op.m as usize), "k={k} l={l}");
                }
            }
        }
        // the sharper bound l >= k + 1 fails already at k = 2
        let r = parametrix_terms(&constant_potential(1), 2).unwrap();
        assert_eq!(r[2].min_pole_order(), Some(2));
    }

    #[test]
    fn complexity_guard() {
        assert!(matches!(
            parametrix_terms(&cosine_potential(), 7),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn non_elliptic_principal_symbol_is_rejected() {
        let p2 = Poly::monomial(coef(1, 1), &[2], 0).add(&Poly::monomial(coef(-1, 1), &[0], 1));
        assert!(OperatorSymbolData::new(2, 2, vec![p2], 1.0).is_err());
        let mixed = Poly::monomial(coef(1, 1), &[2], 0).add(&Poly::monomial(coef(1, 1), &[1], 0));
        assert!(OperatorSymbolData::new(2, 2, vec![mixed], 1.0).is_err());
    }

    #[test]
    fn j0_examples() {
        let op = constant_potential(0);
        let one = Complex64::new(1.0, 0.0);
        let at = |s: f64| j0_closed_form(&op, Complex64::new(s, 0.0), one, 0.0).unwrap();
        assert!((at(1.0).re - PI).abs() < 1e-13);
        assert!((at(2.0).re - PI / 2.0).abs() < 1e-13);
        assert!((at(1.5).re - 2.0).abs() < 1e-13);
        match j0_closed_form(&op, Complex64::new(0.5, 0.0), one, 0.0) {
            Err(Error::Range(msg)) => assert!(msg.contains("pole")),
            other => panic!("{other:?}"),
        }
        let cfg = QuadConfig::default();
        let q = j_k_value(&op, 0, Complex64::new(1.0, 0.0), &cfg, 0.0).unwrap();
        assert!((q.value.re - PI).abs() < 1e-10, "{q:?}");
        let mu = j_k_mu_route(&op, 0, 1.5, &cfg, 0.0).unwrap();
        assert!((mu.value.re - 2.0).abs() < 1e-8, "{mu:?}");
    }

    #[test]
    fn j_vanishes_at_zero_above_dimension() {
        let op = cosine_potential();
        let cfg = QuadConfig::default();
        for k in 2..=4 {
            for x in [0.0, 0.7, 2.1] {
                let v = j_k_value(&op, k, Complex64::new(0.0, 0.0), &cfg, x).unwrap();
                assert!(v.value.norm() < 1e-14);
                let terms = parametrix_terms(&op, k).unwrap();
                let c = j_closed(&op, &terms[k], Complex64::new(0.0, 0.0), cfg.omega, x).unwrap();
                assert!(c.norm() < 1e-14);
            }
        }
        assert!(matches!(
            j_k_value(&op, 0, Complex64::new(0.3, 0.0), &cfg, 0.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn three_routes_agree() {
        let op = cosine_potential();
        let cfg = QuadConfig::default();
        for (k, s) in [(1usize, 0.7), (2, 0.3), (3, 1.4), (4, 0.55)] {
            for x in [0.4, 1.9] {
                let terms = parametrix_terms(&op, k).unwrap();
                let closed =
                    j_closed(&op, &terms[k], Complex64::new(s, 0.0), cfg.omega, x).unwrap();
                let quad = j_k_value(&op, k, Complex64::new(s, 0.0), &cfg, x).unwrap();
                let mu = j_k_mu_route(&op, k, s, &cfg, x).unwrap();
                let scale = closed.norm().max(1e-3);
                assert!(
                    (closed - quad.value).norm() < 1e-9 * scale,
                    "k={k} {closed} {:?}",
                    quad.value
                );
                assert!(
                    (closed - mu.value).norm() < 1e-7 * scale,
                    "k={k} {closed} {:?}",
                    mu.value
                );
            }
        }
    }

    #[test]
    fn pi0_examples() {
        let cfg = QuadConfig::default();
        let circle = OperatorSymbolData::new(2, 2, vec![xi2_plus_lambda()], 3.0).unwrap();
        let rep = pi0_symbolic(&circle, &cfg).unwrap();
        assert!(rep.value.abs() < 1e-12);
        for (b, c, period) in [(1, 4, 2.0 * PI), (3, 1, 1.5), (-2, 9, 0.8)] {
            let rep = pi0_symbolic(&broken(b, c, period), &cfg).unwrap();
            let want = period * b as f64 / (2.0 * (c as f64).sqrt());
            assert!((rep.value - want).abs() < 1e-8, "{rep:?} want {want}");
            assert!(rep.error_estimate < 1e-6);
        }
    }
}

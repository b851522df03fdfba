//! Weyl-law descriptors: asymptotic laws `lambda_k ~ a k^p (1 + sum_g b_g k^{-g})`
//! with complex correction coefficients, closed under shifts, positive
//! scalings and real powers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KEY_TOL: f64 = 1e-9;
/// Hard cap on the decay exponents kept in any series.
pub const MAX_DECAY: f64 = 48.0;

/// Series `sum_g b_g k^{-g}` with strictly positive, increasing decay exponents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RelSeries {
    terms: Vec<(f64, Complex64)>,
}

impl RelSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (f64, Complex64)>) -> Self {
        let mut s = Self::zero();
        for (g, c) in terms {
            s.add_term(g, c);
        }
        s
    }

    pub fn terms(&self) -> &[(f64, Complex64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c)| c.norm() == 0.0)
    }

    /// Smallest decay exponent with a nonzero coefficient.
    pub fn min_decay(&self) -> Option<f64> {
        self.terms
            .iter()
            .find(|(_, c)| c.norm() != 0.0)
            .map(|(g, _)| *g)
    }

    pub fn add_term(&mut self, decay: f64, coef: Complex64) {
        assert!(decay > 0.0, "decay exponents must be positive");
        match self
            .terms
            .iter_mut()
            .find(|(g, _)| (*g - decay).abs() < KEY_TOL)
        {
            Some((_, c)) => *c += coef,
            None => {
                self.terms.push((decay, coef));
                self.terms.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
        }
    }

    pub fn truncated(&self, cutoff: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|(g, _)| *g <= cutoff + KEY_TOL)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self, cutoff: f64) -> Self {
        let mut out = Self::zero();
        for (g1, c1) in &self.terms {
            for (g2, c2) in &other.terms {
                let g = g1 + g2;
                if g <= cutoff + KEY_TOL {
                    out.add_term(g, c1 * c2);
                }
            }
        }
        out
    }

    /// Powers `u, u^2, ..., u^J` truncated at `cutoff`; stops when the next
    /// power would be empty.
    pub fn powers(&self, cutoff: f64) -> Vec<Self> {
        let base = self.truncated(cutoff);
        let mut out = Vec::new();
        if base.terms.is_empty() {
            return out;
        }
        let mut cur = base.clone();
        while !cur.terms.is_empty() {
            out.push(cur.clone());
            cur = cur.mul(&base, cutoff);
        }
        out
    }

    /// `(1 + u)^alpha - 1` as a series, truncated at `cutoff`.
    pub fn pow1p_minus_one(&self, alpha: f64, cutoff: f64) -> Self {
        let mut out = Self::zero();
        let mut binom = 1.0;
        for (j, pw) in self.powers(cutoff).iter().enumerate() {
            let j = j as f64;
            binom *= (alpha - j) / (j + 1.0);
            for (g, c) in pw.terms() {
                out.add_term(*g, c * binom);
            }
        }
        out
    }

    /// `log(1 + u)` as a series, truncated at `cutoff`.
    pub fn log1p(&self, cutoff: f64) -> Self {
        let mut out = Self::zero();
        for (j, pw) in self.powers(cutoff).iter().enumerate() {
            let j = (j + 1) as f64;
            let w = if j as u64 % 2 == 1 { 1.0 / j } else { -1.0 / j };
            for (g, c) in pw.terms() {
                out.add_term(*g, c * w);
            }
        }
        out
    }

    /// Evaluates the series at index `k`.
    pub fn eval(&self, k: f64) -> Complex64 {
        self.terms.iter().map(|(g, c)| c * k.powf(-g)).sum()
    }
}

/// Asymptotic law `lambda_k ~ a k^p (1 + u(k))` for the eigenvalues of one
/// spectral branch, with `a > 0` and `p > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylDescriptor {
    leading: f64,
    exponent: f64,
    relative: RelSeries,
}

impl WeylDescriptor {
    pub fn new(leading: f64, exponent: f64, relative: RelSeries) -> Result<Self> {
        if !(leading > 0.0 && leading.is_finite()) {
            return Err(Error::Domain(format!(
                "weyl leading coefficient must be positive, got {leading}"
            )));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::Domain(format!(
                "weyl exponent must be positive, got {exponent}"
            )));
        }
        Ok(Self {
            leading,
            exponent,
            relative,
        })
    }

    /// Builds a descriptor from absolute terms `[(e_i, c_i)]` meaning
    /// `lambda_k ~ sum c_i k^{e_i}`; the term with the largest exponent leads.
    pub fn from_terms(terms: &[(f64, Complex64)]) -> Result<Self> {
        let (p, a) = terms
            .iter()
            .copied()
            .max_by(|x, y| x.0.total_cmp(&y.0))
            .ok_or_else(|| Error::Continuation("weyl descriptor has no leading term".into()))?;
        if a.im != 0.0 {
            return Err(Error::Domain(
                "weyl leading coefficient must be real".into(),
            ));
        }
        let rel = RelSeries::from_terms(
            terms
                .iter()
                .filter(|(e, _)| (*e - p).abs() > KEY_TOL)
                .map(|(e, c)| (p - e, c / a.re)),
        );
        Self::new(a.re, p, rel)
    }

    /// `lambda_k = mass_sq + (scale k)^2`.
    pub fn quadratic(mass_sq: Complex64, scale: f64) -> Result<Self> {
        let a = scale * scale;
        let rel = if mass_sq.norm() == 0.0 {
            RelSeries::zero()
        } else {
            RelSeries::from_terms([(2.0, mass_sq / a)])
        };
        Self::new(a, 2.0, rel)
    }

    pub fn leading(&self) -> f64 {
        self.leading
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn relative(&self) -> &RelSeries {
        &self.relative
    }

    /// Absolute terms `(exponent, coefficient)`, leading term first.
    pub fn terms(&self) -> Vec<(f64, Complex64)> {
        let mut out = vec![(self.exponent, Complex64::new(self.leading, 0.0))];
        out.extend(
            self.relative
                .terms()
                .iter()
                .map(|(g, c)| (self.exponent - g, c * self.leading)),
        );
        out
    }

    /// Law of `lambda_k + shift`.
    pub fn shifted(&self, shift: Complex64) -> Self {
        let mut rel = self.relative.clone();
        if shift.norm() != 0.0 {
            rel.add_term(self.exponent, shift / self.leading);
        }
        Self {
            relative: rel,
            ..self.clone()
        }
    }

    /// Law of `factor * lambda_k` for `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            leading: self.leading * factor,
            ..self.clone()
        }
    }

    /// Law of `lambda_k^alpha`, with corrections kept up to decay `cutoff`.
    pub fn powered(&self, alpha: f64, cutoff: f64) -> Self {
        Self {
            leading: self.leading.powf(alpha),
            exponent: self.exponent * alpha,
            relative: self.relative.pow1p_minus_one(alpha, cutoff),
        }
    }

    /// Evaluates the law at index `k`.
    pub fn eval(&self, k: f64) -> Complex64 {
        self.leading * k.powf(self.exponent) * (1.0 + self.relative.eval(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn quadratic_terms_round_trip() {
        let w = WeylDescriptor::quadratic(c(3.0), 2.0).unwrap();
        let t = w.terms();
        assert_eq!(t[0], (2.0, c(4.0)));
        assert!((t[1].0 - 0.0).abs() < 1e-12 && (t[1].1 - c(3.0)).norm() < 1e-12);
        let back = WeylDescriptor::from_terms(&t).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn power_law_matches_exact_values() {
        // (1 + 4 k^2)^3 expanded around 4 k^2
        let w = WeylDescriptor::quadratic(c(1.0), 2.0)
            .unwrap()
            .powered(3.0, 20.0);
        for k in [3.0f64, 10.0, 50.0] {
            let exact = (1.0 + 4.0 * k * k).powi(3);
            assert!((w.eval(k).re - exact).abs() / exact < 1e-13);
        }
        assert_eq!(w.exponent(), 6.0);
    }

    #[test]
    fn sqrt_law_converges_for_large_index() {
        let m = Complex64::new(2.0, -1.5);
        let w = WeylDescriptor::quadratic(m, 1.0)
            .unwrap()
            .powered(0.5, 24.0)
            .scaled(2.0);
        let k = 40.0;
        let exact = 2.0 * (c(k * k) + m).sqrt();
        assert!((w.eval(k) - exact).norm() < 1e-14 * exact.norm());
    }

    #[test]
    fn log1p_series() {
        let u = RelSeries::from_terms([(2.0, c(0.3))]);
        let l = u.log1p(30.0);
        let k = 2.0;
        assert!((l.eval(k).re - (1.0 + 0.3 / 4.0f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_leading() {
        assert!(WeylDescriptor::new(-1.0, 2.0, RelSeries::zero()).is_err());
        assert!(WeylDescriptor::from_terms(&[]).is_err());
    }
}

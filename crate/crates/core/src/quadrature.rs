//! Numerical quadrature: Gauss-Legendre panels, tanh-sinh and exp-sinh.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::CompensatedComplexSum;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            return (vec![0.0], vec![2.0]);
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]` with equal panels.
pub fn gl_panels(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> Complex64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = CompensatedComplexSum::default();
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc.add(f(lo + 0.5 * h * (xi + 1.0)) * (0.5 * h * wi));
        }
    }
    acc.value()
}

/// Integral over the real line by `xi = tan(theta)`, `theta in (-pi/2, pi/2)`.
/// The integrand must decay faster than `1/xi` at infinity.
pub fn real_line(f: impl Fn(f64) -> Complex64, panels: usize, order: usize) -> Complex64 {
    gl_panels(
        |th| {
            let c = th.cos();
            if c <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            f(th.tan()) / (c * c)
        },
        -FRAC_PI_2,
        FRAC_PI_2,
        panels,
        order,
    )
}

/// Double-exponential rule driven by step halving until two levels agree.
fn double_exponential(
    transform: impl Fn(f64) -> Option<(f64, f64)>,
    f: &impl Fn(f64) -> Complex64,
    tol: f64,
) -> Result<Complex64> {
    let t_max = 4.5;
    let mut h = 0.5;
    let eval_level = |h: f64, offset: bool| {
        let mut acc = CompensatedComplexSum::default();
        let (start, step) = if offset { (h, 2.0 * h) } else { (0.0, h) };
        let mut t = start;
        while t <= t_max {
            for sign in [1.0, -1.0] {
                if t == 0.0 && sign < 0.0 {
                    continue;
                }
                if let Some((x, dx)) = transform(sign * t) {
                    let v = f(x) * dx;
                    if v.re.is_finite() && v.im.is_finite() {
                        acc.add(v);
                    }
                }
            }
            t += step;
        }
        acc.value()
    };
    let mut sum = eval_level(h, false);
    let mut prev = sum * h;
    for _ in 0..9 {
        h *= 0.5;
        sum += eval_level(h, true);
        let cur = sum * h;
        if (cur - prev).norm() <= tol * cur.norm().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Range(
        "double-exponential quadrature did not converge".into(),
    ))
}

/// Integral over `[a, b]` by tanh-sinh; tolerates endpoint singularities.
pub fn tanh_sinh(f: impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    double_exponential(
        |t| {
            let u = FRAC_PI_2 * t.sinh();
            let ch = u.cosh();
            let dx = FRAC_PI_2 * t.cosh() / (ch * ch);
            // distance to the nearer endpoint, computed without cancellation
            let gap = 2.0 / (1.0 + (2.0 * u.abs()).exp());
            let y = if u < 0.0 {
                a + r * gap
            } else if u > 0.0 {
                b - r * gap
            } else {
                c
            };
            (y > a && y < b).then_some((y, r * dx))
        },
        &f,
        tol,
    )
}

/// Integral over `[0, inf)` by exp-sinh.
pub fn exp_sinh(f: impl Fn(f64) -> Complex64, tol: f64) -> Result<Complex64> {
    double_exponential(
        |t| {
            let x = (FRAC_PI_2 * t.sinh()).exp();
            let dx = x * FRAC_PI_2 * t.cosh();
            (x > 0.0 && x.is_finite()).then_some((x, dx))
        },
        &f,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1usize, 2, 5, 12, 20] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn real_line_lorentzian() {
        let v = real_line(|x| c(1.0 / (1.0 + x * x)), 8, 20);
        assert!((v.re - PI).abs() < 1e-13);
        let v = real_line(|x| c((1.0 + x * x).powf(-1.5)), 8, 20);
        assert!((v.re - 2.0).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        let v = tanh_sinh(|x| c(1.0 / x.sqrt()), 0.0, 1.0, 1e-12).unwrap();
        assert!((v.re - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exp_sinh_gamma() {
        let v = exp_sinh(|x| c(x.powf(-0.5) * (-x).exp()), 1e-12).unwrap();
        assert!((v.re - PI.sqrt()).abs() < 1e-10);
        let v = exp_sinh(|x| c(1.0 / (1.0 + x).powi(2)), 1e-12).unwrap();
        assert!((v.re - 1.0).abs() < 1e-10);
    }
}

//! Special functions: complex Gamma (Lanczos), digamma, Hurwitz zeta via
//! Euler-Maclaurin.

use std::f64::consts::PI;

use num_complex::Complex64;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// B_2, B_4, ..., B_30.
const BERNOULLI_EVEN: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

/// log Gamma(z) for Re z >= 1/2 (Lanczos, g = 7).
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * LN_2PI + (z + 0.5) * t.ln() - t + x.ln()
}

/// Gamma function on the complex plane. Poles at nonpositive integers give
/// non-finite values.
pub fn gamma_c(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // reflection
        let s = (z * PI).sin();
        Complex64::new(PI, 0.0) / (s * gamma_c(1.0 - z))
    } else {
        ln_gamma_right(z).exp()
    }
}

pub fn gamma(x: f64) -> f64 {
    gamma_c(Complex64::new(x, 0.0)).re
}

/// 1/Gamma(z), entire; exact zeros at nonpositive integers.
pub fn rgamma_c(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        (z * PI).sin() * gamma_c(1.0 - z) / PI
    } else {
        (-ln_gamma_right(z)).exp()
    }
}

/// log Gamma(x) for real x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0");
    if x < 0.5 {
        (PI / (PI * x).sin()).ln() - ln_gamma_right(Complex64::new(1.0 - x, 0.0)).re
    } else {
        ln_gamma_right(Complex64::new(x, 0.0)).re
    }
}

/// Digamma function for real arguments away from the poles.
pub fn digamma(mut x: f64) -> f64 {
    if x <= 0.0 && x.fract() == 0.0 {
        return f64::NAN;
    }
    if x < 0.0 {
        return digamma(1.0 - x) - PI / (PI * x).tan();
    }
    let mut acc = 0.0;
    while x < 20.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    let series = x2
        * (1.0 / 12.0
            - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 * (1.0 / 240.0 - x2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 / x - series
}

/// H_n = 1 + 1/2 + ... + 1/n.
pub fn harmonic(n: u64) -> f64 {
    if n < 100_000 {
        crate::par::compensated((1..=n).map(|k| 1.0 / k as f64))
    } else {
        digamma(n as f64 + 1.0) + EULER_GAMMA
    }
}

/// Hurwitz zeta `sum_{n>=0} (n+q)^{-s}`, analytically continued in `s`, for
/// real `q > 0` and `s != 1`.
pub fn hurwitz_zeta(s: Complex64, q: f64) -> Complex64 {
    assert!(q > 0.0, "hurwitz_zeta requires q > 0");
    // shift so that q + m is large compared to |s|
    let target = 24.0 + s.norm();
    let m = if q >= target {
        0
    } else {
        (target - q).ceil() as u64
    };
    let mut acc = crate::par::CompensatedComplexSum::default();
    for n in 0..m {
        acc.add(Complex64::new(q + n as f64, 0.0).powc(-s));
    }
    let big_q = q + m as f64;
    let lq = big_q.ln();
    let qs = (-s * lq).exp();
    acc.add(big_q * qs / (s - 1.0));
    acc.add(0.5 * qs);
    // sum B_{2k}/(2k)! * s(s+1)...(s+2k-2) * Q^{-s-2k+1}
    let mut rising = s; // s(s+1)...(s+2k-2)
    let mut fact = 2.0; // (2k)!
    let mut qpow = qs / big_q; // Q^{-s-2k+1}
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = rising * qpow * (*b / fact);
        acc.add(term);
        if term.norm() < 1e-18 * acc.value().norm().max(1e-300) {
            break;
        }
        let kk = (k + 1) as f64;
        rising *= (s + 2.0 * kk - 1.0) * (s + 2.0 * kk);
        fact *= (2.0 * kk + 1.0) * (2.0 * kk + 2.0);
        qpow /= big_q * big_q;
    }
    acc.value()
}

/// Hurwitz zeta and its `s`-derivative, `(zeta(s, q), d/ds zeta(s, q))`.
pub fn hurwitz_zeta_deriv(s: Complex64, q: f64) -> (Complex64, Complex64) {
    assert!(q > 0.0, "hurwitz_zeta requires q > 0");
    let target = 24.0 + s.norm();
    let m = if q >= target {
        0
    } else {
        (target - q).ceil() as u64
    };
    let mut val = crate::par::CompensatedComplexSum::default();
    let mut der = crate::par::CompensatedComplexSum::default();
    for n in 0..m {
        let x = q + n as f64;
        let t = Complex64::new(x, 0.0).powc(-s);
        val.add(t);
        der.add(-x.ln() * t);
    }
    let big_q = q + m as f64;
    let lq = big_q.ln();
    let qs = (-s * lq).exp();
    let sm1 = s - 1.0;
    val.add(big_q * qs / sm1);
    der.add(-lq * big_q * qs / sm1 - big_q * qs / (sm1 * sm1));
    val.add(0.5 * qs);
    der.add(-0.5 * lq * qs);
    let mut rising = s;
    let mut rising_d = Complex64::new(1.0, 0.0);
    let mut fact = 2.0;
    let mut qpow = qs / big_q;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let w = *b / fact;
        let term = rising * qpow * w;
        val.add(term);
        der.add((rising_d - lq * rising) * qpow * w);
        if term.norm() < 1e-18 * val.value().norm().max(1e-300) && k > 2 {
            break;
        }
        let kk = (k + 1) as f64;
        let f = (s + 2.0 * kk - 1.0) * (s + 2.0 * kk);
        let fd = 2.0 * s + 4.0 * kk - 1.0;
        rising_d = rising_d * f + rising * fd;
        rising *= f;
        fact *= (2.0 * kk + 1.0) * (2.0 * kk + 2.0);
        qpow /= big_q * big_q;
    }
    (val.value(), der.value())
}

pub fn hurwitz_zeta_real(s: f64, q: f64) -> f64 {
    hurwitz_zeta(Complex64::new(s, 0.0), q).re
}

/// Riemann zeta for `s != 1`.
pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta_real(s, 1.0)
}

/// Principal complex logarithm with the argument in (-pi, pi]; `None` on the
/// negative real axis or at zero.
pub fn principal_ln(z: Complex64) -> Option<Complex64> {
    if z.norm() == 0.0 || (z.im == 0.0 && z.re < 0.0) {
        None
    } else {
        Some(z.ln())
    }
}

/// Modified Bessel function `K_1(x)` for `x > 0` from
/// `int_0^inf exp(-x cosh u) cosh u du` by the trapezoidal rule, which
/// converges geometrically for this entire, doubly decaying integrand.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K_1 needs x > 0");
    let h = 0.0625;
    let f = |u: f64| (-x * (u.cosh() - 1.0)).exp() * u.cosh();
    let mut acc = 0.5 * f(0.0);
    let mut k = 1;
    loop {
        let v = f(k as f64 * h);
        acc += v;
        if v < 1e-18 * acc {
            break;
        }
        k += 1;
    }
    acc * h * (-x).exp()
}

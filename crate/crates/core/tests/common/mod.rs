//! Independent numerical oracles for the integration tests: quadrature
//! only, no library special functions.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Tanh-sinh quadrature on `[a, b]`; tolerates integrable endpoint
/// singularities. `f` receives `x` and is never called at an endpoint.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let w = b - a;
    let h = 1.0 / 128.0;
    let mut acc = 0.0;
    let kmax = (5.0 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let cu = u.cosh();
        let weight = 0.5 * PI * t.cosh() / (cu * cu);
        // distance to the nearer endpoint computed without cancellation
        let x = if u <= 0.0 {
            a + w / (1.0 + (-2.0 * u).exp())
        } else {
            b - w / (1.0 + (2.0 * u).exp())
        };
        if x <= a || x >= b {
            continue;
        }
        acc += weight * f(x);
    }
    0.5 * w * acc * h
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let dp = {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    n as f64 * (z * q1 - q0) / (z * z - 1.0)
                };
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

/// Composite Gauss-Legendre with `panels` equal panels on `[a, b]`.
pub fn gl_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * f(lo + 0.5 * h * (xi + 1.0));
        }
    }
    0.5 * h * acc
}

/// `int_lo^hi x^e e^{-c x} dx` for `0 <= lo < hi`; the series form at
/// `lo = 0` handles `e > -1` singularities.
pub fn power_exp_integral(e: f64, c: f64, lo: f64, hi: f64) -> f64 {
    if lo == 0.0 {
        let mut s = 0.0;
        let mut coef = 1.0;
        for k in 0..200 {
            let term = coef * hi.powf(e + k as f64 + 1.0) / (e + k as f64 + 1.0);
            s += term;
            if term.abs() < 1e-18 * s.abs() {
                break;
            }
            coef *= -c / (k + 1) as f64;
        }
        return s;
    }
    gl_composite(|x| x.powf(e) * (-c * x).exp(), lo, hi, 1)
}

/// `int_lo^inf x^e e^{-c x} dx` for `lo > 0`.
pub fn power_exp_tail(e: f64, c: f64, lo: f64) -> f64 {
    let span = 60.0 / c;
    gl_composite(
        |x| x.powf(e) * (-c * x).exp(),
        lo,
        lo + span,
        (4.0 * span).ceil() as usize,
    )
}

/// `int_0^inf x^alpha e^{-lambda x} (x+h)^alpha e^{-lambda (x+h)} dx` by
/// tanh-sinh on `[0, 1]` (split at `h` for small lags) and Gauss-Legendre
/// panels beyond.
pub fn gamma_kernel_acvf_quadrature(alpha: f64, lambda: f64, h: f64) -> f64 {
    let f = |x: f64| (alpha * (x * (x + h)).ln() - lambda * (2.0 * x + h)).exp();
    let head = if h > 0.0 && h < 1.0 {
        tanh_sinh(f, 0.0, h) + tanh_sinh(f, h, 1.0)
    } else {
        tanh_sinh(f, 0.0, 1.0)
    };
    let span = 80.0 / lambda;
    head + gl_composite(f, 1.0, 1.0 + span, (4.0 * span).ceil() as usize)
}

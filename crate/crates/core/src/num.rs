//! Scalar numerics: quadrature, splines, fits, special functions.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// (e^z - 1)/z, stable near zero.
pub fn exprel(z: C64) -> C64 {
    if z.norm() < 0.5 {
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..30 {
            term = term * z / k as f64;
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// sinh(x)/x.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// Sine and cosine integrals (Si(x), Ci(x)) for x > 0. Si is extended oddly to x <= 0.
pub fn sici(x: f64) -> (f64, f64) {
    if x < 0.0 {
        let (s, c) = sici(-x);
        return (-s, c);
    }
    if x == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    if x <= 4.0 {
        let x2 = x * x;
        let mut si = 0.0;
        let mut ci = 0.0;
        // term_k = (-1)^k x^(2k) / (2k)!  (for Ci) and x^(2k+1)/(2k+1)! (for Si)
        let mut even = 1.0;
        let mut odd = x;
        for k in 0..40 {
            let kf = k as f64;
            si += odd / (2.0 * kf + 1.0);
            if k > 0 {
                ci += even / (2.0 * kf);
            }
            even = -even * x2 / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
            odd = -odd * x2 / ((2.0 * kf + 2.0) * (2.0 * kf + 3.0));
            if odd.abs() < 1e-18 && even.abs() < 1e-18 {
                break;
            }
        }
        (si, EULER_GAMMA + x.ln() + ci)
    } else {
        let e1 = expint_e1(C64::new(0.0, x));
        // E1(ix) = -Ci(x) + i (Si(x) - pi/2)
        (e1.im + PI / 2.0, -e1.re)
    }
}

/// Exponential integral E1(z) via its continued fraction (Re z >= 0, |z| >~ 1).
fn expint_e1(z: C64) -> C64 {
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = C64::new(1.0 / tiny, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (d * a + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

// Gauss-Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss-Kronrod integration of a complex integrand on [a, b].
pub fn integrate(mut f: impl FnMut(f64) -> C64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (C64, f64) {
    let mut segs = vec![];
    let (v, e) = gk15(&mut f, a, b);
    segs.push((a, b, v, e));
    let mut total = v;
    let mut err = e;
    let mut iters = 0;
    while err > abs_tol.max(rel_tol * total.norm()) && iters < 2000 {
        iters += 1;
        let (imax, _) = segs
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, s)| if s.3 > acc.1 { (i, s.3) } else { acc });
        let (sa, sb, sv, se) = segs.swap_remove(imax);
        let m = 0.5 * (sa + sb);
        let (v1, e1) = gk15(&mut f, sa, m);
        let (v2, e2) = gk15(&mut f, m, sb);
        total += v1 + v2 - sv;
        err += e1 + e2 - se;
        segs.push((sa, m, v1, e1));
        segs.push((m, sb, v2, e2));
    }
    (total, err)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate(|x| C64::new(f(x), 0.0), a, b, abs_tol, rel_tol).0.re
}

/// Least-squares line y = slope*x + intercept. Returns (slope, intercept).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Bisection for a sign change of `f` on [a, b]; stops at relative width `rel_tol`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= rel_tol * m.abs().max(f64::MIN_POSITIVE) {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Natural cubic spline through (x_i, y_i) with increasing x.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for second derivatives
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (r - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        CubicSpline { x, y, m }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Inclusive linear grid of `n` points.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Inclusive geometric grid of `n` points.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

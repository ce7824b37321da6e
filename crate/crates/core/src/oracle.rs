//! Partial-wave reference solutions for the uniform delta shell g * dS on |x| = a.

use crate::error::{invalid, Error, Result};
use crate::num::{bisect, integrate};
use crate::propagator::{EvolutionConfig, SourceFunction};
use crate::resolvent::SpectralParameter;
use crate::spectral::BoundStateList;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub a: f64,
    pub g: f64,
    pub ell_max: usize,
}

impl ShellSpec {
    pub fn new(a: f64, g: f64, ell_max: usize) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !g.is_finite() {
            return invalid("shell needs a > 0 and finite coupling");
        }
        Ok(ShellSpec { a, g, ell_max })
    }

    /// ell_max = ceil(2 a lambda_max) + 8.
    pub fn for_lambda(a: f64, g: f64, lambda_max: f64) -> Result<Self> {
        Self::new(a, g, (2.0 * a * lambda_max.abs()).ceil() as usize + 8)
    }
}

/// j_l(z) and h^(1)_l(z) for l = 0..=ell_max.
pub fn spherical_bessel_all(ell_max: usize, z: C64) -> Result<(Vec<C64>, Vec<C64>)> {
    if z.norm() == 0.0 {
        return invalid("h1 is singular at z = 0");
    }
    if z.norm() <= 1.0 {
        let (j, h) = small_argument(ell_max, z);
        return Ok((j, h));
    }
    let start = (ell_max + 16).max((z.norm() + 40.0 + 3.0 * z.norm().sqrt()).ceil() as usize);
    // downward recurrence on ratios r_l = j_l / j_{l-1}; products underflow to zero instead of overflowing
    let mut r = vec![C64::new(0.0, 0.0); start + 2];
    for l in (1..=start).rev() {
        r[l] = C64::new(1.0, 0.0) / (((2 * l + 1) as f64) / z - r[l + 1]);
    }
    let j0 = z.sin() / z;
    let j1_closed = z.sin() / (z * z) - z.cos() / z;
    let j1 = if j0.norm() >= j1_closed.norm() { j0 * r[1] } else { j1_closed };
    let mut j = vec![C64::new(0.0, 0.0); ell_max + 1];
    j[0] = j0;
    if ell_max >= 1 {
        j[1] = j1;
    }
    for l in 2..=ell_max {
        j[l] = j[l - 1] * r[l];
    }
    let h = hankel_from(&j, z);
    Ok((j, h))
}

/// h_l = j_l + i y_l, with y_l from the (stable) upward recurrence.
fn hankel_from(j: &[C64], z: C64) -> Vec<C64> {
    let n = j.len();
    let mut y = vec![C64::new(0.0, 0.0); n];
    y[0] = -z.cos() / z;
    if n > 1 {
        y[1] = -z.cos() / (z * z) - z.sin() / z;
    }
    for l in 1..n.saturating_sub(1) {
        y[l + 1] = y[l] * ((2 * l + 1) as f64) / z - y[l - 1];
    }
    j.iter().zip(&y).map(|(a, b)| a + C64::i() * b).collect()
}

fn small_argument(ell_max: usize, z: C64) -> (Vec<C64>, Vec<C64>) {
    // power series for j_l; the downward recurrence loses everything to rescaling when |z| is tiny
    let mut j = Vec::with_capacity(ell_max + 1);
    let mut lead = C64::new(1.0, 0.0);
    let q = -z * z / 2.0;
    for l in 0..=ell_max {
        if l > 0 {
            lead = lead * z / (2 * l + 1) as f64;
        }
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..60 {
            term = term * q / (k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        j.push(lead * sum);
    }
    let h = hankel_from(&j, z);
    (j, h)
}

pub fn spherical_bessel(ell: usize, z: C64) -> Result<(C64, C64)> {
    let (j, h) = spherical_bessel_all(ell, z)?;
    Ok((j[ell], h[ell]))
}

/// beta_l for l = 0..=ell_max: g a^2 i k j_l(ka) h_l(ka), with the static limit g a / (2l+1).
pub fn mode_eigenvalues(shell: &ShellSpec, param: SpectralParameter) -> Vec<C64> {
    let k = param.wavenumber();
    let z = k * shell.a;
    let stat = |l: usize| C64::new(shell.g * shell.a / (2 * l + 1) as f64, 0.0);
    if z.norm() < 1e-8 {
        return (0..=shell.ell_max).map(stat).collect();
    }
    let (j, h) = spherical_bessel_all(shell.ell_max, z).expect("nonzero argument");
    let mut out: Vec<C64> = (0..=shell.ell_max)
        .map(|l| {
            let v = shell.g * shell.a * shell.a * C64::i() * k * j[l] * h[l];
            if v.re.is_finite() && v.im.is_finite() {
                v
            } else {
                stat(l)
            }
        })
        .collect();
    if let SpectralParameter::Imaginary(_) = param {
        out.iter_mut().for_each(|v| v.im = 0.0);
    }
    // closed form is better conditioned for l = 0
    out[0] = beta0(shell, k);
    out
}

fn beta0(shell: &ShellSpec, k: C64) -> C64 {
    if k.norm() * shell.a < 1e-8 {
        return C64::new(shell.g * shell.a, 0.0);
    }
    shell.g * (k * shell.a).sin() * (C64::i() * k * shell.a).exp() / k
}

pub fn mode_eigenvalue(shell: &ShellSpec, ell: usize, param: SpectralParameter) -> C64 {
    let s = ShellSpec { ell_max: shell.ell_max.max(ell), ..*shell };
    mode_eigenvalues(&s, param)[ell]
}

/// Roots of 1 + beta_l(i kappa) = 0 for every l; l with g a/(2l+1) = -1 are threshold resonances.
pub fn shell_bound_state(shell: &ShellSpec) -> BoundStateList {
    let mut out = BoundStateList::default();
    if shell.g >= 0.0 {
        return out;
    }
    let mut found: Vec<(f64, usize)> = vec![];
    for l in 0..=shell.ell_max {
        let stat = shell.g * shell.a / (2 * l + 1) as f64;
        if (stat + 1.0).abs() < 1e-12 {
            out.threshold_resonances.push(l);
            continue;
        }
        if stat > -1.0 {
            // |beta_l(i kappa)| decreases from its static value, so no root
            continue;
        }
        let f = |kappa: f64| 1.0 + mode_eigenvalue(shell, l, SpectralParameter::Imaginary(kappa)).re;
        let mut hi = 1.0 / shell.a;
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        let kappa = bisect(f, 1e-14, hi, 1e-12);
        found.push((kappa, l));
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0));
    out.kappas = found.iter().map(|v| v.0).collect();
    out.energies = found.iter().map(|v| -v.0 * v.0).collect();
    out.mode_labels = Some(found.iter().map(|v| v.1).collect());
    out
}

/// max_l |1 + beta_l|^{-1}.
pub fn shell_inverse_norm(shell: &ShellSpec, param: SpectralParameter) -> Result<f64> {
    let m = mode_eigenvalues(shell, param).iter().map(|b| (1.0 + b).norm()).fold(f64::INFINITY, f64::min);
    if m < 1e-12 {
        return Err(Error::Singular { at: param.to_string(), min_singular: m });
    }
    Ok(1.0 / m)
}

/// min_l |1 + beta_l|.
pub fn shell_min_singular(shell: &ShellSpec, param: SpectralParameter) -> f64 {
    mode_eigenvalues(shell, param).iter().map(|b| (1.0 + b).norm()).fold(f64::INFINITY, f64::min)
}

/// max_l |beta_l(lambda)|.
pub fn shell_high_energy_norm(shell: &ShellSpec, lambda: f64) -> f64 {
    mode_eigenvalues(shell, SpectralParameter::RealPlusI0(lambda)).iter().map(|b| b.norm()).fold(0.0, f64::max)
}

/// phi(lambda) = (R_0 f)(a) for a radial density f(s).
fn radial_resolvent_at_shell(f: &impl Fn(f64) -> f64, a: f64, s_max: f64, lambda: f64) -> C64 {
    let inner = integrate(|s| C64::new(f(s) * s * (lambda * s).sin(), 0.0), 0.0, a.min(s_max), 1e-15, 1e-10).0;
    let outer = if s_max > a {
        integrate(|s| f(s) * s * C64::new(0.0, lambda * s).exp(), a, s_max, 1e-15, 1e-10).0
    } else {
        C64::new(0.0, 0.0)
    };
    ((C64::new(0.0, lambda * a)).exp() * inner + outer * (lambda * a).sin()) / (lambda * a)
}

/// i lambda j_0(lambda r<) h_0(lambda r>) written without Bessel calls.
fn radial_green(lambda: f64, r1: f64, r2: f64) -> C64 {
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    let sinc_part = if lambda * lo < 1e-8 { 1.0 } else { (lambda * lo).sin() / (lambda * lo) };
    // i lambda * sinc(lambda lo) * (-i e^{i lambda hi} / (lambda hi))
    C64::new(0.0, lambda * hi).exp() * sinc_part / hi
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleField {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    /// values[t][probe]
    pub values: Vec<Vec<C64>>,
}

/// Stone-formula evolution of a radial Gaussian centred on the shell, computed in the s-wave.
pub fn shell_evolve(shell: &ShellSpec, f: &SourceFunction, times: &[f64], radii: &[f64], cfg: &EvolutionConfig) -> Result<OracleField> {
    if f.components.len() != 1 || crate::geom::norm(&f.components[0].center) > 1e-12 {
        return invalid("the oracle supports a single Gaussian centred at the shell centre");
    }
    let comp = f.components[0];
    let sigma = comp.width;
    let dens = move |s: f64| comp.amplitude * (2.0 * PI * sigma * sigma).powf(-1.5) * (-s * s / (2.0 * sigma * sigma)).exp();
    let s_max = 14.0 * sigma;
    let lam_max = cfg.lambda_max_for(sigma);
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let h = cfg.fine_spacing(t_max, lam_max);
    let nfine = (lam_max / h).ceil() as usize;
    let h = lam_max / nfine as f64;
    let a = shell.a;
    // Im(lambda C(lambda, r)) on the midpoint grid
    let mut im_f = vec![vec![0.0; radii.len()]; nfine];
    for (i, row) in im_f.iter_mut().enumerate() {
        let lam = (i as f64 + 0.5) * h;
        let phi = radial_resolvent_at_shell(&dens, a, s_max, lam);
        let b0 = beta0(shell, C64::new(lam, 0.0));
        let m = shell.g * phi / (1.0 + b0);
        for (p, &r) in radii.iter().enumerate() {
            let c = m * a * a * radial_green(lam, r, a);
            row[p] = (c * lam).im * cfg.eta(lam);
        }
    }
    let mut values = vec![];
    for &t in times {
        let mut row = vec![];
        for (p, &r) in radii.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (i, fr) in im_f.iter().enumerate() {
                let lam = (i as f64 + 0.5) * h;
                acc += C64::new(0.0, -t * lam * lam).exp() * fr[p];
            }
            let free = f.free_value(t, &[r, 0.0, 0.0]);
            row.push(free - acc * (2.0 / PI) * h);
        }
        values.push(row);
    }
    Ok(OracleField { times: times.to_vec(), radii: radii.to_vec(), values })
}

//! Kernel of the cut-off operator T_L on the rho-line and the five Wiener parameters.
//!
//! T(rho) has entries w_j delta(rho + |x_j - x_k|)/(4 pi |x_j - x_k|), so that
//! int e^{-i lambda rho} T(rho) d rho = A(lambda). T_L = T * L ceta(L .) has transform eta(lambda/L) A(lambda).

use crate::error::{invalid, Error, Result};
use crate::geom::{self, Point};
use crate::measure::{kato_norm, total_variation, DiscreteMeasure, ProbeSpec};
use crate::num::{integrate, integrate_real, sici};
use crate::resolvent::{assemble_bs_matrix_with, tv_norm, DiagRule, SpectralParameter};
use ndarray_linalg::Inverse;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Triangle cutoff and its Fejer transform.
#[derive(Debug, Clone, Copy, Default)]
pub struct CutoffPair;

impl CutoffPair {
    pub const L1_NORM_CETA: f64 = 1.0;

    pub fn eta(lambda: f64) -> f64 {
        (1.0 - lambda.abs()).max(0.0)
    }

    /// (1/2 pi) (sin(u/2)/(u/2))^2
    pub fn ceta(u: f64) -> f64 {
        if u.abs() < 1e-4 {
            (1.0 - u * u / 12.0) / (2.0 * PI)
        } else {
            let s = (0.5 * u).sin() / (0.5 * u);
            s * s / (2.0 * PI)
        }
    }

    /// int_{-inf}^u ceta
    pub fn cdf(u: f64) -> f64 {
        if u < 0.0 {
            return Self::tail(-u);
        }
        1.0 - Self::tail(u)
    }

    /// int_u^inf ceta
    pub fn upper(u: f64) -> f64 {
        if u >= 0.0 {
            Self::tail(u)
        } else {
            1.0 - Self::tail(-u)
        }
    }

    /// int_u^inf ceta for u >= 0.
    pub fn tail(u: f64) -> f64 {
        if u == 0.0 {
            return 0.5;
        }
        let u = u.abs();
        let (si, _) = sici(u);
        let one_minus_cos = if u < 1e-3 { u * u / 2.0 - u.powi(4) / 24.0 } else { 1.0 - u.cos() };
        (one_minus_cos / u + PI / 2.0 - si) / PI
    }

    /// int_U^inf e^{-i a u} ceta(u) du for U > 0.
    pub fn oscillatory_tail(a: f64, u0: f64) -> C64 {
        // (1 - cos u) e^{-iau} = e^{-iau} - e^{-i(a-1)u}/2 - e^{-i(a+1)u}/2
        (inv_sq_tail(a, u0) - 0.5 * inv_sq_tail(a - 1.0, u0) - 0.5 * inv_sq_tail(a + 1.0, u0)) / PI
    }
}

/// int_U^inf e^{-i b u} / u^2 du
fn inv_sq_tail(b: f64, u0: f64) -> C64 {
    if b == 0.0 {
        return C64::new(1.0 / u0, 0.0);
    }
    if b < 0.0 {
        return inv_sq_tail(-b, u0).conj();
    }
    let (si, ci) = sici(b * u0);
    let e1 = C64::new(-ci, -(PI / 2.0 - si));
    C64::new(0.0, -b * u0).exp() / u0 - C64::i() * b * e1
}

/// Uniform grid on the rho-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl RhoGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(end > start) || !start.is_finite() || !end.is_finite() {
            return invalid("rho grid needs start < end and positive step");
        }
        let len = ((end - start) / step).ceil() as usize + 1;
        Ok(RhoGrid { start, step, len })
    }

    /// [-diam - margin/L, margin/L] with spacing 1/(8L).
    pub fn covering(diam: f64, l: f64, margin: f64) -> Result<Self> {
        Self::new(-diam - margin / l, margin / l, 1.0 / (8.0 * l))
    }

    pub fn end(&self) -> f64 {
        self.start + (self.len - 1) as f64 * self.step
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    fn check(&self, diam: f64, l: f64) -> Result<()> {
        let tol = 1e-9 * (1.0 + diam);
        if self.step > 1.0 / (8.0 * l) * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!("rho spacing {} exceeds 1/(8L) = {}", self.step, 1.0 / (8.0 * l))));
        }
        if self.start > -diam - 10.0 / l + tol || self.end() < 10.0 / l - tol {
            return Err(Error::Resolution(format!(
                "rho grid [{}, {}] does not cover [-diam - 10/L, 10/L] = [{}, {}]",
                self.start,
                self.end(),
                -diam - 10.0 / l,
                10.0 / l
            )));
        }
        Ok(())
    }
}

fn check_l(l: f64) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() {
        return invalid("cutoff scale L must be positive and finite");
    }
    Ok(())
}

/// L w_j ceta(L(rho + r))/(4 pi r), r = |x_j - y|.
#[allow(non_snake_case)]
pub fn kernel_K_L(mu: &DiscreteMeasure, l: f64, rho: f64, j: usize, y: &Point) -> Result<f64> {
    check_l(l)?;
    let a = mu.atoms.get(j).ok_or_else(|| Error::InvalidInput(format!("atom {j} out of range")))?;
    let r = geom::dist(&a.x, y);
    if r == 0.0 {
        return invalid("target atom and source point coincide");
    }
    Ok(l * a.w * CutoffPair::ceta(l * (rho + r)) / (4.0 * PI * r))
}

/// Kernel of one entry: point pair at distance r, or a coincident pair smeared over the panel.
#[derive(Debug, Clone, Copy)]
enum Entry {
    Point { r: f64 },
    Panel { rho: f64 },
}

impl Entry {
    fn of(a: &crate::measure::Atom, y: &Point) -> Entry {
        let r = geom::dist(&a.x, y);
        if r <= 1e-12 * a.rho {
            Entry::Panel { rho: a.rho }
        } else {
            Entry::Point { r }
        }
    }

    /// Value per unit weight at rho.
    fn value(&self, l: f64, rho: f64) -> f64 {
        match *self {
            Entry::Point { r } => l * CutoffPair::ceta(l * (rho + r)) / (4.0 * PI * r),
            Entry::Panel { rho: p } => (CutoffPair::cdf(l * (rho + p)) - CutoffPair::cdf(l * rho)) / (2.0 * PI * p * p),
        }
    }

    /// Exact integral over all rho.
    fn mass(&self) -> f64 {
        match *self {
            Entry::Point { r } => 1.0 / (4.0 * PI * r),
            Entry::Panel { rho } => 1.0 / (2.0 * PI * rho),
        }
    }

    /// Mass of a unit ceta kernel centred at -s lying in |rho| >= R.
    fn point_tail(l: f64, s: f64, r_cut: f64) -> f64 {
        let hi = CutoffPair::tail(l * (r_cut + s));
        let lo = if s < r_cut { CutoffPair::tail(l * (r_cut - s)) } else { 1.0 - CutoffPair::tail(l * (s - r_cut)) };
        hi + lo
    }

    /// Integral over |rho| >= R.
    fn tail(&self, l: f64, r_cut: f64) -> f64 {
        match *self {
            Entry::Point { r } => Self::point_tail(l, r, r_cut) / (4.0 * PI * r),
            Entry::Panel { rho } => {
                let m = integrate_real(|s| Self::point_tail(l, s, r_cut), 0.0, rho, 1e-16, 1e-10);
                m / (2.0 * PI * rho * rho)
            }
        }
    }

    /// Integral over rho outside [a, b].
    fn outside(&self, l: f64, a: f64, b: f64) -> f64 {
        let unit = |s: f64| CutoffPair::upper(l * (b + s)) + CutoffPair::cdf(l * (a + s));
        match *self {
            Entry::Point { r } => unit(r) / (4.0 * PI * r),
            Entry::Panel { rho } => integrate_real(unit, 0.0, rho, 1e-16, 1e-10) / (2.0 * PI * rho * rho),
        }
    }
}

/// Trapezoid of |value| over the grid restricted to where the entry is concentrated,
/// with the exact mass outside that window.
fn entry_l1(e: &Entry, l: f64, grid: &RhoGrid) -> f64 {
    let centre = match *e {
        Entry::Point { r } => -r,
        Entry::Panel { rho } => -0.5 * rho,
    };
    let half = 400.0 / l;
    let lo_i = (((centre - half - grid.start) / grid.step).floor().max(0.0)) as usize;
    let hi_i = (((centre + half - grid.start) / grid.step).ceil() as usize).min(grid.len - 1);
    if hi_i <= lo_i {
        return e.mass();
    }
    let (a, b) = (grid.point(lo_i), grid.point(hi_i));
    let mut s = 0.0;
    for i in lo_i..=hi_i {
        let w = if i == lo_i || i == hi_i { 0.5 } else { 1.0 };
        s += w * e.value(l, grid.point(i));
    }
    let f = |x: f64| e.value(l, x);
    s * grid.step - end_correction(&f, a, b, grid.step) + e.outside(l, a, b)
}

/// Euler-Maclaurin h^2/12 (f'(b) - f'(a)) with derivatives by central differences.
fn end_correction<T>(f: &impl Fn(f64) -> T, a: f64, b: f64, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let e = h / 8.0;
    let d = |x: f64| (f(x + e) - f(x - e)) * (0.5 / e);
    (d(b) - d(a)) * (h * h / 12.0)
}

/// int sum_j |K_L(rho, x_j, y)| d rho for one source point.
pub fn w_norm_column(mu: &DiscreteMeasure, l: f64, grid: &RhoGrid, y: &Point) -> Result<f64> {
    check_l(l)?;
    Ok(mu.atoms.iter().map(|a| a.w.abs() * entry_l1(&Entry::of(a, y), l, grid)).sum())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WNorm {
    pub w_norm: f64,
    /// |eta-check|_1 kato_norm / (4 pi)
    pub bound: f64,
    pub within_bound: bool,
}

/// max over unit sources at the atoms of mu of the column integral; compared with kato_norm/(4 pi).
pub fn w_norm_estimate(mu: &DiscreteMeasure, l: f64, grid: &RhoGrid) -> Result<WNorm> {
    check_l(l)?;
    mu.validate()?;
    grid.check(mu.diameter(), l)?;
    let mut w: f64 = 0.0;
    for a in &mu.atoms {
        w = w.max(w_norm_column(mu, l, grid, &a.x)?);
    }
    let bound = CutoffPair::L1_NORM_CETA * kato_norm(mu, &ProbeSpec::default())? / (4.0 * PI);
    Ok(WNorm { w_norm: w, bound, within_bound: w <= bound * (1.0 + 1e-6) })
}

/// The W-norm of T_L restricted to |rho| >= R, maximized over sources at the atoms.
pub fn tail_norm(mu: &DiscreteMeasure, l: f64, r_cut: f64) -> Result<f64> {
    check_l(l)?;
    if !(r_cut > 2.0) {
        return invalid("tail radius R must exceed 2");
    }
    let mut best: f64 = 0.0;
    for src in &mu.atoms {
        let v: f64 = mu.atoms.iter().map(|a| a.w.abs() * Entry::of(a, &src.x).tail(l, r_cut)).sum();
        best = best.max(v);
    }
    Ok(best)
}

/// Smallest R on the grid with tail_norm(R) <= 1/(K alpha_sup).
pub fn select_r(mu: &DiscreteMeasure, l: f64, k: f64, alpha_sup: f64, r_grid: &[f64]) -> Result<f64> {
    if !(k > 0.0) || !(alpha_sup > 0.0) || !alpha_sup.is_finite() {
        return invalid("K and alpha_sup must be positive and finite");
    }
    let target = 1.0 / (k * alpha_sup);
    for &r in r_grid {
        if tail_norm(mu, l, r)? <= target {
            return Ok(r);
        }
    }
    let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
    let kato = kato_norm(mu, &ProbeSpec::default())?;
    // Fejer tail ~ 1/(pi L (R - diam)) times the column mass kato/(4 pi)
    let l_req = k * alpha_sup * kato / (4.0 * PI * PI * (r_max - mu.diameter()).max(1e-300));
    Err(Error::Unreachable(format!(
        "tail <= 1/(K alpha) = {target:.3e} not reached for R <= {r_max}; needs L >= {l_req:.3e} (currently {l})"
    )))
}

/// Default tail-radius grid: 2.5 * 1.25^i.
pub fn default_r_grid() -> Vec<f64> {
    (0..60).map(|i| 2.5 * 1.25f64.powi(i)).collect()
}

/// Samples of the matrix kernel T_L on a grid, entry (j, k) with source atom k.
fn sample_kernel(mu: &DiscreteMeasure, l: f64, grid: &RhoGrid) -> Vec<Vec<f64>> {
    let n = mu.len();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            let e = Entry::of(&mu.atoms[j], &mu.atoms[k].x);
            let w = mu.atoms[j].w;
            out.push((0..grid.len).map(|i| w * e.value(l, grid.point(i))).collect());
        }
    }
    out
}

/// Spectrum of the N-fold rho-convolution power of T_L, formed by zero-padded FFT products.
pub struct KernelPower {
    n: usize,
    power: usize,
    step: f64,
    size: usize,
    spectra: Vec<Vec<C64>>,
}

impl KernelPower {
    pub fn build(mu: &DiscreteMeasure, l: f64, power: usize, grid: &RhoGrid) -> Result<Self> {
        check_l(l)?;
        if power == 0 {
            return invalid("power must be at least 1");
        }
        let n = mu.len();
        let support = power * (grid.len - 1) + 1;
        let size = (support + (1.0 / grid.step).ceil() as usize + 16).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        let base: Vec<Vec<C64>> = sample_kernel(mu, l, grid)
            .into_iter()
            .map(|v| {
                let mut buf: Vec<C64> = v.iter().map(|&x| C64::new(x * grid.step, 0.0)).collect();
                buf.resize(size, C64::new(0.0, 0.0));
                fft.process(&mut buf);
                buf
            })
            .collect();
        let mut spectra = base.clone();
        for _ in 1..power {
            let mut next = vec![vec![C64::new(0.0, 0.0); size]; n * n];
            for f in 0..size {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for m in 0..n {
                            acc += spectra[j * n + m][f] * base[m * n + k][f];
                        }
                        next[j * n + k][f] = acc;
                    }
                }
            }
            spectra = next;
        }
        Ok(KernelPower { n, power, step: grid.step, size, spectra })
    }

    pub fn power(&self) -> usize {
        self.power
    }

    /// W-norm of T^N(rho) - T^N(rho - delta), the shift applied as a phase in frequency.
    pub fn modulus(&self, delta: f64) -> f64 {
        if delta == 0.0 {
            return 0.0;
        }
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(self.size);
        let phase: Vec<C64> = (0..self.size)
            .map(|f| {
                let m = if f <= self.size / 2 { f as f64 } else { f as f64 - self.size as f64 };
                let omega = 2.0 * PI * m / (self.size as f64 * self.step);
                C64::new(1.0, 0.0) - C64::new(0.0, -omega * delta).exp()
            })
            .collect();
        let mut cols = vec![0.0; self.n];
        for j in 0..self.n {
            for k in 0..self.n {
                let mut buf: Vec<C64> = self.spectra[j * self.n + k].iter().zip(&phase).map(|(s, p)| s * p).collect();
                ifft.process(&mut buf);
                // buf / size holds h * D(rho_i); the rho integral multiplies by nothing further
                cols[k] += buf.iter().map(|z| z.norm()).sum::<f64>() / self.size as f64;
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// W-norm of T^N itself.
    pub fn w_norm(&self) -> f64 {
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(self.size);
        let mut cols = vec![0.0; self.n];
        for j in 0..self.n {
            for k in 0..self.n {
                let mut buf = self.spectra[j * self.n + k].clone();
                ifft.process(&mut buf);
                cols[k] += buf.iter().map(|z| z.norm()).sum::<f64>() / self.size as f64;
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }
}

/// |T_L^N(.) - T_L^N(. - delta)|_W from (N - 1) discrete convolutions on the grid.
pub fn translation_modulus(mu: &DiscreteMeasure, l: f64, delta: f64, power: usize, grid: &RhoGrid) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return invalid("delta must lie in [0, 1)");
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    if grid.step > delta / 4.0 {
        return Err(Error::Resolution(format!("rho spacing {} exceeds delta/4 = {}", grid.step, delta / 4.0)));
    }
    Ok(KernelPower::build(mu, l, power, grid)?.modulus(delta))
}

/// Transform of one unit-weight entry: grid trapezoid plus closed-form oscillatory tails.
fn entry_transform(e: &Entry, l: f64, lambda: f64, grid: &RhoGrid) -> C64 {
    let a = lambda / l;
    let (lo, hi) = (grid.start, grid.end());
    let mut s = C64::new(0.0, 0.0);
    for i in 0..grid.len {
        let w = if i == 0 || i == grid.len - 1 { 0.5 } else { 1.0 };
        let rho = grid.point(i);
        s += C64::new(0.0, -lambda * rho).exp() * (w * e.value(l, rho));
    }
    s *= grid.step;
    let g = |rho: f64| C64::new(0.0, -lambda * rho).exp() * e.value(l, rho);
    s -= end_correction(&g, lo, hi, grid.step);
    // unit ceta centred at -t: tails in u = L(rho + t) beyond L(hi + t) and below L(lo + t)
    let tails = |t: f64| -> C64 {
        let phase = C64::new(0.0, lambda * t).exp();
        let right = CutoffPair::oscillatory_tail(a, l * (hi + t));
        let left = CutoffPair::oscillatory_tail(-a, -l * (lo + t));
        phase * (right + left)
    };
    match *e {
        Entry::Point { r } => s + tails(r) / (4.0 * PI * r),
        Entry::Panel { rho } => {
            let (v, _) = integrate(tails, 0.0, rho, 1e-16, 1e-10);
            s + v / (2.0 * PI * rho * rho)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierCheck {
    pub lambda: f64,
    pub eta: f64,
    /// Max relative deviation over entries above 1e-8 (absolute when eta = 0).
    pub deviation: f64,
}

/// Fourier transform of the sampled rho-kernel at lambda against eta(lambda/L) A(lambda).
pub fn fourier_transform_check(mu: &DiscreteMeasure, l: f64, lambda: f64, grid: &RhoGrid) -> Result<FourierCheck> {
    check_l(l)?;
    grid.check(mu.diameter(), l)?;
    let eta = CutoffPair::eta(lambda / l);
    let a = assemble_bs_matrix_with(mu, SpectralParameter::real(lambda)?, DiagRule::DiscAverage)?;
    let n = mu.len();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            let e = Entry::of(&mu.atoms[j], &mu.atoms[k].x);
            let got = entry_transform(&e, l, lambda, grid) * mu.atoms[j].w;
            let want = a.entries[[j, k]] * eta;
            if eta == 0.0 {
                dev = dev.max(got.norm());
            } else if want.norm() > 1e-8 {
                dev = dev.max((got - want).norm() / want.norm());
            }
        }
    }
    Ok(FourierCheck { lambda, eta, deviation: dev })
}

/// min { n : (n - 1) eps > 2 }
pub fn power_rule(eps_fit: f64) -> Result<usize> {
    if !(eps_fit > 0.0) || !eps_fit.is_finite() {
        return invalid("eps_fit must be positive and finite");
    }
    let mut n = 1usize;
    while (n - 1) as f64 * eps_fit <= 2.0 * (1.0 + 1e-12) {
        n += 1;
    }
    Ok(n)
}

/// Largest delta in [4h, 1) with modulus(delta) <= target, by bisection.
pub fn select_delta(kp: &KernelPower, target: f64, delta_min: f64) -> Result<f64> {
    let delta_max = 0.999;
    if kp.modulus(delta_max) <= target {
        return Ok(delta_max);
    }
    if kp.modulus(delta_min) > target {
        return Err(Error::Unreachable(format!(
            "translation modulus exceeds {target:.3e} already at delta = {delta_min:.3e}; refine the rho grid"
        )));
    }
    let (mut a, mut b) = (delta_min, delta_max);
    while b - a > 1e-6 * b {
        let m = 0.5 * (a + b);
        if kp.modulus(m) <= target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WienerParameters {
    pub w_norm: f64,
    pub alpha_sup: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub eps_fit: f64,
    /// Tail bounds in the two norms: kato/(4 pi) scaled Fejer tail and |V|_meas / R.
    pub tail_at_r: f64,
    pub meas_over_r: f64,
}

impl WienerParameters {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain record")
    }
}

/// sup over lambda of |(I + eta(lambda/L) A(lambda))^{-1}|_TV.
pub fn alpha_sup(mu: &DiscreteMeasure, l: f64, lambdas: &[f64]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for &lam in lambdas {
        let p = SpectralParameter::real(lam)?;
        let a = assemble_bs_matrix_with(mu, p, DiagRule::DiscAverage)?;
        let eta = CutoffPair::eta(lam / l);
        let mut m = a.entries.mapv(|z| z * eta);
        for i in 0..mu.len() {
            m[[i, i]] += 1.0;
        }
        let inv = m.inv().map_err(|_| Error::Singular { at: p.to_string(), min_singular: 0.0 })?;
        let v = tv_norm(&inv);
        if !v.is_finite() {
            return Err(Error::Singular { at: p.to_string(), min_singular: 0.0 });
        }
        best = best.max(v);
    }
    Ok(best)
}

/// The five parameters for the cut-off operator T_L.
pub fn parameter_report(mu: &DiscreteMeasure, l: f64, lambdas: &[f64], k: f64, eps_fit: f64) -> Result<WienerParameters> {
    check_l(l)?;
    if !(k > 0.0) {
        return invalid("K must be positive");
    }
    let grid = RhoGrid::covering(mu.diameter(), l, 64.0)?;
    let w = w_norm_estimate(mu, l, &grid)?;
    let alpha = alpha_sup(mu, l, lambdas)?;
    let r = select_r(mu, l, k, alpha, &default_r_grid())?;
    let n = power_rule(eps_fit)?;
    let kp = KernelPower::build(mu, l, n, &grid)?;
    let delta = select_delta(&kp, 3.0 / k, 4.0 * grid.step)?;
    Ok(WienerParameters {
        w_norm: w.w_norm,
        alpha_sup: alpha,
        r,
        n,
        delta,
        k,
        l,
        eps_fit,
        tail_at_r: tail_norm(mu, l, r)?,
        meas_over_r: total_variation(mu) / r,
    })
}

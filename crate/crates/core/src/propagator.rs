//! Free and perturbed Schrodinger evolution of Gaussian data via the Stone formula.

use crate::error::{invalid, Error, Result};
use crate::geom::{self, Point};
use crate::measure::DiscreteMeasure;
use crate::num::{integrate, sinhc, CubicSpline};
use crate::resolvent::{assemble_bs_matrix_with, DiagRule, SpectralParameter};
use ndarray::Array1;
use ndarray_linalg::{Solve, SVD};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub center: Point,
    pub width: f64,
    /// L^1 mass of the component (signed).
    pub amplitude: f64,
}

impl GaussianComponent {
    pub fn density(&self, x: &Point) -> f64 {
        let s2 = self.width * self.width;
        let d = geom::dist(x, &self.center);
        self.amplitude * (2.0 * PI * s2).powf(-1.5) * (-d * d / (2.0 * s2)).exp()
    }

    /// (e^{it Delta} f)(x): the variance sigma^2 becomes sigma^2 + 2it.
    pub fn free_value(&self, t: f64, x: &Point) -> C64 {
        let s = C64::new(self.width * self.width, 2.0 * t);
        let d = geom::dist(x, &self.center);
        self.amplitude * (-1.5 * (2.0 * PI * s).ln()).exp() * (-d * d / (2.0 * s)).exp()
    }

    /// Spherical mean over |y - x| = s, times 4 pi s^2.
    fn shell_mass(&self, d: f64, s: f64) -> f64 {
        let s2 = self.width * self.width;
        let pref = self.amplitude * (2.0 * PI * s2).powf(-1.5);
        let z = s * d / s2;
        if z > 1.0 {
            pref * 4.0 * PI * s * s2 / (2.0 * d) * ((-(s - d).powi(2) / (2.0 * s2)).exp() - (-(s + d).powi(2) / (2.0 * s2)).exp())
        } else {
            pref * 4.0 * PI * s * s * (-(s * s + d * d) / (2.0 * s2)).exp() * sinhc(z)
        }
    }
}

/// Finite mixture of normalized Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFunction {
    pub components: Vec<GaussianComponent>,
    l1: f64,
}

impl SourceFunction {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return invalid("source needs at least one Gaussian");
        }
        for c in &components {
            if !(c.width > 0.0) || !c.width.is_finite() || !c.amplitude.is_finite() || !geom::is_finite(&c.center) {
                return invalid("Gaussian components need finite data and positive width");
            }
        }
        let same_sign = components.iter().all(|c| c.amplitude >= 0.0) || components.iter().all(|c| c.amplitude <= 0.0);
        let l1 = if same_sign {
            components.iter().map(|c| c.amplitude.abs()).sum()
        } else {
            mixed_l1(&components)
        };
        Ok(SourceFunction { components, l1 })
    }

    /// Unit-mass Gaussian.
    pub fn gaussian(center: Point, width: f64) -> Result<Self> {
        Self::new(vec![GaussianComponent { center, width, amplitude: 1.0 }])
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    pub fn density(&self, x: &Point) -> f64 {
        self.components.iter().map(|c| c.density(x)).sum()
    }

    pub fn free_value(&self, t: f64, x: &Point) -> C64 {
        self.components.iter().map(|c| c.free_value(t, x)).sum()
    }

    pub fn scaled(&self, c: f64) -> SourceFunction {
        let comps = self.components.iter().map(|g| GaussianComponent { amplitude: g.amplitude * c, ..*g }).collect();
        SourceFunction { components: comps, l1: self.l1 * c.abs() }
    }

    pub fn min_width(&self) -> f64 {
        self.components.iter().map(|c| c.width).fold(f64::INFINITY, f64::min)
    }

    /// (R_0(lambda^2) f)(x) by radial quadrature of each component's spherical marginal.
    pub fn resolvent_at(&self, lambda: f64, x: &Point, rel_tol: f64) -> C64 {
        self.components.iter().map(|c| radial_resolvent(c, lambda, geom::dist(x, &c.center), rel_tol)).sum()
    }
}

fn radial_resolvent(c: &GaussianComponent, lambda: f64, d: f64, rel_tol: f64) -> C64 {
    let sig = c.width;
    let lo = (d - 9.0 * sig).max(0.0);
    let hi = d + 9.0 * sig;
    let pieces = ((hi - lo) / sig).ceil().max(1.0) as usize;
    let h = (hi - lo) / pieces as f64;
    let scale = c.amplitude.abs() * (2.0 * PI * sig * sig).powf(-1.5) * sig * sig;
    let mut total = C64::new(0.0, 0.0);
    for k in 0..pieces {
        let a = lo + k as f64 * h;
        let (v, _) = integrate(
            |s| C64::new(0.0, lambda * s).exp() * c.shell_mass(d, s) / (4.0 * PI * s.max(1e-300)),
            a,
            a + h,
            1e-15 * scale,
            rel_tol,
        );
        total += v;
    }
    total
}

fn mixed_l1(components: &[GaussianComponent]) -> f64 {
    // midpoint rule on a box covering every component to 8 sigma
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut smin = f64::INFINITY;
    for c in components {
        smin = smin.min(c.width);
        for a in 0..3 {
            lo[a] = lo[a].min(c.center[a] - 8.0 * c.width);
            hi[a] = hi[a].max(c.center[a] + 8.0 * c.width);
        }
    }
    let h = smin / 6.0;
    let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / h).ceil() as usize);
    let mut s = 0.0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let x = [lo[0] + (i as f64 + 0.5) * h, lo[1] + (j as f64 + 0.5) * h, lo[2] + (k as f64 + 0.5) * h];
                s += components.iter().map(|c| c.density(&x)).sum::<f64>().abs();
            }
        }
    }
    s * h * h * h
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub probe_points: Vec<Point>,
    /// values[t][probe]
    pub values: Vec<Vec<C64>>,
    pub sup_norms: Vec<f64>,
    /// Where each sup was attained (a probe or a refined point).
    pub sup_points: Vec<Point>,
    pub ratio: Vec<f64>,
    pub l1_norm: f64,
    pub notes: Vec<String>,
}

impl EvolutionResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,probe_index,re_u,im_u,sup_norm,ratio\n");
        for (ti, t) in self.times.iter().enumerate() {
            for (pi, v) in self.values[ti].iter().enumerate() {
                s.push_str(&format!("{t:e},{pi},{:e},{:e},{:e},{:e}\n", v.re, v.im, self.sup_norms[ti], self.ratio[ti]));
            }
        }
        s
    }
}

/// Quadrature and cutoff settings for the Stone integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Cutoff scale L in eta(lambda / L).
    pub cutoff_l: f64,
    /// Top of the lambda integral; defaults to min(L, lambda_sigma / sigma_min).
    pub lambda_max: Option<f64>,
    pub lambda_sigma: f64,
    /// Spacing of the grid where I + A is solved; defaults to 1/(4 D), D the largest phase length.
    pub coarse_spacing: Option<f64>,
    /// Relative tolerance for the radial quadrature of R_0 f.
    pub quad_rel_tol: f64,
    /// Allowed relative change between the full and half solve grids.
    pub richardson_tol: f64,
    pub diag_rule: DiagRule,
    /// Reject the run if min singular value of I + A(0) is below this (unless forced).
    pub zero_floor: f64,
    pub force: bool,
    /// Locally maximize |u(t)| around the best probes.
    pub refine_sup: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            cutoff_l: 256.0,
            lambda_max: None,
            lambda_sigma: 12.0,
            coarse_spacing: None,
            quad_rel_tol: 1e-8,
            richardson_tol: 0.01,
            diag_rule: DiagRule::LatticeCorrected,
            zero_floor: 1e-3,
            force: false,
            refine_sup: true,
        }
    }
}

impl EvolutionConfig {
    /// Triangle cutoff (1 - |lambda|/L)_+.
    pub fn eta(&self, lambda: f64) -> f64 {
        (1.0 - lambda.abs() / self.cutoff_l).max(0.0)
    }

    pub fn lambda_max_for(&self, sigma_min: f64) -> f64 {
        self.lambda_max.unwrap_or(self.lambda_sigma / sigma_min).min(self.cutoff_l)
    }

    /// Trapezoid spacing resolving e^{-i t lambda^2} up to lambda_max.
    pub fn fine_spacing(&self, t_max: f64, lambda_max: f64) -> f64 {
        if t_max == 0.0 {
            lambda_max / 2000.0
        } else {
            (PI / (8.0 * t_max * lambda_max)).min(lambda_max / 2000.0)
        }
    }
}

fn ratio_of(sup: f64, t: f64, l1: f64) -> f64 {
    t.abs().powf(1.5) * sup / l1
}

fn refine(eval: &impl Fn(&Point) -> f64, probes: &[Point], vals: &[f64], step: f64, starts: usize) -> (f64, Point) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut best = (vals[order[0]], probes[order[0]]);
    for &i in order.iter().take(starts) {
        // stay near the probe: the lambda grid only resolves phases up to the probe set's extent
        let start = probes[i];
        let local = |x: &Point| if geom::dist(x, &start) <= 8.0 * step { eval(x) } else { 0.0 };
        let (p, v) = geom::pattern_max(&local, start, step);
        if v > best.0 {
            best = (v, p);
        }
    }
    best
}

/// Closed-form e^{it Delta} f at the probes.
pub fn free_evolve(f: &SourceFunction, times: &[f64], probes: &[Point], refine_sup: bool) -> Result<EvolutionResult> {
    if times.iter().any(|&t| t == 0.0) {
        return invalid("t = 0 has no dispersive ratio");
    }
    if probes.is_empty() {
        return invalid("no probe points");
    }
    let mut res = EvolutionResult {
        times: times.to_vec(),
        probe_points: probes.to_vec(),
        values: vec![],
        sup_norms: vec![],
        sup_points: vec![],
        ratio: vec![],
        l1_norm: f.l1_norm(),
        notes: vec![],
    };
    for &t in times {
        let vals: Vec<C64> = probes.iter().map(|x| f.free_value(t, x)).collect();
        let mods: Vec<f64> = vals.iter().map(|v| v.norm()).collect();
        let (sup, at) = if refine_sup {
            let step = (f.min_width().powi(2) + 4.0 * t * t).sqrt() / f.min_width() * f.min_width() / 4.0;
            refine(&|x: &Point| f.free_value(t, x).norm(), probes, &mods, step, 3)
        } else {
            let i = (0..mods.len()).max_by(|&a, &b| mods[a].total_cmp(&mods[b])).unwrap();
            (mods[i], probes[i])
        };
        res.ratio.push(ratio_of(sup, t, f.l1_norm()));
        res.sup_norms.push(sup);
        res.sup_points.push(at);
        res.values.push(vals);
    }
    Ok(res)
}

/// Smallest singular value of I + A at the given parameter.
pub fn min_singular_at(mu: &DiscreteMeasure, param: SpectralParameter, rule: DiagRule) -> Result<f64> {
    let a = assemble_bs_matrix_with(mu, param, rule)?;
    let (_, s, _) = a.identity_plus().svd(false, false)?;
    Ok(s.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Stone-formula evolution of the absolutely continuous part:
/// u(t) = e^{it Delta} f - (1/(pi i)) int eta(lambda/L) e^{-it lambda^2} lambda R_0 (I + V R_0)^{-1} V R_0 f d lambda.
/// Real f and V give C(-lambda) = conj C(lambda), so only lambda > 0 is solved.
pub fn evolve_ac(
    mu: &DiscreteMeasure,
    f: &SourceFunction,
    times: &[f64],
    probes: &[Point],
    cfg: &EvolutionConfig,
) -> Result<EvolutionResult> {
    if times.iter().any(|&t| t == 0.0) {
        return invalid("t = 0 has no dispersive ratio");
    }
    if probes.is_empty() {
        return invalid("no probe points");
    }
    mu.validate()?;
    let mut notes = vec![];
    let s0 = min_singular_at(mu, SpectralParameter::RealPlusI0(0.0), cfg.diag_rule)?;
    notes.push(format!("min singular value of I + A(0) = {s0:.6e}"));
    if s0 < cfg.zero_floor {
        if !cfg.force {
            return Err(Error::Precondition(format!(
                "zero energy is not regular (min singular value {s0:.3e} < {}); rerun forced to override",
                cfg.zero_floor
            )));
        }
        notes.push("forced past a non-regular threshold".into());
    }
    let sigma_min = f.min_width();
    let lam_max = cfg.lambda_max_for(sigma_min);
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    // phase length: probe -> atom -> source
    let mut d_pa: f64 = 0.0;
    for p in probes {
        for a in &mu.atoms {
            d_pa = d_pa.max(geom::dist(p, &a.x));
        }
    }
    let mut d_as: f64 = 0.0;
    for a in &mu.atoms {
        for c in &f.components {
            d_as = d_as.max(geom::dist(&a.x, &c.center) + 3.0 * c.width);
        }
    }
    let hc_target = cfg.coarse_spacing.unwrap_or(1.0 / (4.0 * (d_pa + d_as)));
    let nc = ((lam_max / hc_target).ceil() as usize).max(8);
    let nc = nc + nc % 2; // even, so the half grid shares the endpoint
    let hc = lam_max / nc as f64;
    let hf = cfg.fine_spacing(t_max, lam_max).min(hc / 4.0);
    let nf = (lam_max / hf).ceil() as usize;
    let hf = lam_max / nf as f64;
    notes.push(format!("lambda_max={lam_max} L={} coarse_points={} fine_points={nf}", cfg.cutoff_l, nc + 1));

    let n = mu.len();
    let weights = mu.weights();
    let mut coeffs: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; nc + 1];
    let mut cache: HashMap<(usize, u64), C64> = HashMap::new();
    for (i, slot) in coeffs.iter_mut().enumerate().skip(1) {
        let lam = i as f64 * hc;
        let param = SpectralParameter::RealPlusI0(lam);
        let a = assemble_bs_matrix_with(mu, param, cfg.diag_rule)?;
        cache.clear();
        let b: Array1<C64> = mu
            .atoms
            .iter()
            .zip(&weights)
            .map(|(atom, &w)| {
                let r0f: C64 = f
                    .components
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| {
                        let d = geom::dist(&atom.x, &c.center);
                        let key = (ci, (d * 1e12).round() as u64);
                        *cache.entry(key).or_insert_with(|| radial_resolvent(c, lam, d, cfg.quad_rel_tol))
                    })
                    .sum();
                r0f * w
            })
            .collect();
        let sol = a.identity_plus().solve_into(b).map_err(|_| Error::Singular { at: param.to_string(), min_singular: 0.0 })?;
        if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Singular { at: param.to_string(), min_singular: 0.0 });
        }
        *slot = sol.to_vec();
    }

    let lam_c: Vec<f64> = (0..=nc).map(|i| i as f64 * hc).collect();
    let im_f_at = |x: &Point| -> Vec<f64> {
        let mut out = vec![0.0; nc + 1];
        for i in 1..=nc {
            let lam = lam_c[i];
            let k = C64::new(0.0, lam);
            let c: C64 = mu
                .atoms
                .iter()
                .zip(&coeffs[i])
                .map(|(a, m)| {
                    let r = geom::dist(x, &a.x).max(1e-12);
                    (k * r).exp() / (4.0 * PI * r) * m
                })
                .sum();
            out[i] = (c * lam).im;
        }
        out
    };
    let fine_lam: Vec<f64> = (0..nf).map(|i| (i as f64 + 0.5) * hf).collect();
    let fine_eta: Vec<f64> = fine_lam.iter().map(|&l| cfg.eta(l)).collect();
    // At a resonant threshold Im(lambda C) has a nonzero limit as lambda -> 0+, so the
    // anchor F(0) = 0 is dropped and the spline extrapolates from the first positive node.
    let first = if s0 < cfg.zero_floor { 1 } else { 0 };
    let correction = |samples: &[f64], stride: usize, t: f64| -> C64 {
        let xs: Vec<f64> = lam_c[first..].iter().step_by(stride).cloned().collect();
        let ys: Vec<f64> = samples[first..].iter().step_by(stride).cloned().collect();
        let sp = CubicSpline::new(xs, ys);
        let mut acc = C64::new(0.0, 0.0);
        for (l, e) in fine_lam.iter().zip(&fine_eta) {
            acc += C64::new(0.0, -t * l * l).exp() * (e * sp.eval(*l));
        }
        acc * (2.0 / PI) * hf
    };

    let probe_samples: Vec<Vec<f64>> = probes.iter().map(|p| im_f_at(p)).collect();
    let mut values = vec![];
    let mut sup_norms = vec![];
    let mut sup_points = vec![];
    let mut ratio = vec![];
    let mut worst_rich: f64 = 0.0;
    for &t in times {
        let mut row = vec![];
        let mut dev: f64 = 0.0;
        for (pi, p) in probes.iter().enumerate() {
            let free = f.free_value(t, p);
            let full = free - correction(&probe_samples[pi], 1, t);
            let half = free - correction(&probe_samples[pi], 2, t);
            dev = dev.max((full - half).norm());
            row.push(full);
        }
        let mods: Vec<f64> = row.iter().map(|v| v.norm()).collect();
        let probe_sup = mods.iter().cloned().fold(0.0, f64::max);
        worst_rich = worst_rich.max(dev / probe_sup.max(1e-300));
        let (sup, at) = if cfg.refine_sup {
            let step = sigma_min / 4.0;
            // the point-atom field is singular at the atoms, keep clear of them
            let keep_out = 2.0 * mu.max_rho();
            let eval = |x: &Point| {
                if mu.atoms.iter().any(|a| geom::dist(x, &a.x) < keep_out) {
                    return 0.0;
                }
                (f.free_value(t, x) - correction(&im_f_at(x), 1, t)).norm()
            };
            refine(&eval, probes, &mods, step, 2)
        } else {
            let i = (0..mods.len()).max_by(|&a, &b| mods[a].total_cmp(&mods[b])).unwrap();
            (mods[i], probes[i])
        };
        ratio.push(ratio_of(sup, t, f.l1_norm()));
        sup_norms.push(sup);
        sup_points.push(at);
        values.push(row);
    }
    notes.push(format!("richardson relative deviation {worst_rich:.3e}"));
    if worst_rich > cfg.richardson_tol {
        return Err(Error::Quadrature(format!(
            "full and half lambda grids differ by {worst_rich:.3e} > {}",
            cfg.richardson_tol
        )));
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        probe_points: probes.to_vec(),
        values,
        sup_norms,
        sup_points,
        ratio,
        l1_norm: f.l1_norm(),
        notes,
    })
}

/// (sup over t of the ratio, least-squares slope of log ratio against log t).
pub fn dispersive_ratio(res: &EvolutionResult) -> Result<(f64, f64)> {
    let ts: Vec<f64> = res.times.iter().map(|t| t.abs()).collect();
    let mut sorted = ts.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return invalid("time samples must be distinct");
    }
    if ts.len() < 5 {
        return Err(Error::Precondition("need at least 5 time samples".into()));
    }
    if sorted[sorted.len() - 1] / sorted[0] < 10.0 * (1.0 - 1e-12) {
        return Err(Error::Precondition("time samples must span a decade".into()));
    }
    let sup = res.ratio.iter().cloned().fold(0.0, f64::max);
    Ok((sup, crate::num::loglog_slope(&ts, &res.ratio)))
}

/// Points along the three axes and four diagonals at the given distances from `center`.
pub fn radial_probes(center: Point, radii: &[f64]) -> Vec<Point> {
    let s = 1.0 / 3f64.sqrt();
    let dirs: [Point; 4] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [s, s, s]];
    let mut out = vec![];
    for &r in radii {
        if r == 0.0 {
            out.push(center);
            continue;
        }
        for d in &dirs {
            out.push(geom::add_scaled(&center, r, d));
        }
    }
    out
}

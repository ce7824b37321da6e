//! Discrete signed measures and their Kato / dimension diagnostics.

use crate::error::{invalid, Error, Result};
use crate::geom::{self, CellGrid, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Upper bound on atom counts produced by generators.
pub const DEFAULT_ATOM_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Point,
    pub w: f64,
    pub rho: f64,
}

/// Signed measure sum_j w_j delta_{x_j}; each atom stands for a panel of radius rho_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub meta: String,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Atom>, meta: impl Into<String>) -> Result<Self> {
        let m = DiscreteMeasure { atoms, meta: meta.into() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return invalid("measure has no atoms");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if !geom::is_finite(&a.x) || !a.w.is_finite() {
                return invalid(format!("atom {i} has a non-finite coordinate or weight"));
            }
            if !(a.rho > 0.0) || !a.rho.is_finite() {
                return invalid(format!("atom {i} has non-positive panel radius"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.atoms.iter().map(|a| a.x).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.w).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn max_rho(&self) -> f64 {
        self.atoms.iter().map(|a| a.rho).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        geom::diameter(&self.positions())
    }

    /// Largest |x_j| + rho_j.
    pub fn radius_about_origin(&self) -> f64 {
        self.atoms.iter().map(|a| geom::norm(&a.x) + a.rho).fold(0.0, f64::max)
    }

    /// Largest nearest-neighbour distance between atoms.
    pub fn max_spacing(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        geom::nearest_neighbor_distances(&self.positions()).into_iter().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> DiscreteMeasure {
        let mut m = self.clone();
        for a in &mut m.atoms {
            a.w *= c;
        }
        m
    }

    pub fn translated(&self, d: Point) -> DiscreteMeasure {
        let mut m = self.clone();
        for a in &mut m.atoms {
            a.x = geom::add_scaled(&a.x, 1.0, &d);
        }
        m
    }

    pub fn union(&self, other: &DiscreteMeasure) -> DiscreteMeasure {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        DiscreteMeasure { atoms, meta: format!("union({}, {})", self.meta, other.meta) }
    }

    /// True if every weight has the same sign (zeros allowed).
    pub fn single_signed(&self) -> bool {
        let pos = self.atoms.iter().any(|a| a.w > 0.0);
        let neg = self.atoms.iter().any(|a| a.w < 0.0);
        !(pos && neg)
    }
}

/// Uniform sphere of given radius and surface coupling, n quasi-uniform panels.
pub fn make_shell_measure(radius: f64, coupling: f64, n_panels: usize) -> Result<DiscreteMeasure> {
    if !radius.is_finite() || !coupling.is_finite() {
        return invalid("shell radius and coupling must be finite");
    }
    if radius <= 0.0 {
        return invalid("shell radius must be positive");
    }
    if n_panels == 0 {
        return invalid("n_panels must be at least 1");
    }
    if n_panels > DEFAULT_ATOM_BUDGET {
        return invalid("n_panels exceeds the atom budget");
    }
    let area = 4.0 * PI * radius * radius / n_panels as f64;
    let rho = (area / PI).sqrt();
    let w = coupling * area;
    let atoms = geom::fibonacci_sphere(n_panels)
        .into_iter()
        .map(|p| Atom { x: [radius * p[0], radius * p[1], radius * p[2]], w, rho })
        .collect();
    DiscreteMeasure::new(atoms, format!("shell a={radius} g={coupling} n={n_panels}"))
}

/// Self-similar corner Cantor dust in [0,1]^3 with contraction s.
pub fn make_cantor_measure(contraction: f64, depth: usize, total_mass: f64) -> Result<DiscreteMeasure> {
    make_cantor_measure_with_budget(contraction, depth, total_mass, DEFAULT_ATOM_BUDGET)
}

pub fn make_cantor_measure_with_budget(
    s: f64,
    depth: usize,
    total_mass: f64,
    budget: usize,
) -> Result<DiscreteMeasure> {
    if !(s > 0.0 && s <= 0.5) {
        return invalid("contraction must lie in (0, 1/2]");
    }
    if depth == 0 {
        return invalid("depth must be at least 1");
    }
    if !total_mass.is_finite() {
        return invalid("total mass must be finite");
    }
    let count = 8f64.powi(depth as i32);
    if count > budget as f64 {
        return invalid(format!("8^{depth} atoms exceeds the atom budget {budget}"));
    }
    // lower corners of the cells, refined depth times
    let mut corners: Vec<Point> = vec![[0.0; 3]];
    let mut side = 1.0;
    for _ in 0..depth {
        let child = side * s;
        let off = side - child;
        let mut next = Vec::with_capacity(corners.len() * 8);
        for c in &corners {
            for k in 0..8 {
                next.push([
                    c[0] + if k & 1 != 0 { off } else { 0.0 },
                    c[1] + if k & 2 != 0 { off } else { 0.0 },
                    c[2] + if k & 4 != 0 { off } else { 0.0 },
                ]);
            }
        }
        corners = next;
        side = child;
    }
    let w = total_mass / corners.len() as f64;
    let rho = side / 2.0;
    let atoms = corners
        .into_iter()
        .map(|c| Atom { x: [c[0] + rho, c[1] + rho, c[2] + rho], w, rho })
        .collect();
    DiscreteMeasure::new(atoms, format!("cantor s={s} depth={depth} m={total_mass}"))
}

/// Similarity dimension 3 log 2 / log(1/s) of the corner Cantor dust.
pub fn cantor_dimension(s: f64) -> f64 {
    3.0 * 2f64.ln() / (1.0 / s).ln()
}

/// Uniform solid ball sampled on a cubic lattice with `per_axis` points across the diameter.
pub fn make_ball_measure(radius: f64, total_mass: f64, per_axis: usize) -> Result<DiscreteMeasure> {
    if !(radius > 0.0) || per_axis < 2 {
        return invalid("ball needs positive radius and at least 2 points per axis");
    }
    let h = 2.0 * radius / per_axis as f64;
    let mut pts = vec![];
    for i in 0..per_axis {
        for j in 0..per_axis {
            for k in 0..per_axis {
                let p = [
                    -radius + (i as f64 + 0.5) * h,
                    -radius + (j as f64 + 0.5) * h,
                    -radius + (k as f64 + 0.5) * h,
                ];
                if geom::norm(&p) <= radius {
                    pts.push(p);
                }
            }
        }
    }
    let w = total_mass / pts.len() as f64;
    // radius of the ball with the cell's volume
    let rho = h * (3.0 / (4.0 * PI)).cbrt();
    let atoms = pts.into_iter().map(|x| Atom { x, w, rho }).collect();
    DiscreteMeasure::new(atoms, format!("ball r={radius} m={total_mass} per_axis={per_axis}"))
}

pub fn total_variation(mu: &DiscreteMeasure) -> f64 {
    mu.atoms.iter().map(|a| a.w.abs()).sum()
}

/// Regularized Newton kernel: 1/r outside the panel, the disc average 2/rho inside.
#[inline]
pub fn k_reg(r: f64, rho: f64) -> f64 {
    if r >= rho {
        1.0 / r
    } else {
        2.0 / rho
    }
}

/// How the supremum over y is sampled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Probe every atom position.
    pub include_atoms: bool,
    /// Jittered probes per atom, isotropic with scale `jitter_scale * rho_j`.
    pub jitter_per_atom: usize,
    pub jitter_scale: f64,
    /// Jitter at most this many atoms (chosen with the seed).
    pub max_jitter_atoms: usize,
    /// Points per axis of a box grid covering the support plus one diameter of margin.
    pub box_grid: usize,
    /// Starting points for the local pattern search.
    pub refine_starts: usize,
    pub extra_points: Vec<Point>,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            include_atoms: true,
            jitter_per_atom: 2,
            jitter_scale: 1.0,
            max_jitter_atoms: 4000,
            box_grid: 9,
            refine_starts: 4,
            extra_points: vec![],
            seed: 0,
        }
    }
}

impl ProbeSpec {
    pub fn with_seed(seed: u64) -> Self {
        ProbeSpec { seed, ..Default::default() }
    }

    pub fn points(&self, mu: &DiscreteMeasure) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut pts = vec![];
        if self.include_atoms {
            pts.extend(mu.atoms.iter().map(|a| a.x));
        }
        if self.jitter_per_atom > 0 {
            let n = mu.len();
            let stride = n.div_ceil(self.max_jitter_atoms.max(1));
            for a in mu.atoms.iter().step_by(stride.max(1)) {
                for _ in 0..self.jitter_per_atom {
                    let d = random_unit(&mut rng);
                    let r = self.jitter_scale * a.rho * rng.random::<f64>().cbrt();
                    pts.push(geom::add_scaled(&a.x, r, &d));
                }
            }
        }
        if self.box_grid > 0 {
            let pos = mu.positions();
            let diam = geom::diameter(&pos).max(mu.max_rho());
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in &pos {
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a] - diam);
                    hi[a] = hi[a].max(p[a] + diam);
                }
            }
            let g = self.box_grid;
            for i in 0..g {
                for j in 0..g {
                    for k in 0..g {
                        let t = |a: usize, v: usize| {
                            if g == 1 {
                                0.5 * (lo[a] + hi[a])
                            } else {
                                lo[a] + (hi[a] - lo[a]) * v as f64 / (g - 1) as f64
                            }
                        };
                        pts.push([t(0, i), t(1, j), t(2, k)]);
                    }
                }
            }
        }
        pts.extend_from_slice(&self.extra_points);
        pts
    }
}

pub(crate) fn random_unit(rng: &mut impl Rng) -> Point {
    loop {
        let p = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
        let n = geom::norm(&p);
        if n > 1e-3 && n <= 1.0 {
            return [p[0] / n, p[1] / n, p[2] / n];
        }
    }
}

/// sum_j |w_j| k_reg(|x_j - y|, rho_j) over atoms with |x_j - y| < cutoff.
pub fn kato_potential(mu: &DiscreteMeasure, y: &Point, cutoff: f64) -> f64 {
    mu.atoms
        .iter()
        .map(|a| {
            let r = geom::dist(&a.x, y);
            if r < cutoff {
                a.w.abs() * k_reg(r, a.rho)
            } else {
                0.0
            }
        })
        .sum()
}

struct PotentialEval<'a> {
    mu: &'a DiscreteMeasure,
    cutoff: f64,
    grid: Option<CellGrid<'a>>,
}

impl<'a> PotentialEval<'a> {
    fn new(mu: &'a DiscreteMeasure, pos: &'a [Point], cutoff: f64) -> Self {
        let diam = geom::diameter(pos);
        let grid = if cutoff.is_finite() && cutoff < 0.25 * diam && mu.len() > 200 {
            Some(CellGrid::new(pos, (diam / cutoff).clamp(1.0, 200.0)))
        } else {
            None
        };
        PotentialEval { mu, cutoff, grid }
    }

    fn eval(&self, y: &Point) -> f64 {
        match &self.grid {
            None => kato_potential(self.mu, y, self.cutoff),
            Some(g) => {
                let mut s = 0.0;
                g.for_each_within(y, self.cutoff, |j| {
                    let a = &self.mu.atoms[j];
                    let r = geom::dist(&a.x, y);
                    if r < self.cutoff {
                        s += a.w.abs() * k_reg(r, a.rho);
                    }
                });
                s
            }
        }
    }
}

/// Probe points plus the local maximizers of the untruncated potential.
fn candidate_points(mu: &DiscreteMeasure, probes: &ProbeSpec) -> Result<Vec<Point>> {
    let mut pts = probes.points(mu);
    if pts.is_empty() {
        return invalid("empty probe grid");
    }
    let pos = mu.positions();
    let ev = PotentialEval::new(mu, &pos, f64::INFINITY);
    let mut vals: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| (ev.eval(p), i)).collect();
    vals.sort_by(|a, b| b.0.total_cmp(&a.0));
    let step = mu.atoms.iter().map(|a| a.rho).sum::<f64>() / mu.len() as f64;
    let refined: Vec<Point> = vals
        .iter()
        .take(probes.refine_starts)
        .map(|&(_, i)| geom::pattern_max(&|y: &Point| ev.eval(y), pts[i], step).0)
        .collect();
    pts.extend(refined);
    Ok(pts)
}

fn sup_over(mu: &DiscreteMeasure, pts: &[Point], cutoff: f64) -> (f64, Point) {
    let pos = mu.positions();
    let ev = PotentialEval::new(mu, &pos, cutoff);
    pts.iter().map(|p| (ev.eval(p), *p)).fold((f64::NEG_INFINITY, pts[0]), |b, c| if c.0 > b.0 { c } else { b })
}

/// sup_y sum_j |w_j| k_reg(|x_j - y|, rho_j), sampled and locally refined.
pub fn kato_norm(mu: &DiscreteMeasure, probes: &ProbeSpec) -> Result<f64> {
    Ok(kato_norm_with_argmax(mu, probes)?.0)
}

/// Like [`kato_norm`] but returns the maximizing point too.
pub fn kato_norm_with_argmax(mu: &DiscreteMeasure, probes: &ProbeSpec) -> Result<(f64, Point)> {
    Ok(sup_over(mu, &candidate_points(mu, probes)?, f64::INFINITY))
}

/// Kato supremum restricted to atoms closer than r.
/// The candidate points do not depend on r, so the result is nondecreasing in r.
pub fn local_kato_modulus(mu: &DiscreteMeasure, r: f64, probes: &ProbeSpec) -> Result<f64> {
    if !(r > 0.0) {
        return invalid("local Kato radius must be positive");
    }
    Ok(sup_over(mu, &candidate_points(mu, probes)?, r).0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionProfile {
    pub radii: Vec<f64>,
    pub max_ball_mass: Vec<f64>,
    pub alpha_est: f64,
    pub c_est: f64,
}

impl DimensionProfile {
    /// Smallest C with max_ball_mass[i] <= C r_i^alpha at every sampled radius.
    pub fn c_sup(&self, alpha: f64) -> f64 {
        self.radii
            .iter()
            .zip(&self.max_ball_mass)
            .map(|(r, m)| m / r.powf(alpha))
            .fold(0.0, f64::max)
    }
}

/// Largest |mu|(B(x, r)) over probe centers, with a log-log fit of the growth.
pub fn dimension_profile(mu: &DiscreteMeasure, radii: &[f64], seed: u64) -> Result<DimensionProfile> {
    if radii.len() < 3 {
        return invalid("dimension profile needs at least 3 radii");
    }
    let mut rs = radii.to_vec();
    rs.sort_by(f64::total_cmp);
    if rs[0] <= 0.0 {
        return invalid("radii must be positive");
    }
    if rs[rs.len() - 1] / rs[0] < 10f64.powf(1.5) * (1.0 - 1e-9) {
        return Err(Error::Precondition("radii must span at least 1.5 decades".into()));
    }
    if rs[0] < 2.0 * mu.max_rho() * (1.0 - 1e-12) {
        return Err(Error::Precondition("smallest radius must be at least twice the largest panel radius".into()));
    }
    let spec = ProbeSpec { box_grid: 0, refine_starts: 0, jitter_per_atom: 1, seed, ..Default::default() };
    let centers = spec.points(mu);
    let pos = mu.positions();
    let rmax = rs[rs.len() - 1];
    let mut best = vec![0.0f64; rs.len()];
    let mut acc = vec![0.0f64; rs.len()];
    for c in &centers {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for a in &mu.atoms {
            let d = geom::dist(&a.x, c);
            if d < rmax {
                // first radius strictly larger than d
                let k = rs.partition_point(|&r| r <= d);
                if k < rs.len() {
                    acc[k] += a.w.abs();
                }
            }
        }
        let mut run = 0.0;
        for (i, v) in acc.iter().enumerate() {
            run += v;
            best[i] = best[i].max(run);
        }
    }
    let _ = pos;
    let lr: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let lm: Vec<f64> = best.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).collect();
    let (alpha, lc) = crate::num::linear_fit(&lr, &lm);
    Ok(DimensionProfile { radii: rs, max_ball_mass: best, alpha_est: alpha, c_est: lc.exp() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicCheck {
    pub kato_measured: f64,
    pub majorant: f64,
    pub alpha: f64,
    pub c_used: f64,
    pub m_prime: i32,
    pub pass: bool,
}

/// sum_{k <= k_max} 2^{-k} min(C 2^{alpha k}, C 2^{alpha M'}); k_max = None sums to infinity.
pub fn dyadic_majorant(alpha: f64, c: f64, m_prime: i32, k_max: Option<i32>) -> f64 {
    let q = 2f64.powf(1.0 - alpha);
    let mp = m_prime as f64;
    match k_max {
        None => c * 2f64.powf((alpha - 1.0) * mp) * (1.0 / (1.0 - q) + 1.0),
        Some(k) if k <= m_prime => c * 2f64.powf((alpha - 1.0) * k as f64) / (1.0 - q),
        Some(k) => {
            let head = c * 2f64.powf((alpha - 1.0) * mp) / (1.0 - q);
            let tail = c * 2f64.powf(alpha * mp) * (2f64.powf(-mp) - 2f64.powf(-(k as f64)));
            head + tail
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) {
        return Err(Error::Precondition(format!(
            "dimension hypothesis violated: alpha = {alpha} <= 1 makes the dyadic majorant diverge"
        )));
    }
    Ok(())
}

/// Compares the measured Kato norm with the dyadic majorant built from the profile.
pub fn dimension_kato_bound_check(
    mu: &DiscreteMeasure,
    profile: &DimensionProfile,
    m: i32,
    probes: &ProbeSpec,
) -> Result<DyadicCheck> {
    let alpha = profile.alpha_est;
    check_alpha(alpha)?;
    let extent = mu.atoms.iter().map(|a| geom::norm(&a.x)).fold(0.0, f64::max);
    if extent > 2f64.powi(m) * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("support is not inside B(0, 2^{m})")));
    }
    let c = profile.c_sup(alpha).max(profile.c_est);
    let m_prime = m + 2;
    let majorant = dyadic_majorant(alpha, c, m_prime, None);
    let kato = kato_norm(mu, probes)?;
    Ok(DyadicCheck { kato_measured: kato, majorant, alpha, c_used: c, m_prime, pass: kato <= majorant })
}

/// Dyadic majorant truncated at the scale 2^ceil(log2 r), for the local modulus.
pub fn local_dyadic_majorant(profile: &DimensionProfile, m: i32, r: f64) -> Result<f64> {
    let alpha = profile.alpha_est;
    check_alpha(alpha)?;
    let c = profile.c_sup(alpha).max(profile.c_est);
    Ok(dyadic_majorant(alpha, c, m + 2, Some(r.log2().ceil() as i32)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragedField {
    pub values: Vec<f64>,
    pub sup_abs: f64,
    pub bound: f64,
}

/// V^r(x) = r^{-3} sum_{|x_j - x| < r} w_j at the given points, with the r^{-2} Kato bound checked.
pub fn averaged_measure(mu: &DiscreteMeasure, r: f64, eval_points: &[Point], probes: &ProbeSpec) -> Result<AveragedField> {
    if !(r > 0.0) {
        return invalid("averaging radius must be positive");
    }
    if r <= 2.0 * mu.max_rho() {
        return Err(Error::Precondition("averaging radius must exceed twice the largest panel radius".into()));
    }
    let values: Vec<f64> = eval_points
        .iter()
        .map(|x| {
            mu.atoms.iter().filter(|a| geom::dist(&a.x, x) < r).map(|a| a.w).sum::<f64>() / (r * r * r)
        })
        .collect();
    let sup_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut spec = probes.clone();
    spec.extra_points.extend_from_slice(eval_points);
    let kato = kato_norm(mu, &spec)?;
    let bound = kato / (r * r);
    if sup_abs > bound * (1.0 + 1e-6) {
        return Err(Error::Precondition(format!("averaged field {sup_abs} exceeds r^-2 Kato bound {bound}")));
    }
    Ok(AveragedField { values, sup_abs, bound })
}

/// Unnormalized Gaussian exp(-|x - c|^2 / (2 s^2)) used as a form-bound test function.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianTest {
    pub center: Point,
    pub width: f64,
}

impl GaussianTest {
    pub fn value(&self, x: &Point) -> f64 {
        let d = geom::dist(x, &self.center);
        (-d * d / (2.0 * self.width * self.width)).exp()
    }
    pub fn l2_sq(&self) -> f64 {
        (PI * self.width * self.width).powf(1.5)
    }
    pub fn h1_sq(&self) -> f64 {
        1.5 / (self.width * self.width) * self.l2_sq()
    }
    /// sum_j w_j |phi(x_j)|^2
    pub fn potential_form(&self, mu: &DiscreteMeasure) -> f64 {
        mu.atoms.iter().map(|a| a.w * self.value(&a.x).powi(2)).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormBound {
    pub a_est: f64,
    pub b_est: f64,
    pub kato: f64,
    pub samples: usize,
}

/// Test functions with widths from r/4 to 4 diam, centered on atoms, the centroid and far away.
pub fn default_form_family(mu: &DiscreteMeasure, r: f64, seed: u64) -> Vec<GaussianTest> {
    let diam = mu.diameter().max(mu.max_rho());
    let widths = crate::num::geomspace(r / 4.0, 4.0 * diam, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mu.len();
    let mut centers: Vec<Point> = (0..8.min(n)).map(|_| mu.atoms[rng.random_range(0..n)].x).collect();
    let cen = mu.atoms.iter().fold([0.0; 3], |c, a| geom::add_scaled(&c, 1.0 / n as f64, &a.x));
    centers.push(cen);
    centers.push(geom::add_scaled(&cen, 10.0 * diam, &[1.0, 0.0, 0.0]));
    let mut fam = vec![];
    for c in &centers {
        for &w in &widths {
            fam.push(GaussianTest { center: *c, width: w });
        }
    }
    fam
}

/// Smallest a with |int |phi|^2 dV| <= a ||phi||_{H1}^2 + b ||phi||^2 on the family, b = r^{-2} kato.
pub fn form_bound_probe(mu: &DiscreteMeasure, family: &[GaussianTest], r: f64, probes: &ProbeSpec) -> Result<FormBound> {
    if family.is_empty() {
        return invalid("empty test family");
    }
    if !(r > 0.0) {
        return invalid("r must be positive");
    }
    let kato = kato_norm(mu, probes)?;
    let b = kato / (r * r);
    let a = family
        .iter()
        .map(|phi| (phi.potential_form(mu).abs() - b * phi.l2_sq()).max(0.0) / phi.h1_sq())
        .fold(0.0, f64::max);
    Ok(FormBound { a_est: a, b_est: b, kato, samples: family.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_panel_shell() {
        let m = make_shell_measure(1.0, 1.0, 1).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.atoms[0].w - 4.0 * PI).abs() < 1e-12);
        assert!((m.atoms[0].rho - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shell_total_variation() {
        let m = make_shell_measure(1.0, 1.0, 400).unwrap();
        assert!((total_variation(&m) - 4.0 * PI).abs() < 1e-12 * 4.0 * PI);
        let m = make_shell_measure(1.0, -2.0, 1000).unwrap();
        assert!((m.total_weight() + 8.0 * PI).abs() < 1e-12 * 8.0 * PI);
    }

    #[test]
    fn shell_rejects_bad_input() {
        assert!(make_shell_measure(1.0, 1.0, 0).is_err());
        assert!(make_shell_measure(f64::NAN, 1.0, 5).is_err());
        assert!(make_shell_measure(-1.0, 1.0, 5).is_err());
    }

    #[test]
    fn cantor_counts_and_dimension() {
        let m = make_cantor_measure(0.5, 2, 1.0).unwrap();
        assert_eq!(m.len(), 64);
        assert!((cantor_dimension(0.5) - 3.0).abs() < 1e-12);
        assert!((cantor_dimension(0.25) - 1.5).abs() < 1e-12);
        assert!((total_variation(&make_cantor_measure(0.3, 3, 1.0).unwrap()) - 1.0).abs() < 1e-12);
        assert!(make_cantor_measure(0.6, 2, 1.0).is_err());
        assert!(make_cantor_measure_with_budget(0.3, 5, 1.0, 1000).is_err());
    }

    #[test]
    fn two_atoms_tv() {
        let m = DiscreteMeasure::new(
            vec![Atom { x: [0.0; 3], w: 1.0, rho: 0.1 }, Atom { x: [1.0, 0.0, 0.0], w: -1.0, rho: 0.1 }],
            "",
        )
        .unwrap();
        assert_eq!(total_variation(&m), 2.0);
    }

    #[test]
    fn single_atom_kato() {
        let m = DiscreteMeasure::new(vec![Atom { x: [0.0; 3], w: 1.0, rho: 0.1 }], "").unwrap();
        let k = kato_norm(&m, &ProbeSpec::default()).unwrap();
        assert!((k - 20.0).abs() < 1e-12);
    }

    #[test]
    fn negative_shell_kato() {
        let m = make_shell_measure(1.0, -2.0, 1000).unwrap().scaled(1.0 / (4.0 * PI));
        let k = kato_norm(&m, &ProbeSpec::default()).unwrap();
        // |V| is twice the unit-mass shell; discrete sup overshoots by O(n^-1/2)
        assert!((k / 2.0 - 1.0).abs() < 0.04, "{k}");
    }

    #[test]
    fn ball_kato_at_center() {
        let m = make_ball_measure(1.0, 1.0, 30).unwrap();
        let k = kato_norm(&m, &ProbeSpec { jitter_per_atom: 0, ..Default::default() }).unwrap();
        assert!((k - 1.5).abs() < 0.02 * 1.5, "{k}");
    }

    #[test]
    fn local_modulus_limits() {
        let m = make_shell_measure(1.0, 1.0 / (4.0 * PI), 300).unwrap();
        let spec = ProbeSpec::default();
        let full = kato_norm(&m, &spec).unwrap();
        let big = local_kato_modulus(&m, 10.0, &spec).unwrap();
        assert!((full - big).abs() < 1e-12);
        let mut prev = 0.0;
        for r in [0.2, 0.4, 0.8, 1.6, 3.2] {
            let v = local_kato_modulus(&m, r, &spec).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        assert!(local_kato_modulus(&m, 0.0, &spec).is_err());
    }

    #[test]
    fn local_modulus_small_radius() {
        // planar density 1/(4 pi) gives 2 pi sigma r = r/2
        let m = make_shell_measure(1.0, 1.0 / (4.0 * PI), 40000).unwrap();
        let spec = ProbeSpec { jitter_per_atom: 1, max_jitter_atoms: 2000, box_grid: 0, ..Default::default() };
        let v = local_kato_modulus(&m, 0.1, &spec).unwrap();
        assert!((v - 0.05).abs() < 0.1 * 0.05, "{v}");
    }

    #[test]
    fn profile_of_single_atom_is_flat() {
        let m = DiscreteMeasure::new(vec![Atom { x: [0.0; 3], w: 1.0, rho: 0.01 }], "").unwrap();
        let p = dimension_profile(&m, &crate::num::geomspace(0.02, 2.0, 8), 1).unwrap();
        assert!(p.alpha_est.abs() < 1e-12);
        assert!(dimension_profile(&m, &[0.1, 0.2], 1).is_err());
    }

    #[test]
    fn shell_profile() {
        let m = make_shell_measure(1.0, 1.0 / (4.0 * PI), 4000).unwrap();
        let radii = crate::num::geomspace(2.0 * m.max_rho(), 2.0 * m.max_rho() * 10f64.powf(1.5), 10);
        let p = dimension_profile(&m, &radii, 3).unwrap();
        assert!((p.alpha_est - 2.0).abs() < 0.1, "{}", p.alpha_est);
        assert!((p.c_est - 0.25).abs() < 0.05, "{}", p.c_est);
        for w in p.max_ball_mass.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn cantor_quarter_profile() {
        let m = make_cantor_measure(0.25, 4, 1.0).unwrap();
        let r0 = 2.0 * m.max_rho();
        let p = dimension_profile(&m, &crate::num::geomspace(r0, r0 * 10f64.powf(1.5), 12), 5).unwrap();
        assert!((p.alpha_est - 1.5).abs() < 0.15, "{}", p.alpha_est);
    }

    #[test]
    fn dyadic_checks() {
        let m = make_shell_measure(1.0, 1.0 / (4.0 * PI), 2000).unwrap();
        let r0 = 2.0 * m.max_rho();
        let p = dimension_profile(&m, &crate::num::geomspace(r0, r0 * 40.0, 10), 2).unwrap();
        let c = dimension_kato_bound_check(&m, &p, 0, &ProbeSpec::default()).unwrap();
        assert!(c.pass, "{c:?}");
        let flat = DimensionProfile { alpha_est: 1.0, ..p };
        let e = dimension_kato_bound_check(&m, &flat, 0, &ProbeSpec::default()).unwrap_err();
        assert!(e.to_string().contains("dimension hypothesis violated"));
    }

    #[test]
    fn dyadic_majorant_closed_form() {
        // alpha=2, C=1/4, M'=2: C 2^{M'} (2 + 1) = 3
        assert!((dyadic_majorant(2.0, 0.25, 2, None) - 3.0).abs() < 1e-12);
        let brute: f64 = (-200..=200).map(|k| 2f64.powi(-k) * (0.25 * 2f64.powi(2 * k)).min(0.25 * 16.0)).sum();
        assert!((brute - 3.0).abs() < 1e-9);
        let trunc: f64 = (-200..=5).map(|k| 2f64.powi(-k) * (0.25 * 2f64.powi(2 * k)).min(0.25 * 16.0)).sum();
        assert!((dyadic_majorant(2.0, 0.25, 2, Some(5)) - trunc).abs() < 1e-12);
    }

    #[test]
    fn averaged_shell() {
        let m = make_shell_measure(1.0, 1.0 / (4.0 * PI), 4000).unwrap();
        let x = [[0.0, 0.0, 1.0], [0.0, 0.0, 5.0]];
        let f = averaged_measure(&m, 0.1, &x, &ProbeSpec::default()).unwrap();
        assert!((f.values[0] - 2.5).abs() < 0.15 * 2.5, "{}", f.values[0]);
        assert_eq!(f.values[1], 0.0);
        assert!(f.sup_abs <= f.bound);
    }

    #[test]
    fn form_bound_at_small_r() {
        let m = make_shell_measure(1.0, 1.0 / (4.0 * PI), 1000).unwrap();
        let fam = default_form_family(&m, 0.05, 1);
        let std = GaussianTest { center: [0.0; 3], width: 1.0 };
        assert!(std.potential_form(&m) > 0.0 && std.h1_sq() > 0.0 && std.l2_sq() > 0.0);
        let far = GaussianTest { center: [20.0, 0.0, 0.0], width: 0.5 };
        assert!(far.potential_form(&m).abs() < 1e-100);
        let b = form_bound_probe(&m, &fam, 0.05, &ProbeSpec::default()).unwrap();
        assert!(b.a_est < 1.0);
        let mut prev = f64::INFINITY;
        for r in [0.8, 0.4, 0.2, 0.1, 0.05] {
            let fb = form_bound_probe(&m, &fam, r, &ProbeSpec::default()).unwrap();
            assert!(fb.a_est <= prev + 1e-15);
            prev = fb.a_est;
        }
    }
}

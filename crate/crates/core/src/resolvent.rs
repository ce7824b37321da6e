//! Free resolvent kernel and the Birman-Schwinger matrix on a discrete measure.

use crate::error::{invalid, Error, Result};
use crate::geom::{self, Point};
use crate::measure::{total_variation, DiscreteMeasure};
use crate::num::exprel;
use ndarray::Array2;
use num_complex::{Complex32, Complex64 as C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

const FOUR_PI: f64 = 4.0 * PI;

/// Regularized 1/r lattice sum of a square panel tiling, divided by 2 sqrt(pi).
/// Shrinking the disc radius by this factor removes the O(n^-1/2) bias of the flat-disc self-term
/// on quasi-uniform surface tilings.
pub const LATTICE_FACTOR: f64 = 1.100_25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SpectralParameter {
    /// lambda real, limiting value R_0^+ from the upper half plane.
    RealPlusI0(f64),
    /// lambda = i kappa with kappa > 0.
    Imaginary(f64),
}

impl SpectralParameter {
    pub fn real(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return invalid("spectral parameter must be finite");
        }
        Ok(SpectralParameter::RealPlusI0(lambda))
    }

    pub fn imaginary(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return invalid("kappa must be finite and positive");
        }
        Ok(SpectralParameter::Imaginary(kappa))
    }

    /// The complex wavenumber k with R_0 kernel e^{ikr}/(4 pi r).
    pub fn wavenumber(&self) -> C64 {
        match *self {
            SpectralParameter::RealPlusI0(l) => C64::new(l, 0.0),
            SpectralParameter::Imaginary(k) => C64::new(0.0, k),
        }
    }

    /// lambda for real parameters, kappa for imaginary ones.
    pub fn magnitude(&self) -> f64 {
        match *self {
            SpectralParameter::RealPlusI0(l) => l,
            SpectralParameter::Imaginary(k) => k,
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, SpectralParameter::RealPlusI0(_))
    }
}

impl fmt::Display for SpectralParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralParameter::RealPlusI0(l) => write!(f, "lambda={l}+i0"),
            SpectralParameter::Imaginary(k) => write!(f, "lambda=i*{k}"),
        }
    }
}

/// Self-interaction formula for the matrix diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiagRule {
    /// Average of the kernel over a flat disc of radius rho.
    #[default]
    DiscAverage,
    /// Same average over radius rho / LATTICE_FACTOR.
    LatticeCorrected,
}

impl DiagRule {
    pub fn effective_radius(&self, rho: f64) -> f64 {
        match self {
            DiagRule::DiscAverage => rho,
            DiagRule::LatticeCorrected => rho / LATTICE_FACTOR,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiagRule::DiscAverage => "disc_average",
            DiagRule::LatticeCorrected => "lattice_corrected",
        }
    }
}

impl std::str::FromStr for DiagRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc_average" | "disc" => Ok(DiagRule::DiscAverage),
            "lattice_corrected" | "lattice" => Ok(DiagRule::LatticeCorrected),
            _ => invalid(format!("unknown diag rule '{s}'")),
        }
    }
}

#[inline]
fn kernel_r(k: C64, r: f64) -> C64 {
    (C64::i() * k * r).exp() / (FOUR_PI * r)
}

/// e^{i lambda |x-y|} / (4 pi |x-y|).
pub fn free_resolvent_kernel(param: SpectralParameter, x: &Point, y: &Point) -> Result<C64> {
    let r = geom::dist(x, y);
    if r == 0.0 {
        return Err(Error::Precondition("kernel evaluated at coincident points; use the panel self-term".into()));
    }
    Ok(kernel_r(param.wavenumber(), r))
}

/// Mean of the kernel over a flat disc of radius rho centred at the source:
/// (e^{i k rho} - 1) / (2 pi i k rho^2).
pub fn panel_self_term(param: SpectralParameter, rho: f64) -> C64 {
    let z = C64::i() * param.wavenumber() * rho;
    exprel(z) / (2.0 * PI * rho)
}

fn self_term_k(k: C64, rho: f64) -> C64 {
    exprel(C64::i() * k * rho) / (2.0 * PI * rho)
}

/// Matrix of V R_0^+(lambda^2) on atom mass coefficients: entry[j][k] = w_j k(x_j, x_k).
#[derive(Debug, Clone)]
pub struct BSMatrix {
    pub param: SpectralParameter,
    pub entries: Array2<C64>,
    pub diag_rule: DiagRule,
    pub weights: Vec<f64>,
}

impl BSMatrix {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// I + A
    pub fn identity_plus(&self) -> Array2<C64> {
        let mut m = self.entries.clone();
        for i in 0..self.n() {
            m[[i, i]] += 1.0;
        }
        m
    }

    /// Weighted max-column-sum norm (TV -> TV).
    pub fn tv_norm(&self) -> f64 {
        tv_norm(&self.entries)
    }

    /// D^{1/2} G D^{1/2} with D = |W|; its spectral norm is the L^2(|V|) norm of R_0 V.
    pub fn symmetrized(&self) -> Array2<C64> {
        let n = self.n();
        let s: Vec<f64> = self.weights.iter().map(|w| w.abs().sqrt()).collect();
        let mut out = Array2::zeros((n, n));
        for j in 0..n {
            let wj = self.weights[j];
            for k in 0..n {
                if wj != 0.0 {
                    out[[j, k]] = self.entries[[j, k]] / wj * s[j] * s[k];
                }
            }
        }
        out
    }

    /// Row-major CSV with interleaved real/imag parts and a commented header.
    pub fn to_csv(&self, measure_hash: u64) -> String {
        let mut s = format!(
            "# param={} diag_rule={} measure_hash={:016x} n={}\n",
            self.param,
            self.diag_rule.name(),
            measure_hash,
            self.n()
        );
        for row in self.entries.rows() {
            let cells: Vec<String> = row.iter().flat_map(|z| [format!("{:e}", z.re), format!("{:e}", z.im)]).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn tv_norm(m: &Array2<C64>) -> f64 {
    m.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// FNV-1a hash of the measure's JSON form.
pub fn measure_hash(mu: &DiscreteMeasure) -> u64 {
    let bytes = serde_json::to_vec(&mu.atoms).unwrap_or_default();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn check_coincident(mu: &DiscreteMeasure) -> Result<()> {
    let pos = mu.positions();
    if pos.len() < 2 {
        return Ok(());
    }
    let diam = geom::diameter(&pos);
    let nn = geom::nearest_neighbor_distances(&pos);
    if let Some(i) = nn.iter().position(|&d| d <= 1e-12 * diam) {
        return invalid(format!("atom {i} coincides with another atom"));
    }
    Ok(())
}

pub fn assemble_bs_matrix(mu: &DiscreteMeasure, param: SpectralParameter) -> Result<BSMatrix> {
    assemble_bs_matrix_with(mu, param, DiagRule::DiscAverage)
}

pub fn assemble_bs_matrix_with(mu: &DiscreteMeasure, param: SpectralParameter, rule: DiagRule) -> Result<BSMatrix> {
    mu.validate()?;
    check_coincident(mu)?;
    let n = mu.len();
    let k = param.wavenumber();
    let mut g = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let aj = &mu.atoms[j];
        g[[j, j]] = self_term_k(k, rule.effective_radius(aj.rho));
        for l in j + 1..n {
            let v = kernel_r(k, geom::dist(&aj.x, &mu.atoms[l].x));
            g[[j, l]] = v;
            g[[l, j]] = v;
        }
    }
    let weights = mu.weights();
    for (j, mut row) in g.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|z| z * weights[j]);
    }
    if let SpectralParameter::Imaginary(_) = param {
        g.mapv_inplace(|z| C64::new(z.re, 0.0));
    }
    Ok(BSMatrix { param, entries: g, diag_rule: rule, weights })
}

/// Real matrix of A(i kappa) (the imaginary-axis kernel is real).
pub fn assemble_real_imaginary_axis(mu: &DiscreteMeasure, kappa: f64, rule: DiagRule) -> Result<Array2<f64>> {
    let a = assemble_bs_matrix_with(mu, SpectralParameter::imaginary(kappa)?, rule)?;
    Ok(a.entries.mapv(|z| z.re))
}

/// (R_0 m)(x) = sum_j k(x, x_j) m_j; points closer than 1e-9 to an atom get that atom's self-term.
pub fn apply_resolvent_to_measure(
    param: SpectralParameter,
    mu: &DiscreteMeasure,
    eval_points: &[Point],
    coeffs: Option<&[C64]>,
) -> Result<Vec<C64>> {
    let m: Vec<C64> = match coeffs {
        Some(c) => {
            if c.len() != mu.len() {
                return invalid("coefficient vector length differs from atom count");
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return invalid("non-finite coefficients");
            }
            c.to_vec()
        }
        None => mu.atoms.iter().map(|a| C64::new(a.w, 0.0)).collect(),
    };
    let k = param.wavenumber();
    Ok(eval_points
        .iter()
        .map(|x| {
            mu.atoms
                .iter()
                .zip(&m)
                .map(|(a, mj)| {
                    let r = geom::dist(x, &a.x);
                    let kv = if r > 1e-9 { kernel_r(k, r) } else { self_term_k(k, a.rho) };
                    kv * mj
                })
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityDefect {
    /// TV norm of the off-diagonal part of A(l1) - A(l2).
    pub measured_offdiag: f64,
    /// Largest |diagonal difference| over atoms.
    pub measured_diag: f64,
    /// TV norm of the full difference.
    pub measured_total: f64,
    pub bound: f64,
}

/// Compares ||A(l1) - A(l2)||_TV with ||V||_meas |l1 - l2| / (4 pi).
pub fn continuity_defect(mu: &DiscreteMeasure, l1: f64, l2: f64, rule: DiagRule) -> Result<ContinuityDefect> {
    let n = mu.len();
    let (k1, k2) = (C64::new(l1, 0.0), C64::new(l2, 0.0));
    let mut off = vec![0.0; n];
    let mut total = vec![0.0; n];
    let mut diag_max: f64 = 0.0;
    for k in 0..n {
        let ak = &mu.atoms[k];
        for j in 0..n {
            let aj = &mu.atoms[j];
            if j == k {
                let rho = rule.effective_radius(aj.rho);
                let d = aj.w.abs() * (self_term_k(k1, rho) - self_term_k(k2, rho)).norm();
                total[k] += d;
                diag_max = diag_max.max(d);
            } else {
                let r = geom::dist(&aj.x, &ak.x);
                let d = aj.w.abs() * (kernel_r(k1, r) - kernel_r(k2, r)).norm();
                off[k] += d;
                total[k] += d;
            }
        }
    }
    let bound = total_variation(mu) * (l1 - l2).abs() / FOUR_PI;
    let measured_offdiag = off.into_iter().fold(0.0, f64::max);
    if measured_offdiag > bound * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::Precondition(format!(
            "continuity bound violated: {measured_offdiag} > {bound}"
        )));
    }
    Ok(ContinuityDefect {
        measured_offdiag,
        measured_diag: diag_max,
        measured_total: total.into_iter().fold(0.0, f64::max),
        bound,
    })
}

/// mu^(lambda omega) = sum_j w_j e^{-i lambda omega . x_j}.
pub fn fourier_on_sphere(mu: &DiscreteMeasure, lambda: f64, directions: &[Point]) -> Vec<C64> {
    directions
        .iter()
        .map(|om| {
            mu.atoms
                .iter()
                .map(|a| C64::from_polar(a.w, -lambda * geom::dot(om, &a.x)))
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingCheck {
    pub im_pairing: f64,
    pub sphere_integral: f64,
    pub ratio: Option<f64>,
    pub nodes: usize,
}

/// The constant relating Im<R_0 mu, mu> to lambda^{-1} int_{lambda S^2} |mu^|^2 under our conventions.
pub const PAIRING_CONSTANT: f64 = 1.0 / (16.0 * PI * PI);

/// Im sum m_j k(x_j,x_k) m_k against lambda^{-1} int_{lambda S^2} |mu^|^2 dS.
pub fn imaginary_pairing_check(mu: &DiscreteMeasure, lambda: f64, min_nodes: usize, rule: DiagRule) -> Result<PairingCheck> {
    if !(lambda > 0.0) {
        return invalid("lambda must be positive");
    }
    let param = SpectralParameter::real(lambda)?;
    let a = assemble_bs_matrix_with(mu, param, rule)?;
    let w = mu.weights();
    let n = mu.len();
    let mut im = 0.0;
    for j in 0..n {
        if w[j] == 0.0 {
            continue;
        }
        for k in 0..n {
            // entries carry w_j; the pairing needs m_j k_jk m_k with m = w
            im += (a.entries[[j, k]] * w[k]).im;
        }
    }
    let diam = mu.diameter();
    let nodes = min_nodes.max((8.0 * (lambda * diam).powi(2)).ceil() as usize).max(64);
    let dirs = geom::fibonacci_sphere(nodes);
    let f = fourier_on_sphere(mu, lambda, &dirs);
    let mean_sq = f.iter().map(|z| z.norm_sqr()).sum::<f64>() / nodes as f64;
    let sphere_integral = lambda * FOUR_PI * mean_sq;
    let ratio = if sphere_integral.abs() < 1e-14 { None } else { Some(im / sphere_integral) };
    Ok(PairingCheck { im_pairing: im, sphere_integral, ratio, nodes })
}

/// int over R-1 < |xi| < R+1 of e^{i xi . d}, as a function of |d|.
fn annulus_ft(r_mid: f64, d: f64) -> f64 {
    let (a, b) = ((r_mid - 1.0).max(0.0), r_mid + 1.0);
    if d * b < 1e-3 {
        // sinc(sd) ~ 1 - (sd)^2/6
        let m3 = (b.powi(3) - a.powi(3)) / 3.0;
        let m5 = (b.powi(5) - a.powi(5)) / 5.0;
        return FOUR_PI * (m3 - d * d * m5 / 6.0);
    }
    let prim = |s: f64| (s * d).sin() / (d * d) - s * (s * d).cos() / d;
    FOUR_PI / d * (prim(b) - prim(a))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionNorm {
    pub r_grid: Vec<f64>,
    pub norm_est: Vec<f64>,
    pub beta_fit: f64,
}

/// Norm of g -> g^v restricted to supp V, for g supported in the annulus R-1 < |xi| < R+1.
/// g^v uses the unitary transform (2 pi)^{-3/2} int g e^{i x xi}. The Gram matrix of the
/// operator is formed exactly and its top eigenvalue found by power iteration from
/// `mc_samples` seeded random starts.
pub fn extension_norm(mu: &DiscreteMeasure, r_grid: &[f64], mc_samples: usize, seed: u64) -> Result<ExtensionNorm> {
    if mc_samples < 8 {
        return invalid("extension_norm needs at least 8 samples");
    }
    if r_grid.iter().any(|&r| !(r > 1.0)) {
        return invalid("annulus radii must exceed 1");
    }
    let rmax = r_grid.iter().cloned().fold(0.0, f64::max);
    let rmin = r_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if rmax / rmin < 10.0 * (1.0 - 1e-12) {
        return Err(Error::Precondition("R grid must span at least one decade".into()));
    }
    let n = mu.len();
    let s: Vec<f64> = mu.atoms.iter().map(|a| a.w.abs().sqrt()).collect();
    let norm_c = (2.0 * PI).powi(-3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norms = vec![];
    for &r in r_grid {
        let mut m = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            for k in j..n {
                let d = geom::dist(&mu.atoms[j].x, &mu.atoms[k].x);
                let v = norm_c * s[j] * s[k] * annulus_ft(r, d);
                m[[j, k]] = v;
                m[[k, j]] = v;
            }
        }
        let mut best: f64 = 0.0;
        for _ in 0..mc_samples {
            let mut v: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng) - 0.5).collect();
            let mut est = 0.0;
            for _ in 0..500 {
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= nv);
                let mv = m.dot(&ndarray::ArrayView1::from(&v[..]));
                let new = v.iter().zip(mv.iter()).map(|(a, b)| a * b).sum::<f64>();
                v = mv.to_vec();
                if (new - est).abs() <= 1e-12 * new.abs() {
                    est = new;
                    break;
                }
                est = new;
            }
            best = best.max(est);
        }
        norms.push(best.max(0.0).sqrt());
    }
    let beta_fit = crate::num::loglog_slope(r_grid, &norms);
    Ok(ExtensionNorm { r_grid: r_grid.to_vec(), norm_est: norms, beta_fit })
}

/// The free Green's function G (no weights) stored as a packed upper triangle in single
/// precision, for matrix-free work at sizes where dense double storage is impractical.
pub struct PackedKernel {
    n: usize,
    data: Vec<Complex32>,
    weights: Vec<f64>,
}

impl PackedKernel {
    pub fn build(mu: &DiscreteMeasure, param: SpectralParameter, rule: DiagRule) -> Result<Self> {
        mu.validate()?;
        let n = mu.len();
        let k = param.wavenumber();
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            let aj = &mu.atoms[j];
            let z = self_term_k(k, rule.effective_radius(aj.rho));
            data.push(Complex32::new(z.re as f32, z.im as f32));
            for l in j + 1..n {
                let r = geom::dist(&aj.x, &mu.atoms[l].x);
                if r == 0.0 {
                    return invalid("coincident atoms");
                }
                let z = kernel_r(k, r);
                data.push(Complex32::new(z.re as f32, z.im as f32));
            }
        }
        Ok(PackedKernel { n, data, weights: mu.weights() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Y = G X for a block of vectors (column-major: vector v occupies x[v*n..(v+1)*n]).
    pub fn matvec_block(&self, x: &[C64], nv: usize) -> Vec<C64> {
        let n = self.n;
        assert_eq!(x.len(), n * nv);
        let xs: Vec<Complex32> = x.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect();
        // interleave as row-major [atom][vector] for locality
        let mut xi = vec![Complex32::new(0.0, 0.0); n * nv];
        for v in 0..nv {
            for j in 0..n {
                xi[j * nv + v] = xs[v * n + j];
            }
        }
        let mut y = vec![Complex32::new(0.0, 0.0); n * nv];
        let mut off = 0;
        for j in 0..n {
            let row = &self.data[off..off + (n - j)];
            off += n - j;
            let g0 = row[0];
            let (ylo, yhi) = y.split_at_mut((j + 1) * nv);
            let yj = &mut ylo[j * nv..];
            let xj = &xi[j * nv..(j + 1) * nv];
            for v in 0..nv {
                yj[v] += g0 * xj[v];
            }
            let mut acc = vec![Complex32::new(0.0, 0.0); nv];
            for (t, g) in row[1..].iter().enumerate() {
                let l = j + 1 + t;
                let xl = &xi[l * nv..(l + 1) * nv];
                let yl = &mut yhi[(l - j - 1) * nv..(l - j) * nv];
                for v in 0..nv {
                    acc[v] += g * xl[v];
                    yl[v] += g * xj[v];
                }
            }
            for v in 0..nv {
                yj[v] += acc[v];
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); n * nv];
        for v in 0..nv {
            for j in 0..n {
                let z = y[j * nv + v];
                out[v * n + j] = C64::new(z.re as f64, z.im as f64);
            }
        }
        out
    }

    /// S x with S = D^{1/2} G D^{1/2}.
    fn apply_s(&self, x: &[C64], s: &[f64]) -> Vec<C64> {
        let xs: Vec<C64> = x.iter().zip(s).map(|(z, sj)| z * sj).collect();
        let y = self.matvec_block(&xs, 1);
        y.iter().zip(s).map(|(z, sj)| z * sj).collect()
    }

    /// Spectral norm of D^{1/2} G D^{1/2}: Lanczos with full reorthogonalization on S^H S,
    /// using S^H y = conj(S conj(y)) since S is complex symmetric.
    pub fn l2v_norm(&self, max_iter: usize, tol: f64, seed: u64) -> f64 {
        use ndarray_linalg::{EigValsh, UPLO};
        let n = self.n;
        let s: Vec<f64> = self.weights.iter().map(|w| w.abs().sqrt()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q: Vec<C64> = (0..n)
            .map(|_| C64::new(rand::Rng::random::<f64>(&mut rng) - 0.5, rand::Rng::random::<f64>(&mut rng) - 0.5))
            .collect();
        let nq = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        q.iter_mut().for_each(|z| *z /= nq);
        let mut basis: Vec<Vec<C64>> = vec![];
        let mut alpha: Vec<f64> = vec![];
        let mut beta: Vec<f64> = vec![];
        let mut est = 0.0;
        for it in 0..max_iter.min(n) {
            let sq = self.apply_s(&q, &s);
            let conj_sq: Vec<C64> = sq.iter().map(|z| z.conj()).collect();
            let mut w: Vec<C64> = self.apply_s(&conj_sq, &s).iter().map(|z| z.conj()).collect();
            let a: f64 = q.iter().zip(&w).map(|(qi, wi)| (qi.conj() * wi).re).sum();
            basis.push(q.clone());
            alpha.push(a);
            for b in &basis {
                let c: C64 = b.iter().zip(&w).map(|(bi, wi)| bi.conj() * wi).sum();
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
            let bn = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let k = alpha.len();
            let mut t = Array2::<f64>::zeros((k, k));
            for i in 0..k {
                t[[i, i]] = alpha[i];
                if i + 1 < k {
                    t[[i, i + 1]] = beta[i];
                    t[[i + 1, i]] = beta[i];
                }
            }
            let top = t.eigvalsh(UPLO::Upper).map(|e| e[k - 1]).unwrap_or(a);
            let done = it > 2 && (top - est).abs() <= tol * top;
            est = top;
            if done || bn < 1e-14 * top.abs().max(1e-300) {
                break;
            }
            beta.push(bn);
            q = w.iter().map(|z| z / bn).collect();
        }
        est.max(0.0).sqrt()
    }

    /// Columns k of A^p (A = W G) for the given indices.
    pub fn power_columns(&self, cols: &[usize], p: usize) -> Vec<Vec<C64>> {
        let n = self.n;
        let nv = cols.len();
        let mut x = vec![C64::new(0.0, 0.0); n * nv];
        for (v, &c) in cols.iter().enumerate() {
            x[v * n + c] = C64::new(1.0, 0.0);
        }
        for _ in 0..p {
            let mut y = self.matvec_block(&x, nv);
            for v in 0..nv {
                for j in 0..n {
                    y[v * n + j] *= self.weights[j];
                }
            }
            x = y;
        }
        (0..nv).map(|v| x[v * n..(v + 1) * n].to_vec()).collect()
    }
}

//! Invertibility of I + A(lambda): bound states, threshold behaviour, embedded scans and
//! high-energy decay.

use crate::error::{invalid, Error, Result};
use crate::measure::{total_variation, DiscreteMeasure};
use crate::num::loglog_slope;
use crate::resolvent::{assemble_bs_matrix_with, tv_norm, BSMatrix, DiagRule, PackedKernel, SpectralParameter};
use ndarray::Array2;
use ndarray_linalg::{Cholesky, Eig, EigValsh, Inverse, SVD, UPLO};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoundStateList {
    /// Descending.
    pub kappas: Vec<f64>,
    pub energies: Vec<f64>,
    /// Partial-wave index per kappa, shells only.
    pub mode_labels: Option<Vec<usize>>,
    /// Partial waves sitting exactly at threshold (shell oracle only).
    pub threshold_resonances: Vec<usize>,
    /// Brackets that could not be closed inside the search range.
    pub unresolved: Vec<String>,
}

impl BoundStateList {
    pub(crate) fn push_sorted(&mut self, mut found: Vec<(f64, Option<usize>)>) {
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        self.kappas = found.iter().map(|f| f.0).collect();
        self.energies = self.kappas.iter().map(|k| -k * k).collect();
        if found.iter().all(|f| f.1.is_some()) && !found.is_empty() {
            self.mode_labels = Some(found.iter().map(|f| f.1.unwrap()).collect());
        }
    }

    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InverseNorm {
    pub min_singular: f64,
    /// Infinite when the inverse was not formed.
    pub inv_norm_tv: f64,
    pub op_norm_l2v: f64,
    pub singular: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpectralScan {
    pub params: Vec<SpectralParameter>,
    pub min_singular: Vec<f64>,
    pub inv_norm_tv: Vec<f64>,
    pub op_norm_l2v: Vec<f64>,
    pub singular: Vec<bool>,
    pub notes: Vec<String>,
}

impl SpectralScan {
    pub fn push(&mut self, p: SpectralParameter, r: InverseNorm) {
        self.params.push(p);
        self.min_singular.push(r.min_singular);
        self.inv_norm_tv.push(r.inv_norm_tv);
        self.op_norm_l2v.push(r.op_norm_l2v);
        self.singular.push(r.singular);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,lambda_or_kappa,min_singular,inv_norm_tv,op_norm_l2v\n");
        for i in 0..self.params.len() {
            let (kind, v) = match self.params[i] {
                SpectralParameter::RealPlusI0(l) => ("real", l),
                SpectralParameter::Imaginary(k) => ("imaginary", k),
            };
            s.push_str(&format!(
                "{kind},{v:e},{:e},{:e},{:e}\n",
                self.min_singular[i], self.inv_norm_tv[i], self.op_norm_l2v[i]
            ));
        }
        s
    }
}

fn singular_values(m: &Array2<C64>) -> Result<Vec<f64>> {
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.to_vec())
}

fn inverse_norm_of(a: &BSMatrix) -> Result<InverseNorm> {
    let ipa = a.identity_plus();
    let s = singular_values(&ipa)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let op = singular_values(&a.symmetrized())?.iter().cloned().fold(0.0, f64::max);
    let singular = smin < 1e-10 * smax;
    let inv_norm_tv = if singular {
        f64::INFINITY
    } else {
        match ipa.inv() {
            Ok(inv) => tv_norm(&inv),
            Err(_) => f64::INFINITY,
        }
    };
    Ok(InverseNorm { min_singular: smin, inv_norm_tv, op_norm_l2v: op, singular: singular || !inv_norm_tv.is_finite() })
}

/// Smallest singular value of I + A, TV norm of its inverse and the L^2(|V|) norm of A.
/// Numerical singularity is reported through `singular`, not as an error.
pub fn inverse_norm(mu: &DiscreteMeasure, param: SpectralParameter, rule: DiagRule) -> Result<InverseNorm> {
    inverse_norm_of(&assemble_bs_matrix_with(mu, param, rule)?)
}

pub fn scan(mu: &DiscreteMeasure, params: &[SpectralParameter], rule: DiagRule) -> Result<SpectralScan> {
    let mut out = SpectralScan::default();
    for &p in params {
        out.push(p, inverse_norm(mu, p, rule)?);
    }
    Ok(out)
}

/// Ascending real eigenvalues of A(i kappa).
/// Same-sign weights: s |W|^{1/2} G |W|^{1/2}. Mixed signs: L^T W L with G = L L^T,
/// falling back to the real parts of a general eigensolve if G is not positive definite.
pub fn axis_eigenvalues(mu: &DiscreteMeasure, kappa: f64, rule: DiagRule) -> Result<Vec<f64>> {
    let a = assemble_bs_matrix_with(mu, SpectralParameter::imaginary(kappa)?, rule)?;
    let w = &a.weights;
    let n = w.len();
    let mut ev: Vec<f64> = if mu.single_signed() {
        let sign = if w.iter().any(|&x| x < 0.0) { -1.0 } else { 1.0 };
        let s = a.symmetrized().mapv(|z| z.re * sign);
        s.eigvalsh(UPLO::Lower)?.to_vec()
    } else {
        let mut g = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            for k in 0..n {
                g[[j, k]] = a.entries[[j, k]].re / w[j];
            }
        }
        match g.cholesky(UPLO::Lower) {
            Ok(l) => {
                let mut wl = l.clone();
                for j in 0..n {
                    wl.row_mut(j).mapv_inplace(|x| x * w[j]);
                }
                let b = l.t().dot(&wl);
                let b = (&b + &b.t()) * 0.5;
                b.eigvalsh(UPLO::Lower)?.to_vec()
            }
            Err(_) => {
                let re = a.entries.mapv(|z| z.re);
                let (e, _) = re.eig()?;
                e.iter().map(|z| z.re).collect()
            }
        }
    };
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Illinois false position on a bracketed sign change.
fn illinois(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, rel_tol: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= rel_tol * c.abs() {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}

/// Bound states -kappa^2 from eigenvalues of A(i kappa) crossing -1. The m-th smallest
/// eigenvalue is continuous in kappa, so the count below -1 brackets each crossing.
pub fn find_bound_states(mu: &DiscreteMeasure, kappa_range: (f64, f64), grid: usize, rule: DiagRule) -> Result<BoundStateList> {
    let (k0, k1) = kappa_range;
    if !(k0 > 0.0) || !(k1 > k0) || !k1.is_finite() {
        return invalid("kappa range must satisfy 0 < k0 < k1 < inf");
    }
    if grid < 2 {
        return invalid("need at least 2 grid points");
    }
    let mut out = BoundStateList::default();
    if mu.weights().iter().all(|&w| w >= 0.0) {
        return Ok(out);
    }
    let ks = crate::num::geomspace(k0, k1, grid);
    let below = |ev: &[f64]| ev.iter().filter(|&&e| e < -1.0).count();
    let mut evs = Vec::with_capacity(grid);
    for &k in &ks {
        evs.push(axis_eigenvalues(mu, k, rule)?);
    }
    let mut found = vec![];
    for i in 0..grid - 1 {
        let (c0, c1) = (below(&evs[i]), below(&evs[i + 1]));
        for m in c1.min(c0)..c1.max(c0) {
            let kappa = illinois(|k| Ok(axis_eigenvalues(mu, k, rule)?[m] + 1.0), ks[i], ks[i + 1], 1e-9)?;
            found.push((kappa, None));
        }
    }
    let top = below(&evs[grid - 1]);
    if top > 0 {
        out.unresolved.push(format!("{top} eigenvalue(s) still below -1 at kappa = {k1}; bound states lie above the range"));
    }
    if evs[0].iter().any(|&e| (e + 1.0).abs() < 1e-3) {
        out.unresolved.push(format!("eigenvalue within 1e-3 of -1 at kappa = {k0}; possible threshold state"));
    }
    out.push_sorted(found);
    Ok(out)
}

/// Attach partial-wave labels by matching against shell oracle roots.
pub fn label_shell_modes(list: &mut BoundStateList, oracle: &BoundStateList, rel_tol: f64) {
    let Some(ol) = &oracle.mode_labels else { return };
    let mut labels = vec![];
    for k in &list.kappas {
        let best = oracle
            .kappas
            .iter()
            .zip(ol)
            .min_by(|a, b| (a.0 - k).abs().total_cmp(&(b.0 - k).abs()));
        match best {
            Some((ko, l)) if (ko - k).abs() <= rel_tol * ko => labels.push(*l),
            _ => return,
        }
    }
    list.mode_labels = Some(labels);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Resonant,
    Regular,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroEnergyReport {
    pub n_atoms: Vec<usize>,
    pub min_singular: Vec<f64>,
    /// Decrease factor of min_singular normalized to a 4x increase in atoms.
    pub decay_per_4x: Vec<f64>,
    pub verdict: Verdict,
    pub floor: f64,
}

/// Threshold classification from the refinement behaviour of the smallest singular value of I + A(0).
pub fn zero_energy_check(levels: &[DiscreteMeasure], rule: DiagRule) -> Result<ZeroEnergyReport> {
    if levels.len() < 2 {
        return invalid("need at least 2 refinement levels");
    }
    let m0 = levels[0].total_weight();
    for w in levels.windows(2) {
        if w[1].len() <= w[0].len() {
            return invalid("refinement levels must have increasing atom counts");
        }
        if (w[1].total_weight() - m0).abs() > 1e-9 * m0.abs().max(total_variation(&w[1])) {
            return invalid("refinement levels carry different total weight");
        }
    }
    let mut n_atoms = vec![];
    let mut sig = vec![];
    for m in levels {
        let r = inverse_norm(m, SpectralParameter::RealPlusI0(0.0), rule)?;
        n_atoms.push(m.len());
        sig.push(r.min_singular);
    }
    let decay: Vec<f64> = (0..sig.len() - 1)
        .map(|i| {
            let p = 4f64.ln() / (n_atoms[i + 1] as f64 / n_atoms[i] as f64).ln();
            (sig[i] / sig[i + 1].max(1e-300)).powf(p)
        })
        .collect();
    let floor = *sig.last().unwrap();
    let verdict = if decay.iter().all(|&d| d >= 2.0) {
        Verdict::Resonant
    } else if floor > 1e-3 && decay.last().map_or(false, |&d| d < 1.25) {
        Verdict::Regular
    } else {
        Verdict::Inconclusive
    };
    Ok(ZeroEnergyReport { n_atoms, min_singular: sig, decay_per_4x: decay, verdict, floor })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddedScan {
    pub scan: SpectralScan,
    pub floor: f64,
    /// Bound on |d sigma_min / d lambda| from the kernel continuity estimate.
    pub lipschitz: f64,
    /// floor - lipschitz * (largest gap) / 2
    pub certified_floor: f64,
    pub flagged: bool,
}

/// Lipschitz constant of lambda -> sigma_min(I + A(lambda)) in the 2-norm:
/// |A(l1) - A(l2)| <= sqrt(|.|_1 |.|_inf) with column sums <= TV dl/(4 pi) and row sums <= n max|w| dl/(4 pi).
pub fn lipschitz_constant(mu: &DiscreteMeasure) -> f64 {
    let maxw = mu.weights().iter().fold(0.0f64, |m, w| m.max(w.abs()));
    (total_variation(mu) * mu.len() as f64 * maxw).sqrt() / (4.0 * PI)
}

/// Positive-energy scan for embedded eigenvalues with a between-grid-point certificate.
pub fn embedded_scan(mu: &DiscreteMeasure, lambdas: &[f64], rule: DiagRule) -> Result<EmbeddedScan> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return invalid("lambda grid must be positive and finite");
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("lambda grid must be increasing");
    }
    let tv = total_variation(mu);
    let max_gap = lambdas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let allowed = 4.0 * PI / (10.0 * tv);
    if tv > 0.0 && max_gap > allowed * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!("grid spacing {max_gap:.4} exceeds 4 pi/(10 TV) = {allowed:.4}")));
    }
    let params: Vec<SpectralParameter> = lambdas.iter().map(|&l| SpectralParameter::RealPlusI0(l)).collect();
    let scan = scan(mu, &params, rule)?;
    let floor = scan.min_singular.iter().cloned().fold(f64::INFINITY, f64::min);
    let lipschitz = lipschitz_constant(mu);
    let certified_floor = floor - lipschitz * max_gap / 2.0;
    Ok(EmbeddedScan { scan, floor, lipschitz, certified_floor, flagged: floor < 1e-8 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub lambdas: Vec<f64>,
    pub min_singular: Vec<f64>,
    pub bound: Vec<f64>,
    pub all_hold: bool,
}

/// Evaluate sigma_min at random off-grid lambdas and compare with the interpolated certificate
/// floor - L * (distance to the nearest grid point).
pub fn certificate_spot_check(mu: &DiscreteMeasure, es: &EmbeddedScan, samples: usize, seed: u64, rule: DiagRule) -> Result<CertificateCheck> {
    let grid: Vec<f64> = es.scan.params.iter().map(|p| p.magnitude()).collect();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CertificateCheck { lambdas: vec![], min_singular: vec![], bound: vec![], all_hold: true };
    for _ in 0..samples {
        let l = lo + (hi - lo) * rng.random::<f64>();
        let d = grid.iter().map(|g| (g - l).abs()).fold(f64::INFINITY, f64::min);
        let s = inverse_norm(mu, SpectralParameter::RealPlusI0(l), rule)?.min_singular;
        let b = es.floor - es.lipschitz * d;
        out.all_hold &= s >= b;
        out.lambdas.push(l);
        out.min_singular.push(s);
        out.bound.push(b);
    }
    Ok(out)
}

/// Settings shared by the high-energy routines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HighEnergyOptions {
    pub diag_rule: DiagRule,
    /// Required lambda_max * (largest nearest-neighbour spacing).
    pub resolution: f64,
    /// Above this many atoms the single-precision packed kernel is used.
    pub dense_limit: usize,
    pub lanczos_iter: usize,
    pub lanczos_tol: f64,
    /// Columns sampled for TV norms on the packed path.
    pub tv_columns: usize,
    pub seed: u64,
}

impl Default for HighEnergyOptions {
    fn default() -> Self {
        HighEnergyOptions {
            diag_rule: DiagRule::LatticeCorrected,
            resolution: 0.25,
            dense_limit: 2500,
            lanczos_iter: 200,
            lanczos_tol: 1e-7,
            tv_columns: 12,
            seed: 0,
        }
    }
}

fn check_resolution(mu: &DiscreteMeasure, lambdas: &[f64], opts: &HighEnergyOptions) -> Result<()> {
    let lmax = lambdas.iter().cloned().fold(0.0, f64::max);
    let h = mu.max_spacing();
    if lmax * h > opts.resolution * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!(
            "max spacing {h:.4e} at lambda_max {lmax} gives {:.3} > {}",
            lmax * h,
            opts.resolution
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HighEnergyDecay {
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub eps_fit: f64,
    pub packed: bool,
}

pub fn l2v_norm(mu: &DiscreteMeasure, lambda: f64, opts: &HighEnergyOptions) -> Result<f64> {
    let p = SpectralParameter::RealPlusI0(lambda);
    if mu.len() <= opts.dense_limit {
        let a = assemble_bs_matrix_with(mu, p, opts.diag_rule)?;
        Ok(singular_values(&a.symmetrized())?.iter().cloned().fold(0.0, f64::max))
    } else {
        Ok(PackedKernel::build(mu, p, opts.diag_rule)?.l2v_norm(opts.lanczos_iter, opts.lanczos_tol, opts.seed))
    }
}

/// L^2(|V|) norm of A(lambda) along a grid in [5, inf) and eps_fit = -(log-log slope) over the window.
pub fn high_energy_decay(mu: &DiscreteMeasure, lambdas: &[f64], fit_window: (f64, f64), opts: &HighEnergyOptions) -> Result<HighEnergyDecay> {
    if lambdas.iter().any(|&l| !(l >= 5.0) || !l.is_finite()) {
        return invalid("high-energy grid must lie in [5, inf)");
    }
    check_resolution(mu, lambdas, opts)?;
    let norms = lambdas.iter().map(|&l| l2v_norm(mu, l, opts)).collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = lambdas
        .iter()
        .zip(&norms)
        .filter(|(l, _)| **l >= fit_window.0 && **l <= fit_window.1)
        .map(|(l, n)| (*l, *n))
        .unzip();
    if xs.len() < 2 {
        return invalid("fit window holds fewer than 2 grid points");
    }
    Ok(HighEnergyDecay {
        lambdas: lambdas.to_vec(),
        norms,
        eps_fit: -loglog_slope(&xs, &ys),
        packed: mu.len() > opts.dense_limit,
    })
}

/// TV norms of A(lambda)^p for p = 1..=k. The packed path takes the max over sampled columns.
pub fn power_norms(mu: &DiscreteMeasure, lambda: f64, k: usize, opts: &HighEnergyOptions) -> Result<Vec<f64>> {
    let p = SpectralParameter::RealPlusI0(lambda);
    if mu.len() <= opts.dense_limit {
        let a = assemble_bs_matrix_with(mu, p, opts.diag_rule)?.entries;
        let mut pw = a.clone();
        let mut out = vec![tv_norm(&pw)];
        for _ in 1..k {
            pw = pw.dot(&a);
            out.push(tv_norm(&pw));
        }
        Ok(out)
    } else {
        let kern = PackedKernel::build(mu, p, opts.diag_rule)?;
        let n = mu.len();
        let nc = opts.tv_columns.clamp(1, n);
        let cols: Vec<usize> = (0..nc).map(|i| i * n / nc).collect();
        (1..=k)
            .map(|q| {
                let cs = kern.power_columns(&cols, q);
                Ok(cs.iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerDecay {
    pub lambdas: Vec<f64>,
    /// norms[p - 1][i] = |A(lambda_i)^p|_TV
    pub norms: Vec<Vec<f64>>,
    pub exponents: Vec<f64>,
    /// |A^2| nonincreasing up to 5% jitter.
    pub monotone: bool,
    /// |A^2| trends to zero: negative fitted exponent and last value below the first.
    pub tends_to_zero: bool,
    /// exponent(k) <= (k - 1) exponent(2) with 25% slack.
    pub exponent_check: bool,
    /// |A^k| <= |A| |A^{k-1}| pointwise; None on the sampled path.
    pub submultiplicative: Option<bool>,
}

pub fn power_decay_check(mu: &DiscreteMeasure, lambdas: &[f64], k: usize, opts: &HighEnergyOptions) -> Result<PowerDecay> {
    if k < 2 {
        return invalid("power must be at least 2");
    }
    if lambdas.len() < 2 {
        return invalid("need at least 2 lambdas");
    }
    check_resolution(mu, lambdas, opts)?;
    let mut norms = vec![vec![]; k];
    for &l in lambdas {
        for (p, v) in power_norms(mu, l, k, opts)?.into_iter().enumerate() {
            norms[p].push(v);
        }
    }
    let zero = norms[1].iter().all(|&v| v == 0.0);
    let exponents: Vec<f64> =
        norms.iter().map(|ns| if ns.iter().all(|&v| v > 0.0) { loglog_slope(lambdas, ns) } else { f64::NEG_INFINITY }).collect();
    let n2 = &norms[1];
    let monotone = n2.windows(2).all(|w| w[1] <= w[0] * 1.05);
    let tends_to_zero = zero || (exponents[1] < 0.0 && n2[n2.len() - 1] < n2[0]);
    let target = (k - 1) as f64 * exponents[1];
    let exponent_check = zero || exponents[k - 1] <= target + 0.25 * target.abs();
    let submultiplicative = if mu.len() <= opts.dense_limit {
        Some((0..lambdas.len()).all(|i| norms[k - 1][i] <= norms[0][i] * norms[k - 2][i] * (1.0 + 1e-9) + 1e-300))
    } else {
        None
    };
    Ok(PowerDecay { lambdas: lambdas.to_vec(), norms, exponents, monotone, tends_to_zero, exponent_check, submultiplicative })
}

/// Smallest grid lambda with |A(lambda)^2|_TV < 1/2.
pub fn neumann_threshold(mu: &DiscreteMeasure, lambdas: &[f64], opts: &HighEnergyOptions) -> Result<f64> {
    for &l in lambdas {
        if power_norms(mu, l, 2, opts)?[1] < 0.5 {
            return Ok(l);
        }
    }
    Err(Error::Unreachable(format!("|A^2|_TV >= 1/2 on the whole grid up to {}", lambdas.last().copied().unwrap_or(0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::make_shell_measure;
    use crate::oracle::{self, ShellSpec};

    fn shell(g: f64, n: usize) -> DiscreteMeasure {
        make_shell_measure(1.0, g, n).unwrap()
    }

    #[test]
    fn zero_coupling() {
        let m = shell(0.0, 50);
        let r = inverse_norm(&m, SpectralParameter::RealPlusI0(2.0), DiagRule::LatticeCorrected).unwrap();
        assert_eq!(r.inv_norm_tv, 1.0);
        assert_eq!(r.op_norm_l2v, 0.0);
        let es = embedded_scan(&m, &[1.0, 2.0, 3.0], DiagRule::LatticeCorrected).unwrap();
        assert!((es.floor - 1.0).abs() < 1e-12);
        let pd = power_decay_check(&m, &[5.0, 6.0], 3, &HighEnergyOptions { resolution: 1e9, ..Default::default() }).unwrap();
        assert!(pd.norms.iter().flatten().all(|&v| v == 0.0));
        assert!(find_bound_states(&m, (0.1, 3.0), 10, DiagRule::LatticeCorrected).unwrap().is_empty());
    }

    #[test]
    fn static_min_singular_matches_modes() {
        let m = shell(1.0, 600);
        let r = inverse_norm(&m, SpectralParameter::RealPlusI0(0.0), DiagRule::LatticeCorrected).unwrap();
        let o = oracle::shell_min_singular(&ShellSpec::new(1.0, 1.0, 40).unwrap(), SpectralParameter::RealPlusI0(0.0));
        assert!((r.min_singular / o - 1.0).abs() < 0.02, "{} vs {o}", r.min_singular);
        assert!(r.inv_norm_tv >= 1.0 / (1.0 + r.op_norm_l2v));
        assert!((r.op_norm_l2v - 1.0).abs() < 0.02);
    }

    #[test]
    fn threshold_nearly_singular() {
        let m = shell(-1.0, 400);
        let r = inverse_norm(&m, SpectralParameter::RealPlusI0(0.0), DiagRule::LatticeCorrected).unwrap();
        assert!(r.min_singular < 1e-2);
    }

    #[test]
    fn bound_state_small() {
        let m = shell(-2.0, 400);
        let b = find_bound_states(&m, (0.05, 4.0), 24, DiagRule::LatticeCorrected).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b.kappas[0] / 0.796_812 - 1.0).abs() < 0.02, "{:?}", b.kappas);
        let r = inverse_norm(&m, SpectralParameter::imaginary(b.kappas[0]).unwrap(), DiagRule::LatticeCorrected).unwrap();
        assert!(r.min_singular < 1e-6);
        assert_eq!(b.energies[0], -b.kappas[0] * b.kappas[0]);
        let mut b = b;
        label_shell_modes(&mut b, &oracle::shell_bound_state(&ShellSpec::new(1.0, -2.0, 10).unwrap()), 0.05);
        assert_eq!(b.mode_labels, Some(vec![0]));
    }

    #[test]
    fn mixed_sign_bound_state_path() {
        // inner attractive shell and a weak repulsive outer shell
        let m = shell(-3.0, 200).union(&make_shell_measure(2.0, 0.05, 200).unwrap());
        let b = find_bound_states(&m, (0.05, 4.0), 20, DiagRule::LatticeCorrected).unwrap();
        assert!(!b.is_empty());
        for k in &b.kappas {
            let r = inverse_norm(&m, SpectralParameter::imaginary(*k).unwrap(), DiagRule::LatticeCorrected).unwrap();
            assert!(r.min_singular < 1e-6);
        }
    }

    #[test]
    fn bound_state_above_range_reported() {
        let m = shell(-3.0, 200);
        let b = find_bound_states(&m, (0.05, 0.5), 6, DiagRule::LatticeCorrected).unwrap();
        assert!(!b.unresolved.is_empty());
    }

    #[test]
    fn zero_check_verdicts() {
        let lv = |g: f64| vec![shell(g, 100), shell(g, 400), shell(g, 1600)];
        let reg = zero_energy_check(&lv(-0.9), DiagRule::LatticeCorrected).unwrap();
        assert_eq!(reg.verdict, Verdict::Regular);
        assert!((reg.floor - 0.1).abs() < 0.01);
        let res = zero_energy_check(&lv(-1.0), DiagRule::LatticeCorrected).unwrap();
        assert_eq!(res.verdict, Verdict::Resonant, "{res:?}");
        assert!(zero_energy_check(&[shell(-1.0, 100)], DiagRule::LatticeCorrected).is_err());
        assert!(zero_energy_check(&[shell(-1.0, 100), shell(-0.5, 400)], DiagRule::LatticeCorrected).is_err());
    }

    #[test]
    fn embedded_certificate_small() {
        let m = shell(1.0, 150);
        let grid: Vec<f64> = (0..60).map(|i| 0.5 + 0.05 * i as f64).collect();
        let es = embedded_scan(&m, &grid, DiagRule::LatticeCorrected).unwrap();
        assert!(es.floor > 0.05 && !es.flagged);
        assert!((es.lipschitz - 1.0).abs() < 1e-12);
        let c = certificate_spot_check(&m, &es, 5, 3, DiagRule::LatticeCorrected).unwrap();
        assert!(c.all_hold);
        let coarse = [0.5, 1.0, 2.0];
        assert!(matches!(embedded_scan(&m, &coarse, DiagRule::LatticeCorrected), Err(Error::Resolution(_))));
    }

    #[test]
    fn high_energy_preconditions() {
        let m = shell(1.0, 200);
        let o = HighEnergyOptions::default();
        assert!(high_energy_decay(&m, &[4.0, 6.0], (5.0, 10.0), &o).is_err());
        assert!(matches!(high_energy_decay(&m, &[10.0, 20.0], (5.0, 30.0), &o), Err(Error::Resolution(_))));
        let loose = HighEnergyOptions { resolution: 10.0, ..o };
        let h = high_energy_decay(&m, &[5.0, 7.0, 10.0], (5.0, 10.0), &loose).unwrap();
        assert!(h.eps_fit > 0.0);
    }

    #[test]
    fn packed_and_dense_agree() {
        let m = shell(1.0, 300);
        let dense = HighEnergyOptions { resolution: 10.0, ..Default::default() };
        let packed = HighEnergyOptions { dense_limit: 10, tv_columns: 300, ..dense.clone() };
        let a = l2v_norm(&m, 6.0, &dense).unwrap();
        let b = l2v_norm(&m, 6.0, &packed).unwrap();
        assert!((a - b).abs() < 1e-4 * a);
        let pa = power_norms(&m, 6.0, 2, &dense).unwrap();
        let pb = power_norms(&m, 6.0, 2, &packed).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-4 * x, "{x} {y}");
        }
    }

    #[test]
    fn csv_layout() {
        let m = shell(1.0, 20);
        let s = scan(&m, &[SpectralParameter::RealPlusI0(1.0), SpectralParameter::Imaginary(0.5)], DiagRule::DiscAverage).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "kind,lambda_or_kappa,min_singular,inv_norm_tv,op_norm_l2v");
        assert!(lines[1].starts_with("real,1e0,"));
        assert!(lines[2].starts_with("imaginary,5e-1,"));
    }
}

//! Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 4 7`.

use bsdisp::geom;
use bsdisp::measure::{
    dimension_kato_bound_check, dimension_profile, kato_norm, make_ball_measure, make_cantor_measure, make_shell_measure,
    total_variation,
};
use bsdisp::num::{geomspace, linspace, loglog_slope};
use bsdisp::oracle::{self, ShellSpec};
use bsdisp::propagator::{dispersive_ratio, evolve_ac, free_evolve, radial_probes};
use bsdisp::resolvent::{assemble_bs_matrix_with, continuity_defect};
use bsdisp::spectral::{
    certificate_spot_check, embedded_scan, find_bound_states, high_energy_decay, power_decay_check, zero_energy_check,
    HighEnergyOptions, Verdict,
};
use bsdisp::wiener::{fourier_transform_check, parameter_report, w_norm_estimate, RhoGrid};
use bsdisp::{DiagRule, EvolutionConfig, ProbeSpec, SourceFunction, SpectralParameter};
use ndarray_linalg::EigVals;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

const RULE: DiagRule = DiagRule::LatticeCorrected;

/// Panel count for the high-energy runs: lambda_max * (max spacing) <= HIGH_ENERGY_RESOLUTION.
const HIGH_ENERGY_PANELS: usize = 16_000;
const HIGH_ENERGY_RESOLUTION: f64 = 2.4;

type Outcome = Result<(bool, String), String>;

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn c1_free_constant() -> Outcome {
    let f = SourceFunction::gaussian([0.0; 3], 1.0).map_err(|e| e.to_string())?;
    let probes = radial_probes([0.0; 3], &[0.0, 0.5, 1.0, 2.0]);
    let r = free_evolve(&f, &[10.0], &probes, true).map_err(|e| e.to_string())?;
    let want = (4.0 * PI).powf(-1.5) * (400.0f64 / 401.0).powf(0.75);
    let limit = (4.0 * PI).powf(-1.5);
    let ok = within(r.ratio[0], want, 0.005) && within(limit, 0.022_446_6, 0.005);
    Ok((ok, format!("ratio(t=10) = {:.7} vs {want:.7}; limit {limit:.7}", r.ratio[0])))
}

fn c2_shell_kato() -> Outcome {
    let m = make_shell_measure(1.0, 1.0 / (4.0 * PI), 1000).map_err(|e| e.to_string())?;
    let k = kato_norm(&m, &ProbeSpec::default()).map_err(|e| e.to_string())?;
    Ok((within(k, 1.0, 0.01), format!("kato_norm = {k:.5} (target 1.000 +- 1%)")))
}

fn c3_dimension() -> Outcome {
    let e = |e: bsdisp::Error| e.to_string();
    let shell = make_shell_measure(1.0, 1.0 / (4.0 * PI), 4000).map_err(e)?;
    let r0 = 2.0 * shell.max_rho();
    let ps = dimension_profile(&shell, &geomspace(r0, r0 * 10f64.powf(1.5), 10), 3).map_err(e)?;
    let cs = dimension_kato_bound_check(&shell, &ps, 0, &ProbeSpec::default()).map_err(e)?;
    let cantor = make_cantor_measure(0.3, 4, 1.0).map_err(e)?;
    let r0 = 2.0 * cantor.max_rho();
    let pc = dimension_profile(&cantor, &geomspace(r0, r0 * 10f64.powf(1.5), 12), 5).map_err(e)?;
    let cc = dimension_kato_bound_check(&cantor, &pc, 1, &ProbeSpec::default()).map_err(e)?;
    let ok = (ps.alpha_est - 2.0).abs() <= 0.1 && (pc.alpha_est - 1.727).abs() <= 0.15 && cs.pass && cc.pass;
    Ok((
        ok,
        format!(
            "shell alpha {:.3}, cantor alpha {:.3}; dyadic: shell {:.3} <= {:.3}, cantor {:.3} <= {:.3}",
            ps.alpha_est, pc.alpha_est, cs.kato_measured, cs.majorant, cc.kato_measured, cc.majorant
        ),
    ))
}

fn c4_bound_states() -> Outcome {
    let mut ok = true;
    let mut msg = vec![];
    for (g, ka) in [(-2.0, 0.796_812), (-3.0, 1.410_5)] {
        let m = make_shell_measure(1.0, g, 1000).map_err(|e| e.to_string())?;
        let b = find_bound_states(&m, (0.05, 4.0), 16, RULE).map_err(|e| e.to_string())?;
        let o = oracle::shell_bound_state(&ShellSpec::new(1.0, g, 20).map_err(|e| e.to_string())?);
        let top = b.kappas.first().copied().unwrap_or(f64::NAN);
        ok &= within(top, ka, 0.01) && within(top, o.kappas[0], 0.01) && within(o.kappas[0], ka, 0.01);
        msg.push(format!("ga={g}: matrix kappa {top:.5}, oracle {:.6}", o.kappas[0]));
    }
    Ok((ok, msg.join("; ")))
}

fn c5_zero_energy() -> Outcome {
    let e = |e: bsdisp::Error| e.to_string();
    let levels = |g: f64| -> Result<Vec<_>, String> { [100, 400, 1600].iter().map(|&n| make_shell_measure(1.0, g, n).map_err(e)).collect() };
    let res = zero_energy_check(&levels(-1.0)?, RULE).map_err(e)?;
    let reg = zero_energy_check(&levels(-0.9)?, RULE).map_err(e)?;
    let ok = res.verdict == Verdict::Resonant
        && res.decay_per_4x.iter().all(|&d| d >= 2.0)
        && reg.verdict == Verdict::Regular
        && reg.floor >= 0.05;
    Ok((
        ok,
        format!(
            "ga=-1 {:?} sigma {:?} decay/4x {:.2?}; ga=-0.9 {:?} floor {:.4}",
            res.verdict, res.min_singular.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(), res.decay_per_4x, reg.verdict, reg.floor
        ),
    ))
}

fn c6_modes() -> Outcome {
    let m = make_shell_measure(1.0, 1.0, 2000).map_err(|e| e.to_string())?;
    let p = SpectralParameter::RealPlusI0(2.0);
    let a = assemble_bs_matrix_with(&m, p, RULE).map_err(|e| e.to_string())?;
    let ev: Vec<C64> = a.entries.eigvals().map_err(|e| e.to_string())?.to_vec();
    let shell = ShellSpec::new(1.0, 1.0, 30).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut taken = vec![false; ev.len()];
    for l in 0..=5 {
        let beta = oracle::mode_eigenvalue(&shell, l, p);
        // the 2l+1 closest unused eigenvalues form the l-cluster
        let mut idx: Vec<usize> = (0..ev.len()).filter(|&i| !taken[i]).collect();
        idx.sort_by(|&x, &y| (ev[x] - beta).norm().total_cmp(&(ev[y] - beta).norm()));
        for &i in idx.iter().take(2 * l + 1) {
            taken[i] = true;
            worst = worst.max((ev[i] - beta).norm() / beta.norm());
        }
    }
    Ok((worst <= 0.02, format!("max relative deviation over l <= 5 clusters: {worst:.4}")))
}

fn high_energy_opts() -> HighEnergyOptions {
    HighEnergyOptions { resolution: HIGH_ENERGY_RESOLUTION, ..Default::default() }
}

fn c7_high_energy() -> Outcome {
    let m = make_shell_measure(1.0, 1.0, HIGH_ENERGY_PANELS).map_err(|e| e.to_string())?;
    let lams = geomspace(10.0, 80.0, 5);
    let h = high_energy_decay(&m, &lams, (10.0, 80.0), &high_energy_opts()).map_err(|e| e.to_string())?;
    let slope = -h.eps_fit;
    let shell = ShellSpec::for_lambda(1.0, 1.0, 80.0).map_err(|e| e.to_string())?;
    let fine = geomspace(10.0, 80.0, 60);
    let onorm: Vec<f64> = fine.iter().map(|&l| oracle::shell_high_energy_norm(&shell, l)).collect();
    let oslope = loglog_slope(&fine, &onorm);
    let ok = (-0.40..=-0.25).contains(&slope) && (slope - oslope).abs() <= 0.07 && slope <= -0.25;
    Ok((
        ok,
        format!("matrix slope {slope:.3} (n={}, norms {:.4?}); oracle max_l|beta_l| slope {oslope:.3}", m.len(), h.norms),
    ))
}

fn c8_continuity() -> Outcome {
    let e = |e: bsdisp::Error| e.to_string();
    let measures = [
        make_shell_measure(1.0, -1.3, 300).map_err(e)?,
        make_cantor_measure(0.3, 3, 2.0).map_err(e)?,
        make_ball_measure(0.8, -1.5, 7).map_err(e)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for m in &measures {
        for _ in 0..100 {
            let l1 = 20.0 * rng.random::<f64>();
            let l2 = 20.0 * rng.random::<f64>();
            let d = continuity_defect(m, l1, l2, RULE).map_err(e)?;
            worst = worst.max(d.measured_total / d.bound);
        }
    }
    Ok((worst <= 1.0 + 1e-9, format!("max measured/bound over 300 pairs = {worst:.6}")))
}

fn c9_wiener() -> Outcome {
    let e = |e: bsdisp::Error| e.to_string();
    let m = make_shell_measure(1.0, 1.0, 120).map_err(e)?;
    let mut ws = vec![];
    let mut bounded = true;
    for l in [8.0, 32.0, 128.0] {
        let grid = RhoGrid::covering(m.diameter(), l, 10.0).map_err(e)?;
        let w = w_norm_estimate(&m, l, &grid).map_err(e)?;
        bounded &= w.within_bound;
        ws.push(w.w_norm);
    }
    let stable = ws.iter().all(|w| within(*w, ws[0], 0.02));
    let small = make_shell_measure(1.0, 1.0, 40).map_err(e)?;
    let l = 8.0;
    let grid = RhoGrid::covering(small.diameter(), l, 10.0).map_err(e)?;
    let mut dev: f64 = 0.0;
    for lam in [0.0, 2.5, l / 2.0, l] {
        dev = dev.max(fourier_transform_check(&small, l, lam, &grid).map_err(e)?.deviation);
    }
    let coarse = make_shell_measure(1.0, -0.5, 16).map_err(e)?;
    let lams = linspace(0.0, 64.0, 129);
    let p = parameter_report(&coarse, 64.0, &lams, 8.0, 1.0 / 3.0).map_err(e)?;
    let finite = [p.w_norm, p.alpha_sup, p.r, p.delta].iter().all(|v| v.is_finite() && *v > 0.0);
    let ok = bounded && stable && dev < 1e-3 && finite && p.n == 8;
    Ok((
        ok,
        format!(
            "w_norm {:.5?} (bound ok: {bounded}); FT deviation {dev:.2e}; report w={:.4} alpha={:.4} R={:.3} N={} delta={:.4}",
            ws, p.w_norm, p.alpha_sup, p.r, p.n, p.delta
        ),
    ))
}

fn evolution_times() -> Vec<f64> {
    geomspace(1.0, 20.0, 8)
}

fn c10_perturbed() -> Outcome {
    let e = |e: bsdisp::Error| e.to_string();
    let f = SourceFunction::gaussian([0.0; 3], 1.0).map_err(e)?;
    let radii = [0.0, 0.5, 1.5, 3.0];
    let probes: Vec<geom::Point> = radii.iter().map(|&r| [r, 0.0, 0.0]).collect();
    let times = evolution_times();
    let cfg = EvolutionConfig::default();
    let mut ok = true;
    let mut msg = vec![];
    for g in [-0.5, 1.0] {
        let m = make_shell_measure(1.0, g, 600).map_err(e)?;
        let u = evolve_ac(&m, &f, &times, &probes, &cfg).map_err(e)?;
        let (sup, slope) = dispersive_ratio(&u).map_err(e)?;
        let o = oracle::shell_evolve(&ShellSpec::new(1.0, g, 0).map_err(e)?, &f, &times, &radii, &cfg).map_err(e)?;
        let mut dev: f64 = 0.0;
        for ti in 0..times.len() {
            let osup = o.values[ti].iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = u.values[ti].iter().zip(&o.values[ti]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            dev = dev.max(diff / osup);
        }
        let osup: Vec<f64> = o
            .values
            .iter()
            .zip(&times)
            .map(|(row, t)| t.powf(1.5) * row.iter().map(|z| z.norm()).fold(0.0, f64::max) / f.l1_norm())
            .collect();
        let oslope = loglog_slope(&times, &osup);
        ok &= sup.is_finite() && slope <= 0.05 && dev <= 0.03;
        msg.push(format!("ga={g}: sup ratio {sup:.4}, slope {slope:.3} (oracle probe slope {oslope:.3}), oracle deviation {dev:.4}"));
    }
    Ok((ok, msg.join("; ")))
}

fn c11_resonant() -> Outcome {
    let e = |e: bsdisp::Error| e.to_string();
    let f = SourceFunction::gaussian([0.0; 3], 1.0).map_err(e)?;
    let probes = radial_probes([0.0; 3], &[0.0, 0.5, 1.5]);
    let m = make_shell_measure(1.0, -1.0, 600).map_err(e)?;
    let cfg = EvolutionConfig { force: true, ..Default::default() };
    let u = evolve_ac(&m, &f, &evolution_times(), &probes, &cfg).map_err(e)?;
    let (_, slope) = dispersive_ratio(&u).map_err(e)?;
    Ok(((slope - 1.0).abs() <= 0.15, format!("forced ga=-1 ratio slope {slope:.3} (ratios {:.4?})", u.ratio)))
}

fn c12_embedded() -> Outcome {
    let e = |e: bsdisp::Error| e.to_string();
    let grid: Vec<f64> = (0..=398).map(|i| 0.1 + 0.05 * i as f64).collect();
    let mut ok = true;
    let mut msg = vec![];
    for g in [1.0, -1.0] {
        let m = make_shell_measure(1.0, g, 300).map_err(e)?;
        let es = embedded_scan(&m, &grid[1..], RULE).map_err(e)?;
        let cert = certificate_spot_check(&m, &es, 20, 12, RULE).map_err(e)?;
        ok &= es.floor > 0.05 && !es.flagged && cert.all_hold;
        msg.push(format!("ga={g}: floor {:.4}, certified {:.4}, spot checks hold: {}", es.floor, es.certified_floor, cert.all_hold));
    }
    Ok((ok, msg.join("; ")))
}

fn c13_power_decay() -> Outcome {
    let m = make_shell_measure(1.0, 1.0, HIGH_ENERGY_PANELS).map_err(|e| e.to_string())?;
    let lams = geomspace(10.0, 80.0, 5);
    let p = power_decay_check(&m, &lams, 2, &high_energy_opts()).map_err(|e| e.to_string())?;
    let n2 = &p.norms[1];
    let below = n2.iter().any(|&v| v < 0.5);
    let ok = p.monotone && p.tends_to_zero && below;
    Ok((ok, format!("|A^2|_TV {:.4?} (monotone {}, below 1/2 {below}); TV(mu) {:.3}", n2, p.monotone, total_variation(&m))))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 13] = [
        (1, "free dispersive constant", c1_free_constant),
        (2, "shell Kato norm", c2_shell_kato),
        (3, "dimension fits and dyadic majorant", c3_dimension),
        (4, "bound states", c4_bound_states),
        (5, "zero-energy resonance detection", c5_zero_energy),
        (6, "mode eigenvalue agreement", c6_modes),
        (7, "high-energy decay exponent", c7_high_energy),
        (8, "continuity bound", c8_continuity),
        (9, "Wiener norms and parameter report", c9_wiener),
        (10, "perturbed dispersive bound", c10_perturbed),
        (11, "resonant contrast", c11_resonant),
        (12, "embedded-eigenvalue scan", c12_embedded),
        (13, "power decay", c13_power_decay),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (status, detail) = match run() {
            Ok((true, d)) => ("PASS", d),
            Ok((false, d)) => ("FAIL", d),
            Err(err) => ("FAIL", format!("error: {err}")),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("{status} {id:>2} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}

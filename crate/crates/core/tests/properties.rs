use bsdisp::measure::{
    dimension_profile, kato_norm, local_kato_modulus, make_cantor_measure, make_shell_measure, total_variation, ProbeSpec,
};
use bsdisp::propagator::{evolve_ac, free_evolve, radial_probes};
use bsdisp::resolvent::{assemble_bs_matrix_with, continuity_defect};
use bsdisp::spectral::{find_bound_states, inverse_norm};
use bsdisp::wiener::{w_norm_column, CutoffPair, RhoGrid};
use bsdisp::{Atom, DiagRule, DiscreteMeasure, EvolutionConfig, GaussianComponent, Point, SourceFunction, SpectralParameter};
use proptest::prelude::*;

const RULE: DiagRule = DiagRule::LatticeCorrected;

fn rotate(p: &Point, (a, b, c): (f64, f64, f64)) -> Point {
    let rz = |p: Point, t: f64| [t.cos() * p[0] - t.sin() * p[1], t.sin() * p[0] + t.cos() * p[1], p[2]];
    let rx = |p: Point, t: f64| [p[0], t.cos() * p[1] - t.sin() * p[2], t.sin() * p[1] + t.cos() * p[2]];
    rz(rx(rz(*p, a), b), c)
}

fn rotated(mu: &DiscreteMeasure, angles: (f64, f64, f64)) -> DiscreteMeasure {
    let atoms = mu.atoms.iter().map(|a| Atom { x: rotate(&a.x, angles), ..*a }).collect();
    DiscreteMeasure::new(atoms, "rotated").unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn scan_is_rotation_invariant(a in 0.0..6.3f64, b in 0.0..3.2f64, c in 0.0..6.3f64, lam in 0.0..6.0f64, g in -2.0..2.0f64) {
        prop_assume!(g.abs() > 0.05);
        let mu = make_shell_measure(1.0, g, 80).unwrap();
        let rot = rotated(&mu, (a, b, c));
        let p = SpectralParameter::real(lam).unwrap();
        let r0 = inverse_norm(&mu, p, RULE).unwrap();
        let r1 = inverse_norm(&rot, p, RULE).unwrap();
        prop_assert!((r0.min_singular - r1.min_singular).abs() < 1e-9);
        prop_assert!((r0.op_norm_l2v - r1.op_norm_l2v).abs() < 1e-9);
        prop_assert!(rel(r0.inv_norm_tv, r1.inv_norm_tv) < 1e-9);
    }

    #[test]
    fn bs_matrix_linear_in_coupling(g in -3.0..3.0f64, c in -4.0..4.0f64, lam in 0.0..8.0f64) {
        let p = SpectralParameter::real(lam).unwrap();
        let a = assemble_bs_matrix_with(&make_shell_measure(1.0, g, 50).unwrap(), p, RULE).unwrap();
        let b = assemble_bs_matrix_with(&make_shell_measure(1.0, c * g, 50).unwrap(), p, RULE).unwrap();
        let scale = a.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, y) in a.entries.iter().zip(b.entries.iter()) {
            prop_assert!((x * c - y).norm() <= 1e-12 * scale.max(1.0) * c.abs().max(1.0));
        }
    }

    #[test]
    fn kato_norm_is_homogeneous(c in -5.0..5.0f64, seed in 0u64..100) {
        prop_assume!(c.abs() > 1e-3);
        let mu = make_cantor_measure(0.3, 2, 1.0).unwrap();
        let spec = ProbeSpec { box_grid: 4, seed, ..Default::default() };
        let k0 = kato_norm(&mu, &spec).unwrap();
        let k1 = kato_norm(&mu.scaled(c), &spec).unwrap();
        prop_assert!(rel(k1, c.abs() * k0) < 1e-12);
    }

    #[test]
    fn kato_norm_lower_sanity_floor(g in 0.1..3.0f64, n in 20usize..200) {
        let mu = make_shell_measure(1.0, g, n).unwrap();
        let k = kato_norm(&mu, &ProbeSpec { box_grid: 3, ..Default::default() }).unwrap();
        prop_assert!(k >= total_variation(&mu) / (mu.diameter() + mu.max_rho()));
    }

    #[test]
    fn local_modulus_monotone(r1 in 0.01..1.0f64, dr in 0.0..1.0f64) {
        let mu = make_shell_measure(1.0, 1.0, 150).unwrap();
        let spec = ProbeSpec { box_grid: 3, ..Default::default() };
        let a = local_kato_modulus(&mu, r1, &spec).unwrap();
        let b = local_kato_modulus(&mu, r1 + dr, &spec).unwrap();
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn dimension_profile_bounded_and_monotone(s in 0.2..0.5f64, seed in 0u64..50) {
        let mu = make_cantor_measure(s, 3, 1.0).unwrap();
        let lo = 2.0 * mu.max_rho();
        let radii: Vec<f64> = (0..6).map(|i| lo * 10f64.powf(0.4 * i as f64)).collect();
        let p = dimension_profile(&mu, &radii, seed).unwrap();
        prop_assert!(p.max_ball_mass.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(p.max_ball_mass.iter().all(|m| *m <= total_variation(&mu) * (1.0 + 1e-12)));
    }

    #[test]
    fn continuity_bound_holds(l1 in 0.0..30.0f64, l2 in 0.0..30.0f64, g in -2.0..2.0f64) {
        let mu = make_shell_measure(1.0, g, 60).unwrap();
        let d = continuity_defect(&mu, l1, l2, RULE).unwrap();
        prop_assert!(d.measured_offdiag <= d.bound * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn fejer_kernel_nonnegative_with_unit_mass(u in -200.0..200.0f64) {
        prop_assert!(CutoffPair::ceta(u) >= 0.0);
        prop_assert!(CutoffPair::cdf(u) >= 0.0 && CutoffPair::cdf(u) <= 1.0);
        prop_assert!((CutoffPair::cdf(u) + CutoffPair::upper(u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_norm_column_translation_invariant(dx in -3.0..3.0f64, dy in -3.0..3.0f64, dz in -3.0..3.0f64) {
        let mu = make_shell_measure(1.0, 1.0, 24).unwrap();
        let l = 8.0;
        let grid = RhoGrid::covering(mu.diameter(), l, 10.0).unwrap();
        let y = mu.atoms[3].x;
        let moved = mu.translated([dx, dy, dz]);
        let y2 = [y[0] + dx, y[1] + dy, y[2] + dz];
        let a = w_norm_column(&mu, l, &grid, &y).unwrap();
        let b = w_norm_column(&moved, l, &grid, &y2).unwrap();
        prop_assert!(rel(a, b) < 1e-9);
    }

    #[test]
    fn two_positive_gaussians_respect_free_constant(d in 0.0..4.0f64, w2 in 0.5..2.0f64) {
        let f = SourceFunction::new(vec![
            GaussianComponent { center: [0.0; 3], width: 1.0, amplitude: 0.5 },
            GaussianComponent { center: [d, 0.0, 0.0], width: w2, amplitude: 0.5 },
        ]).unwrap();
        let probes = radial_probes([d / 2.0, 0.0, 0.0], &[0.0, 0.5, 1.0, 2.0]);
        let r = free_evolve(&f, &[0.5, 2.0, 10.0], &probes, true).unwrap();
        let limit = (4.0 * std::f64::consts::PI).powf(-1.5);
        prop_assert!(r.ratio.iter().all(|q| *q <= limit * (1.0 + 1e-12)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 3, ..ProptestConfig::default() })]

    #[test]
    fn evolution_linear_in_data(c in -3.0..3.0f64) {
        prop_assume!(c.abs() > 1e-2);
        let mu = make_shell_measure(1.0, 0.5, 40).unwrap();
        let f = SourceFunction::gaussian([0.0; 3], 1.0).unwrap();
        let probes = radial_probes([0.0; 3], &[0.0, 1.5]);
        let cfg = EvolutionConfig { refine_sup: false, ..Default::default() };
        let u = evolve_ac(&mu, &f, &[1.0, 3.0], &probes, &cfg).unwrap();
        let v = evolve_ac(&mu, &f.scaled(c), &[1.0, 3.0], &probes, &cfg).unwrap();
        for (ru, rv) in u.values.iter().zip(&v.values) {
            for (a, b) in ru.iter().zip(rv) {
                prop_assert!((a * c - b).norm() <= 1e-12 * a.norm().max(1e-3) * c.abs().max(1.0));
            }
        }
    }
}

#[test]
fn bound_state_count_grows_with_attraction() {
    let mut last = 0;
    for g in [-0.5, -1.5, -2.5, -4.0, -6.0] {
        let mu = make_shell_measure(1.0, g, 200).unwrap();
        let n = find_bound_states(&mu, (0.02, 6.0), 24, RULE).unwrap().len();
        assert!(n >= last, "g = {g}: {n} bound states after {last}");
        last = n;
    }
    assert!(last >= 2);
}

#[test]
fn bound_states_are_singular_points() {
    let mu = make_shell_measure(1.0, -3.0, 200).unwrap();
    let list = find_bound_states(&mu, (0.05, 4.0), 20, RULE).unwrap();
    assert!(!list.is_empty());
    for &k in &list.kappas {
        let r = inverse_norm(&mu, SpectralParameter::imaginary(k).unwrap(), RULE).unwrap();
        assert!(r.min_singular < 1e-6, "kappa {k}: {}", r.min_singular);
    }
}

#[test]
fn time_reversal_conjugates_field() {
    let mu = make_shell_measure(1.0, 0.5, 40).unwrap();
    let f = SourceFunction::gaussian([0.0; 3], 1.0).unwrap();
    let probes = radial_probes([0.0; 3], &[0.0, 1.0]);
    let cfg = EvolutionConfig { refine_sup: false, ..Default::default() };
    let fwd = evolve_ac(&mu, &f, &[2.0], &probes, &cfg).unwrap();
    let back = evolve_ac(&mu, &f, &[-2.0], &probes, &cfg).unwrap();
    for (a, b) in fwd.values[0].iter().zip(&back.values[0]) {
        assert!((a.conj() - b).norm() < 1e-9 * a.norm(), "{a} vs {b}");
    }
}

#[test]
fn weak_coupling_deviation_is_first_order() {
    let f = SourceFunction::gaussian([0.0; 3], 1.0).unwrap();
    let probes = radial_probes([0.0; 3], &[0.0, 1.5]);
    let cfg = EvolutionConfig { refine_sup: false, ..Default::default() };
    let free = free_evolve(&f, &[2.0], &probes, false).unwrap();
    let dev: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&g| {
            let u = evolve_ac(&make_shell_measure(1.0, g, 60).unwrap(), &f, &[2.0], &probes, &cfg).unwrap();
            u.values[0].iter().zip(&free.values[0]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        })
        .collect();
    for w in dev.windows(2) {
        let q = w[0] / w[1];
        assert!((q - 2.0).abs() < 0.25, "halving g scaled the deviation by {q} ({dev:?})");
    }
}

use crate::config::{ConfigError, RunConfig};
use bsdisp::io::{fmt_f64, save_measure, CsvTable};
use bsdisp::measure::{self, make_ball_measure, make_cantor_measure, make_shell_measure};
use bsdisp::oracle::{mode_eigenvalues, ShellSpec};
use bsdisp::propagator::{dispersive_ratio, evolve_ac, radial_probes};
use bsdisp::spectral::{self, HighEnergyOptions};
use bsdisp::wiener::parameter_report;
use bsdisp::{DiagRule, DiscreteMeasure, EvolutionConfig, ProbeSpec, SourceFunction, SpectralParameter};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Core(bsdisp::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<bsdisp::Error> for Failure {
    fn from(e: bsdisp::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        use bsdisp::Error as E;
        match self {
            Failure::Config(_) => EXIT_VALIDATION,
            Failure::Core(E::InvalidInput(_) | E::Parse(_) | E::Io(_)) => EXIT_VALIDATION,
            Failure::Core(_) => EXIT_NUMERICAL,
        }
    }

    fn kind(&self) -> &'static str {
        use bsdisp::Error as E;
        match self {
            Failure::Config(_) => "config",
            Failure::Core(e) => match e {
                E::InvalidInput(_) => "invalid_input",
                E::Precondition(_) => "precondition",
                E::Singular { .. } => "singular",
                E::Resolution(_) => "resolution",
                E::Quadrature(_) => "quadrature",
                E::Unreachable(_) => "unreachable",
                E::Linalg(_) => "linalg",
                E::Io(_) => "io",
                E::Parse(_) => "parse",
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => e.to_string(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Artifacts and summary values collected by a command.
struct Run<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    artifacts: Vec<String>,
    results: Map<String, Value>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, contents: &str) -> CmdResult {
        std::fs::write(self.out.join(name), contents).map_err(bsdisp::Error::from)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }

    fn seed(&self) -> Result<u64, ConfigError> {
        self.cfg.get("seed", 0u64)
    }

    fn rule(&self) -> Result<DiagRule, ConfigError> {
        match self.cfg.get("diag_rule", "lattice".to_string())?.as_str() {
            "disc" | "disc_average" => Ok(DiagRule::DiscAverage),
            "lattice" | "lattice_corrected" => Ok(DiagRule::LatticeCorrected),
            other => Err(ConfigError(format!("diag_rule: unknown rule {other:?} (disc or lattice)"))),
        }
    }

    fn probes(&self) -> Result<ProbeSpec, ConfigError> {
        let d = ProbeSpec::default();
        Ok(ProbeSpec {
            jitter_per_atom: self.cfg.get("probe.jitter_per_atom", d.jitter_per_atom)?,
            box_grid: self.cfg.get("probe.box_grid", d.box_grid)?,
            refine_starts: self.cfg.get("probe.refine_starts", d.refine_starts)?,
            seed: self.seed()?,
            ..d
        })
    }

    /// The measure named by `input`, or one generated from shell/cantor/ball settings.
    fn measure(&self) -> Result<DiscreteMeasure, Failure> {
        if let Some(p) = self.cfg.raw("input") {
            return Ok(bsdisp::io::load_measure(Path::new(&p))?);
        }
        self.generated()
    }

    fn generated(&self) -> Result<DiscreteMeasure, Failure> {
        let has = |pre: &str| self.cfg_has_prefix(pre);
        let picked = [has("shell."), has("cantor."), has("ball.")].iter().filter(|b| **b).count();
        if picked > 1 {
            return Err(ConfigError("give only one of shell, cantor, ball".into()).into());
        }
        let c = self.cfg;
        if has("shell.") {
            Ok(make_shell_measure(c.get("shell.a", 1.0)?, c.require("shell.g")?, c.get("shell.n", 400usize)?)?)
        } else if has("cantor.") {
            Ok(make_cantor_measure(c.require("cantor.s")?, c.require("cantor.depth")?, c.get("cantor.m", 1.0)?)?)
        } else if has("ball.") {
            Ok(make_ball_measure(c.get("ball.r", 1.0)?, c.get("ball.m", 1.0)?, c.get("ball.k", 20usize)?)?)
        } else {
            Err(ConfigError("no measure: give input or shell/cantor/ball parameters".into()).into())
        }
    }

    fn cfg_has_prefix(&self, pre: &str) -> bool {
        ["a", "g", "n", "s", "depth", "m", "r", "k"].iter().any(|k| self.cfg.contains(&format!("{pre}{k}")))
    }

    fn shell_spec(&self, ell_max: usize) -> Result<ShellSpec, Failure> {
        Ok(ShellSpec::new(self.cfg.get("shell.a", 1.0)?, self.cfg.require("shell.g")?, ell_max)?)
    }
}

fn measure_summary(run: &mut Run, mu: &DiscreteMeasure) {
    run.result("atoms", mu.len());
    run.result("total_weight", mu.total_weight());
    run.result("total_variation", measure::total_variation(mu));
}

fn measure_gen(run: &mut Run) -> CmdResult {
    let mu = run.generated()?;
    let name = run.cfg.get("output", "measure.json".to_string())?;
    save_measure(&mu, &run.out.join(&name))?;
    run.artifacts.push(name);
    measure_summary(run, &mu);
    Ok(())
}

fn measure_kato(run: &mut Run) -> CmdResult {
    let mu = run.measure()?;
    let probes = run.probes()?;
    let (kato, at) = measure::kato_norm_with_argmax(&mu, &probes)?;
    let radii = run.cfg.range("radii", "0.05:1:8:log")?;
    let mut t = CsvTable::new(&["r", "local_kato_modulus"]);
    for &r in &radii {
        t.push_values(&[r, measure::local_kato_modulus(&mu, r, &probes)?]);
    }
    run.write("kato.csv", &t.to_string())?;
    measure_summary(run, &mu);
    run.result("kato_norm", kato);
    run.result("kato_argmax", at.to_vec());
    Ok(())
}

fn measure_dim(run: &mut Run) -> CmdResult {
    let mu = run.measure()?;
    let default_lo = (2.0 * mu.max_rho()).max(1e-3);
    let default = format!("{}:{}:10:log", default_lo, default_lo * 100.0);
    let radii = run.cfg.range("radii", &default)?;
    let prof = measure::dimension_profile(&mu, &radii, run.seed()?)?;
    let mut t = CsvTable::new(&["r", "max_ball_mass"]);
    for (r, m) in prof.radii.iter().zip(&prof.max_ball_mass) {
        t.push_values(&[*r, *m]);
    }
    run.write("dimension.csv", &t.to_string())?;
    run.result("alpha_est", prof.alpha_est);
    run.result("c_est", prof.c_est);
    let extent = mu.atoms.iter().map(|a| bsdisp::geom::norm(&a.x)).fold(0.0, f64::max);
    let m_auto = extent.max(1e-300).log2().ceil() as i32;
    let m = run.cfg.get("dyadic_m", m_auto)?;
    match measure::dimension_kato_bound_check(&mu, &prof, m, &run.probes()?) {
        Ok(chk) => run.result("dyadic_check", serde_json::to_value(chk).expect("plain record")),
        // alpha <= 1 is a property of the measure, reported rather than fatal
        Err(bsdisp::Error::Precondition(msg)) => run.result("dyadic_check", json!({ "error": msg })),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn spectrum_scan(run: &mut Run) -> CmdResult {
    let mu = run.measure()?;
    let rule = run.rule()?;
    let mut params = vec![];
    if run.cfg.contains("lambda") || !run.cfg.contains("kappa") {
        for l in run.cfg.range("lambda", "0:10:21")? {
            params.push(SpectralParameter::real(l)?);
        }
    }
    if run.cfg.contains("kappa") {
        for k in run.cfg.require_range("kappa")? {
            params.push(SpectralParameter::imaginary(k)?);
        }
    }
    let sc = spectral::scan(&mu, &params, rule)?;
    run.write("scan.csv", &sc.to_csv())?;
    let floor = sc.min_singular.iter().cloned().fold(f64::INFINITY, f64::min);
    run.result("min_singular_floor", floor);
    run.result("singular_points", sc.singular.iter().filter(|s| **s).count());
    Ok(())
}

fn bound_states(run: &mut Run) -> CmdResult {
    let mu = run.measure()?;
    let grid = run.cfg.range("kappa", "0.01:4:200")?;
    if grid.len() < 2 {
        return Err(ConfigError("kappa grid needs at least 2 points".into()).into());
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let list = spectral::find_bound_states(&mu, (lo, hi), grid.len(), run.rule()?)?;
    let mut t = CsvTable::new(&["index", "kappa", "energy"]);
    for (i, (k, e)) in list.kappas.iter().zip(&list.energies).enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*k), fmt_f64(*e)]);
    }
    run.write("bound_states.csv", &t.to_string())?;
    run.result("count", list.len());
    run.result("kappas", list.kappas.clone());
    run.result("unresolved", list.unresolved.clone());
    Ok(())
}

fn zero_check(run: &mut Run) -> CmdResult {
    let levels: Vec<DiscreteMeasure> = if let Some(list) = run.cfg.raw("inputs") {
        list.split(',').map(|p| bsdisp::io::load_measure(Path::new(p.trim()))).collect::<bsdisp::Result<_>>()?
    } else {
        let c = run.cfg;
        let (a, g): (f64, f64) = (c.get("shell.a", 1.0)?, c.require("shell.g")?);
        let ns = c.range("levels", "100,400,1600")?;
        ns.iter()
            .map(|&n| {
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Failure::Config(ConfigError(format!("levels: {n} is not a panel count"))));
                }
                Ok(make_shell_measure(a, g, n as usize)?)
            })
            .collect::<Result<_, _>>()?
    };
    let rep = spectral::zero_energy_check(&levels, run.rule()?)?;
    let mut t = CsvTable::new(&["atoms", "min_singular"]);
    for (n, s) in rep.n_atoms.iter().zip(&rep.min_singular) {
        t.push(vec![n.to_string(), fmt_f64(*s)]);
    }
    run.write("zero_check.csv", &t.to_string())?;
    let v = serde_json::to_value(&rep).expect("plain record");
    run.write("verdict.json", &serde_json::to_string_pretty(&v).expect("json"))?;
    run.result("verdict", v["verdict"].clone());
    run.result("floor", rep.floor);
    Ok(())
}

fn high_energy(run: &mut Run) -> CmdResult {
    let mu = run.measure()?;
    let c = run.cfg;
    let d = HighEnergyOptions::default();
    let opts = HighEnergyOptions {
        diag_rule: run.rule()?,
        resolution: c.tol("resolution", d.resolution)?,
        dense_limit: c.get("dense_limit", d.dense_limit)?,
        lanczos_iter: c.get("lanczos_iter", d.lanczos_iter)?,
        lanczos_tol: c.tol("lanczos_tol", d.lanczos_tol)?,
        tv_columns: c.get("tv_columns", d.tv_columns)?,
        seed: run.seed()?,
    };
    let lambdas = c.range("lambda", "10:80:5:log")?;
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let window = (c.get("fit_lo", lo)?, c.get("fit_hi", hi)?);
    let dec = spectral::high_energy_decay(&mu, &lambdas, window, &opts)?;
    let k = c.get("power", 0usize)?;
    let mut header = vec!["lambda".to_string(), "op_norm_l2v".to_string()];
    let pd = if k >= 2 {
        let pd = spectral::power_decay_check(&mu, &lambdas, k, &opts)?;
        header.extend((1..=k).map(|p| format!("tv_norm_pow{p}")));
        Some(pd)
    } else {
        None
    };
    let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut t = CsvTable::new(&hdr);
    for (i, l) in lambdas.iter().enumerate() {
        let mut row = vec![*l, dec.norms[i]];
        if let Some(pd) = &pd {
            row.extend(pd.norms.iter().map(|ns| ns[i]));
        }
        t.push_values(&row);
    }
    run.write("high_energy.csv", &t.to_string())?;
    run.result("eps_fit", dec.eps_fit);
    run.result("packed", dec.packed);
    if let Some(pd) = pd {
        run.result("power_exponents", pd.exponents.clone());
        run.result("monotone", pd.monotone);
        run.result("tends_to_zero", pd.tends_to_zero);
        run.result("exponent_check", pd.exponent_check);
        run.result("submultiplicative", serde_json::to_value(pd.submultiplicative).expect("json"));
    }
    Ok(())
}

fn evolve(run: &mut Run) -> CmdResult {
    let mu = run.measure()?;
    let c = run.cfg;
    let d = EvolutionConfig::default();
    let lambda_max = if c.contains("lambda_max") { Some(c.tol("lambda_max", 1.0)?) } else { None };
    let coarse = if c.contains("coarse_spacing") { Some(c.tol("coarse_spacing", 1.0)?) } else { None };
    let cfg = EvolutionConfig {
        cutoff_l: c.tol("L", d.cutoff_l)?,
        lambda_max,
        lambda_sigma: c.tol("lambda_sigma", d.lambda_sigma)?,
        coarse_spacing: coarse,
        quad_rel_tol: c.tol("quad_rel_tol", d.quad_rel_tol)?,
        richardson_tol: c.tol("richardson_tol", d.richardson_tol)?,
        diag_rule: run.rule()?,
        zero_floor: c.tol("zero_floor", d.zero_floor)?,
        force: c.get("force", d.force)?,
        refine_sup: c.get("refine_sup", d.refine_sup)?,
    };
    let center = [c.get("source.x", 0.0)?, c.get("source.y", 0.0)?, c.get("source.z", 0.0)?];
    let f = SourceFunction::gaussian(center, c.tol("source.width", 1.0)?)?.scaled(c.get("source.amplitude", 1.0)?);
    let times = c.range("t", "1:20:20")?;
    let radii = c.range("probes", "0,0.5,1.5,3")?;
    let probes = radial_probes(center, &radii);
    let res = evolve_ac(&mu, &f, &times, &probes, &cfg)?;
    run.write("evolution.csv", &res.to_csv())?;
    let mut pts = CsvTable::new(&["probe_index", "x", "y", "z"]);
    for (i, p) in probes.iter().enumerate() {
        pts.push(vec![i.to_string(), fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2])]);
    }
    run.write("probes.csv", &pts.to_string())?;
    run.result("ratio", res.ratio.clone());
    run.result("notes", res.notes.clone());
    match dispersive_ratio(&res) {
        Ok((sup, slope)) => {
            run.result("sup_ratio", sup);
            run.result("trend_slope", slope);
        }
        Err(e) => run.result("trend_slope", format!("not available: {e}")),
    }
    Ok(())
}

fn wiener_report(run: &mut Run) -> CmdResult {
    let mu = run.measure()?;
    let c = run.cfg;
    let l = c.tol("L", 64.0)?;
    let lambdas = c.range("lambda", &format!("0:{l}:129"))?;
    let p = parameter_report(&mu, l, &lambdas, c.tol("K", 8.0)?, c.tol("eps_fit", 1.0 / 3.0)?)?;
    run.write("wiener.json", &p.to_json())?;
    run.result("parameters", serde_json::to_value(&p).expect("plain record"));
    Ok(())
}

fn oracle_table(run: &mut Run) -> CmdResult {
    let c = run.cfg;
    let mut params = vec![];
    if c.contains("lambda") || !c.contains("kappa") {
        for l in c.range("lambda", "0:10:21")? {
            params.push(SpectralParameter::real(l)?);
        }
    }
    if c.contains("kappa") {
        for k in c.require_range("kappa")? {
            params.push(SpectralParameter::imaginary(k)?);
        }
    }
    let top = params.iter().map(|p| p.magnitude()).fold(0.0, f64::max);
    let default_ell = (2.0 * c.get("shell.a", 1.0)? * top).ceil() as usize + 8;
    let shell = run.shell_spec(c.get("ell_max", default_ell)?)?;
    let mut t = CsvTable::new(&["kind", "lambda_or_kappa", "ell", "re_beta", "im_beta", "abs_one_plus_beta"]);
    for p in &params {
        let (kind, v) = match p {
            SpectralParameter::RealPlusI0(l) => ("real", *l),
            SpectralParameter::Imaginary(k) => ("imaginary", *k),
        };
        for (ell, b) in mode_eigenvalues(&shell, *p).iter().enumerate() {
            t.push(vec![kind.into(), fmt_f64(v), ell.to_string(), fmt_f64(b.re), fmt_f64(b.im), fmt_f64((1.0 + b).norm())]);
        }
    }
    run.write("oracle.csv", &t.to_string())?;
    run.result("ell_max", shell.ell_max);
    Ok(())
}

fn dispatch(name: &str, run: &mut Run) -> CmdResult {
    match name {
        "measure-gen" => measure_gen(run),
        "measure-kato" => measure_kato(run),
        "measure-dim" => measure_dim(run),
        "spectrum-scan" => spectrum_scan(run),
        "bound-states" => bound_states(run),
        "zero-check" => zero_check(run),
        "high-energy" => high_energy(run),
        "evolve" => evolve(run),
        "wiener-report" => wiener_report(run),
        "oracle-table" => oracle_table(run),
        other => Err(ConfigError(format!("unknown subcommand {other:?}")).into()),
    }
}

/// Runs one subcommand and writes `manifest.json`; returns the exit status.
pub fn run(name: &str, cfg: &RunConfig) -> u8 {
    let out = match cfg.get("out", ".".to_string()) {
        Ok(o) => PathBuf::from(o),
        Err(e) => {
            eprintln!("bsdisp {name}: {e}");
            return EXIT_VALIDATION;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("bsdisp {name}: cannot create {}: {e}", out.display());
        return EXIT_VALIDATION;
    }
    let mut run = Run { cfg, out: out.clone(), artifacts: vec![], results: Map::new() };
    let outcome = dispatch(name, &mut run);
    let (code, status, failure) = match &outcome {
        Ok(()) => (EXIT_OK, "ok", Value::Null),
        Err(f) => (f.exit_code(), "failed", json!({ "kind": f.kind(), "message": f.message() })),
    };
    let manifest = json!({
        "command": name,
        "status": status,
        "exit_code": code,
        "config": cfg.used(),
        "unused_settings": cfg.unused(),
        "artifacts": run.artifacts,
        "results": Value::Object(run.results),
        "failure": failure,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("json");
    if let Err(e) = std::fs::write(out.join("manifest.json"), text + "\n") {
        eprintln!("bsdisp {name}: cannot write manifest: {e}");
    }
    if let Err(f) = &outcome {
        eprintln!("bsdisp {name}: {}", f.message());
    }
    code
}

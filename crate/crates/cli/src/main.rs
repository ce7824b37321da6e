use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod config;

use config::RunConfig;


#[derive(Args, Clone, Default)]
struct Common {
    /// key = value config file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for the manifest and data files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra settings, key=value
    #[arg(long = "set", global = true, num_args = 1..)]
    set: Vec<String>,
    /// Measure JSON file
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Shell parameters, e.g. a=1 g=1 n=400
    #[arg(long, global = true, num_args = 1..)]
    shell: Vec<String>,
    /// Cantor parameters, e.g. s=0.3 depth=4 m=1
    #[arg(long, global = true, num_args = 1..)]
    cantor: Vec<String>,
    /// Uniform ball sample parameters, e.g. r=1 m=1 k=20
    #[arg(long, global = true, num_args = 1..)]
    ball: Vec<String>,
    /// Panel self-term rule: disc or lattice
    #[arg(long, global = true)]
    diag_rule: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a shell, Cantor or ball measure
    MeasureGen {
        #[arg(long)]
        output: Option<String>,
    },
    /// Kato norm and local Kato modulus
    MeasureKato {
        /// Radii for the local modulus (start:stop:count[:log] or a list)
        #[arg(long)]
        radii: Option<String>,
    },
    /// Ball-mass profile, dimension fit and the dyadic Kato majorant
    MeasureDim {
        #[arg(long)]
        radii: Option<String>,
    },
    /// Inverse norms of I + A along real and imaginary spectral parameters
    SpectrumScan {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        kappa: Option<String>,
    },
    /// Bound states from sign changes of the axis eigenvalues
    BoundStates {
        /// kappa grid start:stop:count
        #[arg(long)]
        kappa: Option<String>,
    },
    /// Threshold verdict from refinement of min singular value of I + A(0)
    ZeroCheck {
        /// Panel counts for the shell refinement levels
        #[arg(long)]
        levels: Option<String>,
        /// Measure files, coarse to fine (instead of --shell)
        #[arg(long, num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
    /// High-energy decay of the L2(V) norm and of powers of A
    HighEnergy {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        power: Option<usize>,
    },
    /// Time evolution through the Stone formula
    Evolve {
        /// Times (start:stop:count[:log] or a list)
        #[arg(long)]
        t: Option<String>,
        /// Radii of the probe shells around the source center
        #[arg(long)]
        probes: Option<String>,
        /// Run even when the threshold is not regular
        #[arg(long)]
        force: bool,
    },
    /// The five Wiener parameters
    WienerReport {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long = "K")]
        k: Option<f64>,
        #[arg(long)]
        eps_fit: Option<f64>,
    },
    /// Partial-wave table for a shell
    OracleTable {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        kappa: Option<String>,
    },
}

fn build_config(common: &Common, specific: &[(&str, Option<String>)]) -> config::ConfigResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.set("out", &o.display().to_string())?;
    }
    if let Some(s) = common.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(i) = &common.input {
        cfg.set("input", &i.display().to_string())?;
    }
    if let Some(r) = &common.diag_rule {
        cfg.set("diag_rule", r)?;
    }
    cfg.apply_pairs(Some("shell"), &common.shell)?;
    cfg.apply_pairs(Some("cantor"), &common.cantor)?;
    cfg.apply_pairs(Some("ball"), &common.ball)?;
    cfg.apply_pairs(None, &common.set)?;
    for (k, v) in specific {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    Ok(cfg)
}

#[derive(Parser)]
#[command(name = "bsdisp", version, about = "Birman-Schwinger spectral scans, dispersive evolution and Wiener parameters for discrete measures")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let s = |v: &Option<String>| v.clone();
    let f = |v: &Option<f64>| v.map(|x| x.to_string());
    let (name, specific): (&str, Vec<(&str, Option<String>)>) = match &cli.command {
        Command::MeasureGen { output } => ("measure-gen", vec![("output", s(output))]),
        Command::MeasureKato { radii } => ("measure-kato", vec![("radii", s(radii))]),
        Command::MeasureDim { radii } => ("measure-dim", vec![("radii", s(radii))]),
        Command::SpectrumScan { lambda, kappa } => ("spectrum-scan", vec![("lambda", s(lambda)), ("kappa", s(kappa))]),
        Command::BoundStates { kappa } => ("bound-states", vec![("kappa", s(kappa))]),
        Command::ZeroCheck { levels, inputs } => {
            let joined = (!inputs.is_empty()).then(|| inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","));
            ("zero-check", vec![("levels", s(levels)), ("inputs", joined)])
        }
        Command::HighEnergy { lambda, power } => ("high-energy", vec![("lambda", s(lambda)), ("power", power.map(|p| p.to_string()))]),
        Command::Evolve { t, probes, force } => {
            ("evolve", vec![("t", s(t)), ("probes", s(probes)), ("force", force.then(|| "true".to_string()))])
        }
        Command::WienerReport { lambda, l, k, eps_fit } => {
            ("wiener-report", vec![("lambda", s(lambda)), ("L", f(l)), ("K", f(k)), ("eps_fit", f(eps_fit))])
        }
        Command::OracleTable { lambda, kappa } => ("oracle-table", vec![("lambda", s(lambda)), ("kappa", s(kappa))]),
    };
    let cfg = match build_config(&cli.common, &specific) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("bsdisp {name}: {e}");
            return ExitCode::from(2);
        }
    };
    ExitCode::from(commands::run(name, &cfg))
}

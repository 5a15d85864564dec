use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use riesz_torus::energy::{discrete_energy, mollified_discrete_energy};
use riesz_torus::experiments::{mollify_config, mollify_setup, run, ExperimentKind, ExperimentSpec, Report};
use riesz_torus::minimize::{minimize_energy, InitKind, MinimizeOptions};
use riesz_torus::potential::{Ewald, MollifiedPotential, RieszSpec};
use riesz_torus::torus::Configuration;
use riesz_torus::transport::{default_grid, dinf_estimate, grid_for};
use riesz_torus::{Error, Result};

#[derive(Parser)]
#[command(name = "riesz-lab", version, about = "Periodic Riesz energies and transport experiments on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete energy of a configuration file, optionally mollified.
    Energy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Gradient-descent minimizer of the discrete energy.
    Minimize {
        #[arg(long)]
        d: usize,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_init, default_value = "perturbed_lattice")]
        init: InitKind,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-7)]
        gradient_tol: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Where to write the minimizing configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-sided d_∞ bracket between a configuration and the uniform measure.
    Dinf {
        #[arg(long)]
        config: PathBuf,
        /// Grid resolution; rounded up so that N divides m^d.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Mollifier ladder, ε selection and certificate for a configuration.
    Mollify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long = "A")]
        a: Option<f64>,
        #[arg(long = "M", default_value_t = 2.0)]
        depth: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Runs one experiment and writes its report.
    Verify(VerifyArgs),
    /// Closed-form and split-invariance checks of the periodic potential.
    PotentialCheck {
        #[arg(long)]
        d: usize,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Flat `key=value` file; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long = "N-list", alias = "n-list")]
    n_list: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
    /// Any other spec field, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_init(s: &str) -> std::result::Result<InitKind, String> {
    match s {
        "lattice" => Ok(InitKind::Lattice),
        "random" => Ok(InitKind::Random),
        "perturbed_lattice" => Ok(InitKind::PerturbedLattice),
        _ => Err(format!("unknown init `{s}`")),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn verify_spec(args: &VerifyArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(ExperimentKind::PotentialAccuracy, 1, 0.0);
    if let Some(path) = &args.spec {
        spec.apply_text(&std::fs::read_to_string(path)?)?;
    }
    let flags = [
        ("kind", args.kind.clone()),
        ("d", args.d.map(|v| v.to_string())),
        ("s", args.s.map(|v| v.to_string())),
        ("N_list", args.n_list.clone()),
        ("seeds", args.seeds.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            spec.set(k, &v)?;
        }
    }
    if let Some(dir) = &args.out_dir {
        spec.out_dir = Some(dir.clone());
    }
    spec.svg |= args.svg;
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Usage(format!("--set expects key=value, got `{kv}`")))?;
        spec.set(k.trim(), v.trim())?;
    }
    Ok(spec)
}

fn summarize(report: &Report) {
    println!("{} d={} s={} rows={}", report.kind.name(), report.d, report.s, report.rows.len());
    for c in &report.checks {
        println!("  {:<4} {:<32} {:>14.6e}  {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    if let Some(f) = &report.fit {
        println!("  fit slope {:.4} ± {:.4}, corridor [{}, {}]", f.slope, f.stderr, f.corridor[0], f.corridor[1]);
    }
    for n in &report.notes {
        println!("  note: {n}");
    }
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Energy { config, s, eps, tol } => {
            let c = Configuration::load(&config)?;
            let ew = Ewald::for_tolerance(&RieszSpec::new(c.dim(), s)?, tol)?;
            match eps {
                Some(e) => print_json(&mollified_discrete_energy(&c, &MollifiedPotential::new(&ew, e)?)?)?,
                None => print_json(&discrete_energy(&c, &ew)?)?,
            }
        }
        Command::Minimize { d, s, n, restarts, seed, init, max_iters, gradient_tol, tol, out } => {
            let ew = Ewald::for_tolerance(&RieszSpec::new(d, s)?, tol)?;
            let opts = MinimizeOptions { restarts, seed, init, max_iters, gradient_tol, ..Default::default() };
            let r = minimize_energy(n, &ew, &opts)?;
            if let Some(path) = out {
                r.config.save(&path)?;
            }
            print_json(&serde_json::json!({
                "N": n, "d": d, "s": s, "energy": r.energy, "grad_norm": r.grad_norm,
                "iterations": r.iterations, "restarts_used": r.restarts_used, "converged": r.converged,
            }))?;
            return Ok(r.converged);
        }
        Command::Dinf { config, m } => {
            let c = Configuration::load(&config)?;
            let m = match m {
                Some(m) => grid_for(c.len(), c.dim(), m)?,
                None => default_grid(c.len(), c.dim())?,
            };
            print_json(&dinf_estimate(&c, m)?)?;
        }
        Command::Mollify { config, s, lambda, a, depth, tol } => {
            let c = Configuration::load(&config)?;
            let mut spec = ExperimentSpec::new(ExperimentKind::Theorem1Mollify, c.dim(), s);
            spec.lambda = lambda;
            spec.a = a;
            spec.depth = depth;
            spec.ewald_tol = tol;
            let ew = Ewald::for_tolerance(&spec.riesz()?, tol)?;
            let setup = mollify_setup(&spec, &ew)?;
            let out = mollify_config(&c, &ew, &setup)?;
            print_json(&serde_json::json!({ "setup": setup, "certificate": out.selection.certificate, "transport": out.transport }))?;
            return Ok(out.transport.within_half_eps);
        }
        Command::Verify(args) => {
            let spec = verify_spec(&args)?;
            let report = run(&spec)?;
            summarize(&report);
            if let Some(dir) = &spec.out_dir {
                for p in report.write(dir)? {
                    println!("wrote {}", p.display());
                }
            }
            return Ok(report.pass);
        }
        Command::PotentialCheck { d, s, tol, samples, seed } => {
            let mut spec = ExperimentSpec::new(ExperimentKind::PotentialAccuracy, d, s);
            spec.ewald_tol = tol;
            spec.samples = samples;
            spec.seeds = vec![seed];
            let report = run(&spec)?;
            summarize(&report);
            return Ok(report.pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

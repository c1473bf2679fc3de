use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spectral_milstein::harness::{
    count_table, emit_csv, estimate_rms_error, metadata_path, write_metadata, ExperimentConfig,
};
use spectral_milstein::noise::RNG_NAME;
use spectral_milstein::schemes::{iterated_integral_oracle, run_scheme, SchemeConfig, SchemeKind};
use spectral_milstein::{preset, Error, MasterPath, Result};

#[derive(Parser)]
#[command(
    name = "spde",
    version,
    about = "Spectral Galerkin SPDE integrators and convergence studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and dump the final spectral field.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "reacdiff1d")]
        problem: String,
        #[arg(long, default_value = "milstein")]
        scheme: String,
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Time steps; defaults to the problem's coupling for the scheme.
        #[arg(long)]
        m: Option<usize>,
        /// Noise modes per axis; defaults to N.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Strong-convergence study over the config's ladder; writes CSV and metadata.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the simulated iterated integral with its closed form.
    IdentityTest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "reacdiff1d")]
        problem: String,
        /// Spatial modes (the nodes where the identity is checked).
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, default_value_t = 1000)]
        substeps: usize,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
    },
    /// Random-variable accounting for the config's ladder.
    Count {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("--config is required for this command".into()))?;
    let mut config = ExperimentConfig::from_file(path)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    if let Some(t) = common.threads {
        config.threads = Some(t);
    }
    Ok(config)
}

fn fmt_slope(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |s| format!("{s:.3}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            problem,
            scheme,
            n,
            m,
            k,
        } => {
            let problem = match &common.config {
                Some(_) => load_config(&common)?.resolve_problem()?,
                None => preset(&problem)?,
            };
            let kind: SchemeKind = scheme.parse()?;
            let mut config = SchemeConfig::recommended(&problem, kind, n);
            if let Some(m) = m {
                config.steps = m;
            }
            if let Some(k) = k {
                config.k = k;
            }
            let seed = common.seed.unwrap_or(0);
            let spec = problem.noise_with_k(config.k);
            let path =
                MasterPath::generate(seed, &spec, config.steps.max(1), config.k, problem.horizon)?;
            let out = run_scheme(&problem, &config, &path)?;
            println!(
                "{} {} N={} M={} K={} seed={} draws={} |Y_M|_H={:.12e}",
                problem.name,
                kind,
                config.n,
                config.steps,
                config.k,
                seed,
                out.draws,
                out.state.spectral_norm()?
            );
            if let Some(file) = common.out {
                let w = File::create(&file).map_err(|source| Error::Write {
                    path: file.clone(),
                    source,
                })?;
                out.state.write_to(BufWriter::new(w))?;
                println!("final field written to {}", file.display());
            }
        }
        Command::Converge { common } => {
            let config = load_config(&common)?;
            let problem = config.resolve_problem()?;
            let report = estimate_rms_error(&problem, &config)?;
            println!(
                "{:<18} {:>4} {:>8} {:>4} {:>14} {:>12} {:>10} {:>6}",
                "scheme", "N", "M", "K", "randoms", "rms_error", "stderr", "failed"
            );
            for r in &report.rows {
                println!(
                    "{:<18} {:>4} {:>8} {:>4} {:>14} {:>12.4e} {:>10.2e} {:>6}",
                    r.scheme.name(),
                    r.n,
                    r.m,
                    r.k,
                    r.random_variables,
                    r.rms_error,
                    r.stderr,
                    r.failed_paths
                );
            }
            for s in &report.slopes {
                println!(
                    "slope {}: vs N {}, vs random variables {}",
                    s.scheme,
                    fmt_slope(s.vs_n),
                    fmt_slope(s.vs_random_variables)
                );
            }
            if report.reference_failures > 0 {
                eprintln!(
                    "warning: reference went non-finite on {} paths",
                    report.reference_failures
                );
            }
            if let Some(out) = &config.out {
                if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                emit_csv(&report, out)?;
                let meta = metadata_path(out);
                write_metadata(&report, &config, &meta)?;
                println!("wrote {} and {}", out.display(), meta.display());
            }
        }
        Command::IdentityTest {
            common,
            problem,
            n,
            k,
            h,
            substeps,
            samples,
        } => {
            let problem = preset(&problem)?;
            let basis = problem.basis(n)?;
            let spec = problem.noise_with_k(k);
            let v = basis.sample(|x| {
                0.25 + 0.5
                    * x.iter()
                        .map(|xi| (std::f64::consts::PI * xi).sin())
                        .product::<f64>()
            });
            let seed = common.seed.unwrap_or(0);
            let r = iterated_integral_oracle(
                &v,
                &problem.pair,
                &spec,
                &basis,
                h,
                substeps,
                samples,
                seed,
            )?;
            println!(
                "{} K={k} h={h} substeps={substeps} samples={samples} seed={seed}",
                problem.name
            );
            println!("max |simulated - closed|     {:.3e}", r.max_abs_difference);
            println!("first moment, max |z|        {:.3}", r.first_moment_z);
            println!(
                "second moment, max rel error {:.3e}",
                r.second_moment_rel_error
            );
        }
        Command::Count { common } => {
            let config = load_config(&common)?;
            let problem = config.resolve_problem()?;
            println!(
                "{:<18} {:>4} {:>10} {:>4} {:>16}",
                "scheme", "N", "M", "K", "random_variables"
            );
            for r in count_table(&problem, &config) {
                println!(
                    "{:<18} {:>4} {:>10} {:>4} {:>16}",
                    r.scheme.name(),
                    r.n,
                    r.m,
                    r.k,
                    r.random_variables
                );
            }
            println!("rng: {RNG_NAME}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

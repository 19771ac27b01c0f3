//! `hds`: run variable selection and optimization experiments from the shell.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hds_core::bench::BenchmarkKind;
use hds_core::harness::{
    grid_search_thresholds, read_config, rows, run_experiment, summarize, sweep, write_config,
    write_csv_to, write_summary_to, ExperimentConfig, Method, RunResult, SweepParam,
};
use hds_core::Error;

#[derive(Parser)]
#[command(
    name = "hds",
    version,
    about = "Hierarchical diagonal sampling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run variable selection trials described by a config file.
    Select {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Select variables, then run GP-UCB on the recovered ones.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides the config's optimization horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Run one benchmark suite with default settings.
    Bench {
        #[arg(long)]
        suite: BenchmarkKind,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Ambient dimension.
        #[arg(long = "dim", short = 'D')]
        dim: Option<usize>,
        /// Number of active variables.
        #[arg(long = "active", short = 'd')]
        d: Option<usize>,
        #[arg(long)]
        noise_var: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Template config; the flags above override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat an experiment over several values of one setting.
    Sweep {
        /// One of D, d, noise_var, method.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Template config; defaults to the GP suite with hds_fdt.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search the stopping thresholds of the configured method.
    TuneThresholds {
        #[arg(long)]
        config: PathBuf,
        /// Writes the config with the chosen thresholds to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl Failure {
    fn config(error: Error) -> Self {
        Failure { code: 2, error }
    }

    fn runtime(error: Error) -> Self {
        Failure { code: 3, error }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn load(path: &Path) -> Outcome<ExperimentConfig> {
    read_config(path).map_err(|e| match e {
        Error::Io(io) => Failure::config(Error::Config {
            key: "<file>".into(),
            message: format!("{}: {io}", path.display()),
        }),
        other => Failure::config(other),
    })
}

fn checked(cfg: ExperimentConfig) -> Outcome<ExperimentConfig> {
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

fn output(out: Option<&Path>) -> Outcome<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::runtime(e.into()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> Outcome<()> {
    let results = run_experiment(cfg).map_err(Failure::runtime)?;
    write_csv_to(&rows(&results, cfg), output(out)?).map_err(Failure::runtime)?;
    report(cfg, &results)
}

fn report(cfg: &ExperimentConfig, results: &[RunResult]) -> Outcome<()> {
    let s = summarize(cfg.method.name(), results);
    eprintln!(
        "{} on {} (D={}, d={}): accuracy {:.3} ± {:.3}, selection samples {:.1} ± {:.1} over {} trials",
        cfg.method,
        cfg.benchmark,
        cfg.dim,
        cfg.d,
        s.mean_accuracy,
        s.se_accuracy,
        s.mean_samples,
        s.se_samples,
        s.trials
    );
    for r in results {
        if let Some(e) = &r.error {
            eprintln!("trial {} (seed {}): {e}", r.trial, r.seed);
        }
    }
    if s.errors > 0 {
        return Err(Failure::runtime(Error::Numerical(format!(
            "{} of {} trials failed",
            s.errors, s.trials
        ))));
    }
    Ok(())
}

fn run(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Select { run } => {
            let mut cfg = load(&run.config)?;
            cfg.horizon = 0;
            if let Some(seed) = run.seed {
                cfg.base_seed = seed;
            }
            execute(&checked(cfg)?, run.out.as_deref())
        }
        Command::Optimize { run, horizon } => {
            let mut cfg = load(&run.config)?;
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if let Some(seed) = run.seed {
                cfg.base_seed = seed;
            }
            if cfg.horizon == 0 {
                return Err(Failure::config(Error::Config {
                    key: "horizon".into(),
                    message: "optimization needs a horizon of at least 1".into(),
                }));
            }
            execute(&checked(cfg)?, run.out.as_deref())
        }
        Command::Bench {
            suite,
            method,
            trials,
            dim,
            d,
            noise_var,
            seed,
            config,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => load(&p)?,
                None => ExperimentConfig::new(suite, method),
            };
            cfg.benchmark = suite;
            cfg.method = method;
            cfg.trials = trials;
            if let Some(req) = suite.required_d() {
                cfg.d = req;
            }
            cfg.dim = dim.unwrap_or(cfg.dim);
            cfg.d = d.unwrap_or(cfg.d);
            cfg.noise_var = noise_var.unwrap_or(cfg.noise_var);
            cfg.base_seed = seed.unwrap_or(cfg.base_seed);
            execute(&checked(cfg)?, out.as_deref())
        }
        Command::Sweep {
            param,
            values,
            config,
            trials,
            out,
        } => {
            let param: SweepParam = param.parse().map_err(Failure::config)?;
            let mut cfg = match config {
                Some(p) => load(&p)?,
                None => ExperimentConfig::new(BenchmarkKind::Gp, Method::HdsFdt),
            };
            cfg.trials = trials.unwrap_or(cfg.trials);
            let cfg = checked(cfg)?;
            // Reject bad values before spending time on the good ones.
            for v in &values {
                param.apply(&mut cfg.clone(), v).map_err(Failure::config)?;
            }
            let table = sweep(&cfg, param, &values).map_err(Failure::runtime)?;
            write_summary_to(&table, output(out.as_deref())?).map_err(Failure::runtime)?;
            let errors: usize = table.iter().map(|r| r.errors).sum();
            if errors > 0 {
                return Err(Failure::runtime(Error::Numerical(format!(
                    "{errors} trials failed across the sweep"
                ))));
            }
            Ok(())
        }
        Command::TuneThresholds { config, out } => {
            let mut cfg = load(&config)?;
            let choice = grid_search_thresholds(&cfg).map_err(Failure::runtime)?;
            let summaries: Vec<_> = choice.table.iter().map(|(_, _, s)| s.clone()).collect();
            write_summary_to(&summaries, io::stderr().lock()).map_err(Failure::runtime)?;
            println!(
                "{{\"theta1\": {}, \"theta0\": {}}}",
                choice.theta1, choice.theta0
            );
            if let Some(p) = out {
                cfg.theta1 = choice.theta1;
                cfg.theta0 = choice.theta0;
                write_config(&cfg, p).map_err(Failure::runtime)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}

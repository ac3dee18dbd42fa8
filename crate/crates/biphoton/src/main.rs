use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biphoton::commands::{self, AnalyzeOptions, FitRequest, Format};
use biphoton::config::{self, ExperimentConfig};
use biphoton::error::CliError;
use biphoton::io;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "biphoton",
    version,
    about = "Biphoton wave packet model, simulator and analysis"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Model two-photon wave packet with summary sidecar.
    Wavepacket {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Detection bin width in ns.
        #[arg(long)]
        bins: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Model widths and rates over one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `name=v1,v2,...`; falls back to the config's `sweep` section.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Synthesize time tags and their coincidence histogram.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Histogram bin width in ns.
        #[arg(long)]
        bins: Option<f64>,
        /// Number of trials.
        #[arg(long)]
        trials: Option<u64>,
        /// Histogram output (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Time-tag output; defaults to `<out stem>.tags.csv`.
        #[arg(long)]
        tags: Option<PathBuf>,
    },
    /// Widths, SBR, nonclassicality and rates from a histogram or tag file.
    Analyze {
        #[arg(long, alias = "hist")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Moving-average length in bins.
        #[arg(long, default_value_t = 4)]
        smoothing: usize,
        /// Skip the model template even when a config is available.
        #[arg(long)]
        no_model: bool,
    },
    /// Least-squares fit of the model to a histogram.
    Fit {
        #[arg(long, alias = "hist")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Free parameters, e.g. `omega_c,amplitude,baseline`.
        #[arg(long, default_value = "omega_c,amplitude,baseline")]
        free: String,
        /// Starting values, e.g. `omega_c=0.5`.
        #[arg(long)]
        init: Option<String>,
        /// Box constraints, e.g. `omega_c=0.3:0.7`.
        #[arg(long)]
        bounds: Option<String>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Wavepacket {
            config,
            out,
            bins,
            format,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(b) = bins {
                cfg.acquisition.bin_width_ns = b;
                cfg.validate()?;
            }
            commands::cmd_wavepacket(&cfg, &out, format)?;
        }
        Cmd::Sweep {
            config,
            sweep,
            out,
            format,
        } => {
            let cfg = load_config(config.as_deref())?;
            let sweep = match (sweep, &cfg.sweep) {
                (Some(s), _) => config::parse_sweep(&s)?,
                (None, Some(s)) => s.clone(),
                (None, None) => {
                    return Err(CliError::Config(
                        "no sweep given (use --sweep or a `sweep` section)".into(),
                    ))
                }
            };
            commands::cmd_sweep(&cfg, &sweep, &out, format)?;
        }
        Cmd::Simulate {
            config,
            seed,
            bins,
            trials,
            out,
            tags,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.acquisition.rng_seed = s;
            }
            if let Some(b) = bins {
                cfg.acquisition.bin_width_ns = b;
            }
            if let Some(n) = trials {
                cfg.acquisition.n_trials = n;
            }
            cfg.validate()?;
            let tags = tags.unwrap_or_else(|| commands::tags_path(&out));
            let summary = commands::cmd_simulate(&cfg, &out, &tags)?;
            eprintln!(
                "{} records, {} triggers, {} coincidences",
                summary.n_records, summary.n_triggers, summary.total_coincidences
            );
        }
        Cmd::Analyze {
            input,
            config,
            out,
            smoothing,
            no_model,
        } => {
            let result = (|| {
                let over = match config {
                    Some(p) => Some(load_config(Some(&p))?),
                    None => None,
                };
                let (hist, cfg) = commands::load_input(&input, over.as_ref())?;
                let opts = AnalyzeOptions {
                    smoothing,
                    use_model: !no_model,
                    ..Default::default()
                };
                commands::analyze(&hist, cfg.as_ref(), &opts)
            })();
            match result {
                Ok(doc) => io::write_json(&out, &doc)?,
                Err(e) => {
                    io::write_json(&out, &commands::error_report(&e))?;
                    return Err(e);
                }
            }
        }
        Cmd::Fit {
            input,
            config,
            out,
            free,
            init,
            bounds,
            max_iterations,
        } => {
            let over = match config {
                Some(p) => Some(load_config(Some(&p))?),
                None => None,
            };
            let (hist, cfg) = commands::load_input(&input, over.as_ref())?;
            let cfg = cfg.ok_or_else(|| {
                CliError::Config("fit needs a model config (--config or histogram metadata)".into())
            })?;
            let mut req = FitRequest {
                free: commands::parse_free(&free)?,
                init: init
                    .as_deref()
                    .map(commands::parse_assignments)
                    .transpose()?
                    .unwrap_or_default(),
                bounds: bounds
                    .as_deref()
                    .map(commands::parse_bounds)
                    .transpose()?
                    .unwrap_or_default(),
                ..Default::default()
            };
            if let Some(n) = max_iterations {
                req.options.max_iterations = n;
            }
            let (res, doc) = commands::fit(&hist, &cfg, &req)?;
            io::write_json(&out, &doc)?;
            if !res.converged {
                return Err(CliError::NotConverged(res.iterations));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

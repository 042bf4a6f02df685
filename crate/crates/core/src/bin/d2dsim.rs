//! `d2dsim`: closed-form sweeps, Monte Carlo runs and figure presets.
//!
//! Exit codes: 0 ok, 2 config error, 3 runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use d2d_discovery::config::{parse_config, preset, Series, FIGURE_PRESETS, PRESET_NAMES};
use d2d_discovery::montecarlo::{analytic_sweep, run_trial_traced, sweep, ExperimentConfig};
use d2d_discovery::protocol::{write_trace, InterfererModel, SignalingMode};
use d2d_discovery::report::{write_all, Columns};

#[derive(Parser, Debug)]
#[command(
    name = "d2dsim",
    version,
    about = "D2D discovery simulator and closed-form evaluator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Named preset, used in place of a config file.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Worker threads; defaults to the available hardware parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true)]
    mode: Option<Mode>,

    #[arg(long, global = true)]
    interferers: Option<Interferers>,

    #[arg(long, global = true)]
    shadowing: Option<Switch>,

    /// Write the slot trace of trial 0 at the first sweep point.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed forms only.
    Analytic,
    /// Monte Carlo only.
    Simulate,
    /// Monte Carlo and closed forms side by side.
    Compare,
    /// Regenerate the CSVs behind figure presets (fig2..fig6 or `all`).
    Figures {
        #[arg(default_value = "all")]
        names: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Mode {
    SingleMessage,
    FullSignaling,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Interferers {
    Saturated,
    ContentionOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Config(m) => {
                eprintln!("d2dsim: {m}");
                ExitCode::from(2)
            }
            Failure::Runtime(m) => {
                eprintln!("d2dsim: {m}");
                ExitCode::from(3)
            }
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// A preset or file resolved into output jobs.
struct Job {
    dir: PathBuf,
    preset: String,
    series: Series,
}

impl Cli {
    fn apply_overrides(&self, c: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(m) = self.mode {
            c.signaling = match m {
                Mode::SingleMessage => SignalingMode::SingleMessage,
                Mode::FullSignaling => SignalingMode::FullSignaling,
            };
        }
        if let Some(i) = self.interferers {
            c.interferers = match i {
                Interferers::Saturated => InterfererModel::Saturated,
                Interferers::ContentionOnly => InterfererModel::ContentionOnly,
            };
        }
        if let Some(s) = self.shadowing {
            c.channel.shadowing_enabled = matches!(s, Switch::On);
        }
    }

    fn named_preset(name: &str) -> Result<Vec<Series>, Failure> {
        preset(name).ok_or_else(|| {
            Failure::Config(format!(
                "unknown preset `{name}`; expected one of {}",
                PRESET_NAMES.join(", ")
            ))
        })
    }

    fn jobs_under(out: &Path, preset_name: &str, series: Vec<Series>) -> Vec<Job> {
        series
            .into_iter()
            .map(|s| Job {
                dir: if s.label.is_empty() {
                    out.to_path_buf()
                } else {
                    out.join(&s.label)
                },
                preset: preset_name.to_string(),
                series: s,
            })
            .collect()
    }

    fn resolve(&self) -> Result<Vec<Job>, Failure> {
        let mut jobs = match &self.command {
            Command::Figures { names } => {
                if self.config.is_some() {
                    return Err(Failure::Config("`figures` runs presets and takes no --config".into()));
                }
                let names: Vec<&str> = if names.iter().any(|n| n == "all") {
                    FIGURE_PRESETS.to_vec()
                } else {
                    names.iter().map(String::as_str).collect()
                };
                let mut jobs = Vec::new();
                for name in names {
                    if !FIGURE_PRESETS.contains(&name) {
                        return Err(Failure::Config(format!(
                            "unknown figure `{name}`; expected one of {} or all",
                            FIGURE_PRESETS.join(", ")
                        )));
                    }
                    jobs.extend(Self::jobs_under(&self.out.join(name), name, Self::named_preset(name)?));
                }
                jobs
            }
            _ => match (&self.config, &self.preset) {
                (Some(_), Some(_)) => {
                    return Err(Failure::Config("--config and --preset are mutually exclusive".into()));
                }
                (Some(path), None) => {
                    let text = fs::read_to_string(path)
                        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                    let config =
                        parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                    Self::jobs_under(
                        &self.out,
                        "",
                        vec![Series {
                            label: String::new(),
                            config,
                        }],
                    )
                }
                (None, Some(name)) => Self::jobs_under(&self.out, name, Self::named_preset(name)?),
                (None, None) => Self::jobs_under(&self.out, "default", Self::named_preset("default")?),
            },
        };
        for job in &mut jobs {
            self.apply_overrides(&mut job.series.config);
            // closed forms are cheap; running them here surfaces domain errors as config errors
            analytic_sweep(&job.series.config).map_err(config_err)?;
        }
        Ok(jobs)
    }

    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Analytic => "analytic",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Figures { .. } => "figures",
        }
    }

    fn run(&self) -> Result<(), Failure> {
        if let Some(k) = self.jobs {
            if k == 0 {
                return Err(Failure::Config("--jobs must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(runtime_err)?;
        }
        let jobs = self.resolve()?;
        let cols = match self.command {
            Command::Analytic => Columns {
                empirical: false,
                analytic: true,
            },
            Command::Simulate => Columns {
                empirical: true,
                analytic: false,
            },
            Command::Compare | Command::Figures { .. } => Columns::BOTH,
        };

        if let Some(path) = &self.trace {
            if let Some(job) = jobs.first() {
                write_first_trace(&job.series.config, path)?;
            }
        }

        for job in &jobs {
            let c = &job.series.config;
            let records = if cols.empirical {
                sweep(c).map_err(runtime_err)?
            } else {
                analytic_sweep(c).map_err(runtime_err)?
            };
            let meta = [
                ("command", self.command_name().to_string()),
                ("preset", job.preset.clone()),
                ("series", job.series.label.clone()),
            ];
            write_all(&job.dir, c, &records, cols, &meta)
                .map_err(|e| Failure::Runtime(format!("writing {}: {e}", job.dir.display())))?;
        }
        Ok(())
    }
}

fn write_first_trace(config: &ExperimentConfig, path: &Path) -> Result<(), Failure> {
    let point = match &config.sweep {
        Some(s) => config.at_sweep_value(s.axis, s.values[0]).map_err(config_err)?,
        None => config.clone(),
    };
    let (_, outcomes) = run_trial_traced(&point, 0).map_err(runtime_err)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(runtime_err)?;
    }
    let file = fs::File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    write_trace(&outcomes, file).map_err(runtime_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}

//! Command line front end.
//!
//! Every subcommand reads an optional TOML [`RunConfig`], applies its own
//! flags on top, and writes either to standard output or, with `--output`,
//! into a directory together with the resolved configuration
//! (`config.toml`). Re-running with `--config <dir>/config.toml` reproduces
//! the outputs byte for byte.
//!
//! Exit codes: 0 on success, 1 on domain errors (including a run that ends
//! without a secure key), 2 on usage and configuration errors.

pub mod commands;
pub mod config;
pub mod fixtures;
pub mod output;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::CommandResult;
pub use config::{Format, RunConfig};
pub use output::{Output, Table, SCHEMA_VERSION};

use crate::error::Error;
use crate::timetag::{PairingPolicy, TimetagFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fbqkd", version, about = "Frequency-bin qudit BBM92 link simulator and analysis tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LinkArgs {
    /// Qudit dimension d.
    #[arg(long, short)]
    pub dimension: Option<u32>,
    /// On-chip pump power, mW.
    #[arg(long)]
    pub power: Option<f64>,
    /// Coincidence window half width: pairs with |t_A - t_B| <= window count, ps.
    #[arg(long)]
    pub window: Option<f64>,
    /// Applied attenuation over both users, dB.
    #[arg(long)]
    pub attenuation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Exclusive,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StreamFormatArg {
    Binary,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic key rate, rates and coincidence matrices for one link.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        link: LinkArgs,
    },
    /// Key rate over the power/window grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dimensions to sweep (repeatable).
        #[arg(long = "dimension", short)]
        dimensions: Vec<u32>,
        /// dB.
        #[arg(long)]
        attenuation: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Optimized key rate versus attenuation, extinction and crossover.
    Range {
        #[command(flatten)]
        common: Common,
        #[arg(long = "dimension", short)]
        dimensions: Vec<u32>,
        /// Report the best dimension at this attenuation, dB.
        #[arg(long)]
        recommend_at: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Pack comb resonances from a JSI file into channels.
    Plan {
        #[command(flatten)]
        common: Common,
        /// JSI file (mode_index, coincidence_rate_hz, background_rate_hz).
        #[arg(long)]
        jsi: Option<PathBuf>,
        #[arg(long)]
        width: Option<u32>,
        /// Hz.
        #[arg(long)]
        rate_floor: Option<f64>,
    },
    /// Z and X basis vectors.
    Mubs {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        dimension: Option<u32>,
    },
    /// Monte Carlo time-tag stream.
    GenTimetags {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        link: LinkArgs,
        /// s.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, value_enum)]
        stream_format: Option<StreamFormatArg>,
    },
    /// Count coincidences in a time-tag file and compute the key rate.
    Ingest {
        #[command(flatten)]
        common: Common,
        input: Option<PathBuf>,
        /// Coincidence window half width, ps.
        #[arg(long)]
        window: Option<f64>,
        #[arg(long, value_enum)]
        pairing: Option<PairingArg>,
        /// Also histogram the delays and fit a Voigt profile.
        #[arg(long)]
        histogram: bool,
    },
    /// Synthetic JSI fixture.
    GenJsi {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Sweep { common, .. }
            | Command::Range { common, .. }
            | Command::Plan { common, .. }
            | Command::Mubs { common, .. }
            | Command::GenTimetags { common, .. }
            | Command::Ingest { common, .. }
            | Command::GenJsi { common } => common,
        }
    }
}

fn apply_link(cfg: &mut RunConfig, l: &LinkArgs) {
    if let Some(v) = l.dimension {
        cfg.link.dimension = v;
    }
    if let Some(v) = l.power {
        cfg.link.power_on_chip = v;
    }
    if let Some(v) = l.window {
        cfg.link.coincidence_window = v;
    }
    if let Some(v) = l.attenuation {
        cfg.link.applied_attenuation = v;
    }
}

/// Loads the configuration and applies the command line on top.
pub fn resolve(command: &Command) -> crate::Result<RunConfig> {
    let common = command.common();
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.output {
        cfg.output.directory = Some(o.clone());
    }
    if let Some(f) = common.format {
        cfg.output.format = f;
    }
    match command {
        Command::Simulate { link, .. } => apply_link(&mut cfg, link),
        Command::Sweep {
            dimensions,
            attenuation,
            workers,
            ..
        } => {
            if !dimensions.is_empty() {
                cfg.sweep.dimensions = dimensions.clone();
            }
            if let Some(a) = attenuation {
                cfg.sweep.attenuation = *a;
            }
            if workers.is_some() {
                cfg.sweep.workers = *workers;
            }
        }
        Command::Range {
            dimensions,
            recommend_at,
            workers,
            ..
        } => {
            if !dimensions.is_empty() {
                cfg.range.dimensions = dimensions.clone();
            }
            if recommend_at.is_some() {
                cfg.range.recommend_at = *recommend_at;
            }
            if workers.is_some() {
                cfg.sweep.workers = *workers;
            }
        }
        Command::Plan {
            jsi, width, rate_floor, ..
        } => {
            if jsi.is_some() {
                cfg.plan.jsi = jsi.clone();
            }
            if let Some(w) = width {
                cfg.plan.width = *w;
            }
            if let Some(f) = rate_floor {
                cfg.plan.rate_floor = *f;
            }
        }
        Command::Mubs { dimension, .. } => {
            if let Some(d) = dimension {
                cfg.link.dimension = *d;
            }
        }
        Command::GenTimetags {
            link,
            duration,
            stream_format,
            ..
        } => {
            apply_link(&mut cfg, link);
            if let Some(t) = duration {
                cfg.generator.duration = *t;
            }
            if let Some(f) = stream_format {
                cfg.generator.file_format = match f {
                    StreamFormatArg::Binary => TimetagFormat::Binary,
                    StreamFormatArg::Text => TimetagFormat::Text,
                };
            }
        }
        Command::Ingest {
            input,
            window,
            pairing,
            histogram,
            ..
        } => {
            if input.is_some() {
                cfg.ingest.input = input.clone();
            }
            if window.is_some() {
                cfg.ingest.window = *window;
            }
            if let Some(p) = pairing {
                cfg.ingest.pairing = match p {
                    PairingArg::Exclusive => PairingPolicy::Exclusive,
                    PairingArg::AllPairs => PairingPolicy::AllPairs,
                };
            }
            if *histogram {
                cfg.ingest.histogram = true;
            }
        }
        Command::GenJsi { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Argument(_) => EXIT_USAGE,
        _ => EXIT_DOMAIN,
    }
}

/// Data file written next to the tables by the generating commands.
fn data_file(command: &Command, cfg: &RunConfig) -> Option<&'static str> {
    match command {
        Command::GenTimetags { .. } => Some(match cfg.generator.file_format {
            TimetagFormat::Binary => "timetags.bin",
            TimetagFormat::Text => "timetags.txt",
        }),
        Command::GenJsi { .. } => Some("jsi.tsv"),
        _ => None,
    }
}

/// Runs one subcommand with resolved configuration.
pub fn execute(command: &Command, cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> crate::Result<i32> {
    let dir = cfg.output.directory.as_deref();
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let result = match (data_file(command, cfg), dir) {
        (Some(name), Some(d)) => {
            let mut f = BufWriter::new(File::create(d.join(name))?);
            let r = run_data_command(command, cfg, &mut f)?;
            f.flush()?;
            writeln!(stderr, "wrote {}", d.join(name).display())?;
            r
        }
        (Some(_), None) => {
            // the data file is the output; summaries would corrupt it
            run_data_command(command, cfg, stdout)?;
            return Ok(EXIT_OK);
        }
        (None, _) => match command {
            Command::Simulate { .. } => commands::cmd_simulate(cfg)?,
            Command::Sweep { .. } => commands::cmd_sweep(cfg)?,
            Command::Range { .. } => commands::cmd_range(cfg)?,
            Command::Plan { .. } => commands::cmd_plan(cfg)?,
            Command::Mubs { .. } => commands::cmd_mubs(cfg)?,
            Command::Ingest { .. } => commands::cmd_ingest(cfg)?,
            Command::GenTimetags { .. } | Command::GenJsi { .. } => unreachable!(),
        },
    };
    for p in result.output.emit(cfg.output.format, dir, stdout)? {
        writeln!(stderr, "wrote {}", p.display())?;
    }
    if let Some(d) = dir {
        let p = output::write_config_echo(d, cfg)?;
        writeln!(stderr, "wrote {}", p.display())?;
    }
    if result.secure == Some(false) {
        writeln!(stderr, "fbqkd: no secure key")?;
        return Ok(EXIT_DOMAIN);
    }
    Ok(EXIT_OK)
}

fn run_data_command(command: &Command, cfg: &RunConfig, out: &mut dyn Write) -> crate::Result<CommandResult> {
    match command {
        Command::GenTimetags { .. } => commands::cmd_gen_timetags(cfg, out),
        _ => commands::cmd_gen_jsi(cfg, out),
    }
}

/// Parses `args` (including the program name), runs and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let outcome = resolve(&cli.command).and_then(|cfg| execute(&cli.command, &cfg, stdout, stderr));
    match outcome {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_DOMAIN,
        Err(e) => {
            let _ = writeln!(stderr, "fbqkd: {e}");
            exit_code(&e)
        }
    }
}

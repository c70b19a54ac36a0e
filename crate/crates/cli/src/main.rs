//! `flownav`: simulate flights, replay them through the filter, evaluate
//! the estimates and inspect optical flow between two frames.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 data error, 4 semantic error.

mod commands;
mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use commands::Preset;

#[derive(Parser)]
#[command(
    name = "flownav",
    version,
    about = "GPS / inertial / optical-flow navigation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a default scenario configuration as JSON
    Config {
        #[arg(long, value_enum, default_value = "hover")]
        preset: Preset,
    },
    /// Generate truth, sensor logs and camera frames
    Simulate {
        /// scenario JSON; defaults to the preset
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "hover")]
        preset: Preset,
        /// overrides the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// number of consecutive seeds; with more than one, each run goes
        /// to <out>/seed_<n>
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay simulated flights through the navigation filter
    Fuse {
        /// scenario directories written by `simulate`
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// fuse optical flow (default)
        #[arg(long, overrides_with = "no_flow")]
        use_flow: bool,
        /// GPS / inertial only
        #[arg(long, action = ArgAction::SetTrue)]
        no_flow: bool,
        /// output directory; defaults to <scenario>/flow or <scenario>/noflow
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare navigation logs with the truth
    Eval {
        truth: PathBuf,
        #[arg(required = true)]
        navlogs: Vec<PathBuf>,
        /// scenario JSON for the reference path; defaults to config.json
        /// next to the truth file
        #[arg(long)]
        config: Option<PathBuf>,
        /// s; estimates before this time are ignored
        #[arg(long)]
        from_time: Option<f64>,
        /// fraction of the peak truth altitude below which samples are
        /// ignored
        #[arg(long)]
        min_altitude_fraction: Option<f64>,
        /// use every sample
        #[arg(long)]
        all_samples: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dense optical flow between two PGM frames
    Flow {
        frame_a: PathBuf,
        frame_b: PathBuf,
        /// flow parameters as JSON
        #[arg(long)]
        params: Option<PathBuf>,
        /// quiver arrow spacing, pixels
        #[arg(long, default_value_t = 8)]
        step: usize,
        /// pixels ignored at each border when taking the median
        #[arg(long, default_value_t = 8)]
        margin: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Config { preset } => commands::print_config(preset),
        Command::Simulate {
            config,
            preset,
            seed,
            runs,
            out,
        } => commands::simulate(config.as_deref(), preset, seed, runs, &out),
        Command::Fuse {
            scenarios,
            use_flow: _,
            no_flow,
            out,
        } => commands::fuse(&scenarios, !no_flow, out.as_deref()),
        Command::Eval {
            truth,
            navlogs,
            config,
            from_time,
            min_altitude_fraction,
            all_samples,
            out,
        } => {
            let mut window = if all_samples {
                flownav::eval::Window::all()
            } else {
                flownav::eval::Window::default()
            };
            if let Some(t) = from_time {
                window.from_time = t;
            }
            if let Some(f) = min_altitude_fraction {
                window.min_altitude_fraction = f;
            }
            commands::eval(&truth, &navlogs, config.as_deref(), &window, &out)
        }
        Command::Flow {
            frame_a,
            frame_b,
            params,
            step,
            margin,
            out,
        } => commands::flow(&frame_a, &frame_b, params.as_deref(), step, margin, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ecas_core::channel;
use ecas_core::harness::{self, ExperimentSpec, GridChoice};
use ecas_core::phy::RadioConfig;

/// Rain-adaptive LoRa data-rate simulator.
#[derive(Parser)]
#[command(name = "ecas-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit channel parameters to link breakpoints and write them out.
    Calibrate {
        /// Milestone CSV (`dr,distance_m,breakpoint`); built-in set if omitted.
        #[arg(long)]
        milestones: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the policy sweep and write tables, figure data and charts.
    Sweep {
        /// Experiment spec file; defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// 5mm, 1mm, or a grid file path.
        #[arg(long)]
        grid: Option<String>,
        /// fixed:<dr>, conservative, aggressive or all (comma-separated).
        #[arg(long)]
        policy: Option<String>,
        /// Channel parameter file, instead of the spec's channel source.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        round_duration: Option<f64>,
        #[arg(long)]
        app_period: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-round event and message CSVs.
        #[arg(long)]
        trace: bool,
    },
    /// Compare a sweep's output directory with a reference CSV.
    Verify {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
}

enum Failure {
    Verification,
    Config(ecas_core::Error),
}

impl From<ecas_core::Error> for Failure {
    fn from(e: ecas_core::Error) -> Self {
        Failure::Config(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Calibrate { milestones, out } => {
            let ms = match milestones {
                Some(p) => channel::read_milestones(&p)?,
                None => channel::reference_milestones(),
            };
            let params = channel::calibrate(&ms, &RadioConfig::default())?;
            channel::write_params(&out, &params)?;
            print!("{}", channel::format_params(&params));
        }
        Command::Sweep {
            spec,
            grid,
            policy,
            params,
            round_duration,
            app_period,
            out,
            trace,
        } => {
            let mut s = match &spec {
                Some(p) => ExperimentSpec::read(p)?,
                None => ExperimentSpec::default(),
            };
            let cwd = PathBuf::from(".");
            if let Some(g) = grid {
                s.grid = GridChoice::parse(&g, &cwd)?;
            }
            if let Some(p) = policy {
                s.policies = harness::parse_policies(&p)?;
            }
            if let Some(p) = params {
                s.channel = harness::ChannelSource::File(p);
            }
            if let Some(d) = round_duration {
                s.round_duration_s = d;
            }
            if let Some(p) = app_period {
                s.app_period_s = p;
            }
            let dir = out
                .or_else(|| s.output_dir.clone())
                .ok_or_else(|| ecas_core::Error::Config("no output directory (--out or spec 'output')".into()))?;
            let params = s.channel.resolve(&s.radio)?;
            let result = harness::run_sweep(&s, &params)?;
            harness::emit_reports(&result, &dir)?;
            channel::write_params(&dir.join("channel_params.txt"), &params)?;
            if trace {
                harness::emit_traces(&s, &params, &dir)?;
            }
            print!("{}", std::fs::read_to_string(dir.join("comparison.txt")).unwrap_or_default());
            println!("reports written to {}", dir.display());
        }
        Command::Verify { result, reference } => {
            let report = harness::compare_to_reference(&result, &reference)?;
            println!("{report}");
            if !report.passed() {
                return Err(Failure::Verification);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("ecas-sim: {e}");
            ExitCode::from(2)
        }
    }
}

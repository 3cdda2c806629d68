use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use selfmod_cli::commands::{self, EquivalenceOptions, Preset};
use selfmod_cli::config::{parse_seeds, ConfigFlags};
use selfmod_cli::CliError;

#[derive(Debug, Parser)]
#[command(name = "selfmod", version, about = "Self-modifying networks searched by fitness monotonic execution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run fitness monotonic execution or hill climbing and write a history CSV.
    Run(ConfigFlags),
    /// Sweep the hill climber's noise level and write `sigma,mean_final_best`.
    Sweep {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Comma-separated noise levels; defaults to 0.001,0.003,0.01,0.03,0.1.
        #[arg(long)]
        sigmas: Option<String>,
    },
    /// Render history CSVs as an SVG learning curve.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
    /// Check that the memory-based emulator reproduces the self-referential network.
    VerifyEquivalence {
        #[arg(long, default_value = "0..10")]
        seeds: String,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
        #[arg(long, default_value_t = 4)]
        input_width: usize,
        #[arg(long, default_value_t = 32)]
        hidden_width: usize,
        #[arg(long, default_value_t = 3)]
        num_layers: usize,
        #[arg(long, default_value_t = 2)]
        outputs: usize,
    },
    /// Run one of the shipped experiments and write CSVs and a plot.
    Preset {
        #[arg(value_enum)]
        name: Preset,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run(flags) => commands::cmd_run(&flags, &mut out),
        Command::Sweep { flags, sigmas } => commands::cmd_sweep(&flags, sigmas.as_deref(), &mut out),
        Command::Plot { csv, out: svg, title } => commands::cmd_plot(&csv, &svg, title.as_deref(), &mut out),
        Command::VerifyEquivalence { seeds, steps, tolerance, input_width, hidden_width, num_layers, outputs } => {
            let opts = EquivalenceOptions {
                seeds: parse_seeds(&seeds).map_err(CliError::Usage)?,
                steps,
                tolerance,
                input_width,
                hidden_width,
                num_layers,
                outputs,
            };
            commands::cmd_verify_equivalence(&opts, &mut out)
        }
        Command::Preset { name, out_dir, flags } => commands::cmd_preset(name, &out_dir, &flags, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

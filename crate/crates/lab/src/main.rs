use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gibbs_lab::commands::{self, Command, Overrides};
use gibbs_lab::plot::{plot_file, PlotKind};

#[derive(Parser)]
#[command(name = "gibbs-lab", version, about = "Numerical experiments on Gibbs measures of interacting particles")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides GIBBS_LAB_OUTPUT and the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (overrides GIBBS_LAB_THREADS and the config).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Residuals of the Green identity at random nodes and basis functions.
    GreenCheck(Common),
    /// Minimize the free energy by mirror descent.
    Equilibrium(Common),
    /// Run Metropolis chains targeting the Gibbs measure.
    Sample(Common),
    /// Minimize W_n (plus f) and tabulate the infima.
    Fekete {
        #[command(flatten)]
        common: Common,
        /// Single particle number instead of the configured list.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Compare L_n with -inf{f + F}.
    LaplaceVerify(Common),
    /// Infimum of the rate function over a linear constraint set.
    RateProfile(Common),
    /// Gas in a varying environment.
    Conditional(Common),
    /// Render a result CSV as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        /// density, convergence or points
        #[arg(long)]
        kind: PlotKind,
        /// Defaults to the input path with an .svg extension.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Reference density in x drawn over 1D density plots.
        #[arg(long)]
        overlay: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common, n) = match cli.command {
        Sub::Plot { input, kind, output, overlay } => {
            let output = output.unwrap_or_else(|| input.with_extension("svg"));
            return match plot_file(&input, kind, &output, overlay.as_deref()) {
                Ok(()) => {
                    println!("wrote {}", output.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            };
        }
        Sub::GreenCheck(c) => (Command::GreenCheck, c, None),
        Sub::Equilibrium(c) => (Command::Equilibrium, c, None),
        Sub::Sample(c) => (Command::Sample, c, None),
        Sub::Fekete { common, n } => (Command::Fekete, common, n),
        Sub::LaplaceVerify(c) => (Command::LaplaceVerify, c, None),
        Sub::RateProfile(c) => (Command::RateProfile, c, None),
        Sub::Conditional(c) => (Command::Conditional, c, None),
    };
    let ov = Overrides { output: common.output, threads: common.threads, n };
    match commands::run(cmd, &common.config, &ov) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.passed {
                println!("PASS");
                ExitCode::SUCCESS
            } else {
                println!("FAIL");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use broadcast_core::cli::{
    cmd_bowles, cmd_pt_spectrum, cmd_selftest, cmd_werner_sweep, cmd_witness, Grid, Options,
    Report, SourceSpec,
};

/// Broadcast Bell experiments with machine-readable reports.
#[derive(Debug, Parser)]
#[command(name = "broadcast", version)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Also write the command's table as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Emit the JSON report on stdout (the default).
    #[arg(long, global = true)]
    json: bool,
    /// Override the tolerance of every check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bowles score of each inner link and the local bound.
    Bowles {
        #[arg(long, default_value = "singlet")]
        source: SourceSpec,
        /// Use the fully transposed model.
        #[arg(long)]
        transposed: bool,
    },
    /// Witness of a two-qubit source and its broadcast value.
    Witness {
        #[arg(long, default_value = "singlet")]
        source: SourceSpec,
    },
    /// Witness detection along the Werner family.
    WernerSweep {
        /// start:stop:step
        #[arg(long, default_value = "0:1:0.01")]
        grid: Grid,
    },
    /// Branch extraction and reconstruction for a mixture of honest and transposed models.
    Selftest {
        #[arg(long, default_value = "ghz:3")]
        source: SourceSpec,
        #[arg(long)]
        parties: Option<usize>,
        /// Weight of the honest model.
        #[arg(long, default_value_t = 1.0)]
        mix: f64,
    },
    /// Partial-transpose spectrum of a source.
    PtSpectrum {
        #[arg(long, default_value = "phi+")]
        source: SourceSpec,
        /// Transposed subsystems.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        mask: Vec<usize>,
        /// Number of extra seeded random densities to check.
        #[arg(long, default_value_t = 0)]
        batch: usize,
    },
}

fn run(cli: &Cli) -> broadcast_core::Result<Report> {
    let opts = Options {
        seed: cli.seed,
        tol: cli.tol,
    };
    match &cli.command {
        Command::Bowles { source, transposed } => cmd_bowles(&opts, source, *transposed),
        Command::Witness { source } => cmd_witness(&opts, source),
        Command::WernerSweep { grid } => cmd_werner_sweep(&opts, grid),
        Command::Selftest {
            source,
            parties,
            mix,
        } => cmd_selftest(&opts, source, *parties, *mix),
        Command::PtSpectrum {
            source,
            mask,
            batch,
        } => cmd_pt_spectrum(&opts, source, mask, *batch),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let (Some(path), Some(table)) = (&cli.csv, &report.table) {
        if let Err(e) = table.write_csv(path) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match report.to_json() {
        Ok(s) => print!("{s}"),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pdyadic::campaign::{self, CampaignReport, Experiment, ExperimentConfig, KernelGen, WeightGen};

/// Measurement campaigns for perfect dyadic operators on finite trees.
#[derive(Parser)]
#[command(name = "pdyadic", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the four-operator decomposition identity on random inputs
    DecomposeCheck(Common),
    /// Measure operator constants and the explicit-constant implications
    Constants(Common),
    /// One-weight norm against Q * [w]_{A2} over the power-weight family
    A2Linearity(Common),
    /// Full nine-condition two-weight battery plus weighted norms
    TwoWeight(Common),
    /// Reduced battery for A_infty weights with reduction checks
    TwoWeightAinfty(Common),
    /// Bilinear embedding hypotheses and measured conclusion constant
    Embedding(Common),
    /// Factor-4 Carleson lemmas and square-function statistics
    Lemmas(Common),
    /// Rank instances by weighted norm / battery constant; dump the top ones
    CounterexampleSearch(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Tree depth (levels of refinement)
    #[arg(long, default_value_t = 6)]
    depth: u32,

    /// Number of random trials
    #[arg(long, default_value_t = 100)]
    trials: usize,

    /// RNG seed; trial t draws from stream (seed, t)
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Kernel source: uniform, decay[:C], or file:PATH
    #[arg(long, default_value = "uniform")]
    kernel_gen: String,

    /// Weight source: constant, cascade:DELTA, power:ALPHA, or file:PATH
    #[arg(long, default_value = "cascade:0.5")]
    weight_gen: String,

    /// Tolerance for exact-identity residuals
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Accept kernel files whose entries violate the size normalization
    #[arg(long)]
    allow_unnormalized: bool,

    /// Directory for instance dumps (counterexample search)
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

impl Common {
    fn into_config(self, experiment: Experiment) -> Result<ExperimentConfig, pdyadic::Error> {
        Ok(ExperimentConfig {
            experiment,
            depth: self.depth,
            trials: self.trials,
            seed: self.seed,
            kernel_gen: self.kernel_gen.parse::<KernelGen>()?,
            weight_gen: self.weight_gen.parse::<WeightGen>()?,
            tol: self.tol,
            allow_unnormalized: self.allow_unnormalized,
            dump_dir: self.dump_dir,
        })
    }
}

fn emit(report: &CampaignReport, out: Option<&PathBuf>, format: Format) -> std::io::Result<()> {
    let body = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match out {
        Some(path) => std::fs::write(path, body)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{body}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, experiment) = match cli.command {
        Command::DecomposeCheck(c) => (c, Experiment::DecomposeCheck),
        Command::Constants(c) => (c, Experiment::Constants),
        Command::A2Linearity(c) => (c, Experiment::A2Linearity),
        Command::TwoWeight(c) => (c, Experiment::TwoWeight),
        Command::TwoWeightAinfty(c) => (c, Experiment::TwoWeightAinfty),
        Command::Embedding(c) => (c, Experiment::Embedding),
        Command::Lemmas(c) => (c, Experiment::Lemmas),
        Command::CounterexampleSearch(c) => (c, Experiment::CounterexampleSearch),
    };
    let out = common.out.clone();
    let format = common.format;
    let config = match common.into_config(experiment) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("pdyadic: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match campaign::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("pdyadic: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&report, out.as_ref(), format) {
        eprintln!("pdyadic: {e}");
        return ExitCode::from(2);
    }
    if report.pass {
        eprintln!("pass ({} trials)", report.trials.len());
        ExitCode::SUCCESS
    } else {
        eprintln!("VIOLATION detected ({} trials)", report.trials.len());
        ExitCode::from(1)
    }
}

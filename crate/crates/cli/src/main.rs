use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scatter_cli::commands::{self, EvalArgs, ExtractArgs, FitArgs};
use scatter_cli::{config_file, CliError, Result};
use scatter_core::ScatteringConfig;

/// Scattering features, linear SVM training and filter diagnostics.
#[derive(Parser)]
#[command(name = "scatter", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Network configuration (`key = value` lines); defaults apply without it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the train/test split and the SVM solver.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Scatter images into an SCF1 feature file.
    Extract {
        /// One dataset directory (a subdirectory per class) or image files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Feature file (the training rows when splitting).
        #[arg(short, long)]
        output: PathBuf,
        /// Split each class: this many rows go to --output, the rest to --test-output.
        #[arg(long, requires = "test_output")]
        train_per_class: Option<usize>,
        #[arg(long, requires = "train_per_class")]
        test_output: Option<PathBuf>,
        /// Drop undecodable inputs instead of failing.
        #[arg(long)]
        skip_bad: bool,
    },
    /// Standardize training features and train a one-vs-rest linear SVM.
    Fit {
        /// Labeled SCF1 features.
        train: PathBuf,
        /// SCM1 model to write.
        #[arg(long)]
        model: PathBuf,
        /// SCS1 standardizer to write.
        #[arg(long)]
        standardizer: PathBuf,
        /// Hinge-loss weight.
        #[arg(short = 'c', long = "c", default_value_t = 1.0)]
        c: f64,
    },
    /// Report accuracy and the confusion matrix on labeled features.
    Eval {
        test: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        standardizer: PathBuf,
    },
    /// Print frame bounds of the filter banks.
    FrameCheck {
        /// Also write the first-layer Littlewood-Paley sum as an image.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Write every spatial filter as an image.
    DumpFilters {
        #[arg(short, long)]
        output_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let config = || -> Result<ScatteringConfig> {
        match &cli.global.config {
            Some(path) => config_file::load(path),
            None => Ok(ScatteringConfig::default()),
        }
    };
    pool.install(|| match cli.command {
        Command::Extract {
            inputs,
            output,
            train_per_class,
            test_output,
            skip_bad,
        } => commands::extract(&ExtractArgs {
            config: config()?,
            inputs,
            output,
            test_output,
            train_per_class,
            seed: cli.global.seed,
            skip_bad,
        }),
        Command::Fit {
            train,
            model,
            standardizer,
            c,
        } => commands::fit(&FitArgs {
            train,
            model,
            standardizer,
            c,
            seed: cli.global.seed,
        }),
        Command::Eval {
            test,
            model,
            standardizer,
        } => commands::eval(&EvalArgs {
            model,
            standardizer,
            test,
        }),
        Command::FrameCheck { image } => commands::frame_check(&config()?, image.as_deref()),
        Command::DumpFilters { output_dir } => commands::dump_filters(&config()?, &output_dir),
    })
}

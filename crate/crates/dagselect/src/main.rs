use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dagselect::run::{self, EvaluateInputs};
use dagselect::{Error, Result, RunConfig};

#[derive(Parser)]
#[command(
    name = "dagselect",
    version,
    about = "Joint Bayesian variable and DAG selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset with its ground truth.
    Simulate {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sampler on X.csv / Y.csv.
    Fit {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write one JSON line per sweep to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score a fitted summary against the truth.
    Evaluate {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Training data, used for the least-squares refit.
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, requires = "y_test")]
        x_test: Option<PathBuf>,
        #[arg(long, requires = "x_test")]
        y_test: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate and fit many replicates and tabulate the metrics.
    Replicate {
        #[command(flatten)]
        opts: Overrides,
        /// Precomputed selections as NAME=PATH: a CSV with one 0/1 row per replicate.
        #[arg(long, value_parser = parse_baseline)]
        baseline: Vec<(String, PathBuf)>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags that override the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    burnin: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    tau2: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long = "R")]
    r: Option<String>,
    /// Known noise variance; omit for an inverse-gamma prior.
    #[arg(long)]
    sigma2: Option<String>,
    /// `empty` or `correlation[:threshold]`.
    #[arg(long)]
    init: Option<String>,
    /// `per-column` or `whole-dag`.
    #[arg(long)]
    dag_move: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        let flags = [
            ("scenario", &self.scenario),
            ("setting", &self.setting),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("iters", &self.iters),
            ("burnin", &self.burnin),
            ("workers", &self.workers),
            ("b", &self.b),
            ("tau2", &self.tau2),
            ("q", &self.q),
            ("R", &self.r),
            ("sigma2", &self.sigma2),
            ("init", &self.init),
            ("dag_move", &self.dag_move),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse_baseline(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_owned(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { opts, out } => run::cmd_simulate(&opts.resolve()?, &out),
        Command::Fit {
            opts,
            x,
            y,
            out,
            trace,
        } => {
            let summary = run::cmd_fit(&opts.resolve()?, &x, &y, &out, trace.as_deref())?;
            println!(
                "selected {} variables, {} edges",
                summary.selected.len(),
                summary.edges.len()
            );
            Ok(())
        }
        Command::Evaluate {
            opts,
            summary,
            truth,
            x,
            y,
            x_test,
            y_test,
            out,
        } => {
            let test = match (&x_test, &y_test) {
                (Some(a), Some(b)) => Some((a.as_path(), b.as_path())),
                (None, None) => None,
                _ => return Err(Error::Usage("--x-test and --y-test go together".into())),
            };
            let inputs = EvaluateInputs {
                summary: &summary,
                truth: &truth,
                x: &x,
                y: &y,
                test,
            };
            let m = run::cmd_evaluate(&opts.resolve()?, &inputs, &out)?;
            println!("{}", serde_json::to_string(&m).expect("metrics serialize"));
            Ok(())
        }
        Command::Replicate {
            opts,
            baseline,
            out,
        } => {
            let report = run::cmd_replicate(&opts.resolve()?, &baseline, &out)?;
            print!("{}", run::table_csv(&report.table));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

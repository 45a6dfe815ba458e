use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hfnt::data::TaskKind;
use hfnt::mogp::ObjectiveMode;
use hfnt::pipeline::{self, CvProtocol, RunConfig};
use hfnt::Result;

#[derive(Parser)]
#[command(name = "hfnt", version, about = "Evolve, tune and ensemble heterogeneous flexible neural trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate on every cross-validation fold.
    Train(TrainArgs),
    /// Build weighted ensembles from the final populations of a run.
    Ensemble(EnsembleArgs),
    /// Aggregate run directories into CSV tables.
    Report(ReportArgs),
    /// Write a Mackey-Glass series as CSV.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    task: Option<TaskKind>,
    /// kfold:K, 5x2 or holdout:F
    #[arg(long)]
    cv: Option<CvProtocol>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rank on approximation error alone.
    #[arg(long)]
    single_objective: bool,
    /// Bag size stored for a later `ensemble` call.
    #[arg(long)]
    bag_size: Option<usize>,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bag_size: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories to aggregate.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Output directory (default: `<first run>/report`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = args.dataset {
        cfg.dataset = Some(d);
    }
    if let Some(t) = args.task {
        cfg.task = t;
    }
    if let Some(cv) = args.cv {
        cfg.cv = cv;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    if args.single_objective {
        cfg.mogp.mode = ObjectiveMode::Single;
    }
    if let Some(m) = args.bag_size {
        cfg.bag_size = m;
    }
    let summary = pipeline::run_train(&cfg)?;
    match summary.mean_test_accuracy {
        Some(a) => println!("{} folds, mean test accuracy {a:.4}", summary.folds.len()),
        None => println!("{} folds, mean test RMSE {:.6}", summary.folds.len(), summary.mean_test_rmse),
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

fn ensemble(args: EnsembleArgs) -> Result<()> {
    let s = pipeline::run_ensemble(&args.out, args.bag_size)?;
    let regressions = s.folds.iter().filter(|f| !f.no_regression).count();
    match s.mean_test_accuracy {
        Some(a) => println!("bag of {}, mean test accuracy {a:.4}", s.bag_size),
        None => println!("bag of {}, mean test RMSE {:.6}", s.bag_size, s.mean_test_rmse),
    }
    if regressions > 0 {
        println!("{regressions} folds fit worse than their best member");
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| args.runs[0].join("report"));
    let r = pipeline::run_report(&args.runs, &out)?;
    println!(
        "{} summary rows, {} pareto rows, {} trajectory rows in {}",
        r.summary_rows,
        r.pareto_rows,
        r.trajectory_rows,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Report(a) => report(a),
        Command::GenData(a) => pipeline::gen_mackey_glass(&a.out, a.points, a.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hfnt: error: {e}");
            ExitCode::FAILURE
        }
    }
}

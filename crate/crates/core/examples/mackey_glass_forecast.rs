//! One-step-ahead forecasting of the Mackey-Glass series through the full
//! training pipeline. Pass `--full` for the default evaluation budget;
//! otherwise a reduced budget keeps the run short.

use hfnt::data::TaskKind;
use hfnt::pipeline::{gen_mackey_glass, run_train, CvProtocol, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = std::env::args().any(|a| a == "--full");
    let dir = std::env::temp_dir().join("hfnt_mackey_glass");
    std::fs::create_dir_all(&dir)?;
    let series = dir.join("series.csv");
    gen_mackey_glass(&series, 1000, 0)?;

    let mut cfg = RunConfig {
        dataset: Some(series),
        task: TaskKind::Timeseries,
        cv: CvProtocol::Holdout(0.5),
        out: dir.join("run"),
        ..RunConfig::default()
    };
    if !full {
        cfg.general_repetitions = 1;
        cfg.mogp.generations = 20;
        cfg.param_iterations = 100;
    }
    let s = run_train(&cfg)?;
    let fold = &s.folds[0];
    println!("budget {} evaluations", s.evaluation_budget);
    println!("train RMSE {:.5}, test RMSE {:.5}", fold.train.rmse, fold.test.rmse);
    println!("best tree size {:?}, features {:?}", fold.tree_size, fold.features);
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

//! Three-fold cross-validation on the Wisconsin diagnostic breast cancer
//! data with a reduced budget.

use std::path::PathBuf;

use hfnt::data::TaskKind;
use hfnt::pipeline::{run_train, CvProtocol, RunConfig};

fn main() -> hfnt::Result<()> {
    let mut cfg = RunConfig {
        dataset: Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.csv")),
        task: TaskKind::Classification,
        cv: CvProtocol::Kfold(3),
        out: std::env::temp_dir().join("hfnt_wdbc"),
        general_repetitions: 1,
        param_iterations: 50,
        ..RunConfig::default()
    };
    cfg.mogp.generations = 15;
    let s = run_train(&cfg)?;
    for f in &s.folds {
        let c = f.test.confusion.as_ref().expect("binary task");
        println!(
            "fold {}: accuracy {:.4} (tp {}, tn {}, fp {}, fn {}), tree size {:?}",
            f.fold,
            f.test.accuracy.unwrap_or(f64::NAN),
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            f.tree_size
        );
    }
    println!("mean test accuracy {:.4}", s.mean_test_accuracy.unwrap_or(f64::NAN));
    Ok(())
}

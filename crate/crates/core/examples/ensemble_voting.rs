//! Pick a bag of distinct trees from an evolved population, tune each one,
//! fit their voting weights, and compare the ensemble with its best member.

use std::path::PathBuf;

use hfnt::data::{load_csv, scale, CsvSchema, SplitPlan, TaskKind};
use hfnt::de::{tune_tree, tuning_config};
use hfnt::ensemble::{diversity, fit_weights, select_candidates, EnsembleBag, WeightFitConfig};
use hfnt::metrics::{accuracy, Confusion};
use hfnt::mogp::{evolve, MogpConfig};

fn main() -> hfnt::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/pima.csv");
    let ds = scale(&load_csv(path, &CsvSchema::new(8, TaskKind::Classification).with_header(true))?);
    let split = SplitPlan::holdout(ds.len(), 0.7)?.pairs().remove(0);
    let (train, test) = (ds.subset(&split.train), ds.subset(&split.test));

    let mut rng = hfnt::rng::seeded(11);
    let cfg = MogpConfig {
        generations: 30,
        ..MogpConfig::default()
    };
    let pop = evolve(&train, &cfg, &mut rng)?.population;
    let models = select_candidates(&pop, 10)?
        .iter()
        .map(|t| Ok(tune_tree(t, &train, &tuning_config(t, &cfg.tree, 30, 3_000), &mut rng)?.tree))
        .collect::<hfnt::Result<Vec<_>>>()?;
    println!("bag of {}, diversity {:.2}", models.len(), diversity(&models));

    let bag = EnsembleBag::new(models, TaskKind::Classification)?;
    let fit_cfg = WeightFitConfig {
        max_evaluations: 20_000,
        ..WeightFitConfig::default()
    };
    let (fitted, report) = fit_weights(&bag, &train, &fit_cfg, &mut rng)?;
    println!(
        "training error: best member {:.4}, ensemble {:.4}",
        report.best_member_error, report.ensemble_error
    );
    println!("weights {:?}", fitted.weights.iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>());

    let labels = test.labels();
    let predicted: Vec<usize> = fitted.predict(&test)?.iter().map(|p| *p as usize).collect();
    let acc = accuracy(&Confusion::from_labels(&labels, &predicted)?)?;
    println!("ensemble test accuracy {acc:.4}");
    Ok(())
}

//! Count which input features a bag of trees relies on.

use std::path::PathBuf;

use hfnt::data::{load_csv, scale, CsvSchema, TaskKind};
use hfnt::ensemble::{feature_report, select_candidates, FeatureThresholds};
use hfnt::mogp::{evolve, MogpConfig};

fn main() -> hfnt::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.csv");
    let ds = scale(&load_csv(path, &CsvSchema::new(30, TaskKind::Classification).with_header(true))?);
    let cfg = MogpConfig {
        generations: 20,
        ..MogpConfig::default()
    };
    let pop = evolve(&ds, &cfg, &mut hfnt::rng::seeded(5))?.population;
    let models = select_candidates(&pop, 10)?;
    let r = feature_report(&models, ds.n_features(), FeatureThresholds::default());
    println!("{} of {} features used by the bag of {}", r.tsf, ds.n_features(), models.len());
    println!("most frequent {:?}", r.msf);
    println!("least frequent {:?}", r.mif);
    println!("unused {:?}", r.unused);
    print!("{}", r.to_csv());
    Ok(())
}

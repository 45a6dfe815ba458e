//! Evolve tree structures on a synthetic regression task and print the
//! nondominated front over error, size and activation diversity.

use hfnt::data::{scale, Dataset, TaskKind};
use hfnt::mogp::{evolve, MogpConfig};
use rand::RngExt;

fn main() -> hfnt::Result<()> {
    let mut rng = hfnt::rng::seeded(3);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let targets: Vec<f64> = rows.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[2]).collect();
    let train = scale(&Dataset::from_rows(rows, targets, TaskKind::Regression)?);

    let cfg = MogpConfig {
        generations: 40,
        ..MogpConfig::default()
    };
    let out = evolve(&train, &cfg, &mut rng)?;
    println!("{} evaluations", out.evaluations);
    let pop = &out.population;
    println!("{:>12} {:>6} {:>10}", "mse", "size", "diversity");
    for i in pop.front1_by_error() {
        let o = &pop.members[i].objectives;
        println!("{:>12.6} {:>6} {:>10}", o.error, o.size, o.diversity_index());
    }
    Ok(())
}

//! Compare final tree sizes when ranking on error alone versus the
//! error, size and diversity objectives.

use hfnt::data::{lag_embed, mackey_glass, scale};
use hfnt::mogp::{evolve, evolve_single_objective, MogpConfig};

fn main() -> hfnt::Result<()> {
    let train = scale(&lag_embed(&mackey_glass(500, 0), 4, 1)?);
    let cfg = MogpConfig {
        generations: 30,
        ..MogpConfig::default()
    };
    println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "seed", "multi size", "single size", "multi mse", "single mse");
    for seed in 0..4 {
        let multi = evolve(&train, &cfg, &mut hfnt::rng::seeded(seed))?;
        let single = evolve_single_objective(&train, &cfg, &mut hfnt::rng::seeded(seed))?;
        let last = |o: &hfnt::mogp::EvolveOutcome| o.log.last().cloned().expect("at least one generation");
        let (m, s) = (last(&multi), last(&single));
        println!(
            "{seed:>4} {:>12.2} {:>12.2} {:>12.6} {:>12.6}",
            m.mean_size, s.mean_size, m.min_error, s.min_error
        );
    }
    Ok(())
}

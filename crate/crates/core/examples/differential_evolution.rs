//! Minimize the Rosenbrock function with DE/rand-to-best/1/bin.

use hfnt::de::{optimize, DeConfig};

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
}

fn main() -> hfnt::Result<()> {
    let cfg = DeConfig {
        pop_size: 40,
        max_evaluations: Some(80_000),
        ..DeConfig::new(vec![(-2.0, 2.0); 4])
    };
    let out = optimize(rosenbrock, &cfg, &mut hfnt::rng::seeded(1))?;
    for r in out.trace.iter().step_by(250) {
        println!("generation {:5}  best {:.3e}  mean {:.3e}", r.generation, r.best_fitness, r.mean_fitness);
    }
    println!(
        "best {:.3e} at {:?} after {} evaluations",
        out.fitness,
        out.best.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
        out.evaluations
    );
    Ok(())
}

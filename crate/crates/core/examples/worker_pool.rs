// Allocates per-class training jobs to workers under both policies, runs
// the pool at several widths and checks every run yields the same models.
//
// ```bash
// cargo run --release --example worker_pool
// ```

use ocon::classifiers::{ocon_jobs, Labeled, OconOptions};
use ocon::parallel::{allocate, allocate_sizes, run_pool, Allocation};
use ocon::{PoolConfig, TrainingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clusters(classes: u32, per_class: usize, dim: usize) -> Vec<Labeled> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (1..=classes)
        .flat_map(|c| {
            let centre: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            (0..per_class)
                .map(|_| Labeled::new(centre.iter().map(|m| m + rng.random_range(-0.3..0.3)).collect::<Vec<_>>(), c))
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let sizes = [9, 5, 5, 1];
    for policy in [Allocation::RoundRobin, Allocation::LargestFirst] {
        let a = allocate_sizes(&sizes, 2, policy);
        println!("{policy:<13} sizes {sizes:?} -> {:?}, loads {:?}", a.per_worker, a.loads(&sizes));
    }

    let samples = clusters(8, 12, 10);
    let options = OconOptions {
        hidden: vec![8],
        max_negatives: Some(30),
    };
    let config = TrainingConfig {
        max_epochs: 2_000,
        ..TrainingConfig::desk()
    };
    let mut reference = None;
    for workers in [1, 2, 4] {
        let pool = PoolConfig::new(workers, Allocation::LargestFirst)?;
        let jobs = ocon_jobs(&samples, &options, &config)?;
        println!("workers={workers}: assignment {:?}", allocate(&jobs, &pool).per_worker);
        let outcome = run_pool(jobs, &pool)?;
        println!(
            "  {} models in {:.1} ms, dispatch/compute {:.5}",
            outcome.models().count(),
            outcome.wall_time.as_secs_f64() * 1e3,
            outcome.overhead_ratio()
        );
        let models: Vec<_> = outcome.models().cloned().collect();
        match &reference {
            None => reference = Some(models),
            Some(r) => assert!(r.iter().zip(&models).all(|(a, b)| a.same_parameters(b))),
        }
    }
    println!("all pool widths produced identical weights");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// Trains a 2-4-1 sigmoid network on XOR with batch gradient descent and
// momentum, printing the convergence trace.
//
// ```bash
// cargo run --example xor_mlp
// ```

use ocon::mlp::{train, Example, Topology, TrainingConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let batch: Vec<Example> = [([0.0, 0.0], 0.0), ([0.0, 1.0], 1.0), ([1.0, 0.0], 1.0), ([1.0, 1.0], 0.0)]
        .iter()
        .map(|(x, t)| Example::new(x.to_vec(), vec![*t]))
        .collect();
    let config = TrainingConfig {
        learning_rate: 0.5,
        momentum: 0.9,
        goal: 1e-3,
        max_epochs: 20_000,
        seed: 0,
        history_stride: 250,
    };
    let (weights, trace) = train(&Topology::new(vec![2, 4, 1])?, &batch, &config)?;
    for (epoch, mse) in &trace.mse_history {
        println!("epoch {epoch:>6}  mse {mse:.6}");
    }
    println!(
        "{} after {} epochs ({:.3} ms)",
        if trace.goal_met { "goal met" } else { "goal not met" },
        trace.epochs_run,
        trace.wall_time * 1e3
    );
    for ex in &batch {
        let y = weights.forward(ex.input.as_slice())?.into_output()[0];
        println!("  {:?} -> {y:.3} (target {})", ex.input.as_slice(), ex.target[0]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

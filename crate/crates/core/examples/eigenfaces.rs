// Computes eigenfaces from synthetic training images and shows how
// reconstruction error falls as components are added.
//
// ```bash
// cargo run --example eigenfaces
// ```

use ocon::eigenspace::compute_eigenspace;
use ocon::imageio::{generate_synthetic, Role};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let samples = generate_synthetic(5, 6, 2, 16, 3)?;
    let train: Vec<Vec<f64>> = samples
        .iter()
        .filter(|s| s.role == Role::Train)
        .map(|s| s.image.to_vector())
        .collect();
    let space = compute_eigenspace(&train, 40)?;
    println!(
        "{} training images of {} pixels -> {} eigenfaces",
        train.len(),
        space.dim(),
        space.components()
    );

    let total: f64 = space.eigenvalues().iter().sum();
    let mut cumulative = 0.0;
    for (k, value) in space.eigenvalues().iter().enumerate().take(8) {
        cumulative += value;
        println!("  eigenvalue {:>2}: {value:.5}  ({:.1}% explained)", k + 1, 100.0 * cumulative / total);
    }

    let probe = samples.iter().find(|s| s.role == Role::Test).unwrap();
    let x = probe.image.to_vector();
    for m in [1, 2, 5, 10, space.components()] {
        let sub = space.truncated(m);
        let back = sub.reconstruct(&sub.project(&x)?)?;
        let err: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("  unseen image, m = {m:>2}: reconstruction error {err:.4}");
    }

    let text = space.to_text();
    println!("text form is {} bytes over {} lines", text.len(), text.lines().count());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

#![allow(dead_code)]

use ocon::classifiers::Labeled;
use ocon::eigenspace::compute_eigenspace;
use ocon::imageio::{generate_synthetic, Role};
use ocon::{Eigenspace, TrainingConfig};

/// Synthetic experiment fixture: 10 classes, 20 train and 20 test images
/// per class, 16x16 pixels, seed 1.
pub const CLASSES: usize = 10;
pub const TRAIN_PER_CLASS: usize = 20;
pub const TEST_PER_CLASS: usize = 20;
pub const SIDE: usize = 16;
pub const DATA_SEED: u64 = 1;
pub const COMPONENTS: usize = 40;

pub struct Dataset {
    pub eigenspace: Eigenspace,
    pub train: Vec<Labeled>,
    pub test: Vec<Labeled>,
}

pub fn dataset() -> Dataset {
    let samples = generate_synthetic(CLASSES, TRAIN_PER_CLASS, TEST_PER_CLASS, SIDE, DATA_SEED).unwrap();
    let train_vecs: Vec<Vec<f64>> = samples
        .iter()
        .filter(|s| s.role == Role::Train)
        .map(|s| s.image.to_vector())
        .collect();
    let eigenspace = compute_eigenspace(&train_vecs, COMPONENTS).unwrap();
    let project = |role: Role| -> Vec<Labeled> {
        samples
            .iter()
            .filter(|s| s.role == role)
            .map(|s| Labeled::new(eigenspace.project(&s.image.to_vector()).unwrap(), s.class_id))
            .collect()
    };
    let train = project(Role::Train);
    let test = project(Role::Test);
    Dataset { eigenspace, train, test }
}

/// lr 0.05, momentum 0.9, goal 1e-3, cap 20 000 epochs.
pub fn experiment_config() -> TrainingConfig {
    TrainingConfig {
        learning_rate: 0.05,
        momentum: 0.9,
        goal: 1e-3,
        max_epochs: 20_000,
        seed: 0,
        history_stride: 100,
    }
}

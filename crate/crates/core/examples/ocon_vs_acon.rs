// The full desk-scale comparison: 10 synthetic subjects, a 40-component
// eigenspace, one 20-hidden subnet per subject against a single 60-hidden
// network over all subjects. Prints the convergence table and both
// verification reports.
//
// ```bash
// cargo run --release --example ocon_vs_acon
// ```

use ocon::classifiers::{train_acon, train_ocon, Labeled, OconOptions};
use ocon::eigenspace::compute_eigenspace;
use ocon::evaluator::{
    convergence_summary, evaluate_all, identify_all, render_report, render_traces, Format, Mode, OconRegistry,
    Protocol, TraceSummary,
};
use ocon::imageio::{generate_synthetic, Role};
use ocon::parallel::Allocation;
use ocon::{PoolConfig, TrainingConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let samples = generate_synthetic(10, 20, 20, 16, 1)?;
    let train_vectors: Vec<Vec<f64>> = samples
        .iter()
        .filter(|s| s.role == Role::Train)
        .map(|s| s.image.to_vector())
        .collect();
    let space = compute_eigenspace(&train_vectors, 40)?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for s in &samples {
        let labeled = Labeled::new(space.project(&s.image.to_vector())?, s.class_id);
        match s.role {
            Role::Train => train.push(labeled),
            Role::Test => test.push(labeled),
        }
    }

    let config = TrainingConfig {
        history_stride: 100,
        ..TrainingConfig::desk()
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(10);
    let pool = PoolConfig::new(workers, Allocation::RoundRobin)?;
    let ocon = train_ocon(&train, &OconOptions::default(), &config, &pool)?;
    let acon = train_acon(&train, &[60], &config)?;

    let mut traces: Vec<TraceSummary> = ocon
        .models()
        .iter()
        .map(|m| TraceSummary::new(Mode::Ocon, Some(m.class_id), m.trace.as_ref().unwrap()))
        .collect();
    let acon_trace = TraceSummary::new(Mode::Acon, None, acon.trace.as_ref().unwrap());
    print!("{}", convergence_summary(&traces, Some(&acon_trace)));
    traces.push(acon_trace);
    print!("{}", render_traces(&traces, Format::Table));

    let protocol = Protocol::default();
    let ocon_report = evaluate_all(&OconRegistry::from_ensemble(&ocon, protocol.threshold), &test, &protocol)?;
    let acon_report = evaluate_all(&acon, &test, &protocol)?;
    print!("{}", render_report(&ocon_report, Format::Table));
    print!("{}", render_report(&acon_report, Format::Table));

    for (name, id) in [("OCON", identify_all(&ocon, &test)?), ("ACON", identify_all(&acon, &test)?)] {
        println!("{name} closed-set identification on the test set: {:.1}%", id.rate());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

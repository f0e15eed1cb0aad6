// Runs the per-class verification protocol (10 positives, 10 seeded
// negatives) against a hand-built verifier and renders the result as a
// table and as CSV.
//
// ```bash
// cargo run --example verification_report
// ```

use ocon::classifiers::Labeled;
use ocon::evaluator::{
    class_split, evaluate_all, evaluate_class_with, parse_report_csv, render_report, Format, Mode, Protocol,
    Verifier,
};
use ocon::{ClassId, ClassResult, FeatureVector};

/// Accepts a probe when its first coordinate lies within `radius` of the
/// class id. Wider radii accept more impostors.
struct RadiusVerifier {
    radius: f64,
    classes: Vec<ClassId>,
}

impl Verifier for RadiusVerifier {
    fn mode(&self) -> Mode {
        Mode::Ocon
    }

    fn registered_classes(&self) -> Vec<ClassId> {
        self.classes.clone()
    }

    fn evaluate_class(
        &self,
        class_id: ClassId,
        positives: &[FeatureVector],
        negatives: &[FeatureVector],
    ) -> ocon::Result<ClassResult> {
        evaluate_class_with(class_id, positives, negatives, |f| {
            Ok((f.coeffs[0] - f64::from(class_id)).abs() <= self.radius)
        })
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Probes of class c scatter around c with a spread that grows with c.
    let test: Vec<Labeled> = (1..=6u32)
        .flat_map(|c| {
            (0..20).map(move |i| {
                let offset = (i as f64 - 9.5) / 9.5 * 0.25 * f64::from(c);
                Labeled::new(vec![f64::from(c) + offset], c)
            })
        })
        .collect();
    let protocol = Protocol::default();
    let split = class_split(2, &test, &protocol)?;
    println!(
        "class 2 is tested on {} positives and {} negatives",
        split.positives.len(),
        split.negatives.len()
    );

    let verifier = RadiusVerifier {
        radius: 0.9,
        classes: (1..=6).collect(),
    };
    let report = evaluate_all(&verifier, &test, &protocol)?;
    print!("{}", render_report(&report, Format::Table));
    let csv = render_report(&report, Format::Csv);
    print!("{csv}");
    let parsed = parse_report_csv(&csv)?;
    assert_eq!(parsed.average_rate, report.average_rate);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

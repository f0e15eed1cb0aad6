//! Verification and identification protocols, and their reports.
//!
//! Verification (per class): the class's own test images are positives, a
//! seeded draw of other classes' test images are negatives. An OCON subnet
//! accepts by threshold; the ACON network accepts when its argmax is the class
//! under test. A class's recognition rate is the share of its test images
//! judged correctly.
//!
//! Identification (closed set): each test image is assigned the argmax class.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifiers::{class_seed, verify, AconModel, ClassModel, Labeled, OconEnsemble, DEFAULT_THRESHOLD};
use crate::eigenspace::FeatureVector;
use crate::mlp::TrainingTrace;
use crate::{ClassId, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassResult {
    pub class_id: ClassId,
    pub n_test: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub correct: usize,
    /// `100 * correct / n_test`.
    pub rate: f64,
}

impl ClassResult {
    pub fn from_counts(class_id: ClassId, n_pos: usize, n_neg: usize, correct: usize) -> Self {
        let n_test = n_pos + n_neg;
        assert!(correct <= n_test, "more correct answers than test images");
        let rate = if n_test == 0 {
            0.0
        } else {
            100.0 * correct as f64 / n_test as f64
        };
        ClassResult {
            class_id,
            n_test,
            n_pos,
            n_neg,
            correct,
            rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClassOutcome {
    Scored(ClassResult),
    /// The class is registered but could not be evaluated.
    Errored { class_id: ClassId, reason: String },
}

impl ClassOutcome {
    pub fn class_id(&self) -> ClassId {
        match self {
            ClassOutcome::Scored(r) => r.class_id,
            ClassOutcome::Errored { class_id, .. } => *class_id,
        }
    }

    pub fn result(&self) -> Option<&ClassResult> {
        match self {
            ClassOutcome::Scored(r) => Some(r),
            ClassOutcome::Errored { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Ocon,
    Acon,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ocon => "OCON",
            Mode::Acon => "ACON",
        })
    }
}

/// Convergence summary of one trained network.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSummary {
    pub mode: Mode,
    /// `None` for the single ACON network.
    pub class_id: Option<ClassId>,
    pub epochs_run: usize,
    pub final_mse: f64,
    pub goal: f64,
    pub goal_met: bool,
    pub max_epochs: usize,
}

impl TraceSummary {
    pub fn new(mode: Mode, class_id: Option<ClassId>, trace: &TrainingTrace) -> Self {
        TraceSummary {
            mode,
            class_id,
            epochs_run: trace.epochs_run,
            final_mse: trace.final_mse,
            goal: trace.goal,
            goal_met: trace.goal_met,
            max_epochs: trace.max_epochs,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub mode: Mode,
    pub per_class: Vec<ClassOutcome>,
    /// Mean of the scored classes' rates.
    pub average_rate: f64,
    pub traces: Vec<TraceSummary>,
}

impl EvaluationReport {
    pub fn errored(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.per_class.iter().filter_map(|o| match o {
            ClassOutcome::Errored { class_id, .. } => Some(*class_id),
            ClassOutcome::Scored(_) => None,
        })
    }

    pub fn has_errors(&self) -> bool {
        self.errored().next().is_some()
    }
}

fn average(rates: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = rates.fold((0.0, 0usize), |(s, n), r| (s + r, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Counts correct verdicts: accepted positives plus rejected negatives.
pub fn evaluate_class_with(
    class_id: ClassId,
    positives: &[FeatureVector],
    negatives: &[FeatureVector],
    mut accepts: impl FnMut(&FeatureVector) -> Result<bool>,
) -> Result<ClassResult> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::ProtocolError {
            class_id,
            message: "need at least one positive and one negative".into(),
        });
    }
    let mut correct = 0;
    for f in positives {
        correct += usize::from(accepts(f)?);
    }
    for f in negatives {
        correct += usize::from(!accepts(f)?);
    }
    Ok(ClassResult::from_counts(class_id, positives.len(), negatives.len(), correct))
}

pub fn evaluate_class_ocon(
    model: &ClassModel,
    positives: &[FeatureVector],
    negatives: &[FeatureVector],
    threshold: f64,
) -> Result<ClassResult> {
    evaluate_class_with(model.class_id, positives, negatives, |f| {
        Ok(verify(model.score(f.as_slice())?, threshold))
    })
}

pub fn evaluate_class_acon(
    model: &AconModel,
    class_id: ClassId,
    positives: &[FeatureVector],
    negatives: &[FeatureVector],
) -> Result<ClassResult> {
    if !model.class_ids.contains(&class_id) {
        return Err(Error::UnknownClass(class_id));
    }
    evaluate_class_with(class_id, positives, negatives, |f| {
        Ok(model.classify(f)?.class_id == class_id)
    })
}

/// A set of registered classes that can each be verified.
pub trait Verifier {
    fn mode(&self) -> Mode;

    /// Sorted registered class ids.
    fn registered_classes(&self) -> Vec<ClassId>;

    fn evaluate_class(
        &self,
        class_id: ClassId,
        positives: &[FeatureVector],
        negatives: &[FeatureVector],
    ) -> Result<ClassResult>;

    fn trace_summaries(&self) -> Vec<TraceSummary> {
        Vec::new()
    }
}

/// OCON models by class, where some classes may have failed to load or train.
#[derive(Clone, Debug)]
pub struct OconRegistry {
    models: BTreeMap<ClassId, std::result::Result<ClassModel, String>>,
    pub threshold: f64,
}

impl OconRegistry {
    pub fn new(threshold: f64) -> Self {
        OconRegistry {
            models: BTreeMap::new(),
            threshold,
        }
    }

    pub fn from_ensemble(ensemble: &OconEnsemble, threshold: f64) -> Self {
        let mut reg = OconRegistry::new(threshold);
        for m in ensemble.models() {
            reg.insert(m.clone());
        }
        reg
    }

    pub fn insert(&mut self, model: ClassModel) {
        self.models.insert(model.class_id, Ok(model));
    }

    pub fn insert_unavailable(&mut self, class_id: ClassId, reason: impl Into<String>) {
        self.models.insert(class_id, Err(reason.into()));
    }
}

impl Verifier for OconRegistry {
    fn mode(&self) -> Mode {
        Mode::Ocon
    }

    fn registered_classes(&self) -> Vec<ClassId> {
        self.models.keys().copied().collect()
    }

    fn evaluate_class(
        &self,
        class_id: ClassId,
        positives: &[FeatureVector],
        negatives: &[FeatureVector],
    ) -> Result<ClassResult> {
        match self.models.get(&class_id) {
            Some(Ok(model)) => evaluate_class_ocon(model, positives, negatives, self.threshold),
            Some(Err(_)) => Err(Error::WeightsUnavailable(class_id)),
            None => Err(Error::UnknownClass(class_id)),
        }
    }

    fn trace_summaries(&self) -> Vec<TraceSummary> {
        self.models
            .values()
            .filter_map(|m| m.as_ref().ok())
            .filter_map(|m| m.trace.as_ref().map(|t| TraceSummary::new(Mode::Ocon, Some(m.class_id), t)))
            .collect()
    }
}

impl Verifier for AconModel {
    fn mode(&self) -> Mode {
        Mode::Acon
    }

    fn registered_classes(&self) -> Vec<ClassId> {
        let mut ids = self.class_ids.clone();
        ids.sort_unstable();
        ids
    }

    fn evaluate_class(
        &self,
        class_id: ClassId,
        positives: &[FeatureVector],
        negatives: &[FeatureVector],
    ) -> Result<ClassResult> {
        evaluate_class_acon(self, class_id, positives, negatives)
    }

    fn trace_summaries(&self) -> Vec<TraceSummary> {
        self.trace
            .iter()
            .map(|t| TraceSummary::new(Mode::Acon, None, t))
            .collect()
    }
}

/// Per-class test split.
#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    /// Positives per class (the first ones in sample order).
    pub n_pos: usize,
    /// Negatives per class, drawn from other classes' test samples.
    pub n_neg: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            n_pos: 10,
            n_neg: 10,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// The positive and negative test images selected for one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSplit {
    pub positives: Vec<FeatureVector>,
    pub negatives: Vec<FeatureVector>,
}

/// Selects `class_id`'s positives and its seeded negative draw.
pub fn class_split(class_id: ClassId, test: &[Labeled], protocol: &Protocol) -> Result<ClassSplit> {
    let positives: Vec<FeatureVector> = test
        .iter()
        .filter(|s| s.class_id == class_id)
        .take(protocol.n_pos)
        .map(|s| s.features.clone())
        .collect();
    if positives.is_empty() {
        return Err(Error::ProtocolError {
            class_id,
            message: "no positive test samples".into(),
        });
    }
    let pool: Vec<&Labeled> = test.iter().filter(|s| s.class_id != class_id).collect();
    if pool.is_empty() {
        return Err(Error::ProtocolError {
            class_id,
            message: "no negative test samples".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(class_seed(protocol.seed, class_id));
    let mut picks = index::sample(&mut rng, pool.len(), protocol.n_neg.min(pool.len())).into_vec();
    picks.sort_unstable();
    let negatives = picks.into_iter().map(|i| pool[i].features.clone()).collect();
    Ok(ClassSplit {
        positives,
        negatives,
    })
}

/// Verifies every registered class exactly once, regardless of intermediate
/// results. A class whose model fails is reported as errored.
pub fn evaluate_all<V: Verifier + ?Sized>(
    verifier: &V,
    test: &[Labeled],
    protocol: &Protocol,
) -> Result<EvaluationReport> {
    let mut per_class = Vec::new();
    for class_id in verifier.registered_classes() {
        let split = class_split(class_id, test, protocol)?;
        let outcome = match verifier.evaluate_class(class_id, &split.positives, &split.negatives) {
            Ok(r) => ClassOutcome::Scored(r),
            Err(e) => ClassOutcome::Errored {
                class_id,
                reason: e.to_string(),
            },
        };
        per_class.push(outcome);
    }
    let average_rate = average(per_class.iter().filter_map(|o| o.result().map(|r| r.rate)));
    Ok(EvaluationReport {
        mode: verifier.mode(),
        per_class,
        average_rate,
        traces: verifier.trace_summaries(),
    })
}

/// Closed-set classifier.
pub trait Identifier {
    fn identify(&self, f: &FeatureVector) -> Result<ClassId>;
}

impl Identifier for OconEnsemble {
    fn identify(&self, f: &FeatureVector) -> Result<ClassId> {
        Ok(self.classify(f)?.class_id)
    }
}

impl Identifier for AconModel {
    fn identify(&self, f: &FeatureVector) -> Result<ClassId> {
        Ok(self.classify(f)?.class_id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentificationReport {
    /// `(class_id, correct, total)` in class order.
    pub per_class: Vec<(ClassId, usize, usize)>,
    pub correct: usize,
    pub total: usize,
}

impl IdentificationReport {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

pub fn identify_all<I: Identifier + ?Sized>(model: &I, samples: &[Labeled]) -> Result<IdentificationReport> {
    let mut counts: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    for s in samples {
        let hit = model.identify(&s.features)? == s.class_id;
        let entry = counts.entry(s.class_id).or_default();
        entry.0 += usize::from(hit);
        entry.1 += 1;
    }
    let per_class: Vec<_> = counts.into_iter().map(|(c, (ok, n))| (c, ok, n)).collect();
    let correct = per_class.iter().map(|p| p.1).sum();
    Ok(IdentificationReport {
        per_class,
        correct,
        total: samples.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

pub const REPORT_CSV_HEADER: &str = "class_id,n_test,n_pos,n_neg,correct,rate_percent";
pub const TRACE_CSV_HEADER: &str = "epoch,mse";

fn percent(rate: f64) -> String {
    format!("{}%", rate.round())
}

pub fn render_report(report: &EvaluationReport, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Table => {
            writeln!(out, "{} verification results", report.mode).unwrap();
            writeln!(
                out,
                "{:<10} {:>6} {:>10} {:>10} {:>6}",
                "Class", "Total", "Positives", "Negatives", "Rate"
            )
            .unwrap();
            for o in &report.per_class {
                match o {
                    ClassOutcome::Scored(r) => writeln!(
                        out,
                        "{:<10} {:>6} {:>10} {:>10} {:>6}",
                        format!("Class-{}", r.class_id),
                        r.n_test,
                        r.n_pos,
                        r.n_neg,
                        percent(r.rate)
                    ),
                    ClassOutcome::Errored { class_id, reason } => {
                        writeln!(out, "{:<10} error: {reason}", format!("Class-{class_id}"))
                    }
                }
                .unwrap();
            }
            writeln!(out, "{:<39} {:>6}", "Average", percent(report.average_rate)).unwrap();
        }
        Format::Csv => {
            out.push_str(REPORT_CSV_HEADER);
            out.push('\n');
            for o in &report.per_class {
                match o {
                    ClassOutcome::Scored(r) => writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.class_id, r.n_test, r.n_pos, r.n_neg, r.correct, r.rate
                    ),
                    ClassOutcome::Errored { class_id, .. } => writeln!(out, "{class_id},,,,,"),
                }
                .unwrap();
            }
            writeln!(out, "average,,,,,{}", report.average_rate).unwrap();
        }
    }
    out
}

/// Numbers recovered from [`render_report`]'s CSV form.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedReport {
    pub per_class: Vec<ClassResult>,
    pub errored: Vec<ClassId>,
    pub average_rate: f64,
}

pub fn parse_report_csv(text: &str) -> Result<ParsedReport> {
    let bad = |line: usize, m: &str| Error::malformed("<report csv>", format!("line {line}: {m}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, REPORT_CSV_HEADER)) => {}
        _ => return Err(bad(1, "missing report header")),
    }
    let mut parsed = ParsedReport {
        per_class: Vec::new(),
        errored: Vec::new(),
        average_rate: f64::NAN,
    };
    for (i, line) in lines {
        let no = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(no, "expected 6 fields"));
        }
        if f[0] == "average" {
            parsed.average_rate = f[5].parse().map_err(|_| bad(no, "bad average"))?;
            continue;
        }
        let class_id: ClassId = f[0].parse().map_err(|_| bad(no, "bad class id"))?;
        if f[1..].iter().all(|x| x.is_empty()) {
            parsed.errored.push(class_id);
            continue;
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(no, "bad count"));
        let (n_test, n_pos, n_neg, correct) = (num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?);
        let rate: f64 = f[5].parse().map_err(|_| bad(no, "bad rate"))?;
        parsed.per_class.push(ClassResult {
            class_id,
            n_test,
            n_pos,
            n_neg,
            correct,
            rate,
        });
    }
    Ok(parsed)
}

/// Epochs and final MSE per network, one row each.
pub fn render_traces(traces: &[TraceSummary], format: Format) -> String {
    let mut out = String::new();
    let status = |t: &TraceSummary| if t.goal_met { "goal met" } else { "goal not met" };
    let label = |t: &TraceSummary| match t.class_id {
        Some(c) => format!("Class-{c}"),
        None => "all classes".to_string(),
    };
    match format {
        Format::Table => {
            writeln!(
                out,
                "{:<8} {:<12} {:>10} {:>14} {:>10}  Status",
                "Network", "Class", "Epochs", "Final MSE", "Goal"
            )
            .unwrap();
            for t in traces {
                writeln!(
                    out,
                    "{:<8} {:<12} {:>10} {:>14.6e} {:>10.1e}  {}",
                    t.mode.to_string(),
                    label(t),
                    t.epochs_run,
                    t.final_mse,
                    t.goal,
                    status(t)
                )
                .unwrap();
            }
        }
        Format::Csv => {
            out.push_str("network,class_id,epochs_run,final_mse,goal,goal_met\n");
            for t in traces {
                let id = t.class_id.map(|c| c.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    t.mode, id, t.epochs_run, t.final_mse, t.goal, t.goal_met
                )
                .unwrap();
            }
        }
    }
    out
}

/// `epoch,mse` rows of one network's training history.
pub fn convergence_trace_csv(trace: &TrainingTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for (epoch, mse) in &trace.mse_history {
        writeln!(out, "{epoch},{mse}").unwrap();
    }
    out
}

/// Final ACON MSE next to its goal and the OCON subnets' final MSEs.
pub fn convergence_summary(ocon: &[TraceSummary], acon: Option<&TraceSummary>) -> String {
    let mut out = String::new();
    if !ocon.is_empty() {
        let met = ocon.iter().filter(|t| t.goal_met).count();
        let worst = ocon.iter().map(|t| t.final_mse).fold(f64::NEG_INFINITY, f64::max);
        writeln!(
            out,
            "OCON: {met}/{} subnets met the goal; largest final MSE {worst:.6e}",
            ocon.len()
        )
        .unwrap();
    }
    if let Some(a) = acon {
        writeln!(
            out,
            "ACON: final MSE {:.6e} after {} epochs (goal {:.1e}, {})",
            a.final_mse,
            a.epochs_run,
            a.goal,
            if a.goal_met { "met" } else { "not met" }
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::class_seed;
    use crate::mlp::{Layer, Weights};

    fn constant_model(class_id: ClassId, out: f64) -> ClassModel {
        let bias = (out / (1.0 - out)).ln();
        let layer = Layer { fan_in: 2, fan_out: 1, w: vec![0.0, 0.0], b: vec![bias] };
        ClassModel::new(class_id, Weights::from_layers(vec![layer]).unwrap(), None).unwrap()
    }

    fn fv(x: f64) -> FeatureVector {
        FeatureVector::new(vec![x, 0.0])
    }

    #[test]
    fn rate_arithmetic() {
        assert_eq!(ClassResult::from_counts(3, 10, 10, 18).rate, 90.0);
        assert_eq!(ClassResult::from_counts(10, 10, 10, 14).rate, 70.0);
        assert_eq!(ClassResult::from_counts(1, 10, 10, 20).rate, 100.0);
    }

    #[test]
    fn perfect_subnet_scores_100() {
        // weight on the first coordinate separates +5 (positives) from -5
        let layer = Layer { fan_in: 2, fan_out: 1, w: vec![10.0, 0.0], b: vec![0.0] };
        let m = ClassModel::new(1, Weights::from_layers(vec![layer]).unwrap(), None).unwrap();
        let pos = vec![fv(5.0); 10];
        let neg = vec![fv(-5.0); 10];
        let r = evaluate_class_ocon(&m, &pos, &neg, 0.5).unwrap();
        assert_eq!((r.n_test, r.n_pos, r.n_neg, r.correct, r.rate), (20, 10, 10, 20, 100.0));
    }

    #[test]
    fn constant_scorer_below_threshold_gets_half() {
        let m = constant_model(1, 0.5 - 1e-6);
        let r = evaluate_class_ocon(&m, &vec![fv(1.0); 10], &vec![fv(2.0); 10], 0.5).unwrap();
        assert_eq!(r.correct, 10);
        assert_eq!(r.rate, 50.0);
    }

    #[test]
    fn acon_constant_predictor() {
        // always predicts class 1
        let layer = Layer { fan_in: 2, fan_out: 3, w: vec![0.0; 6], b: vec![2.0, -2.0, -2.0] };
        let m = AconModel::new(vec![1, 2, 3], Weights::from_layers(vec![layer]).unwrap(), None).unwrap();
        let r = evaluate_class_acon(&m, 1, &vec![fv(0.0); 10], &vec![fv(1.0); 10]).unwrap();
        assert_eq!(r.rate, 50.0);
        assert!(matches!(
            evaluate_class_acon(&m, 9, &[fv(0.0)], &[fv(0.0)]),
            Err(Error::UnknownClass(9))
        ));
    }

    fn test_set(classes: u32, per_class: usize) -> Vec<Labeled> {
        let mut out = Vec::new();
        for c in 1..=classes {
            for i in 0..per_class {
                out.push(Labeled::new(vec![c as f64, i as f64], c));
            }
        }
        out
    }

    #[test]
    fn split_is_seeded_and_excludes_own_class() {
        let test = test_set(10, 20);
        let p = Protocol { seed: 4, ..Protocol::default() };
        let a = class_split(3, &test, &p).unwrap();
        assert_eq!(a, class_split(3, &test, &p).unwrap());
        assert_eq!(a.positives.len(), 10);
        assert_eq!(a.negatives.len(), 10);
        assert!(a.positives.iter().all(|f| f.coeffs[0] == 3.0));
        assert!(a.negatives.iter().all(|f| f.coeffs[0] != 3.0));
        let other = class_split(3, &test, &Protocol { seed: 5, ..p.clone() }).unwrap();
        assert_ne!(a.negatives, other.negatives);
        assert_ne!(class_seed(4, 3), class_seed(5, 3));
    }

    #[test]
    fn missing_positives_is_a_protocol_error() {
        let mut reg = OconRegistry::new(0.5);
        reg.insert(constant_model(1, 0.9));
        reg.insert(constant_model(2, 0.9));
        let mut test: Vec<Labeled> = test_set(1, 5);
        test.push(Labeled::new(vec![3.0, 0.0], 3));
        assert!(matches!(
            evaluate_all(&reg, &test, &Protocol::default()),
            Err(Error::ProtocolError { class_id: 2, .. })
        ));
    }

    #[test]
    fn unavailable_class_is_marked_errored() {
        let mut reg = OconRegistry::new(0.5);
        reg.insert(constant_model(1, 0.9));
        reg.insert_unavailable(2, "gone");
        reg.insert(constant_model(3, 0.1));
        let report = evaluate_all(&reg, &test_set(3, 20), &Protocol::default()).unwrap();
        assert_eq!(report.per_class.len(), 3);
        assert_eq!(report.errored().collect::<Vec<_>>(), vec![2]);
        // class 1 accepts everything, class 3 rejects everything: 50% each
        assert_eq!(report.average_rate, 50.0);
        let csv = render_report(&report, Format::Csv);
        assert!(csv.contains("\n2,,,,,\n"));
        let parsed = parse_report_csv(&csv).unwrap();
        assert_eq!(parsed.errored, vec![2]);
        assert_eq!(parsed.per_class.len(), 2);
    }

    fn fixture_report() -> EvaluationReport {
        EvaluationReport {
            mode: Mode::Ocon,
            per_class: (1..=10).map(|c| ClassOutcome::Scored(ClassResult::from_counts(c, 10, 10, 20))).collect(),
            average_rate: 100.0,
            traces: vec![],
        }
    }

    #[test]
    fn table_rows_follow_columns() {
        let text = render_report(&fixture_report(), Format::Table);
        let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("Class-")).collect();
        assert_eq!(rows.len(), 10);
        for row in rows {
            let cols: Vec<&str> = row.split_whitespace().collect();
            assert_eq!(&cols[1..], &["20", "10", "10", "100%"]);
        }
        assert!(text.lines().last().unwrap().ends_with("100%"));
    }

    #[test]
    fn csv_and_table_agree() {
        let mut report = fixture_report();
        report.per_class[2] = ClassOutcome::Scored(ClassResult::from_counts(3, 10, 10, 17));
        report.average_rate = 98.5;
        let csv = parse_report_csv(&render_report(&report, Format::Csv)).unwrap();
        let table = render_report(&report, Format::Table);
        for (row, r) in table.lines().filter(|l| l.starts_with("Class-")).zip(&csv.per_class) {
            let cols: Vec<&str> = row.split_whitespace().collect();
            assert_eq!(cols[0], format!("Class-{}", r.class_id));
            assert_eq!(cols[1].parse::<usize>().unwrap(), r.n_test);
            assert_eq!(cols[4], format!("{}%", r.rate.round()));
        }
        assert_eq!(csv.average_rate, 98.5);
    }

    fn trace(epochs: usize, goal_met: bool) -> TrainingTrace {
        TrainingTrace {
            epochs_run: epochs,
            mse_history: (1..=epochs).map(|e| (e, 1.0 / e as f64)).collect(),
            final_mse: 1.0 / epochs as f64,
            goal_met,
            goal: 1e-6,
            max_epochs: 700_000,
            wall_time: 0.0,
        }
    }

    #[test]
    fn trace_table_marks_unmet_goal() {
        let t = TraceSummary {
            final_mse: 0.0100274,
            ..TraceSummary::new(Mode::Acon, None, &trace(700_000, false))
        };
        let text = render_traces(std::slice::from_ref(&t), Format::Table);
        let row = text.lines().nth(1).unwrap();
        assert!(row.contains("700000"));
        assert!(row.ends_with("goal not met"));
        let csv = render_traces(&[t], Format::Csv);
        assert_eq!(csv.lines().nth(1).unwrap(), "ACON,,700000,0.0100274,0.000001,false");
    }

    #[test]
    fn convergence_csv_rows() {
        let csv = convergence_trace_csv(&trace(3, false));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines, vec!["epoch,mse", "1,1", "2,0.5", "3,0.3333333333333333"]);
    }

    #[test]
    fn identification_counts() {
        let layer = Layer { fan_in: 2, fan_out: 2, w: vec![1.0, 0.0, -1.0, 0.0], b: vec![0.0, 0.0] };
        let m = AconModel::new(vec![1, 2], Weights::from_layers(vec![layer]).unwrap(), None).unwrap();
        let samples = vec![
            Labeled::new(vec![1.0, 0.0], 1),
            Labeled::new(vec![-1.0, 0.0], 2),
            Labeled::new(vec![1.0, 0.0], 2),
        ];
        let r = identify_all(&m, &samples).unwrap();
        assert_eq!(r.per_class, vec![(1, 1, 1), (2, 1, 2)]);
        assert!((r.rate() - 200.0 / 3.0).abs() < 1e-12);
    }
}
